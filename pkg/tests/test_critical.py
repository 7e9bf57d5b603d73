import numpy as np
import pytest
from numpy.testing import assert_allclose

import greenmorse as gm
from conftest import DIPOLE_RADIUS, orbit_distance


@pytest.fixture(scope="module")
def n1_report(disk_engine):
    return gm.find_critical_points(
        disk_engine, gm.VortexStrengths([1.0]), gm.zero_interaction(),
        gm.SearchConfig(starts=50, seed=7))


@pytest.fixture(scope="module")
def dipole_report(disk_engine):
    return gm.find_critical_points(
        disk_engine, gm.VortexStrengths([1.0, -1.0]), gm.kirchhoff_routh_interaction(),
        gm.SearchConfig(starts=200, seed=11))


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def test_classify_negative_definite():
    cls = gm.classify(-np.eye(2) / np.pi)
    assert cls.morse_index == 2
    assert_allclose(cls.margin, 1 / np.pi, rtol=1e-14)


def test_classify_mixed_diagonal():
    cls = gm.classify(np.diag([1.0, -1.0, 0.5, 2.0]))
    assert cls.morse_index == 1
    assert_allclose(cls.margin, 0.5)
    assert np.all(np.diff(cls.spectrum) >= 0)


def test_classify_zero_matrix():
    cls = gm.classify(np.zeros((4, 4)))
    assert cls.morse_index == 0
    assert cls.margin == 0.0


# ---------------------------------------------------------------------------
# fixtures on the disk
# ---------------------------------------------------------------------------

def test_n1_unique_critical_point_at_origin(n1_report):
    assert len(n1_report.points) == 1
    cp = n1_report.points[0]
    assert np.linalg.norm(cp.configuration.points[0]) <= 1e-8
    assert cp.morse_index == 2
    assert_allclose(cp.margin, 1 / np.pi, atol=1e-8)
    assert cp.residual <= 1e-10


def test_n1_search_stats(n1_report):
    stats = n1_report.stats
    assert stats["starts"] == 50
    assert stats["converged"] >= 45
    assert stats["converged"] - stats["deduplicated"] == 1


def test_dipole_orbit_found(dipole_report):
    assert len(dipole_report.points) >= 20
    for cp in dipole_report.points:
        pts = cp.configuration.points
        for p in pts:
            assert abs(np.hypot(*p) - DIPOLE_RADIUS) <= 1e-8
        # antipodal pair
        assert np.linalg.norm(pts[0] + pts[1]) <= 1e-8
        assert cp.residual <= 1e-8


def test_dipole_orbit_tags(dipole_report):
    for cp in dipole_report.points:
        assert cp.orbit_tag == "rotation-orbit"
        assert cp.alignment >= 0.999
        assert cp.margin <= 1e-5 * np.max(np.abs(cp.spectrum))


def test_dipole_found_at_multiple_angles(dipole_report):
    angles = sorted(np.arctan2(p.configuration.points[0][1], p.configuration.points[0][0])
                    for p in dipole_report.points)
    spread = np.ptp(angles)
    assert spread > 1.0


def test_equal_pair_has_no_critical_points(disk_engine):
    report = gm.find_critical_points(
        disk_engine, gm.VortexStrengths([1.0, 1.0]), gm.kirchhoff_routh_interaction(),
        gm.SearchConfig(starts=200, seed=11))
    assert len(report.points) == 0
    assert report.stats["rejected_inadmissible"] == 200


# ---------------------------------------------------------------------------
# determinism / dedup / re-evaluation properties
# ---------------------------------------------------------------------------

def test_search_deterministic(disk_engine):
    cfg = gm.SearchConfig(starts=40, seed=3)
    lam = gm.VortexStrengths([1.0])
    a = gm.find_critical_points(disk_engine, lam, gm.zero_interaction(), cfg)
    b = gm.find_critical_points(disk_engine, lam, gm.zero_interaction(), cfg)
    assert len(a.points) == len(b.points)
    for pa, pb in zip(a.points, b.points):
        assert np.array_equal(pa.configuration.points, pb.configuration.points)


def test_no_two_report_entries_within_dedup_radius(dipole_report):
    pts = [cp.configuration.flat() for cp in dipole_report.points]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            assert np.linalg.norm(pts[i] - pts[j]) > 1e-6


def test_doubling_starts_keeps_critical_set(disk_engine):
    lam = gm.VortexStrengths([1.0])
    spec = gm.zero_interaction()
    a = gm.find_critical_points(disk_engine, lam, spec, gm.SearchConfig(starts=25, seed=5))
    b = gm.find_critical_points(disk_engine, lam, spec, gm.SearchConfig(starts=50, seed=5))
    assert len(a.points) == len(b.points) == 1
    d = np.linalg.norm(a.points[0].configuration.flat() - b.points[0].configuration.flat())
    assert d <= 1e-6


def test_doubling_starts_keeps_dipole_orbit(disk_engine, dipole_report):
    small = gm.find_critical_points(
        disk_engine, gm.VortexStrengths([1.0, -1.0]), gm.kirchhoff_routh_interaction(),
        gm.SearchConfig(starts=100, seed=11))
    for cp in small.points:
        dist = min(orbit_distance(cp.configuration.points, other.configuration.points)
                   for other in dipole_report.points)
        assert dist <= 1e-6


def test_reevaluation_at_doubled_nodes(disk_domain, dipole_report, dipole_setup):
    lam, _, spec = dipole_setup
    fresh = gm.build_engine(disk_domain, 512, backend="integral")
    for cp in dipole_report.points[:5]:
        res = gm.f_omega(fresh, lam, spec, cp.configuration)
        assert np.linalg.norm(res.gradient) <= 10 * 1e-10 + cp.residual


def test_rotate_and_polish_returns_to_orbit(disk_engine, dipole_report, dipole_setup):
    lam, _, spec = dipole_setup
    rng = np.random.default_rng(9)
    cfg = gm.SearchConfig(starts=1, seed=0)
    for cp in dipole_report.points[:3]:
        theta = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        rotated = cp.configuration.points @ rot.T
        result = gm.newton_polish(disk_engine, lam, spec, rotated.reshape(-1), cfg)
        assert result.converged
        dist = min(orbit_distance(result.configuration.reshape(-1, 2),
                                  other.configuration.points)
                   for other in dipole_report.points)
        assert dist <= 1e-6


# ---------------------------------------------------------------------------
# orbit detection
# ---------------------------------------------------------------------------

def test_detect_orbit_on_dipole(disk_engine, dipole_report):
    tag, alignment = gm.detect_rotation_orbit(disk_engine, dipole_report.points[0])
    assert tag == "rotation-orbit"
    assert alignment >= 0.999


def test_detect_orbit_undefined_at_origin(disk_engine):
    cp = gm.CriticalPoint(gm.Configuration([[0.0, 0.0]]), 0.0,
                          np.array([-1 / np.pi, -1 / np.pi]), 2, 1 / np.pi,
                          -np.eye(2) / np.pi)
    with pytest.raises(gm.UndefinedOrbitError):
        gm.detect_rotation_orbit(disk_engine, cp)


def test_detect_orbit_isolated_on_lobed_domain(lobed_engine, dipole_setup):
    # continue-by-hand: polish the disk dipole on the perturbed domain and
    # check the orbit degeneracy is gone
    lam, config, spec = dipole_setup
    lobed_sym = gm.DomainSpec(lobed_engine.domain.boundary, None,
                              gm.SymmetryGroup("cyclic", 3))
    engine = gm.build_engine(lobed_sym, 256)
    result = gm.newton_polish(engine, lam, spec, config.flat(),
                              gm.SearchConfig(starts=1, newton_tol=1e-10))
    assert result.converged
    cls = gm.classify(result.hessian)
    cp = gm.CriticalPoint(gm.Configuration(result.configuration.reshape(-1, 2)),
                          result.residual, cls.spectrum, cls.morse_index,
                          cls.margin, result.hessian)
    tag, _ = gm.detect_rotation_orbit(engine, cp)
    assert tag == "isolated"
    assert cls.margin >= 1e-4


def test_detect_orbit_requires_symmetry(lobed_engine, dipole_report):
    # lobed domain fixture carries no symmetry tag
    assert lobed_engine.domain.symmetry is None
    with pytest.raises(gm.SymmetryMismatchError):
        gm.detect_rotation_orbit(lobed_engine, dipole_report.points[0])


def test_search_config_validation():
    with pytest.raises(ValueError):
        gm.SearchConfig(newton_tol=-1.0)
    with pytest.raises(ValueError):
        gm.SearchConfig(newton_tol=1e-4, dedup_radius=1e-4)
