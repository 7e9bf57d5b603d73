import numpy as np
import pytest
from numpy.testing import assert_allclose

import greenmorse as gm
from conftest import DIPOLE_RADIUS

TWO_PI = 2 * np.pi

# margin path of the perturbed-dipole experiment, recorded from the first
# validated run (256 nodes, cos 3t field, grid below)
CONTINUATION_GRID = (0.0, 0.0025, 0.005, 0.01, 0.02, 0.03, 0.04, 0.05)
CONTINUATION_MARGINS = (
    4.440892098500626e-16,
    6.332344099024834e-05,
    0.0002528463573027717,
    0.001004312361471249,
    0.003909070472840309,
    0.008425035380950185,
    0.014164340339655801,
    0.02072406845196395,
)


@pytest.fixture(scope="module")
def dipole_trace(disk_domain, dipole_setup):
    lam, config, spec = dipole_setup
    return gm.continue_critical_point(disk_domain, gm.cosine_field(3),
                                      CONTINUATION_GRID, config.flat(), lam, spec)


# ---------------------------------------------------------------------------
# boundary-integral variation formulas
# ---------------------------------------------------------------------------

def test_dH_disk_dilation_oracle(disk_engine, integral_engine):
    # scaling the disk: H_R(0,0) = -(1/2pi) ln R, so the variation is -1/2pi
    for engine in (disk_engine, integral_engine):
        got = gm.dH_shape(engine, [0.0, 0.0], [0.0, 0.0], gm.identity_dilation())
        assert_allclose(got, -1 / TWO_PI, atol=1e-10)


def test_dH_zero_field(disk_engine):
    assert gm.dH_shape(disk_engine, [0.3, 0.0], [0.1, 0.2], gm.zero_field()) == 0.0


def test_dH_linear_in_field(disk_engine):
    x, y = [0.3, 0.0], [0.1, 0.2]
    f1 = gm.cosine_field(2)
    f2 = gm.normal_field([0.0], [0.0, 0.0, 0.0, 1.0])
    fsum = gm.normal_field([0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0])
    a = gm.dH_shape(disk_engine, x, y, f1)
    b = gm.dH_shape(disk_engine, x, y, f2)
    c = gm.dH_shape(disk_engine, x, y, fsum)
    assert abs(c - a - b) <= 1e-10 * max(abs(c), 1.0)
    half = gm.normal_field([0.0, 0.0, 0.5])
    assert abs(gm.dH_shape(disk_engine, x, y, half) - 0.5 * a) <= 1e-12


def test_dH_symmetric_in_points(disk_engine):
    x, y = [0.3, -0.1], [0.15, 0.25]
    field = gm.cosine_field(3)
    assert gm.dH_shape(disk_engine, x, y, field) == gm.dH_shape(disk_engine, y, x, field)


def test_dH_sign_coherence_under_expansion(disk_engine):
    # fields with <phi,nu> >= 0 expand the domain; the Robin value cannot rise
    for field in (gm.identity_dilation(), gm.normal_field([1.0, 0.0, 0.0, 0.3])):
        for x in ([0.0, 0.0], [0.4, 0.1], [-0.3, 0.3]):
            assert gm.dH_shape(disk_engine, x, x, field) < 0


def test_dRobin_disk_dilation_oracle(disk_engine):
    got = gm.dRobin_shape(disk_engine, [0.0, 0.0], gm.identity_dilation())
    assert_allclose(got, -1 / TWO_PI, atol=1e-12)


def test_dRobin_zero_field(disk_engine):
    assert gm.dRobin_shape(disk_engine, [0.4, 0.0], gm.zero_field()) == 0.0


def test_dRobin_point_motion_term(disk_engine):
    # dilation at x != 0: closed form h_{R}((1+eps)x) = -(1/2pi)(ln(1+eps)+ln(1-r^2))
    x = np.array([0.5, 0.0])
    got = gm.dRobin_shape(disk_engine, x, gm.identity_dilation())
    assert_allclose(got, -1 / TWO_PI, rtol=1e-10)


def test_dGradF_zero_field(disk_engine, dipole_setup):
    lam, config, spec = dipole_setup
    out = gm.dGradF_shape(disk_engine, lam, spec, config, gm.zero_field())
    assert np.all(out == 0.0)


def test_dGradF_symmetric_point_with_radial_field(disk_engine):
    # rotation-invariant boundary field at the centered single vortex
    lam = gm.VortexStrengths([1.0])
    config = gm.Configuration([[0.0, 0.0]])
    field = gm.normal_field([1.0], cutoff_width=0.3)
    out = gm.dGradF_shape(disk_engine, lam, gm.zero_interaction(), config, field)
    assert np.max(np.abs(out)) <= 1e-8


def test_dGradF_orthogonal_to_orbit_tangent(disk_engine, dipole_setup):
    lam, config, spec = dipole_setup
    field = gm.normal_field([1.0], cutoff_width=0.3)   # rotation invariant
    out = gm.dGradF_shape(disk_engine, lam, spec, config, field)
    pts = config.points
    tangent = np.stack([-pts[:, 1], pts[:, 0]], axis=1).reshape(-1)
    tangent /= np.linalg.norm(tangent)
    assert abs(out @ tangent) <= 1e-8 * max(np.linalg.norm(out), 1.0)


def test_dGradF_rejects_field_overlapping_points(disk_engine, dipole_setup):
    lam, config, spec = dipole_setup
    wide = gm.cosine_field(3, cutoff_width=0.8)   # support reaches the dipole
    with pytest.raises(gm.UnsupportedFieldError):
        gm.dGradF_shape(disk_engine, lam, spec, config, wide)
    off_center = gm.Configuration([[0.3, 0.0]])
    with pytest.raises(gm.UnsupportedFieldError):
        gm.dGradF_shape(disk_engine, gm.VortexStrengths([1.0]), gm.zero_interaction(),
                        off_center, gm.identity_dilation())


# ---------------------------------------------------------------------------
# finite-difference harness
# ---------------------------------------------------------------------------

def test_fd_check_dH_dilation(disk_domain):
    report = gm.fd_check(disk_domain, "H", gm.identity_dilation(),
                         [1e-2, 5e-3, 2.5e-3], x=[0.0, 0.0], y=[0.0, 0.0])
    assert report.passed
    assert_allclose(report.analytic, -1 / TWO_PI, atol=1e-10)
    assert abs(report.richardson - report.analytic) <= 1e-8


def test_fd_check_dH_material_convention(disk_domain):
    # dilation moves off-center points; the material value is still -1/2pi
    report = gm.fd_check(disk_domain, "H", gm.identity_dilation(),
                         [1e-2, 5e-3, 2.5e-3], x=[0.5, 0.0], y=[0.5, 0.0])
    assert report.passed
    assert_allclose(report.analytic, -1 / TWO_PI, rtol=1e-9)


def test_fd_check_dH_cutoff_field(disk_domain):
    report = gm.fd_check(disk_domain, "H", gm.cosine_field(3),
                         [1e-2, 5e-3, 2.5e-3], x=[0.3, 0.0], y=[0.1, 0.2])
    assert report.passed
    assert report.rel_error <= 1e-5
    assert report.observed_order is None or report.observed_order >= 1.0


def test_fd_check_zero_field(disk_domain):
    report = gm.fd_check(disk_domain, "H", gm.zero_field(),
                         [1e-2, 5e-3, 2.5e-3], x=[0.3, 0.0], y=[0.1, 0.2])
    assert report.passed
    assert all(v == 0.0 for v in report.fd_values)


def test_fd_check_robin(disk_domain):
    report = gm.fd_check(disk_domain, "robin", gm.cosine_field(2),
                         [1e-2, 5e-3, 2.5e-3], x=[0.4, 0.0])
    assert report.passed and report.rel_error <= 1e-5
    assert report.observed_order >= 1.0


def test_fd_check_grad_f_at_dipole(disk_domain, dipole_setup):
    lam, config, spec = dipole_setup
    report = gm.fd_check(disk_domain, "grad_f", gm.cosine_field(3),
                         [1e-2, 5e-3, 2.5e-3],
                         strengths=lam, spec=spec, config=config)
    assert report.passed and report.rel_error <= 1e-5
    assert report.observed_order >= 1.0


def test_fd_check_ladder_validation(disk_domain):
    with pytest.raises(ValueError):
        gm.fd_check(disk_domain, "H", gm.cosine_field(3), [1e-3, 1e-2],
                    x=[0.0, 0.0], y=[0.1, 0.0])
    with pytest.raises(gm.PerturbationTooLargeError):
        gm.fd_check(disk_domain, "H", gm.identity_dilation(), [0.5, 0.25],
                    x=[0.0, 0.0], y=[0.1, 0.0])


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

def test_continuation_trivial_grid(disk_domain, dipole_setup):
    lam, config, spec = dipole_setup
    trace = gm.continue_critical_point(disk_domain, gm.cosine_field(3), [0.0],
                                       config.flat(), lam, spec)
    assert trace.eps_values == (0.0,)
    assert_allclose(trace.configurations[0], config.points, atol=1e-14)
    assert not trace.truncated


def test_continuation_margin_path(dipole_trace):
    assert not dipole_trace.truncated
    assert dipole_trace.eps_values == CONTINUATION_GRID
    for res in dipole_trace.residuals:
        assert res <= 1e-8
    # orbit degeneracy at eps = 0, broken once the symmetry is gone
    assert dipole_trace.margins[0] <= 1e-6
    for eps, margin in zip(dipole_trace.eps_values, dipole_trace.margins):
        if eps >= 0.01:
            assert margin >= 1e-4


def test_continuation_margins_regression(dipole_trace):
    assert_allclose(dipole_trace.margins, CONTINUATION_MARGINS, rtol=1e-6, atol=1e-12)


def test_continuation_predictor_engages(dipole_trace):
    # predictor must be skipped on the degenerate start and used later
    assert dipole_trace.predictor_used[0] is False
    assert dipole_trace.predictor_used[1] is False
    assert any(dipole_trace.predictor_used[2:])


def test_continuation_stays_on_axis(dipole_trace):
    for cfg in dipole_trace.configurations:
        assert np.max(np.abs(np.asarray(cfg)[:, 1])) <= 1e-8


def test_equivariant_continuation_matches(disk_domain, dipole_setup, dipole_trace):
    lam, config, spec = dipole_setup
    sym = gm.SymmetryGroup("cyclic", 3)
    domain = gm.DomainSpec(gm.unit_circle(), symmetry=sym)
    projected = gm.equivariant_project(gm.cosine_field(3), sym, domain)
    trace = gm.continue_critical_point(domain, projected, CONTINUATION_GRID,
                                       config.flat(), lam, spec)
    assert not trace.truncated
    assert_allclose(trace.margins, dipole_trace.margins, rtol=1e-8, atol=1e-14)


def test_continuation_csv_rows(dipole_trace):
    rows = dipole_trace.csv_rows()
    assert rows[0] == ["eps", "x1", "y1", "x2", "y2", "residual", "min_abs_eig"]
    assert len(rows) == len(CONTINUATION_GRID) + 1
