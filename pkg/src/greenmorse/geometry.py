"""Smooth bounded planar domains given by truncated Fourier boundary curves.

A boundary curve is a closed parametrization t -> (x(t), y(t)), t in [0, 2pi),
with each coordinate a trigonometric polynomial.  Domains built on such curves
are analytic, so boundary quadratures converge spectrally and perturbed
boundaries can be re-fit exactly up to a monitored truncation error.

All types are immutable after construction; every operation is a pure
function, safe for concurrent use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import (
    EmptyRegionError,
    MalformedCurveError,
    PerturbationTooLargeError,
    RefitFailureError,
    SymmetryMismatchError,
)

TWO_PI = 2.0 * np.pi

# dense sampling used for distance / winding / self-intersection checks
_DENSE_MIN = 1024
# pointwise tolerance for symmetry-invariance verification
_SYMMETRY_TOL = 1e-10


def _as_coeffs(values) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    if arr.ndim != 1:
        raise ValueError("coefficient list must be one-dimensional")
    arr.setflags(write=False)
    return arr


class BoundaryFrame(NamedTuple):
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    """Closed simple curve t -> sum_k a_k cos(kt) + b_k sin(kt), per coordinate.

    ``cos_x[k]`` multiplies cos(kt) in x(t) and so on; ``sin_*[0]`` is unused.
    The parametrization is required to be regular (nonvanishing tangent) and
    counterclockwise (positive signed area).
    """

    cos_x: np.ndarray
    sin_x: np.ndarray
    cos_y: np.ndarray
    sin_y: np.ndarray
    node_hint: int = 256

    def __post_init__(self):
        arrays = [_as_coeffs(a) for a in (self.cos_x, self.sin_x, self.cos_y, self.sin_y)]
        degree = max(len(a) for a in arrays)
        degree = max(degree, 2)  # hold at least wavenumbers {0, 1}
        padded = []
        for a in arrays:
            out = np.zeros(degree)
            out[: len(a)] = a
            padded.append(out)
        # sin coefficients at wavenumber 0 are meaningless; force them to zero
        padded[1][0] = 0.0
        padded[3][0] = 0.0
        for name, arr in zip(("cos_x", "sin_x", "cos_y", "sin_y"), padded):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def max_degree(self) -> int:
        return len(self.cos_x) - 1

    def _trig(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(len(self.cos_x))
        kt = np.outer(t, k)
        return np.cos(kt), np.sin(kt)

    def point(self, t) -> np.ndarray:
        """Boundary points at parameters ``t``, shape (len(t), 2)."""
        C, S = self._trig(t)
        return np.stack([C @ self.cos_x + S @ self.sin_x,
                         C @ self.cos_y + S @ self.sin_y], axis=-1)

    def derivative(self, t, order: int = 1) -> np.ndarray:
        """Derivative of the parametrization with respect to t."""
        k = np.arange(len(self.cos_x), dtype=float)
        ax, bx = self.cos_x, self.sin_x
        ay, by = self.cos_y, self.sin_y
        for _ in range(order):
            ax, bx = k * bx, -k * ax
            ay, by = k * by, -k * ay
        C, S = self._trig(t)
        return np.stack([C @ ax + S @ bx, C @ ay + S @ by], axis=-1)

    def frame(self, t) -> BoundaryFrame:
        """Point, unit tangent, outward unit normal, and curvature at scalar t."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.point(ts)
        d1 = self.derivative(ts, 1)
        d2 = self.derivative(ts, 2)
        speed = np.hypot(d1[..., 0], d1[..., 1])
        if np.any(speed < 1e-12):
            raise MalformedCurveError(f"degenerate tangent at t={t}")
        tang = d1 / speed[..., None]
        normal = np.stack([tang[..., 1], -tang[..., 0]], axis=-1)
        curv = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / speed**3
        if np.isscalar(t) or np.ndim(t) == 0:
            return BoundaryFrame(p[0], tang[0], normal[0], float(curv[0]))
        return BoundaryFrame(p, tang, normal, curv)

    @cached_property
    def _dense(self):
        m = max(_DENSE_MIN, 16 * len(self.cos_x))
        t = TWO_PI * np.arange(m) / m
        pts = self.point(t)
        return t, pts

    @cached_property
    def signed_area(self) -> float:
        m = max(64, 4 * len(self.cos_x))
        t = TWO_PI * np.arange(m) / m
        p = self.point(t)
        d1 = self.derivative(t, 1)
        return float(0.5 * np.mean(p[:, 0] * d1[:, 1] - p[:, 1] * d1[:, 0]) * TWO_PI)

    @cached_property
    def perimeter(self) -> float:
        t, _ = self._dense
        speed = np.hypot(*self.derivative(t, 1).T)
        return float(np.mean(speed) * TWO_PI)

    @cached_property
    def diameter(self) -> float:
        _, pts = self._dense
        sub = pts[:: max(1, len(pts) // 512)]
        d2 = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=2)
        return float(np.sqrt(d2.max()))

    @cached_property
    def centroid(self) -> np.ndarray:
        _, pts = self._dense
        return pts.mean(axis=0)

    def nearest_parameter(self, point) -> tuple[float, float]:
        """Parameter of the closest boundary point and the distance to it."""
        p = np.asarray(point, dtype=float)
        t, pts = self._dense
        d2 = np.sum((pts - p) ** 2, axis=1)
        i = int(np.argmin(d2))
        ti = t[i]
        # Newton on d/dt |z(t)-p|^2 = 0
        for _ in range(6):
            z = self.point(ti)[0]
            d1 = self.derivative(ti, 1)[0]
            d2v = self.derivative(ti, 2)[0]
            r = z - p
            g = 2.0 * (r @ d1)
            h = 2.0 * (d1 @ d1 + r @ d2v)
            if abs(h) < 1e-14:
                break
            step = g / h
            ti -= step
            if abs(step) < 1e-14:
                break
        dist = float(np.linalg.norm(self.point(ti)[0] - p))
        coarse = float(np.sqrt(d2[i]))
        if dist > coarse:  # Newton wandered; keep the coarse answer
            return float(t[i]), coarse
        return float(ti % TWO_PI), dist

    def distance_to_boundary(self, point) -> float:
        return self.nearest_parameter(point)[1]

    def winding_number(self, point) -> int:
        p = np.asarray(point, dtype=float)
        _, pts = self._dense
        rel = (pts[:, 0] - p[0]) + 1j * (pts[:, 1] - p[1])
        ang = np.angle(rel)
        dang = np.diff(np.concatenate([ang, ang[:1]]))
        dang = (dang + np.pi) % TWO_PI - np.pi
        return int(np.rint(dang.sum() / TWO_PI))

    @cached_property
    def fourier_c1(self) -> complex:
        """Coefficient of e^{it} in x(t) + i y(t); dominant for winding-1 curves."""
        return (0.5 * (self.cos_x[1] + 1j * self.cos_y[1])
                - 0.5j * (self.sin_x[1] + 1j * self.sin_y[1]))

    def validate(self):
        """Raise MalformedCurveError unless regular, simple, counterclockwise."""
        t, pts = self._dense
        speed = np.hypot(*self.derivative(t, 1).T)
        if speed.min() < 1e-12:
            raise MalformedCurveError("parametrization has a degenerate tangent")
        if self.signed_area <= 0:
            raise MalformedCurveError("curve is not counterclockwise (signed area <= 0)")
        # self-intersection probe: parameter-distant samples must stay apart
        m = len(t)
        sub = pts[:: max(1, m // 512)]
        ms = len(sub)
        d2 = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=2)
        idx = np.arange(ms)
        sep = np.abs(idx[:, None] - idx[None, :])
        sep = np.minimum(sep, ms - sep)
        window = max(2, int(np.ceil(ms / 16.0)))  # parameter separation >= ~pi/8
        close = (sep >= window) & (d2 < 1e-18)
        if np.any(close):
            raise MalformedCurveError("curve self-intersects (distant parameters coincide)")


def unit_circle(node_hint: int = 256) -> BoundaryCurve:
    return BoundaryCurve([0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 1.0], node_hint)


def circle(center=(0.0, 0.0), radius: float = 1.0, node_hint: int = 256) -> BoundaryCurve:
    cx, cy = center
    return BoundaryCurve([cx, radius], [0.0, 0.0], [cy, 0.0], [0.0, radius], node_hint)


def as_circle(curve: BoundaryCurve, tol: float = 1e-13):
    """Return (center, radius) if the curve is a canonically parametrized circle."""
    cos_x, sin_x, cos_y, sin_y = curve.cos_x, curve.sin_x, curve.cos_y, curve.sin_y
    r = cos_x[1]
    scale = max(1.0, abs(r))
    ok = (
        abs(sin_y[1] - r) <= tol * scale
        and abs(cos_y[1]) <= tol * scale
        and abs(sin_x[1]) <= tol * scale
        and np.all(np.abs(cos_x[2:]) <= tol * scale)
        and np.all(np.abs(sin_x[2:]) <= tol * scale)
        and np.all(np.abs(cos_y[2:]) <= tol * scale)
        and np.all(np.abs(sin_y[2:]) <= tol * scale)
        and r > tol
    )
    if not ok:
        return None
    return np.array([cos_x[0], cos_y[0]]), float(r)


@dataclass(frozen=True)
class SymmetryGroup:
    """Finite subgroup of O(2): cyclic rotations or a dihedral group.

    ``kind`` is "cyclic" or "dihedral"; ``order`` is the rotation order p;
    ``axis_angle`` fixes the first reflection axis of a dihedral group.
    """

    kind: str
    order: int
    axis_angle: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cyclic", "dihedral"):
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("group order must be >= 1")

    def elements(self):
        """List of (matrix, is_reflection) covering the whole group."""
        out = []
        for k in range(self.order):
            a = TWO_PI * k / self.order
            out.append((np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]), False))
        if self.kind == "dihedral":
            for k in range(self.order):
                b = self.axis_angle + np.pi * k / self.order
                out.append((np.array([[np.cos(2 * b), np.sin(2 * b)],
                                      [np.sin(2 * b), -np.cos(2 * b)]]), True))
        return out


def _parameter_map(curve: BoundaryCurve, matrix: np.ndarray, is_reflection: bool):
    """Parameter action realizing x(map(t)) = M x(t), or None if no such map.

    Rotations act as t -> t + s, reflections as t -> c - t.  The shift is read
    off the winding-1 Fourier coefficient, then verified pointwise.
    """
    c1 = curve.fourier_c1
    if abs(c1) < 1e-12:
        return None
    if is_reflection:
        # reflection across angle beta: z -> e^{2 i beta} conj(z)
        beta2 = np.arctan2(matrix[1, 0], matrix[0, 0])  # equals 2*beta
        const = (beta2 - 2 * np.angle(c1)) % TWO_PI
    else:
        alpha = np.arctan2(matrix[1, 0], matrix[0, 0])
        const = alpha % TWO_PI
    probe = TWO_PI * np.arange(64) / 64
    mapped = (const - probe) if is_reflection else (probe + const)
    mismatch = np.abs(curve.point(mapped) - curve.point(probe) @ matrix.T).max()
    if mismatch > _SYMMETRY_TOL:
        return None
    return const


@dataclass(frozen=True)
class DomainSpec:
    """A smooth bounded planar domain with an admissible perturbation budget.

    ``perturbation_margin`` bounds the sup-norm of boundary displacements for
    which (id + psi) stays injective on the boundary; when not given it
    defaults to 0.3 x min(half the closest approach between parameter-distant
    boundary arcs, the minimal radius of curvature).
    """

    boundary: BoundaryCurve
    perturbation_margin: float | None = None
    symmetry: SymmetryGroup | None = None

    def __post_init__(self):
        self.boundary.validate()
        if self.perturbation_margin is None:
            object.__setattr__(self, "perturbation_margin", _default_margin(self.boundary))
        if self.perturbation_margin <= 0:
            raise ValueError("perturbation_margin must be positive")
        if self.symmetry is not None:
            for matrix, is_refl in self.symmetry.elements():
                if _parameter_map(self.boundary, matrix, is_refl) is None:
                    raise SymmetryMismatchError(
                        "boundary is not invariant under the declared symmetry group")

    @property
    def diameter(self) -> float:
        return self.boundary.diameter

    @cached_property
    def _circle(self):
        return as_circle(self.boundary)

    def is_disk(self) -> bool:
        return self._circle is not None

    def signed_boundary_distance(self, point) -> float:
        """Distance to the boundary, negative outside the domain."""
        if self._circle is not None:
            center, radius = self._circle
            return radius - float(np.hypot(*(np.asarray(point, dtype=float) - center)))
        curve = self.boundary
        dist = curve.distance_to_boundary(point)
        return dist if curve.winding_number(point) == 1 else -dist


def _default_margin(curve: BoundaryCurve) -> float:
    t, pts = curve._dense
    sub = pts[:: max(1, len(pts) // 512)]
    m = len(sub)
    d2 = np.sum((sub[:, None, :] - sub[None, :, :]) ** 2, axis=2)
    idx = np.arange(m)
    sep = np.abs(idx[:, None] - idx[None, :])
    sep = np.minimum(sep, m - sep)
    window = max(2, int(np.ceil(m / 6.0)))  # parameter separation >= ~pi/3
    mask = sep >= window
    clearance = 0.5 * float(np.sqrt(d2[mask].min()))
    speed = np.hypot(*curve.derivative(t, 1).T)
    d1 = curve.derivative(t, 1)
    d2v = curve.derivative(t, 2)
    kappa = np.abs(d1[:, 0] * d2v[:, 1] - d1[:, 1] * d2v[:, 0]) / speed**3
    radius = 1.0 / max(kappa.max(), 1e-12)
    return 0.3 * min(clearance, radius)


# ---------------------------------------------------------------------------
# spec'd operations on domains
# ---------------------------------------------------------------------------

def eval_boundary(curve: BoundaryCurve, t: float) -> BoundaryFrame:
    """Point, unit tangent, outward unit normal, curvature at parameter t."""
    return curve.frame(t)


def contains(domain: DomainSpec, point, margin: float = 0.0) -> bool:
    """True iff the point is inside with distance to the boundary > margin."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return domain.signed_boundary_distance(point) > margin


def sample_interior(domain: DomainSpec, count: int, margin: float, seed: int) -> np.ndarray:
    """Deterministic rejection sample of ``count`` interior points.

    Raises EmptyRegionError when the admissible region cannot be filled
    within the sampling budget.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    _, pts = domain.boundary._dense
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    accepted = []
    budget = max(10_000, 2_000 * count)
    drawn = 0
    while len(accepted) < count and drawn < budget:
        batch = rng.uniform(lo, hi, size=(256, 2))
        drawn += len(batch)
        for p in batch:
            if contains(domain, p, margin):
                accepted.append(p)
                if len(accepted) == count:
                    break
    if len(accepted) < count:
        raise EmptyRegionError(
            f"could not find {count} interior points at margin {margin} "
            f"within {budget} draws")
    return np.array(accepted)


# ---------------------------------------------------------------------------
# perturbation fields
# ---------------------------------------------------------------------------

def _smoothstep(u: np.ndarray) -> np.ndarray:
    """C^2 step: 0 at u<=0, 1 at u>=1."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (u * (6.0 * u - 15.0) + 10.0)


@dataclass(frozen=True)
class PerturbationField:
    """Domain-variation field, primarily defined by its boundary trace.

    * ``normal_fourier``: psi = g(t) nu(t) on the boundary with
      g(t) = sum a_k cos(kt) + b_k sin(kt); extended inward by a C^2 cutoff
      that vanishes at distance ``cutoff_width`` from the boundary.
    * ``identity_dilation``: psi(x) = x everywhere (used by dilation oracles).

    ``amplitude`` scales the whole field.
    """

    kind: str
    cos_coeffs: np.ndarray = dc_field(default_factory=lambda: np.zeros(1))
    sin_coeffs: np.ndarray = dc_field(default_factory=lambda: np.zeros(1))
    cutoff_width: float = 0.35
    amplitude: float = 1.0
    symmetrized_under: SymmetryGroup | None = None

    def __post_init__(self):
        if self.kind not in ("normal_fourier", "identity_dilation"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        n = max(len(np.atleast_1d(self.cos_coeffs)), len(np.atleast_1d(self.sin_coeffs)), 1)
        for name, val in (("cos_coeffs", self.cos_coeffs), ("sin_coeffs", self.sin_coeffs)):
            arr = np.zeros(n)
            flat = np.atleast_1d(np.asarray(val, dtype=float))
            arr[: len(flat)] = flat
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        sc = np.asarray(self.sin_coeffs)
        if len(sc) > 0 and sc[0] != 0.0:
            tmp = sc.copy()
            tmp[0] = 0.0
            tmp.setflags(write=False)
            object.__setattr__(self, "sin_coeffs", tmp)
        if self.cutoff_width <= 0:
            raise ValueError("cutoff_width must be positive")

    @property
    def max_mode(self) -> int:
        if self.kind == "identity_dilation":
            return 1
        nz = np.nonzero(np.abs(self.cos_coeffs) + np.abs(self.sin_coeffs) > 0)[0]
        return int(nz[-1]) if len(nz) else 0

    @property
    def is_zero(self) -> bool:
        if self.kind == "identity_dilation":
            return self.amplitude == 0.0
        return self.amplitude == 0.0 or (
            not np.any(self.cos_coeffs) and not np.any(self.sin_coeffs))

    def profile(self, t) -> np.ndarray:
        """Normal component g(t) (amplitude included) for normal_fourier fields."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = np.arange(len(self.cos_coeffs))
        kt = np.outer(t, k)
        return self.amplitude * (np.cos(kt) @ self.cos_coeffs + np.sin(kt) @ self.sin_coeffs)

    def boundary_normal_component(self, curve: BoundaryCurve, t) -> np.ndarray:
        """<psi, nu> at boundary parameters t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "identity_dilation":
            frame = curve.frame(t)
            return self.amplitude * np.sum(frame.point * frame.normal, axis=-1)
        return self.profile(t)

    def boundary_values(self, curve: BoundaryCurve, t) -> np.ndarray:
        """Vector field values on the boundary at parameters t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind == "identity_dilation":
            return self.amplitude * curve.point(t)
        frame = curve.frame(t)
        return self.profile(t)[:, None] * frame.normal

    def evaluate(self, domain: DomainSpec, points) -> np.ndarray:
        """Field values at interior (or boundary) points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "identity_dilation":
            return self.amplitude * pts
        out = np.zeros_like(pts)
        if self.is_zero:
            return out
        curve = domain.boundary
        for i, p in enumerate(pts):
            tstar, dist = curve.nearest_parameter(p)
            if dist >= self.cutoff_width:
                continue
            eta = _smoothstep(1.0 - dist / self.cutoff_width)
            frame = curve.frame(tstar)
            out[i] = eta * self.profile(tstar)[0] * frame.normal
        return out

    def vanishes_near(self, domain: DomainSpec, point, slack: float = 1e-8) -> bool:
        """True when the field is identically zero on a neighborhood of the point."""
        if self.is_zero:
            return True
        if self.kind == "identity_dilation":
            return bool(np.linalg.norm(np.asarray(point, dtype=float)) <= 1e-10)
        dist = domain.signed_boundary_distance(point)
        return dist > self.cutoff_width + slack

    def sup_boundary_norm(self, domain: DomainSpec) -> float:
        """Max of |psi| over the boundary."""
        t = TWO_PI * np.arange(2048) / 2048
        if self.kind == "identity_dilation":
            return float(self.amplitude) * float(
                np.max(np.hypot(*domain.boundary.point(t).T)))
        return float(np.max(np.abs(self.profile(t))))


def normal_field(cos_coeffs, sin_coeffs=(), cutoff_width: float = 0.35,
                 amplitude: float = 1.0) -> PerturbationField:
    return PerturbationField("normal_fourier", _as_coeffs(cos_coeffs) if len(np.atleast_1d(cos_coeffs)) else np.zeros(1),
                             _as_coeffs(sin_coeffs) if len(np.atleast_1d(sin_coeffs)) else np.zeros(1),
                             cutoff_width, amplitude)


def cosine_field(mode: int, amplitude: float = 1.0, cutoff_width: float = 0.35) -> PerturbationField:
    """Normal field g(t) = amplitude * cos(mode * t)."""
    coeffs = np.zeros(mode + 1)
    coeffs[mode] = 1.0
    return PerturbationField("normal_fourier", coeffs, np.zeros(1), cutoff_width, amplitude)


def identity_dilation(amplitude: float = 1.0) -> PerturbationField:
    return PerturbationField("identity_dilation", amplitude=amplitude)


def zero_field() -> PerturbationField:
    return PerturbationField("normal_fourier", np.zeros(1), np.zeros(1))


# ---------------------------------------------------------------------------
# domain perturbation
# ---------------------------------------------------------------------------

def fit_curve(points: np.ndarray, max_degree: int, residual_tol: float = 1e-9,
              node_hint: int = 256) -> BoundaryCurve:
    """Least-squares Fourier fit of uniformly sampled boundary points.

    On a uniform parameter grid the least-squares projection onto modes
    <= max_degree is the truncated FFT.  The max pointwise residual is
    monitored; above ``residual_tol`` the fit is rejected.
    """
    pts = np.asarray(points, dtype=float)
    m = len(pts)
    if max_degree >= m // 2:
        raise ValueError("max_degree too large for the sample count")

    def fit_1d(vals):
        spec = np.fft.rfft(vals) / m
        a = np.zeros(max_degree + 1)
        b = np.zeros(max_degree + 1)
        a[0] = spec[0].real
        a[1:] = 2.0 * spec[1 : max_degree + 1].real
        b[1:] = -2.0 * spec[1 : max_degree + 1].imag
        return a, b

    ax, bx = fit_1d(pts[:, 0])
    ay, by = fit_1d(pts[:, 1])
    curve = BoundaryCurve(ax, bx, ay, by, node_hint)
    t = TWO_PI * np.arange(m) / m
    residual = float(np.max(np.abs(curve.point(t) - pts)))
    if residual > residual_tol:
        raise RefitFailureError(
            f"Fourier re-fit residual {residual:.3e} exceeds {residual_tol:.1e}")
    return curve


def _trim_trailing(curve: BoundaryCurve) -> BoundaryCurve:
    scale = max(np.abs(curve.cos_x).max(), np.abs(curve.sin_x).max(),
                np.abs(curve.cos_y).max(), np.abs(curve.sin_y).max(), 1e-300)
    keep = 2
    for k in range(len(curve.cos_x) - 1, 1, -1):
        if max(abs(curve.cos_x[k]), abs(curve.sin_x[k]),
               abs(curve.cos_y[k]), abs(curve.sin_y[k])) > 1e-13 * scale:
            keep = k + 1
            break
    return BoundaryCurve(curve.cos_x[:keep], curve.sin_x[:keep],
                         curve.cos_y[:keep], curve.sin_y[:keep], curve.node_hint)


def apply_perturbation(domain: DomainSpec, field: PerturbationField, eps: float) -> DomainSpec:
    """Domain with boundary {z + eps * psi(z) : z on the old boundary}.

    The displaced boundary is re-fit onto Fourier modes covering four times
    the original truncation plus the field's own bandwidth; the fit residual
    is monitored.  The symmetry tag survives only if the new boundary is
    still invariant.
    """
    size = abs(eps) * field.sup_boundary_norm(domain)
    if size >= domain.perturbation_margin:
        raise PerturbationTooLargeError(
            f"|eps| * sup|psi| = {size:.3e} exceeds the margin "
            f"{domain.perturbation_margin:.3e}")
    curve = domain.boundary
    k_fit = 4 * curve.max_degree + field.max_mode
    m = max(16 * (k_fit + 1), 256)
    t = TWO_PI * np.arange(m) / m
    pts = curve.point(t) + eps * field.boundary_values(curve, t)
    new_curve = _trim_trailing(fit_curve(pts, k_fit, node_hint=curve.node_hint))
    symmetry = domain.symmetry
    if symmetry is not None:
        for matrix, is_refl in symmetry.elements():
            if _parameter_map(new_curve, matrix, is_refl) is None:
                symmetry = None
                break
    return DomainSpec(new_curve, None, symmetry)


# ---------------------------------------------------------------------------
# equivariance
# ---------------------------------------------------------------------------

def equivariant_project(field: PerturbationField, group: SymmetryGroup,
                        domain: DomainSpec) -> PerturbationField:
    """Group-average a field into the equivariant subspace.

    For normal fields on an invariant boundary the group acts by affine
    parameter maps, so the average is taken directly on the Fourier
    coefficients of the normal profile.  Idempotent and linear.
    """
    maps = []
    for matrix, is_refl in group.elements():
        const = _parameter_map(domain.boundary, matrix, is_refl)
        if const is None:
            raise SymmetryMismatchError(
                "domain is not invariant under the group; cannot project")
        maps.append((const, is_refl))
    if field.kind == "identity_dilation":
        return PerturbationField("identity_dilation", amplitude=field.amplitude,
                                 symmetrized_under=group)
    n = len(field.cos_coeffs)
    k = np.arange(n)
    acc_a = np.zeros(n)
    acc_b = np.zeros(n)
    a, b = field.cos_coeffs, field.sin_coeffs
    for const, is_refl in maps:
        ck, sk = np.cos(k * const), np.sin(k * const)
        if is_refl:
            acc_a += a * ck + b * sk
            acc_b += a * sk - b * ck
        else:
            acc_a += a * ck + b * sk
            acc_b += -a * sk + b * ck
    m = len(maps)
    return PerturbationField("normal_fourier", acc_a / m, acc_b / m,
                             field.cutoff_width, field.amplitude,
                             symmetrized_under=group)


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def domain_to_dict(domain: DomainSpec) -> dict:
    out = {
        "type": "fourier_curve",
        "cos_x": list(domain.boundary.cos_x),
        "sin_x": list(domain.boundary.sin_x),
        "cos_y": list(domain.boundary.cos_y),
        "sin_y": list(domain.boundary.sin_y),
    }
    if domain.symmetry is not None:
        out["symmetry"] = {
            "kind": domain.symmetry.kind,
            "order": domain.symmetry.order,
            "axis_angle": domain.symmetry.axis_angle,
        }
    return out


def domain_from_dict(data: dict) -> DomainSpec:
    if data.get("type") != "fourier_curve":
        raise ValueError("domain file must have type 'fourier_curve'")
    curve = BoundaryCurve(
        data.get("cos_x", [0.0]), data.get("sin_x", [0.0]),
        data.get("cos_y", [0.0]), data.get("sin_y", [0.0]))
    symmetry = None
    if data.get("symmetry"):
        s = data["symmetry"]
        symmetry = SymmetryGroup(s["kind"], int(s["order"]), float(s.get("axis_angle", 0.0)))
    return DomainSpec(curve, None, symmetry)


def load_domain(path) -> DomainSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return domain_from_dict(json.load(fh))


def save_domain(domain: DomainSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(domain_to_dict(domain), fh, indent=2)
        fh.write("\n")


def field_from_dict(data: dict) -> PerturbationField:
    kind = data.get("type", "normal_fourier")
    if kind == "identity_dilation":
        return identity_dilation(float(data.get("amplitude", 1.0)))
    if kind == "zero":
        return zero_field()
    if kind != "normal_fourier":
        raise ValueError(f"unknown field type {kind!r}")
    return normal_field(
        np.asarray(data.get("cos", [0.0]), dtype=float),
        np.asarray(data.get("sin", [0.0]), dtype=float),
        float(data.get("cutoff_width", 0.35)),
        float(data.get("amplitude", 1.0)))


def load_field(path) -> PerturbationField:
    with open(path, "r", encoding="utf-8") as fh:
        return field_from_dict(json.load(fh))
