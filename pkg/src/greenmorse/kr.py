"""Kirchhoff-Routh-type energies of vortex configurations.

The assembled function is

    f(x_1..x_N) - sum_{j,k} lambda_j lambda_k H(x_j, x_k)

with the double sum running over all pairs including j = k, so the diagonal
contributes the Robin terms -lambda_k^2 h(x_k).  The interaction f is either
the point-vortex log sum -(1/2pi) sum_{j != k} lambda_j lambda_k ln|x_j - x_k|,
identically zero, or a caller-supplied C^2 evaluator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CollisionError, OutsideDomainError
from .geometry import DomainSpec, contains

TWO_PI = 2.0 * np.pi

# admissibility margins default to this fraction of the domain diameter
DEFAULT_MARGIN_FRACTION = 1e-3


@dataclass(frozen=True)
class VortexStrengths:
    """Nonzero circulation strengths lambda_1..lambda_N."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if arr.ndim != 1 or len(arr) < 1:
            raise ValueError("strengths must be a nonempty 1-d list")
        if np.any(np.abs(arr) < 1e-12):
            raise ValueError("all strengths must be nonzero")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class Configuration:
    """N planar points."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=float).reshape(-1, 2).copy()
        if len(arr) < 1:
            raise ValueError("configuration must contain at least one point")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self):
        return len(self.points)

    def flat(self) -> np.ndarray:
        return self.points.reshape(-1)

    def min_pair_distance(self) -> float:
        if len(self.points) < 2:
            return np.inf
        d = self.points[:, None, :] - self.points[None, :, :]
        r2 = d[..., 0] ** 2 + d[..., 1] ** 2
        np.fill_diagonal(r2, np.inf)
        return float(np.sqrt(r2.min()))


@dataclass(frozen=True)
class InteractionSpec:
    """Interaction term: "kirchhoff_routh", "zero", or "custom".

    A custom evaluator maps (points (N,2), strengths (N,)) to
    (value, gradient (2N,), hessian (2N,2N)) and must be C^2 on its open
    domain, described by ``collision_margin``.
    """

    variant: str
    custom_evaluator: Callable | None = None
    collision_margin: float | None = None

    def __post_init__(self):
        if self.variant not in ("kirchhoff_routh", "zero", "custom"):
            raise ValueError(f"unknown interaction variant {self.variant!r}")
        if self.variant == "custom" and self.custom_evaluator is None:
            raise ValueError("custom interaction requires an evaluator")


def kirchhoff_routh_interaction() -> InteractionSpec:
    return InteractionSpec("kirchhoff_routh")


def zero_interaction() -> InteractionSpec:
    return InteractionSpec("zero")


def custom_interaction(evaluator: Callable, collision_margin: float) -> InteractionSpec:
    return InteractionSpec("custom", evaluator, collision_margin)


@dataclass(frozen=True)
class EvaluationResult:
    value: float
    gradient: np.ndarray    # (2N,)
    hessian: np.ndarray     # (2N, 2N), symmetric


@dataclass(frozen=True)
class AdmissibilityResult:
    ok: bool
    diagnostics: tuple

    def __bool__(self):
        return self.ok


_EYE2 = np.eye(2)
_EYE2.setflags(write=False)


def _log_pair_terms(points: np.ndarray, lam: np.ndarray):
    """Value/gradient/Hessian of -(1/2pi) sum_{j != k} l_j l_k ln|x_j - x_k|."""
    n = len(points)
    value = 0.0
    grad = np.zeros((n, 2))
    hess = np.zeros((n, 2, n, 2))
    for j in range(n):
        for k in range(j + 1, n):
            d = points[j] - points[k]
            r2 = d @ d
            c = lam[j] * lam[k] / np.pi
            value += -0.5 * c * np.log(r2)
            g = -c * d / r2
            grad[j] += g
            grad[k] -= g
            a = (_EYE2 * r2 - 2.0 * d[:, None] * d[None, :]) / (r2 * r2)
            hess[j, :, j, :] += -c * a
            hess[k, :, k, :] += -c * a
            hess[j, :, k, :] += c * a
            hess[k, :, j, :] += c * a
    m = 2 * n
    return value, grad.reshape(m), hess.reshape(m, m)


def interaction(spec: InteractionSpec, strengths: VortexStrengths,
                config: Configuration, collision_margin: float | None = None) -> EvaluationResult:
    """Value, gradient, and Hessian of the interaction term alone."""
    lam = strengths.values
    pts = config.points
    if len(lam) != len(pts):
        raise ValueError("strengths and configuration lengths differ")
    margin = collision_margin
    if margin is None:
        margin = spec.collision_margin if spec.collision_margin is not None else 1e-12
    if config.min_pair_distance() <= margin:
        raise CollisionError(
            f"minimal pair distance {config.min_pair_distance():.3e} "
            f"not above the collision margin {margin:.3e}")
    m = 2 * len(pts)
    if spec.variant == "zero":
        return EvaluationResult(0.0, np.zeros(m), np.zeros((m, m)))
    if spec.variant == "kirchhoff_routh":
        value, grad, hess = _log_pair_terms(pts, lam)
        return EvaluationResult(value, grad, hess)
    value, grad, hess = spec.custom_evaluator(pts, lam)
    return EvaluationResult(float(value), np.asarray(grad, dtype=float).reshape(m),
                            np.asarray(hess, dtype=float).reshape(m, m))


def check_admissible(domain: DomainSpec, spec: InteractionSpec, config: Configuration,
                     boundary_margin: float | None = None,
                     collision_margin: float | None = None) -> AdmissibilityResult:
    """Total membership test for the configuration, with diagnostics."""
    bm, cm = resolve_margins(domain, spec, boundary_margin, collision_margin)
    diagnostics = []
    for i, p in enumerate(config.points):
        if not contains(domain, p, bm):
            diagnostics.append(f"boundary: point {i} at {tuple(p)} violates margin {bm:.3g}")
    if config.min_pair_distance() <= cm:
        diagnostics.append(
            f"collision: min pair distance {config.min_pair_distance():.3g} <= {cm:.3g}")
    return AdmissibilityResult(not diagnostics, tuple(diagnostics))


def resolve_margins(domain: DomainSpec, spec: InteractionSpec,
                    boundary_margin: float | None,
                    collision_margin: float | None) -> tuple[float, float]:
    default = DEFAULT_MARGIN_FRACTION * domain.diameter
    bm = default if boundary_margin is None else boundary_margin
    if collision_margin is None:
        cm = spec.collision_margin if spec.collision_margin is not None else default
    else:
        cm = collision_margin
    return bm, cm


def f_omega(engine, strengths: VortexStrengths, spec: InteractionSpec,
            config: Configuration, boundary_margin: float | None = None,
            collision_margin: float | None = None) -> EvaluationResult:
    """Interaction minus the full regular-part double sum, with derivatives.

    The gradient block for point m collects lambda_m lambda_k grad_x H(x_m, x_k)
    and lambda_j lambda_m grad_y H(x_j, x_m) over all j, k (diagonal included);
    Hessian blocks assemble the same way from the second-derivative blocks of
    H and the chain rule on the diagonal terms.
    """
    lam = strengths.values
    pts = config.points
    n = len(pts)
    if len(lam) != n:
        raise ValueError("strengths and configuration lengths differ")
    adm = check_admissible(engine.domain, spec, config, boundary_margin, collision_margin)
    if not adm:
        msg = "; ".join(adm.diagnostics)
        if any(d.startswith("collision") for d in adm.diagnostics):
            raise CollisionError(msg)
        raise OutsideDomainError(msg)

    _, cm = resolve_margins(engine.domain, spec, boundary_margin, collision_margin)
    inter = interaction(spec, strengths, config, collision_margin=cm)

    value = inter.value
    grad = inter.gradient.reshape(n, 2).copy()
    hess = inter.hessian.reshape(n, 2, n, 2).copy()

    evaluations = {}
    for j in range(n):
        for k in range(j, n):
            evaluations[(j, k)] = engine.regular_part(pts[j], pts[k])

    def blocks(j, k):
        if j <= k:
            ev = evaluations[(j, k)]
            return ev.value, ev.grad_x, ev.grad_y, ev.hess_xx, ev.hess_yy, ev.hess_xy
        ev = evaluations[(k, j)]
        return ev.value, ev.grad_y, ev.grad_x, ev.hess_yy, ev.hess_xx, ev.hess_xy.T

    for j in range(n):
        for k in range(n):
            c = lam[j] * lam[k]
            v, gx, gy, hxx, hyy, hxy = blocks(j, k)
            value -= c * v
            grad[j] -= c * gx
            grad[k] -= c * gy
            hess[j, :, j, :] -= c * hxx
            hess[k, :, k, :] -= c * hyy
            hess[j, :, k, :] -= c * hxy
            hess[k, :, j, :] -= c * hxy.T

    m = 2 * n
    H = hess.reshape(m, m)
    return EvaluationResult(value, grad.reshape(m), 0.5 * (H + H.T))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def vortex_from_dict(data: dict) -> tuple[VortexStrengths, Configuration, InteractionSpec]:
    strengths = VortexStrengths(np.asarray(data["lambda"], dtype=float))
    config = Configuration(np.asarray(data["points"], dtype=float))
    name = data.get("interaction", "kirchhoff_routh")
    if name == "kirchhoff_routh":
        spec = kirchhoff_routh_interaction()
    elif name == "zero":
        spec = zero_interaction()
    else:
        raise ValueError(f"unknown interaction {name!r} in vortex file")
    return strengths, config, spec


def load_vortex(path) -> tuple[VortexStrengths, Configuration, InteractionSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return vortex_from_dict(json.load(fh))


def save_vortex(strengths: VortexStrengths, config: Configuration,
                spec: InteractionSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({
            "lambda": list(strengths.values),
            "points": [list(p) for p in config.points],
            "interaction": spec.variant,
        }, fh, indent=2)
        fh.write("\n")
