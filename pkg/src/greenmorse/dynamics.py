"""Point-vortex dynamics driven by the assembled vortex energy.

The weighted symplectic form lambda_k dx_k/dt = J grad_{x_k} f (J = rotation
by +pi/2) makes critical points of the energy exactly the equilibria and
conserves both the energy and, on rotation-symmetric domains, the angular
impulse sum_k lambda_k |x_k|^2.  The implicit midpoint rule preserves the
quadratic impulse up to solver tolerance; both integrators are order 2 or
better in the time step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GreenMorseError, NumericError
from .kr import Configuration, InteractionSpec, VortexStrengths, f_omega


@dataclass(frozen=True)
class DynamicsConfig:
    integrator: str = "midpoint"      # "midpoint" | "rk4"
    dt: float = 1e-3
    horizon: float = 1.0
    solve_tol: float = 1e-13          # implicit fixed-point tolerance
    max_solver_iterations: int = 200

    def __post_init__(self):
        if self.integrator not in ("midpoint", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least one time step")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray            # (M,)
    states: np.ndarray           # (M, N, 2)
    hamiltonian: np.ndarray      # (M,)
    angular_impulse: np.ndarray  # (M,)
    rotation_symmetric: bool
    truncated: bool = False
    diagnostic: str | None = None

    def csv_rows(self):
        n = self.states.shape[1]
        header = ["t"]
        for i in range(n):
            header += [f"x{i + 1}", f"y{i + 1}"]
        header += ["hamiltonian", "angular_impulse"]
        rows = [header]
        for k in range(len(self.times)):
            row = [f"{self.times[k]:.17g}"]
            row += [f"{v:.17g}" for v in self.states[k].reshape(-1)]
            row += [f"{self.hamiltonian[k]:.17g}", f"{self.angular_impulse[k]:.17g}"]
            rows.append(row)
        return rows


def velocity(engine, strengths: VortexStrengths, spec: InteractionSpec,
             config: Configuration) -> np.ndarray:
    """dx_k/dt = (1/lambda_k) J grad_{x_k} f, shape (N, 2)."""
    grad = f_omega(engine, strengths, spec, config).gradient.reshape(-1, 2)
    rotated = np.stack([-grad[:, 1], grad[:, 0]], axis=1)
    return rotated / strengths.values[:, None]


def _velocity_flat(engine, strengths, spec, flat):
    return velocity(engine, strengths, spec,
                    Configuration(flat.reshape(-1, 2))).reshape(-1)


def integrate(engine, strengths: VortexStrengths, spec: InteractionSpec,
              x0, config: DynamicsConfig) -> Trajectory:
    """Integrate from x0, sampling every step; truncates on margin exit."""
    state = np.asarray(x0, dtype=float).reshape(-1).copy()
    n_steps = int(round(config.horizon / config.dt))
    dt = config.dt

    times = [0.0]
    states = [state.reshape(-1, 2).copy()]
    energies = []
    impulses = []
    truncated = False
    diagnostic = None

    def observables(flat):
        cfg = Configuration(flat.reshape(-1, 2))
        value = f_omega(engine, strengths, spec, cfg).value
        pts = cfg.points
        impulse = float(np.sum(strengths.values * np.sum(pts * pts, axis=1)))
        return value, impulse

    try:
        h0, i0 = observables(state)
    except GreenMorseError as exc:
        raise NumericError(f"initial state inadmissible: {exc}") from exc
    energies.append(h0)
    impulses.append(i0)

    for step in range(1, n_steps + 1):
        try:
            if config.integrator == "rk4":
                k1 = _velocity_flat(engine, strengths, spec, state)
                k2 = _velocity_flat(engine, strengths, spec, state + 0.5 * dt * k1)
                k3 = _velocity_flat(engine, strengths, spec, state + 0.5 * dt * k2)
                k4 = _velocity_flat(engine, strengths, spec, state + dt * k3)
                state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                mid = state + 0.5 * dt * _velocity_flat(engine, strengths, spec, state)
                converged = False
                for _ in range(config.max_solver_iterations):
                    new_mid = state + 0.5 * dt * _velocity_flat(engine, strengths, spec, mid)
                    delta = float(np.max(np.abs(new_mid - mid)))
                    mid = new_mid
                    if delta <= config.solve_tol:
                        converged = True
                        break
                if not converged:
                    truncated = True
                    diagnostic = f"implicit solve stalled at step {step}"
                    break
                state = 2.0 * mid - state
            h, imp = observables(state)
        except GreenMorseError as exc:
            truncated = True
            diagnostic = f"step {step}: {exc}"
            break
        times.append(step * dt)
        states.append(state.reshape(-1, 2).copy())
        energies.append(h)
        impulses.append(imp)

    return Trajectory(np.array(times), np.array(states), np.array(energies),
                      np.array(impulses), engine.domain.is_disk(),
                      truncated, diagnostic)


def conservation_report(trajectory: Trajectory) -> dict:
    """Max drifts of the energy and (when meaningful) the angular impulse."""
    if len(trajectory.times) < 2:
        raise ValueError("conservation report needs at least two samples")
    h = trajectory.hamiltonian
    report = {
        "samples": int(len(trajectory.times)),
        "hamiltonian_drift": float(np.max(np.abs(h - h[0]))),
    }
    if trajectory.rotation_symmetric:
        imp = trajectory.angular_impulse
        report["angular_impulse_drift"] = float(np.max(np.abs(imp - imp[0])))
    return report
