"""Weighted least-squares position solver (damped Gauss-Newton)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NotEnoughMeasurements, NonConvergence, SingularGeometry, ZeroRange
from .geo import SPEED_OF_LIGHT, EcefPosition, GeodeticPosition, geodetic_to_ecef
from .model import Epoch, NavState

# Cold-start iterate: a point on the ellipsoid surface, zero clock biases.
# Single-epoch operation cannot assume any warm start.
_DEFAULT_START = geodetic_to_ecef(GeodeticPosition(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    step_tolerance: float = 1e-6
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    cond_limit: float = 1e12


@dataclass
class SolveReport:
    state: NavState
    iterations: int
    converged: bool
    final_cost: float
    post_fit_residuals: np.ndarray


def state_to_vector(epoch: Epoch, state: NavState) -> np.ndarray:
    """[x, y, z, c*delta_k ...] with clock columns in epoch constellation order."""
    consts = epoch.constellations()
    v = np.zeros(3 + len(consts))
    v[0] = state.position.x
    v[1] = state.position.y
    v[2] = state.position.z
    for k, c in enumerate(consts):
        v[3 + k] = SPEED_OF_LIGHT * state.clock_bias.get(c, 0.0)
    return v


def vector_to_state(epoch: Epoch, v: np.ndarray) -> NavState:
    consts = epoch.constellations()
    biases = {c: float(v[3 + k]) / SPEED_OF_LIGHT for k, c in enumerate(consts)}
    return NavState(EcefPosition(float(v[0]), float(v[1]), float(v[2])), biases)


def jacobian(state: NavState, epoch: Epoch) -> np.ndarray:
    """Analytic Jacobian of the stacked observation functions.

    Row i: unit line-of-sight (receiver minus satellite, normalized) on
    the position columns, the speed of light on the measurement's clock
    column, zero elsewhere. Shape N x (3 + #constellations).
    """
    consts = epoch.constellations()
    sat = epoch.sat_array()
    rx = state.position.as_array()
    diff = rx[None, :] - sat
    rng = np.linalg.norm(diff, axis=1)
    if np.any(rng == 0.0):
        raise ZeroRange("satellite coincides with receiver position")
    J = np.zeros((epoch.n, 3 + len(consts)))
    J[:, :3] = diff / rng[:, None]
    idx = epoch.const_index()
    J[np.arange(epoch.n), 3 + idx] = SPEED_OF_LIGHT
    return J


def predicted_pseudoranges(epoch: Epoch, x: np.ndarray) -> np.ndarray:
    """Vectorized observation function over the epoch at kernel-layout x."""
    sat = epoch.sat_array()
    rng = np.linalg.norm(x[None, :3] - sat, axis=1)
    return rng + x[3 + epoch.const_index()]


def solve_wls(
    epoch: Epoch,
    weights,
    init: NavState | None = None,
    cfg: SolverConfig | None = None,
) -> SolveReport:
    """Minimize the weighted sum of squared pseudorange residuals.

    Raises NotEnoughMeasurements when the positive-weight rows cannot
    determine the state, SingularGeometry on an ill-conditioned normal
    matrix, and NonConvergence (carrying the best iterate) when the
    iteration cap is hit.
    """
    if cfg is None:
        cfg = SolverConfig()
    w = np.asarray(weights, dtype=float)
    if w.shape != (epoch.n,):
        raise ValueError(f"weight vector length {w.shape} != N={epoch.n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    dim = epoch.state_dim()
    if int(np.sum(w > 0.0)) < dim:
        raise NotEnoughMeasurements(
            f"{int(np.sum(w > 0.0))} positive-weight measurements for {dim} unknowns"
        )

    if init is not None:
        x0 = state_to_vector(epoch, init)
    else:
        x0 = np.zeros(dim)
        x0[:3] = _DEFAULT_START.as_array()

    x, iterations, status, cost = _kernels.lm_solve(
        epoch.sat_array(),
        epoch.pr_array(),
        w,
        epoch.const_index(),
        dim - 3,
        x0,
        cfg.max_iterations,
        cfg.step_tolerance,
        cfg.initial_damping,
        cfg.damping_up,
        cfg.damping_down,
        cfg.cond_limit,
    )

    if status == _kernels.STATUS_SINGULAR:
        raise SingularGeometry("weighted normal matrix condition number above limit")

    post_fit = epoch.pr_array() - predicted_pseudoranges(epoch, x)
    report = SolveReport(
        state=vector_to_state(epoch, x),
        iterations=int(iterations),
        converged=status == _kernels.STATUS_CONVERGED,
        final_cost=float(cost),
        post_fit_residuals=post_fit,
    )
    if status == _kernels.STATUS_MAX_ITER:
        raise NonConvergence(
            f"no convergence in {cfg.max_iterations} iterations", report=report
        )
    return report
