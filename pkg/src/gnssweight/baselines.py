"""Reference weighting strategies: equal weights, the parametric
elevation/C-over-N0 sigma model, and residual-test fault exclusion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import EmptySplit, HorizonSingularity, NotEnoughMeasurements, NonConvergence
from .geo import ecef_to_geodetic, elevation_azimuth
from .model import Epoch
from .solver import SolverConfig, solve_wls

DEFAULT_ELEVATION_MASK = math.radians(5.0)

# median(chi2_1) — rescales a median of squared errors to a variance.
_CHI2_MEDIAN = 0.4549364231195724


@dataclass(frozen=True)
class SotaWeightParams:
    """Coefficients of the parametric variance model.

    sigma2(theta, cn0, a) = (z + c / cn0_linear + a2 * accel^2) / sin^2(theta)
    with cn0 as a linear power ratio (10^(dBHz/10)).
    """

    sigma_z2: float
    sigma_c2: float
    sigma_a2: float
    accel_identifiable: bool = True


@dataclass(frozen=True)
class FdeConfig:
    threshold: float = 3.0  # normalized residual
    max_exclusions: int = 8
    min_retained: int = 6
    noise_sigma_m: float = 1.0  # nominal sigma used to standardize residuals
    elevation_mask: float = DEFAULT_ELEVATION_MASK


def cn0_linear(cn0_dbhz) -> float:
    return 10.0 ** (np.asarray(cn0_dbhz, dtype=float) / 10.0)


def sota_sigma2(
    theta: float,
    cn0_dbhz: float,
    a: float,
    p: SotaWeightParams,
    elevation_mask: float = DEFAULT_ELEVATION_MASK,
) -> float:
    """Parametric pseudorange variance, m^2."""
    if theta <= elevation_mask:
        raise HorizonSingularity(f"elevation {theta:.4f} rad at or below the mask")
    s = math.sin(theta)
    return (p.sigma_z2 + p.sigma_c2 / cn0_linear(cn0_dbhz) + p.sigma_a2 * a * a) / (s * s)


def sota_weights(thetas, cn0s, accels, p: SotaWeightParams,
                 elevation_mask: float = DEFAULT_ELEVATION_MASK) -> np.ndarray:
    """1/sigma^2 per link; links at or below the mask get weight 0."""
    w = np.zeros(len(thetas))
    for i, (t, c, a) in enumerate(zip(thetas, cn0s, accels)):
        if t > elevation_mask:
            w[i] = 1.0 / sota_sigma2(t, c, a, p, elevation_mask)
    return w


def calibrate_sota(thetas, cn0s, accels, errors_m) -> SotaWeightParams:
    """Fit the variance model to observed true-position residuals.

    Samples are binned over (elevation, C/N0, acceleration); each bin
    contributes its median squared error (rescaled to a variance, which
    keeps heavy NLOS tails from inflating the fit) and the model is
    solved by nonnegative least squares on sin^2(theta) * sigma2.
    """
    thetas = np.asarray(thetas, dtype=float)
    cn0s = np.asarray(cn0s, dtype=float)
    accels = np.asarray(accels, dtype=float)
    errors = np.asarray(errors_m, dtype=float)
    if thetas.size == 0:
        raise EmptySplit("no samples to calibrate on")

    accel_ok = bool(np.any(np.abs(accels) > 1e-9))

    t_edges = np.linspace(DEFAULT_ELEVATION_MASK, math.pi / 2, 7)
    c_edges = np.quantile(cn0s, np.linspace(0, 1, 7))
    a_edges = np.quantile(np.abs(accels), np.linspace(0, 1, 4)) if accel_ok else None

    ti = np.clip(np.digitize(thetas, t_edges) - 1, 0, 5)
    ci = np.clip(np.digitize(cn0s, c_edges) - 1, 0, 5)
    ai = np.clip(np.digitize(np.abs(accels), a_edges) - 1, 0, 2) if accel_ok else np.zeros(len(thetas), dtype=int)

    rows = []
    targets = []
    counts = []
    for key in set(zip(ti, ci, ai)):
        sel = (ti == key[0]) & (ci == key[1]) & (ai == key[2])
        if np.sum(sel) < 5:
            continue
        var = np.median(errors[sel] ** 2) / _CHI2_MEDIAN
        s2 = np.sin(thetas[sel]) ** 2
        # regress sin^2(theta) * sigma2 = z + c/cn0 + a2 * a^2
        y = var * float(np.mean(s2))
        rows.append(
            [1.0, float(np.mean(1.0 / cn0_linear(cn0s[sel]))), float(np.mean(accels[sel] ** 2))]
        )
        targets.append(y)
        counts.append(float(np.sum(sel)))
    if not rows:
        raise EmptySplit("not enough populated bins for calibration")
    A = np.array(rows)
    y = np.array(targets)
    w = np.sqrt(np.array(counts))
    if not accel_ok:
        A = A[:, :2]
    coef, _ = nnls(A * w[:, None], y * w)
    if accel_ok:
        z, c, a2 = coef
    else:
        z, c = coef
        a2 = 0.0
    return SotaWeightParams(float(z), float(c), float(a2), accel_identifiable=accel_ok)


@dataclass
class FdeResult:
    report: object  # SolveReport of the final weighted solve
    excluded: list = field(default_factory=list)  # indices in canonical order


def fde_solve(
    epoch: Epoch,
    cfg: FdeConfig,
    params: SotaWeightParams,
    accels=None,
    solver_cfg: SolverConfig | None = None,
) -> FdeResult:
    """Iterative residual-test exclusion, then a parametric-weight solve.

    Each round solves the surviving set with equal weights, standardizes
    the post-fit residuals by their linearized variance, and drops the
    worst offender while it exceeds the threshold. Survivors are finally
    solved with 1/sigma2 weights from the parametric model.
    """
    solver_cfg = solver_cfg or SolverConfig()
    n = epoch.n
    min_keep = max(cfg.min_retained, epoch.state_dim())
    if n < min_keep + 1:
        raise NotEnoughMeasurements(f"N={n} below min retained {min_keep} + 1")
    if accels is None:
        accels = np.zeros(n)

    active = np.ones(n, dtype=bool)
    excluded: list[int] = []
    state = None
    while True:
        w = active.astype(float)
        try:
            rep = solve_wls(epoch, w, cfg=solver_cfg)
        except NonConvergence as e:
            if e.report is None:
                raise
            rep = e.report
        state = rep.state
        if int(active.sum()) <= min_keep or len(excluded) >= cfg.max_exclusions:
            break
        # leverage of each active row in the equal-weight linear model
        from .solver import jacobian  # local import avoids a cycle at module load

        H = jacobian(state, epoch)[active]
        # normalize the clock columns to meters so the hat matrix is well scaled
        Hs = H.copy()
        Hs[:, 3:] = Hs[:, 3:] / 299792458.0
        hat = Hs @ np.linalg.solve(Hs.T @ Hs, Hs.T)
        lev = np.clip(np.diag(hat), 0.0, 1.0 - 1e-6)
        r = rep.post_fit_residuals[active]
        std = r / (cfg.noise_sigma_m * np.sqrt(1.0 - lev))
        worst = int(np.argmax(np.abs(std)))
        if abs(std[worst]) <= cfg.threshold:
            break
        active_idx = np.flatnonzero(active)
        excluded.append(int(active_idx[worst]))
        active[active_idx[worst]] = False

    # parametric weights on the survivors
    rx_geo = ecef_to_geodetic(state.position)
    w = np.zeros(n)
    for i in np.flatnonzero(active):
        m = epoch.measurements[i]
        theta, _ = elevation_azimuth(m.sat_pos, rx_geo)
        if theta <= cfg.elevation_mask:
            continue
        w[i] = 1.0 / sota_sigma2(theta, m.cn0, float(accels[i]), params, cfg.elevation_mask)
    if int(np.sum(w > 0)) < epoch.state_dim():
        w = active.astype(float)  # degenerate masking: fall back to equal weights
    try:
        # warm start from the survivor fix: anisotropic weights converge in
        # a few steps from there where a cold start can creep for dozens
        final = solve_wls(epoch, w, init=state, cfg=solver_cfg)
    except NonConvergence as e:
        if e.report is None:
            raise
        final = e.report
    return FdeResult(report=final, excluded=sorted(excluded))
