"""Strategy comparison harness: per-epoch errors, CDF quantiles, reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .baselines import FdeConfig, SotaWeightParams, fde_solve
from .errors import EmptySamples, GnssWeightError, NonConvergence
from .featurize import EpochFeaturizer, feature_columns
from .geo import EcefPosition, ecef_to_enu, ecef_to_geodetic
from .model import Epoch, NavState
from .nn import make_labels, predict_weights, quality_to_weights
from .solver import SolverConfig, solve_wls

CSV_COLUMNS = ["session_id", "t", "strategy", "h_err_m", "v_err_m", "converged", "n_sv", "n_zero_weight"]

QUANTILES = (0.50, 0.68, 0.95)

# Weights at or below this are counted as effective exclusions.
ZERO_WEIGHT_CUTOFF = 1e-6

STRATEGIES = ("truth", "nn_full", "nn_residual", "fde_sota", "equal")


@dataclass
class ErrorRecord:
    session_id: str
    t: float
    strategy: str
    h_err_m: float
    v_err_m: float
    converged: bool
    n_sv: int
    n_zero_weight: int


@dataclass
class CdfSummary:
    strategy: str
    samples: np.ndarray  # sorted horizontal errors of converged epochs
    quantiles: dict
    count: int
    failures: int

    @staticmethod
    def from_records(strategy: str, records) -> "CdfSummary":
        errs = sorted(r.h_err_m for r in records if r.converged)
        failures = sum(1 for r in records if not r.converged)
        q = {p: empirical_quantile(errs, p) for p in QUANTILES} if errs else {}
        return CdfSummary(strategy, np.array(errs), q, len(errs), failures)


def position_errors(estimate, truth: EcefPosition) -> tuple[float, float]:
    """Horizontal and vertical (|up|) error of an estimate, meters."""
    pos = estimate.position if isinstance(estimate, NavState) else estimate
    enu = ecef_to_enu(pos, ecef_to_geodetic(truth))
    return float(np.hypot(enu.east, enu.north)), float(abs(enu.up))


def empirical_quantile(samples, p: float) -> float:
    """Linear interpolation between order statistics at rank p*(n-1)."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise EmptySamples("quantile of an empty sample set")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    rank = p * (samples.size - 1)
    lo = int(np.floor(rank))
    hi = min(lo + 1, samples.size - 1)
    f = rank - lo
    return float(samples[lo] * (1.0 - f) + samples[hi] * f)


@dataclass
class StrategyModels:
    """Trained predictors and calibrated baseline parameters."""

    nn_full: tuple | None = None  # (LstmModel, FeatureNormalization)
    nn_residual: tuple | None = None
    sota: SotaWeightParams | None = None
    fde_cfg: FdeConfig = field(default_factory=FdeConfig)


def _solve_record(epoch: Epoch, weights, strategy: str, solver_cfg) -> ErrorRecord:
    n_zero = int(np.sum(np.asarray(weights) <= ZERO_WEIGHT_CUTOFF))
    try:
        # two-stage solve: strongly anisotropic weights (spreads of 1e7 and
        # more) make cold-start damped iteration creep, while the weighted
        # problem converges in a few steps from the equal-weight fix
        init = None
        try:
            init = solve_wls(epoch, np.ones(epoch.n), cfg=solver_cfg).state
        except NonConvergence as e:
            if e.report is not None:
                init = e.report.state
        except GnssWeightError:
            pass
        rep = solve_wls(epoch, weights, init=init, cfg=solver_cfg)
        h, v = position_errors(rep.state, epoch.truth)
        return ErrorRecord(epoch.session_id, epoch.time, strategy, h, v, True, epoch.n, n_zero)
    except NonConvergence as e:
        if e.report is not None:
            h, v = position_errors(e.report.state, epoch.truth)
            return ErrorRecord(epoch.session_id, epoch.time, strategy, h, v, False, epoch.n, n_zero)
        return ErrorRecord(epoch.session_id, epoch.time, strategy, float("nan"), float("nan"), False, epoch.n, n_zero)
    except GnssWeightError:
        return ErrorRecord(epoch.session_id, epoch.time, strategy, float("nan"), float("nan"), False, epoch.n, n_zero)


def evaluate_session(session, strategies, models: StrategyModels, solver_cfg=None):
    """Error records for every (epoch, strategy) of one session, in order."""
    solver_cfg = solver_cfg or SolverConfig()
    needs_features = any(s in strategies for s in ("nn_full", "nn_residual"))
    fz = EpochFeaturizer(solver_cfg) if needs_features else None

    records = []
    for epoch in session.epochs:
        if epoch.truth is None:
            continue
        fm = fz.featurize(epoch) if fz is not None else None
        for strategy in strategies:
            if strategy == "equal":
                records.append(_solve_record(epoch, np.ones(epoch.n), strategy, solver_cfg))
            elif strategy == "truth":
                w = quality_to_weights(make_labels(epoch))
                records.append(_solve_record(epoch, w, strategy, solver_cfg))
            elif strategy in ("nn_full", "nn_residual"):
                pair = models.nn_full if strategy == "nn_full" else models.nn_residual
                if pair is None:
                    raise ValueError(f"strategy {strategy} requires a trained model")
                model, norm = pair
                if fm is None:
                    records.append(
                        ErrorRecord(epoch.session_id, epoch.time, strategy,
                                    float("nan"), float("nan"), False, epoch.n, 0)
                    )
                    continue
                mode = "full" if strategy == "nn_full" else "residual"
                x = norm.apply(fm[:, feature_columns(mode)])
                w = predict_weights(model, x)
                records.append(_solve_record(epoch, w, strategy, solver_cfg))
            elif strategy == "fde_sota":
                if models.sota is None:
                    raise ValueError("strategy fde_sota requires calibrated parameters")
                try:
                    res = fde_solve(epoch, models.fde_cfg, models.sota, solver_cfg=solver_cfg)
                    h, v = position_errors(res.report.state, epoch.truth)
                    records.append(
                        ErrorRecord(epoch.session_id, epoch.time, strategy, h, v,
                                    True, epoch.n, len(res.excluded))
                    )
                except GnssWeightError:
                    records.append(
                        ErrorRecord(epoch.session_id, epoch.time, strategy,
                                    float("nan"), float("nan"), False, epoch.n, 0)
                    )
            else:
                raise ValueError(f"unknown strategy {strategy!r}")
    return records


def compare_strategies(dataset, strategies, models: StrategyModels,
                       split: str = "test", solver_cfg=None, jobs: int = 1):
    """Run every strategy over the split; returns (records, summaries).

    Sessions evaluate independently; aggregation is ordered by session id
    so the output is identical for any job count.
    """
    sessions = sorted(dataset.split_sessions(split), key=lambda s: s.session_id)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(
                pool.map(
                    _evaluate_session_star,
                    [(s, strategies, models, solver_cfg) for s in sessions],
                )
            )
    else:
        chunks = [evaluate_session(s, strategies, models, solver_cfg) for s in sessions]
    records = [r for chunk in chunks for r in chunk]
    summaries = {
        strat: CdfSummary.from_records(strat, [r for r in records if r.strategy == strat])
        for strat in strategies
    }
    return records, summaries


def _evaluate_session_star(args):
    return evaluate_session(*args)


def write_error_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.session_id,
                    format(r.t, ".17g"),
                    r.strategy,
                    format(r.h_err_m, ".17g"),
                    format(r.v_err_m, ".17g"),
                    int(r.converged),
                    r.n_sv,
                    r.n_zero_weight,
                ]
            )


def read_error_csv(path):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                ErrorRecord(
                    session_id=row["session_id"],
                    t=float(row["t"]),
                    strategy=row["strategy"],
                    h_err_m=float(row["h_err_m"]),
                    v_err_m=float(row["v_err_m"]),
                    converged=bool(int(row["converged"])),
                    n_sv=int(row["n_sv"]),
                    n_zero_weight=int(row["n_zero_weight"]),
                )
            )
    return records


def summary_dict(summaries) -> dict:
    """JSON-ready structure with quantiles and failure counts per strategy."""
    return {
        strat: {
            "count": s.count,
            "failures": s.failures,
            "quantiles_h_m": {str(p): s.quantiles.get(p) for p in QUANTILES},
        }
        for strat, s in summaries.items()
    }
