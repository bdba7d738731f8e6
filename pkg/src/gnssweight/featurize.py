"""Assembly of the per-epoch network input matrix.

Each epoch becomes an N x 14 matrix: 8 summary statistics of the
leave-one-out residual row followed by the 6 per-link signal features.
The residual-only variant keeps the first 8 columns. Rows are z-scored
with statistics frozen from the training split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotEnoughMeasurements, NonConvergence, SingularGeometry
from .features import TrackingHistory
from .geo import ecef_to_geodetic
from .model import Epoch
from .nn import make_labels
from .residuals import GAMMA, build_residual_matrix, ResidualMatrix
from .solver import SolverConfig, solve_wls

N_RESIDUAL_SUMMARY = 8
N_FEATURES = N_RESIDUAL_SUMMARY + 6


def fold_residual_row(row: np.ndarray, exclude: int) -> np.ndarray:
    """Fixed-width summary of one leave-one-out residual row.

    Off-diagonal entries are clipped to +-GAMMA so the exclusion sentinel
    bounds the input range. Returns [mean, std, min, max, median,
    mean |.|, #(|.| > 5 m), #(|.| > 20 m)].
    """
    off = np.delete(row, exclude)
    off = np.clip(off, -GAMMA, GAMMA)
    a = np.abs(off)
    return np.array(
        [
            off.mean(),
            off.std(),
            off.min(),
            off.max(),
            np.median(off),
            a.mean(),
            float(np.sum(a > 5.0)),
            float(np.sum(a > 20.0)),
        ]
    )


def assemble_feature_matrix(rmat: ResidualMatrix, per_link) -> np.ndarray:
    n = rmat.n
    fm = np.empty((n, N_FEATURES))
    for row in range(n):
        fm[row, :N_RESIDUAL_SUMMARY] = fold_residual_row(rmat.values[row], row)
        fm[row, N_RESIDUAL_SUMMARY:] = per_link[row].as_array()
    return fm


def feature_columns(mode: str) -> slice:
    if mode == "full":
        return slice(0, N_FEATURES)
    if mode == "residual":
        return slice(0, N_RESIDUAL_SUMMARY)
    raise ValueError(f"unknown feature mode {mode!r}")


@dataclass
class FeatureNormalization:
    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(rows: np.ndarray) -> "FeatureNormalization":
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std[std == 0.0] = 1.0
        return FeatureNormalization(mean, std)

    def apply(self, fm: np.ndarray) -> np.ndarray:
        return (fm - self.mean) / self.std


class EpochFeaturizer:
    """Stateful per-session featurizer (owns the C/N0 tracking history).

    ``featurize`` returns the raw (unnormalized) feature matrix, or None
    when the epoch cannot support the leave-one-out construction; the
    tracking window is still advanced so later epochs see a correct
    history.
    """

    def __init__(self, solver_cfg: SolverConfig | None = None):
        self.solver_cfg = solver_cfg or SolverConfig()
        self.history = TrackingHistory()
        self.skipped = 0

    def featurize(self, epoch: Epoch) -> np.ndarray | None:
        try:
            rough = solve_wls(epoch, np.ones(epoch.n), cfg=self.solver_cfg).state
        except (NotEnoughMeasurements, SingularGeometry) as _:
            self.skipped += 1
            return None
        except NonConvergence as e:
            if e.report is None:
                self.skipped += 1
                return None
            rough = e.report.state
        rx_geo = ecef_to_geodetic(rough.position)
        per_link = self.history.update_and_extract(epoch, rx_geo)
        try:
            rmat = build_residual_matrix(epoch, self.solver_cfg)
        except NotEnoughMeasurements:
            self.skipped += 1
            return None
        return assemble_feature_matrix(rmat, per_link)


def session_samples(epochs, solver_cfg=None, with_labels=True):
    """Raw (feature_matrix, labels, epoch) triples for one session, in order."""
    fz = EpochFeaturizer(solver_cfg)
    out = []
    for epoch in epochs:
        fm = fz.featurize(epoch)
        if fm is None:
            continue
        labels = make_labels(epoch) if with_labels and epoch.truth is not None else None
        out.append((fm, labels, epoch))
    return out


def dataset_samples(dataset, solver_cfg=None, with_labels=True):
    """Per-split raw samples for a whole campaign: {'train': [...], ...}."""
    splits = {"train": [], "val": [], "test": []}
    for session in dataset.sessions:
        samples = session_samples(session.epochs, solver_cfg, with_labels)
        splits[session.split].extend(samples)
    return splits


def normalized_split(samples, norm: FeatureNormalization, mode: str):
    """(fm, labels) pairs restricted to the mode's columns and z-scored."""
    cols = feature_columns(mode)
    return [(norm.apply(fm[:, cols]), labels) for fm, labels, _ in samples]


def fit_normalization(train_samples, mode: str) -> FeatureNormalization:
    cols = feature_columns(mode)
    rows = np.vstack([fm[:, cols] for fm, _, _ in train_samples])
    return FeatureNormalization.fit(rows)
