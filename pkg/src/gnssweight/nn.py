"""Recurrent weight predictor: stacked LSTM, BPTT, Adam, checkpoints.

The model consumes an epoch's feature matrix as a sequence of N rows and
emits one quality factor (log of the predicted pseudorange error sigma,
in log-meters) per row. Weights follow as exp(-2 * quality).

Everything is plain float64 numpy so that training is bit-reproducible
under a fixed seed on any platform.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySplit, MissingTruth, ShapeMismatch, VersionMismatch
from .geo import SPEED_OF_LIGHT
from .model import Epoch

CHECKPOINT_VERSION = 1

# Quality targets are log |pseudorange error| clamped below at this
# value, so noise-free measurements map to a finite target and a
# weight cap of 1/eps^2 = 1e4.
LABEL_EPSILON_M = 0.01

WEIGHT_FLOOR = 1e-8
WEIGHT_CEIL = 1e4


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class LstmModel:
    """Parameters of a stacked LSTM plus a scalar linear head.

    Gate order inside the stacked 4H blocks is input, forget, cell,
    output.
    """

    input_dim: int
    hidden: int
    n_layers: int
    W: list  # per layer, (4H, D_l)
    U: list  # per layer, (4H, H)
    b: list  # per layer, (4H,)
    head_w: np.ndarray  # (H,)
    head_b: float

    @staticmethod
    def init(input_dim: int, hidden: int, rng: np.random.Generator, n_layers: int = 2) -> "LstmModel":
        W, U, b = [], [], []
        for layer in range(n_layers):
            d = input_dim if layer == 0 else hidden
            s = 1.0 / math.sqrt(hidden)
            W.append(rng.uniform(-s, s, size=(4 * hidden, d)))
            U.append(rng.uniform(-s, s, size=(4 * hidden, hidden)))
            bias = np.zeros(4 * hidden)
            bias[hidden : 2 * hidden] = 1.0  # forget-gate bias keeps early memory
            b.append(bias)
        head_w = rng.uniform(-1.0 / math.sqrt(hidden), 1.0 / math.sqrt(hidden), size=hidden)
        return LstmModel(input_dim, hidden, n_layers, W, U, b, head_w, 0.0)

    def param_items(self):
        """(name, array) pairs in a fixed order; scalars wrapped as 0-d views."""
        for layer in range(self.n_layers):
            yield f"W{layer}", self.W[layer]
            yield f"U{layer}", self.U[layer]
            yield f"b{layer}", self.b[layer]
        yield "head_w", self.head_w

    def copy(self) -> "LstmModel":
        return copy.deepcopy(self)


def _forward_cached(model: LstmModel, fm: np.ndarray):
    """Run the recurrence, keeping every intermediate needed by BPTT."""
    if fm.ndim != 2 or fm.shape[1] != model.input_dim:
        raise ShapeMismatch(
            f"input shape {fm.shape} incompatible with input_dim {model.input_dim}"
        )
    n = fm.shape[0]
    H = model.hidden
    caches = []
    layer_in = fm
    for layer in range(model.n_layers):
        W, U, b = model.W[layer], model.U[layer], model.b[layer]
        h = np.zeros(H)
        c = np.zeros(H)
        steps = []
        hs = np.empty((n, H))
        for t in range(n):
            x = layer_in[t]
            z = W @ x + U @ h + b
            i = _sigmoid(z[:H])
            f = _sigmoid(z[H : 2 * H])
            g = np.tanh(z[2 * H : 3 * H])
            o = _sigmoid(z[3 * H :])
            c_prev = c
            h_prev = h
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[t] = h
            steps.append((x, h_prev, c_prev, i, f, g, o, c, tc))
        caches.append((layer_in, steps))
        layer_in = hs
    outputs = layer_in @ model.head_w + model.head_b
    return outputs, caches, layer_in


def lstm_forward(model: LstmModel, fm: np.ndarray) -> np.ndarray:
    """Quality factors (log-sigma, log-meters) for each of the N rows."""
    outputs, _, _ = _forward_cached(model, fm)
    return outputs


def lstm_backward(
    model: LstmModel,
    fm: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray | None = None,
):
    """Exact gradients of the summed squared error via BPTT.

    Returns (sse, grads, n_rows) where sse = sum_t mask_t (y_t - label_t)^2
    and grads maps parameter names (as in ``param_items`` plus "head_b")
    to arrays. Callers divide by row counts to get mean-loss gradients.
    """
    labels = np.asarray(labels, dtype=float)
    if labels.shape != (fm.shape[0],):
        raise ShapeMismatch(f"labels shape {labels.shape} != ({fm.shape[0]},)")
    outputs, caches, top_h = _forward_cached(model, fm)
    n = fm.shape[0]
    H = model.hidden
    if mask is None:
        mask = np.ones(n)
    err = (outputs - labels) * mask
    sse = float(np.sum(err * err))
    dy = 2.0 * err

    grads = {name: np.zeros_like(arr) for name, arr in model.param_items()}
    grads["head_b"] = np.zeros(())
    grads["head_w"] += top_h.T @ dy
    grads["head_b"] += np.sum(dy)

    # dh flowing into each timestep of the top layer from the head
    dh_above = dy[:, None] * model.head_w[None, :]

    for layer in range(model.n_layers - 1, -1, -1):
        layer_in, steps = caches[layer]
        W, U = model.W[layer], model.U[layer]
        dW = grads[f"W{layer}"]
        dU = grads[f"U{layer}"]
        db = grads[f"b{layer}"]
        dx_below = np.zeros_like(layer_in)
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(n - 1, -1, -1):
            x, h_prev, c_prev, i, f, g, o, c, tc = steps[t]
            dh = dh_above[t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ]
            )
            dW += np.outer(dz, x)
            dU += np.outer(dz, h_prev)
            db += dz
            dx_below[t] = W.T @ dz
            dh_next = U.T @ dz
        dh_above = dx_below
    return sse, grads, int(np.sum(mask > 0))


def make_labels(epoch: Epoch) -> np.ndarray:
    """Per-row log-sigma targets from the ground-truth position.

    The reference system supplies position only, so the truth clock bias
    per constellation is the equal-weight least-squares fit at the fixed
    true position: the mean of (pseudorange - geometric range) over that
    constellation's measurements.
    """
    if epoch.truth is None:
        raise MissingTruth("epoch carries no ground-truth position")
    sat = epoch.sat_array()
    rng = np.linalg.norm(epoch.truth.as_array()[None, :] - sat, axis=1)
    geo_resid = epoch.pr_array() - rng
    idx = epoch.const_index()
    targets = np.empty(epoch.n)
    for k in range(int(idx.max()) + 1):
        sel = idx == k
        bias_m = float(np.mean(geo_resid[sel]))
        targets[sel] = np.log(np.maximum(np.abs(geo_resid[sel] - bias_m), LABEL_EPSILON_M))
    return targets


def truth_clock_biases(epoch: Epoch) -> dict:
    """Equal-weight clock-only fit at the true position, seconds."""
    if epoch.truth is None:
        raise MissingTruth("epoch carries no ground-truth position")
    sat = epoch.sat_array()
    rng = np.linalg.norm(epoch.truth.as_array()[None, :] - sat, axis=1)
    geo_resid = epoch.pr_array() - rng
    idx = epoch.const_index()
    consts = epoch.constellations()
    return {
        c: float(np.mean(geo_resid[idx == k])) / SPEED_OF_LIGHT
        for k, c in enumerate(consts)
    }


def quality_to_weights(quality: np.ndarray) -> np.ndarray:
    """Invert the label mapping: omega = exp(-2 log sigma), clamped."""
    return np.clip(np.exp(-2.0 * np.asarray(quality, dtype=float)), WEIGHT_FLOOR, WEIGHT_CEIL)


def predict_weights(model: LstmModel, fm: np.ndarray) -> np.ndarray:
    return quality_to_weights(lstm_forward(model, fm))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-3
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    hidden: int = 64
    split: tuple = (0.60, 0.20, 0.20)
    feature_mode: str = "full"  # "full" or "residual"


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = math.inf


class _Adam:
    def __init__(self, shapes: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)


def _model_params(model: LstmModel) -> dict:
    params = {name: arr for name, arr in model.param_items()}
    return params


def _mean_loss(model: LstmModel, samples) -> float:
    total = 0.0
    rows = 0
    for fm, labels in samples:
        y = lstm_forward(model, fm)
        total += float(np.sum((y - labels) ** 2))
        rows += fm.shape[0]
    return total / max(rows, 1)


def train(
    train_samples,
    val_samples,
    cfg: TrainConfig,
    init_model: LstmModel | None = None,
):
    """Fit the model by mini-batch Adam with early stopping.

    ``train_samples``/``val_samples`` are lists of (feature_matrix,
    labels) with rows already normalized. Returns (best_model, report);
    the best model is the snapshot with the lowest validation loss.
    Fully deterministic under cfg.seed.
    """
    if not train_samples or not val_samples:
        raise EmptySplit("training and validation splits must be nonempty")
    input_dim = train_samples[0][0].shape[1]
    rng = np.random.default_rng(cfg.seed)
    model = init_model.copy() if init_model is not None else LstmModel.init(input_dim, cfg.hidden, rng)
    if model.input_dim != input_dim:
        raise ShapeMismatch("init model input width differs from the data")

    params = _model_params(model)
    head_b = np.array(model.head_b)
    opt = _Adam(
        {**{k: v.shape for k, v in params.items()}, "head_b": ()}, cfg.learning_rate
    )
    report = TrainReport()
    best_model = model.copy()
    bad_evals = 0

    order = np.arange(len(train_samples))
    for ep in range(cfg.max_epochs):
        rng.shuffle(order)
        ep_sse = 0.0
        ep_rows = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc = {k: np.zeros_like(v) for k, v in params.items()}
            acc["head_b"] = np.zeros(())
            rows = 0
            for j in batch:  # fixed order: deterministic reduction
                fm, labels = train_samples[j]
                sse, grads, _ = lstm_backward(model, fm, labels)
                for k in acc:
                    acc[k] += grads[k]
                rows += fm.shape[0]
                ep_sse += sse
                ep_rows += fm.shape[0]
            for k in acc:
                acc[k] /= max(rows, 1)
            full = dict(params)
            full["head_b"] = head_b
            opt.step(full, acc)
            model.head_b = float(head_b)
        report.train_losses.append(ep_sse / max(ep_rows, 1))

        val = _mean_loss(model, val_samples)
        report.val_losses.append(val)
        if val < report.best_val:
            report.best_val = val
            report.best_epoch = ep
            best_model = model.copy()
            bad_evals = 0
        else:
            bad_evals += 1
            if bad_evals > cfg.patience:
                break
    return best_model, report


# --- checkpoint container -------------------------------------------------


def save_checkpoint(path, model: LstmModel, norm_mean, norm_std, cfg: TrainConfig, extra=None):
    """Self-describing npz: parameters, normalization stats, config, seed."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "n_layers": model.n_layers,
        "head_b": model.head_b,
        "config": {
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "max_epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "seed": cfg.seed,
            "hidden": cfg.hidden,
            "split": list(cfg.split),
            "feature_mode": cfg.feature_mode,
        },
        "extra": extra or {},
    }
    arrays = {name: arr for name, arr in model.param_items()}
    arrays["norm_mean"] = np.asarray(norm_mean, dtype=float)
    arrays["norm_std"] = np.asarray(norm_std, dtype=float)
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    """Returns (model, norm_mean, norm_std, cfg, extra); bit-exact reload."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise VersionMismatch(f"checkpoint version {meta['version']} unsupported")
        n_layers = meta["n_layers"]
        model = LstmModel(
            input_dim=meta["input_dim"],
            hidden=meta["hidden"],
            n_layers=n_layers,
            W=[data[f"W{l}"].copy() for l in range(n_layers)],
            U=[data[f"U{l}"].copy() for l in range(n_layers)],
            b=[data[f"b{l}"].copy() for l in range(n_layers)],
            head_w=data["head_w"].copy(),
            head_b=float(meta["head_b"]),
        )
        c = meta["config"]
        cfg = TrainConfig(
            learning_rate=c["learning_rate"],
            batch_size=c["batch_size"],
            max_epochs=c["max_epochs"],
            patience=c["patience"],
            seed=c["seed"],
            hidden=c["hidden"],
            split=tuple(c["split"]),
            feature_mode=c["feature_mode"],
        )
        return model, data["norm_mean"].copy(), data["norm_std"].copy(), cfg, meta["extra"]
