"""Pipeline command line: simulate -> featurize -> train -> evaluate -> report."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .baselines import FdeConfig, calibrate_sota
from .config import load_config
from .dataio import read_dataset, write_dataset
from .errors import GnssWeightError
from .evaluation import (
    CdfSummary,
    StrategyModels,
    compare_strategies,
    read_error_csv,
    summary_dict,
    write_error_csv,
    QUANTILES,
)
from .featurize import dataset_samples, fit_normalization, normalized_split, FeatureNormalization
from .nn import TrainConfig, load_checkpoint, save_checkpoint, train
from .sim import generate_campaign


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, _seed_override(args))
    sim = cfg["simulate"]
    dataset = generate_campaign(
        profiles=sim["profiles"],
        sessions_per_profile=sim["sessions_per_profile"],
        seed=cfg["seed"],
        epochs_per_session=sim["epochs_per_session"],
        rate_hz=sim["rate_hz"],
        noise_sigma_m=sim["noise_sigma_m"],
        nlos_bias_mean_m=sim["nlos_bias_mean_m"],
    )
    write_dataset(dataset, args.out)
    print(f"wrote {dataset.n_epochs} epochs over {len(dataset.sessions)} sessions to {args.out}")
    return 0


def _collect_samples(data_path, cfg):
    dataset = read_dataset(data_path)
    return dataset, dataset_samples(dataset)


def _cmd_featurize(args) -> int:
    cfg = load_config(args.config, _seed_override(args))
    _, splits = _collect_samples(args.data, cfg)
    arrays = {}
    index = {}
    i = 0
    for split, samples in splits.items():
        ids = []
        for fm, labels, epoch in samples:
            arrays[f"fm_{i}"] = fm
            if labels is not None:
                arrays[f"lab_{i}"] = labels
            ids.append(i)
            i += 1
        index[split] = ids
    meta = {"version": 1, "seed": cfg["seed"], "splits": index}
    np.savez(args.out, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    print(f"cached {i} feature matrices to {args.out}")
    return 0


def _load_feature_cache(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        splits = {}
        for split, ids in meta["splits"].items():
            samples = []
            for i in ids:
                fm = data[f"fm_{i}"].copy()
                lab = data[f"lab_{i}"].copy() if f"lab_{i}" in data else None
                samples.append((fm, lab, None))
            splits[split] = samples
    return splits


def _cmd_train(args) -> int:
    cfg = load_config(args.config, _seed_override(args))
    tr = cfg["train"]
    mode = args.mode or tr["feature_mode"]
    tcfg = TrainConfig(
        learning_rate=tr["learning_rate"],
        batch_size=tr["batch_size"],
        max_epochs=tr["max_epochs"],
        patience=tr["patience"],
        seed=cfg["seed"],
        hidden=tr["hidden"],
        feature_mode=mode,
    )
    if args.features:
        splits = _load_feature_cache(args.features)
    else:
        _, splits = _collect_samples(args.data, cfg)
    for split in ("train", "val"):
        splits[split] = [s for s in splits[split] if s[1] is not None]

    init_model = None
    if args.resume:
        init_model, mean, std, _, _ = load_checkpoint(args.resume)
        norm = FeatureNormalization(mean, std)
    else:
        norm = fit_normalization(splits["train"], mode)
    train_s = normalized_split(splits["train"], norm, mode)
    val_s = normalized_split(splits["val"], norm, mode)

    model, report = train(train_s, val_s, tcfg, init_model=init_model)
    save_checkpoint(args.out, model, norm.mean, norm.std, tcfg)

    loss_path = os.path.splitext(args.out)[0] + "_loss.csv"
    with open(loss_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for ep, (tl, vl) in enumerate(zip(report.train_losses, report.val_losses)):
            writer.writerow([ep, format(tl, ".17g"), format(vl, ".17g")])
    print(
        f"trained {mode} model: best val loss {report.best_val:.6g} "
        f"at epoch {report.best_epoch}; checkpoint {args.out}, losses {loss_path}"
    )
    return 0


def _calibration_samples(dataset):
    """(theta, cn0, a, error) per train-split measurement, from ground truth."""
    from .geo import ecef_to_geodetic, elevation_azimuth
    from .nn import truth_clock_biases
    from .geo import SPEED_OF_LIGHT

    thetas, cn0s, accels, errors = [], [], [], []
    for session in dataset.split_sessions("train"):
        for epoch in session.epochs:
            if epoch.truth is None:
                continue
            rx_geo = ecef_to_geodetic(epoch.truth)
            biases = truth_clock_biases(epoch)
            for m in epoch.measurements:
                theta, _ = elevation_azimuth(m.sat_pos, rx_geo)
                rng = np.linalg.norm(epoch.truth.as_array() - m.sat_pos.as_array())
                err = m.pseudorange - rng - SPEED_OF_LIGHT * biases[m.constellation]
                thetas.append(theta)
                cn0s.append(m.cn0)
                accels.append(0.0)  # no acceleration channel in the dataset format
                errors.append(err)
    return thetas, cn0s, accels, errors


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config, _seed_override(args))
    ev = cfg["evaluate"]
    strategies = args.strategies.split(",") if args.strategies else ev["strategies"]
    dataset = read_dataset(args.data)

    models = StrategyModels(
        fde_cfg=FdeConfig(
            threshold=ev["fde"]["threshold"],
            max_exclusions=ev["fde"]["max_exclusions"],
            min_retained=ev["fde"]["min_retained"],
            noise_sigma_m=ev["fde"]["noise_sigma_m"],
        )
    )
    for strategy, path in (("nn_full", args.model_full), ("nn_residual", args.model_residual)):
        if strategy not in strategies:
            continue
        if not path or not os.path.exists(path or ""):
            print(f"error: strategy '{strategy}' needs a model file (got {path!r})", file=sys.stderr)
            return 1
        model, mean, std, _, _ = load_checkpoint(path)
        pair = (model, FeatureNormalization(mean, std))
        if strategy == "nn_full":
            models.nn_full = pair
        else:
            models.nn_residual = pair
    if "fde_sota" in strategies:
        models.sota = calibrate_sota(*_calibration_samples(dataset))

    records, summaries = compare_strategies(
        dataset, strategies, models, split="test", jobs=args.jobs
    )
    os.makedirs(args.out_dir, exist_ok=True)
    errors_path = os.path.join(args.out_dir, "errors.csv")
    summary_path = os.path.join(args.out_dir, "summary.json")
    write_error_csv(records, errors_path)
    payload = {"seed": cfg["seed"], "split": "test", "strategies": summary_dict(summaries)}
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(_format_table(summaries))
    print(f"wrote {errors_path} and {summary_path}")
    return 0


def _format_table(summaries) -> str:
    lines = [f"{'strategy':<12} {'count':>6} {'fail':>5} " + " ".join(f"q{int(p*100):>2}m".rjust(9) for p in QUANTILES)]
    for strat, s in summaries.items():
        qs = " ".join(
            (f"{s.quantiles[p]:9.3f}" if p in s.quantiles else "      -  ") for p in QUANTILES
        )
        lines.append(f"{strat:<12} {s.count:>6} {s.failures:>5} {qs}")
    return "\n".join(lines)


def _cmd_report(args) -> int:
    records = read_error_csv(args.errors)
    strategies = sorted({r.strategy for r in records})
    summaries = {
        s: CdfSummary.from_records(s, [r for r in records if r.strategy == s])
        for s in strategies
    }
    print(_format_table(summaries))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"strategies": summary_dict(summaries)}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def _seed_override(args) -> dict:
    return {"seed": args.seed} if getattr(args, "seed", None) is not None else {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnssweight",
        description="Single-epoch GNSS positioning with learned measurement weighting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic measurement campaign")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", required=True, help="output dataset path (.jsonl)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("featurize", help="cache per-epoch feature matrices")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--out", required=True, help="feature cache path (.npz)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="train the weight predictor")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--data", help="dataset path")
    p.add_argument("--features", help="feature cache from 'featurize' (skips re-extraction)")
    p.add_argument("--out", required=True, help="checkpoint output path (.npz)")
    p.add_argument("--mode", choices=["full", "residual"], help="feature subset to train on")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="compare weighting strategies on the test split")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--out-dir", required=True, help="directory for errors.csv + summary.json")
    p.add_argument("--model-full", help="checkpoint for the full feature-matrix model")
    p.add_argument("--model-residual", help="checkpoint for the residual-only model")
    p.add_argument("--strategies", help="comma-separated subset of strategies")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers over sessions")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render a summary table from an error CSV")
    p.add_argument("--errors", required=True, help="errors.csv from 'evaluate'")
    p.add_argument("--out", help="optional summary JSON output")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GnssWeightError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
