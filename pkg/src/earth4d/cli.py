"""Command-line interface: encode, train, eval, collisions, params.

Configuration resolves in layers: built-in defaults, then a JSON config
file (--config or the EARTH4D_CONFIG environment variable), then --profile,
then individual flags. Probing is on unless turned off. All output files
are written atomically and every failure exits nonzero with a single
"error: ..." line on stderr.
"""

from __future__ import annotations

import argparse
import io
import csv
import json
import os
import sys

import numpy as np

from . import collisionlab
from .dataset import (
    read_csv,
    read_points_csv,
    split_random,
    split_spatial_blocks,
    write_predictions_csv,
)
from .encoder import Earth4DConfig, Earth4DEncoder, count_parameters
from .errors import CheckpointError, DomainError, TrainingDivergedError
from .fileio import atomic_write_text
from .geocoords import NormalizationConfig, normalize_batch
from .hashgrid import GridConfig
from .persistence import load_checkpoint, save_checkpoint
from .probing import ProbeConfig
from .regressor import LFMCRegressor, RegressorConfig, TrainConfig, evaluate, train

PROFILES = {
    "desk": {
        "grid": {
            "num_levels": 8,
            "max_rows": 1 << 14,
            "features_per_level": 2,
            "probing": {"table_rows": 1 << 12},
        }
    }
}

_GRID_FLAGS = ("profile", "levels", "tmax", "features", "probing")


def _load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON config: {exc}") from None
    if not isinstance(data, dict):
        raise DomainError(f"{path}: config root must be a JSON object")
    return data


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_configs(args):
    """Apply defaults <- config file <- profile <- flags and build the
    typed configs. Returns (Earth4DConfig, RegressorConfig, TrainConfig)."""
    data: dict = {}
    path = getattr(args, "config", None) or os.environ.get("EARTH4D_CONFIG")
    if path:
        data = _load_config_file(path)
    profile = getattr(args, "profile", None)
    if profile:
        data = _merge(data, PROFILES[profile])
    grid = dict(data.get("grid", {}))
    if getattr(args, "levels", None) is not None:
        grid["num_levels"] = args.levels
    if getattr(args, "tmax", None) is not None:
        if not 3 <= args.tmax <= 40:
            raise DomainError("--tmax is log2 of the row count; expected 3..40")
        grid["max_rows"] = 1 << args.tmax
    if getattr(args, "features", None) is not None:
        grid["features_per_level"] = args.features
    probing_flag = getattr(args, "probing", None)
    if probing_flag == "off":
        grid["probing"] = None
    elif probing_flag == "on" and grid.get("probing") is None:
        grid["probing"] = {}
    elif "probing" not in grid:
        # headline configuration trains learned probing
        grid["probing"] = {}
    try:
        grid_config = GridConfig.from_dict(grid)
        normalization = NormalizationConfig.from_dict(data.get("normalization", {}))
        regressor_config = RegressorConfig.from_dict(
            {"species_dim": 32, "hidden": [256, 256], **data.get("regressor", {})}
        )
        train_config = TrainConfig.from_dict(
            {**TrainConfig().to_dict(), **data.get("train", {})}
        )
    except (TypeError, ValueError) as exc:
        raise DomainError(f"invalid configuration: {exc}") from None
    encoder_config = Earth4DConfig(grid=grid_config, normalization=normalization)
    return encoder_config, regressor_config, train_config


def _reject_grid_flags_with_checkpoint(args, flags=_GRID_FLAGS) -> None:
    given = [f"--{name}" for name in flags if getattr(args, name, None) is not None]
    if given:
        raise DomainError(
            f"{', '.join(given)} conflict with --checkpoint; "
            "the checkpoint fixes the model configuration"
        )


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_params(args) -> int:
    encoder_config, _, _ = resolve_configs(args)
    counts = count_parameters(encoder_config)
    report = {
        "grid_parameters": counts["feature_parameters"],
        "probe_parameters": counts["probe_parameters"],
        "total_parameters": counts["total_parameters"],
        "output_dim": counts["output_dim"],
        "grids": counts["grids"],
        "levels_per_grid": counts["levels_per_grid"],
    }
    _print_json(report)
    return 0


def cmd_encode(args) -> int:
    if args.checkpoint:
        _reject_grid_flags_with_checkpoint(args)
        loaded = load_checkpoint(args.checkpoint)
        regressor = loaded["regressor"]
        encoder = regressor.encoder
    else:
        encoder_config, _, _ = resolve_configs(args)
        encoder = Earth4DEncoder(encoder_config, seed=args.seed)
    coords, skipped = read_points_csv(
        args.input, encoder.config.normalization, skip_bad=args.skip_bad
    )
    if coords[0].size == 0:
        raise DomainError(f"{args.input}: no valid rows to encode")
    points = normalize_batch(*coords, encoder.config.normalization)
    features = encoder.encode_batch(points, hard=not args.soft)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow([f"e{i}" for i in range(features.shape[1])])
    for row in features:
        writer.writerow([repr(float(v)) for v in row])
    atomic_write_text(args.output, buf.getvalue())
    summary = {
        "points": int(features.shape[0]),
        "width": int(features.shape[1]),
        "skipped": len(skipped),
        "output": args.output,
    }
    _print_json(summary)
    return 0


def cmd_train(args) -> int:
    encoder_config, regressor_config, train_config = resolve_configs(args)
    if args.steps is not None:
        train_config.steps = args.steps
    if args.batch_size is not None:
        train_config.batch_size = args.batch_size
    train_config.seed = args.seed
    samples, skipped = read_csv(
        args.data, encoder_config.normalization, skip_bad=args.skip_bad
    )
    if len(samples) == 0:
        raise DomainError(f"{args.data}: no valid rows to train on")
    if len(samples) < 2:
        raise DomainError(f"{args.data}: need at least 2 rows to split")
    if args.split == "random":
        train_idx, val_idx = split_random(len(samples), args.val_fraction, args.seed)
    else:
        train_idx, val_idx = split_spatial_blocks(
            samples.latitude,
            samples.longitude,
            args.val_fraction,
            args.seed,
            block_deg=args.block_deg,
        )
    train_set = samples.subset(train_idx)
    val_set = samples.subset(val_idx)
    regressor = LFMCRegressor.build(
        encoder_config,
        species_names=train_set.species,
        config=regressor_config,
        seed=args.seed,
    )
    norm = encoder_config.normalization
    train_points = normalize_batch(
        train_set.latitude, train_set.longitude, train_set.elevation_m,
        train_set.time_s, norm,
    )
    val_points = normalize_batch(
        val_set.latitude, val_set.longitude, val_set.elevation_m,
        val_set.time_s, norm,
    )
    history = train(
        regressor,
        train_points,
        regressor.species.lookup(train_set.species),
        train_set.target,
        train_config,
        val_points4=val_points,
        val_species_idx=regressor.species.lookup(val_set.species),
        val_targets=val_set.target,
    )
    summary = {
        "steps": train_config.steps,
        "train_rows": len(train_set),
        "val_rows": len(val_set),
        "skipped": len(skipped),
        "final_loss": history["loss"][-1] if history["loss"] else None,
        "val_mae": history["val_mae"][-1] if history["val_mae"] else None,
        "val_rmse": history["val_rmse"][-1] if history["val_rmse"] else None,
        "val_r2": history["val_r2"][-1] if history["val_r2"] else None,
        "checkpoint": args.out,
    }
    save_checkpoint(args.out, regressor, extra={"train_summary": summary})
    if args.history:
        atomic_write_text(
            args.history, json.dumps(history, indent=2, sort_keys=True) + "\n"
        )
    _print_json(summary)
    return 0


def cmd_eval(args) -> int:
    loaded = load_checkpoint(args.checkpoint)
    regressor = loaded["regressor"]
    norm = regressor.encoder.config.normalization
    samples, skipped = read_csv(args.data, norm, skip_bad=args.skip_bad)
    if len(samples) == 0:
        raise DomainError(f"{args.data}: no valid rows to evaluate")
    points = normalize_batch(
        samples.latitude, samples.longitude, samples.elevation_m, samples.time_s, norm
    )
    species_idx = regressor.species.lookup(samples.species)
    metrics = evaluate(regressor, points, species_idx, samples.target)
    report = {
        "mae_pp": metrics.mae,
        "rmse_pp": metrics.rmse,
        "r2": metrics.r2,
        "n": metrics.count,
        "skipped": len(skipped),
        "unknown_species_rows": int(np.count_nonzero(species_idx == 0)),
    }
    if args.predictions:
        preds = np.empty(len(samples), dtype=np.float64)
        for start in range(0, len(samples), 8192):
            stop = start + 8192
            preds[start:stop] = regressor.predict(
                points[start:stop], species_idx[start:stop]
            )
        write_predictions_csv(args.predictions, samples, preds)
    if args.out:
        atomic_write_text(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    _print_json(report)
    return 0


def _checkpoint_probe_logits(regressor) -> dict:
    logits = {}
    for grid_name, grid in regressor.encoder.grids.items():
        for level, param in grid.probe_logits.items():
            logits[(grid_name, level)] = param.values
    if not logits:
        raise DomainError("checkpoint has no probe tables (probing was off)")
    return logits


def cmd_collisions(args) -> int:
    if args.probing == "checkpoint":
        if not args.checkpoint:
            raise DomainError("--probing checkpoint requires --checkpoint")
        _reject_grid_flags_with_checkpoint(
            args, flags=("profile", "levels", "tmax", "features")
        )
        loaded = load_checkpoint(args.checkpoint)
        regressor = loaded["regressor"]
        encoder_config = regressor.encoder.config
        checkpoint_logits = _checkpoint_probe_logits(regressor)
    else:
        encoder_config, _, _ = resolve_configs(args)
        checkpoint_logits = None
    names = (
        list(collisionlab.SCENARIO_NAMES)
        if args.scenario == "all"
        else [args.scenario]
    )
    reports = []
    flat = []
    for name in names:
        points = collisionlab.generate(
            name, args.seed, args.points, encoder_config.normalization
        )
        if args.probing == "off":
            report = collisionlab.measure(points, encoder_config)
        else:
            if args.probing == "greedy":
                points4 = normalize_batch(
                    points.latitude,
                    points.longitude,
                    points.elevation_m,
                    points.time_s,
                    encoder_config.normalization,
                )
                probe_config = encoder_config.grid.probing or ProbeConfig()
                logits = collisionlab.greedy_logits(
                    points4, encoder_config.grid, probe_config
                )
            else:
                logits = checkpoint_logits
            report = collisionlab.compare_probing(points, encoder_config, logits)
        reports.append(report)
        measured = report if args.probing == "off" else report["probed"]
        flat.append(measured)
        worst = max(
            (s for s in measured["levels"]),
            key=lambda s: s["rate"],
        )
        line = {
            "scenario": name,
            "points": measured["points"],
            "worst_rate": worst["rate"],
            "worst_grid": worst["grid"],
            "worst_level": worst["level"],
        }
        if args.probing != "off":
            line["max_reduction_pct"] = max(
                (r["reduction_pct"] for r in report["reductions"]), default=0.0
            )
        print(json.dumps(line, sort_keys=True))
    payload = {"scenarios": reports}
    if args.out:
        collisionlab.write_report_json(args.out, payload)
        csv_path = args.csv or os.path.splitext(args.out)[0] + ".csv"
        collisionlab.write_report_csv(csv_path, flat)
    elif args.csv:
        collisionlab.write_report_csv(args.csv, flat)
    return 0


def _add_grid_flags(parser, with_probing_toggle=True) -> None:
    parser.add_argument("--config", help="JSON config file (or set EARTH4D_CONFIG)")
    parser.add_argument(
        "--profile", choices=sorted(PROFILES), help="named config bundle"
    )
    parser.add_argument("--levels", type=int, help="grid levels per projection")
    parser.add_argument("--tmax", type=int, help="log2 of hashed rows per level")
    parser.add_argument("--features", type=int, help="feature channels per level")
    if with_probing_toggle:
        parser.add_argument(
            "--probing", choices=["on", "off"], help="learned hash probing (default on)"
        )
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earth4d",
        description="Planetary 4D positional encoder: encode coordinates, "
        "train and evaluate the regression head, and analyze hash collisions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="parameter-count breakdown")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("encode", help="encode coordinate CSV to feature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--checkpoint", help="encode with a trained model")
    p.add_argument("--soft", action="store_true", help="softmax probing instead of argmax")
    p.add_argument("--skip-bad", action="store_true", help="skip invalid rows")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("train", help="train the regressor on a labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--history", help="write full training history JSON here")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--split", choices=["random", "spatial"], default="random")
    p.add_argument("--block-deg", type=float, default=1.0, help="spatial split block size")
    p.add_argument("--skip-bad", action="store_true")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="metrics JSON output path")
    p.add_argument("--predictions", help="per-row prediction CSV output path")
    p.add_argument("--skip-bad", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("collisions", help="run collision scenarios")
    p.add_argument("--scenario", default="all",
                   choices=["all", *collisionlab.SCENARIO_NAMES])
    p.add_argument("--points", type=int, default=100_000)
    p.add_argument("--probing", choices=["off", "greedy", "checkpoint"], default="off")
    p.add_argument("--checkpoint", help="probe logits source for --probing checkpoint")
    p.add_argument("--out", help="report JSON output path")
    p.add_argument("--csv", help="flat CSV output path")
    _add_grid_flags(p, with_probing_toggle=False)
    p.set_defaults(func=cmd_collisions)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        DomainError,
        CheckpointError,
        TrainingDivergedError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
