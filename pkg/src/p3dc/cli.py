"""Command-line entry point.

Subcommands: ``validate``, ``prototypes``, ``eval``, ``sweep``, ``synth``.
Exit codes: 0 success, 1 validation error (bad flags, bad store contents,
insufficient capacity), 2 runtime error (I/O failures, unexpected faults).
Errors go to stderr as one line with a machine-parsable ``error_code:``
prefix.  The ``P3DC_STORE`` environment variable supplies the store path
when the positional argument is omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .calibrate import CalibConfig
from .classify import PredictMode
from .episodes import evaluate
from .errors import ConfigError, IOFailure, P3dcError
from .store import compute_base_prototypes, load_dataset, load_manifest, write_dataset
from .sweep import SweepGrid, emit_heatmap_csv, grid_sweep
from .synth import PRESETS, SynthConfig, generate, preset_config

MODE_NAMES = {"nn": "raw_nn", "l2n": "l2n", "cl2n": "cl2n", "dc": "dc_style", "p3dc": "p3dc"}

# Paper-defaults: sqrt transform, 5 neighbors, 5-way, 15 queries, 2000 tasks.
DEFAULT_LAMBDA = 0.5
DEFAULT_M = 5
DEFAULT_WAY = 5
DEFAULT_QUERIES = 15
DEFAULT_TASKS = 2000


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; we need 1."""

    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="p3dc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"p3dc-{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and validate every split of a store")
    _add_store_arg(p)

    p = sub.add_parser("prototypes", help="compute per-class prototype vectors")
    _add_store_arg(p)
    p.add_argument("--split", default="base")
    p.add_argument("-o", "--output", required=True, help="output JSON path")

    p = sub.add_parser("eval", help="episodic evaluation of one mode")
    _add_store_arg(p)
    p.add_argument("--split", default="novel")
    p.add_argument("--mode", required=True, choices=sorted(MODE_NAMES))
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lambda", dest="tukey_lambda", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--clamp-negative", action="store_true")
    p.add_argument(
        "--normalized-query-attention",
        action="store_true",
        help="use the normalized query in attention logits (ablation)",
    )
    _add_episode_args(p, tasks=DEFAULT_TASKS)
    p.add_argument("--json", default=None, help="write the report JSON here ('-' = stdout)")

    p = sub.add_parser("sweep", help="grid-sweep (alpha, beta) on a validation split")
    _add_store_arg(p)
    p.add_argument("--split", default="validation")
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--lambda", dest="tukey_lambda", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--m", type=int, default=DEFAULT_M)
    p.add_argument("--clamp-negative", action="store_true")
    _add_episode_args(p, tasks=500)
    p.add_argument("--heatmap", default=None, help="write the heatmap CSV here")
    p.add_argument("--json", default=None, help="write the sweep summary JSON here ('-' = stdout)")

    p = sub.add_parser("synth", help="generate a synthetic feature store")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("-o", "--output", required=True, help="store directory to create")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--base-classes", type=int, default=None)
    p.add_argument("--novel-classes", type=int, default=None)
    p.add_argument("--samples-per-class", type=int, default=None)
    p.add_argument("--stddev", type=float, default=None)
    p.add_argument("--mix-k", type=int, default=None)
    p.add_argument("--boundary-bias", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--nonneg", action=argparse.BooleanOptionalAction, default=None)
    return parser


def _add_store_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "store",
        nargs="?",
        default=None,
        help="feature store directory (default: $P3DC_STORE)",
    )


def _add_episode_args(p: argparse.ArgumentParser, tasks: int) -> None:
    p.add_argument("--proto", choices=("average", "attentive"), default="attentive")
    p.add_argument("--way", type=int, default=DEFAULT_WAY)
    p.add_argument("--shot", type=int, default=1)
    p.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    p.add_argument("--tasks", type=int, default=tasks)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _resolve_store(args) -> Path:
    store = args.store or os.environ.get("P3DC_STORE")
    if not store:
        raise ConfigError("no store path given and P3DC_STORE is not set")
    return Path(store)


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise IOFailure(f"cannot write {path}: {e}") from e


# -- subcommands ----------------------------------------------------------


def _cmd_validate(args) -> int:
    store = _resolve_store(args)
    manifest = load_manifest(store)
    print(
        f"manifest: dataset={manifest['dataset']} dim={manifest['dim']} "
        f"splits={len(manifest['splits'])}"
    )
    for split in sorted(manifest["splits"]):
        ds = load_dataset(store, split)
        entry = manifest["splits"][split]
        print(
            f"split {split}: {len(ds)} records, {ds.num_classes} classes, "
            f"nonneg={str(entry.get('nonneg', False)).lower()}"
        )
    print("store OK")
    return 0


def _cmd_prototypes(args) -> int:
    import json

    store = _resolve_store(args)
    base = load_dataset(store, args.split)
    protos = compute_base_prototypes(base)
    payload = {
        "dim": protos.dim,
        "class_ids": protos.class_ids.tolist(),
        "prototypes": [[float(v) for v in row] for row in protos.prototypes],
        "global_mean": [float(v) for v in protos.global_mean],
    }
    _write_text(args.output, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(protos)} prototypes (dim {protos.dim}) to {args.output}")
    return 0


def _eval_mode(args) -> PredictMode:
    transform = MODE_NAMES[args.mode]
    calibrating = transform in ("dc_style", "p3dc")
    if not calibrating:
        for flag, name in ((args.alpha, "--alpha"), (args.beta, "--beta"),
                           (args.tukey_lambda, "--lambda"), (args.m, "--m")):
            if flag is not None:
                raise ConfigError(f"{name} only applies to --mode dc or p3dc")
        return PredictMode(
            transform=transform,
            prototype=args.proto,
            normalized_query_attention=args.normalized_query_attention,
        )
    if transform == "dc_style" and (args.alpha is not None or args.beta is not None):
        raise ConfigError("--alpha/--beta only apply to --mode p3dc")
    cfg = CalibConfig(
        tukey_lambda=DEFAULT_LAMBDA if args.tukey_lambda is None else args.tukey_lambda,
        m=DEFAULT_M if args.m is None else args.m,
        alpha=args.alpha or 0.0,
        beta=args.beta or 0.0,
        clamp_negative=args.clamp_negative,
    )
    return PredictMode(
        transform=transform,
        prototype=args.proto,
        calib=cfg,
        normalized_query_attention=args.normalized_query_attention,
    )


def _check_nonneg(manifest: dict, split: str, mode: PredictMode) -> None:
    if mode.calib is None or mode.calib.clamp_negative:
        return
    lam = mode.calib.tukey_lambda
    if lam == int(lam) and lam != 0:
        return
    entry = manifest["splits"].get(split, {})
    if not entry.get("nonneg", False):
        raise ConfigError(
            f"split '{split}' is not declared nonneg; exponent {lam} needs "
            "non-negative features (use --clamp-negative to clamp)"
        )


def _cmd_eval(args) -> int:
    store = _resolve_store(args)
    mode = _eval_mode(args)
    manifest = load_manifest(store)
    _check_nonneg(manifest, args.split, mode)

    split = load_dataset(store, args.split)
    protos = None
    if mode.transform in ("cl2n", "dc_style", "p3dc"):
        if "base" not in manifest["splits"]:
            raise ConfigError(f"mode {args.mode} needs a 'base' split for prototypes")
        protos = compute_base_prototypes(load_dataset(store, "base"))

    report = evaluate(
        split,
        protos,
        mode,
        n=args.way,
        k=args.shot,
        q=args.queries,
        tasks=args.tasks,
        seed=args.seed,
        threads=args.threads,
    )
    extra = ""
    if mode.calib is not None:
        extra = (
            f" alpha={mode.calib.alpha} beta={mode.calib.beta}"
            f" lambda={mode.calib.tukey_lambda} m={mode.calib.m}"
        )
    print(f"mode={args.mode} proto={args.proto}{extra}")
    print(
        f"{args.way}-way {args.shot}-shot, {args.queries} queries/class, "
        f"{args.tasks} tasks, seed {args.seed}"
    )
    print(f"accuracy: {100 * report.mean:.2f}% +/- {100 * report.ci95_halfwidth:.2f}")
    print(
        f"calibration: {report.calib_seconds_per_task:.6f} s/task  "
        f"classification: {report.classify_seconds_per_task:.6f} s/task"
    )
    if args.json:
        _write_text(args.json, report.to_json())
    return 0


def _cmd_sweep(args) -> int:
    store = _resolve_store(args)
    grid = SweepGrid(step=args.step)
    manifest = load_manifest(store)
    if "base" not in manifest["splits"]:
        raise ConfigError("sweep needs a 'base' split for prototypes")
    mode_probe = PredictMode(
        transform="p3dc",
        prototype=args.proto,
        calib=CalibConfig(
            tukey_lambda=args.tukey_lambda, m=args.m, clamp_negative=args.clamp_negative
        ),
    )
    _check_nonneg(manifest, args.split, mode_probe)

    validation = load_dataset(store, args.split)
    protos = compute_base_prototypes(load_dataset(store, "base"))
    result = grid_sweep(
        validation,
        protos,
        grid,
        n=args.way,
        k=args.shot,
        q=args.queries,
        tasks=args.tasks,
        seed=args.seed,
        prototype=args.proto,
        tukey_lambda=args.tukey_lambda,
        m=args.m,
        clamp_negative=args.clamp_negative,
        threads=args.threads,
    )
    alpha, beta = result.best
    best_entry = next(e for e in result.entries if (e.alpha, e.beta) == result.best)
    print(f"swept {len(result.entries)} points (step {args.step}) over {args.tasks} tasks")
    print(
        f"best (alpha, beta) = ({alpha}, {beta}) "
        f"accuracy {100 * best_entry.accuracy:.2f}% +/- {100 * best_entry.ci95:.2f}"
    )
    if args.heatmap:
        emit_heatmap_csv(result, args.heatmap)
        print(f"heatmap written to {args.heatmap}")
    if args.json:
        _write_text(args.json, result.to_json())
    return 0


def _cmd_synth(args) -> int:
    overrides = {}
    for flag, field_name in (
        ("dim", "dim"),
        ("base_classes", "num_base_classes"),
        ("novel_classes", "num_novel_classes"),
        ("samples_per_class", "samples_per_class"),
        ("stddev", "intra_class_stddev"),
        ("mix_k", "novel_mix_k"),
        ("boundary_bias", "boundary_bias"),
        ("seed", "seed"),
        ("nonneg", "nonneg"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[field_name] = value
    if args.preset:
        cfg = preset_config(args.preset, **overrides)
    else:
        cfg = replace(SynthConfig(), **overrides) if overrides else SynthConfig()

    base, validation, novel = generate(cfg)
    name = f"synthetic-{args.preset}" if args.preset else "synthetic"
    for ds in (base, validation, novel):
        write_dataset(ds, args.output, dataset_name=name)
    summary = ", ".join(
        f"{ds.split_name}: {len(ds)} records/{ds.num_classes} classes"
        for ds in (base, validation, novel)
    )
    print(f"wrote store to {args.output} (dim {cfg.dim}; {summary})")
    print("config: " + ", ".join(f"{f.name}={getattr(cfg, f.name)}" for f in fields(cfg)))
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "prototypes": _cmd_prototypes,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "synth": _cmd_synth,
}


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except IOFailure as e:
        print(f"error_code: {e.code}: {e}", file=sys.stderr)
        return 2
    except P3dcError as e:
        print(f"error_code: {e.code}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error_code: io: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
