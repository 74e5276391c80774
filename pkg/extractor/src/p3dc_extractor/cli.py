"""Command-line front end: ``p3dc-extract --dataset <root> --splits <file>
--ckpt <file> -o <store>``.  Use ``--backbone stub`` for a checkpoint-free
smoke run exercising the full pipeline and store format."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .backbones import StubBackbone, WideResNetBackbone
from .extract import ExtractJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="p3dc-extract", description=__doc__)
    parser.add_argument("--dataset", required=True, help="image dataset root directory")
    parser.add_argument("--splits", required=True, help="split definition JSON")
    parser.add_argument("-o", "--output", required=True, help="feature store directory")
    parser.add_argument("--ckpt", default=None, help="backbone checkpoint (wrn28-10)")
    parser.add_argument("--backbone", choices=("wrn28-10", "stub"), default="wrn28-10")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--image-size", type=int, default=84)
    parser.add_argument("--stub-dim", type=int, default=640)
    parser.add_argument("--on-error", choices=("abort", "skip"), default="abort")
    parser.add_argument("--dataset-name", default="extracted")
    return parser


def run(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)

    try:
        if args.backbone == "stub":
            backbone = StubBackbone(dim=args.stub_dim)
        else:
            if not args.ckpt:
                print("error: --ckpt is required for the wrn28-10 backbone",
                      file=sys.stderr)
                return 1
            backbone = WideResNetBackbone(args.ckpt, image_size=args.image_size)
        job = ExtractJob(
            dataset_root=Path(args.dataset),
            splits_file=Path(args.splits),
            output=Path(args.output),
            checkpoint=Path(args.ckpt) if args.ckpt else None,
            batch_size=args.batch_size,
            on_error=args.on_error,
            dataset_name=args.dataset_name,
        )
        store = extract(job, backbone)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"feature store written to {store}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
