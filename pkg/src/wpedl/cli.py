"""Command-line interface.

    wpedl <subcommand> --config <path> [--seed N] [--out DIR] [--emit-images]

Progress goes to stderr; machine-readable results go to files under the
output directory. Exit codes: 0 success, 2 config error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ConfigError, DataError, NumericError, StageError, WpedlError

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_STAGE_COMMANDS = (
    ("run", "run the full experiment pipeline and write a report"),
    ("gen-data", "export the configured synthetic corpus as CSV + manifest"),
    ("make-spectrograms", "ingest, split, and store the spectrogram corpus"),
    ("train", "train the pool on a stored corpus; write checkpoints + weights"),
    ("evaluate", "score every pool member on the stored test split"),
    ("fuse", "fuse pool probabilities into final decisions"),
    ("ablate", "evaluate fused metrics over classifier subsets"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wpedl",
        description="spectrogram-based motor-fault diagnosis with weighted probability fusion",
    )
    parser.add_argument("--version", action="version", version=f"wpedl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in _STAGE_COMMANDS:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument(
            "--emit-images",
            action="store_true",
            default=None,
            help="also write per-sample PNGs and sidecars (run only)",
        )

    bench = sub.add_parser("bench-kernels", help="compare compiled and numpy kernels")
    bench.add_argument("--repeat", type=int, default=5)
    bench.add_argument("--batch", type=int, default=32)
    return parser


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code_for(exc.cause)
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, WpedlError)):
        return EXIT_DATA
    return EXIT_DATA


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "bench-kernels":
        from .kernels import bench

        return bench.main(["--repeat", str(args.repeat), "--batch", str(args.batch)])

    from .experiment import load_config, run_experiment
    from . import stages

    try:
        config = load_config(
            args.config,
            seed_override=args.seed,
            out_override=args.out,
            emit_images_override=args.emit_images,
        )
        if args.command == "run":
            report = run_experiment(config)
            print(f"[wpedl] report: {config.out_dir}/{report['artifacts']['report']}",
                  file=sys.stderr)
        elif args.command == "gen-data":
            manifest = stages.gen_data(config)
            print(f"[wpedl] corpus manifest: {manifest}", file=sys.stderr)
        elif args.command == "make-spectrograms":
            corpus = stages.make_spectrograms(config)
            print(f"[wpedl] spectrograms per split: {corpus['counts']}", file=sys.stderr)
        elif args.command == "train":
            summary = stages.train(config)
            ids = ", ".join(summary["classifiers"])
            print(f"[wpedl] trained/weighted: {ids}", file=sys.stderr)
        elif args.command == "evaluate":
            stages.evaluate(config)
            print(f"[wpedl] wrote evaluation_seed{config.seed}.json", file=sys.stderr)
        elif args.command == "fuse":
            doc = stages.fuse(config)
            print(f"[wpedl] fused {len(doc['sample_ids'])} samples", file=sys.stderr)
        elif args.command == "ablate":
            rows = stages.run_ablation(config)
            print(f"[wpedl] ablation rows: {len(rows)}", file=sys.stderr)
    except WpedlError as exc:
        print(f"[wpedl] error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
