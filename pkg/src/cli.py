"""Command-line entry point: train, infer, eval, ablate, synth and describe.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from config.settings import get_settings
from src.models.config_model import PROFILES, TrainConfig, parse_kv_text, resolve_train_config
from src.network.smdr import build_model, describe, infer_full
from src.services import reference_tables
from src.services.checkpoint import load_model
from src.services.data_io import (
    IMAGE_EXTENSIONS,
    SYNTH_SIZE_MULTIPLE,
    emit_synthetic_dataset,
    load_image,
    save_image,
    scan_unpaired,
)
from src.services.trainer import (
    ABLATION_MATRICES,
    evaluate,
    format_ablation,
    resume,
    run_ablation_matrix,
    train,
)
from src.utils.errors import ImageReadError, SmdrisError
from src.utils.logging_setup import configure_logging

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
RESOLVED_CONFIG_NAME = "config.cfg"


class UsageError(Exception):
    """Invalid command-line input detected after argument parsing."""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _synth_size(text: str) -> int:
    value = int(text)
    if value < SYNTH_SIZE_MULTIPLE or value % SYNTH_SIZE_MULTIPLE:
        raise argparse.ArgumentTypeError(
            f"size must be a positive multiple of {SYNTH_SIZE_MULTIPLE}, got {text}"
        )
    return value


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", choices=PROFILES, default="desk", help="Named defaults")
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config key (repeatable, dotted keys for model fields)",
    )
    parser.add_argument("--seed", type=int, help="Seed for data order and crops")


def _resolve_config(
    args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None
) -> TrainConfig:
    """Profile < --config file < --set overrides < dedicated flags."""
    config_text = None
    if args.config is not None:
        if not args.config.is_file():
            raise UsageError(f"config file {args.config} does not exist")
        config_text = args.config.read_text(encoding="utf-8")
    try:
        overrides = parse_kv_text("\n".join(args.overrides))
    except ValueError as exc:
        raise UsageError(f"bad --set value: {exc}") from exc
    if args.seed is not None:
        overrides["seed"] = args.seed
    overrides.update({key: value for key, value in (extra or {}).items() if value is not None})
    try:
        return resolve_train_config(args.profile, config_text, overrides)
    except (ValidationError, ValueError) as exc:
        raise UsageError(f"invalid configuration:\n{exc}") from exc


def _banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    extra = {
        "iterations": args.iters,
        "data_root": str(args.data) if args.data else None,
        "checkpoint_dir": str(args.out) if args.out else None,
    }
    cfg = _resolve_config(args, extra)
    if args.print_config:
        print(cfg.to_kv_text(), end="")
        return EXIT_OK

    out_dir = Path(cfg.checkpoint_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / RESOLVED_CONFIG_NAME).write_text(cfg.to_kv_text(), encoding="utf-8")

    _banner("SMDR-IS training")
    if args.resume is not None:
        result = resume(args.resume, cfg, progress=args.progress)
    else:
        result = train(cfg, progress=args.progress)
    print(f"✓ Trained to iteration {cfg.iterations}")
    if result.losses:
        print(f"  first loss: {result.losses[0]:.6f}")
        print(f"  final loss: {result.losses[-1]:.6f}")
    print(f"  checkpoint: {result.checkpoint_path}")
    print(f"  log:        {result.log_path}")
    return EXIT_OK


def _infer_inputs(path: Path) -> List[Path]:
    if path.is_dir():
        return scan_unpaired(path)
    if not path.is_file():
        raise UsageError(f"input {path} does not exist")
    if path.suffix.lower() not in IMAGE_EXTENSIONS:
        raise UsageError(f"input {path} is not a supported image type")
    return [path]


def cmd_infer(args: argparse.Namespace) -> int:
    if not args.checkpoint.is_file():
        raise UsageError(f"checkpoint {args.checkpoint} does not exist")
    inputs = _infer_inputs(args.input)
    model, _ = load_model(args.checkpoint)
    args.output.mkdir(parents=True, exist_ok=True)

    _banner("SMDR-IS inference")
    restored_count = 0
    failed_count = 0
    for path in inputs:
        try:
            image = load_image(path)
        except ImageReadError as exc:
            print(f"✗ Skipping {path.name}: {exc}")
            failed_count += 1
            continue
        target = args.output / f"{path.stem}.png"
        save_image(infer_full(model, image), target)
        print(f"✓ {path.name} -> {target}")
        restored_count += 1

    print()
    print(f"Restored: {restored_count} image(s)")
    if failed_count:
        print(f"Failed: {failed_count} image(s)")
    return EXIT_OK if restored_count else EXIT_RUNTIME


def cmd_eval(args: argparse.Namespace) -> int:
    out_dir = args.out if args.out is not None else get_settings().output_dir / "eval"
    report = evaluate(
        args.checkpoint,
        args.data,
        paired=args.paired,
        out_dir=out_dir,
        paper_compat=args.paper_compat,
        workers=args.workers,
    )

    _banner("SMDR-IS evaluation")
    print(f"Images: {len(report.rows)} (skipped {report.skipped})")
    for key, value in report.mean.items():
        if key == "image":
            continue
        direction = report.directions.get(key)
        marker = f" ({direction} is better)" if direction else ""
        print(f"  {key:<12} {value:.4f}{marker}")
    print(f"✓ Report written to {out_dir}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    extra = {
        "data_root": str(args.data) if args.data else None,
        "val_root": str(args.val) if args.val else None,
    }
    cfg = _resolve_config(args, extra)
    out_dir = args.out if args.out is not None else get_settings().output_dir / "ablation"

    _banner(f"SMDR-IS ablation: {args.matrix}")
    summary = run_ablation_matrix(
        cfg, args.matrix, out_dir, iterations=args.iters, progress=args.progress
    )
    published = reference_tables.ABLATION_TABLES[args.matrix]
    print(format_ablation(summary, published=published))
    print()
    print(f"✓ {len(summary.rows)} row(s) written to {out_dir / f'ablation_{args.matrix}.json'}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    manifest = emit_synthetic_dataset(args.n, args.size, args.seed, args.out)
    print(f"✓ Wrote {len(manifest.samples)} pair(s) of {args.size}x{args.size} to {args.out}")
    return EXIT_OK


def cmd_describe(args: argparse.Namespace) -> int:
    if args.checkpoint is not None:
        model, _ = load_model(args.checkpoint)
    else:
        model = build_model(_resolve_config(args).model)
    report = describe(model, input_size=args.size)
    print(report.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smdris", description="Multi-stage underwater image restoration"
    )
    parser.add_argument("--log-level", help="Override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="Train a network")
    _add_config_arguments(p_train)
    p_train.add_argument("--iters", type=int, help="Total optimisation steps")
    p_train.add_argument("--data", type=Path, help="Paired training dataset root")
    p_train.add_argument("--out", type=Path, help="Checkpoint and log directory")
    p_train.add_argument("--resume", type=Path, help="Continue from this checkpoint")
    p_train.add_argument(
        "--print-config", action="store_true", help="Print the resolved config and exit"
    )
    p_train.add_argument("--progress", action="store_true", help="Show a progress bar")
    p_train.set_defaults(handler=cmd_train)

    p_infer = commands.add_parser("infer", help="Restore images with a trained network")
    p_infer.add_argument("--checkpoint", type=Path, required=True)
    p_infer.add_argument("--input", type=Path, required=True, help="Image file or directory")
    p_infer.add_argument("--output", type=Path, required=True, help="Output directory")
    p_infer.set_defaults(handler=cmd_infer)

    p_eval = commands.add_parser("eval", help="Score a network on a dataset")
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--data", type=Path, required=True, help="Dataset root")
    pairing = p_eval.add_mutually_exclusive_group()
    pairing.add_argument("--paired", dest="paired", action="store_true", default=True)
    pairing.add_argument("--unpaired", dest="paired", action="store_false")
    p_eval.add_argument(
        "--paper-compat", action="store_true", help="Report RMSE in the MSE column"
    )
    p_eval.add_argument("--out", type=Path, help="Report directory")
    p_eval.add_argument("--workers", type=_positive_int, default=1, help="Scoring threads")
    p_eval.set_defaults(handler=cmd_eval)

    p_ablate = commands.add_parser("ablate", help="Run an ablation matrix")
    p_ablate.add_argument("--matrix", choices=ABLATION_MATRICES, required=True)
    _add_config_arguments(p_ablate)
    p_ablate.add_argument("--iters", type=int, help="Iterations per row")
    p_ablate.add_argument("--data", type=Path, help="Paired training root (default synthetic)")
    p_ablate.add_argument("--val", type=Path, help="Paired validation root (default synthetic)")
    p_ablate.add_argument("--out", type=Path, help="Output directory")
    p_ablate.add_argument("--progress", action="store_true", help="Show progress bars")
    p_ablate.set_defaults(handler=cmd_ablate)

    p_synth = commands.add_parser("synth", help="Emit a synthetic paired dataset")
    p_synth.add_argument("--n", type=_positive_int, required=True, help="Number of pairs")
    p_synth.add_argument("--size", type=_synth_size, required=True, help="Square image side")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", type=Path, required=True)
    p_synth.set_defaults(handler=cmd_synth)

    p_describe = commands.add_parser("describe", help="List sub-blocks and parameter counts")
    p_describe.add_argument("--checkpoint", type=Path, help="Describe a trained network")
    _add_config_arguments(p_describe)
    p_describe.add_argument("--size", type=_positive_int, default=48, help="Dry-run input side")
    p_describe.set_defaults(handler=cmd_describe)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SmdrisError, OSError) as exc:
        print(f"✗ {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
