#!/usr/bin/env python3
"""
End-to-end desk smoke run: synthetic data -> training -> evaluation.

Usage:
    python scripts/desk_smoke.py --out ./output/smoke --iters 50
"""

import sys
import tempfile
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.models.config_model import resolve_train_config
from src.services.data_io import emit_synthetic_dataset
from src.services.trainer import evaluate, train
from src.utils.errors import SmdrisError
from src.utils.logging_setup import configure_logging


def check_synth(root: Path, n: int, seed: int) -> bool:
    """Emit a synthetic paired dataset."""
    print("\n[1/3] Emitting synthetic dataset...")
    try:
        manifest = emit_synthetic_dataset(n, 72, seed, root)
        print(f"✓ {len(manifest.samples)} pair(s) under {root}")
        return True
    except SmdrisError as e:
        print(f"✗ Synthetic dataset failed: {e}")
        return False


def check_train(data_root: Path, out_dir: Path, iterations: int, seed: int) -> bool:
    """Train a desk-profile network and check the loss went down."""
    print("\n[2/3] Training desk profile...")
    cfg = resolve_train_config(
        "desk",
        overrides={
            "iterations": iterations,
            "seed": seed,
            "data_root": str(data_root),
            "checkpoint_dir": str(out_dir),
        },
    )
    try:
        result = train(cfg)
    except SmdrisError as e:
        print(f"✗ Training failed: {e}")
        return False
    losses = result.losses
    print(f"  loss {losses[0]:.5f} -> {losses[-1]:.5f} over {len(losses)} iteration(s)")
    if losses[-1] >= losses[0]:
        print("✗ Loss did not decrease")
        return False
    print(f"✓ Checkpoint written to {result.checkpoint_path}")
    return True


def check_eval(checkpoint: Path, data_root: Path, out_dir: Path) -> bool:
    """Score the trained checkpoint on the synthetic set."""
    print("\n[3/3] Evaluating...")
    try:
        report = evaluate(checkpoint, data_root, paired=True, out_dir=out_dir)
    except SmdrisError as e:
        print(f"✗ Evaluation failed: {e}")
        return False
    print(f"  mean PSNR {report.mean['psnr']:.3f} dB, SSIM {report.mean['ssim']:.4f}")
    print(f"  mean ALL {report.mean['all']:.3f}")
    print(f"✓ Report written to {out_dir}")
    return True


def main():
    """Main entry point."""
    import argparse

    parser = argparse.ArgumentParser(description="Desk-scale end-to-end smoke run")
    parser.add_argument("--out", type=Path, help="Work directory (default: temporary)")
    parser.add_argument("--iters", type=int, default=50, help="Training iterations")
    parser.add_argument("--n", type=int, default=4, help="Synthetic pairs")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    configure_logging("WARNING")
    work = args.out or Path(tempfile.mkdtemp(prefix="smdris_smoke_"))

    print("=" * 60)
    print("SMDR-IS Desk Smoke Run")
    print("=" * 60)
    print(f"Work directory: {work}")

    data_root = work / "data"
    ckpt_dir = work / "checkpoints"
    results = [("Synthetic dataset", check_synth(data_root, args.n, args.seed))]
    if results[-1][1]:
        results.append(("Training", check_train(data_root, ckpt_dir, args.iters, args.seed)))
    if results[-1][1]:
        results.append(
            ("Evaluation", check_eval(ckpt_dir / "final.pt", data_root, work / "eval"))
        )

    # Summary
    print("\n" + "=" * 60)
    print("Smoke Summary")
    print("=" * 60)

    failed = 0
    for name, result in results:
        status = "✓ PASS" if result else "✗ FAIL"
        print(f"{status}: {name}")
        if not result:
            failed += 1

    if failed == 0 and len(results) == 3:
        print("\nAll stages passed.")
        return 0
    print(f"\n{failed} stage(s) failed.")
    return 1


if __name__ == "__main__":
    sys.exit(main())
