"""Training, resumption, evaluation and the ablation matrix runner.

All randomness of a run flows from ``TrainConfig.seed`` (data order and crops, through a
dedicated generator) and ``ModelConfig.init_seed`` (parameters), so two runs with the same
configuration produce the same loss curve and checkpoints.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from src.models.config_model import TrainConfig, merge_overrides
from src.models.report_model import (
    AblationRow,
    AblationSummary,
    Direction,
    MetricReport,
    TrainLogRecord,
)
from src.network.smdr import SMDRIS, build_model, infer_full
from src.services import metrics
from src.services.checkpoint import (
    Checkpoint,
    load_checkpoint,
    load_model,
    save_checkpoint,
    verify_config,
)
from src.services.data_io import (
    PairedImageDataset,
    emit_synthetic_dataset,
    load_image,
    scan_paired,
    scan_unpaired,
)
from src.services.losses import MultiDegradationLoss
from src.utils.errors import AblationError, DatasetError, ImageReadError, NonFiniteLossError
from src.utils.pyramid import build_input_pyramid, build_target_pyramid, random_paired_crop
from src.utils.seeding import make_generator

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.jsonl"
FINAL_CHECKPOINT = "final.pt"
ABLATION_MATRICES = ("stages", "bica", "asisf", "loss")
SYNTH_TRAIN_PAIRS, SYNTH_VAL_PAIRS, SYNTH_SIZE = 4, 2, 72


@dataclass
class TrainResult:
    model: SMDRIS
    checkpoint_path: Path
    log_path: Path
    history: List[TrainLogRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [record.total for record in self.history]


class Trainer:
    """Single-writer training loop over an in-memory paired dataset.

    Each iteration samples ``batch_size`` pair indices (with replacement), takes a random
    paired crop of each, builds input and target pyramids, and takes one Adam step on the
    multi-degradation loss.
    """

    def __init__(self, cfg: TrainConfig, dataset: Optional[PairedImageDataset] = None):
        self.cfg = cfg
        if dataset is None:
            if cfg.data_root is None:
                raise DatasetError("no training data: set data_root or pass a dataset")
            dataset = PairedImageDataset.from_root(cfg.data_root)
        self.dataset = dataset
        self.model = build_model(cfg.model)
        self.loss_fn = MultiDegradationLoss.from_train_config(cfg)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=cfg.lr)
        self.generator = make_generator(cfg.seed)
        self.iteration = 0
        self.checkpoint_dir = Path(cfg.checkpoint_dir)
        self.log_path = self.checkpoint_dir / LOG_NAME
        self.history: List[TrainLogRecord] = []

    def restore(self, checkpoint: Checkpoint) -> None:
        """Load weights, optimizer and RNG streams; the model config must match."""
        verify_config(checkpoint, self.cfg.model)
        self.model.load_state_dict(checkpoint.model_state, strict=True)
        if checkpoint.optimizer_state is not None:
            self.optimizer.load_state_dict(checkpoint.optimizer_state)
        if checkpoint.generator_state is not None:
            self.generator.set_state(checkpoint.generator_state)
        if checkpoint.torch_rng_state is not None:
            torch.set_rng_state(checkpoint.torch_rng_state)
        self.iteration = checkpoint.iteration

    def sample_batch(self) -> Tuple[torch.Tensor, torch.Tensor]:
        indices = torch.randint(
            0, len(self.dataset), (self.cfg.batch_size,), generator=self.generator
        ).tolist()
        raws, refs = [], []
        for index in indices:
            raw, ref = self.dataset[index]
            raw, ref = random_paired_crop(raw, ref, self.cfg.crop, self.generator)
            raws.append(raw)
            refs.append(ref)
        return torch.cat(raws), torch.cat(refs)

    def step(self, started: float) -> TrainLogRecord:
        self.model.train()
        raw, ref = self.sample_batch()
        outputs = self.model(build_input_pyramid(raw))
        breakdown = self.loss_fn(outputs.outputs, build_target_pyramid(ref))
        assert breakdown.total is not None

        if not torch.isfinite(breakdown.total):
            record = {
                "iteration": self.iteration + 1,
                "status": "non_finite",
                "total": repr(float(breakdown.total.detach())),
                "per_stage": [
                    [repr(float(t.detach())) for t in stage.as_tuple()]
                    for stage in breakdown.per_stage
                ],
                "seconds": time.perf_counter() - started,
            }
            self._append_log(json.dumps(record))
            raise NonFiniteLossError(
                f"non-finite loss at iteration {self.iteration + 1}", record=record
            )

        self.optimizer.zero_grad(set_to_none=True)
        breakdown.total.backward()
        self.optimizer.step()
        self.iteration += 1

        report = breakdown.report()
        return TrainLogRecord(
            iteration=self.iteration,
            per_stage=report.per_stage,
            total=report.total,
            seconds=time.perf_counter() - started,
        )

    def _append_log(self, line: str) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")

    def save(self, name: str) -> Path:
        return save_checkpoint(
            self.checkpoint_dir / name,
            self.model,
            self.cfg,
            optimizer=self.optimizer,
            generator=self.generator,
            iteration=self.iteration,
        )

    def run(self, progress: bool = False) -> TrainResult:
        """Train until ``cfg.iterations`` steps are complete, then write ``final.pt``."""
        cfg = self.cfg
        started = time.perf_counter()
        remaining = max(cfg.iterations - self.iteration, 0)
        logger.info(
            "training %d iterations (from %d), %d parameters, %d pairs",
            remaining,
            self.iteration,
            self.model.parameter_count(),
            len(self.dataset),
        )
        for _ in tqdm(range(remaining), disable=not progress, desc="train"):
            record = self.step(started)
            self.history.append(record)
            if self.iteration % cfg.log_every == 0 or self.iteration == cfg.iterations:
                self._append_log(record.model_dump_json())
            if cfg.checkpoint_every and self.iteration % cfg.checkpoint_every == 0:
                self.save(f"iter_{self.iteration:06d}.pt")
        path = self.save(FINAL_CHECKPOINT)
        if self.history:
            logger.info(
                "finished at iteration %d, loss %.6f", self.iteration, self.history[-1].total
            )
        return TrainResult(
            model=self.model, checkpoint_path=path, log_path=self.log_path, history=self.history
        )


def train(
    cfg: TrainConfig, dataset: Optional[PairedImageDataset] = None, progress: bool = False
) -> TrainResult:
    """Fresh run: truncates any previous log in ``cfg.checkpoint_dir``."""
    trainer = Trainer(cfg, dataset)
    if trainer.log_path.exists():
        trainer.log_path.unlink()
    return trainer.run(progress=progress)


def resume(
    checkpoint_path: Path,
    cfg: TrainConfig,
    dataset: Optional[PairedImageDataset] = None,
    progress: bool = False,
) -> TrainResult:
    """Continue a run up to ``cfg.iterations``; losses match an uninterrupted run.

    Raises:
        CheckpointError: If the archive cannot be read (nothing is modified).
        ConfigMismatchError: If the stored model configuration differs from ``cfg.model``.
    """
    checkpoint = load_checkpoint(checkpoint_path)
    verify_config(checkpoint, cfg.model)
    trainer = Trainer(cfg, dataset)
    trainer.restore(checkpoint)
    return trainer.run(progress=progress)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _score_one(
    model: SMDRIS,
    image_id: str,
    raw_path: Path,
    reference_path: Optional[Path],
    directions: Dict[str, Direction],
    paper_compat: bool,
) -> Optional[Dict[str, object]]:
    try:
        raw = load_image(raw_path)
        reference = load_image(reference_path) if reference_path is not None else None
    except ImageReadError as exc:
        logger.warning("skipping %s: %s", image_id, exc)
        return None
    started = time.perf_counter()
    restored = infer_full(model, raw)
    seconds = time.perf_counter() - started
    values = metrics.score_image(
        metrics.as_numpy_image(restored),
        metrics.as_numpy_image(reference) if reference is not None else None,
        paper_compat=paper_compat,
    )
    return metrics.finish_row(image_id, values, seconds, directions)


def evaluate(
    source: Union[Path, SMDRIS],
    dataset_root: Path,
    paired: bool = True,
    out_dir: Optional[Path] = None,
    paper_compat: bool = False,
    workers: int = 1,
) -> MetricReport:
    """Restore every image with ``infer_full`` and score it.

    Full-reference metrics are computed only for paired sets. Unreadable images are
    skipped with a warning and counted in ``skipped``.

    Raises:
        DatasetError: If the dataset is empty or no image could be read.
    """
    model = load_model(Path(source))[0] if not isinstance(source, SMDRIS) else source
    model.eval()
    if paired:
        jobs = [(s.id, s.raw_path, s.reference_path) for s in scan_paired(dataset_root)]
    else:
        jobs = [(p.stem, p, None) for p in scan_unpaired(dataset_root)]
    directions = metrics.report_directions(paired)

    def run(job: Tuple[str, Path, Optional[Path]]) -> Optional[Dict[str, object]]:
        return _score_one(model, job[0], job[1], job[2], directions, paper_compat)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    rows = [row for row in results if row is not None]
    skipped = len(results) - len(rows)
    if not rows:
        raise DatasetError(f"no readable images under {dataset_root}")
    report = metrics.build_report(rows, paired=paired, paper_compat=paper_compat, skipped=skipped)
    if out_dir is not None:
        metrics.write_report(report, Path(out_dir))
    return report


def validation_scores(model: SMDRIS, dataset: PairedImageDataset) -> Tuple[float, float]:
    """Mean PSNR and SSIM of ``infer_full`` over a paired dataset."""
    psnrs, ssims = [], []
    for index in range(len(dataset)):
        raw, ref = dataset[index]
        restored = metrics.as_numpy_image(infer_full(model, raw))
        target = metrics.as_numpy_image(ref)
        psnrs.append(metrics.psnr(restored, target))
        ssims.append(metrics.ssim(restored, target))
    return float(np.mean(psnrs)), float(np.mean(ssims))


# ---------------------------------------------------------------------------
# Ablation matrices
# ---------------------------------------------------------------------------

AblationSpec = Tuple[str, Dict[str, bool], Dict[str, Any]]


def ablation_rows(matrix: str) -> List[AblationSpec]:
    """(label, table flags, config overrides) of each row of an ablation matrix."""
    if matrix == "stages":
        rows = []
        for stages in range(1, 5):
            flags = {f"S{k}": k <= stages for k in range(1, 5)}
            label = "+".join(f"S{k}" for k in range(1, stages + 1))
            rows.append((label, flags, {"model": {"stages": stages}}))
        return rows
    if matrix == "bica":
        keys = (
            ("CA", "enable_cfa_ca"),
            ("PA", "enable_cfa_pa"),
            ("ReGIA", "enable_regia"),
            ("HCAFE", "enable_hcafe"),
        )
        return _drop_one_rows(keys, lambda field_name, on: {"model": {field_name: on}})
    if matrix == "asisf":
        keys = (
            ("En", "enable_asisf_en"),
            ("En_to_De", "enable_asisf_en_to_de"),
            ("De", "enable_asisf_de"),
        )
        return _drop_one_rows(keys, lambda field_name, on: {"model": {field_name: on}})
    if matrix == "loss":
        keys = (("L1", "enable_l1"), ("L_pre", "enable_pre"), ("L_mse", "enable_mse"))
        return _drop_one_rows(keys, lambda field_name, on: {field_name: on})
    raise ValueError(f"Unknown ablation matrix '{matrix}', expected one of {ABLATION_MATRICES}")


def _drop_one_rows(keys, make_override) -> List[AblationSpec]:
    rows: List[AblationSpec] = []
    for dropped, _ in keys:
        flags = {name: name != dropped for name, _ in keys}
        overrides: Dict[str, Any] = {}
        for name, field_name in keys:
            overrides = merge_overrides(overrides, make_override(field_name, name != dropped))
        rows.append((f"-{dropped}", flags, overrides))
    full: Dict[str, Any] = {}
    for _, field_name in keys:
        full = merge_overrides(full, make_override(field_name, True))
    rows.append(("full", {name: True for name, _ in keys}, full))
    return rows


def _synthetic_split(root: Path, seed: int, n: int) -> PairedImageDataset:
    emit_synthetic_dataset(n, SYNTH_SIZE, seed, root)
    return PairedImageDataset.from_root(root)


def run_ablation_matrix(
    base_cfg: TrainConfig,
    matrix: str,
    out_dir: Path,
    iterations: Optional[int] = None,
    progress: bool = False,
) -> AblationSummary:
    """Train every row of an ablation matrix and score it on a held-out split.

    Training data comes from ``data_root`` (or a synthetic set seeded with ``seed``);
    validation from ``val_root`` (or a synthetic set seeded with ``seed + 1``).

    Raises:
        ValueError: Unknown matrix name.
        AblationError: A row failed to build or train; the message names its flags.
    """
    specs = ablation_rows(matrix)
    out_dir = Path(out_dir)
    steps = base_cfg.iterations if iterations is None else iterations
    if base_cfg.data_root is not None:
        train_set = PairedImageDataset.from_root(base_cfg.data_root)
    else:
        train_set = _synthetic_split(out_dir / "data" / "train", base_cfg.seed, SYNTH_TRAIN_PAIRS)
    if base_cfg.val_root is not None:
        val_set = PairedImageDataset.from_root(base_cfg.val_root)
    else:
        val_set = _synthetic_split(out_dir / "data" / "val", base_cfg.seed + 1, SYNTH_VAL_PAIRS)

    rows: List[AblationRow] = []
    for label, flags, overrides in specs:
        values = merge_overrides(base_cfg.model_dump(mode="json"), overrides)
        values.update(iterations=steps, checkpoint_dir=str(out_dir / matrix / label))
        try:
            cfg = TrainConfig.model_validate(values)
            result = train(cfg, dataset=train_set, progress=progress)
            psnr, ssim = validation_scores(result.model, val_set)
        except Exception as exc:
            raise AblationError(f"ablation row '{label}' with flags {flags} failed: {exc}") from exc
        final_loss = result.losses[-1] if result.losses else float("nan")
        rows.append(
            AblationRow(
                label=label,
                flags=dict(flags),
                parameters=result.model.parameter_count(),
                final_loss=final_loss,
                psnr=psnr,
                ssim=ssim,
                all=psnr + ssim,
            )
        )
        logger.info("ablation %s/%s: PSNR %.3f SSIM %.4f", matrix, label, psnr, ssim)

    summary = AblationSummary(matrix=matrix, iterations=steps, rows=rows)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"ablation_{matrix}.json").write_text(
        summary.model_dump_json(indent=2), encoding="utf-8"
    )
    return summary


def format_ablation(summary: AblationSummary, published: Optional[Sequence] = None) -> str:
    """Plain-text ablation table; published rows, when given, are printed alongside."""
    lines = [f"{'row':<14} {'params':>10} {'loss':>10} {'PSNR':>8} {'SSIM':>7} {'ALL':>8}"]
    for index, row in enumerate(summary.rows):
        line = (
            f"{row.label:<14} {row.parameters:>10} {row.final_loss:>10.5f} "
            f"{row.psnr:>8.3f} {row.ssim:>7.4f} {row.all:>8.3f}"
        )
        if published is not None and index < len(published):
            _, p_psnr, p_ssim, p_all = published[index]
            line += f"   (published {p_psnr:.3f} / {p_ssim:.3f} / {p_all:.3f})"
        lines.append(line)
    return "\n".join(lines)
