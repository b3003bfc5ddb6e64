"""Two-stage optimization: dominant-modality classification, then triplet alignment.

Stage 1 minimizes cross-entropy of the dominant pathway's logits (or of the
concatenated joint baseline). Stage 2 samples triplets whose anchor is the
fused retrieval-space representation, the positive is the query-modality
embedding of the same sample, and the negative is the query-modality
embedding of a different-class sample in the batch; it minimizes the
squared-distance hinge loss.

Both stages are deterministic given the config seed: initialization,
shuffling and negative sampling all draw from one seeded generator.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import torch

from .config import TrainConfig
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    SingleClassBatchError,
    TrainingDivergedError,
)
from .models import (
    ModelState,
    TensorBatch,
    build_model,
    embed_modality,
    embed_space,
    samples_to_batch,
    select_dominant_features,
)
from .retrieval import evaluate_map

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ("stage", "epoch", "train_loss", "val_accuracy", "val_map")


def cross_entropy(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """-sum_i p_i log softmax(logits)_i for a one-hot target.

    Accepts [C] (scalar result) or [B, C] (per-row results).
    """
    if logits.shape != target.shape:
        raise InvalidArgumentError(f"logits {tuple(logits.shape)} vs target {tuple(target.shape)}")
    if logits.shape[-1] < 2:
        raise InvalidArgumentError("need at least two classes")
    one_hot = (target == 1.0).to(target.dtype)
    if not torch.equal(one_hot, target) or not torch.all(target.sum(dim=-1) == 1.0):
        raise InvalidArgumentError("target must be exactly one-hot")
    log_q = logits - torch.logsumexp(logits, dim=-1, keepdim=True)
    return -(target * log_q).sum(dim=-1)


def triplet_loss(
    anchor: torch.Tensor, positive: torch.Tensor, negative: torch.Tensor, margin: float
) -> torch.Tensor:
    """max(|a - p|^2 - |a - n|^2 + margin, 0), subgradient 0 at the hinge.

    Accepts [d] (scalar result) or [B, d] (per-row results).
    """
    if anchor.shape != positive.shape or anchor.shape != negative.shape:
        raise InvalidArgumentError("anchor, positive and negative must have equal shapes")
    if margin < 0:
        raise InvalidArgumentError("margin must be nonnegative")
    pos_sq = ((anchor - positive) ** 2).sum(dim=-1)
    neg_sq = ((anchor - negative) ** 2).sum(dim=-1)
    return torch.clamp(pos_sq - neg_sq + margin, min=0.0)


class Triplet(NamedTuple):
    fused: torch.Tensor
    positive: torch.Tensor
    negative: torch.Tensor
    anchor_class: int
    negative_class: int


def sample_triplet_batch(
    batch: TensorBatch,
    model: ModelState,
    config: TrainConfig,
    generator: torch.Generator,
) -> list[Triplet]:
    """Build one triplet per batch sample; negatives are uniform different-class picks.

    Raises SingleClassBatchError when no negative exists because the batch
    holds a single class.
    """
    classes = batch.classes
    if len(torch.unique(classes)) < 2:
        raise SingleClassBatchError("batch holds a single class; no negative available")

    fused = embed_space(model, batch, config.retrieval_modalities)
    positives = embed_modality(model, batch, config.query_modality)

    triplets = []
    for i in range(len(batch)):
        candidates = torch.nonzero(classes != classes[i], as_tuple=False).flatten()
        pick = candidates[int(torch.randint(len(candidates), (1,), generator=generator))]
        triplets.append(
            Triplet(
                fused=fused[i],
                positive=positives[i],
                negative=positives[pick],
                anchor_class=int(classes[i]),
                negative_class=int(classes[pick]),
            )
        )
    return triplets


def _check_finite_params(params: list[torch.nn.Parameter], where: str) -> None:
    # Only optimized parameters can change; untouched branches stay finite.
    for param in params:
        if not torch.isfinite(param).all():
            raise TrainingDivergedError(f"non-finite parameter after {where}")


def _stage1_parameters(model: ModelState, config: TrainConfig) -> list[torch.nn.Parameter]:
    if config.stage1_scope == "all_branches":
        params = []
        for modality in ("vision", "audio", "touch"):
            params += model.branch_parameters(modality)
            params += list(model.heads[modality].parameters())
        if config.dominant == "joint":
            params += list(model.heads["joint"].parameters())
        return params
    if config.dominant == "joint":
        params = []
        for modality in ("vision", "audio", "touch"):
            params += model.branch_parameters(modality)
        return params + list(model.heads["joint"].parameters())
    return model.branch_parameters(config.dominant) + list(model.heads[config.dominant].parameters())


def _epoch_batches(count: int, batch_size: int, generator: torch.Generator):
    perm = torch.randperm(count, generator=generator)
    for start in range(0, count, batch_size):
        yield perm[start : start + batch_size]


def _stage1_loss(batch: TensorBatch, model: ModelState, config: TrainConfig) -> torch.Tensor:
    if config.stage1_scope == "all_branches":
        # every branch trains against its own head; the joint head joins in
        # when it is the dominant pathway
        losses = [
            cross_entropy(select_dominant_features(batch, model, m), batch.labels).mean()
            for m in ("vision", "audio", "touch")
        ]
        if config.dominant == "joint":
            losses.append(cross_entropy(select_dominant_features(batch, model, "joint"), batch.labels).mean())
        return torch.stack(losses).mean()
    return cross_entropy(select_dominant_features(batch, model, config.dominant), batch.labels).mean()


def classification_accuracy(model: ModelState, batch: TensorBatch, dominant: str) -> float:
    model.eval()
    with torch.no_grad():
        logits = select_dominant_features(batch, model, dominant)
        correct = (logits.argmax(dim=-1) == batch.classes).sum()
    return float(correct) / len(batch)


def train_stage1(dataset, config: TrainConfig, model: ModelState | None = None):
    """Dominant-modality cross-entropy stage.

    Returns (model, history) where history holds one metrics row per epoch.
    """
    if not dataset.train:
        raise InvalidArgumentError("dataset has an empty train split")
    generator = torch.Generator().manual_seed(int(config.seed) + 1)
    if model is None:
        h, w = dataset.manifest["image_size"]
        model = build_model(config, dataset.num_classes, image_size=h, audio_length=dataset.manifest["audio_length"])

    train_batch = samples_to_batch(dataset.train)
    val_batch = samples_to_batch(dataset.val) if dataset.val else None

    scope_params = _stage1_parameters(model, config)
    optimizer = torch.optim.Adam(scope_params, lr=config.ce_learning_rate)
    history = []
    for epoch in range(1, config.ce_epochs + 1):
        model.train()
        epoch_loss, num_batches = 0.0, 0
        for batch_idx, indices in enumerate(_epoch_batches(len(train_batch), config.batch_size, generator)):
            batch = train_batch.take(indices)
            loss = _stage1_loss(batch, model, config)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss in stage1 epoch {epoch} batch {batch_idx}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            _check_finite_params(scope_params, f"stage1 epoch {epoch} batch {batch_idx}")
            epoch_loss += float(loss.detach())
            num_batches += 1
        row = {
            "stage": "stage1",
            "epoch": epoch,
            "train_loss": epoch_loss / max(num_batches, 1),
            "val_accuracy": classification_accuracy(model, val_batch, config.dominant) if val_batch else "",
            "val_map": "",
        }
        history.append(row)
    model.stage = "stage1"
    return model, history


def validation_map(model: ModelState, val_batch: TensorBatch, config: TrainConfig) -> float:
    map_score, _ = evaluate_map(model, val_batch, (config.query_modality,), config.retrieval_modalities)
    return map_score


def train_stage2(model: ModelState, dataset, config: TrainConfig):
    """Triplet alignment stage; requires a model that went through stage 1."""
    if model.stage != "stage1":
        raise ConfigurationError(f"stage2 expects a stage1 model, got stage {model.stage!r}")
    generator = torch.Generator().manual_seed(int(config.seed) + 2)

    train_batch = samples_to_batch(dataset.train)
    val_batch = samples_to_batch(dataset.val) if dataset.val else None

    all_params = model.all_parameters()
    optimizer = torch.optim.Adam(all_params, lr=config.triplet_learning_rate)
    history = []
    count = len(train_batch)
    for epoch in range(1, config.triplet_epochs + 1):
        model.train()
        epoch_loss, num_batches = 0.0, 0
        for batch_idx, indices in enumerate(_epoch_batches(count, config.batch_size, generator)):
            if len(indices) < 2:
                continue
            batch = train_batch.take(indices)
            try:
                triplets = sample_triplet_batch(batch, model, config, generator)
            except SingleClassBatchError:
                # one resample, then give up on this step
                retry = torch.randperm(count, generator=generator)[: config.batch_size]
                try:
                    triplets = sample_triplet_batch(train_batch.take(retry), model, config, generator)
                except SingleClassBatchError:
                    logger.warning("skipping single-class batch at stage2 epoch %d batch %d", epoch, batch_idx)
                    continue
            loss = triplet_loss(
                torch.stack([t.fused for t in triplets]),
                torch.stack([t.positive for t in triplets]),
                torch.stack([t.negative for t in triplets]),
                config.triplet_margin,
            ).mean()
            if not torch.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss in stage2 epoch {epoch} batch {batch_idx}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            _check_finite_params(all_params, f"stage2 epoch {epoch} batch {batch_idx}")
            epoch_loss += float(loss.detach())
            num_batches += 1
        row = {
            "stage": "stage2",
            "epoch": epoch,
            "train_loss": epoch_loss / max(num_batches, 1),
            "val_accuracy": "",
            "val_map": validation_map(model, val_batch, config) if val_batch else "",
        }
        history.append(row)
    model.stage = "stage2"
    return model, history


@dataclass
class TrainingResult:
    model: ModelState
    history: list[dict]
    post_stage1_map: float | None


def run_training(dataset, config: TrainConfig) -> TrainingResult:
    """Full pipeline: stage 1, a post-stage-1 MAP baseline row, stage 2."""
    model, history = train_stage1(dataset, config)
    post_stage1_map = None
    if dataset.val and history:
        post_stage1_map = validation_map(model, samples_to_batch(dataset.val), config)
        history[-1]["val_map"] = post_stage1_map
    if config.triplet_epochs > 0:
        model, stage2_rows = train_stage2(model, dataset, config)
        history = history + stage2_rows
    return TrainingResult(model=model, history=history, post_stage1_map=post_stage1_map)


def write_metrics(history: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow(row)


def read_metrics(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
