"""Ablation grids, 2D projections and learning-curve export.

A grid cell names a (query space, retrieval space, dominant tag, attention
flag, seed). Exactly one side of each cell is a single modality; that side
supplies the triplet positives, and the other side (when it is a pair) is
fused. Cells run independently: generate-or-load the shared dataset, train
both stages, evaluate MAP on the test split, and append one report row.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import TrainConfig
from .data import DatasetSplits, build_dataset, load_dataset, save_dataset
from .errors import ConfigurationError, DataFormatError, InvalidArgumentError
from .retrieval import evaluate_map
from .training import read_metrics, run_training, write_metrics

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("query", "space", "dominant", "attention", "seed", "status", "map")

_PAIRINGS = (
    (("audio",), ("vision", "touch")),
    (("touch",), ("vision", "audio")),
    (("vision",), ("touch", "audio")),
    (("vision", "touch"), ("audio",)),
    (("vision", "audio"), ("touch",)),
    (("touch", "audio"), ("vision",)),
)


@dataclass(frozen=True)
class GridCell:
    query: tuple[str, ...]
    space: tuple[str, ...]
    dominant: str
    attention: bool
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "query", tuple(self.query))
        object.__setattr__(self, "space", tuple(self.space))
        if len(self.query) == 2 and len(self.space) == 2:
            raise ConfigurationError("at most one side of a cell may be a fused pair")
        if not self.query or not self.space:
            raise ConfigurationError("query and space must name at least one modality")

    def key(self) -> str:
        return (
            f"q_{'+'.join(self.query)}__r_{'+'.join(self.space)}"
            f"__dom_{self.dominant}__attn_{'on' if self.attention else 'off'}__seed_{self.seed}"
        )


def dominant_grid(seed: int = 0) -> list[GridCell]:
    """Six query/retrieval pairings crossed with all four dominant tags (24 cells)."""
    return [
        GridCell(query=q, space=r, dominant=dom, attention=True, seed=seed)
        for q, r in _PAIRINGS
        for dom in ("audio", "vision", "touch", "joint")
    ]


def structure_grid(seed: int = 0) -> list[GridCell]:
    """Attention on/off crossed with dominant-vs-joint, per query modality (12 cells).

    When the dominant-selection arm is on, the dominant modality is the
    query modality; otherwise the joint concatenated baseline is used.
    """
    cells = []
    for attention in (False, True):
        for use_dominant in (False, True):
            for query in ("audio", "vision", "touch"):
                retrieval = tuple(m for m in ("vision", "audio", "touch") if m != query)
                cells.append(
                    GridCell(
                        query=(query,),
                        space=retrieval,
                        dominant=query if use_dominant else "joint",
                        attention=attention,
                        seed=seed,
                    )
                )
    return cells


def load_grid(path: str | Path) -> list[GridCell]:
    """Read a JSON grid file: a list of {query, space, dominant, attention, seed}."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise DataFormatError(f"grid file {path} must hold a JSON list")
    cells = []
    for entry in raw:
        cells.append(
            GridCell(
                query=tuple(entry["query"].split("+")),
                space=tuple(entry["space"].split("+")),
                dominant=entry["dominant"],
                attention=bool(entry["attention"]),
                seed=int(entry.get("seed", 0)),
            )
        )
    return cells


@dataclass
class DataConfig:
    """Dataset shape shared by every cell of a grid run."""

    num_classes: int = 5
    train_count: int = 500
    val_count: int = 100
    test_count: int = 100
    image_size: int = 64
    audio_length: int = 4096
    seed: int = 0

    def counts(self) -> tuple[int, int, int]:
        return (self.train_count, self.val_count, self.test_count)


def ensure_dataset(directory: str | Path, data_config: DataConfig) -> DatasetSplits:
    """Load the dataset at ``directory`` or generate-and-save it there."""
    directory = Path(directory)
    if (directory / "manifest.json").is_file():
        return load_dataset(directory)
    splits = build_dataset(
        data_config.num_classes,
        data_config.counts(),
        seed=data_config.seed,
        image_size=data_config.image_size,
        audio_length=data_config.audio_length,
    )
    save_dataset(splits, directory)
    return splits


def cell_config(cell: GridCell, base: TrainConfig) -> TrainConfig:
    """Derive a cell's training config: the single side is the query/positive
    modality, the pair side (if any) is the fused retrieval space."""
    if len(cell.query) == 1 and len(cell.space) >= 1:
        query_modality, retrieval = cell.query[0], cell.space
    elif len(cell.space) == 1:
        query_modality, retrieval = cell.space[0], cell.query
    else:
        raise ConfigurationError(f"cannot derive a training config from cell {cell}")
    return dataclasses.replace(
        base,
        dominant=cell.dominant,
        attention=cell.attention,
        query_modality=query_modality,
        retrieval_modalities=retrieval,
        seed=cell.seed,
    )


@dataclass
class CellResult:
    cell: GridCell
    map_score: float | None
    metrics_path: Path | None
    checkpoint_dir: Path | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def report_row(self) -> dict:
        return {
            "query": "+".join(self.cell.query),
            "space": "+".join(self.cell.space),
            "dominant": self.cell.dominant,
            "attention": "on" if self.cell.attention else "off",
            "seed": self.cell.seed,
            "status": "failed" if self.failed else "ok",
            "map": "" if self.map_score is None else f"{self.map_score:.10f}",
        }


def run_cell(
    cell: GridCell,
    base_config: TrainConfig,
    dataset: DatasetSplits,
    out_dir: str | Path,
) -> CellResult:
    """Train and evaluate one cell, writing artifacts under ``out_dir``/<cell key>."""
    cell_dir = Path(out_dir) / cell.key()
    try:
        config = cell_config(cell, base_config)
        result = run_training(dataset, config)
        map_score, _ = evaluate_map(result.model, dataset.test, cell.query, cell.space)
        cell_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = cell_dir / "metrics.csv"
        write_metrics(result.history, metrics_path)
        checkpoint_dir = save_checkpoint(result.model, cell_dir / "checkpoint")
        with open(cell_dir / "result.json", "w") as fh:
            json.dump({"cell": cell.key(), "map": map_score}, fh, indent=2)
        return CellResult(cell=cell, map_score=map_score, metrics_path=metrics_path, checkpoint_dir=checkpoint_dir)
    except Exception as exc:  # cell failures must not kill the grid
        logger.exception("cell %s failed", cell.key())
        return CellResult(cell=cell, map_score=None, metrics_path=None, checkpoint_dir=None, error=str(exc))


def run_grid(
    cells: list[GridCell],
    base_config: TrainConfig,
    dataset: DatasetSplits,
    out_dir: str | Path,
) -> list[CellResult]:
    """Run every cell in order and write ``report.csv``; failures are recorded."""
    if not cells:
        raise InvalidArgumentError("grid must contain at least one cell")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = [run_cell(cell, base_config, dataset, out_dir) for cell in cells]
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for result in results:
            writer.writerow(result.report_row())
    return results


def project_embeddings(vectors, labels, method: str = "pca"):
    """Project embeddings to 2D for cluster inspection.

    The default (and only built-in) method is a principal-component
    projection: deterministic up to sign, with each component's sign fixed
    so its largest-magnitude loading is positive. Alternative projectors
    can be passed as a callable ``method(vectors) -> [n, 2] array``.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels)
    if vectors.ndim != 2 or vectors.shape[0] < 3:
        raise InvalidArgumentError("need at least 3 embedding vectors to project")
    if vectors.shape[1] < 2:
        raise InvalidArgumentError("embeddings must have dimension >= 2")
    if labels.shape[0] != vectors.shape[0]:
        raise InvalidArgumentError("one label per vector required")

    if callable(method):
        coords = np.asarray(method(vectors), dtype=np.float64)
    elif method == "pca":
        centered = vectors - vectors.mean(axis=0, keepdims=True)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        components = vt[:2]
        for i in range(2):
            j = int(np.argmax(np.abs(components[i])))
            if components[i, j] < 0:
                components[i] = -components[i]
        coords = centered @ components.T
    else:
        raise InvalidArgumentError(f"unknown projection method {method!r}")

    if coords.shape != (vectors.shape[0], 2):
        raise InvalidArgumentError(f"projector returned shape {coords.shape}, expected (n, 2)")
    return coords, labels


def export_curve(metrics_path: str | Path) -> list[tuple[int, float]]:
    """Extract (epoch, validation MAP) pairs from a stage-2 metrics log.

    Epochs must be contiguous from 1; a gap raises DataFormatError naming
    the first missing epoch.
    """
    metrics_path = Path(metrics_path)
    if not metrics_path.is_file():
        raise FileNotFoundError(f"metrics log {metrics_path} does not exist")
    rows = [row for row in read_metrics(metrics_path) if row.get("stage") == "stage2"]
    curve = []
    for expected, row in enumerate(rows, start=1):
        epoch = int(row["epoch"])
        if epoch != expected:
            raise DataFormatError(f"metrics log {metrics_path} is missing stage2 epoch {expected}")
        if row.get("val_map", "") == "":
            raise DataFormatError(f"metrics log {metrics_path} lacks val_map at epoch {epoch}")
        curve.append((epoch, float(row["val_map"])))
    return curve


def write_curve(curve: list[tuple[int, float]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "val_map"])
        writer.writerows(curve)
