"""Training configuration and its JSON round trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .encoders import MODALITIES
from .errors import ConfigurationError

DOMINANT_TAGS = ("vision", "audio", "touch", "joint")
STAGE1_SCOPES = ("dominant_only", "all_branches")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for both training stages plus every pipeline knob.

    Defaults follow the reference recipe: batch size 5, 50 epochs per
    stage, Adam at 1e-3 (classification stage) and 1e-4 (triplet stage),
    margin 0.5.
    """

    batch_size: int = 5
    ce_epochs: int = 50
    triplet_epochs: int = 50
    ce_learning_rate: float = 1e-3
    triplet_learning_rate: float = 1e-4
    triplet_margin: float = 0.5
    dominant: str = "audio"
    query_modality: str = "audio"
    retrieval_modalities: tuple[str, ...] = ("vision", "touch")
    stage1_scope: str = "dominant_only"
    attention: bool = True
    embedding_dim: int = 128
    attention_tokens: int = 8
    attention_heads: int = 4
    normalize_embeddings: bool = False
    image_channels: tuple[int, ...] = (16, 32, 64, 128)
    audio_channels: tuple[int, int, int] = (16, 32, 64)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "retrieval_modalities", tuple(self.retrieval_modalities))
        object.__setattr__(self, "image_channels", tuple(self.image_channels))
        object.__setattr__(self, "audio_channels", tuple(self.audio_channels))
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be >= 2 so a negative can exist")
        if self.triplet_margin <= 0:
            raise ConfigurationError("triplet_margin must be positive")
        if self.ce_epochs < 0 or self.triplet_epochs < 0:
            raise ConfigurationError("epoch counts must be nonnegative")
        if self.dominant not in DOMINANT_TAGS:
            raise ConfigurationError(f"dominant must be one of {DOMINANT_TAGS}, got {self.dominant!r}")
        if self.query_modality not in MODALITIES:
            raise ConfigurationError(f"query_modality must be one of {MODALITIES}")
        if not (1 <= len(self.retrieval_modalities) <= 2):
            raise ConfigurationError("retrieval_modalities must name one or two modalities")
        for modality in self.retrieval_modalities:
            if modality not in MODALITIES:
                raise ConfigurationError(f"unknown retrieval modality {modality!r}")
        if len(set(self.retrieval_modalities)) != len(self.retrieval_modalities):
            raise ConfigurationError("retrieval_modalities must be distinct")
        if self.stage1_scope not in STAGE1_SCOPES:
            raise ConfigurationError(f"stage1_scope must be one of {STAGE1_SCOPES}")

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("retrieval_modalities", "image_channels", "audio_channels"):
            out[key] = list(out[key])
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
