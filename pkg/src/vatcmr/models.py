"""Model assembly: three encoder branches, classifier heads, fusion block.

Branch parameters are never shared; each branch, each head and the fusion
block are initialized in a fixed order from one seeded generator so the
whole model is a pure function of (config, dataset dims, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .config import TrainConfig
from .data import MultimodalSample
from .encoders import (
    MODALITIES,
    AudioEncoder,
    AudioEncoderConfig,
    ImageEncoder,
    ImageEncoderConfig,
    init_parameters,
)
from .errors import ConfigurationError, InvalidArgumentError
from .fusion import AttentionConfig, AttentionFusion, ConcatFusion, init_attention


@dataclass
class ModelState:
    """Everything the trainer owns: encoders, heads, fusion, and a stage tag."""

    encoders: dict[str, nn.Module]
    heads: dict[str, nn.Linear]
    fusion: nn.Module
    config: TrainConfig
    num_classes: int
    image_size: int
    audio_length: int
    stage: str = "init"

    def modules(self) -> dict[str, nn.Module]:
        named = {f"encoder_{m}": self.encoders[m] for m in MODALITIES}
        named.update({f"head_{name}": head for name, head in self.heads.items()})
        named["fusion"] = self.fusion
        return named

    def branch_parameters(self, modality: str) -> list[nn.Parameter]:
        return list(self.encoders[modality].parameters())

    def all_parameters(self) -> list[nn.Parameter]:
        params: list[nn.Parameter] = []
        for module in self.modules().values():
            params.extend(module.parameters())
        return params

    def eval(self) -> "ModelState":
        for module in self.modules().values():
            module.eval()
        return self

    def train(self) -> "ModelState":
        for module in self.modules().values():
            module.train()
        return self


def build_model(
    config: TrainConfig,
    num_classes: int,
    image_size: int = 64,
    audio_length: int = 4096,
) -> ModelState:
    """Construct and seed-initialize a fresh model."""
    d = config.embedding_dim
    image_cfg = ImageEncoderConfig(
        height=image_size,
        width=image_size,
        channels=config.image_channels,
        embedding_dim=d,
        normalize=config.normalize_embeddings,
    )
    audio_cfg = AudioEncoderConfig(
        length=audio_length,
        channels=config.audio_channels,
        embedding_dim=d,
        normalize=config.normalize_embeddings,
    )

    encoders: dict[str, nn.Module] = {
        "vision": ImageEncoder(image_cfg),
        "audio": AudioEncoder(audio_cfg),
        "touch": ImageEncoder(image_cfg),
    }
    heads: dict[str, nn.Linear] = {m: nn.Linear(d, num_classes) for m in MODALITIES}
    heads["joint"] = nn.Linear(3 * d, num_classes)

    if config.attention:
        fusion: nn.Module = AttentionFusion(
            AttentionConfig(
                embedding_dim=d,
                tokens=config.attention_tokens,
                heads=config.attention_heads,
                normalize=config.normalize_embeddings,
            )
        )
    else:
        fusion = ConcatFusion(d, normalize=config.normalize_embeddings)

    generator = torch.Generator().manual_seed(int(config.seed))
    for modality in MODALITIES:
        init_parameters(encoders[modality], generator)
    for name in (*MODALITIES, "joint"):
        init_parameters(heads[name], generator)
    init_attention(fusion, generator)

    return ModelState(
        encoders=encoders,
        heads=heads,
        fusion=fusion,
        config=config,
        num_classes=num_classes,
        image_size=image_size,
        audio_length=audio_length,
    )


@dataclass
class TensorBatch:
    """Stacked torch views of a list of samples (dataset arrays stay numpy)."""

    vision: torch.Tensor  # [B, 3, H, W]
    audio: torch.Tensor  # [B, 1, L]
    touch: torch.Tensor  # [B, 3, H, W]
    labels: torch.Tensor  # one-hot [B, C]
    classes: torch.Tensor  # [B] int64
    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.classes.shape[0]

    def modality(self, name: str) -> torch.Tensor:
        if name not in MODALITIES:
            raise InvalidArgumentError(f"unknown modality {name!r}")
        return getattr(self, "touch" if name == "touch" else name)

    def take(self, indices) -> "TensorBatch":
        idx = torch.as_tensor(indices, dtype=torch.int64)
        return TensorBatch(
            vision=self.vision[idx],
            audio=self.audio[idx],
            touch=self.touch[idx],
            labels=self.labels[idx],
            classes=self.classes[idx],
            ids=self.ids[idx.numpy()],
        )


def samples_to_batch(samples: list[MultimodalSample]) -> TensorBatch:
    """Stack samples into torch tensors ready for the encoders."""
    if not samples:
        raise InvalidArgumentError("cannot batch an empty sample list")
    vision = torch.from_numpy(np.stack([s.visual for s in samples])).permute(0, 3, 1, 2).contiguous()
    touch = torch.from_numpy(np.stack([s.tactile for s in samples])).permute(0, 3, 1, 2).contiguous()
    audio = torch.from_numpy(np.stack([s.audio for s in samples])).unsqueeze(1)
    labels = torch.from_numpy(np.stack([s.label for s in samples]))
    classes = labels.argmax(dim=1)
    ids = np.array([s.sample_id for s in samples], dtype=np.int64)
    return TensorBatch(vision=vision, audio=audio, touch=touch, labels=labels, classes=classes, ids=ids)


def embed_modality(model: ModelState, batch: TensorBatch, modality: str) -> torch.Tensor:
    return model.encoders[modality](batch.modality(modality))


def embed_space(model: ModelState, batch: TensorBatch, space: tuple[str, ...]) -> torch.Tensor:
    """Embeddings for a retrieval/query space: one modality, or a fused pair."""
    if len(space) == 1:
        return embed_modality(model, batch, space[0])
    if len(space) == 2:
        e1 = embed_modality(model, batch, space[0])
        e2 = embed_modality(model, batch, space[1])
        return model.fusion(e1, e2)
    raise InvalidArgumentError(f"space must name one or two modalities, got {space!r}")


def select_dominant_features(batch: TensorBatch, model: ModelState, dominant: str) -> torch.Tensor:
    """Logits from the dominant pathway (or the concatenated joint baseline)."""
    if dominant in MODALITIES:
        return model.heads[dominant](embed_modality(model, batch, dominant))
    if dominant == "joint":
        parts = [embed_modality(model, batch, m) for m in MODALITIES]
        return model.heads["joint"](torch.cat(parts, dim=-1))
    raise ConfigurationError(f"unknown dominant tag {dominant!r}")
