"""Disjoint modality encoder branches.

Vision and touch share an architecture family (a small strided conv stack,
global average pooling, affine map to the embedding width) but never share
parameters. Audio is a fixed three-layer strided 1D conv stack, global
average pooling, and one fully connected layer.

The image branch takes an optional ``backbone`` argument: any module with
an ``out_features`` attribute that maps [B, 3, H, W] to [B, out_features]
can replace the default conv stack (e.g. a pretrained network at larger
scale). The affine head to the embedding width is kept either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import InvalidArgumentError

MODALITIES = ("vision", "audio", "touch")


@dataclass(frozen=True)
class ImageEncoderConfig:
    height: int = 64
    width: int = 64
    channels: tuple[int, ...] = (16, 32, 64, 128)
    kernel_size: int = 3
    embedding_dim: int = 128
    normalize: bool = False  # L2-normalize the output embedding


@dataclass(frozen=True)
class AudioEncoderConfig:
    length: int = 4096
    channels: tuple[int, int, int] = (16, 32, 64)
    kernel_size: int = 9
    strides: tuple[int, int, int] = (4, 4, 4)
    embedding_dim: int = 128
    normalize: bool = False

    def __post_init__(self):
        # The audio branch is architecturally fixed at three conv layers.
        if len(self.channels) != 3 or len(self.strides) != 3:
            raise InvalidArgumentError("audio encoder uses exactly three conv layers")


def l2_normalize(x: torch.Tensor) -> torch.Tensor:
    """Batch-independent unit-norm scaling; maps the zero vector to itself."""
    return x / (x.norm(dim=-1, keepdim=True) + 1e-8)


@dataclass
class Embedding:
    """A single encoder output: ``values`` of length d plus its modality tag."""

    values: np.ndarray
    modality: str

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1:
            raise InvalidArgumentError("embedding values must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("embedding values must be finite")
        if self.modality not in MODALITIES:
            raise InvalidArgumentError(f"unknown modality {self.modality!r}")


class ConvImageBackbone(nn.Module):
    """Default image feature extractor: strided conv blocks + global pooling."""

    def __init__(self, config: ImageEncoderConfig):
        super().__init__()
        layers: list[nn.Module] = []
        in_ch = 3
        for out_ch in config.channels:
            layers.append(
                nn.Conv2d(in_ch, out_ch, config.kernel_size, stride=2, padding=config.kernel_size // 2)
            )
            layers.append(nn.ReLU())
            in_ch = out_ch
        self.blocks = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.out_features = in_ch

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.blocks(x)).flatten(1)


class ImageEncoder(nn.Module):
    """Vision/touch branch: backbone features to a d-dimensional embedding."""

    def __init__(self, config: ImageEncoderConfig, backbone: nn.Module | None = None):
        super().__init__()
        self.config = config
        self.backbone = backbone if backbone is not None else ConvImageBackbone(config)
        self.head = nn.Linear(self.backbone.out_features, config.embedding_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != self.config.height or x.shape[3] != self.config.width:
            raise InvalidArgumentError(
                f"expected images [B, 3, {self.config.height}, {self.config.width}], got {tuple(x.shape)}"
            )
        out = self.head(self.backbone(x))
        return l2_normalize(out) if self.config.normalize else out


class AudioEncoder(nn.Module):
    """Audio branch: three strided 1D convs, global average pool, one affine."""

    def __init__(self, config: AudioEncoderConfig):
        super().__init__()
        self.config = config
        layers: list[nn.Module] = []
        in_ch = 1
        for out_ch, stride in zip(config.channels, config.strides):
            layers.append(
                nn.Conv1d(in_ch, out_ch, config.kernel_size, stride=stride, padding=config.kernel_size // 2)
            )
            layers.append(nn.ReLU())
            in_ch = out_ch
        self.blocks = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool1d(1)
        self.head = nn.Linear(in_ch, config.embedding_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.config.length:
            raise InvalidArgumentError(
                f"expected signals [B, 1, {self.config.length}], got {tuple(x.shape)}"
            )
        out = self.head(self.pool(self.blocks(x)).flatten(1))
        return l2_normalize(out) if self.config.normalize else out


def init_parameters(module: nn.Module, generator: torch.Generator) -> None:
    """Seeded fan-in scaled uniform weights (He bound, preserves activation
    scale through the ReLU stacks), zero biases, for reproducible runs."""
    with torch.no_grad():
        for layer in module.modules():
            if isinstance(layer, (nn.Conv1d, nn.Conv2d, nn.Linear)):
                fan_in = layer.weight.shape[1:].numel()
                bound = (6.0 / fan_in) ** 0.5
                layer.weight.uniform_(-bound, bound, generator=generator)
                if layer.bias is not None:
                    layer.bias.zero_()


def _to_single_batch(array: np.ndarray | torch.Tensor, dtype: torch.dtype) -> torch.Tensor:
    tensor = torch.as_tensor(np.asarray(array), dtype=dtype)
    return tensor.unsqueeze(0)


def _encode_image(image, encoder: ImageEncoder, modality: str) -> Embedding:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape != (encoder.config.height, encoder.config.width, 3):
        raise InvalidArgumentError(
            f"expected image [{encoder.config.height}, {encoder.config.width}, 3], got {arr.shape}"
        )
    dtype = next(encoder.parameters()).dtype
    batch = _to_single_batch(arr, dtype).permute(0, 3, 1, 2)
    was_training = encoder.training
    encoder.eval()
    with torch.no_grad():
        values = encoder(batch)[0]
    encoder.train(was_training)
    return Embedding(values=values.numpy(), modality=modality)


def encode_visual(image, encoder: ImageEncoder) -> Embedding:
    """Embed one [H, W, 3] visual image (eval mode, deterministic)."""
    return _encode_image(image, encoder, "vision")


def encode_tactile(image, encoder: ImageEncoder) -> Embedding:
    """Embed one [H, W, 3] tactile image (eval mode, deterministic)."""
    return _encode_image(image, encoder, "touch")


def encode_audio(signal, encoder: AudioEncoder) -> Embedding:
    """Embed one length-L audio signal (eval mode, deterministic)."""
    arr = np.asarray(signal)
    if arr.ndim != 1 or arr.shape[0] != encoder.config.length:
        raise InvalidArgumentError(f"expected signal [{encoder.config.length}], got {arr.shape}")
    dtype = next(encoder.parameters()).dtype
    batch = _to_single_batch(arr, dtype).unsqueeze(1)
    was_training = encoder.training
    encoder.eval()
    with torch.no_grad():
        values = encoder(batch)[0]
    encoder.train(was_training)
    return Embedding(values=values.numpy(), modality="audio")


def classify(embedding: Embedding | np.ndarray, head: nn.Linear) -> np.ndarray:
    """Apply an affine classifier head to an embedding, returning logits [C]."""
    values = embedding.values if isinstance(embedding, Embedding) else np.asarray(embedding)
    if values.ndim != 1 or values.shape[0] != head.in_features:
        raise InvalidArgumentError(
            f"embedding length {values.shape} does not match head input {head.in_features}"
        )
    with torch.no_grad():
        logits = head(torch.as_tensor(values, dtype=head.weight.dtype))
    return logits.numpy()
