"""Cross-attention fusion of two modality embeddings.

A d-vector carries no sequence axis, so each embedding is reshaped into T
tokens of width d/T before attending (T = 1 recovers plain averaging). One
directional pass projects the query tokens from one modality and keys/values
from the other, runs scaled dot-product attention per head, concatenates the
heads, applies the output projection per token and mean-pools the tokens
back to a single d-vector. The fused representation averages the two
directional passes, each with its own parameters:

    fused = 0.5 * (attend(e1 -> e2) + attend(e2 -> e1))

which is symmetric under swapping (e1, e2) together with the parameter pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoders import l2_normalize
from .errors import ConfigurationError, InvalidArgumentError


@dataclass(frozen=True)
class AttentionConfig:
    embedding_dim: int = 128
    tokens: int = 8
    heads: int = 4
    normalize: bool = False  # L2-normalize the fused output

    def __post_init__(self):
        if self.heads < 1 or self.tokens < 1:
            raise ConfigurationError("heads and tokens must be >= 1")
        if self.embedding_dim % self.tokens != 0:
            raise ConfigurationError(
                f"embedding_dim {self.embedding_dim} is not divisible by tokens {self.tokens}"
            )

    @property
    def token_dim(self) -> int:
        return self.embedding_dim // self.tokens

    @property
    def head_dim(self) -> int:
        return self.token_dim


def attention_weights(query: torch.Tensor, key: torch.Tensor) -> torch.Tensor:
    """Row-stochastic attention matrix softmax(Q K^T / sqrt(d_h))."""
    if query.shape[-1] != key.shape[-1]:
        raise InvalidArgumentError("query and key widths differ")
    if not (torch.isfinite(query).all() and torch.isfinite(key).all()):
        raise InvalidArgumentError("attention inputs must be finite")
    scale = query.shape[-1] ** 0.5
    scores = query @ key.transpose(-1, -2) / scale
    return torch.softmax(scores, dim=-1)


def scaled_dot_attention(query: torch.Tensor, key: torch.Tensor, value: torch.Tensor) -> torch.Tensor:
    """softmax(Q K^T / sqrt(d_h)) V; each output row is a convex mix of V rows."""
    if key.shape[-2] != value.shape[-2]:
        raise InvalidArgumentError("key and value token counts differ")
    if not torch.isfinite(value).all():
        raise InvalidArgumentError("attention inputs must be finite")
    return attention_weights(query, key) @ value


class CrossAttention(nn.Module):
    """One directional multi-head pass: query embedding attends to a kv embedding."""

    def __init__(self, config: AttentionConfig):
        super().__init__()
        self.config = config
        d_tok, d_h, h = config.token_dim, config.head_dim, config.heads
        self.w_query = nn.Parameter(torch.empty(h, d_h, d_tok))
        self.w_key = nn.Parameter(torch.empty(h, d_h, d_tok))
        self.w_value = nn.Parameter(torch.empty(h, d_h, d_tok))
        self.w_out = nn.Parameter(torch.empty(config.embedding_dim, h * d_h))

    @classmethod
    def identity(cls, embedding_dim: int) -> "CrossAttention":
        """Single-token, single-head instance with identity projections."""
        module = cls(AttentionConfig(embedding_dim=embedding_dim, tokens=1, heads=1))
        with torch.no_grad():
            eye = torch.eye(embedding_dim)
            module.w_query.copy_(eye.unsqueeze(0))
            module.w_key.copy_(eye.unsqueeze(0))
            module.w_value.copy_(eye.unsqueeze(0))
            module.w_out.copy_(eye)
        return module

    def forward(self, query_emb: torch.Tensor, kv_emb: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if query_emb.shape[-1] != cfg.embedding_dim or kv_emb.shape[-1] != cfg.embedding_dim:
            raise InvalidArgumentError(
                f"embeddings must have width {cfg.embedding_dim}, "
                f"got {query_emb.shape[-1]} and {kv_emb.shape[-1]}"
            )
        batch = query_emb.shape[:-1]
        q_tok = query_emb.reshape(*batch, 1, cfg.tokens, cfg.token_dim)
        kv_tok = kv_emb.reshape(*batch, 1, cfg.tokens, cfg.token_dim)

        # (..., 1, T, d_tok) @ (h, d_tok, d_h) broadcasts to (..., h, T, d_h)
        q = q_tok @ self.w_query.transpose(-1, -2)
        k = kv_tok @ self.w_key.transpose(-1, -2)
        v = kv_tok @ self.w_value.transpose(-1, -2)
        attended = scaled_dot_attention(q, k, v)

        merged = attended.movedim(-3, -2).reshape(*batch, cfg.tokens, cfg.heads * cfg.head_dim)
        out_tokens = merged @ self.w_out.transpose(-1, -2)
        return out_tokens.mean(dim=-2)


def fuse(
    e1: torch.Tensor,
    e2: torch.Tensor,
    attend_1_to_2: CrossAttention,
    attend_2_to_1: CrossAttention,
) -> torch.Tensor:
    """Average of the two directional cross-attention passes.

    Bit-exact swap symmetry: fuse(e2, e1, attend_2_to_1, attend_1_to_2)
    returns the identical tensor.
    """
    if e1.shape[-1] != e2.shape[-1]:
        raise InvalidArgumentError("embeddings to fuse must have equal width")
    return 0.5 * (attend_1_to_2(e1, e2) + attend_2_to_1(e2, e1))


class AttentionFusion(nn.Module):
    """Pair of independently parameterized directional passes (the default path)."""

    def __init__(self, config: AttentionConfig):
        super().__init__()
        self.config = config
        self.attend_1_to_2 = CrossAttention(config)
        self.attend_2_to_1 = CrossAttention(config)

    def forward(self, e1: torch.Tensor, e2: torch.Tensor) -> torch.Tensor:
        fused = fuse(e1, e2, self.attend_1_to_2, self.attend_2_to_1)
        return l2_normalize(fused) if self.config.normalize else fused


class ConcatFusion(nn.Module):
    """No-attention ablation arm: concatenate and project back to width d."""

    def __init__(self, embedding_dim: int, normalize: bool = False):
        super().__init__()
        self.normalize = normalize
        self.projection = nn.Linear(2 * embedding_dim, embedding_dim)

    def forward(self, e1: torch.Tensor, e2: torch.Tensor) -> torch.Tensor:
        fused = concat_fuse(e1, e2, self.projection)
        return l2_normalize(fused) if self.normalize else fused


def concat_fuse(e1: torch.Tensor, e2: torch.Tensor, projection: nn.Linear) -> torch.Tensor:
    """Affine map of the concatenated pair, [e1 | e2] -> d."""
    if e1.shape[-1] != e2.shape[-1]:
        raise InvalidArgumentError("embeddings to fuse must have equal width")
    if projection.in_features != e1.shape[-1] + e2.shape[-1]:
        raise InvalidArgumentError(
            f"projection expects {projection.in_features} inputs, got {e1.shape[-1] + e2.shape[-1]}"
        )
    return projection(torch.cat([e1, e2], dim=-1))


def init_attention(module: nn.Module, generator: torch.Generator) -> None:
    """Seeded fan-in scaled uniform init for attention / projection weights."""
    with torch.no_grad():
        for param in module.parameters():
            if param.ndim >= 2:
                fan_in = param.shape[-1]
                bound = (6.0 / fan_in) ** 0.5
                param.uniform_(-bound, bound, generator=generator)
            else:
                param.zero_()
