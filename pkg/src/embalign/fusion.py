"""Per-object descriptor construction: view pooling and text fusion.

Each object arrives as a block of M view features. The block is averaged
into a single visual vector, optionally combined with a text feature
scaled by a balance weight, squashed through an activation, and (by
default) projected onto the unit sphere. Defaults follow the best
ablation settings: element-wise addition, tanh, weight 0.2.

Both normalization switches default to on because the downstream
similarity temperatures are calibrated for cosine-scale scores, which
requires descriptors of unit norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateDescriptorError, ValidationError

SCHEMES = ("add", "concat")
ACTIVATIONS = ("tanh", "relu", "sigmoid", "none")

_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for the fusion step; every ablation axis is selectable."""

    lam: float = 0.2
    scheme: str = "add"
    activation: str = "tanh"
    pre_normalize: bool = True
    post_normalize: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must be in [0, 1], got {self.lam}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    def output_dim(self, d: int) -> int:
        return 2 * d if self.scheme == "concat" else d


@dataclass(frozen=True)
class ViewFeatureBlock:
    """M view features (rows) for one object."""

    object_id: str
    features: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.features)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError(
                f"view block {self.object_id!r} must be M x d with M >= 1, got {arr.shape}"
            )
        object.__setattr__(self, "features", arr)

    @property
    def view_count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def mean_pool(block: ViewFeatureBlock) -> np.ndarray:
    """Average the view features column-wise, accumulating in float64."""
    return block.features.astype(np.float64).mean(axis=0)


def _unit(v: np.ndarray) -> np.ndarray:
    # Zero vectors pass through unchanged; degeneracy is caught after
    # activation where the object can be named.
    norm = float(np.linalg.norm(v))
    if norm < _NORM_FLOOR:
        return v
    return v / norm


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def fuse(
    g: np.ndarray,
    f_text: Optional[np.ndarray],
    cfg: FusionConfig,
    object_id: Optional[str] = None,
) -> np.ndarray:
    """Combine one visual vector with an optional text vector.

    A missing text vector behaves exactly like lambda = 0. With lambda = 0
    the text side contributes a true zero vector (not 0 * f), so the
    output is bit-identical regardless of the text content.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1:
        raise ValidationError(f"visual vector must be 1-D, got shape {g.shape}")
    d = g.shape[0]

    if f_text is None or cfg.lam == 0.0:
        text_part = np.zeros(d)
    else:
        f = np.asarray(f_text, dtype=np.float64)
        if f.shape != g.shape:
            raise ValidationError(
                f"dim mismatch: visual {g.shape[0]} vs text {f.shape[0]}"
            )
        if cfg.pre_normalize:
            f = _unit(f)
        text_part = cfg.lam * f

    if cfg.pre_normalize:
        g = _unit(g)

    if cfg.scheme == "add":
        z = g + text_part
    else:
        z = np.concatenate([g, text_part])

    h = _activate(z, cfg.activation)

    if cfg.post_normalize:
        norm = float(np.linalg.norm(h))
        if norm < _NORM_FLOOR:
            who = object_id if object_id is not None else "<unnamed>"
            raise DegenerateDescriptorError(
                f"descriptor for object {who!r} is the zero vector; cannot normalize"
            )
        h = h / norm
    return h


def build_descriptor_set(
    view_blocks: Sequence[ViewFeatureBlock],
    text_features: Optional[np.ndarray],
    cfg: FusionConfig,
) -> np.ndarray:
    """Fuse every object independently; row i comes from block i.

    text_features, when present, must hold one row per block in the same
    order. Output is float32, the on-disk currency.
    """
    blocks = list(view_blocks)
    if not blocks:
        raise ValidationError("no view blocks given")
    if text_features is not None:
        text_features = np.asarray(text_features)
        if text_features.ndim != 2 or text_features.shape[0] != len(blocks):
            raise ValidationError(
                f"text feature rows ({text_features.shape[0] if text_features.ndim == 2 else 'non-2D'}) "
                f"must match view block count ({len(blocks)})"
            )

    rows = []
    for i, block in enumerate(blocks):
        text_row = text_features[i] if text_features is not None else None
        rows.append(fuse(mean_pool(block), text_row, cfg, object_id=block.object_id))
    return np.asarray(rows, dtype=np.float32)
