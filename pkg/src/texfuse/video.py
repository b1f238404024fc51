"""Video clip container, patch geometry, tokenization and tube masking.

Clips are dense arrays of shape (B, T, C, H, W) with values in [0, 1].
Tokenization follows the video-MAE convention: the clip is cut into
non-overlapping tubes of ``tube_size`` frames and ``patch_size`` x
``patch_size`` spatial patches, and each tube-patch is flattened into a
single token.  Token order is time-major, then row-major over the spatial
grid; within a token the flatten order is (frame, row, col, channel).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from einops import rearrange

from .errors import GeometryError, MaskError, ParameterError

#: Canonical modality names for clips moving through the pipeline.
MODALITIES = ("RGB", "LDP", "LBP")


@dataclass
class VideoClip:
    """A batch of video clips plus bookkeeping metadata.

    Attributes
    ----------
    data:
        float array, shape (B, T, C, H, W), values in [0, 1].
    modality:
        one of ``MODALITIES``; descriptor videos carry "LDP"/"LBP".
    clip_ids:
        one identifier per batch element (used for deterministic
        evaluation-time masking).
    """

    data: np.ndarray
    modality: str = "RGB"
    clip_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}, expected one of {MODALITIES}")
        if self.data.ndim != 5:
            raise GeometryError(
                f"clip data must be 5-dimensional (B, T, C, H, W), got shape {self.data.shape}"
            )
        if not self.clip_ids:
            self.clip_ids = [f"clip-{i:06d}" for i in range(self.data.shape[0])]
        if len(self.clip_ids) != self.data.shape[0]:
            raise ValueError(
                f"{len(self.clip_ids)} clip ids for batch of {self.data.shape[0]} clips"
            )

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class PatchGeometry:
    """Static description of how a clip is cut into tokens."""

    frames: int
    channels: int
    height: int
    width: int
    patch_size: int
    tube_size: int

    def __post_init__(self):
        for name in ("frames", "channels", "height", "width", "patch_size", "tube_size"):
            value = getattr(self, name)
            if value <= 0:
                raise GeometryError(f"{name} must be positive, got {value}")
        if self.frames % self.tube_size:
            raise GeometryError(
                f"frames ({self.frames}) not divisible by tube_size ({self.tube_size})"
            )
        if self.height % self.patch_size or self.width % self.patch_size:
            raise GeometryError(
                f"frame size {self.height}x{self.width} not divisible by "
                f"patch_size ({self.patch_size})"
            )

    @property
    def grid_t(self) -> int:
        """Number of temporal tubes."""
        return self.frames // self.tube_size

    @property
    def grid_h(self) -> int:
        return self.height // self.patch_size

    @property
    def grid_w(self) -> int:
        return self.width // self.patch_size

    @property
    def spatial_positions(self) -> int:
        """Patches per frame-pair grid (one temporal slice)."""
        return self.grid_h * self.grid_w

    @property
    def seq_len(self) -> int:
        """Total number of tokens S."""
        return self.grid_t * self.spatial_positions

    @property
    def token_dim(self) -> int:
        """Flattened size of one tube-patch."""
        return self.tube_size * self.patch_size * self.patch_size * self.channels


def _check_clip_shape(data, geometry: PatchGeometry) -> None:
    expected = (geometry.frames, geometry.channels, geometry.height, geometry.width)
    if data.ndim != 5 or tuple(data.shape[1:]) != expected:
        raise GeometryError(
            f"clip shape {tuple(data.shape)} does not match geometry (B, {expected[0]}, "
            f"{expected[1]}, {expected[2]}, {expected[3]})"
        )


def patchify(data, geometry: PatchGeometry):
    """Cut a (B, T, C, H, W) array into tokens of shape (B, S, D_tok).

    Works on numpy arrays and torch tensors alike; the operation is a pure
    reshape/transpose and is exactly invertible by :func:`unpatchify`.
    """
    _check_clip_shape(data, geometry)
    return rearrange(
        data,
        "b (gt ts) c (gh p1) (gw p2) -> b (gt gh gw) (ts p1 p2 c)",
        ts=geometry.tube_size,
        p1=geometry.patch_size,
        p2=geometry.patch_size,
    )


def unpatchify(tokens, geometry: PatchGeometry):
    """Inverse of :func:`patchify`; tokens must be (B, S, D_tok)."""
    if tokens.ndim != 3:
        raise GeometryError(f"tokens must be 3-dimensional, got shape {tuple(tokens.shape)}")
    if tokens.shape[1] != geometry.seq_len or tokens.shape[2] != geometry.token_dim:
        raise GeometryError(
            f"token shape {tuple(tokens.shape[1:])} does not match geometry "
            f"(S={geometry.seq_len}, D_tok={geometry.token_dim})"
        )
    return rearrange(
        tokens,
        "b (gt gh gw) (ts p1 p2 c) -> b (gt ts) c (gh p1) (gw p2)",
        gt=geometry.grid_t,
        gh=geometry.grid_h,
        gw=geometry.grid_w,
        ts=geometry.tube_size,
        p1=geometry.patch_size,
        p2=geometry.patch_size,
    )


@dataclass
class MaskSpec:
    """Masked/visible token indices for one batch.

    ``masked`` and ``visible`` are integer arrays of shape (B, n_masked)
    and (B, S - n_masked); every row is sorted ascending and the two sets
    partition range(S) for each sample.
    """

    masked: np.ndarray
    visible: np.ndarray
    seq_len: int
    ratio: float
    seed: int | None = None

    def __post_init__(self):
        self.masked = np.asarray(self.masked, dtype=np.int64)
        self.visible = np.asarray(self.visible, dtype=np.int64)
        if self.masked.ndim != 2 or self.visible.ndim != 2:
            raise MaskError("masked and visible must be 2-dimensional (batch, positions)")
        if self.masked.shape[0] != self.visible.shape[0]:
            raise MaskError(
                f"batch mismatch: {self.masked.shape[0]} masked rows vs "
                f"{self.visible.shape[0]} visible rows"
            )
        if self.masked.shape[1] + self.visible.shape[1] != self.seq_len:
            raise MaskError(
                f"masked ({self.masked.shape[1]}) + visible ({self.visible.shape[1]}) "
                f"must partition seq_len ({self.seq_len})"
            )
        both = np.concatenate([self.masked, self.visible], axis=1)
        if both.size and (both.min() < 0 or both.max() >= self.seq_len):
            raise MaskError("mask indices out of range [0, seq_len)")
        for row in both:
            if len(np.unique(row)) != self.seq_len:
                raise MaskError("masked and visible sets overlap or repeat indices")

    @property
    def batch_size(self) -> int:
        return self.masked.shape[0]

    @property
    def n_masked(self) -> int:
        return self.masked.shape[1]

    @property
    def n_visible(self) -> int:
        return self.visible.shape[1]


def _round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up (not banker's rounding)."""
    return int(np.floor(x + 0.5))


def tube_mask_from_rng(geometry: PatchGeometry, ratio: float, rng: np.random.Generator):
    """Draw one tube mask row: same spatial positions masked in every tube."""
    n_spatial = _round_half_up(ratio * geometry.spatial_positions)
    chosen = np.sort(rng.choice(geometry.spatial_positions, size=n_spatial, replace=False))
    offsets = np.arange(geometry.grid_t) * geometry.spatial_positions
    masked = (offsets[:, None] + chosen[None, :]).reshape(-1)
    all_idx = np.arange(geometry.seq_len)
    visible = all_idx[~np.isin(all_idx, masked)]
    return np.sort(masked), visible


def sample_tube_mask(
    geometry: PatchGeometry, ratio: float, seed: int, batch_size: int
) -> MaskSpec:
    """Sample per-clip tube masks for a batch.

    Each sample i draws round(ratio * spatial_positions) spatial grid
    positions without replacement from a generator seeded by (seed, i),
    and masks them in every temporal tube.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError(f"mask ratio must be in [0, 1], got {ratio}")
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    masked_rows, visible_rows = [], []
    for i in range(batch_size):
        rng = np.random.default_rng([seed, i])
        masked, visible = tube_mask_from_rng(geometry, ratio, rng)
        masked_rows.append(masked)
        visible_rows.append(visible)
    return MaskSpec(
        masked=np.stack(masked_rows),
        visible=np.stack(visible_rows),
        seq_len=geometry.seq_len,
        ratio=ratio,
        seed=seed,
    )


def clip_mask_seed(clip_id: str) -> int:
    """Stable 64-bit seed derived from a clip identifier.

    Uses SHA-256 so the value is identical across processes and platforms
    (Python's built-in hash() is salted per process).
    """
    digest = hashlib.sha256(clip_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def mask_for_clip_ids(
    geometry: PatchGeometry, ratio: float, clip_ids: list[str]
) -> MaskSpec:
    """Deterministic evaluation-time masks, one per clip id.

    The seed for each clip is a stable hash of its id, so the same clip
    always receives the same mask regardless of batch composition.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ParameterError(f"mask ratio must be in [0, 1], got {ratio}")
    if not clip_ids:
        raise ParameterError("clip_ids must be non-empty")
    masked_rows, visible_rows = [], []
    for cid in clip_ids:
        rng = np.random.default_rng([clip_mask_seed(cid), 0])
        masked, visible = tube_mask_from_rng(geometry, ratio, rng)
        masked_rows.append(masked)
        visible_rows.append(visible)
    return MaskSpec(
        masked=np.stack(masked_rows),
        visible=np.stack(visible_rows),
        seq_len=geometry.seq_len,
        ratio=ratio,
        seed=None,
    )


def apply_mask(tokens, mask: MaskSpec):
    """Select the visible tokens of each sample.

    Parameters
    ----------
    tokens:
        (B, S, D_tok) array or tensor.
    mask:
        MaskSpec whose seq_len matches S.

    Returns
    -------
    (visible_tokens, visible_indices):
        visible_tokens has shape (B, S', D_tok) with rows in ascending
        original index order; visible_indices is the (B, S') index array
        needed to gather position embeddings later.
    """
    if tokens.ndim != 3:
        raise GeometryError(f"tokens must be 3-dimensional, got shape {tuple(tokens.shape)}")
    if mask.seq_len != tokens.shape[1]:
        raise MaskError(
            f"mask seq_len {mask.seq_len} does not match token count {tokens.shape[1]}"
        )
    if mask.batch_size != tokens.shape[0]:
        raise MaskError(
            f"mask batch {mask.batch_size} does not match token batch {tokens.shape[0]}"
        )
    batch_idx = np.arange(tokens.shape[0])[:, None]
    visible_tokens = tokens[batch_idx, mask.visible]
    return visible_tokens, mask.visible
