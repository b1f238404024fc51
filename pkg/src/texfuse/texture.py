"""Local texture descriptors: LDP and LBP codes over grayscale video.

LDP (local directional pattern) convolves each 3x3 neighborhood with the
eight Kirsch compass masks and sets a bit for each of the k=3 strongest
absolute responses.  LBP (local binary pattern) compares each of the eight
neighbors against the center pixel.  Both codes depend only on local
ordering, so they are invariant to adding a constant to every pixel.

Descriptor videos map every pixel of every frame to its code, scale by
1/255 into [0, 1] and replicate the result across the three channels, so
the output has exactly the same shape as the RGB input.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ModalityError, ParameterError
from .video import VideoClip

#: Kirsch compass masks, index 0 = East, rotating counter-clockwise in 45
#: degree steps (E, NE, N, NW, W, SW, S, SE).  Each mask sums to zero.
KIRSCH_MASKS = np.array(
    [
        [[-3, -3, 5], [-3, 0, 5], [-3, -3, 5]],     # E
        [[-3, 5, 5], [-3, 0, 5], [-3, -3, -3]],     # NE
        [[5, 5, 5], [-3, 0, -3], [-3, -3, -3]],     # N
        [[5, 5, -3], [5, 0, -3], [-3, -3, -3]],     # NW
        [[5, -3, -3], [5, 0, -3], [5, -3, -3]],     # W
        [[-3, -3, -3], [5, 0, -3], [5, 5, -3]],     # SW
        [[-3, -3, -3], [-3, 0, -3], [5, 5, 5]],     # S
        [[-3, -3, -3], [-3, 0, 5], [-3, 5, 5]],     # SE
    ],
    dtype=np.float64,
)

#: LBP neighbor offsets (row, col), clockwise from the top-left corner.
#: Bit i of the code corresponds to offset i.
LBP_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1),
)

#: Grayscale conversion weights for (R, G, B).
GRAY_WEIGHTS = (0.299, 0.587, 0.114)

#: Texture descriptor kinds accepted throughout the package.
DESCRIPTOR_KINDS = ("ldp", "lbp")


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) RGB frame to real-valued luminance.

    Uses 0.299 R + 0.587 G + 0.114 B without rounding, so a pure red pixel
    (255, 0, 0) maps to 76.245 exactly.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ModalityError(
            f"expected an (H, W, 3) RGB frame, got shape {tuple(frame.shape)}"
        )
    if frame.shape[0] < 3 or frame.shape[1] < 3:
        raise ModalityError(
            f"frame must be at least 3x3 for 3x3 descriptors, got {frame.shape[:2]}"
        )
    r, g, b = frame[..., 0], frame[..., 1], frame[..., 2]
    return GRAY_WEIGHTS[0] * r + GRAY_WEIGHTS[1] * g + GRAY_WEIGHTS[2] * b


def kirsch_responses(patch: np.ndarray) -> np.ndarray:
    """Apply all eight Kirsch masks to one 3x3 grayscale patch.

    Returns the eight signed edge responses as float64 in mask order
    (E, NE, N, NW, W, SW, S, SE).
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (3, 3):
        raise ParameterError(f"patch must be 3x3, got shape {tuple(patch.shape)}")
    return np.einsum("kij,ij->k", KIRSCH_MASKS, patch)


def ldp_code(responses: np.ndarray, k: int = 3) -> int:
    """LDP code for one pixel from its eight Kirsch responses.

    Bit i is set iff |responses[i]| is among the k largest absolute
    responses; ties are broken toward the lower mask index, so eight equal
    responses give code 0b00000111.  The result always has popcount k.
    """
    responses = np.asarray(responses, dtype=np.float64)
    if responses.shape != (8,):
        raise ParameterError(f"expected 8 responses, got shape {tuple(responses.shape)}")
    if not 1 <= k <= 8:
        raise ParameterError(f"k must be in [1, 8], got {k}")
    # Stable sort on -|m| keeps lower indices first among exact ties.
    order = np.argsort(-np.abs(responses), kind="stable")
    code = 0
    for i in order[:k]:
        code |= 1 << int(i)
    return code


def lbp_code(patch: np.ndarray) -> int:
    """LBP code for the center pixel of one 3x3 grayscale patch.

    Bit i is set iff the i-th neighbor (clockwise from top-left) is >= the
    center value, so a constant patch gives 255.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (3, 3):
        raise ParameterError(f"patch must be 3x3, got shape {tuple(patch.shape)}")
    center = patch[1, 1]
    code = 0
    for i, (dy, dx) in enumerate(LBP_OFFSETS):
        if patch[1 + dy, 1 + dx] >= center:
            code |= 1 << i
    return code


def _neighbor_stack(gray: np.ndarray) -> np.ndarray:
    """Stack the 3x3 neighborhood of every pixel after replicate padding.

    gray has shape (..., H, W); the result has shape (3, 3, ..., H, W)
    indexed by (mask row, mask col).
    """
    h, w = gray.shape[-2:]
    pad = [(0, 0)] * (gray.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(gray, pad, mode="edge")
    rows = []
    for dy in range(3):
        cols = []
        for dx in range(3):
            cols.append(padded[..., dy : dy + h, dx : dx + w])
        rows.append(cols)
    return np.array(rows)


def ldp_code_image(gray: np.ndarray, k: int = 3) -> np.ndarray:
    """Vectorized LDP codes for every pixel of one or many gray images.

    gray has shape (..., H, W); borders use replicate padding.  Returns
    uint8 codes of the same shape.
    """
    if not 1 <= k <= 8:
        raise ParameterError(f"k must be in [1, 8], got {k}")
    gray = np.asarray(gray, dtype=np.float64)
    neighborhood = _neighbor_stack(gray)
    responses = np.einsum("kij,ij...->k...", KIRSCH_MASKS, neighborhood)
    order = np.argsort(-np.abs(responses), axis=0, kind="stable")
    bits = np.left_shift(1, order[:k]).sum(axis=0)
    return bits.astype(np.uint8)


def lbp_code_image(gray: np.ndarray) -> np.ndarray:
    """Vectorized LBP codes for every pixel; same conventions as lbp_code."""
    gray = np.asarray(gray, dtype=np.float64)
    neighborhood = _neighbor_stack(gray)
    center = neighborhood[1, 1]
    codes = np.zeros(gray.shape, dtype=np.uint8)
    for i, (dy, dx) in enumerate(LBP_OFFSETS):
        codes |= (neighborhood[1 + dy, 1 + dx] >= center).astype(np.uint8) << i
    return codes


def descriptor_array(data: np.ndarray, kind: str, k: int = 3) -> np.ndarray:
    """Descriptor video for a raw (B, T, C, H, W) RGB array.

    Each frame is converted to luminance, coded per pixel (replicate
    padding at the border), scaled by 1/255 and replicated across the
    channel axis, so the output shape equals the input shape.
    """
    kind = kind.lower()
    if kind not in DESCRIPTOR_KINDS:
        raise ParameterError(f"kind must be one of {DESCRIPTOR_KINDS}, got {kind!r}")
    data = np.asarray(data)
    if data.ndim != 5:
        raise ModalityError(f"expected (B, T, C, H, W) input, got shape {tuple(data.shape)}")
    if data.shape[2] != 3:
        raise ModalityError(f"descriptor input must have 3 channels, got {data.shape[2]}")
    if data.shape[3] < 3 or data.shape[4] < 3:
        raise ModalityError(f"frames must be at least 3x3, got {data.shape[3:]}")
    # Luminance on the 0..255 scale; positive scaling does not change the
    # codes, this just keeps values in the documented range.
    scaled = data.astype(np.float64) * 255.0
    gray = (
        GRAY_WEIGHTS[0] * scaled[:, :, 0]
        + GRAY_WEIGHTS[1] * scaled[:, :, 1]
        + GRAY_WEIGHTS[2] * scaled[:, :, 2]
    )
    if kind == "ldp":
        codes = ldp_code_image(gray, k=k)
    else:
        codes = lbp_code_image(gray)
    planes = codes.astype(data.dtype if data.dtype.kind == "f" else np.float32) / 255.0
    return np.repeat(planes[:, :, None], data.shape[2], axis=2)


def descriptor_video(clip: VideoClip, kind: str, k: int = 3) -> VideoClip:
    """Descriptor video for an RGB VideoClip; preserves ids and shape."""
    if clip.modality != "RGB":
        raise ModalityError(
            f"descriptor_video needs an RGB clip, got modality {clip.modality!r}"
        )
    data = descriptor_array(clip.data, kind, k=k)
    return VideoClip(data=data, modality=kind.upper(), clip_ids=list(clip.clip_ids))


class TextureCoder(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping RGB clip arrays to descriptor videos.

    Parameters
    ----------
    kind:
        "ldp" or "lbp".
    k:
        number of bits set per LDP code (ignored for LBP).
    """

    def __init__(self, kind: str = "ldp", k: int = 3):
        self.kind = kind
        self.k = k

    def fit(self, X, y=None):
        """Validate parameters; the transform itself learns nothing."""
        if str(self.kind).lower() not in DESCRIPTOR_KINDS:
            raise ParameterError(
                f"kind must be one of {DESCRIPTOR_KINDS}, got {self.kind!r}"
            )
        if not 1 <= int(self.k) <= 8:
            raise ParameterError(f"k must be in [1, 8], got {self.k}")
        self.n_features_in_ = None
        return self

    def transform(self, X):
        """Map an (N, T, C, H, W) RGB array to descriptor videos."""
        check_is_fitted(self, "n_features_in_")
        return descriptor_array(np.asarray(X), str(self.kind).lower(), k=int(self.k))
