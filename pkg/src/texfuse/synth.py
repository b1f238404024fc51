"""Synthetic clip generator, binary clip storage and dataset manifests.

Real clips are temporally coherent smoothed random fields (an AR(1) drift
of a seeded field).  Fake clips start from the *same* base content and
apply the domain's artifact inside one contiguous rectangular region that
stays fixed across frames:

- ``patch-blend``: composite a texture with mismatched high-frequency
  statistics across a feathered boundary,
- ``region-resample``: block-average the region and re-expand it, leaving
  blocky low-resolution texture with sharp block edges,
- ``noise-inject``: add i.i.d. noise inside the region.

Clip files use the FSVC container: magic ``FSVC``, u16 version, u32
frames/channels/height/width, u32 dtype tag (0 = float32 in [0, 1]), all
little-endian, followed by the row-major (T, C, H, W) payload.  Manifests
are JSON lines of ClipRecord objects.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ClipFormatError, ManifestError, ParameterError
from .video import VideoClip

MAGIC = b"FSVC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIII")  # magic, version, T, C, H, W, dtype tag
_DTYPE_F32 = 0
_MAX_PAYLOAD_BYTES = 1 << 31

ARTIFACT_KINDS = ("patch-blend", "region-resample", "noise-inject")


@dataclass(frozen=True)
class DomainParams:
    """Generator knobs for one synthetic domain."""

    name: str
    blur_sigma: float
    channel_means: tuple[float, float, float]
    channel_stds: tuple[float, float, float]
    artifact: str
    region_fraction: float = 0.2
    artifact_strength: float = 1.0
    shade_shift: float = 0.15

    def __post_init__(self):
        if self.artifact not in ARTIFACT_KINDS:
            raise ParameterError(
                f"artifact must be one of {ARTIFACT_KINDS}, got {self.artifact!r}"
            )
        if not 0.0 < self.region_fraction <= 0.5:
            raise ParameterError(
                f"region_fraction must be in (0, 0.5], got {self.region_fraction}"
            )
        if self.blur_sigma <= 0:
            raise ParameterError(f"blur_sigma must be positive, got {self.blur_sigma}")
        if not 0.0 <= self.shade_shift < 1.0:
            raise ParameterError(
                f"shade_shift must be in [0, 1), got {self.shade_shift}"
            )


#: The two stock domains used by the desk-scale experiments.  "alpha" is
#: smooth with blended texture patches; "beta" has coarser base texture, a
#: shifted palette and resampling artifacts.
DOMAINS = {
    "alpha": DomainParams(
        name="alpha",
        blur_sigma=2.2,
        channel_means=(0.55, 0.45, 0.40),
        channel_stds=(0.14, 0.12, 0.11),
        artifact="patch-blend",
        region_fraction=0.32,
        artifact_strength=1.0,
        shade_shift=0.15,
    ),
    "beta": DomainParams(
        name="beta",
        blur_sigma=1.3,
        channel_means=(0.42, 0.48, 0.56),
        channel_stds=(0.17, 0.15, 0.13),
        artifact="region-resample",
        region_fraction=0.32,
        artifact_strength=1.0,
        shade_shift=0.15,
    ),
}

_DRIFT_RHO = 0.9


def _name_seed(name: str) -> int:
    """Small stable integer derived from a domain name."""
    return sum((i + 1) * b for i, b in enumerate(name.encode("utf-8"))) % (1 << 31)


def _smooth_field(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Unit-variance smoothed Gaussian field, channel-wise normalized."""
    raw = rng.standard_normal(shape)
    smoothed = np.stack([gaussian_filter(chan, sigma=sigma, mode="wrap") for chan in raw])
    std = smoothed.std(axis=(1, 2), keepdims=True)
    return smoothed / np.maximum(std, 1e-8)


def _base_clip(domain: DomainParams, frames: int, height: int, width: int,
               rng: np.random.Generator) -> np.ndarray:
    """Temporally coherent real content, shape (T, C, H, W), values in [0, 1]."""
    means = np.asarray(domain.channel_means)[:, None, None]
    stds = np.asarray(domain.channel_stds)[:, None, None]
    shape = (3, height, width)
    state = _smooth_field(rng, shape, domain.blur_sigma)
    frames_out = []
    for _ in range(frames):
        frames_out.append(np.clip(means + stds * state, 0.0, 1.0))
        fresh = _smooth_field(rng, shape, domain.blur_sigma)
        state = _DRIFT_RHO * state + np.sqrt(1.0 - _DRIFT_RHO**2) * fresh
    return np.stack(frames_out)


def _pick_region(rng: np.random.Generator, height: int, width: int,
                 fraction: float) -> tuple[int, int, int, int]:
    """Contiguous rectangle (top, left, h, w) covering about fraction of a frame."""
    aspect = rng.uniform(0.75, 1.33)
    h = int(np.clip(round(height * np.sqrt(fraction * aspect)), 4, height - 2))
    w = int(np.clip(round(width * np.sqrt(fraction / aspect)), 4, width - 2))
    top = int(rng.integers(1, height - h)) if height - h > 1 else 0
    left = int(rng.integers(1, width - w)) if width - w > 1 else 0
    return top, left, h, w


def _apply_artifact(base: np.ndarray, domain: DomainParams,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Apply the domain artifact; returns (fake clip, H x W region mask)."""
    frames, _, height, width = base.shape
    top, left, h, w = _pick_region(rng, height, width, domain.region_fraction)
    region = np.zeros((height, width), dtype=np.float32)
    region[top : top + h, left : left + w] = 1.0
    strength = domain.artifact_strength
    out = base.copy()

    if domain.artifact == "patch-blend":
        # Feathered alpha matte, tapering to zero at the rectangle border so
        # the region mask stays an exact account of the touched pixels.
        alpha = gaussian_filter(region, sigma=1.0)
        alpha = alpha / alpha.max() * region
        means = np.asarray(domain.channel_means)[:, None, None]
        stds = np.asarray(domain.channel_stds)[:, None, None]
        for t in range(frames):
            texture = _smooth_field(rng, (3, height, width), sigma=0.45)
            patch = np.clip(means + strength * stds * texture, 0.0, 1.0)
            out[t] = (1.0 - alpha) * out[t] + alpha * patch
    elif domain.artifact == "region-resample":
        factor = 2
        for t in range(frames):
            sub = out[t][:, top : top + h, left : left + w]
            h2, w2 = (h // factor) * factor, (w // factor) * factor
            core = sub[:, :h2, :w2]
            blocks = core.reshape(3, h2 // factor, factor, w2 // factor, factor)
            coarse = blocks.mean(axis=(2, 4))
            rebuilt = np.repeat(np.repeat(coarse, factor, axis=1), factor, axis=2)
            sub[:, :h2, :w2] = base[t][:, top : top + h2, left : left + w2] * (
                1.0 - strength
            ) + strength * rebuilt
    else:  # noise-inject
        amp = 0.08 * strength
        for t in range(frames):
            noise = rng.normal(0.0, amp, size=(3, height, width))
            out[t] = np.clip(out[t] + region[None] * noise, 0.0, 1.0)

    # Shared low-frequency trace across all artifact kinds: composited
    # regions sit slightly darker than the surrounding content.
    out = out - domain.shade_shift * strength * region[None, None]

    return np.clip(out, 0.0, 1.0), region


def generate_clip_with_region(
    domain: DomainParams, label: int, seed: int,
    frames: int = 8, height: int = 32, width: int = 32,
) -> tuple[VideoClip, np.ndarray]:
    """Generate one clip plus its artifact-region marker.

    Real and fake clips of the same (domain, seed) share base content; the
    marker is an H x W {0, 1} map, all zero for real clips.
    """
    if label not in (0, 1):
        raise ParameterError(f"label must be 0 or 1, got {label}")
    base_rng = np.random.default_rng([_name_seed(domain.name), int(seed), 0])
    data = _base_clip(domain, frames, height, width, base_rng)
    region = np.zeros((height, width), dtype=np.float32)
    if label == 1:
        artifact_rng = np.random.default_rng([_name_seed(domain.name), int(seed), 1])
        data, region = _apply_artifact(data, domain, artifact_rng)
    clip = VideoClip(
        data=data[None].astype(np.float32),
        modality="RGB",
        clip_ids=[f"{domain.name}-{label}-{seed}"],
    )
    return clip, region


def generate_clip(domain: DomainParams, label: int, seed: int,
                  frames: int = 8, height: int = 32, width: int = 32) -> VideoClip:
    """Generate one deterministic synthetic clip (batch dimension of 1)."""
    clip, _ = generate_clip_with_region(domain, label, seed, frames, height, width)
    return clip


def write_clip(clip: VideoClip, path) -> None:
    """Store a single clip (B = 1) as an FSVC file."""
    data = np.asarray(clip.data, dtype=np.float32)
    if data.ndim != 5 or data.shape[0] != 1:
        raise ParameterError(
            f"write_clip stores exactly one clip, got shape {tuple(data.shape)}"
        )
    _, t, c, h, w = data.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, t, c, h, w, _DTYPE_F32)
    payload = np.ascontiguousarray(data[0], dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_clip(path, modality: str = "RGB", clip_id: str | None = None) -> VideoClip:
    """Load an FSVC file; errors name the byte offset of the problem."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ClipFormatError(
            f"{path}: truncated header, expected {_HEADER.size} bytes at offset 0, "
            f"got {len(raw)}"
        )
    magic, version, t, c, h, w, dtype_tag = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ClipFormatError(
            f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}"
        )
    if version != FORMAT_VERSION:
        raise ClipFormatError(
            f"{path}: unsupported version {version} at offset 4"
        )
    if dtype_tag != _DTYPE_F32:
        raise ClipFormatError(
            f"{path}: unknown dtype tag {dtype_tag} at offset 22"
        )
    dims = (t, c, h, w)
    if any(d == 0 for d in dims):
        raise ClipFormatError(f"{path}: zero dimension in {dims} at offset 6")
    n_values = int(t) * int(c) * int(h) * int(w)
    if n_values * 4 > _MAX_PAYLOAD_BYTES:
        raise ClipFormatError(
            f"{path}: dimensions {dims} at offset 6 overflow the payload limit"
        )
    expected = _HEADER.size + n_values * 4
    if len(raw) != expected:
        raise ClipFormatError(
            f"{path}: expected {n_values * 4} payload bytes at offset "
            f"{_HEADER.size}, got {len(raw) - _HEADER.size}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(1, t, c, h, w)
    return VideoClip(
        data=data.copy(),
        modality=modality,
        clip_ids=[clip_id or Path(path).stem],
    )


@dataclass
class ClipRecord:
    """One manifest line: where a clip lives and what it is."""

    id: str
    path: str
    label: int
    domain: str
    split: str
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "path": self.path,
                "label": self.label,
                "domain": self.domain,
                "split": self.split,
                "seed": self.seed,
            }
        )


def read_manifest(path) -> list[ClipRecord]:
    """Parse a JSON-lines manifest and check id uniqueness."""
    records = []
    seen = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
        missing = {"id", "path", "label", "domain", "split"} - set(obj)
        if missing:
            raise ManifestError(f"{path}:{lineno}: missing fields {sorted(missing)}")
        if obj["label"] not in (0, 1):
            raise ManifestError(f"{path}:{lineno}: label must be 0 or 1")
        if obj["id"] in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate clip id {obj['id']!r}")
        seen.add(obj["id"])
        records.append(
            ClipRecord(
                id=obj["id"],
                path=obj["path"],
                label=int(obj["label"]),
                domain=obj["domain"],
                split=obj["split"],
                seed=int(obj.get("seed", -1)),
            )
        )
    if not records:
        raise ManifestError(f"{path}: manifest is empty")
    return records


def _write_manifest(records: list[ClipRecord], path: Path) -> None:
    path.write_text("".join(r.to_json() + "\n" for r in records))


def build_dataset(
    out_dir,
    domains: list[DomainParams] | None = None,
    counts: dict[str, int] | None = None,
    seed: int = 0,
    frames: int = 8,
    height: int = 32,
    width: int = 32,
) -> dict[str, Path]:
    """Generate a balanced multi-domain dataset on disk.

    counts maps split name to the number of clips *per domain* (must be
    even so labels stay 50/50).  Returns a dict of manifest paths: one
    combined "manifest", one per split, and one per (split, domain).
    """
    domains = domains if domains is not None else [DOMAINS["alpha"], DOMAINS["beta"]]
    counts = counts if counts is not None else {"train": 100, "test": 50}
    for split, n in counts.items():
        if n <= 0 or n % 2:
            raise ManifestError(
                f"split {split!r} needs a positive even clip count, got {n}"
            )
    out_dir = Path(out_dir)
    clip_dir = out_dir / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)

    records: list[ClipRecord] = []
    record_index = 0
    for domain in domains:
        for split, n in counts.items():
            for j in range(n):
                label = j % 2
                record_seed = seed * 1_000_003 + record_index
                clip_id = f"{domain.name}-{split}-{j:04d}"
                clip = generate_clip(
                    domain, label, record_seed, frames=frames,
                    height=height, width=width,
                )
                rel_path = f"clips/{clip_id}.fsvc"
                write_clip(clip, out_dir / rel_path)
                records.append(
                    ClipRecord(
                        id=clip_id,
                        path=rel_path,
                        label=label,
                        domain=domain.name,
                        split=split,
                        seed=record_seed,
                    )
                )
                record_index += 1

    manifests: dict[str, Path] = {}
    combined = out_dir / "manifest.jsonl"
    _write_manifest(records, combined)
    manifests["manifest"] = combined
    for split in counts:
        split_records = [r for r in records if r.split == split]
        split_path = out_dir / f"{split}.jsonl"
        _write_manifest(split_records, split_path)
        manifests[split] = split_path
        for domain in domains:
            sub = [r for r in split_records if r.domain == domain.name]
            sub_path = out_dir / f"{split}_{domain.name}.jsonl"
            _write_manifest(sub, sub_path)
            manifests[f"{split}_{domain.name}"] = sub_path
    return manifests
