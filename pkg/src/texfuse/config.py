"""Training configuration and its flat key/value file format.

Config files are plain text, one ``key = value`` pair per line, with ``#``
comments and blank lines allowed.  Keys are exactly the TrainConfig field
names; unknown keys and type errors are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, ParameterError
from .video import PatchGeometry

#: Supported input-target modality pairs.  The name before the hyphen is
#: the masked input handed to the auxiliary branch, the name after it is
#: the modality being reconstructed.
MODALITY_PAIRS = ("RGB-LDP", "LDP-RGB", "LDP-LDP", "LBP-RGB", "LBP-LBP")

EVAL_MASK_MODES = ("training-ratio-deterministic", "unmasked")

DTYPES = ("float32", "float64")


def parse_pair(pair: str) -> tuple[str, str]:
    """Split a modality pair into (input modality, target modality)."""
    canonical = str(pair).upper()
    if canonical not in MODALITY_PAIRS:
        raise ParameterError(
            f"modality pair must be one of {MODALITY_PAIRS}, got {pair!r}"
        )
    left, right = canonical.split("-")
    return left, right


@dataclass
class TrainConfig:
    """Everything needed to reproduce one training run.

    Geometry defaults describe the desk-scale setup: 8-frame 32x32 clips,
    8x8 patches in 2-frame tubes (64 tokens of dimension 384).
    """

    # task
    modality_pair: str = "RGB-LDP"
    loss_lambda: float = 0.1
    mask_ratio: float = 0.75
    # clip geometry
    frames: int = 8
    channels: int = 3
    height: int = 32
    width: int = 32
    patch_size: int = 8
    tube_size: int = 2
    # encoder / decoder
    enc_depth: int = 4
    enc_dim: int = 64
    enc_heads: int = 4
    dec_depth: int = 2
    dec_dim: int = 32
    dec_heads: int = 4
    drop_path: float = 0.01
    # optimization
    batch_size: int = 8
    epochs: int = 20
    lr_start: float = 5e-5
    lr_min: float = 1e-6
    momentum: float = 0.9
    weight_decay: float = 0.05
    # bookkeeping
    seed: int = 0
    eval_mask_mode: str = "training-ratio-deterministic"
    rec_norm: str = "element"
    dtype: str = "float32"

    def __post_init__(self):
        validate_config(self)

    def geometry(self) -> PatchGeometry:
        return PatchGeometry(
            frames=self.frames,
            channels=self.channels,
            height=self.height,
            width=self.width,
            patch_size=self.patch_size,
            tube_size=self.tube_size,
        )

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate_config(config: TrainConfig) -> None:
    """Raise ConfigError on any invalid or inconsistent field."""
    try:
        parse_pair(config.modality_pair)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if not 0.0 <= config.loss_lambda <= 1.0:
        raise ConfigError(f"loss_lambda must be in [0, 1], got {config.loss_lambda}")
    if not 0.0 <= config.mask_ratio < 1.0:
        raise ConfigError(f"mask_ratio must be in [0, 1), got {config.mask_ratio}")
    try:
        config.geometry()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if config.channels != 3:
        raise ConfigError(f"channels must be 3 for RGB clips, got {config.channels}")
    for name in ("enc_depth", "enc_dim", "enc_heads", "dec_depth", "dec_dim",
                 "dec_heads", "batch_size", "epochs"):
        if getattr(config, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(config, name)}")
    if config.enc_dim % config.enc_heads:
        raise ConfigError(
            f"enc_dim ({config.enc_dim}) not divisible by enc_heads ({config.enc_heads})"
        )
    if config.dec_dim % config.dec_heads:
        raise ConfigError(
            f"dec_dim ({config.dec_dim}) not divisible by dec_heads ({config.dec_heads})"
        )
    if 2 * config.dec_depth > config.enc_depth:
        raise ConfigError(
            f"decoder must be shallow: need 2 * dec_depth <= enc_depth, got "
            f"dec_depth={config.dec_depth}, enc_depth={config.enc_depth}"
        )
    if not 0.0 <= config.drop_path < 1.0:
        raise ConfigError(f"drop_path must be in [0, 1), got {config.drop_path}")
    if config.lr_start <= 0 or config.lr_min <= 0:
        raise ConfigError("learning rates must be positive")
    if config.lr_min > config.lr_start:
        raise ConfigError(
            f"lr_min ({config.lr_min}) must not exceed lr_start ({config.lr_start})"
        )
    if not 0.0 <= config.momentum < 1.0:
        raise ConfigError(f"momentum must be in [0, 1), got {config.momentum}")
    if config.weight_decay < 0:
        raise ConfigError(f"weight_decay must be >= 0, got {config.weight_decay}")
    if config.eval_mask_mode not in EVAL_MASK_MODES:
        raise ConfigError(
            f"eval_mask_mode must be one of {EVAL_MASK_MODES}, got {config.eval_mask_mode!r}"
        )
    if config.rec_norm not in ("element", "patch"):
        raise ConfigError(f"rec_norm must be 'element' or 'patch', got {config.rec_norm!r}")
    if config.dtype not in DTYPES:
        raise ConfigError(f"dtype must be one of {DTYPES}, got {config.dtype!r}")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, text: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc


def config_from_dict(values: dict) -> TrainConfig:
    """Build a TrainConfig from a plain dict, rejecting unknown keys."""
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def read_config(path) -> TrainConfig:
    """Parse a flat key/value config file into a TrainConfig."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, text)
    return config_from_dict(values)


def write_config(config: TrainConfig, path) -> None:
    """Write a TrainConfig as a flat key/value file readable by read_config."""
    lines = [f"{name} = {getattr(config, name)}" for name in _FIELD_TYPES]
    Path(path).write_text("\n".join(lines) + "\n")
