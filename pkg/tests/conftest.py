"""Shared fixtures: tiny geometries, configs and clip batches."""

from __future__ import annotations

import numpy as np
import pytest

from texfuse import PatchGeometry, TrainConfig


@pytest.fixture(scope="session")
def desk_geometry() -> PatchGeometry:
    """The desk-scale geometry: 64 tokens of dimension 384."""
    return PatchGeometry(frames=8, channels=3, height=32, width=32,
                         patch_size=8, tube_size=2)


@pytest.fixture(scope="session")
def tiny_geometry() -> PatchGeometry:
    """8 tokens of dimension 96; small enough for brute-force checks."""
    return PatchGeometry(frames=4, channels=3, height=8, width=8,
                         patch_size=4, tube_size=2)


@pytest.fixture(scope="session")
def tiny_config() -> TrainConfig:
    """A config matching tiny_geometry with a very small model."""
    return TrainConfig(
        frames=4, height=8, width=8, patch_size=4, tube_size=2,
        enc_depth=2, enc_dim=8, enc_heads=2,
        dec_depth=1, dec_dim=8, dec_heads=2,
        drop_path=0.0, batch_size=2, epochs=1, seed=0,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)


def random_clip(rng: np.random.Generator, batch: int, geometry: PatchGeometry,
                dtype=np.float32) -> np.ndarray:
    return rng.random(
        (batch, geometry.frames, geometry.channels, geometry.height, geometry.width)
    ).astype(dtype)
