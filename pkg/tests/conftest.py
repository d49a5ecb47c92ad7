"""Shared fixtures: small synthetic datasets and a fast curriculum config."""
from __future__ import annotations

import pytest
from hypothesis import settings

from micl.curriculum import MiclConfig
from micl.synthdata import GenConfig, generate_dataset

settings.register_profile("micl", deadline=None, max_examples=60)
settings.load_profile("micl")


TINY_GEN = GenConfig(
    n_images=8,
    n_categories=2,
    height=24,
    width=24,
    n_channels=7,
    body_size=(5, 8),
    rng_seed=7,
)


@pytest.fixture(scope="session")
def tiny_scenes():
    return generate_dataset(TINY_GEN)


@pytest.fixture()
def fast_micl():
    # full-size round-zero training, shortened retraining; enough signal
    # for the loop to select examples while keeping each run sub-second
    return MiclConfig(max_rounds=2, retrain_epochs=120, rng_seed=7)
