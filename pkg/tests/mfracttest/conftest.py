"""Shared seeded fixtures for the mfract tests."""

from __future__ import annotations

import os
from collections.abc import Iterator
from pathlib import Path
from unittest import mock

import numpy as np
import pytest

from mfract.image_core import GrayImage
from mfract.synthetic import binomial_cascade, fbm_texture, sierpinski_carpet, step_edge

HURSTS = (0.3, 0.5, 0.7, 0.8)


@pytest.fixture(autouse=True)
def _run_outside_repo(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """Keep a contributor's local .env file out of pydantic-settings' reach."""
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def clean_env() -> Iterator[None]:
    """Run with no MFRACT_* variables set."""
    env = {k: v for k, v in os.environ.items() if not k.startswith("MFRACT_")}
    with mock.patch.dict(os.environ, env, clear=True):
        yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def dyadic_noise(rng: np.random.Generator) -> GrayImage:
    """64×64 noise on the k/256 grid, so windowed sums are exact."""
    return GrayImage(rng.integers(0, 257, (64, 64)) / 256.0)


@pytest.fixture(scope="session")
def carpet() -> GrayImage:
    return sierpinski_carpet(5)


@pytest.fixture(scope="session")
def cascade() -> GrayImage:
    return binomial_cascade(8, p=0.7)


@pytest.fixture(scope="session")
def textures() -> list[GrayImage]:
    return [fbm_texture(256, hurst=HURSTS[s % 4], seed=s) for s in range(20)]


@pytest.fixture
def edge() -> GrayImage:
    return step_edge(64)
