"""Shared fixtures: synthetic frames and a small fitted flame model."""

from __future__ import annotations

import numpy as np
import pytest

from flamesense.flame_model import fit_ideal_model
from flamesense.imaging import RgbImage
from flamesense.synth import RigConfig, ideal_reference_frames, reference_lambdas

# (criterion number, label, passed, detail) tuples recorded by the
# acceptance tests; echoed in the terminal summary so every run shows
# one line per criterion.
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.write_sep("-", "acceptance criteria")
    for num, label, ok, detail in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        tr.write_line(f"criterion {num:2d} {label}: {verdict}{suffix}")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def random_image(rng) -> RgbImage:
    return RgbImage(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))


def make_image(seed: int, shape=(32, 32)) -> RgbImage:
    g = np.random.default_rng(seed)
    return RgbImage(g.integers(0, 256, size=(*shape, 3), dtype=np.uint8))


@pytest.fixture(scope="session")
def small_rig() -> RigConfig:
    return RigConfig(size=64, duration_s=30.0, noise_sigma=1.0, seed=5)


@pytest.fixture(scope="session")
def small_model(small_rig):
    frames = ideal_reference_frames(small_rig, 22)
    return fit_ideal_model(frames, list(reference_lambdas(22)))
