from __future__ import annotations

import numpy as np
import pytest

from skelalign.geometry import CameraAngles
from skelalign.skeleton import DEFAULT_TOPOLOGY, SkeletonSequence, standardize
from skelalign.synthetic import BASE_POSE, family_sequence


def random_sequence(rng: np.random.Generator, frames: int = 6) -> SkeletonSequence:
    """A valid random raw sequence: jittered base pose with a drifting root."""
    jitter = rng.normal(0.0, 0.08, size=(frames, 17, 3))
    drift = rng.normal(0.0, 0.5, size=(frames, 1, 3))
    return SkeletonSequence(
        frames=BASE_POSE[None, :, :] + jitter + drift,
        topology=DEFAULT_TOPOLOGY,
        label="random",
        video_id="random_000",
    )


def random_angles(rng: np.random.Generator) -> CameraAngles:
    theta = float(rng.uniform(-np.pi, np.pi))
    phi = float(rng.uniform(-np.pi / 2, np.pi / 2))
    return CameraAngles(theta, phi)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def standardized(rng) -> SkeletonSequence:
    return standardize(random_sequence(rng, frames=8))


@pytest.fixture
def wave_sequence() -> SkeletonSequence:
    return family_sequence("wave", 12)
