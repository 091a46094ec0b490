"""Seeded synthetic motion generator for end-to-end validation.

Each family is a deterministic parametric motion of the standard 17-joint
body; samples of a class differ only through optional joint noise and the
viewpoint they are rendered from.  Generated datasets mirror the benchmark
directory layout, so the evaluation harness and CLI run on them unchanged.
"""

from __future__ import annotations

import numpy as np

from .clips import ClipRecord
from .errors import ValidationError
from .geometry import (
    CameraAngles,
    ViewSphere,
    angles_from_camera,
    augment_view,
    build_view_sphere,
)
from .skeleton import DEFAULT_TOPOLOGY, SkeletonSequence, standardize

# Canonical rest pose, facing the default camera; deliberately asymmetric so
# a viewpoint is never confusable with its mirror.
BASE_POSE = np.array(
    [
        [0.00, 0.00, 0.00],    # pelvis
        [-0.10, -0.02, 0.01],  # right_hip
        [-0.11, -0.45, 0.03],  # right_knee
        [-0.12, -0.90, 0.00],  # right_ankle
        [0.10, -0.02, -0.01],  # left_hip
        [0.11, -0.45, 0.02],   # left_knee
        [0.12, -0.90, -0.01],  # left_ankle
        [0.00, 0.25, 0.01],    # spine
        [0.01, 0.50, 0.00],    # neck
        [0.01, 0.60, -0.05],   # head
        [0.02, 0.72, -0.03],   # head_top
        [0.18, 0.45, 0.00],    # left_shoulder
        [0.26, 0.20, -0.03],   # left_elbow
        [0.30, -0.02, -0.08],  # left_wrist
        [-0.16, 0.45, 0.02],   # right_shoulder
        [-0.24, 0.21, -0.05],  # right_elbow
        [-0.27, -0.01, -0.10], # right_wrist
    ]
)

UPPER_BODY = (0, 1, 4, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16)
ARMS = (12, 13, 15, 16)
LEFT_LEG = (4, 5, 6)


def _bell(frames: int) -> np.ndarray:
    """Smooth 0 -> 1 -> 0 profile over the clip."""
    t = np.linspace(0.0, 1.0, frames)
    return np.sin(np.pi * t) ** 2


def _family_squat(frames: int) -> np.ndarray:
    out = np.repeat(BASE_POSE[None], frames, axis=0)
    drop = 0.24 * _bell(frames)
    for f in range(frames):
        out[f, UPPER_BODY, 1] -= drop[f]
        out[f, (2, 5), 2] += 0.5 * drop[f]  # knees travel forward
    return out


def _family_wave(frames: int) -> np.ndarray:
    out = np.repeat(BASE_POSE[None], frames, axis=0)
    lift = _bell(frames)
    t = np.linspace(0.0, 1.0, frames)
    for f in range(frames):
        out[f, 15, 1] += 0.30 * lift[f]
        out[f, 16, 1] += 0.62 * lift[f]
        out[f, 16, 0] += 0.18 * np.sin(4.0 * np.pi * t[f]) * lift[f]
    return out


def _family_jump(frames: int) -> np.ndarray:
    out = np.repeat(BASE_POSE[None], frames, axis=0)
    t = np.linspace(0.0, 1.0, frames)
    height = 0.35 * 4.0 * t * (1.0 - t)
    for f in range(frames):
        out[f, :, 1] += height[f]
        out[f, ARMS, 1] += 0.25 * height[f]
    return out


def _family_lunge(frames: int) -> np.ndarray:
    out = np.repeat(BASE_POSE[None], frames, axis=0)
    reach = _bell(frames)
    for f in range(frames):
        out[f, LEFT_LEG, 2] -= 0.32 * reach[f]
        out[f, (0, 7, 8), 2] -= 0.15 * reach[f]
        out[f, UPPER_BODY, 1] -= 0.10 * reach[f]
    return out


def _family_turn(frames: int) -> np.ndarray:
    out = np.empty((frames, BASE_POSE.shape[0], 3))
    angles = np.linspace(0.0, np.pi, frames)
    for f, a in enumerate(angles):
        rot = np.array(
            [
                [np.cos(a), 0.0, np.sin(a)],
                [0.0, 1.0, 0.0],
                [-np.sin(a), 0.0, np.cos(a)],
            ]
        )
        out[f] = BASE_POSE @ rot.T
    return out


def _family_sway(frames: int) -> np.ndarray:
    out = np.repeat(BASE_POSE[None], frames, axis=0)
    t = np.linspace(0.0, 1.0, frames)
    for f in range(frames):
        shift = 0.16 * np.sin(2.0 * np.pi * t[f])
        out[f, UPPER_BODY, 0] += shift
        out[f, (9, 10), 1] += 0.05 * np.sin(4.0 * np.pi * t[f])
    return out


FAMILIES = {
    "squat": _family_squat,
    "wave": _family_wave,
    "jump": _family_jump,
    "lunge": _family_lunge,
    "turn": _family_turn,
    "sway": _family_sway,
}


def family_sequence(name: str, frames: int = 24) -> SkeletonSequence:
    """Standardized canonical-space motion of one family."""
    if name not in FAMILIES:
        raise ValidationError(
            f"unknown motion family {name!r}; choose from {sorted(FAMILIES)}"
        )
    if frames < 2:
        raise ValidationError("a motion needs at least 2 frames")
    seq = SkeletonSequence(
        frames=FAMILIES[name](frames),
        topology=DEFAULT_TOPOLOGY,
        label=name,
        aligned=True,
    )
    return standardize(seq)


def generate_synthetic(
    classes: list[str] | int,
    samples_per_class: int,
    noise: float,
    seed: int,
    frames: int = 24,
    randomize_views: bool = True,
    sphere: ViewSphere | None = None,
) -> tuple[list[ClipRecord], dict[str, CameraAngles]]:
    """Build a benchmark-shaped synthetic dataset.

    Returns the records plus a views manifest with each sample's rendering
    angles ((0, 0) when views are not randomized).  Noise is applied in the
    canonical space before the view rotation, so rotating a sample back by
    its manifest angles reproduces its source exactly.
    """
    if isinstance(classes, int):
        names = sorted(FAMILIES)[:classes]
        if classes > len(FAMILIES):
            raise ValidationError(
                f"only {len(FAMILIES)} families available, requested {classes}"
            )
    else:
        names = list(classes)
    if samples_per_class < 1:
        raise ValidationError("samples_per_class must be >= 1")
    if noise < 0:
        raise ValidationError("noise must be >= 0")
    if randomize_views and sphere is None:
        sphere = build_view_sphere(3)

    rng = np.random.default_rng(seed)
    records: list[ClipRecord] = []
    views: dict[str, CameraAngles] = {}
    for name in names:
        canonical = family_sequence(name, frames)
        for index in range(samples_per_class):
            video_id = f"{name}_{index:03d}"
            noisy = canonical.frames
            if noise > 0:
                noisy = noisy + rng.normal(0.0, noise, size=noisy.shape)
            seq = canonical.with_frames(noisy, video_id=video_id)
            if randomize_views:
                vertex = int(rng.integers(0, sphere.vertex_count))
                view = angles_from_camera(sphere.vertices[vertex])
                seq = augment_view(seq, view)
            else:
                view = CameraAngles(0.0, 0.0)
            views[video_id] = view
            records.append(
                ClipRecord(
                    action=name,
                    video_id=video_id,
                    globally_aligned=not randomize_views,
                    joints3d=seq.frames,
                    provenance="synthetic",
                )
            )
    return records, views
