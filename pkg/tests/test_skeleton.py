from __future__ import annotations

import numpy as np
import pytest

from skelalign.errors import DegenerateReferenceError, ValidationError
from skelalign.skeleton import (
    DEFAULT_TOPOLOGY,
    SkeletonSequence,
    Topology,
    bone_lengths,
    bone_vectors,
    center_at_root,
    normalize_scale,
    standardize,
    unify_bone_lengths,
)

from conftest import random_sequence


def test_default_topology_shape():
    assert DEFAULT_TOPOLOGY.joint_count == 17
    assert len(DEFAULT_TOPOLOGY.bones) == 16
    assert DEFAULT_TOPOLOGY.root_index == 0


def test_traversal_order_parents_first():
    order = DEFAULT_TOPOLOGY.traversal_order()
    seen = {DEFAULT_TOPOLOGY.root_index}
    for parent, child in order:
        assert parent in seen
        seen.add(child)
    assert seen == set(range(17))


def test_topology_rejects_wrong_bone_count():
    with pytest.raises(ValidationError):
        Topology(
            name="bad",
            root_index=0,
            joint_names=("a", "b", "c"),
            bones=((0, 1),),
        )


def test_topology_rejects_two_parents():
    with pytest.raises(ValidationError):
        Topology(
            name="bad",
            root_index=0,
            joint_names=("a", "b", "c"),
            bones=((0, 2), (1, 2)),
        )


def test_topology_rejects_disconnected():
    with pytest.raises(ValidationError):
        Topology(
            name="bad",
            root_index=0,
            joint_names=("a", "b", "c", "d"),
            bones=((0, 1), (2, 3), (3, 2)),
        )


def test_sequence_validation():
    with pytest.raises(ValidationError):
        SkeletonSequence(frames=np.zeros((0, 17, 3)), topology=DEFAULT_TOPOLOGY)
    with pytest.raises(ValidationError):
        SkeletonSequence(frames=np.zeros((2, 5, 3)), topology=DEFAULT_TOPOLOGY)
    bad = np.zeros((2, 17, 3))
    bad[1, 3, 0] = np.nan
    with pytest.raises(ValidationError):
        SkeletonSequence(frames=bad, topology=DEFAULT_TOPOLOGY)


def test_center_at_root_places_root_at_origin(rng):
    seq = center_at_root(random_sequence(rng))
    assert np.abs(seq.frames[:, 0, :]).max() == 0.0


def test_center_preserves_pairwise_distances(rng):
    raw = random_sequence(rng)
    centered = center_at_root(raw)
    for f in range(raw.frames.shape[0]):
        before = np.linalg.norm(
            raw.frames[f][:, None, :] - raw.frames[f][None, :, :], axis=2
        )
        after = np.linalg.norm(
            centered.frames[f][:, None, :] - centered.frames[f][None, :, :], axis=2
        )
        assert np.abs(before - after).max() < 1e-12


def test_unify_bone_lengths_matches_frame_one(rng):
    seq = unify_bone_lengths(center_at_root(random_sequence(rng)))
    reference = bone_lengths(seq.frames[0], seq.topology)
    for frame in seq.frames:
        assert np.abs(bone_lengths(frame, seq.topology) - reference).max() < 1e-9


def test_unify_preserves_directions(rng):
    raw = center_at_root(random_sequence(rng))
    unified = unify_bone_lengths(raw)
    for f in range(raw.frames.shape[0]):
        before = bone_vectors(raw.frames[f], raw.topology)
        after = bone_vectors(unified.frames[f], raw.topology)
        before_unit = before / np.linalg.norm(before, axis=1, keepdims=True)
        after_unit = after / np.linalg.norm(after, axis=1, keepdims=True)
        assert np.abs(before_unit - after_unit).max() < 1e-12


def test_unify_single_frame_is_identity(rng):
    raw = center_at_root(random_sequence(rng, frames=1))
    unified = unify_bone_lengths(raw)
    assert np.abs(unified.frames - raw.frames).max() < 1e-12


def test_unify_rejects_degenerate_first_frame():
    frames = np.zeros((2, 17, 3))
    frames[1] = np.arange(51).reshape(17, 3)
    seq = SkeletonSequence(frames=frames, topology=DEFAULT_TOPOLOGY)
    with pytest.raises(DegenerateReferenceError):
        unify_bone_lengths(seq)


def test_zero_length_later_bone_inherits_direction(rng):
    raw = center_at_root(random_sequence(rng, frames=3))
    frames = raw.frames.copy()
    # collapse the right knee onto the right hip in frame 2
    frames[1, 2] = frames[1, 1]
    seq = unify_bone_lengths(raw.with_frames(frames))
    lengths = bone_lengths(seq.frames[1], seq.topology)
    reference = bone_lengths(seq.frames[0], seq.topology)
    assert np.abs(lengths - reference).max() < 1e-9
    # the degenerate bone picks up frame 1's direction
    prev_dir = bone_vectors(seq.frames[0], seq.topology)[1]
    cur_dir = bone_vectors(seq.frames[1], seq.topology)[1]
    prev_unit = prev_dir / np.linalg.norm(prev_dir)
    cur_unit = cur_dir / np.linalg.norm(cur_dir)
    assert np.abs(prev_unit - cur_unit).max() < 1e-12


def test_normalize_scale_three_four_five():
    # frame-1 bone-length vector (3, 4, 0, ..., 0) has norm 5
    target = [0.0] * 16
    target[0] = 3.0
    target[1] = 4.0
    frames = np.zeros((1, 17, 3))
    for bone_index, (parent, child) in enumerate(DEFAULT_TOPOLOGY.bones):
        direction = np.zeros(3)
        direction[bone_index % 3] = 1.0
        frames[0, child] = frames[0, parent] + direction * target[bone_index]
    seq = SkeletonSequence(frames=frames, topology=DEFAULT_TOPOLOGY)
    out = normalize_scale(seq)
    assert np.abs(out.frames - frames / 5.0).max() < 1e-12
    norm = np.linalg.norm(bone_lengths(out.frames[0], seq.topology))
    assert abs(norm - 1.0) < 1e-9


def test_normalize_scale_rejects_zero_skeleton():
    seq = SkeletonSequence(frames=np.zeros((1, 17, 3)), topology=DEFAULT_TOPOLOGY)
    with pytest.raises(DegenerateReferenceError):
        normalize_scale(seq)


def test_standardize_postconditions(rng):
    for trial in range(20):
        seq = standardize(random_sequence(rng))
        assert np.abs(seq.frames[:, 0, :]).max() < 1e-12
        reference = bone_lengths(seq.frames[0], seq.topology)
        assert abs(np.linalg.norm(reference) - 1.0) < 1e-9
        for frame in seq.frames:
            assert (
                np.abs(bone_lengths(frame, seq.topology) - reference).max() < 1e-9
            )


def test_standardize_idempotent(rng):
    for trial in range(20):
        once = standardize(random_sequence(rng))
        twice = standardize(once)
        assert np.abs(twice.frames - once.frames).max() < 1e-9


def test_standardize_similarity_invariance(rng):
    for trial in range(20):
        raw = random_sequence(rng)
        scale = float(rng.uniform(0.2, 7.0))
        shift = rng.normal(0.0, 3.0, size=3)
        transformed = raw.with_frames(raw.frames * scale + shift)
        a = standardize(raw)
        b = standardize(transformed)
        assert np.abs(a.frames - b.frames).max() < 1e-9


def test_standardize_commutes_with_rotation(rng):
    from skelalign.geometry import rodrigues

    for trial in range(10):
        raw = random_sequence(rng)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        r = rodrigues(axis, float(rng.uniform(-np.pi, np.pi)))
        rotated = raw.with_frames(raw.frames @ r.T)
        a = standardize(rotated)
        b = standardize(raw).frames @ r.T
        assert np.abs(a.frames - b).max() < 1e-9
