"""Skeleton sequences and the three-step standardization.

A sequence is a (frames, joints, 3) float array over a fixed topology
(a bone tree rooted at the pelvis).  Standardization makes sequences
comparable across subjects and capture setups:

1. translate every frame so the root joint sits at the origin,
2. unify bone lengths so every frame reuses the first frame's lengths
   while keeping its own bone directions,
3. scale globally so the first frame's bone-length vector has unit L2 norm.

All operations are pure: they return new sequences and never mutate input
arrays.  2D data is handled by storing z = 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import DegenerateReferenceError, ValidationError

EPS = 1e-12


@dataclass(frozen=True)
class Topology:
    """Joint naming and bone tree shared by every frame of a sequence.

    Attributes:
        name: identifier of the layout.
        joint_names: one name per joint index.
        bones: (parent, child) joint-index pairs forming a tree.
        root_index: joint used as the skeleton origin.
    """

    name: str
    joint_names: tuple[str, ...]
    bones: tuple[tuple[int, int], ...]
    root_index: int

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.bones) != n - 1:
            raise ValidationError(
                f"topology must be a tree: {n} joints need {n - 1} bones, "
                f"got {len(self.bones)}"
            )
        if not 0 <= self.root_index < n:
            raise ValidationError(f"root index {self.root_index} out of range")
        seen = {self.root_index}
        for parent, child in self.traversal_order():
            if child in seen:
                raise ValidationError(f"joint {child} has two parents")
            seen.add(child)
        if len(seen) != n:
            raise ValidationError("bone tree does not reach every joint")

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def traversal_order(self) -> list[tuple[int, int]]:
        """Bones ordered root-outward so parents are placed before children."""
        children: dict[int, list[tuple[int, int]]] = {}
        for parent, child in self.bones:
            children.setdefault(parent, []).append((parent, child))
        order: list[tuple[int, int]] = []
        stack = [self.root_index]
        while stack:
            joint = stack.pop()
            for bone in children.get(joint, []):
                order.append(bone)
                stack.append(bone[1])
        if len(order) != len(self.bones):
            raise ValidationError("bone tree is disconnected")
        return order

    @classmethod
    def from_dict(cls, payload: dict) -> "Topology":
        return cls(
            name=payload["name"],
            joint_names=tuple(payload["joint_names"]),
            bones=tuple((int(a), int(b)) for a, b in payload["bones"]),
            root_index=int(payload["root_index"]),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "root_index": self.root_index,
            "joint_names": list(self.joint_names),
            "bones": [list(b) for b in self.bones],
        }


def load_default_topology() -> Topology:
    """Standard 17-joint body layout shipped with the package."""
    text = resources.files("skelalign.data").joinpath("topology.json").read_text()
    return Topology.from_dict(json.loads(text))


DEFAULT_TOPOLOGY = load_default_topology()


@dataclass(frozen=True)
class SkeletonSequence:
    """A motion clip: (frames, joints, 3) float64 positions over a topology.

    ``view`` records the (theta, phi) camera angles a sequence was rendered
    from when it is a synthetic augmentation; ``aligned`` marks sequences
    living in the shared globally-aligned space.
    """

    frames: np.ndarray
    topology: Topology = field(default=DEFAULT_TOPOLOGY)
    label: str | None = None
    video_id: str | None = None
    aligned: bool = False
    view: tuple[float, float] | None = None

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(
                f"frames must have shape (T, J, 3), got {arr.shape}"
            )
        if arr.shape[0] == 0:
            raise ValidationError("sequence must contain at least one frame")
        if arr.shape[1] != self.topology.joint_count:
            raise ValidationError(
                f"expected {self.topology.joint_count} joints per frame, "
                f"got {arr.shape[1]}"
            )
        if not np.isfinite(arr).all():
            raise ValidationError("sequence contains non-finite coordinates")
        object.__setattr__(self, "frames", arr)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    def with_frames(self, frames: np.ndarray, **changes) -> "SkeletonSequence":
        return replace(self, frames=frames, **changes)


def bone_vectors(frame: np.ndarray, topology: Topology) -> np.ndarray:
    """Child-minus-parent vectors, one row per bone in topology order."""
    bones = np.asarray(topology.bones)
    return frame[bones[:, 1]] - frame[bones[:, 0]]


def bone_lengths(frame: np.ndarray, topology: Topology) -> np.ndarray:
    return np.linalg.norm(bone_vectors(frame, topology), axis=1)


def center_at_root(seq: SkeletonSequence) -> SkeletonSequence:
    """Translate each frame so the root joint sits at the origin."""
    root = seq.frames[:, seq.topology.root_index : seq.topology.root_index + 1, :]
    return seq.with_frames(seq.frames - root)


def unify_bone_lengths(seq: SkeletonSequence) -> SkeletonSequence:
    """Give every frame the first frame's bone lengths, keeping directions.

    Joints are rebuilt by walking the bone tree from the root: each child is
    placed along its frame-local bone direction at the frame-1 length.  A
    zero-length bone in a later frame inherits the direction from the
    previous frame (motion continuity); a zero-length bone in frame 1 has no
    usable reference length and raises DegenerateReferenceError.
    """
    topo = seq.topology
    ref_lengths = bone_lengths(seq.frames[0], topo)
    for i, length in enumerate(ref_lengths):
        if length < EPS:
            parent, child = topo.bones[i]
            raise DegenerateReferenceError(
                f"bone {topo.joint_names[parent]}->{topo.joint_names[child]} "
                "has zero length in the reference frame"
            )
    ref_by_bone = {bone: ref_lengths[i] for i, bone in enumerate(topo.bones)}

    out = np.empty_like(seq.frames)
    prev_dirs: dict[tuple[int, int], np.ndarray] = {}
    order = topo.traversal_order()
    for f in range(seq.frame_count):
        frame = seq.frames[f]
        new_frame = np.empty_like(frame)
        new_frame[topo.root_index] = frame[topo.root_index]
        for bone in order:
            parent, child = bone
            vec = frame[child] - frame[parent]
            norm = np.linalg.norm(vec)
            if norm < EPS:
                direction = prev_dirs[bone]
            else:
                direction = vec / norm
            prev_dirs[bone] = direction
            new_frame[child] = new_frame[parent] + direction * ref_by_bone[bone]
        out[f] = new_frame
    return seq.with_frames(out)


def normalize_scale(seq: SkeletonSequence) -> SkeletonSequence:
    """Scale all frames so the frame-1 bone-length vector has unit L2 norm.

    Expects bone lengths already unified, so the same factor applies to
    every frame.
    """
    norm = np.linalg.norm(bone_lengths(seq.frames[0], seq.topology))
    if norm < EPS:
        raise DegenerateReferenceError("reference frame has zero total bone length")
    return seq.with_frames(seq.frames / norm)


def standardize(seq: SkeletonSequence) -> SkeletonSequence:
    """Center, unify bone lengths, then normalize scale (in that order)."""
    return normalize_scale(unify_bone_lengths(center_at_root(seq)))
