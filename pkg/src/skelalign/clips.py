"""Clip records, the canonical on-disk JSON format, and prediction import.

A dataset directory holds one folder per action with clips named
``<action>/<action>_<index>.json``, a ``topology.json`` at the root, and an
optional ``views.json`` manifest mapping video ids to the camera angles
synthetic samples were rendered from.

The canonical clip serialization is deterministic: fixed key order, floats
with 17 significant digits, one frame per line.  Loading a canonical file
and saving it again reproduces the bytes exactly.

Missing annotations (joints a detector could not place) are stored as JSON
``null`` and carried as NaN in memory; they are legal in records but must be
resolved before converting to a compute-side SkeletonSequence.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    FormatVersionError,
    JointCountError,
    MalformedClipError,
    NonFiniteCoordinateError,
    SplitError,
    ValidationError,
)
from .geometry import CameraAngles
from .skeleton import DEFAULT_TOPOLOGY, SkeletonSequence, Topology

CLIP_FORMAT_VERSION = 1

# External 17-keypoint layout (nose, eyes, ears, shoulders, elbows, wrists,
# hips, knees, ankles) mapped onto our joint order; None = no counterpart.
COCO17_MAPPING: tuple[int | None, ...] = (
    None,  # pelvis
    12,    # right_hip
    14,    # right_knee
    16,    # right_ankle
    11,    # left_hip
    13,    # left_knee
    15,    # left_ankle
    None,  # spine
    None,  # neck
    0,     # head (nose)
    None,  # head_top
    5,     # left_shoulder
    7,     # left_elbow
    9,     # left_wrist
    6,     # right_shoulder
    8,     # right_elbow
    10,    # right_wrist
)

NAMED_MAPPINGS = {"coco17": COCO17_MAPPING}


@dataclass(frozen=True)
class ClipRecord:
    """One clip as stored on disk; either 2D or 3D joints may be absent."""

    action: str
    video_id: str
    globally_aligned: bool
    joints2d: np.ndarray | None = None
    joints3d: np.ndarray | None = None
    provenance: str = ""

    def __post_init__(self):
        for name, dims in (("joints2d", 2), ("joints3d", 3)):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.float64)
            if arr.ndim != 3 or arr.shape[2] != dims:
                raise ValidationError(
                    f"{name} must have shape (T, J, {dims}), got {arr.shape}"
                )
            object.__setattr__(self, name, arr)
        if self.joints2d is None and self.joints3d is None:
            raise ValidationError("clip needs joints2d or joints3d")
        if (
            self.joints2d is not None
            and self.joints3d is not None
            and self.joints2d.shape[0] != self.joints3d.shape[0]
        ):
            raise ValidationError("joints2d and joints3d frame counts differ")

    @property
    def frame_count(self) -> int:
        arr = self.joints3d if self.joints3d is not None else self.joints2d
        return arr.shape[0]


def _format_float(value: float) -> str:
    text = format(value, ".17g")
    # json numbers must not be bare "inf"/"nan"; records never contain them
    return text


def _frames_block(arr: np.ndarray | None) -> str:
    if arr is None:
        return "null"
    lines = []
    for frame in arr:
        joints = []
        for joint in frame:
            if np.isnan(joint).any():
                joints.append("null")
            else:
                joints.append(
                    "[" + ", ".join(_format_float(c) for c in joint) + "]"
                )
        lines.append("    [" + ", ".join(joints) + "]")
    return "[\n" + ",\n".join(lines) + "\n  ]"


def clip_to_json(record: ClipRecord) -> str:
    """Canonical serialization; key order and float formatting are fixed."""
    aligned = "true" if record.globally_aligned else "false"
    return (
        "{\n"
        f'  "format_version": {CLIP_FORMAT_VERSION},\n'
        f'  "action": {json.dumps(record.action)},\n'
        f'  "video_id": {json.dumps(record.video_id)},\n'
        f'  "globally_aligned": {aligned},\n'
        f'  "joints2d": {_frames_block(record.joints2d)},\n'
        f'  "joints3d": {_frames_block(record.joints3d)},\n'
        f'  "provenance": {json.dumps(record.provenance)}\n'
        "}\n"
    )


def _parse_frames(
    raw, name: str, dims: int, expected_joints: int
) -> np.ndarray | None:
    if raw is None:
        return None
    if not isinstance(raw, list) or not raw:
        raise MalformedClipError(f"{name} must be a non-empty list of frames")
    frames = np.full((len(raw), expected_joints, dims), np.nan)
    for f, frame in enumerate(raw):
        if not isinstance(frame, list) or len(frame) != expected_joints:
            raise JointCountError(
                f"{name} frame {f} has {len(frame) if isinstance(frame, list) else 'no'} "
                f"joints, expected {expected_joints}"
            )
        for j, joint in enumerate(frame):
            if joint is None:
                continue
            if not isinstance(joint, list) or len(joint) != dims:
                raise MalformedClipError(
                    f"{name} frame {f} joint {j} must be a {dims}-vector or null"
                )
            for c, value in enumerate(joint):
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise MalformedClipError(
                        f"{name} frame {f} joint {j} has a non-numeric coordinate"
                    )
                if not math.isfinite(value):
                    raise NonFiniteCoordinateError(
                        f"{name} frame {f} joint {j} has a non-finite coordinate"
                    )
                frames[f, j, c] = float(value)
    return frames


def clip_from_json(text: str, expected_joints: int = 17) -> ClipRecord:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedClipError(f"clip is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise MalformedClipError("clip JSON must be an object")
    version = payload.get("format_version")
    if version != CLIP_FORMAT_VERSION:
        raise FormatVersionError(f"unsupported clip format version: {version}")
    for field_name in ("action", "video_id", "provenance"):
        if not isinstance(payload.get(field_name), str):
            raise MalformedClipError(f"missing or non-string field: {field_name}")
    if not isinstance(payload.get("globally_aligned"), bool):
        raise MalformedClipError("globally_aligned must be a boolean")
    joints2d = _parse_frames(payload.get("joints2d"), "joints2d", 2, expected_joints)
    joints3d = _parse_frames(payload.get("joints3d"), "joints3d", 3, expected_joints)
    if joints2d is None and joints3d is None:
        raise MalformedClipError("clip needs joints2d or joints3d")
    return ClipRecord(
        action=payload["action"],
        video_id=payload["video_id"],
        globally_aligned=payload["globally_aligned"],
        joints2d=joints2d,
        joints3d=joints3d,
        provenance=payload["provenance"],
    )


def save_clip(record: ClipRecord, path: str | Path) -> None:
    Path(path).write_text(clip_to_json(record))


def load_clip(path: str | Path, expected_joints: int = 17) -> ClipRecord:
    return clip_from_json(Path(path).read_text(), expected_joints)


# --- dataset directory layout -------------------------------------------------


def clip_filename(video_id: str) -> str:
    return f"{video_id}.json"


def clip_path(root: str | Path, record: ClipRecord) -> Path:
    return Path(root) / record.action / clip_filename(record.video_id)


def save_dataset(
    records: list[ClipRecord],
    root: str | Path,
    topology: Topology = DEFAULT_TOPOLOGY,
    views: dict[str, CameraAngles] | None = None,
) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for record in records:
        path = clip_path(root, record)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_clip(record, path)
    (root / "topology.json").write_text(
        json.dumps(topology.to_dict(), indent=2) + "\n"
    )
    if views is not None:
        save_views_manifest(views, root / "views.json")


def load_dataset(
    root: str | Path, expected_joints: int = 17
) -> list[ClipRecord]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    records = []
    for path in sorted(root.glob("*/*.json")):
        records.append(load_clip(path, expected_joints))
    return records


def load_dataset_topology(root: str | Path) -> Topology:
    path = Path(root) / "topology.json"
    if not path.exists():
        return DEFAULT_TOPOLOGY
    return Topology.from_dict(json.loads(path.read_text()))


def save_views_manifest(
    views: dict[str, CameraAngles], path: str | Path
) -> None:
    lines = [
        f'  {json.dumps(vid)}: [{views[vid].theta:.17g}, {views[vid].phi:.17g}]'
        for vid in sorted(views)
    ]
    Path(path).write_text("{\n" + ",\n".join(lines) + "\n}\n")


def load_views_manifest(path: str | Path) -> dict[str, CameraAngles]:
    payload = json.loads(Path(path).read_text())
    return {
        vid: CameraAngles(float(pair[0]), float(pair[1]))
        for vid, pair in payload.items()
    }


# --- record <-> sequence ------------------------------------------------------


def record_to_sequence(
    record: ClipRecord,
    topology: Topology = DEFAULT_TOPOLOGY,
    prefer: str = "3d",
) -> SkeletonSequence:
    """Compute-side view of a record; missing joints are not allowed here."""
    if prefer not in ("2d", "3d"):
        raise ValidationError(f"prefer must be '2d' or '3d', got {prefer}")
    arr = record.joints3d if prefer == "3d" else record.joints2d
    if arr is None:
        arr = record.joints2d if prefer == "3d" else record.joints3d
    if arr is None:
        raise ValidationError("record has no joints")
    if np.isnan(arr).any():
        raise NonFiniteCoordinateError(
            f"clip {record.video_id} has missing joints; annotate before use"
        )
    if arr.shape[2] == 2:
        arr = np.concatenate([arr, np.zeros_like(arr[:, :, :1])], axis=2)
    view = None
    return SkeletonSequence(
        frames=arr,
        topology=topology,
        label=record.action,
        video_id=record.video_id,
        aligned=record.globally_aligned,
        view=view,
    )


def record_from_sequence(
    seq: SkeletonSequence, provenance: str = ""
) -> ClipRecord:
    return ClipRecord(
        action=seq.label or "unknown",
        video_id=seq.video_id or "unknown_000",
        globally_aligned=seq.aligned,
        joints3d=seq.frames.copy(),
        provenance=provenance,
    )


# --- benchmark split ----------------------------------------------------------

PRIMARY_SAMPLES = 20
ADDITIONAL_SAMPLES = 2
TRAIN_IDS = tuple(range(10))
VALIDATION_IDS = (8, 9)
EVAL_IDS = tuple(range(10, 20))


@dataclass(frozen=True)
class BenchmarkSplit:
    """Benchmark protocol: fixed index ranges for primary classes, fixed
    query/support roles for two-sample additional classes."""

    primary_train: dict[str, list[str]]
    primary_val: dict[str, list[str]]
    primary_eval: dict[str, list[str]]
    additional_query: dict[str, str]
    additional_support: dict[str, str]


def _video_index(video_id: str) -> int:
    match = re.search(r"_(\d+)$", video_id)
    if match is None:
        raise SplitError(f"cannot parse sample index from video id: {video_id}")
    return int(match.group(1))


def make_split(records: list[ClipRecord]) -> BenchmarkSplit:
    """Deterministic split from per-class sample counts.

    Classes with 20 samples: indices 0-9 train (8, 9 flagged validation),
    10-19 evaluation.  Classes with 2 samples: the smaller index is the
    query, the other the support.  Any other count is an error naming the
    class.
    """
    by_class: dict[str, list[ClipRecord]] = {}
    for record in records:
        by_class.setdefault(record.action, []).append(record)

    primary_train: dict[str, list[str]] = {}
    primary_val: dict[str, list[str]] = {}
    primary_eval: dict[str, list[str]] = {}
    additional_query: dict[str, str] = {}
    additional_support: dict[str, str] = {}

    for action in sorted(by_class):
        clips = sorted(by_class[action], key=lambda r: _video_index(r.video_id))
        if len(clips) == PRIMARY_SAMPLES:
            ids = [c.video_id for c in clips]
            primary_train[action] = [ids[i] for i in TRAIN_IDS]
            primary_val[action] = [ids[i] for i in VALIDATION_IDS]
            primary_eval[action] = [ids[i] for i in EVAL_IDS]
        elif len(clips) == ADDITIONAL_SAMPLES:
            additional_query[action] = clips[0].video_id
            additional_support[action] = clips[1].video_id
        else:
            raise SplitError(
                f"class {action} has {len(clips)} samples; expected "
                f"{PRIMARY_SAMPLES} (primary) or {ADDITIONAL_SAMPLES} (additional)"
            )
    return BenchmarkSplit(
        primary_train=primary_train,
        primary_val=primary_val,
        primary_eval=primary_eval,
        additional_query=additional_query,
        additional_support=additional_support,
    )


# --- prediction import --------------------------------------------------------


def _resolve_mapping(mapping, joint_count: int) -> tuple[int | None, ...]:
    if isinstance(mapping, str):
        if mapping not in NAMED_MAPPINGS:
            raise ValidationError(f"unknown mapping name: {mapping}")
        resolved = NAMED_MAPPINGS[mapping]
    else:
        resolved = tuple(mapping)
    if len(resolved) != joint_count:
        raise ValidationError(
            f"mapping must have {joint_count} entries, got {len(resolved)}"
        )
    return tuple(None if m is None else int(m) for m in resolved)


def _frame_number(image_id) -> int:
    if isinstance(image_id, (int, float)) and not isinstance(image_id, bool):
        return int(image_id)
    match = re.search(r"(\d+)", str(image_id))
    if match is None:
        raise MalformedClipError(f"cannot parse frame number from {image_id!r}")
    return int(match.group(1))


def import_pose_predictions(
    payload: list,
    mapping,
    joint_count: int = 17,
    frame_count: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Convert detector output into (joints2d, frame_confidences).

    ``payload`` is a list of per-person detections: {"image_id", "keypoints"
    [x, y, score, ...], "score"}.  The best-scoring person per frame wins.
    Unmapped joints and undetected frames come back as NaN, to be completed
    by hand in the annotation workflow.
    """
    resolved = _resolve_mapping(mapping, joint_count)
    if not isinstance(payload, list):
        raise MalformedClipError("predictions payload must be a list")

    best: dict[int, tuple[float, list[float]]] = {}
    for entry in payload:
        if not isinstance(entry, dict) or "keypoints" not in entry:
            raise MalformedClipError("each prediction needs a keypoints field")
        frame = _frame_number(entry.get("image_id", len(best)))
        score = float(entry.get("score", 0.0))
        kp = entry["keypoints"]
        if len(kp) % 3 != 0:
            raise MalformedClipError("keypoints must be flat [x, y, score] triples")
        if frame not in best or score > best[frame][0]:
            best[frame] = (score, [float(v) for v in kp])

    if frame_count is None:
        frame_count = (max(best) + 1) if best else 0
    if frame_count == 0:
        raise MalformedClipError("predictions contain no frames")

    joints2d = np.full((frame_count, joint_count, 2), np.nan)
    confidences = np.full(frame_count, np.nan)
    for frame, (score, kp) in best.items():
        if frame >= frame_count:
            continue
        confidences[frame] = score
        points = len(kp) // 3
        for joint, ext in enumerate(resolved):
            if ext is None or ext >= points:
                continue
            joints2d[frame, joint, 0] = kp[ext * 3]
            joints2d[frame, joint, 1] = kp[ext * 3 + 1]
    return joints2d, confidences
