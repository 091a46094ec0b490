"""Annotation backend: serves clips, frames and 2D keypoint editing ops.

All numerical work the annotation UI needs (interpolation, temporal
smoothing, prediction import, alignment preview) runs here; the UI never
computes joint math locally.  Annotations persist as the clip JSON files
themselves, written atomically (temp file + rename).  Every clip carries a
monotonically increasing revision; writes must quote the revision they were
based on, and a stale revision is rejected so concurrent editors cannot
silently overwrite each other.
"""

from __future__ import annotations

import math
import os
import tempfile
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, Response
from pydantic import BaseModel

from .aligner import AlignmentModel, align_sequence, load_checkpoint
from .clips import (
    ClipRecord,
    clip_to_json,
    import_pose_predictions,
    load_clip,
    load_dataset_topology,
    record_to_sequence,
)
from .errors import MalformedClipError, SkelalignError, UnannotatedFramesError
from .skeleton import Topology, standardize

IMAGE_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".webp": "image/webp",
}


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with truncation radius ceil(3*sigma)."""
    if sigma < 0:
        raise SkelalignError("sigma must be >= 0")
    if sigma == 0:
        return np.array([1.0])
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def smooth_trajectories(joints: np.ndarray, sigma: float) -> np.ndarray:
    """Per-joint temporal Gaussian smoothing of (T, J, D) coordinates.

    Ends are mirror-padded (without repeating the edge sample).  sigma = 0
    returns the input unchanged.  Every frame must be fully annotated.
    """
    joints = np.asarray(joints, dtype=np.float64)
    missing = sorted(
        int(f) for f in np.unique(np.argwhere(np.isnan(joints))[:, 0])
    )
    if missing:
        raise UnannotatedFramesError(missing)
    if sigma == 0:
        return joints.copy()
    kernel = gaussian_kernel(sigma)
    radius = (len(kernel) - 1) // 2
    t = joints.shape[0]
    flat = joints.reshape(t, -1)
    if t == 1:
        padded = np.repeat(flat, 2 * radius + 1, axis=0)
    else:
        padded = np.pad(flat, ((radius, radius), (0, 0)), mode="reflect")
    out = np.empty_like(flat)
    for i in range(t):
        window = padded[i : i + 2 * radius + 1]
        out[i] = kernel @ window
    return out.reshape(joints.shape)


def interpolate_joint(
    joints2d: np.ndarray, joint: int, frame_a: int, frame_b: int
) -> np.ndarray:
    """Linear fill of one joint strictly between two annotated keyframes."""
    out = np.array(joints2d, dtype=np.float64)
    t, j, _ = out.shape
    if not 0 <= joint < j:
        raise SkelalignError(f"joint index {joint} out of range")
    if not (0 <= frame_a < t and 0 <= frame_b < t):
        raise SkelalignError("keyframe index out of range")
    if frame_b <= frame_a:
        raise SkelalignError("frame_b must come after frame_a")
    if np.isnan(out[frame_a, joint]).any() or np.isnan(out[frame_b, joint]).any():
        raise SkelalignError("both keyframes must be annotated before interpolating")
    if frame_b - frame_a < 2:
        raise SkelalignError("no frames strictly between the keyframes")
    a = out[frame_a, joint]
    b = out[frame_b, joint]
    for f in range(frame_a + 1, frame_b):
        w = (f - frame_a) / (frame_b - frame_a)
        out[f, joint] = (1.0 - w) * a + w * b
    return out


def _joints_to_payload(arr: np.ndarray | None):
    if arr is None:
        return None
    payload = []
    for frame in arr:
        row = []
        for joint in frame:
            if np.isnan(joint).any():
                row.append(None)
            else:
                row.append([float(c) for c in joint])
        payload.append(row)
    return payload


def _payload_to_joints(payload, frame_count: int, joint_count: int) -> np.ndarray:
    if not isinstance(payload, list) or len(payload) != frame_count:
        raise MalformedClipError(
            f"annotations must cover all {frame_count} frames"
        )
    out = np.full((frame_count, joint_count, 2), np.nan)
    for f, frame in enumerate(payload):
        if not isinstance(frame, list) or len(frame) != joint_count:
            raise MalformedClipError(
                f"frame {f} must list {joint_count} joints (null allowed)"
            )
        for j, joint in enumerate(frame):
            if joint is None:
                continue
            if not isinstance(joint, list) or len(joint) != 2:
                raise MalformedClipError(f"frame {f} joint {j} must be [x, y]")
            if not all(
                isinstance(v, (int, float)) and math.isfinite(v) for v in joint
            ):
                raise MalformedClipError(
                    f"frame {f} joint {j} has non-finite coordinates"
                )
            out[f, j] = [float(joint[0]), float(joint[1])]
    return out


class AnnotationsBody(BaseModel):
    revision: int
    joints2d: list


class InterpolateBody(BaseModel):
    revision: int
    joint: int
    frame_a: int
    frame_b: int


class SmoothBody(BaseModel):
    revision: int
    sigma: float


class ImportBody(BaseModel):
    revision: int
    path: str
    mapping: str | list[int | None] = "coco17"


class AlignPreviewBody(BaseModel):
    clip_id: str


class ClipStore:
    """Directory-backed clip collection with revisions and atomic writes."""

    def __init__(self, root: Path, topology: Topology):
        self.root = root
        self.topology = topology
        self.paths: dict[str, Path] = {}
        self.revisions: dict[str, int] = {}
        self.locks: dict[str, threading.Lock] = {}
        for path in sorted(root.glob("*/*.json")):
            clip_id = path.stem
            self.paths[clip_id] = path
            self.revisions[clip_id] = 1
            self.locks[clip_id] = threading.Lock()

    def get(self, clip_id: str) -> ClipRecord:
        if clip_id not in self.paths:
            raise HTTPException(status_code=404, detail=f"unknown clip: {clip_id}")
        try:
            return load_clip(self.paths[clip_id], self.topology.joint_count)
        except SkelalignError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    def write(self, clip_id: str, record: ClipRecord) -> int:
        """Atomic replace of the clip file; returns the new revision."""
        path = self.paths[clip_id]
        text = clip_to_json(record)
        fd, tmp = tempfile.mkstemp(
            dir=path.parent, prefix=path.stem, suffix=".tmp"
        )
        try:
            with os.fdopen(fd, "w") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.revisions[clip_id] += 1
        return self.revisions[clip_id]

    def check_revision(self, clip_id: str, revision: int) -> None:
        current = self.revisions[clip_id]
        if revision != current:
            raise HTTPException(
                status_code=409,
                detail={
                    "error": "revision_conflict",
                    "current_revision": current,
                },
            )


def create_app(
    root: str | Path,
    model_path: str | Path | None = None,
    seed: int = 0,
) -> FastAPI:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    topology = load_dataset_topology(root)
    store = ClipStore(root, topology)
    model: AlignmentModel | None = None
    if model_path is not None:
        model = load_checkpoint(model_path)

    app = FastAPI(title="skelalign annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.seed = seed

    @app.get("/clips")
    def list_clips():
        items = []
        for clip_id in sorted(store.paths):
            record = store.get(clip_id)
            items.append(
                {
                    "id": clip_id,
                    "action": record.action,
                    "video_id": record.video_id,
                    "frame_count": record.frame_count,
                    "has_joints2d": record.joints2d is not None,
                    "has_joints3d": record.joints3d is not None,
                    "globally_aligned": record.globally_aligned,
                    "revision": store.revisions[clip_id],
                }
            )
        return {"clips": items}

    @app.get("/clips/{clip_id}")
    def get_clip(clip_id: str):
        record = store.get(clip_id)
        return {
            "id": clip_id,
            "revision": store.revisions[clip_id],
            "action": record.action,
            "video_id": record.video_id,
            "globally_aligned": record.globally_aligned,
            "frame_count": record.frame_count,
            "joints2d": _joints_to_payload(record.joints2d),
            "joints3d": _joints_to_payload(record.joints3d),
            "provenance": record.provenance,
            "joint_names": list(topology.joint_names),
            "bones": [list(b) for b in topology.bones],
        }

    @app.get("/clips/{clip_id}/frames/{index}")
    def get_frame(clip_id: str, index: int):
        if clip_id not in store.paths:
            raise HTTPException(status_code=404, detail=f"unknown clip: {clip_id}")
        frame_dir = store.paths[clip_id].parent / clip_id
        if frame_dir.is_dir():
            for ext, media in IMAGE_TYPES.items():
                candidate = frame_dir / f"{index}{ext}"
                if candidate.exists():
                    return FileResponse(candidate, media_type=media)
        raise HTTPException(
            status_code=404, detail=f"no image for frame {index} of {clip_id}"
        )

    @app.get("/clips/{clip_id}/annotations")
    def get_annotations(clip_id: str):
        record = store.get(clip_id)
        return {
            "revision": store.revisions[clip_id],
            "joints2d": _joints_to_payload(record.joints2d),
        }

    def _replace_annotations(clip_id: str, revision: int, joints2d: np.ndarray):
        with store.locks[clip_id]:
            store.check_revision(clip_id, revision)
            record = store.get(clip_id)
            updated = ClipRecord(
                action=record.action,
                video_id=record.video_id,
                globally_aligned=record.globally_aligned,
                joints2d=joints2d,
                joints3d=record.joints3d,
                provenance=record.provenance,
            )
            new_revision = store.write(clip_id, updated)
        return {
            "revision": new_revision,
            "joints2d": _joints_to_payload(joints2d),
        }

    @app.put("/clips/{clip_id}/annotations")
    def put_annotations(clip_id: str, body: AnnotationsBody):
        record = store.get(clip_id)
        try:
            joints2d = _payload_to_joints(
                body.joints2d, record.frame_count, topology.joint_count
            )
        except SkelalignError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _replace_annotations(clip_id, body.revision, joints2d)

    @app.post("/clips/{clip_id}/interpolate")
    def interpolate(clip_id: str, body: InterpolateBody):
        record = store.get(clip_id)
        if record.joints2d is None:
            raise HTTPException(status_code=400, detail="clip has no 2D annotations")
        try:
            joints2d = interpolate_joint(
                record.joints2d, body.joint, body.frame_a, body.frame_b
            )
        except SkelalignError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _replace_annotations(clip_id, body.revision, joints2d)

    @app.post("/clips/{clip_id}/smooth")
    def smooth(clip_id: str, body: SmoothBody):
        record = store.get(clip_id)
        if record.joints2d is None:
            raise HTTPException(status_code=400, detail="clip has no 2D annotations")
        try:
            joints2d = smooth_trajectories(record.joints2d, body.sigma)
        except UnannotatedFramesError as exc:
            raise HTTPException(
                status_code=400,
                detail={
                    "error": "unannotated_frames",
                    "missing_frames": exc.missing_frames,
                },
            ) from exc
        except SkelalignError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _replace_annotations(clip_id, body.revision, joints2d)

    @app.post("/clips/{clip_id}/import-predictions")
    def import_predictions(clip_id: str, body: ImportBody):
        import json as json_module

        record = store.get(clip_id)
        source = Path(body.path)
        if not source.is_absolute():
            source = root / source
        if not source.exists():
            raise HTTPException(status_code=404, detail=f"no such file: {source}")
        try:
            payload = json_module.loads(source.read_text())
            joints2d, _ = import_pose_predictions(
                payload,
                body.mapping,
                joint_count=topology.joint_count,
                frame_count=record.frame_count,
            )
        except SkelalignError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _replace_annotations(clip_id, body.revision, joints2d)

    @app.post("/align/preview")
    def align_preview(body: AlignPreviewBody):
        record = store.get(body.clip_id)
        if record.joints3d is None or np.isnan(record.joints3d).any():
            raise HTTPException(
                status_code=400, detail="clip has no complete 3D joints"
            )
        try:
            seq = standardize(record_to_sequence(record, topology))
            view = None
            if model is not None:
                seq, predicted = align_sequence(model, seq)
                view = {"theta": predicted.theta, "phi": predicted.phi}
        except SkelalignError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "joints3d": _joints_to_payload(seq.frames),
            "view": view,
            "bones": [list(b) for b in topology.bones],
        }

    @app.get("/healthz")
    def health():
        return Response(content="ok", media_type="text/plain")

    return app
