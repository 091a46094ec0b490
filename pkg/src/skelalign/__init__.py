"""4D skeleton standardization, view alignment and few-shot matching."""

from __future__ import annotations

from .aligner import (
    AlignmentModel,
    TrainConfig,
    TrainSample,
    align_sequence,
    init_model,
    load_checkpoint,
    oracle_estimate,
    predict_view,
    save_checkpoint,
    train,
)
from .clips import (
    ClipRecord,
    clip_from_json,
    clip_to_json,
    load_clip,
    load_dataset,
    make_split,
    save_clip,
    save_dataset,
)
from .errors import SkelalignError
from .evaluate import EvalConfig, compute_map, run_evaluation
from .geometry import (
    CameraAngles,
    ViewSphere,
    angles_from_camera,
    apply_rotation,
    augment_view,
    build_view_sphere,
    camera_from_angles,
    rotation_from_angles,
    split_views,
)
from .matching import Episode, classify, distance_matrix, encode, segment_sample
from .skeleton import (
    DEFAULT_TOPOLOGY,
    SkeletonSequence,
    Topology,
    standardize,
)
from .synthetic import generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AlignmentModel",
    "CameraAngles",
    "ClipRecord",
    "DEFAULT_TOPOLOGY",
    "Episode",
    "EvalConfig",
    "SkelalignError",
    "SkeletonSequence",
    "Topology",
    "TrainConfig",
    "TrainSample",
    "ViewSphere",
    "align_sequence",
    "angles_from_camera",
    "apply_rotation",
    "augment_view",
    "build_view_sphere",
    "camera_from_angles",
    "classify",
    "clip_from_json",
    "clip_to_json",
    "compute_map",
    "distance_matrix",
    "encode",
    "generate_synthetic",
    "init_model",
    "load_checkpoint",
    "load_clip",
    "load_dataset",
    "make_split",
    "oracle_estimate",
    "predict_view",
    "rotation_from_angles",
    "run_evaluation",
    "save_checkpoint",
    "save_clip",
    "save_dataset",
    "segment_sample",
    "split_views",
    "standardize",
    "train",
    "__version__",
]
