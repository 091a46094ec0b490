"""Few-shot episodic evaluation and 2D detection quality (mAP).

Episodes are n-way k-shot tasks drawn from an evaluation pool with
per-episode RNG streams derived from (master seed, episode index), so
results do not depend on scheduling order.  Sequences are standardized
once, optionally aligned (by a trained model or by the derivative-free
oracle against each sample's manifest view), then segment-sampled, encoded
and classified.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .aligner import AlignmentModel, align_sequence, oracle_estimate
from .clips import ClipRecord, record_to_sequence
from .errors import ConfigError, ValidationError
from .geometry import (
    CameraAngles,
    ViewSphere,
    apply_rotation,
    build_view_sphere,
)
from .matching import Episode, classify, segment_sample
from .skeleton import DEFAULT_TOPOLOGY, SkeletonSequence, Topology, standardize

logger = logging.getLogger(__name__)

ALIGN_MODES = ("none", "oracle", "model")


@dataclass(frozen=True)
class EvalConfig:
    method: str = "dtw"
    order: int = 1
    t_n: int | None = 8
    ways: int = 5
    shots: int = 1
    episodes: int = 200
    seed: int = 0
    align: str = "none"


@dataclass(frozen=True)
class EvalReport:
    config: EvalConfig
    accuracy: float
    per_class: dict[str, float]
    episode_count: int
    class_names: tuple[str, ...]


def _aligned_pool(
    records: list[ClipRecord],
    topology: Topology,
    config: EvalConfig,
    views: dict[str, CameraAngles] | None,
    model: AlignmentModel | None,
    sphere: ViewSphere | None,
) -> dict[str, list[SkeletonSequence]]:
    """Standardize every record and resolve the alignment mode once."""
    if config.align not in ALIGN_MODES:
        raise ConfigError(f"unknown align mode: {config.align}")
    if config.align == "model" and model is None:
        raise ConfigError("align mode 'model' needs a trained model")
    if config.align == "oracle":
        if views is None:
            raise ConfigError(
                "align mode 'oracle' needs a views manifest with source angles"
            )
        if sphere is None:
            sphere = build_view_sphere(3)

    pool: dict[str, list[SkeletonSequence]] = {}
    for record in records:
        seq = standardize(record_to_sequence(record, topology))
        if config.align == "model":
            seq, _ = align_sequence(model, seq)
        elif config.align == "oracle":
            if record.video_id not in views:
                raise ConfigError(
                    f"views manifest has no entry for {record.video_id}"
                )
            true_view = views[record.video_id]
            source = apply_rotation(seq, true_view)
            estimate = oracle_estimate(seq.frames, source.frames, sphere)
            seq = apply_rotation(seq, estimate)
        pool.setdefault(record.action, []).append(seq)
    return pool


def run_evaluation(
    records: list[ClipRecord],
    config: EvalConfig,
    topology: Topology = DEFAULT_TOPOLOGY,
    views: dict[str, CameraAngles] | None = None,
    model: AlignmentModel | None = None,
    sphere: ViewSphere | None = None,
) -> EvalReport:
    """Accuracy over seeded episodes; ties and class draws are deterministic."""
    pool = _aligned_pool(records, topology, config, views, model, sphere)

    usable = {}
    for action in sorted(pool):
        if len(pool[action]) >= config.shots + 1:
            usable[action] = pool[action]
        else:
            logger.warning(
                "class %s has %d samples, needs %d; excluded",
                action,
                len(pool[action]),
                config.shots + 1,
            )
    if len(usable) < config.ways:
        raise ConfigError(
            f"need {config.ways} usable classes, have {len(usable)}"
        )

    class_names = sorted(usable)
    correct = 0
    per_class_hits: dict[str, list[int]] = {name: [] for name in class_names}
    for episode_index in range(config.episodes):
        rng = np.random.default_rng([config.seed, episode_index])
        chosen = [
            class_names[i]
            for i in rng.choice(len(class_names), size=config.ways, replace=False)
        ]
        query_class = chosen[int(rng.integers(0, config.ways))]

        supports: dict[str, list[np.ndarray]] = {}
        query_frames = None
        for action in chosen:
            clips = usable[action]
            if action == query_class:
                picks = rng.choice(len(clips), size=config.shots + 1, replace=False)
                query_seq = clips[int(picks[0])]
                support_seqs = [clips[int(p)] for p in picks[1:]]
                if config.t_n is None:
                    query_frames = query_seq.frames
                else:
                    query_frames = segment_sample(
                        query_seq.frames, config.t_n, rng
                    ).frames
            else:
                picks = rng.choice(len(clips), size=config.shots, replace=False)
                support_seqs = [clips[int(p)] for p in picks]
            sampled = []
            for seq in support_seqs:
                if config.t_n is None:
                    sampled.append(seq.frames)
                else:
                    sampled.append(segment_sample(seq.frames, config.t_n, rng).frames)
            supports[action] = sampled

        episode = Episode(
            query_frames=query_frames,
            query_label=query_class,
            supports=supports,
            t_n=config.t_n,
        )
        result = classify(episode, config.method, config.order)
        hit = int(result.predicted == query_class)
        correct += hit
        per_class_hits[query_class].append(hit)

    per_class = {
        name: (float(np.mean(hits)) if hits else float("nan"))
        for name, hits in per_class_hits.items()
    }
    return EvalReport(
        config=config,
        accuracy=correct / config.episodes,
        per_class=per_class,
        episode_count=config.episodes,
        class_names=tuple(class_names),
    )


def report_to_json(report: EvalReport) -> str:
    payload = {
        "method": report.config.method,
        "order": report.config.order,
        "t_n": report.config.t_n,
        "ways": report.config.ways,
        "shots": report.config.shots,
        "episodes": report.episode_count,
        "seed": report.config.seed,
        "align": report.config.align,
        "accuracy": report.accuracy,
        "per_class": {k: report.per_class[k] for k in sorted(report.per_class)},
    }
    return json.dumps(payload, indent=2) + "\n"


def report_to_table(report: EvalReport) -> str:
    """Aligned-column text block: one summary row plus per-class rows."""
    cfg = report.config
    t_n = "all" if cfg.t_n is None else str(cfg.t_n)
    header = (
        f"{'method':<8}{'order':>6}{'t_n':>6}{'ways':>6}{'shots':>7}"
        f"{'align':>8}{'episodes':>10}{'accuracy':>10}"
    )
    summary = (
        f"{cfg.method:<8}{cfg.order:>6}{t_n:>6}{cfg.ways:>6}{cfg.shots:>7}"
        f"{cfg.align:>8}{report.episode_count:>10}{report.accuracy:>10.3f}"
    )
    lines = [header, summary, "", f"{'class':<20}{'accuracy':>10}"]
    for name in sorted(report.per_class):
        value = report.per_class[name]
        shown = "n/a" if np.isnan(value) else f"{value:.3f}"
        lines.append(f"{name:<20}{shown:>10}")
    return "\n".join(lines) + "\n"


def per_class_csv(report: EvalReport) -> str:
    lines = ["class,accuracy"]
    for name in sorted(report.per_class):
        value = report.per_class[name]
        shown = "" if np.isnan(value) else f"{value:.6f}"
        lines.append(f"{name},{shown}")
    return "\n".join(lines) + "\n"


# --- detection quality (2D) ----------------------------------------------------


@dataclass(frozen=True)
class MapReport:
    iou_threshold: float
    per_class: dict[str, float]
    mean_ap: float


def joint_bbox(joints: np.ndarray) -> np.ndarray | None:
    """Tight [x_min, y_min, x_max, y_max] over the 2D joints; no padding."""
    pts = np.asarray(joints, dtype=np.float64)
    valid = ~np.isnan(pts).any(axis=1)
    if not valid.any():
        return None
    pts = pts[valid]
    return np.array(
        [pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()]
    )


def bbox_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; degenerate zero-area boxes give 0."""
    area_a = max(a[2] - a[0], 0.0) * max(a[3] - a[1], 0.0)
    area_b = max(b[2] - b[0], 0.0) * max(b[3] - b[1], 0.0)
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return float(inter / (area_a + area_b - inter))


def _average_precision(
    ious: list[float], confidences: list[float] | None, threshold: float
) -> float:
    """AP on a 0-100 scale for one class.

    With confidences: area under the ranked precision-recall curve using the
    precision envelope (continuous interpolation).  Without: the fraction of
    frames whose IoU clears the threshold.
    """
    if not ious:
        return float("nan")
    hits = [iou >= threshold for iou in ious]
    if confidences is None:
        return 100.0 * float(np.mean(hits))

    order = np.argsort(-np.asarray(confidences, dtype=np.float64), kind="stable")
    tp = np.array([1.0 if hits[i] else 0.0 for i in order])
    fp = 1.0 - tp
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    total = float(len(ious))
    recall = cum_tp / total
    precision = cum_tp / np.maximum(cum_tp + cum_fp, 1e-12)

    # precision envelope, then sum rectangle areas between recall steps
    ap = 0.0
    prev_recall = 0.0
    for k in range(len(recall)):
        p = float(np.max(precision[k:]))
        ap += (recall[k] - prev_recall) * p
        prev_recall = float(recall[k])
    return 100.0 * ap


def compute_map(
    gt: list[ClipRecord],
    predicted: list[ClipRecord],
    iou_threshold: float = 0.5,
    confidences: dict[str, np.ndarray] | None = None,
) -> MapReport:
    """Mean average precision of predicted 2D joints against ground truth.

    Records pair up by video_id; each annotated frame is one detection whose
    box is the tight bbox of its joints.  ``confidences`` optionally maps a
    video_id to per-frame detector scores, enabling ranked AP.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError("iou_threshold must be in (0, 1]")
    pred_by_id = {r.video_id: r for r in predicted}
    per_class_ious: dict[str, list[float]] = {}
    per_class_confs: dict[str, list[float]] = {}
    any_conf = False

    for record in gt:
        if record.joints2d is None:
            continue
        pred = pred_by_id.get(record.video_id)
        conf = (confidences or {}).get(record.video_id)
        for f in range(record.frame_count):
            gt_box = joint_bbox(record.joints2d[f])
            if gt_box is None:
                continue
            iou = 0.0
            if pred is not None and pred.joints2d is not None and f < pred.frame_count:
                pred_box = joint_bbox(pred.joints2d[f])
                if pred_box is not None:
                    iou = bbox_iou(gt_box, pred_box)
            per_class_ious.setdefault(record.action, []).append(iou)
            c = 0.0
            if conf is not None and f < len(conf) and np.isfinite(conf[f]):
                c = float(conf[f])
                any_conf = True
            per_class_confs.setdefault(record.action, []).append(c)

    if not per_class_ious:
        raise ValidationError("no annotated ground-truth frames to score")
    per_class = {}
    for action in sorted(per_class_ious):
        per_class[action] = _average_precision(
            per_class_ious[action],
            per_class_confs[action] if any_conf else None,
            iou_threshold,
        )
    mean_ap = float(np.mean([v for v in per_class.values()]))
    return MapReport(
        iou_threshold=iou_threshold, per_class=per_class, mean_ap=mean_ap
    )


def map_report_to_json(report: MapReport) -> str:
    payload = {
        "iou_threshold": report.iou_threshold,
        "mean_ap": report.mean_ap,
        "per_class": {k: report.per_class[k] for k in sorted(report.per_class)},
    }
    return json.dumps(payload, indent=2) + "\n"


def map_report_to_csv(report: MapReport) -> str:
    lines = ["class,average_precision"]
    for name in sorted(report.per_class):
        lines.append(f"{name},{report.per_class[name]:.6f}")
    lines.append(f"mean,{report.mean_ap:.6f}")
    return "\n".join(lines) + "\n"
