"""Explicit sequence encodings and temporal matching scores.

Sequences are segment-sampled to a common length, encoded per frame as
position / trajectory / combined feature vectors, compared with a cosine
distance matrix, and scored with one of three temporal schemes:

* mean:  negative mean of the whole distance matrix,
* dtw:   classic dynamic time warping (diagonal, horizontal, vertical moves),
* otam:  ordered alignment where every query frame is consumed exactly once
         and the support may be entered/left at any offset via two zero-cost
         boundary columns.

Scores are negated costs so that "higher is better" everywhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

logger = logging.getLogger(__name__)

FRAME_FEATURES = 51  # 17 joints * 3 coordinates
METHODS = ("mean", "dtw", "otam")


@dataclass(frozen=True)
class SampledSequence:
    """Fixed-length resample of a clip plus the original frame indices."""

    frames: np.ndarray
    source_indices: tuple[int, ...]


def segment_sample(
    frames: np.ndarray, t_n: int, rng: np.random.Generator
) -> SampledSequence:
    """One uniform random frame from each of t_n contiguous segments.

    The sequence is split as evenly as possible (earlier segments take the
    extra frames).  Shorter sequences are first extended by repeating the
    last frame, which makes every segment a single frame.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if t_n < 1:
        raise ValidationError(f"t_n must be >= 1, got {t_n}")
    total = frames.shape[0]
    if total == 0:
        raise ValidationError("cannot sample an empty sequence")
    indices = list(range(total))
    if total < t_n:
        indices = indices + [total - 1] * (t_n - total)
    count = len(indices)
    base, extra = divmod(count, t_n)
    chosen: list[int] = []
    cursor = 0
    for segment in range(t_n):
        size = base + (1 if segment < extra else 0)
        offset = int(rng.integers(0, size))
        chosen.append(indices[cursor + offset])
        cursor += size
    return SampledSequence(
        frames=frames[np.array(chosen)], source_indices=tuple(chosen)
    )


def encode(frames: np.ndarray, order: int) -> np.ndarray:
    """Per-frame feature vectors of a (t, J, 3) clip.

    order 0: flattened joint positions (51 values per frame).
    order 1: positions plus trajectory; the trajectory block of frame 1 is
             all ones, later frames hold first differences.
    order 2: additionally second differences, with the blocks of frames 1-2
             set to ones.
    """
    if order not in (0, 1, 2):
        raise ConfigError(f"encoding order must be 0, 1 or 2, got {order}")
    frames = np.asarray(frames, dtype=np.float64)
    flat = frames.reshape(frames.shape[0], -1)
    blocks = [flat]
    if order >= 1:
        tra = np.ones_like(flat)
        tra[1:] = flat[1:] - flat[:-1]
        blocks.append(tra)
    if order >= 2:
        acc = np.ones_like(flat)
        if flat.shape[0] > 2:
            acc[2:] = flat[2:] - 2.0 * flat[1:-1] + flat[:-2]
        blocks.append(acc)
    return np.concatenate(blocks, axis=1)


def distance_matrix(query: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Pairwise 1 - cosine_similarity between frame vectors; entries in [0, 2].

    A zero-norm frame vector has undefined direction; its similarity is
    taken as 0 (distance 1) and the event is logged.
    """
    q = np.asarray(query, dtype=np.float64)
    s = np.asarray(support, dtype=np.float64)
    if q.ndim != 2 or s.ndim != 2 or q.shape[1] != s.shape[1]:
        raise ValidationError(
            f"embeddings must be (t, d) with matching d: {q.shape} vs {s.shape}"
        )
    q_norm = np.linalg.norm(q, axis=1)
    s_norm = np.linalg.norm(s, axis=1)
    zero_q = q_norm < 1e-300
    zero_s = s_norm < 1e-300
    if zero_q.any() or zero_s.any():
        logger.warning(
            "zero-norm frame vectors in distance matrix (query %d, support %d)",
            int(zero_q.sum()),
            int(zero_s.sum()),
        )
    q_unit = np.where(zero_q[:, None], 0.0, q / np.maximum(q_norm, 1e-300)[:, None])
    s_unit = np.where(zero_s[:, None], 0.0, s / np.maximum(s_norm, 1e-300)[:, None])
    sim = q_unit @ s_unit.T
    sim[zero_q, :] = 0.0
    sim[:, zero_s] = 0.0
    return np.clip(1.0 - sim, 0.0, 2.0)


@dataclass(frozen=True)
class MatchScore:
    method: str
    score: float
    path: tuple[tuple[int, int], ...] | None = None


def score_mean(dist: np.ndarray) -> MatchScore:
    """Negative mean over the full matrix; works for rectangular matrices."""
    return MatchScore(method="mean", score=float(-np.mean(dist)))


def score_dtw(dist: np.ndarray) -> MatchScore:
    """Anchored DTW from (0, 0) to (r-1, c-1), both endpoint costs included.

    Moves: diagonal, horizontal, vertical.  Rectangular matrices allowed.
    """
    dist = np.asarray(dist, dtype=np.float64)
    rows, cols = dist.shape
    acc = np.full((rows, cols), np.inf)
    acc[0, 0] = dist[0, 0]
    for i in range(rows):
        for j in range(cols):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = dist[i, j] + best

    path = [(rows - 1, cols - 1)]
    i, j = rows - 1, cols - 1
    while (i, j) != (0, 0):
        options = []
        if i > 0 and j > 0:
            options.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            options.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            options.append((acc[i, j - 1], (i, j - 1)))
        i, j = min(options, key=lambda o: o[0])[1]
        path.append((i, j))
    path.reverse()
    return MatchScore(method="dtw", score=float(-acc[-1, -1]), path=tuple(path))


def score_otam(dist: np.ndarray) -> MatchScore:
    """Ordered temporal alignment over a square distance matrix.

    Each query row i is assigned one support index j_i from the padded range
    {-1, 0..t-1, t}; assignments are non-decreasing with steps of 0 or 1; the
    two boundary indexes cost nothing (-1 may only open the path, t may only
    close it).  The score is the negated sum of real-cell costs of the best
    assignment.  The path reports (row, padded support index) pairs.
    """
    dist = np.asarray(dist, dtype=np.float64)
    rows, cols = dist.shape
    if rows != cols:
        raise ConfigError(
            f"otam requires a square distance matrix, got {rows}x{cols}"
        )
    t = rows
    width = t + 2  # padded support indices -1..t stored at offset +1

    def cell_cost(i: int, jj: int) -> float:
        if jj == 0 or jj == width - 1:
            return 0.0
        return float(dist[i, jj - 1])

    cum = np.full((t, width), np.inf)
    for jj in range(width - 1):  # the closing boundary cannot open a path
        cum[0, jj] = cell_cost(0, jj)
    for i in range(1, t):
        cum[i, 0] = cell_cost(i, 0) + cum[i - 1, 0]
        for jj in range(1, width):
            prev = min(cum[i - 1, jj], cum[i - 1, jj - 1])
            cum[i, jj] = cell_cost(i, jj) + prev

    # the opening boundary cannot close a path
    final = cum[t - 1, 1:]
    end = int(np.argmin(final)) + 1
    score = float(final[end - 1])

    path = [(t - 1, end - 1)]
    jj = end
    for i in range(t - 1, 0, -1):
        if jj > 0 and cum[i - 1, jj - 1] <= cum[i - 1, jj]:
            jj = jj - 1
        path.append((i - 1, jj - 1))
    path.reverse()
    return MatchScore(method="otam", score=-score, path=tuple(path))


def score(dist: np.ndarray, method: str) -> MatchScore:
    if method == "mean":
        return score_mean(dist)
    if method == "dtw":
        return score_dtw(dist)
    if method == "otam":
        return score_otam(dist)
    raise ConfigError(f"unknown matching method: {method}")


# --- episodic classification --------------------------------------------------


@dataclass(frozen=True)
class Episode:
    """One few-shot task: a query clip against labeled support clips.

    ``t_n`` is the common sampled length, or None when full sequences are
    kept (mean and dtw only).
    """

    query_frames: np.ndarray
    query_label: str
    supports: dict[str, list[np.ndarray]]
    t_n: int | None


@dataclass(frozen=True)
class ClassificationResult:
    predicted: str
    scores: dict[str, float]


def classify(episode: Episode, method: str, order: int) -> ClassificationResult:
    """Average each class's support scores and pick the best class.

    Ties are broken by the lexicographically smallest class name.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown matching method: {method}")
    if episode.t_n is None and method == "otam":
        raise ConfigError("otam requires segment-sampled sequences (square matrix)")
    query_emb = encode(episode.query_frames, order)
    class_scores: dict[str, float] = {}
    for label in sorted(episode.supports):
        clips = episode.supports[label]
        if not clips:
            raise ValidationError(f"class {label} has no support clips")
        values = []
        for clip in clips:
            dist = distance_matrix(query_emb, encode(clip, order))
            values.append(score(dist, method).score)
        class_scores[label] = float(np.mean(values))
    predicted = max(
        sorted(class_scores), key=lambda label: class_scores[label]
    )
    return ClassificationResult(predicted=predicted, scores=class_scores)
