"""View-alignment model: predicts camera angles from a short clip prefix.

A single-hidden-layer tanh network maps the first ``input_frames`` frames of
a standardized sequence (flattened) to four raw outputs read as
(cos theta, sin theta, cos phi, sin phi).  Each pair is normalized to unit
length and converted to angles with the two-argument arctangent.

Training minimizes  w_rot * L_rot + w_rec * L_rec  where L_rot compares
cos/sin of predicted and target angles (MSE over the two angle components)
and L_rec is the RMSE between the back-rotated source and the augmented
input.  Gradients are analytic, including the path through the rotation
matrix; a finite-difference check is part of the test suite.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    FormatVersionError,
    TrainingDivergedError,
    ValidationError,
)
from .geometry import (
    CameraAngles,
    ViewSphere,
    apply_rotation,
    camera_from_angles,
    rotation_derivatives,
    rotation_from_angles,
    wrap_angle,
)
from .skeleton import SkeletonSequence

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PAIR_EPS = 1e-9
REC_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined training loss (rotation : reconstruction)."""

    rotation: float = 10.0
    reconstruction: float = 1.0


@dataclass
class AlignmentModel:
    """MLP weights plus the input geometry they were built for."""

    input_frames: int
    joint_count: int
    hidden_width: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    seed: int = 0
    loss_weights: LossWeights = field(default_factory=LossWeights)

    @property
    def input_dim(self) -> int:
        return self.input_frames * self.joint_count * 3

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.w1.ravel(), self.b1.ravel(), self.w2.ravel(), self.b2.ravel()]
        )

    def with_parameters(self, flat: np.ndarray) -> "AlignmentModel":
        expected = self.parameter_vector().size
        if flat.size != expected:
            raise ValidationError(
                f"parameter vector has {flat.size} entries, expected {expected}"
            )
        h, d = self.hidden_width, self.input_dim
        i = 0
        w1 = flat[i : i + h * d].reshape(h, d).copy()
        i += h * d
        b1 = flat[i : i + h].copy()
        i += h
        w2 = flat[i : i + 4 * h].reshape(4, h).copy()
        i += 4 * h
        b2 = flat[i : i + 4].copy()
        return replace(self, w1=w1, b1=b1, w2=w2, b2=b2)


def init_model(
    input_frames: int = 8,
    joint_count: int = 17,
    hidden_width: int = 128,
    seed: int = 0,
) -> AlignmentModel:
    """Seeded Gaussian init scaled by fan-in."""
    rng = np.random.default_rng(seed)
    input_dim = input_frames * joint_count * 3
    w1 = rng.normal(0.0, 1.0 / np.sqrt(input_dim), size=(hidden_width, input_dim))
    b1 = np.zeros(hidden_width)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden_width), size=(4, hidden_width))
    b2 = np.zeros(4)
    return AlignmentModel(
        input_frames=input_frames,
        joint_count=joint_count,
        hidden_width=hidden_width,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        seed=seed,
    )


def prepare_window(frames: np.ndarray, input_frames: int) -> np.ndarray:
    """First ``input_frames`` frames; short clips repeat their last frame."""
    frames = np.asarray(frames, dtype=np.float64)
    t = frames.shape[0]
    if t >= input_frames:
        return frames[:input_frames]
    pad = np.repeat(frames[-1:], input_frames - t, axis=0)
    return np.concatenate([frames, pad], axis=0)


def _forward(model: AlignmentModel, x: np.ndarray):
    z1 = x @ model.w1.T + model.b1
    h = np.tanh(z1)
    y = h @ model.w2.T + model.b2
    return h, y


def _angles_from_raw(y: np.ndarray) -> CameraAngles:
    """Normalize output pairs and read angles; degenerate pairs give 0."""
    r_theta = float(np.hypot(y[0], y[1]))
    r_phi = float(np.hypot(y[2], y[3]))
    if r_theta < PAIR_EPS:
        logger.warning("degenerate azimuth output pair, falling back to 0")
        theta = 0.0
    else:
        theta = wrap_angle(float(np.arctan2(y[1], y[0])))
    if r_phi < PAIR_EPS:
        logger.warning("degenerate altitude output pair, falling back to 0")
        phi = 0.0
    else:
        phi = float(np.arctan2(y[3], y[2]))
        phi = float(np.clip(phi, -np.pi / 2, np.pi / 2))
    return CameraAngles(theta, phi)


def predict_view(model: AlignmentModel, seq: SkeletonSequence) -> CameraAngles:
    """Camera angles predicted from the first input_frames of ``seq``."""
    window = prepare_window(seq.frames, model.input_frames)
    _, y = _forward(model, window.reshape(-1))
    return _angles_from_raw(y)


def align_sequence(
    model: AlignmentModel, seq: SkeletonSequence
) -> tuple[SkeletonSequence, CameraAngles]:
    """Predict the view once and rotate every frame back by it.

    One shared rotation keeps relative motion between frames intact;
    aligning frame-by-frame would distort the action itself.
    """
    view = predict_view(model, seq)
    return apply_rotation(seq, view), view


# --- losses ------------------------------------------------------------------


def rot_loss(pred: CameraAngles, gt: CameraAngles) -> float:
    """MSE(cos pred, cos gt) + MSE(sin pred, sin gt) over the two angles."""
    pc = np.array([np.cos(pred.theta), np.cos(pred.phi)])
    ps = np.array([np.sin(pred.theta), np.sin(pred.phi)])
    gc = np.array([np.cos(gt.theta), np.cos(gt.phi)])
    gs = np.array([np.sin(gt.theta), np.sin(gt.phi)])
    return float(np.mean((pc - gc) ** 2) + np.mean((ps - gs) ** 2))


def rec_loss(
    source_frames: np.ndarray, augmented_frames: np.ndarray, view: CameraAngles
) -> float:
    """RMSE between the view-rendered source and the augmented frames."""
    source = np.asarray(source_frames, dtype=np.float64)
    augmented = np.asarray(augmented_frames, dtype=np.float64)
    if source.shape != augmented.shape:
        raise ValidationError(
            f"sequence shapes differ: {source.shape} vs {augmented.shape}"
        )
    r = rotation_from_angles(view)
    rendered = np.einsum("ji,fkj->fki", r, source)
    return float(np.sqrt(np.mean((rendered - augmented) ** 2)))


def total_loss(
    pred: CameraAngles,
    gt: CameraAngles,
    source_frames: np.ndarray,
    augmented_frames: np.ndarray,
    weights: LossWeights = LossWeights(),
) -> float:
    return weights.rotation * rot_loss(pred, gt) + weights.reconstruction * rec_loss(
        source_frames, augmented_frames, pred
    )


def angular_error(a: CameraAngles, b: CameraAngles) -> float:
    """Geodesic angle (radians) between the two camera directions."""
    dot = float(np.dot(camera_from_angles(a), camera_from_angles(b)))
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


# --- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainSample:
    """One supervised pair: source sequence, its augmented view, the angles."""

    source: np.ndarray
    augmented: np.ndarray
    view: CameraAngles


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-4
    weight_decay: float = 1e-6
    seed: int = 0
    gradient_mode: str = "full"  # "full" or "rotation"
    weights: LossWeights = field(default_factory=LossWeights)


def _batched_rotations(theta: np.ndarray, phi: np.ndarray):
    """Vectorized rotation_derivatives over (B,) angle arrays."""
    b = theta.shape[0]
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    zeros = np.zeros(b)
    ones = np.ones(b)

    def mat(rows):
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    r1 = mat([[ct, zeros, -st], [zeros, ones, zeros], [st, zeros, ct]])
    dr1 = mat([[-st, zeros, -ct], [zeros, zeros, zeros], [ct, zeros, -st]])
    k = mat([[zeros, -st, zeros], [st, zeros, -ct], [zeros, ct, zeros]])
    dk = mat([[zeros, -ct, zeros], [ct, zeros, st], [zeros, -st, zeros]])
    a = np.stack([ct, zeros, st], axis=-1)
    da = np.stack([-st, zeros, ct], axis=-1)
    outer = np.einsum("bi,bj->bij", a, a)
    douter = np.einsum("bi,bj->bij", da, a) + np.einsum("bi,bj->bij", a, da)
    eye = np.broadcast_to(np.eye(3), (b, 3, 3))

    r2 = cp[:, None, None] * eye + sp[:, None, None] * k
    r2 = r2 + (1.0 - cp)[:, None, None] * outer
    dr2_dp = -sp[:, None, None] * eye + cp[:, None, None] * k
    dr2_dp = dr2_dp + sp[:, None, None] * outer
    dr2_dt = sp[:, None, None] * dk + (1.0 - cp)[:, None, None] * douter

    r = np.einsum("bij,bjk->bik", r2, r1)
    dr_dt = np.einsum("bij,bjk->bik", dr2_dt, r1) + np.einsum(
        "bij,bjk->bik", r2, dr1
    )
    dr_dp = np.einsum("bij,bjk->bik", dr2_dp, r1)
    return r, dr_dt, dr_dp


def batch_loss_and_gradients(
    model: AlignmentModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    sources: np.ndarray,
    augmented: np.ndarray,
    weights: LossWeights,
    gradient_mode: str = "full",
):
    """Mean loss over a batch plus analytic gradients w.r.t. all parameters.

    inputs: (B, input_dim) flattened augmented windows.
    targets: (B, 2) ground-truth (theta, phi).
    sources/augmented: (B, t_in, J, 3) windows.
    Returns (loss, rot_term, rec_term, grad_flat).
    """
    if gradient_mode not in ("full", "rotation"):
        raise ConfigError(f"unknown gradient mode: {gradient_mode}")
    bsz = inputs.shape[0]
    wr, wc = weights.rotation, weights.reconstruction

    h = np.tanh(inputs @ model.w1.T + model.b1)
    y = h @ model.w2.T + model.b2

    r_theta = np.maximum(np.hypot(y[:, 0], y[:, 1]), PAIR_EPS)
    r_phi = np.maximum(np.hypot(y[:, 2], y[:, 3]), PAIR_EPS)
    u = np.empty_like(y)
    u[:, 0] = y[:, 0] / r_theta
    u[:, 1] = y[:, 1] / r_theta
    u[:, 2] = y[:, 2] / r_phi
    u[:, 3] = y[:, 3] / r_phi

    gt_cos = np.stack([np.cos(targets[:, 0]), np.cos(targets[:, 1])], axis=1)
    gt_sin = np.stack([np.sin(targets[:, 0]), np.sin(targets[:, 1])], axis=1)
    cos_diff = np.stack([u[:, 0] - gt_cos[:, 0], u[:, 2] - gt_cos[:, 1]], axis=1)
    sin_diff = np.stack([u[:, 1] - gt_sin[:, 0], u[:, 3] - gt_sin[:, 1]], axis=1)
    rot_terms = np.mean(cos_diff**2, axis=1) + np.mean(sin_diff**2, axis=1)

    theta = np.arctan2(y[:, 1], y[:, 0])
    phi = np.arctan2(y[:, 3], y[:, 2])
    r, dr_dt, dr_dp = _batched_rotations(theta, phi)
    rendered = np.einsum("bji,bfkj->bfki", r, sources)
    diff = rendered - augmented
    n_coords = float(np.prod(sources.shape[1:]))
    rec_terms = np.sqrt(np.mean(diff**2, axis=(1, 2, 3)))

    losses = wr * rot_terms + wc * rec_terms

    # dL/dy: rotation term through pair normalization (MSE over 2 components
    # contributes a factor 1/2 per squared difference).
    g_y = np.zeros_like(y)
    for c_idx, s_idx, radius, col in ((0, 1, r_theta, 0), (2, 3, r_phi, 1)):
        a, b = y[:, c_idx], y[:, s_idx]
        r3 = radius**3
        dc = cos_diff[:, col]
        ds = sin_diff[:, col]
        g_y[:, c_idx] += wr * (dc * (b**2) / r3 + ds * (-a * b) / r3)
        g_y[:, s_idx] += wr * (dc * (-a * b) / r3 + ds * (a**2) / r3)

    if gradient_mode == "full":
        safe_rec = np.maximum(rec_terms, REC_EPS)
        d_rendered_dt = np.einsum("bji,bfkj->bfki", dr_dt, sources)
        d_rendered_dp = np.einsum("bji,bfkj->bfki", dr_dp, sources)
        drec_dt = np.einsum("bfki,bfki->b", diff, d_rendered_dt) / (
            n_coords * safe_rec
        )
        drec_dp = np.einsum("bfki,bfki->b", diff, d_rendered_dp) / (
            n_coords * safe_rec
        )
        drec_dt = np.where(rec_terms < REC_EPS, 0.0, drec_dt)
        drec_dp = np.where(rec_terms < REC_EPS, 0.0, drec_dp)
        rt2 = r_theta**2
        rp2 = r_phi**2
        g_y[:, 0] += wc * drec_dt * (-y[:, 1] / rt2)
        g_y[:, 1] += wc * drec_dt * (y[:, 0] / rt2)
        g_y[:, 2] += wc * drec_dp * (-y[:, 3] / rp2)
        g_y[:, 3] += wc * drec_dp * (y[:, 2] / rp2)

    g_y /= bsz
    g_w2 = g_y.T @ h
    g_b2 = g_y.sum(axis=0)
    g_h = g_y @ model.w2
    g_z1 = g_h * (1.0 - h**2)
    g_w1 = g_z1.T @ inputs
    g_b1 = g_z1.sum(axis=0)

    grad = np.concatenate(
        [g_w1.ravel(), g_b1.ravel(), g_w2.ravel(), g_b2.ravel()]
    )
    return (
        float(np.mean(losses)),
        float(np.mean(rot_terms)),
        float(np.mean(rec_terms)),
        grad,
    )


def _prepare_samples(samples: list[TrainSample], input_frames: int):
    inputs, targets, sources, augmented = [], [], [], []
    for s in samples:
        aug = prepare_window(s.augmented, input_frames)
        src = prepare_window(s.source, input_frames)
        inputs.append(aug.reshape(-1))
        targets.append([s.view.theta, s.view.phi])
        sources.append(src)
        augmented.append(aug)
    return (
        np.array(inputs),
        np.array(targets),
        np.array(sources),
        np.array(augmented),
    )


def train(
    model: AlignmentModel,
    samples: list[TrainSample],
    config: TrainConfig = TrainConfig(),
) -> tuple[AlignmentModel, list[tuple[int, float, float, float]]]:
    """Adam with decoupled weight decay; returns model and per-epoch history.

    History rows are (epoch, mean_loss, mean_rot, mean_rec), averaged over
    the epoch's batches.  Raises TrainingDivergedError on non-finite loss.
    """
    if not samples:
        raise ConfigError("no training samples")
    inputs, targets, sources, augmented = _prepare_samples(
        samples, model.input_frames
    )
    rng = np.random.default_rng(config.seed)
    params = model.parameter_vector()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    step = 0
    history: list[tuple[int, float, float, float]] = []
    current = model.with_parameters(params)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        epoch_loss, epoch_rot, epoch_rec, batches = 0.0, 0.0, 0.0, 0
        for start in range(0, len(samples), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, rot_term, rec_term, grad = batch_loss_and_gradients(
                current,
                inputs[idx],
                targets[idx],
                sources[idx],
                augmented[idx],
                config.weights,
                config.gradient_mode,
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batches}"
                )
            step += 1
            m = 0.9 * m + 0.1 * grad
            v = 0.999 * v + 0.001 * grad**2
            m_hat = m / (1.0 - 0.9**step)
            v_hat = v / (1.0 - 0.999**step)
            params = params - config.learning_rate * (
                m_hat / (np.sqrt(v_hat) + 1e-8) + config.weight_decay * params
            )
            current = current.with_parameters(params)
            epoch_loss += loss
            epoch_rot += rot_term
            epoch_rec += rec_term
            batches += 1
        history.append(
            (epoch, epoch_loss / batches, epoch_rot / batches, epoch_rec / batches)
        )
    return current, history


def history_to_csv(history: list[tuple[int, float, float, float]]) -> str:
    lines = ["epoch,mean_loss,mean_rot,mean_rec"]
    for epoch, mean_loss, mean_rot, mean_rec in history:
        lines.append(f"{epoch},{mean_loss:.17g},{mean_rot:.17g},{mean_rec:.17g}")
    return "\n".join(lines) + "\n"


# --- checkpoints -------------------------------------------------------------


def checkpoint_to_json(model: AlignmentModel) -> str:
    """Self-describing checkpoint: JSON header + base64 little-endian f64."""
    blob = base64.b64encode(
        model.parameter_vector().astype("<f8").tobytes()
    ).decode("ascii")
    header = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": {
            "input_frames": model.input_frames,
            "joint_count": model.joint_count,
            "hidden_width": model.hidden_width,
        },
        "seed": model.seed,
        "loss_weights": {
            "rotation": model.loss_weights.rotation,
            "reconstruction": model.loss_weights.reconstruction,
        },
        "parameters": blob,
    }
    return json.dumps(header, indent=2) + "\n"


def checkpoint_from_json(text: str) -> AlignmentModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"checkpoint is not valid JSON: {exc}") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise FormatVersionError(
            f"unsupported checkpoint version: {payload.get('format_version')}"
        )
    arch = payload["architecture"]
    flat = np.frombuffer(
        base64.b64decode(payload["parameters"]), dtype="<f8"
    ).astype(np.float64)
    weights = payload.get("loss_weights", {})
    model = init_model(
        input_frames=int(arch["input_frames"]),
        joint_count=int(arch["joint_count"]),
        hidden_width=int(arch["hidden_width"]),
        seed=int(payload.get("seed", 0)),
    )
    model = model.with_parameters(flat)
    model.loss_weights = LossWeights(
        rotation=float(weights.get("rotation", 10.0)),
        reconstruction=float(weights.get("reconstruction", 1.0)),
    )
    return model


def save_checkpoint(model: AlignmentModel, path) -> None:
    from pathlib import Path

    Path(path).write_text(checkpoint_to_json(model))


def load_checkpoint(path) -> AlignmentModel:
    from pathlib import Path

    return checkpoint_from_json(Path(path).read_text())


# --- derivative-free oracle --------------------------------------------------


def oracle_estimate(
    augmented_frames: np.ndarray,
    source_frames: np.ndarray,
    sphere: ViewSphere,
    refine: bool = True,
    min_step: float = 1e-4,
) -> CameraAngles:
    """Search the view sphere for the angles minimizing rec_loss, then refine.

    The coarse pass evaluates every vertex (ties broken by lowest vertex
    index); refinement is coordinate descent on (theta, phi) with step
    halving until the step drops below ``min_step`` radians.
    """
    candidates = sphere.vertex_angles()
    costs = [
        rec_loss(source_frames, augmented_frames, view) for view in candidates
    ]
    best_idx = int(np.argmin(costs))
    best = candidates[best_idx]
    best_cost = costs[best_idx]
    if not refine:
        return best

    theta, phi = best.theta, best.phi
    step = 0.2
    while step >= min_step:
        moved = False
        for d_theta, d_phi in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
            cand = CameraAngles(
                wrap_angle(theta + d_theta),
                float(np.clip(phi + d_phi, -np.pi / 2, np.pi / 2)),
            )
            cost = rec_loss(source_frames, augmented_frames, cand)
            if cost < best_cost - 1e-15:
                theta, phi = cand.theta, cand.phi
                best_cost = cost
                moved = True
        if not moved:
            step /= 2.0
    return CameraAngles(theta, phi)
