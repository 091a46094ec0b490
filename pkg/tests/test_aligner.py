from __future__ import annotations

import logging

import numpy as np
import pytest

from skelalign.aligner import (
    AlignmentModel,
    LossWeights,
    TrainConfig,
    TrainSample,
    _batched_rotations,
    align_sequence,
    angular_error,
    batch_loss_and_gradients,
    checkpoint_from_json,
    checkpoint_to_json,
    history_to_csv,
    init_model,
    load_checkpoint,
    oracle_estimate,
    predict_view,
    prepare_window,
    rec_loss,
    rot_loss,
    save_checkpoint,
    total_loss,
    train,
)
from skelalign.errors import (
    ConfigError,
    FormatVersionError,
    TrainingDivergedError,
)
from skelalign.geometry import (
    CameraAngles,
    augment_view,
    build_view_sphere,
    rotation_derivatives,
    rotation_from_angles,
)
from skelalign.skeleton import standardize

from conftest import random_angles, random_sequence


def small_model(seed: int = 0) -> AlignmentModel:
    return init_model(input_frames=4, joint_count=17, hidden_width=8, seed=seed)


def make_samples(rng, count: int, model: AlignmentModel) -> list[TrainSample]:
    samples = []
    for i in range(count):
        source = standardize(random_sequence(rng, frames=model.input_frames))
        view = random_angles(rng)
        augmented = augment_view(source, view)
        samples.append(
            TrainSample(
                source=source.frames, augmented=augmented.frames, view=view
            )
        )
    return samples


def test_prepare_window_truncates_and_pads():
    frames = np.arange(6 * 17 * 3, dtype=np.float64).reshape(6, 17, 3)
    assert prepare_window(frames, 4).shape == (4, 17, 3)
    assert np.array_equal(prepare_window(frames, 6), frames)
    padded = prepare_window(frames, 9)
    assert padded.shape == (9, 17, 3)
    for f in range(6, 9):
        assert np.array_equal(padded[f], frames[-1])


def test_predict_view_in_range(rng):
    model = small_model()
    for trial in range(10):
        seq = standardize(random_sequence(rng, frames=4))
        view = predict_view(model, seq)
        assert -np.pi < view.theta <= np.pi
        assert -np.pi / 2 <= view.phi <= np.pi / 2


def test_degenerate_outputs_fall_back_to_zero(rng, caplog):
    model = small_model()
    zeroed = model.with_parameters(np.zeros_like(model.parameter_vector()))
    seq = standardize(random_sequence(rng, frames=4))
    with caplog.at_level(logging.WARNING):
        view = predict_view(zeroed, seq)
    assert view.theta == 0.0 and view.phi == 0.0
    assert "degenerate" in caplog.text


def test_rot_loss_hand_case():
    assert rot_loss(CameraAngles(np.pi, 0.0), CameraAngles(0.0, 0.0)) == pytest.approx(
        2.0
    )


def test_rot_loss_zero_at_equality(rng):
    for trial in range(10):
        view = random_angles(rng)
        assert rot_loss(view, view) == pytest.approx(0.0, abs=1e-15)


def test_rec_loss_zero_at_true_view(rng):
    source = standardize(random_sequence(rng, frames=5))
    view = random_angles(rng)
    augmented = augment_view(source, view)
    assert rec_loss(source.frames, augmented.frames, view) < 1e-12
    other = CameraAngles(view.theta + 0.5 if view.theta < 2.0 else view.theta - 0.5, view.phi)
    assert rec_loss(source.frames, augmented.frames, other) > 1e-3


def test_total_loss_is_weighted_sum(rng):
    source = standardize(random_sequence(rng, frames=5))
    view = random_angles(rng)
    pred = random_angles(rng)
    augmented = augment_view(source, view)
    expected = 10.0 * rot_loss(pred, view) + rec_loss(
        source.frames, augmented.frames, pred
    )
    assert total_loss(pred, view, source.frames, augmented.frames) == pytest.approx(
        expected
    )


def test_angular_error_quarter_turn():
    assert angular_error(
        CameraAngles(0.0, 0.0), CameraAngles(np.pi / 2, 0.0)
    ) == pytest.approx(np.pi / 2)
    view = CameraAngles(0.3, -0.2)
    assert angular_error(view, view) == pytest.approx(0.0, abs=1e-9)


def test_batched_rotations_match_single(rng):
    thetas = rng.uniform(-np.pi, np.pi, size=12)
    phis = rng.uniform(-np.pi / 2, np.pi / 2, size=12)
    r, dt, dp = _batched_rotations(thetas, phis)
    for i in range(12):
        r1, dt1, dp1 = rotation_derivatives(CameraAngles(thetas[i], phis[i]))
        assert np.abs(r[i] - r1).max() < 1e-12
        assert np.abs(dt[i] - dt1).max() < 1e-12
        assert np.abs(dp[i] - dp1).max() < 1e-12


def test_batch_loss_matches_per_sample_reference(rng):
    # independent per-sample recomputation: normalized pairs for the rotation
    # term, rodrigues-built matrices for the reconstruction term
    from skelalign.geometry import rodrigues
    from skelalign.aligner import _forward, _prepare_samples

    model = small_model()
    samples = make_samples(rng, 6, model)
    inputs, targets, sources, augmented = _prepare_samples(samples, 4)
    loss, rot_term, rec_term, _ = batch_loss_and_gradients(
        model, inputs, targets, sources, augmented, LossWeights(), "full"
    )
    rots, recs = [], []
    for i, sample in enumerate(samples):
        _, y = _forward(model, inputs[i])
        ct, st = y[0] / np.hypot(y[0], y[1]), y[1] / np.hypot(y[0], y[1])
        cp, sp = y[2] / np.hypot(y[2], y[3]), y[3] / np.hypot(y[2], y[3])
        gt_t, gt_p = sample.view.theta, sample.view.phi
        rots.append(
            np.mean([(ct - np.cos(gt_t)) ** 2, (cp - np.cos(gt_p)) ** 2])
            + np.mean([(st - np.sin(gt_t)) ** 2, (sp - np.sin(gt_p)) ** 2])
        )
        theta = np.arctan2(y[1], y[0])
        phi = np.arctan2(y[3], y[2])
        r1 = rodrigues(np.array([0.0, -1.0, 0.0]), theta)
        axis = np.array([np.cos(theta), 0.0, np.sin(theta)])
        r = rodrigues(axis, phi) @ r1
        rendered = np.einsum("ji,fkj->fki", r, sources[i])
        recs.append(np.sqrt(np.mean((rendered - augmented[i]) ** 2)))
    assert rot_term == pytest.approx(np.mean(rots), rel=1e-9)
    assert rec_term == pytest.approx(np.mean(recs), rel=1e-9)
    assert loss == pytest.approx(10.0 * np.mean(rots) + np.mean(recs), rel=1e-9)


def _fd_slice(fn, params: np.ndarray, indices: np.ndarray, step: float):
    grads = []
    for idx in indices:
        plus = params.copy()
        plus[idx] += step
        minus = params.copy()
        minus[idx] -= step
        grads.append((fn(plus) - fn(minus)) / (2.0 * step))
    return np.array(grads)


@pytest.mark.parametrize("mode", ["full", "rotation"])
def test_gradient_matches_finite_differences(rng, mode):
    model = small_model(seed=3)
    samples = make_samples(rng, 5, model)
    from skelalign.aligner import _prepare_samples

    inputs, targets, sources, augmented = _prepare_samples(samples, 4)
    weights = LossWeights()
    params = model.parameter_vector()
    _, _, _, grad = batch_loss_and_gradients(
        model, inputs, targets, sources, augmented, weights, mode
    )

    def objective(p: np.ndarray) -> float:
        loss, rot_term, rec_term, _ = batch_loss_and_gradients(
            model.with_parameters(p),
            inputs,
            targets,
            sources,
            augmented,
            weights,
            mode,
        )
        if mode == "rotation":
            return weights.rotation * rot_term
        return loss

    indices = rng.choice(params.size, size=10, replace=False)
    fd = _fd_slice(objective, params, indices, step=1e-5)
    analytic = grad[indices]
    denom = np.maximum(np.abs(fd), 1e-8)
    rel = np.abs(analytic - fd) / denom
    assert rel.max() < 1e-4


def test_gradient_mode_validation(rng):
    model = small_model()
    samples = make_samples(rng, 2, model)
    from skelalign.aligner import _prepare_samples

    inputs, targets, sources, augmented = _prepare_samples(samples, 4)
    with pytest.raises(ConfigError):
        batch_loss_and_gradients(
            model, inputs, targets, sources, augmented, LossWeights(), "both"
        )


def test_train_decreases_loss_and_is_deterministic(rng):
    model = small_model(seed=1)
    samples = make_samples(rng, 24, model)
    config = TrainConfig(epochs=8, batch_size=8, learning_rate=3e-3, seed=7)
    trained_a, history_a = train(model, samples, config)
    trained_b, history_b = train(model, samples, config)
    assert history_a[-1][1] < history_a[0][1]
    assert history_a == history_b
    assert np.array_equal(
        trained_a.parameter_vector(), trained_b.parameter_vector()
    )
    assert [row[0] for row in history_a] == list(range(1, 9))


def test_train_rejects_empty():
    with pytest.raises(ConfigError):
        train(small_model(), [], TrainConfig(epochs=1))


def test_train_diverged_on_nonfinite_input(rng):
    model = small_model()
    samples = make_samples(rng, 3, model)
    bad = samples[0].source.copy()
    bad[0, 0, 0] = np.nan
    samples[0] = TrainSample(
        source=bad, augmented=samples[0].augmented, view=samples[0].view
    )
    with pytest.raises(TrainingDivergedError):
        train(model, samples, TrainConfig(epochs=1, batch_size=4))


def test_history_csv_layout():
    text = history_to_csv([(1, 0.5, 0.04, 0.1), (2, 0.25, 0.02, 0.05)])
    lines = text.strip().split("\n")
    assert lines[0] == "epoch,mean_loss,mean_rot,mean_rec"
    assert len(lines) == 3
    assert lines[1].startswith("1,0.5")


def test_checkpoint_round_trip(tmp_path):
    model = small_model(seed=5)
    text = checkpoint_to_json(model)
    back = checkpoint_from_json(text)
    assert checkpoint_to_json(back) == text
    assert np.array_equal(back.parameter_vector(), model.parameter_vector())
    assert back.input_frames == model.input_frames
    assert back.hidden_width == model.hidden_width

    path = tmp_path / "ckpt.json"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert np.array_equal(
        loaded.parameter_vector(), model.parameter_vector()
    )


def test_checkpoint_version_mismatch():
    import json

    payload = json.loads(checkpoint_to_json(small_model()))
    payload["format_version"] = 99
    with pytest.raises(FormatVersionError):
        checkpoint_from_json(json.dumps(payload))


def test_align_sequence_applies_one_rotation(rng):
    model = small_model()
    seq = standardize(random_sequence(rng, frames=6))
    aligned, view = align_sequence(model, seq)
    r = rotation_from_angles(view)
    expected = np.einsum("ij,fkj->fki", r, seq.frames)
    assert np.abs(aligned.frames - expected).max() < 1e-12
    assert aligned.aligned is True
    # relative motion between frames rotates rigidly with the same R
    rel_before = seq.frames[3] - seq.frames[1]
    rel_after = aligned.frames[3] - aligned.frames[1]
    assert np.abs(rel_after - rel_before @ r.T).max() < 1e-12


def test_oracle_estimate_exact_at_vertices(rng):
    sphere = build_view_sphere(2)
    source = standardize(random_sequence(rng, frames=5))
    for vertex in (0, 7, 23, 41):
        view = sphere.vertex_angles()[vertex]
        augmented = augment_view(source, view)
        estimate = oracle_estimate(
            augmented.frames, source.frames, sphere, refine=False
        )
        assert angular_error(estimate, view) < 1e-3


def test_oracle_estimate_refines_random_views(rng):
    sphere = build_view_sphere(3)
    source = standardize(random_sequence(rng, frames=5))
    for trial in range(5):
        view = random_angles(rng)
        augmented = augment_view(source, view)
        estimate = oracle_estimate(augmented.frames, source.frames, sphere)
        assert np.degrees(angular_error(estimate, view)) < 0.5
