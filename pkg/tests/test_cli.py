from __future__ import annotations

import json

import numpy as np
import pytest

from skelalign.cli import main
from skelalign.clips import load_dataset, load_views_manifest, save_dataset
from skelalign.evaluate import compute_map  # noqa: F401  (sanity import)


def run(argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def aligned_data(tmp_path):
    out = tmp_path / "aligned"
    code = run(
        [
            "synth", "--out", out, "--classes", "3", "--samples", "3",
            "--noise", "0", "--seed", "0", "--frames", "10", "--aligned",
        ]
    )
    assert code == 0
    return out


def test_synth_writes_dataset(aligned_data):
    records = load_dataset(aligned_data)
    assert len(records) == 9
    assert (aligned_data / "topology.json").exists()
    views = load_views_manifest(aligned_data / "views.json")
    assert all(v.as_tuple() == (0.0, 0.0) for v in views.values())


def test_synth_with_named_classes(tmp_path):
    out = tmp_path / "named"
    assert run(
        [
            "synth", "--out", out, "--classes", "wave,turn", "--samples", "2",
            "--noise", "0.01", "--seed", "1", "--frames", "8",
        ]
    ) == 0
    records = load_dataset(out)
    assert sorted({r.action for r in records}) == ["turn", "wave"]
    assert all(not r.globally_aligned for r in records)


def test_standardize_command(aligned_data, tmp_path):
    out = tmp_path / "std"
    assert run(["standardize", "--data", aligned_data, "--out", out]) == 0
    records = load_dataset(out)
    assert len(records) == 9
    frames = records[0].joints3d
    assert np.abs(frames[:, 0, :]).max() < 1e-9


def test_augment_produces_all_views(tmp_path):
    src = tmp_path / "one"
    assert run(
        [
            "synth", "--out", src, "--classes", "1", "--samples", "1",
            "--noise", "0", "--seed", "0", "--frames", "6", "--aligned",
        ]
    ) == 0
    out = tmp_path / "aug"
    assert run(
        ["augment", "--data", src, "--out", out, "--frequency", "3"]
    ) == 0
    records = load_dataset(out)
    assert len(records) == 92  # one clip rendered from every sphere vertex
    views = load_views_manifest(out / "views.json")
    assert len(views) == 92
    assert len({v.as_tuple() for v in views.values()}) == 92


def test_train_and_model_align(aligned_data, tmp_path, capsys):
    train_out = tmp_path / "run"
    code = run(
        [
            "train-aligner", "--data", aligned_data, "--out", train_out,
            "--frequency", "1", "--train-views", "8", "--epochs", "2",
            "--batch-size", "16", "--learning-rate", "1e-3", "--seed", "0",
        ]
    )
    assert code == 0
    for name in ("checkpoint.json", "history.csv", "loss_curve.png", "view_sphere.png"):
        assert (train_out / name).exists()
    history = (train_out / "history.csv").read_text().strip().split("\n")
    assert history[0] == "epoch,mean_loss,mean_rot,mean_rec"
    assert len(history) == 3

    aug = tmp_path / "aug"
    assert run(["augment", "--data", aligned_data, "--out", aug, "--frequency", "1"]) == 0
    aligned_out = tmp_path / "model_aligned"
    capsys.readouterr()
    code = run(
        [
            "align", "--data", aug, "--out", aligned_out,
            "--model", train_out / "checkpoint.json",
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "angular_error" in printed
    assert "mean angular error" in printed


def test_oracle_align_prints_small_error(tmp_path, capsys):
    src = tmp_path / "viewed"
    assert run(
        [
            "synth", "--out", src, "--classes", "2", "--samples", "2",
            "--noise", "0", "--seed", "3", "--frames", "8",
            "--frequency", "2",
        ]
    ) == 0
    out = tmp_path / "oracle_aligned"
    capsys.readouterr()
    code = run(
        ["align", "--data", src, "--out", out, "--oracle", "--frequency", "2"]
    )
    assert code == 0
    printed = capsys.readouterr().out
    line = [l for l in printed.split("\n") if l.startswith("mean angular error")][0]
    mean_deg = float(line.split(":")[1].replace("deg", "").strip())
    assert mean_deg < 0.5
    records = load_dataset(out)
    assert all(r.globally_aligned for r in records)


def test_align_requires_model_or_oracle(aligned_data, tmp_path):
    assert run(
        ["align", "--data", aligned_data, "--out", tmp_path / "x"]
    ) == 5


def test_evaluate_command(aligned_data, tmp_path, capsys):
    out = tmp_path / "eval"
    code = run(
        [
            "evaluate", "--data", aligned_data, "--out", out,
            "--method", "otam", "--order", "1", "--t-n", "6",
            "--ways", "3", "--shots", "1", "--episodes", "5", "--seed", "0",
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "accuracy" in printed
    report = json.loads((out / "report.json").read_text())
    assert report["accuracy"] == 1.0
    assert (out / "per_class.csv").exists()
    assert (out / "per_class_accuracy.png").exists()


def test_evaluate_too_many_ways_is_config_error(aligned_data, tmp_path):
    code = run(
        [
            "evaluate", "--data", aligned_data, "--out", tmp_path / "x",
            "--ways", "10", "--episodes", "2",
        ]
    )
    assert code == 5


def test_map_command(tmp_path):
    from skelalign.clips import ClipRecord

    def boxes_record(action, index, count):
        frames = np.zeros((count, 17, 2))
        for f in range(count):
            frames[f, :, :] = [f + 5.0, 5.0]
            frames[f, 0] = [f, 0.0]
            frames[f, 1] = [f + 10.0, 10.0]
        return ClipRecord(
            action=action,
            video_id=f"{action}_{index:03d}",
            globally_aligned=True,
            joints2d=frames,
            provenance="test",
        )

    gt_root = tmp_path / "gt"
    pred_root = tmp_path / "pred"
    records = [boxes_record("a", 0, 3), boxes_record("b", 0, 2)]
    save_dataset(records, gt_root)
    save_dataset(records, pred_root)
    out = tmp_path / "map_out"
    code = run(["map", "--gt", gt_root, "--pred", pred_root, "--out", out])
    assert code == 0
    payload = json.loads((out / "map.json").read_text())
    assert payload["mean_ap"] == pytest.approx(100.0)
    assert (out / "map.csv").exists()
    assert (out / "per_class_ap.png").exists()


def test_missing_path_exit_code(tmp_path):
    assert run(
        ["standardize", "--data", tmp_path / "nope", "--out", tmp_path / "o"]
    ) == 3


def test_malformed_clip_exit_code(aligned_data, tmp_path):
    victim = next(aligned_data.glob("*/*.json"))
    victim.write_text('{"format_version": 42}\n')
    assert run(
        ["standardize", "--data", aligned_data, "--out", tmp_path / "o"]
    ) == 4


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["definitely-not-a-command"])
    assert exc.value.code == 2


def test_serve_wires_the_app(aligned_data, monkeypatch):
    import uvicorn

    captured = {}

    def fake_run(app, **kwargs):
        captured["app"] = app
        captured["kwargs"] = kwargs

    monkeypatch.setattr(uvicorn, "run", fake_run)
    assert run(["serve", "--root", aligned_data, "--port", "9000"]) == 0
    assert captured["kwargs"]["port"] == 9000
    assert captured["app"].title == "skelalign annotation service"
