"""Command-line entry points for the full pipeline.

Every report-producing subcommand writes its delimited output (CSV/JSON)
next to a rendered figure of the same result, so runs are inspectable
without extra tooling.  Exit codes are distinct per failure class:

    2  usage (argparse)
    3  missing input path
    4  malformed or invalid data (format version, joint counts, values)
    5  configuration rejected (incompatible options, too few classes)
    6  training diverged or a concurrent-edit conflict
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import aligner, clips, evaluate, figures, geometry, synthetic
from .errors import (
    ConfigError,
    MalformedClipError,
    RevisionConflictError,
    SkelalignError,
    TrainingDivergedError,
    ValidationError,
)
from .geometry import CameraAngles
from .skeleton import standardize

logger = logging.getLogger(__name__)

EXIT_MISSING_PATH = 3
EXIT_BAD_DATA = 4
EXIT_BAD_CONFIG = 5
EXIT_RUNTIME = 6


def _parse_classes(text: str) -> list[str] | int:
    try:
        return int(text)
    except ValueError:
        return [name.strip() for name in text.split(",") if name.strip()]


def _load_records(root: str) -> list[clips.ClipRecord]:
    records = clips.load_dataset(root)
    if not records:
        raise ValidationError(f"no clips found under {root}")
    return records


def _renumber(action_counts: dict[str, int], action: str) -> str:
    index = action_counts.get(action, 0)
    action_counts[action] = index + 1
    return f"{action}_{index:03d}"


# --- subcommands --------------------------------------------------------------


def cmd_synth(args) -> int:
    records, views = synthetic.generate_synthetic(
        classes=_parse_classes(args.classes),
        samples_per_class=args.samples,
        noise=args.noise,
        seed=args.seed,
        frames=args.frames,
        randomize_views=not args.aligned,
        sphere=None if args.aligned else geometry.build_view_sphere(args.frequency),
    )
    clips.save_dataset(records, args.out, views=views)
    print(f"wrote {len(records)} clips to {args.out}")
    return 0


def cmd_standardize(args) -> int:
    records = _load_records(args.data)
    topology = clips.load_dataset_topology(args.data)
    out = []
    for record in records:
        seq = standardize(clips.record_to_sequence(record, topology))
        out.append(clips.record_from_sequence(seq, provenance=record.provenance))
    views_path = Path(args.data) / "views.json"
    views = clips.load_views_manifest(views_path) if views_path.exists() else None
    clips.save_dataset(out, args.out, topology=topology, views=views)
    print(f"standardized {len(out)} clips into {args.out}")
    return 0


def cmd_augment(args) -> int:
    records = _load_records(args.data)
    topology = clips.load_dataset_topology(args.data)
    sphere = geometry.build_view_sphere(args.frequency)
    angles = sphere.vertex_angles()
    out: list[clips.ClipRecord] = []
    views: dict[str, CameraAngles] = {}
    counts: dict[str, int] = {}
    for record in records:
        seq = clips.record_to_sequence(record, topology)
        for view in angles:
            rotated = geometry.augment_view(seq, view)
            video_id = _renumber(counts, record.action)
            views[video_id] = view
            out.append(
                clips.ClipRecord(
                    action=record.action,
                    video_id=video_id,
                    globally_aligned=False,
                    joints3d=rotated.frames,
                    provenance=record.provenance,
                )
            )
    clips.save_dataset(out, args.out, topology=topology, views=views)
    print(
        f"wrote {len(out)} clips ({len(angles)} views x {len(records)} inputs) "
        f"to {args.out}"
    )
    return 0


def _training_samples(
    records, topology, train_angles
) -> list[aligner.TrainSample]:
    samples = []
    for record in records:
        source = standardize(clips.record_to_sequence(record, topology))
        for view in train_angles:
            augmented = geometry.augment_view(source, view)
            samples.append(
                aligner.TrainSample(
                    source=source.frames,
                    augmented=augmented.frames,
                    view=view,
                )
            )
    return samples


def cmd_train_aligner(args) -> int:
    records = _load_records(args.data)
    topology = clips.load_dataset_topology(args.data)
    sphere = geometry.build_view_sphere(args.frequency)
    train_idx, test_idx = geometry.split_views(sphere, args.train_views, args.seed)
    train_angles = [
        geometry.angles_from_camera(sphere.vertices[i]) for i in train_idx
    ]
    samples = _training_samples(records, topology, train_angles)
    model = aligner.init_model(
        input_frames=args.input_frames,
        joint_count=topology.joint_count,
        hidden_width=args.hidden,
        seed=args.seed,
    )
    config = aligner.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        seed=args.seed,
        gradient_mode=args.gradient_mode,
    )
    model, history = aligner.train(model, samples, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    aligner.save_checkpoint(model, out / "checkpoint.json")
    (out / "history.csv").write_text(aligner.history_to_csv(history))
    figures.plot_loss_history(history, out / "loss_curve.png")
    figures.plot_view_sphere(sphere, train_idx, test_idx, out / "view_sphere.png")
    first, last = history[0], history[-1]
    print(
        f"trained on {len(samples)} samples for {config.epochs} epochs; "
        f"loss {first[1]:.6f} -> {last[1]:.6f}"
    )
    print(f"checkpoint, history.csv and figures written to {out}")
    return 0


def cmd_align(args) -> int:
    records = _load_records(args.data)
    topology = clips.load_dataset_topology(args.data)
    views_path = Path(args.data) / "views.json"
    true_views = (
        clips.load_views_manifest(views_path) if views_path.exists() else {}
    )

    model = None
    sphere = None
    if args.oracle:
        if not true_views:
            raise ConfigError("oracle mode needs a views.json manifest")
        sphere = geometry.build_view_sphere(args.frequency)
    else:
        if args.model is None:
            raise ConfigError("pass --model PATH or --oracle")
        model = aligner.load_checkpoint(args.model)

    out_records = []
    estimates: dict[str, CameraAngles] = {}
    errors = []
    for record in records:
        seq = standardize(clips.record_to_sequence(record, topology))
        if args.oracle:
            truth = true_views[record.video_id]
            source = geometry.apply_rotation(seq, truth)
            estimate = aligner.oracle_estimate(seq.frames, source.frames, sphere)
        else:
            estimate = aligner.predict_view(model, seq)
        aligned = geometry.apply_rotation(seq, estimate)
        estimates[record.video_id] = estimate
        out_records.append(
            clips.record_from_sequence(aligned, provenance=record.provenance)
        )
        line = (
            f"{record.video_id}: theta={estimate.theta:+.4f} "
            f"phi={estimate.phi:+.4f}"
        )
        if record.video_id in true_views:
            err = aligner.angular_error(estimate, true_views[record.video_id])
            errors.append(err)
            line += f" angular_error={np.degrees(err):.4f} deg"
        print(line)
    clips.save_dataset(out_records, args.out, topology=topology, views=estimates)
    if errors:
        print(f"mean angular error: {np.degrees(np.mean(errors)):.4f} deg")
    print(f"aligned {len(out_records)} clips into {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    records = _load_records(args.data)
    topology = clips.load_dataset_topology(args.data)
    t_n = None if args.t_n == "none" else int(args.t_n)
    config = evaluate.EvalConfig(
        method=args.method,
        order=args.order,
        t_n=t_n,
        ways=args.ways,
        shots=args.shots,
        episodes=args.episodes,
        seed=args.seed,
        align=args.align,
    )
    views = None
    sphere = None
    model = None
    if args.align == "oracle":
        views_path = Path(args.data) / "views.json"
        if not views_path.exists():
            raise ConfigError("oracle alignment needs a views.json manifest")
        views = clips.load_views_manifest(views_path)
        sphere = geometry.build_view_sphere(args.frequency)
    elif args.align == "model":
        if args.model is None:
            raise ConfigError("model alignment needs --model PATH")
        model = aligner.load_checkpoint(args.model)

    report = evaluate.run_evaluation(
        records, config, topology, views=views, model=model, sphere=sphere
    )
    print(evaluate.report_to_table(report), end="")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(evaluate.report_to_json(report))
    (out / "per_class.csv").write_text(evaluate.per_class_csv(report))
    figures.plot_per_class_accuracy(report, out / "per_class_accuracy.png")
    print(f"report.json, per_class.csv and figure written to {out}")
    return 0


def cmd_map(args) -> int:
    gt = _load_records(args.gt)
    pred = _load_records(args.pred)
    confidences = None
    if args.confidences is not None:
        raw = json.loads(Path(args.confidences).read_text())
        confidences = {
            video_id: np.asarray(values, dtype=np.float64)
            for video_id, values in raw.items()
        }
    report = evaluate.compute_map(
        gt, pred, iou_threshold=args.iou, confidences=confidences
    )
    for action in sorted(report.per_class):
        print(f"{action}: AP {report.per_class[action]:.2f}")
    print(f"mAP@{report.iou_threshold:g}: {report.mean_ap:.2f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "map.json").write_text(evaluate.map_report_to_json(report))
    (out / "map.csv").write_text(evaluate.map_report_to_csv(report))
    figures.plot_per_class_ap(report, out / "per_class_ap.png")
    print(f"map.json, map.csv and figure written to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.root, model_path=args.model, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelalign",
        description="4D skeleton alignment and few-shot action recognition.",
    )
    parser.add_argument(
        "--verbose", action="store_true", help="enable debug logging"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", default="6", help="count or comma-separated names")
    p.add_argument("--samples", type=int, default=20, help="clips per class")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--frequency", type=int, default=3, help="view sphere frequency")
    p.add_argument(
        "--aligned", action="store_true", help="skip the random view rotation"
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("standardize", help="standardize every clip of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("augment", help="render every clip from all sphere views")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frequency", type=int, default=3)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train-aligner", help="train the view-alignment network")
    p.add_argument("--data", required=True, help="dataset of aligned clips")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frequency", type=int, default=3)
    p.add_argument("--train-views", type=int, default=73)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--weight-decay", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-frames", type=int, default=8)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument(
        "--gradient-mode", choices=("full", "rotation"), default="full"
    )
    p.set_defaults(func=cmd_train_aligner)

    p = sub.add_parser("align", help="rotate clips back to the canonical view")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="alignment checkpoint")
    p.add_argument(
        "--oracle",
        action="store_true",
        help="estimate views by sphere search against the manifest",
    )
    p.add_argument("--frequency", type=int, default=3)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("evaluate", help="episodic few-shot evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("mean", "dtw", "otam"), default="dtw")
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=1)
    p.add_argument("--t-n", default="8", help="frames per sampled clip, or 'none'")
    p.add_argument("--ways", type=int, default=5)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--align", choices=("none", "oracle", "model"), default="none")
    p.add_argument("--model", help="checkpoint for --align model")
    p.add_argument("--frequency", type=int, default=3)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("map", help="bbox mAP of predicted 2D joints")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--confidences", help="JSON of per-frame detector scores")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--root", required=True, help="dataset directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--model", help="alignment checkpoint for previews")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_PATH
    except (MalformedClipError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (TrainingDivergedError, RevisionConflictError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SkelalignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA


if __name__ == "__main__":
    sys.exit(main())
