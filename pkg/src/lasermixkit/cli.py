"""Command-line surface: mix, stats, project, synth, train, eval.

Exit codes: 0 success, 2 usage error (argparse), 1 data/config error. Angles
on the command line and in files are degrees; everything internal is radians.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from . import io as lio
from ._backend import BACKEND
from .camera import paint_points, project_points
from .cloud import IGNORE_ID, GridPartition
from .errors import ConfigError, EmptyInputError, FormatError, ValidationError
from .geometry import inclination, make_inclination_partition
from .mixing import (
    MixOutput,
    cutmix_area,
    cutout_area,
    grid_mix,
    laser_mix,
    point_mixup,
    scene_concat,
)
from .model import evaluate
from .priors import class_area_distribution, prior_heatmap
from .simulate import (
    default_prototypes,
    default_scene_template,
    make_benchmark,
    paint_benchmark,
)
from .train import PrototypeScoreProvider, run_semi_supervised


def _pooled_inclination_range(clouds):
    incs = [inclination(c) for c in clouds if len(c)]
    if not incs:
        raise EmptyInputError("cannot derive an inclination range from empty scans")
    pooled = np.concatenate(incs)
    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        lo, hi = lo - 1e-6, hi + 1e-6
    return lo, hi


def _partition_from_args(args, clouds):
    if (args.phi_min is None) != (args.phi_max is None):
        raise ValidationError("provide both --phi-min and --phi-max or neither")
    if args.phi_min is not None:
        lo = float(np.deg2rad(args.phi_min))
        hi = float(np.deg2rad(args.phi_max))
    else:
        lo, hi = _pooled_inclination_range(clouds)
    return make_inclination_partition(lo, hi, args.areas)


def _write_mix_outputs(out, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for tag, cloud in (("a", out.mixed_a), ("b", out.mixed_b)):
        stem = os.path.join(out_dir, f"mixed_{tag}")
        lio.write_scan(cloud, stem + ".bin",
                       stem + ".label" if cloud.labels is not None else None)
    lio.write_provenance_csv(out, os.path.join(out_dir, "provenance.csv"))


def cmd_mix(args):
    scan_a = lio.read_scan(args.scan_a, args.labels_a)
    scan_b = lio.read_scan(args.scan_b, args.labels_b)
    strategy = args.strategy
    if strategy == "lasermix":
        partition = _partition_from_args(args, [scan_a, scan_b])
        out = laser_mix(scan_a, scan_b, partition)
    elif strategy == "grid":
        partition = _partition_from_args(args, [scan_a, scan_b])
        grid = GridPartition(inclination_bounds=partition.bounds,
                             azimuth_count=args.sectors)
        out = grid_mix(scan_a, scan_b, grid)
    elif strategy == "mixup":
        out = point_mixup(scan_a, scan_b, args.ratio, args.seed)
    elif strategy == "cutmix":
        out = cutmix_area(scan_a, scan_b, seed=args.seed)
    elif strategy == "cutout":
        partition = _partition_from_args(args, [scan_a, scan_b])
        kept_a = cutout_area(scan_a, partition, args.drop_parity)
        kept_b = cutout_area(scan_b, partition, args.drop_parity)
        out = MixOutput(
            mixed_a=kept_a,
            mixed_b=kept_b,
            provenance_a=np.zeros(len(kept_a), dtype=np.int8),
            provenance_b=np.ones(len(kept_b), dtype=np.int8),
            partition_used=partition,
        )
    else:  # concat
        out = MixOutput(
            mixed_a=scene_concat(scan_a, scan_b),
            mixed_b=scene_concat(scan_b, scan_a),
            provenance_a=np.concatenate([
                np.zeros(len(scan_a), dtype=np.int8),
                np.ones(len(scan_b), dtype=np.int8),
            ]),
            provenance_b=np.concatenate([
                np.ones(len(scan_b), dtype=np.int8),
                np.zeros(len(scan_a), dtype=np.int8),
            ]),
        )
    _write_mix_outputs(out, args.out_dir)
    print(f"{strategy}: {len(out.mixed_a)} + {len(out.mixed_b)} points -> {args.out_dir}")
    return 0


def cmd_stats(args):
    clouds = lio.load_dataset(args.dataset)
    partition = _partition_from_args(args, clouds)
    report = class_area_distribution(clouds, partition, args.classes)
    os.makedirs(args.out_dir, exist_ok=True)
    lio.write_prior_report_csv(report, os.path.join(args.out_dir, "prior_report.csv"))
    for c in range(args.classes):
        if c == IGNORE_ID:
            continue
        grid = prior_heatmap(clouds, partition, c, args.width, num_classes=args.classes)
        lio.write_pgm(grid, os.path.join(args.out_dir, f"heatmap_class_{c}.pgm"))
    print(f"H(Y)   = {report.marginal_entropy:.6f} nats")
    print(f"H(Y|A) = {report.conditional_entropy:.6f} nats")
    return 0


def cmd_project(args):
    cloud = lio.read_scan(args.scan, args.labels)
    image = lio.read_image(args.image)
    calib = lio.read_calibration(args.calib, image_size=(image.width, image.height))
    corr = project_points(cloud, calib)
    painted = paint_points(cloud, image, corr)
    os.makedirs(args.out_dir, exist_ok=True)
    lio.write_correspondence_csv(corr, os.path.join(args.out_dir, "correspondence.csv"))
    lio.write_painted(painted.painted, os.path.join(args.out_dir, "painted.fmap"))
    print(f"{int(corr.mask.sum())} of {len(cloud)} points fall inside the image")
    return 0


def cmd_synth(args):
    if args.template is None:
        template = default_scene_template()
    else:
        template = lio.read_scene_template(args.template)
    clouds = make_benchmark(template, args.scenes, args.seed)
    if args.paint:
        clouds = paint_benchmark(clouds, camera_height=template.sensor_height,
                                 seed=args.seed)
    lio.save_dataset(clouds, args.out_dir, with_painted=args.paint)
    lio.write_scene_template(template, os.path.join(args.out_dir, "scene_template.ini"))
    print(f"wrote {len(clouds)} scans to {args.out_dir}")
    return 0


def cmd_train(args):
    config = lio.read_train_config(args.config)
    with_painted = config.strategy == "lasermix_pp"
    train_clouds = lio.load_dataset(args.train_dir, with_painted=with_painted)
    val_clouds = None
    if args.val_dir is not None:
        val_clouds = lio.load_dataset(args.val_dir, with_painted=with_painted)
    provider = None
    if with_painted:
        if args.prototypes is not None:
            protos = lio.read_prototypes(args.prototypes)
        else:
            protos = default_prototypes()
        provider = PrototypeScoreProvider(protos)
    result = run_semi_supervised(train_clouds, config, val_clouds=val_clouds,
                                 lkg_provider=provider)
    os.makedirs(args.out_dir, exist_ok=True)
    lio.save_model(result.teacher, os.path.join(args.out_dir, "teacher.fmap"))
    lio.write_loss_log_csv(result.reports, os.path.join(args.out_dir, "loss_log.csv"))
    print(f"trained {config.strategy} for {config.epochs} epochs "
          f"({result.split.labeled_indices.size} labeled / "
          f"{result.split.unlabeled_indices.size} unlabeled scans)")
    if result.val_metrics is not None:
        lio.write_eval_csv(result.val_metrics, os.path.join(args.out_dir, "val_eval.csv"))
        print(f"val miou = {result.val_metrics.miou:.4f}  "
              f"macc = {result.val_metrics.macc:.4f}")
    return 0


def cmd_eval(args):
    params = lio.load_model(args.weights)
    use_painted = params.num_features > 6
    clouds = lio.load_dataset(args.dataset, with_painted=use_painted)
    result = evaluate(params, clouds, params.num_classes, use_painted=use_painted)
    lio.write_eval_csv(result, args.out_csv)
    print(f"miou = {result.miou:.4f}  macc = {result.macc:.4f}")
    return 0


def _add_partition_flags(sub, areas_default=6):
    sub.add_argument("--areas", type=int, default=areas_default,
                     help="number of inclination areas m")
    sub.add_argument("--phi-min", type=float, default=None,
                     help="lowest inclination bound in degrees (default: data minimum)")
    sub.add_argument("--phi-max", type=float, default=None,
                     help="highest inclination bound in degrees (default: data maximum)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lasermixkit",
        description="Scene mixing, spatial-prior analysis, camera painting, "
                    "synthetic scans, and semi-supervised training for "
                    "rotating-beam point clouds.",
    )
    parser.add_argument("--version", action="version",
                        version=f"lasermixkit {__version__} (backend: {BACKEND})")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("mix", help="mix two scans")
    p.add_argument("scan_a")
    p.add_argument("scan_b")
    p.add_argument("out_dir")
    p.add_argument("--labels-a", default=None)
    p.add_argument("--labels-b", default=None)
    p.add_argument("--strategy", default="lasermix",
                   choices=["lasermix", "grid", "mixup", "cutmix", "cutout", "concat"])
    _add_partition_flags(p)
    p.add_argument("--sectors", type=int, default=4,
                   help="azimuth sector count for --strategy grid")
    p.add_argument("--ratio", type=float, default=0.5,
                   help="scan_a routing probability for --strategy mixup")
    p.add_argument("--drop-parity", default="even", choices=["even", "odd"],
                   help="which areas --strategy cutout removes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mix)

    p = subs.add_parser("stats", help="spatial-prior report for a labeled dataset")
    p.add_argument("dataset")
    p.add_argument("out_dir")
    p.add_argument("--classes", type=int, required=True)
    _add_partition_flags(p, areas_default=8)
    p.add_argument("--width", type=int, default=64,
                   help="azimuth columns in the heatmaps")
    p.set_defaults(func=cmd_stats)

    p = subs.add_parser("project", help="project a scan into a camera and paint it")
    p.add_argument("scan")
    p.add_argument("calib")
    p.add_argument("image")
    p.add_argument("out_dir")
    p.add_argument("--labels", default=None)
    p.set_defaults(func=cmd_project)

    p = subs.add_parser("synth", help="generate a synthetic benchmark directory")
    p.add_argument("out_dir")
    p.add_argument("--template", default=None,
                   help="scene template file (omit for the built-in scene)")
    p.add_argument("--scenes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paint", action="store_true",
                   help="also render cameras and attach painted channels")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="run semi-supervised training")
    p.add_argument("config")
    p.add_argument("train_dir")
    p.add_argument("out_dir")
    p.add_argument("--val-dir", default=None)
    p.add_argument("--prototypes", default=None,
                   help="per-class prototype table (FMAP) for the guidance term")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="evaluate saved weights on a labeled dataset")
    p.add_argument("weights")
    p.add_argument("dataset")
    p.add_argument("out_csv")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        lio.lmk_thread_cap()  # validates LMK_THREADS early
        return args.func(args)
    except (ValidationError, FormatError, EmptyInputError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
