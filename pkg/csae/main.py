import argparse
import sys
from pathlib import Path

import numpy as np

from csae import config
from csae.checkpoint import load_checkpoint, save_checkpoint
from csae.classifiers.pipeline import extract_latent, pipeline_classify, raw_pixel_classify
from csae.data import (
    LabeledDataset,
    SplitSpec,
    load_idx,
    load_idx_images,
    prepare_images,
    split,
    subset,
    write_latent_csv,
)
from csae.errors import CsaeError
from csae.gradcheck import run_gradcheck_suite
from csae.logger import RunLogger
from csae.network import build_csae, count_parameters, encode, make_preset
from csae.optim import LrSchedule
from csae.trainer import TrainConfig, evaluate, train
from csae.utils import get_output_path
from csae.viz import (
    decision_boundary_image,
    decoder_grid_image,
    export_latent_scatter,
    grid_from_latents,
    require_latent_2d,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class CsaeArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags():
    common = CsaeArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="Save a detailed per-batch report")
    common.add_argument("--log-dir", type=Path, default=None, help="Directory for run logs and reports")
    common.add_argument("--seed", type=int, default=config.TRAINING["seed"], help="Random seed")
    return common


def _data_flags(parser, labels_required=True):
    parser.add_argument("--images", type=Path, required=True, help="IDX image file (plain or .gz)")
    parser.add_argument("--labels", type=Path, required=labels_required, help="IDX label file (plain or .gz)")


def _test_flags(parser):
    parser.add_argument("--test-images", type=Path, help="IDX test image file")
    parser.add_argument("--test-labels", type=Path, help="IDX test label file")


def build_parser():
    parser = CsaeArgumentParser(
        prog="csae",
        description="Convolutional Supervised Autoencoder: training, latent-space classifiers and visualizations.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True
    common = _common_flags()

    p = commands.add_parser("train", parents=[common], help="Train a CSAE with the alternating protocol")
    _data_flags(p)
    _test_flags(p)
    p.add_argument("--preset", choices=list(config.ARCH_PRESETS), default="small28", help="Architecture preset")
    p.add_argument("--lambda", dest="latent_dim", type=int, default=config.TRAINING["latent_dim"], help="Latent dimension")
    p.add_argument("--epochs", type=int, default=config.TRAINING["epochs"], help="Training epochs")
    p.add_argument("--batch-size", type=int, default=config.TRAINING["batch_size"], help="Batch size")
    p.add_argument(
        "--update-mode", choices=config.UPDATE_MODES, default=config.TRAINING["update_mode"],
        help="joint: classification updates head and encoder; head_only: head only",
    )
    p.add_argument("--val-fraction", type=float, default=config.SPLITS["val_fraction"], help="Validation fraction of the training set")
    p.add_argument("--test-fraction", type=float, help="Hold out this fraction as test set when no test files are given")
    p.add_argument("--subset", type=int, help="Train on the first N samples of a seeded shuffle")
    p.add_argument("--lr", type=float, default=config.LR_SCHEDULE["base"], help="Base learning rate")
    p.add_argument("--no-conv-bias", action="store_true", help="Convolutions without bias")
    p.add_argument("--checkpoint", "--out", dest="checkpoint", type=Path, help="Output checkpoint path")

    p = commands.add_parser("eval", parents=[common], help="Evaluate a checkpoint on a labeled set")
    _data_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True, help="CSAE checkpoint")
    p.add_argument("--batch-size", type=int, default=config.TRAINING["eval_batch_size"], help="Evaluation batch size")

    p = commands.add_parser("extract-latent", parents=[common], help="Export latent codes as CSV")
    _data_flags(p, labels_required=False)
    p.add_argument("--checkpoint", type=Path, required=True, help="CSAE checkpoint")
    p.add_argument("--out", type=Path, help="Output CSV path")
    p.add_argument("--with-predictions", action="store_true", help="Write the scatter table with true and predicted labels")

    p = commands.add_parser("classify-latent", parents=[common], help="Fit a classical classifier on latent codes")
    _data_flags(p)
    _test_flags(p)
    p.add_argument("--checkpoint", type=Path, help="CSAE checkpoint (not needed with --raw)")
    p.add_argument("--method", choices=["knn", "gnb", "svm"], required=True, help="Classifier")
    p.add_argument("--k", type=int, default=config.CLASSIFIERS["knn"]["n_neighbors"], help="Neighbors for knn")
    p.add_argument("--standardize-latent", action="store_true", help="Standardize latent codes with training statistics")
    p.add_argument(
        "--svm-max-samples", type=int, default=config.CLASSIFIERS["svm"]["max_samples"],
        help="Fit the svm on a seeded subset of at most N rows (default: all rows)",
    )
    p.add_argument("--raw", action="store_true", help="Classify standardized raw pixels instead of latent codes")
    p.add_argument("--preset", choices=list(config.ARCH_PRESETS), default="small28", help="Image side for --raw")
    p.add_argument("--subset", type=int, help="Fit on the first N samples of a seeded shuffle")

    p = commands.add_parser("viz-boundary", parents=[common], help="Decision-boundary image of a lambda=2 model")
    _data_flags(p, labels_required=False)
    p.add_argument("--checkpoint", type=Path, required=True, help="CSAE checkpoint")
    p.add_argument("--resolution", type=int, default=config.GRID["boundary_resolution"], help="Pixels per axis")
    p.add_argument("--overlay", action="store_true", help="Draw the samples in their true-class colors (needs --labels)")
    p.add_argument("--out", type=Path, help="Output PPM path")

    p = commands.add_parser("viz-decoder-grid", parents=[common], help="Mosaic decoded from a latent grid")
    p.add_argument("--images", type=Path, required=True, help="IDX image file whose latents span the grid")
    p.add_argument("--checkpoint", type=Path, required=True, help="CSAE checkpoint")
    p.add_argument("--points", type=int, default=config.GRID["decoder_points"], help="Grid points per axis")
    p.add_argument("--tile", type=int, help="Tile size in pixels (default: image side)")
    p.add_argument("--out", type=Path, help="Output PGM path")

    p = commands.add_parser("gradcheck", parents=[common], help="Finite-difference check of every backward pass")
    p.add_argument("--seeds", type=int, default=config.GRADCHECK["seeds"], help="Random seeds per case")
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    validate_args(parser, args)
    return args


def _load(images, labels, side, logger) -> LabeledDataset:
    if labels is None:
        # unlabeled images get placeholder labels
        array = load_idx_images(images)
        logger.log(f"Loaded {len(array)} unlabeled images from {images}")
        return LabeledDataset(prepare_images(array, side), np.zeros(len(array), dtype=np.int64))
    raw = load_idx(images, labels, logger)
    return LabeledDataset(prepare_images(raw.images, side), raw.labels)


def validate_args(parser, args):
    """Cross-flag rules argparse cannot express; violations are usage errors."""
    if args.command == "classify-latent":
        if not (args.test_images and args.test_labels):
            parser.error("classify-latent needs --test-images and --test-labels")
        if not args.raw and not args.checkpoint:
            parser.error("classify-latent needs --checkpoint unless --raw is given")
    if args.command == "extract-latent" and args.with_predictions and not args.labels:
        parser.error("--with-predictions needs --labels")
    if args.command == "viz-boundary" and args.overlay and not args.labels:
        parser.error("--overlay needs --labels")
    if args.command == "train" and bool(args.test_images) != bool(args.test_labels):
        parser.error("--test-images and --test-labels go together")


def _report_metrics(logger, prefix, metrics: dict):
    for name, value in metrics.items():
        logger.log(f"{prefix} {name}: {value:.4f}")
    for name, value in metrics.items():
        logger.metric(f"{prefix}_{name}", round(float(value), 6))


def _log_parameters(logger, model):
    counts = count_parameters(model)
    logger.log(
        f"Parameters: encoder {counts['encoder']:,}, decoder {counts['decoder']:,}, "
        f"classifier {counts['classifier']:,}, deployed {counts['deployed']:,}, total {counts['total']:,}"
    )


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_train(args, logger):
    side = config.ARCH_PRESETS[args.preset]["input_side"]
    train_set = _load(args.images, args.labels, side, logger)
    test_set = val_set = None
    if args.test_images:
        test_set = _load(args.test_images, args.test_labels, side, logger)
    elif args.test_fraction:
        train_set, val_set, test_set = split(
            train_set, SplitSpec(val_fraction=args.val_fraction, test_fraction=args.test_fraction, seed=args.seed)
        )
        logger.log(f"Split {len(train_set)} train / {len(val_set)} validation / {len(test_set)} test samples")
    if args.subset:
        train_set = subset(train_set, min(args.subset, len(train_set)), args.seed)
        logger.log(f"Training subset: {len(train_set)} samples")

    num_classes = max(train_set.num_classes, test_set.num_classes if test_set else 0)
    preset = make_preset(args.preset, args.latent_dim, num_classes, conv_bias=not args.no_conv_bias)
    model = build_csae(preset, seed=args.seed)
    _log_parameters(logger, model)

    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        latent_dim=args.latent_dim,
        seed=args.seed,
        lr_schedule=LrSchedule(base=args.lr),
        update_mode=args.update_mode,
        val_fraction=args.val_fraction,
    )
    best, report = train(model, train_set, train_config, val_set=val_set, logger=logger)

    checkpoint = args.checkpoint or Path(f"csae_{args.preset}_lambda{args.latent_dim}.csae")
    save_checkpoint(best, checkpoint, logger)
    report_path = report.to_csv(get_output_path(checkpoint, "report.csv"))
    logger.log(f"Training report saved to: {report_path}")
    logger.metric("best_epoch", report.best_epoch)
    logger.metric("best_val_accuracy", round(report.best_val_accuracy, 6))

    if test_set is not None:
        result = evaluate(best, test_set)
        _report_metrics(logger, "test", {"accuracy": result.accuracy, "weighted_f1": result.weighted_f1})
    return EXIT_OK


def cmd_eval(args, logger):
    model = load_checkpoint(args.checkpoint, logger)
    _log_parameters(logger, model)
    dataset = _load(args.images, args.labels, model.preset.input_side, logger)
    result = evaluate(model, dataset, args.batch_size)
    _report_metrics(
        logger,
        "eval",
        {
            "accuracy": result.accuracy,
            "weighted_f1": result.weighted_f1,
            "recon_loss": result.recon_loss,
            "cls_loss": result.cls_loss,
        },
    )
    return EXIT_OK


def cmd_extract_latent(args, logger):
    model = load_checkpoint(args.checkpoint, logger)
    dataset = _load(args.images, args.labels, model.preset.input_side, logger)
    if args.with_predictions:
        out = args.out or get_output_path(args.checkpoint, "scatter.csv")
        export_latent_scatter(model, dataset, out, logger=logger)
        return EXIT_OK

    latents = extract_latent(model, dataset.images, dataset.labels if args.labels else None)
    out = write_latent_csv(args.out or get_output_path(args.checkpoint, "latent.csv"), latents)
    logger.log(f"Latent codes {latents.z.shape} saved to: {out}")
    return EXIT_OK


def cmd_classify_latent(args, logger):
    model = None if args.raw else load_checkpoint(args.checkpoint, logger)
    side = config.ARCH_PRESETS[args.preset]["input_side"] if args.raw else model.preset.input_side
    train_set = _load(args.images, args.labels, side, logger)
    test_set = _load(args.test_images, args.test_labels, side, logger)
    if args.subset:
        train_set = subset(train_set, min(args.subset, len(train_set)), args.seed)

    params = {"n_neighbors": args.k} if args.method == "knn" else {}
    if args.method == "svm":
        params["random_state"] = args.seed
        params["max_samples"] = args.svm_max_samples
    if args.raw:
        result = raw_pixel_classify(
            train_set.images, train_set.labels, test_set.images, args.method, test_set.labels, params, logger
        )
    else:
        result = pipeline_classify(
            model,
            train_set.images,
            train_set.labels,
            test_set.images,
            args.method,
            test_labels=test_set.labels,
            standardize_latent=args.standardize_latent,
            params=params,
            logger=logger,
        )
    _report_metrics(logger, f"{result.features}_{result.method}", result.metrics.as_dict())
    return EXIT_OK


def cmd_viz_boundary(args, logger):
    model = load_checkpoint(args.checkpoint, logger)
    # fail before touching the images
    require_latent_2d(model, "A decision-boundary image")
    dataset = _load(args.images, args.labels, model.preset.input_side, logger)
    z = encode(model, dataset.images, batch_size=config.TRAINING["eval_batch_size"])
    grid = grid_from_latents(z, resolution=args.resolution)
    out = args.out or get_output_path(args.checkpoint, "boundary.ppm")
    image = decision_boundary_image(
        model, z, out, grid=grid, overlay=(z, dataset.labels) if args.overlay else None, logger=logger
    )
    logger.log(f"Classes on the grid: {sorted(set(image.predictions.ravel().tolist()))}")
    return EXIT_OK


def cmd_viz_decoder_grid(args, logger):
    model = load_checkpoint(args.checkpoint, logger)
    require_latent_2d(model, "A decoder grid")
    dataset = _load(args.images, None, model.preset.input_side, logger)
    z = encode(model, dataset.images, batch_size=config.TRAINING["eval_batch_size"])
    out = args.out or get_output_path(args.checkpoint, "decoder_grid.pgm")
    decoder_grid_image(model, grid_from_latents(z), out, points=args.points, tile=args.tile, logger=logger)
    return EXIT_OK


def cmd_gradcheck(args, logger):
    results = run_gradcheck_suite(args.seeds, logger)
    failed = [r for r in results if not r.passed]
    logger.metric("gradcheck_cases", len(results))
    logger.metric("gradcheck_failures", len(failed))
    return EXIT_OK if not failed else EXIT_RUNTIME


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "extract-latent": cmd_extract_latent,
    "classify-latent": cmd_classify_latent,
    "viz-boundary": cmd_viz_boundary,
    "viz-decoder-grid": cmd_viz_decoder_grid,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.log_dir is not None:
        logger = RunLogger(verbose=args.verbose, log_dir=args.log_dir, report_dir=args.log_dir)
    else:
        logger = RunLogger(verbose=args.verbose)
    logger.log(f"Command: {args.command}")

    try:
        code = COMMANDS[args.command](args, logger)
    except (CsaeError, OSError) as e:
        logger.log(f"{e.__class__.__name__}: {e}", level="ERROR")
        code = EXIT_RUNTIME
    finally:
        logger.cleanup()
    return code


if __name__ == "__main__":
    raise SystemExit(main())
