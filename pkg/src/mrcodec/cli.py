"""Command-line interface: encode, decode, eval, train, curves.

Exit codes: 0 success, 2 usage error, 3 data/model error.
"""

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _default_model_path(explicit):
    if explicit:
        return explicit
    model_dir = os.environ.get("MRC_MODEL_DIR")
    if model_dir:
        candidate = Path(model_dir) / "ckpt-final.pt"
        if candidate.exists():
            return str(candidate)
        raise FileNotFoundError(f"no ckpt-final.pt under MRC_MODEL_DIR={model_dir}")
    raise FileNotFoundError("no --model given and MRC_MODEL_DIR is not set")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mrcodec",
        description="Learned image codec with a receiver-side realism knob.")
    sub = parser.add_subparsers(dest="command", required=True)

    enc = sub.add_parser("encode", help="compress an image to a bitstream")
    enc.add_argument("--input", required=True)
    enc.add_argument("--model")
    enc.add_argument("--output", required=True)

    dec = sub.add_parser("decode", help="reconstruct an image at a chosen realism weight")
    dec.add_argument("--input", required=True)
    dec.add_argument("--model")
    dec.add_argument("--beta", type=float, default=0.0)
    dec.add_argument("--output", required=True)

    ev = sub.add_parser("eval", help="PSNR/realism metrics over paired directories")
    ev.add_argument("--real", required=True)
    ev.add_argument("--recon", required=True)
    ev.add_argument("--output", required=True, help="metrics CSV path")
    ev.add_argument("--patch-size", type=int, default=256)
    ev.add_argument("--label", default="eval")

    tr = sub.add_parser("train", help="run a training preset")
    tr.add_argument("--preset", default="multi_realism",
                    choices=["mse_baseline", "gan_baseline", "multi_realism"])
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--runs", default="runs")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--name")
    tr.add_argument("--lambda", dest="lambda_", type=float)
    tr.add_argument("--crop", type=int)
    tr.add_argument("--batch-size", type=int)
    tr.add_argument("--seed", type=int)

    cv = sub.add_parser("curves", help="plot rate/distortion/realism curves from a CSV")
    cv.add_argument("--input", required=True)
    cv.add_argument("--out-dir", required=True)

    return parser


def cmd_encode(args):
    from .codec import compress_file
    from .model import load_model

    model = load_model(_default_model_path(args.model))
    result = compress_file(args.input, args.output, model)
    print(f"{args.output}: {len(result.data)} bytes, {result.bpp:.4f} bpp")
    return EXIT_OK


def cmd_decode(args):
    from .conditioning import BETA_MAX_INFER

    if not 0.0 <= args.beta <= BETA_MAX_INFER:
        raise UsageError(
            f"--beta must lie in [0, {BETA_MAX_INFER}] (got {args.beta})")

    from .codec import decompress_file
    from .model import load_model

    model = load_model(_default_model_path(args.model))
    result = decompress_file(args.input, args.output, args.beta, model)
    h, w = result.image.shape[:2]
    print(f"{args.output}: {w}x{h}, beta={args.beta:g}, {result.bpp:.4f} bpp")
    return EXIT_OK


def cmd_eval(args):
    import csv as _csv
    import numpy as np

    from . import metrics
    from .data import list_images, load_image

    real_paths = list_images(args.real)
    recon_paths = list_images(args.recon)
    by_name = {p.name: p for p in recon_paths}
    missing = [p.name for p in real_paths if p.name not in by_name]
    if missing:
        raise DataError(f"recon dir missing {len(missing)} files, e.g. {missing[0]}")

    psnrs = []
    for rp in real_paths:
        a = load_image(rp)
        b = load_image(by_name[rp.name])
        psnrs.append(metrics.psnr_for_csv(metrics.psnr(a, b)))
    try:
        fid = metrics.patched_fid(args.real, args.recon, patch_size=args.patch_size)
    except metrics.MetricsError as e:
        raise DataError(str(e)) from e

    with open(args.output, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["label", "num_images", "mean_psnr_db", "fid"])
        writer.writerow([args.label, len(psnrs), repr(float(np.mean(psnrs))), repr(fid)])
    print(f"{args.label}: {len(psnrs)} images, "
          f"PSNR {np.mean(psnrs):.2f} dB, realism {fid:.4f}")
    return EXIT_OK


def cmd_train(args):
    from .training import preset, run_experiment

    overrides = {}
    if args.name:
        overrides["name"] = args.name
    if args.lambda_ is not None:
        overrides["lambda_"] = args.lambda_
    if args.crop is not None:
        overrides["crop"] = args.crop
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    config = preset(args.preset, **overrides)
    ckpt, _ = run_experiment(config, args.dataset, args.runs)
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


def cmd_curves(args):
    from .metrics import emit_rd_curves, read_rd_csv

    points = read_rd_csv(args.input)
    csv_path, tradeoff, rates = emit_rd_curves(points, args.out_dir)
    print(f"wrote {csv_path}, {tradeoff}, {rates}")
    return EXIT_OK


class UsageError(ValueError):
    pass


class DataError(ValueError):
    pass


_COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "train": cmd_train,
    "curves": cmd_curves,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # data-shaped failures map to 3, not a traceback
        from .codec import BitstreamError
        from .data import ImageError
        from .metrics import MetricsError

        if isinstance(e, (BitstreamError, ImageError, MetricsError, ValueError)):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_DATA
        raise


if __name__ == "__main__":
    sys.exit(main())
