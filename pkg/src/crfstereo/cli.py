"""Command-line surface: calibrate, pretrain, train, infer, eval, gen.

Exit codes: 0 success, 1 usage error, 2 data error. The config file
given with --config is the flat key-value CRF parameter text written by
`calibrate` and `train`, so runs are diffable and share one parser.

`eval` (and `gen`) may fan out over a worker pool with --threads;
results are merged in input order, so outputs are bit-identical for any
thread count.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import dataio
from .errors import ParameterError, StereoCrfError
from .meanfield import CrfParams
from .metrics import evaluate
from .sgm import SgmConfig
from .siamese import create_net, hinge_pretrain
from .synthetic import make_stereogram
from .training import (
    StereoModel,
    TRAIN_LOG_HEADER,
    build_training_mask,
    calibration_objective,
    infer_pair,
    params_from_point,
    train_schedule,
)
from .optim import nm_calibrate
from .volume import INVALID_DISPARITY


class UsageError(Exception):
    """Bad command-line arguments (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message):
        raise UsageError(message)


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="CRF parameter text file")
    p.add_argument("--iterations", type=int, default=None, help="mean-field T")
    p.add_argument("--filter", choices=("lattice", "bruteforce"), default="lattice")
    p.add_argument("--post", choices=("none", "full"), default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crfstereo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="write a synthetic dataset")
    _common_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--shapes", type=int, default=3)
    p.add_argument("--noise", type=float, default=1.0)

    p = sub.add_parser("pretrain", help="hinge-loss descriptor pretraining")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="network checkpoint path")
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--pairs", type=int, default=256)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--layers", type=int, default=4)

    p = sub.add_parser("train", help="two-phase CRF then joint training")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--net", required=True, help="input network checkpoint")
    p.add_argument("--out-net", required=True)
    p.add_argument("--out-crf", required=True)
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--phase1-epochs", type=int, default=30)
    p.add_argument("--phase2-epochs", type=int, default=50)
    p.add_argument(
        "--loss", choices=("cross-entropy", "piecewise-linear"),
        default="cross-entropy",
    )
    p.add_argument("--alpha", type=float, default=0.1, help="entropy penalty")
    p.add_argument("--log", help="CSV training log path")

    p = sub.add_parser("calibrate", help="Nelder-Mead over the 5 CRF scalars")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--out", required=True, help="CRF parameter text output")
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--budget", type=int, default=300)
    p.add_argument("--subset", type=int, default=20)
    p.add_argument(
        "--initial", type=float, nargs=5, default=None,
        metavar=("TA", "TB", "TG", "W1", "W2"),
    )

    p = sub.add_parser("infer", help="one pair to a disparity map")
    _common_flags(p)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--out", required=True, help=".png or .pfm output")
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--sgm", action="store_true", help="SGM arm on the raw volume")
    p.add_argument(
        "--stack", action="store_true", help="feed CRF beliefs into SGM"
    )

    p = sub.add_parser("eval", help="score a dataset directory")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--d-max", type=int, default=16)
    p.add_argument("--out", help="CSV report path (default: stdout)")
    p.add_argument(
        "--pred", help="directory of precomputed {index:04d}_disp.png maps"
    )
    p.add_argument("--sgm", action="store_true")
    p.add_argument("--stack", action="store_true")
    return parser


def _load_image(path) -> np.ndarray:
    if path.endswith(".pfm"):
        return dataio.load_pfm(path)
    from PIL import Image as PilImage

    with PilImage.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return arr


def _save_disparity(path, disp) -> None:
    if path.endswith(".pfm"):
        dataio.save_pfm(path, disp)
    else:
        dataio.save_kitti_disparity(path, disp)


def _load_model(args, d_max: int) -> StereoModel:
    net = dataio.load_net(args.net)
    if args.config:
        crf = dataio.load_crf_params(args.config)
    else:
        crf = CrfParams.calibrated(d_max)
    return StereoModel(net=net, crf=crf)


def _mode(args) -> str:
    if getattr(args, "stack", False):
        return "crf+sgm"
    if getattr(args, "sgm", False):
        return "sgm"
    return "crf"


def _read_samples(directory):
    indices = dataio.list_samples(directory)
    if not indices:
        raise ParameterError(f"no samples found in {directory}")
    return indices, [dataio.read_sample(directory, i) for i in indices]


def _cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    def write(i):
        sample = make_stereogram(
            seed=args.seed + i,
            h=args.height,
            w=args.width,
            d_max=args.d_max,
            shapes=args.shapes,
            noise=args.noise,
        )
        dataio.write_sample(args.out, i, sample)
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            list(pool.map(write, range(args.count)))
    else:
        for i in range(args.count):
            write(i)
    print(f"wrote {args.count} samples to {args.out}")
    return 0


def _cmd_pretrain(args) -> int:
    _, samples = _read_samples(args.data)
    in_channels = 3 if samples[0].left.ndim == 3 else 1
    net = create_net(
        seed=args.seed, in_channels=in_channels,
        channels=args.channels, layers=args.layers,
    )
    images = [(s.left, s.right, s.gt_left, args.d_max) for s in samples]
    net, history = hinge_pretrain(
        net, images, epochs=args.epochs, pairs_per_image=args.pairs,
        seed=args.seed,
    )
    dataio.save_net(args.out, net)
    print(f"pretrained {args.epochs} epochs; "
          f"loss {history[0]:.4f} -> {history[-1]:.4f}; saved {args.out}")
    return 0


def _cmd_train(args) -> int:
    _, samples = _read_samples(args.data)
    model = _load_model(args, args.d_max)
    if args.iterations is not None:
        from dataclasses import replace

        model.crf = replace(model.crf, iterations=args.iterations)
    model, rows = train_schedule(
        model,
        samples,
        phase1_epochs=args.phase1_epochs,
        phase2_epochs=args.phase2_epochs,
        loss_kind=args.loss,
        entropy_alpha=args.alpha,
        method=args.filter,
        seed=args.seed,
    )
    dataio.save_net(args.out_net, model.net)
    dataio.save_crf_params(args.out_crf, model.crf)
    log = "\n".join([TRAIN_LOG_HEADER] + [r.to_csv() for r in rows]) + "\n"
    if args.log:
        with open(args.log, "w") as f:
            f.write(log)
    else:
        sys.stdout.write(log)
    return 0


def _cmd_calibrate(args) -> int:
    _, samples = _read_samples(args.data)
    net = dataio.load_net(args.net)
    iterations = 5 if args.iterations is None else args.iterations
    objective = calibration_objective(
        net, samples, args.d_max, iterations=iterations,
        method=args.filter, subset=args.subset,
    )
    initial = args.initial
    if initial is None:
        initial = [1.0, 1.0, 1.0, 1.0, 1.0]
    result = nm_calibrate(objective, np.asarray(initial), budget=args.budget)
    params = params_from_point(result.point, args.d_max, iterations)
    dataio.save_crf_params(args.out, params)
    print(
        f"calibrated in {result.evaluations} evaluations; "
        f"objective {result.value:.4f}; saved {args.out}"
    )
    return 0


def _cmd_infer(args) -> int:
    left = _load_image(args.left)
    right = _load_image(args.right)
    model = _load_model(args, args.d_max)
    result = infer_pair(
        model,
        left,
        right,
        mode=_mode(args),
        post=args.post,
        method=args.filter,
        iterations=args.iterations,
    )
    _save_disparity(args.out, result.disparity)
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    import time

    indices, samples = _read_samples(args.data)
    model = _load_model(args, args.d_max)
    t0 = time.perf_counter()

    if args.pred:
        preds = [
            dataio.load_kitti_disparity(
                os.path.join(args.pred, f"{i:04d}_disp.png")
            )
            for i in indices
        ]
    else:
        def run(s):
            return infer_pair(
                model, s.left, s.right, mode=_mode(args), post=args.post,
                method=args.filter, iterations=args.iterations,
            ).disparity

        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                preds = list(pool.map(run, samples))
        else:
            preds = [run(s) for s in samples]
    infer_time = time.perf_counter() - t0

    gts = [s.gt_left for s in samples]
    masks = [build_training_mask(s, args.d_max) for s in samples]
    report = evaluate(preds, gts, masks)
    report.wall_times["infer"] = infer_time
    print(f"infer wall time {infer_time:.3f}s", file=sys.stderr)
    csv = report.to_csv()
    if args.out:
        with open(args.out, "w") as f:
            f.write(csv)
    else:
        sys.stdout.write(csv)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "calibrate": _cmd_calibrate,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (StereoCrfError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
