"""Command-line interface.

Exit codes: 0 success, 1 error, 2 divergence or non-convergence.
"""

import argparse
import sys

import numpy as np
import torch

from .data import SpdSequenceDataset, gen_rotating_spd
from .exceptions import Diverged, NoConvergence, SpdSeqError
from .frechet import consistency_report
from .model import SpdSequenceModel
from .stats import cramer_baseline, default_permtest_config, permutation_test
from .training import TrainConfig, fit


def _cmd_gen(args):
    rates = [float(r) for r in args.rates.split(",")]
    if len(rates) != args.classes:
        raise ValueError("--rates must list one rate per class")
    dataset = gen_rotating_spd(rates, args.per_class, n=args.dim,
                               seq_len=args.len, noise=args.noise, seed=args.seed)
    dataset.save(args.out)
    print(f"wrote {len(dataset)} sequences ({args.classes} classes, "
          f"n={args.dim}, T={args.len}) to {args.out}")
    return 0


def _cmd_train(args):
    dataset = SpdSequenceDataset.load(args.data)
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    model = SpdSequenceModel(dataset.n, dataset.n_classes, n_layers=config.layers,
                             scales=config.scales, init_eps=config.init_eps)
    x, y = dataset.tensors()
    log = fit(model, x, y, config, log_path=args.log)
    model.save(args.ckpt_out)
    print(f"trained {config.epochs} epochs; final loss {log.loss[-1]:.6g}, "
          f"train acc {log.train_acc[-1]:.3f}; checkpoint -> {args.ckpt_out}")
    return 0


def _cmd_eval(args):
    dataset = SpdSequenceDataset.load(args.data)
    model = SpdSequenceModel.load(args.ckpt)
    x, y = dataset.tensors()
    with torch.no_grad():
        pred = model(x).argmax(dim=-1)
    acc = float((pred == y).double().mean())
    print(f"accuracy {acc:.4f} on {len(dataset)} sequences")
    return 0


def _cmd_fmbench(args):
    rng = np.random.default_rng(args.seed)
    # i.i.d. draws around a fixed anisotropic center
    base = np.diag(np.linspace(1.0, 2.0, args.dim))
    samples = []
    for _ in range(args.count):
        w = np.eye(args.dim) + 0.3 * rng.standard_normal((args.dim, args.dim))
        x = w @ base @ w.T
        samples.append((x + x.T) / 2)
    report = consistency_report(np.stack(samples), shuffles=args.shuffles,
                                seed=args.seed)
    report.to_csv(args.out)
    for k, var, dist in zip(report.ks, report.variance, report.oracle_distance):
        print(f"k={k:6d}  variance={var:.6g}  oracle_distance={dist:.6g}")
    print(f"wrote {args.out}")
    return 0


def _cmd_permtest(args):
    group_a = SpdSequenceDataset.load(args.group_a)
    group_b = SpdSequenceDataset.load(args.group_b)
    if args.baseline == "cramer":
        result = cramer_baseline(group_a, group_b, permutations=args.perms,
                                 seed=args.seed)
    else:
        config = TrainConfig.from_file(args.config) if args.config \
            else default_permtest_config()
        result = permutation_test(group_a, group_b, permutations=args.perms,
                                  config=config, seed=args.seed)
    print(f"statistic {result.statistic:.6g}, permutations {result.permutations}, "
          f"p-value {result.p_value:.4g}")
    return 0


def _cmd_params(args):
    model = SpdSequenceModel.load(args.ckpt)
    print(f"layers={len(model.layers)} scales={len(model.scales)} dim={model.dim} "
          f"classes={model.n_classes}")
    print(f"param_count={model.param_count()}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spdseq",
                                     description="SPD sequence learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a rotating-SPD synthetic dataset")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--len", type=int, default=20)
    p.add_argument("--rates", required=True,
                   help="comma list of degrees-per-step, one per class")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a classifier on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--ckpt-out", required=True)
    p.add_argument("--log")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fmbench", help="Frechet-mean consistency report (CSV)")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--shuffles", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fmbench)

    p = sub.add_parser("permtest", help="two-group permutation test")
    p.add_argument("--group-a", required=True)
    p.add_argument("--group-b", required=True)
    p.add_argument("--perms", type=int, default=499)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--baseline", choices=["cramer", "model"], default="model")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_permtest)

    p = sub.add_parser("params", help="print the stored-parameter count")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=_cmd_params)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (Diverged, NoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SpdSeqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
