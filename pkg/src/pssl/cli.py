"""Command line entry point: ``pssl {sim, offline, analyze, dict}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analytics
from .batch import run_batch, summary_json
from .config import ConfigError, load_config
from .offline import run_offline, write_curve
from .schemes import dictionary_bootstrap
from .vbow import TextonDictionary


def _load(path):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None


def cmd_sim(args):
    cfg = _load(args.config)
    out = Path(args.out) if args.out else cfg.resolved_output_dir()
    summary = run_batch(cfg, out)
    agg = summary["aggregates"]
    for scheme, stats in agg.items():
        o, t = stats["overrides_test"], stats["turns_test"]
        print(f"{scheme:>16}: overrides {o['mean']:.2f} +- {o['std']:.2f}, "
              f"turns {t['mean']:.2f} +- {t['std']:.2f}")
    for p in summary["pvalues"]:
        print(f"{p['a']} vs {p['b']}: p = {p['p']:.4f}")
    print(f"wrote {out / 'summary.json'}")
    return 0


def cmd_offline(args):
    cfg = _load(args.config)
    out = Path(args.out) if args.out else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    rows, point = run_offline(cfg)
    write_curve(rows, out / "learning_curve.csv")
    (out / "operating_point.json").write_text(summary_json(point))
    for r in rows:
        if r["split"] == "test":
            print(f"{r['regressor']:>6} n={r['train_size']:>5}: mse {r['mse']:.3f} "
                  f"auc {r['auc']:.3f}")
    print(f"operating point: tpr {point['tpr']:.3f} fpr {point['fpr']:.3f}")
    return 0


def _prob(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return v


def _count(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def frame_log_metrics(path, t):
    """Test-phase metrics and ROC of a frames.csv written by a simulation run."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        test = [r for r in rows if int(r["phase"]) == 2 and r["lam_mono"] != ""]
        est = np.array([float(r["lam_mono"]) for r in test])
        truth = np.array([float(r["lam_stereo"]) for r in test])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: not a frame log ({exc})") from None
    if len(est) == 0:
        raise ValueError(f"{path}: no test-phase monocular estimates")
    tpr, fpr = analytics.classification_rates(est, truth, t)
    roc = analytics.roc_curve(est, truth, t)
    metrics = {"frames": len(est), "mse": analytics.mse(est, truth), "tpr": tpr, "fpr": fpr,
               "auc": roc.auc}
    return metrics, roc


def cmd_analyze(args):
    out = {}
    if args.tpr is not None and args.s is not None:
        out["collision_prob_iid"] = analytics.collision_prob_iid(args.tpr, args.s)
        if args.p_ident is not None:
            if args.s < 2:
                raise ConfigError("--s must be >= 2 for the persistence model")
            out["persistence_transition"] = analytics.persistence_transition(args.p_ident,
                                                                             args.tpr)
            out["collision_prob_markov"] = analytics.collision_prob_markov(
                args.p_ident, args.tpr, args.s)
    if args.fpr is not None:
        out["spurious_turn_rate"] = analytics.spurious_turn_rate(args.fpr, args.fps, args.speed)
    if args.frames:
        metrics, roc = frame_log_metrics(args.frames, args.t)
        out["frame_log"] = metrics
        if args.roc_out:
            with open(args.roc_out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["threshold", "fpr", "tpr"])
                for th, f, p in zip(roc.thresholds, roc.fpr, roc.tpr):
                    w.writerow([repr(float(th)), repr(float(f)), repr(float(p))])
    if not out:
        raise ConfigError("nothing to compute: give --tpr and --s, --fpr, or --frames")
    sys.stdout.write(summary_json(out))
    return 0


def cmd_dict(args):
    if args.action == "train":
        cfg = _load(args.config)
        dictionary, _ = dictionary_bootstrap(cfg, args.seed)
        dictionary.save(args.out)
        print(f"wrote {args.out}: {dictionary.n} + {dictionary.n} textons of "
              f"{dictionary.size}x{dictionary.size}")
        return 0
    d = TextonDictionary.load(args.path)
    info = {"n": d.n, "size": d.size}
    for name, cents in (("intensity", d.intensity), ("gradient", d.gradient)):
        info[name] = [{"mean": float(c.mean()), "std": float(c.std())} for c in cents]
    sys.stdout.write(summary_json(info))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pssl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="run every scheme x seed experiment in a config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides config and environment)")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("offline", help="learning curves on a recorded or synthetic dataset")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("analyze", help="collision-risk calculator and frame-log metrics")
    p.add_argument("--tpr", type=_prob)
    p.add_argument("--fpr", type=_prob)
    p.add_argument("--s", type=_count, help="positive samples in an approach")
    p.add_argument("--fps", type=_positive, default=30.0)
    p.add_argument("--speed", type=_positive, default=0.5, help="m/s")
    p.add_argument("--p-ident", type=_prob, dest="p_ident",
                   help="chance a classification repeats the previous one")
    p.add_argument("--frames", help="frames.csv of a simulation run")
    p.add_argument("--t", type=_positive, default=20.0 / 3.0, help="disparity threshold")
    p.add_argument("--roc-out", dest="roc_out", help="write the ROC as CSV here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dict", help="texton dictionary training and inspection")
    dsub = p.add_subparsers(dest="action", required=True)
    q = dsub.add_parser("train")
    q.add_argument("config")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q = dsub.add_parser("inspect")
    q.add_argument("path")
    p.set_defaults(func=cmd_dict)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
