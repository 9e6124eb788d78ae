"""Scheme x seed batches and their RunSummary."""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytics
from .config import PURE_STEREO
from .behavior import Mode
from .schemes import dictionary_bootstrap, run_experiment, write_heatmap

ROW_FIELDS = ("overrides_test", "turns_test", "contacts", "mse", "tpr", "fpr", "auc")
COMPARED = "overrides_test"


def _one_seed(args):
    cfg, seed, schemes = args
    dictionary = None
    if cfg.mono_source == "knn" and any(s.kind != "pure_stereo" for s in schemes):
        dictionary, _ = dictionary_bootstrap(cfg, seed)
    return [run_experiment(cfg, seed, s, dictionary) for s in schemes]


def run_all(cfg):
    """Run every (scheme, seed) pair; logs come back ordered by scheme, then seed.

    Work is split by seed so runs that share a seed also share its texton
    dictionary.
    """
    schemes = list(cfg.schemes)
    if cfg.stereo_baseline and PURE_STEREO not in schemes:
        schemes.append(PURE_STEREO)
    tasks = [(cfg, seed, schemes) for seed in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_seed = list(pool.map(_one_seed, tasks))
    else:
        per_seed = [_one_seed(t) for t in tasks]
    return [per_seed[j][i] for i in range(len(schemes)) for j in range(len(cfg.seeds))]


def _stats(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "n": 0}
    arr = np.array(vals, dtype=float)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std, "n": len(arr)}


def aggregate(rows):
    """Per-scheme mean and sample standard deviation of every row field."""
    out = {}
    for row in rows:
        out.setdefault(row["scheme"], []).append(row)
    return {scheme: {f: _stats([r.get(f) for r in group]) for f in ROW_FIELDS}
            for scheme, group in out.items()}


def pairwise_pvalues(rows, schemes, iters, seed, field=COMPARED):
    """Bootstrap p-values for every pair of `schemes` on `field`."""
    by_scheme = {s: [r[field] for r in rows if r["scheme"] == s] for s in schemes}
    pairs = list(itertools.combinations(schemes, 2))
    rngs = np.random.default_rng(seed).spawn(len(pairs))
    out = []
    for (a, b), rng in zip(pairs, rngs):
        p = analytics.bootstrap_mean_diff_test(by_scheme[a], by_scheme[b], iters, rng)
        out.append({"a": a, "b": b, "field": field, "p": p})
    return out


def build_summary(cfg, logs):
    rows = [{"scheme": log.scheme, "seed": log.seed,
             **{f: log.summary().get(f) for f in ROW_FIELDS}} for log in logs]
    compared = [s.label for s in cfg.schemes if s.kind != "pure_stereo"]
    n_init, n_learn, n_test = cfg.phases.frames(cfg.fps)
    return {
        "time_scale": cfg.phases.time_scale,
        "phase_frames": {"initial": n_init, "learning": n_learn, "test": n_test},
        "schemes": [s.label for s in cfg.schemes],
        "seeds": list(cfg.seeds),
        "runs": rows,
        "aggregates": aggregate(rows),
        "pvalues": pairwise_pvalues(rows, compared, cfg.bootstrap_iters, cfg.bootstrap_seed),
        "config": cfg.to_dict(),
    }


def _clean(obj):
    # JSON has no nan/inf
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def summary_json(summary):
    return json.dumps(_clean(summary), indent=2, allow_nan=False) + "\n"


def run_batch(cfg, out_dir=None):
    """Run the batch, write per-run artifacts and summary.json under `out_dir`
    (if given) and return the summary dict."""
    logs = run_all(cfg)
    summary = build_summary(cfg, logs)
    if out_dir is not None:
        out_dir = Path(out_dir)
        extent = (cfg.world.width, cfg.world.depth)
        pooled = {}
        for log in logs:
            log.write(out_dir / "runs" / f"{log.scheme}_seed{log.seed:04d}",
                      bins=cfg.heatmap_bins, extent=extent)
            for name, mode in (("turning", Mode.TURNING), ("forward", Mode.FORWARD)):
                grid = log.heatmap(modes=[mode], bins=cfg.heatmap_bins, extent=extent)
                key = (log.scheme, name)
                pooled[key] = pooled.get(key, 0) + grid
        (out_dir / "heatmaps").mkdir(parents=True, exist_ok=True)
        for (scheme, name), grid in pooled.items():
            write_heatmap(out_dir / "heatmaps" / f"{scheme}_{name}", grid)
        (out_dir / "summary.json").write_text(summary_json(summary))
    return summary
