"""Closed-loop persistent self-supervised learning experiments.

A run flies the drone through three phases. During the initial phase the
stereo oracle controls the FSM; during learning the scheme decides who
controls; in the test phase the monocular estimate always controls, the
estimator is frozen, and stereo only intervenes through overrides.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics, pgm
from .behavior import FsmState, Mode, force_pick, fsm_step
from .estimator import MonoEstimator
from .vbow import texton_histogram, train_dictionary
from .world import (add_disparity_noise, column_hits, disparity_from_depth, random_pose,
                    render_hits, step_dynamics)


class Phase(enum.IntEnum):
    INITIAL = 0
    LEARNING = 1
    TEST = 2


class Source(enum.IntEnum):
    STEREO = 0
    MONO = 1


def select_control_source(scheme, phase, rng):
    if phase is Phase.INITIAL or scheme.kind == "pure_stereo":
        return Source.STEREO
    if phase is Phase.TEST:
        return Source.MONO
    if scheme.kind == "cold_turkey":
        return Source.STEREO
    if scheme.kind == "training_wheels":
        return Source.MONO
    return Source.STEREO if rng.random() < scheme.beta else Source.MONO


def run_streams(seed):
    """Independent generators for one run, keyed by purpose.

    The same seed gives the same start pose and noise across schemes.
    """
    names = ("dictionary", "start", "noise", "patches", "fsm", "source")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def dictionary_bootstrap(cfg, seed):
    """Fly a short stereo-only warm-up and learn the texton dictionary from it."""
    rng = run_streams(seed)["dictionary"]
    world, cam = cfg.world, cfg.camera
    pose = random_pose(world, rng, forward_speed=cfg.forward_speed)
    fsm = FsmState()
    images = []
    contacts = 0
    for _ in range(cfg.vbow.warmup_frames):
        hits = column_hits(world, pose, cam)
        images.append(render_hits(world, hits, cam))
        cmd, fsm = fsm_step(fsm, disparity_from_depth(hits.depth, cam), pose.heading,
                            cfg.behavior, rng)
        pose, contact = step_dynamics(pose, cmd, cfg.dt, world)
        contacts += contact
    d = train_dictionary(images, cfg.vbow.n_textons, cfg.vbow.kohonen_iterations, rng,
                         patches_per_image=cfg.vbow.patches_per_image, size=cfg.vbow.patch_size)
    return d, contacts


FRAME_FIELDS = ("frame", "time", "phase", "x", "y", "heading", "lam_stereo", "lam_mono",
                "source", "mode", "picked", "override", "contact")


@dataclass
class ExperimentLog:
    scheme: str
    seed: int
    fps: float
    t: float
    phase_frames: tuple
    frames: dict  # column name -> numpy array, one entry per frame
    counters: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def phase_mask(self, phase):
        return self.frames["phase"] == int(phase)

    def recount(self):
        """Counters recomputed from the per-frame records."""
        f = self.frames
        test = self.phase_mask(Phase.TEST)
        learning = self.phase_mask(Phase.LEARNING)
        override = f["override"].astype(bool)
        picked = f["picked"].astype(bool)
        return {
            "overrides_test": int(np.count_nonzero(override & test)),
            "overrides_learning": int(np.count_nonzero(override & learning)),
            "turns_test": int(np.count_nonzero(picked & test)),
            "override_turns_test": int(np.count_nonzero(picked & override & test)),
            "turns_total": int(np.count_nonzero(picked)),
            "contacts": int(np.count_nonzero(f["contact"])),
            "contacts_test": int(np.count_nonzero(f["contact"].astype(bool) & test)),
            "frames_test": int(np.count_nonzero(test)),
        }

    def compute_metrics(self):
        test = self.phase_mask(Phase.TEST)
        est = self.frames["lam_mono"][test]
        truth = self.frames["lam_stereo"][test]
        ok = ~np.isnan(est)
        if not ok.any():
            return {"mse": None, "tpr": None, "fpr": None, "auc": None}
        est, truth = est[ok], truth[ok]
        tpr, fpr = analytics.classification_rates(est, truth, self.t)
        roc = analytics.roc_curve(est, truth, self.t)

        def num(v):
            return None if v is None or math.isnan(v) else float(v)

        return {"mse": analytics.mse(est, truth), "tpr": num(tpr), "fpr": num(fpr),
                "auc": num(roc.auc)}

    def heatmap(self, phase=Phase.TEST, modes=None, bins=20, extent=(10.0, 10.0)):
        mask = self.phase_mask(phase)
        xy = np.column_stack([self.frames["x"][mask], self.frames["y"][mask]])
        mode_filter = None if modes is None else [int(m.value) for m in modes]
        return analytics.heatmap(xy, self.frames["mode"][mask], mode_filter, bins, extent)

    def summary(self):
        return {"scheme": self.scheme, "seed": self.seed, **self.counters, **self.metrics}

    def write(self, directory, bins=20, extent=(10.0, 10.0)):
        """Persist the run: summary.json, frames.csv and test-phase heatmaps."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "summary.json").write_text(json.dumps(self.summary(), indent=2) + "\n")
        with open(directory / "frames.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FRAME_FIELDS)
            cols = [self.frames[k] for k in FRAME_FIELDS]
            for row in zip(*cols):
                w.writerow([_cell(v) for v in row])
        for name, modes in (("turning", [Mode.TURNING]), ("forward", [Mode.FORWARD])):
            write_heatmap(directory / f"heatmap_{name}", self.heatmap(modes=modes, bins=bins,
                                                                      extent=extent))


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(int(v))


def write_heatmap(stem, grid):
    """Write a count grid as CSV (rows = y bins, north first) and as a scaled PGM."""
    image = np.asarray(grid).T[::-1]
    with open(f"{stem}.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(image.tolist())
    peak = image.max()
    pgm.write_pgm(f"{stem}.pgm", image / peak if peak > 0 else image.astype(float))


def run_experiment(cfg, seed, scheme=None, dictionary=None):
    """Fly one closed-loop run and return its ExperimentLog."""
    scheme = scheme or cfg.schemes[0]
    world, cam, beh = cfg.world, cfg.camera, cfg.behavior
    streams = run_streams(seed)
    use_mono = scheme.kind != "pure_stereo"
    knn = use_mono and cfg.mono_source == "knn"
    if knn and dictionary is None:
        dictionary, _ = dictionary_bootstrap(cfg, seed)
    n_init, n_learn, n_test = cfg.phases.frames(cfg.fps)
    total = n_init + n_learn + n_test
    est = MonoEstimator(2 * cfg.vbow.n_textons + 1, cfg.estimator.k,
                        cfg.estimator.smooth_window)
    pose = random_pose(world, streams["start"], forward_speed=cfg.forward_speed)
    fsm = FsmState()
    cols = {k: np.empty(total) for k in FRAME_FIELDS}
    dt = cfg.dt
    for i in range(total):
        phase = Phase.INITIAL if i < n_init else (
            Phase.LEARNING if i < n_init + n_learn else Phase.TEST)
        if i == n_init + n_learn:
            est.freeze()
        hits = column_hits(world, pose, cam)
        lam_true = disparity_from_depth(hits.depth, cam)
        lam_stereo = add_disparity_noise(lam_true, cam, streams["noise"])
        source = select_control_source(scheme, phase, streams["source"])

        lam_mono = math.nan
        if knn:
            feat = texton_histogram(render_hits(world, hits, cam), dictionary,
                                    cfg.vbow.samples, streams["patches"]).as_array()
            if len(est):
                lam_mono = est.smooth(est.predict(feat))
            if phase is not Phase.TEST:
                est.add_sample(feat, lam_stereo, i * dt)
        elif use_mono:
            lam_mono = lam_stereo

        if source is Source.MONO and not math.isnan(lam_mono):
            lam_used = lam_mono
        else:
            source = Source.STEREO if math.isnan(lam_mono) else source
            lam_used = lam_stereo
        cmd, fsm = fsm_step(fsm, lam_used, pose.heading, beh, streams["fsm"])
        override = (source is Source.MONO and lam_stereo > cfg.t_override
                    and cmd.kind == "forward")
        if override:
            cmd, fsm = force_pick(lam_stereo, pose.heading, beh, streams["fsm"])

        row = (i, i * dt, int(phase), pose.x, pose.y, pose.heading, lam_stereo, lam_mono,
               int(source), fsm.mode.value, fsm.picked, override, False)
        pose, contact = step_dynamics(pose, cmd, dt, world)
        for k, v in zip(FRAME_FIELDS, row):
            cols[k][i] = v
        cols["contact"][i] = contact

    for k in ("frame", "phase", "source", "mode", "picked", "override", "contact"):
        cols[k] = cols[k].astype(np.int64)
    log = ExperimentLog(scheme.label, seed, cfg.fps, beh.t, (n_init, n_learn, n_test), cols)
    log.counters = log.recount()
    log.metrics = log.compute_metrics() if use_mono else {}
    return log
