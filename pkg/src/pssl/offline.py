"""Offline learning curves: kNN and linear regressors trained on growing
prefixes of a recorded (image, disparity) walk."""

from __future__ import annotations

import csv
import math

import numpy as np

from . import analytics
from .estimator import knn_predict, linear_fit
from .vbow import texton_histogram, train_dictionary
from .world import generate_offline_dataset, load_offline_dataset

CURVE_FIELDS = ("train_size", "regressor", "split", "mse", "auc")


def frame_features(images, dictionary, m, rng):
    return np.array([texton_histogram(img, dictionary, m, rng).as_array() for img in images])


def learning_curve(X_train, y_train, X_test, y_test, checkpoints, t, k=5):
    """Rows of (train_size, regressor, split, mse, auc) for kNN and linear fits
    on each prefix of the training data."""
    rows = []
    for n in checkpoints:
        if n > len(X_train):
            raise ValueError(f"checkpoint {n} exceeds the {len(X_train)} training samples")
        X, y = X_train[:n], y_train[:n]
        lin = linear_fit(X, y)
        for name, predict in (("knn", lambda Q: knn_predict(X, y, Q, k)),
                              ("linear", lin.predict)):
            for split, Q, truth in (("train", X, y), ("test", X_test, y_test)):
                est = predict(Q)
                roc = analytics.roc_curve(est, truth, t)
                rows.append({"train_size": n, "regressor": name, "split": split,
                             "mse": analytics.mse(est, truth), "auc": roc.auc})
    return rows


def run_offline(cfg):
    """Build or load the dataset, learn a dictionary on the training split and
    return (curve rows, test-set operating point of the largest kNN model)."""
    o = cfg.offline
    if o.dataset_dir is None:
        frames = generate_offline_dataset(cfg.world, cfg.camera, o.n_frames, o.seed,
                                          cfg.behavior, cfg.fps, cfg.forward_speed)
    else:
        frames = load_offline_dataset(o.dataset_dir)
        if len(frames) <= o.n_test:
            raise ValueError(f"{o.dataset_dir}: {len(frames)} frames, need more than {o.n_test}")
    train, test = frames[:-o.n_test], frames[-o.n_test:]
    streams = np.random.default_rng(o.seed).spawn(2)
    dictionary = train_dictionary([f.image for f in train[:cfg.vbow.warmup_frames]],
                                  cfg.vbow.n_textons, cfg.vbow.kohonen_iterations, streams[0],
                                  patches_per_image=cfg.vbow.patches_per_image,
                                  size=cfg.vbow.patch_size)
    X_train = frame_features([f.image for f in train], dictionary, cfg.vbow.samples, streams[1])
    X_test = frame_features([f.image for f in test], dictionary, cfg.vbow.samples, streams[1])
    y_train = np.array([f.disparity for f in train])
    y_test = np.array([f.disparity for f in test])
    checkpoints = [c for c in o.checkpoints if c <= len(train)]
    t = cfg.behavior.t
    rows = learning_curve(X_train, y_train, X_test, y_test, checkpoints, t, cfg.estimator.k)
    n = checkpoints[-1]
    est = knn_predict(X_train[:n], y_train[:n], X_test, cfg.estimator.k)
    threshold, fpr, tpr = analytics.operating_point(analytics.roc_curve(est, y_test, t),
                                                    o.target_tpr)
    point = {"train_size": n, "target_tpr": o.target_tpr, "threshold": threshold,
             "tpr": tpr, "fpr": fpr}
    return rows, point


def write_curve(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_FIELDS)
        for r in rows:
            w.writerow([r["train_size"], r["regressor"], r["split"], repr(float(r["mse"])),
                        "" if math.isnan(r["auc"]) else repr(float(r["auc"]))])
