"""Visual bag-of-words features: textons, texton histograms and entropy.

Images are 2-D float arrays of shape ``(height, width)`` with values in
``[0, 1]``. Patches are stored flattened, one row per patch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PATCH_SIZE = 5
# largest possible gradient magnitude: both one-sided differences equal 1
GRADIENT_SCALE = math.sqrt(2.0)


def check_image(img):
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return img


def gradient_image(img):
    """Gradient magnitude of `img`, rescaled to [0, 1].

    Central differences in the interior, one-sided differences on the
    border rows and columns.
    """
    img = np.ascontiguousarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    return _gradient(img, 1.0 / GRADIENT_SCALE)


@numba.njit(cache=True)
def _gradient(img, inv_scale):
    h, w = img.shape
    out = np.empty((h, w))
    for r in range(h):
        r0 = max(r - 1, 0)
        r1 = min(r + 1, h - 1)
        for c in range(w):
            c0 = max(c - 1, 0)
            c1 = min(c + 1, w - 1)
            if w < 2:
                gx = 0.0
            elif c == 0:
                gx = img[r, 1] - img[r, 0]
            elif c == w - 1:
                gx = img[r, c] - img[r, c0]
            else:
                gx = (img[r, c1] - img[r, c0]) * 0.5
            if h < 2:
                gy = 0.0
            elif r == 0:
                gy = img[1, c] - img[0, c]
            elif r == h - 1:
                gy = img[r, c] - img[r0, c]
            else:
                gy = (img[r1, c] - img[r0, c]) * 0.5
            out[r, c] = np.sqrt(gx * gx + gy * gy) * inv_scale
    return out


def sample_positions(shape, m, rng, size=PATCH_SIZE):
    """Uniformly random top-left corners for `m` patches of `size` x `size`."""
    height, width = shape
    if m < 1:
        raise ValueError("m must be >= 1")
    if height < size or width < size:
        raise ValueError(f"image-too-small: {height}x{width} image, {size}x{size} patch")
    rows = rng.integers(0, height - size + 1, size=m)
    cols = rng.integers(0, width - size + 1, size=m)
    return rows, cols


def patches_at(img, rows, cols, size=PATCH_SIZE):
    """Gather flattened patches with top-left corners at (`rows`, `cols`)."""
    windows = sliding_window_view(img, (size, size))
    return windows[rows, cols].reshape(len(rows), size * size)


def extract_patches(img, m, rng, size=PATCH_SIZE):
    img = np.asarray(img, dtype=float)
    rows, cols = sample_positions(img.shape, m, rng, size)
    return patches_at(img, rows, cols, size)


def nearest_texton(patch, centroids):
    """Index of the centroid closest to `patch` (Euclidean; lowest index wins ties)."""
    patch = np.asarray(patch, dtype=float).ravel()
    centroids = np.asarray(centroids, dtype=float)
    if centroids.ndim != 2 or len(centroids) == 0:
        raise ValueError("centroids must be a non-empty 2-D array")
    if centroids.shape[1] != patch.size:
        raise ValueError(
            f"shape mismatch: patch has {patch.size} values, centroids have {centroids.shape[1]}")
    d2 = ((centroids - patch) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def nearest_textons(patches, centroids):
    """Vectorised `nearest_texton` over the rows of `patches`."""
    patches_t = np.ascontiguousarray(np.asarray(patches, dtype=float).T)
    return _nearest_cols(patches_t, np.ascontiguousarray(centroids, dtype=float))


@numba.njit(cache=True)
def _nearest_cols(patches_t, centroids):
    # patches_t is (dim, m); each distance is accumulated in pixel order,
    # exactly as a per-patch scan would, but the inner loop runs over patches
    dim, m = patches_t.shape
    n = centroids.shape[0]
    d2 = np.zeros((n, m))
    for j in range(n):
        for k in range(dim):
            c = centroids[j, k]
            for i in range(m):
                diff = c - patches_t[k, i]
                d2[j, i] += diff * diff
    out = np.zeros(m, dtype=np.int64)
    for i in range(m):
        for j in range(1, n):
            if d2[j, i] < d2[out[i], i]:
                out[i] = j
    return out


@numba.njit(cache=True)
def _gather_t(img, rows, cols, size):
    m = rows.shape[0]
    out = np.empty((size * size, m))
    for i in range(m):
        k = 0
        for dr in range(size):
            for dc in range(size):
                out[k, i] = img[rows[i] + dr, cols[i] + dc]
                k += 1
    return out


def shannon_entropy(hist):
    """Shannon entropy in bits divided by log2(len(hist)), so it lies in [0, 1]."""
    hist = np.asarray(hist, dtype=float)
    if np.any(hist < 0):
        raise ValueError("histogram has a negative bin")
    if abs(hist.sum() - 1.0) > 1e-6:
        raise ValueError(f"histogram must sum to 1, sums to {hist.sum()}")
    if len(hist) < 2:
        return 0.0
    p = hist[hist > 0]
    h = 0.0 - float(np.sum(p * np.log2(p)))
    return min(max(h / math.log2(len(hist)), 0.0), 1.0)


@dataclass(frozen=True)
class TextonDictionary:
    intensity: np.ndarray  # (n, size*size)
    gradient: np.ndarray  # (n, size*size)
    size: int = PATCH_SIZE

    def __post_init__(self):
        object.__setattr__(self, "intensity", np.ascontiguousarray(self.intensity, dtype=float))
        object.__setattr__(self, "gradient", np.ascontiguousarray(self.gradient, dtype=float))
        if self.intensity.shape != self.gradient.shape:
            raise ValueError("intensity and gradient dictionaries must have equal shape")
        if self.intensity.ndim != 2 or len(self.intensity) < 1:
            raise ValueError("dictionary needs at least one texton per type")
        if self.intensity.shape[1] != self.size * self.size:
            raise ValueError("texton length does not match patch size")
        if not (np.all(np.isfinite(self.intensity)) and np.all(np.isfinite(self.gradient))):
            raise ValueError("texton values must be finite")
        self.intensity.setflags(write=False)
        self.gradient.setflags(write=False)

    @property
    def n(self):
        return len(self.intensity)

    def to_dict(self):
        return {
            "n": self.n,
            "w": self.size,
            "h": self.size,
            "intensity": self.intensity.tolist(),
            "gradient": self.gradient.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        if data["w"] != data["h"]:
            raise ValueError("only square patches are supported")
        d = cls(np.array(data["intensity"], dtype=float),
                np.array(data["gradient"], dtype=float), size=int(data["w"]))
        if d.n != data["n"]:
            raise ValueError(f"header says n={data['n']}, file holds {d.n} textons")
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def kohonen(samples, n, iterations, rng, alpha_start=0.1, alpha_end=0.01):
    """Winner-take-all Kohonen clustering of the rows of `samples`.

    Centroids start at `n` distinct randomly chosen samples (fewer distinct
    samples than `n` repeats some). Each presentation moves only the winning
    centroid toward the sample, with a learning rate decaying linearly from
    `alpha_start` to `alpha_end`.
    """
    samples = np.asarray(samples, dtype=float)
    unique = np.unique(samples, axis=0)
    if len(unique) >= n:
        init = unique[rng.choice(len(unique), size=n, replace=False)]
    else:
        init = unique[rng.integers(0, len(unique), size=n)]
    centroids = np.ascontiguousarray(init)
    order = rng.integers(0, len(samples), size=iterations)
    if iterations > 1:
        alphas = np.linspace(alpha_start, alpha_end, iterations)
    else:
        alphas = np.full(iterations, alpha_start)
    _kohonen_loop(np.ascontiguousarray(samples), centroids, order, alphas)
    return centroids


@numba.njit(cache=True)
def _kohonen_loop(samples, centroids, order, alphas):
    n, dim = centroids.shape
    for step in range(len(order)):
        x = samples[order[step]]
        win = 0
        best = np.inf
        for j in range(n):
            d2 = 0.0
            for k in range(dim):
                diff = centroids[j, k] - x[k]
                d2 += diff * diff
            if d2 < best:
                best = d2
                win = j
        a = alphas[step]
        for k in range(dim):
            centroids[win, k] -= a * (centroids[win, k] - x[k])


def train_dictionary(images, n=10, iterations=50_000, rng=None, patches_per_image=100,
                     size=PATCH_SIZE):
    """Learn intensity and gradient textons from `images`."""
    images = list(images)
    if not images:
        raise ValueError("train_dictionary needs at least one image")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    inten, grad = [], []
    for img in images:
        img = np.asarray(img, dtype=float)
        rows, cols = sample_positions(img.shape, patches_per_image, rng, size)
        inten.append(patches_at(img, rows, cols, size))
        grad.append(patches_at(gradient_image(img), rows, cols, size))
    intensity = kohonen(np.vstack(inten), n, iterations, rng)
    gradient = kohonen(np.vstack(grad), n, iterations, rng)
    return TextonDictionary(intensity, gradient, size=size)


@dataclass(frozen=True)
class FeatureVector:
    histogram: np.ndarray  # intensity bins then gradient bins
    entropy: float

    def as_array(self):
        return np.append(self.histogram, self.entropy)


def texton_histogram(img, dictionary, m=500, rng=None):
    """Joint intensity+gradient texton histogram of `img` plus its entropy.

    Every sampled location adds one count to its nearest intensity texton
    and one to the nearest gradient texton of the co-located gradient
    patch; the 2n bins are normalised together.
    """
    img = np.ascontiguousarray(img, dtype=float)
    rng = np.random.default_rng() if rng is None else rng
    size = dictionary.size
    rows, cols = sample_positions(img.shape, m, rng, size)
    n = dictionary.n
    inten = _nearest_cols(_gather_t(img, rows, cols, size), dictionary.intensity)
    grad = _nearest_cols(_gather_t(gradient_image(img), rows, cols, size), dictionary.gradient)
    counts = np.concatenate([np.bincount(inten, minlength=n), np.bincount(grad, minlength=n)])
    hist = counts / (2.0 * m)
    return FeatureVector(hist, shannon_entropy(hist))
