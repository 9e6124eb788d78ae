"""Textured rectangular room, drone kinematics, column raycast renderer and
the stereo average-disparity oracle.

Coordinates: x to the east, y to the north, headings counter-clockwise
from +x. Walls are indexed west (x=0), east (x=width), south (y=0),
north (y=depth).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numba
import numpy as np

from . import pgm
from .behavior import BehaviorConfig, FsmState, fsm_step, wrap_angle

WEST, EAST, SOUTH, NORTH = range(4)


class OutOfBounds(ValueError):
    pass


def _value_noise(shape, cell, rng):
    """Periodic value noise: random lattice every `cell` texels, smoothstep-interpolated."""
    th, tw = shape
    gh, gw = th // cell, tw // cell
    grid = rng.random((gh, gw))

    def axis(n, g):
        pos = np.arange(n) / cell
        i0 = np.floor(pos).astype(int)
        f = pos - i0
        f = f * f * (3.0 - 2.0 * f)
        return i0 % g, (i0 + 1) % g, f

    y0, y1, fy = axis(th, gh)
    x0, x1, fx = axis(tw, gw)
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x1] * fx
    bot = grid[y1][:, x0] * (1 - fx) + grid[y1][:, x1] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


def make_textures(seed, shape=(128, 160), cells=(32, 8, 2), amplitudes=(0.5, 0.35, 0.15)):
    """Four band-limited wall textures, each rescaled to span [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    out = np.empty((4,) + tuple(shape))
    for w in range(4):
        tex = sum(a * _value_noise(shape, c, rng) for c, a in zip(cells, amplitudes))
        lo, hi = tex.min(), tex.max()
        out[w] = 0.1 + 0.8 * (tex - lo) / (hi - lo)
    return out


@dataclass(frozen=True)
class World:
    width: float = 10.0
    depth: float = 10.0
    texture_seed: int = 0
    texture_scale: float = 1.0 / 64.0  # meters per texel, exact in binary
    wall_height: float = 2.5
    camera_height: float = 1.25
    margin: float = 0.2  # closest the drone centre may get to a wall
    textures: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.width > 0 and self.depth > 0):
            raise ValueError("world width and depth must be positive")
        if not self.texture_scale > 0:
            raise ValueError("texture_scale must be positive")
        if not 0 < self.camera_height < self.wall_height:
            raise ValueError("camera must sit between floor and wall top")
        if not 0 <= self.margin < min(self.width, self.depth) / 2:
            raise ValueError("margin too large for the room")
        if self.textures is None:
            object.__setattr__(self, "textures", make_textures(self.texture_seed))
        tex = self.textures
        if tex.ndim != 3 or tex.shape[0] != 4:
            raise ValueError("textures must have shape (4, rows, cols)")
        if np.ptp(tex.reshape(4, -1), axis=1).min() <= 0:
            raise ValueError("wall textures must not be constant")
        tex.setflags(write=False)

    @property
    def texture_period(self):
        """Horizontal repeat length of the wall texture, in meters."""
        return self.textures.shape[2] * self.texture_scale

    def inside(self, x, y):
        return 0.0 < x < self.width and 0.0 < y < self.depth


@dataclass(frozen=True)
class DroneState:
    x: float
    y: float
    heading: float = 0.0
    forward_speed: float = 0.5


@dataclass(frozen=True)
class CameraModel:
    hfov: float = math.radians(60.0)
    width: int = 128
    height: int = 96
    bf: float = 10.0  # baseline times focal length, px*m
    disparity_max: float = 32.0
    noise_sigma: float = 0.25

    def __post_init__(self):
        if not 0 < self.hfov < math.pi:
            raise ValueError("hfov must lie in (0, pi)")
        if not self.bf > 0:
            raise ValueError("bf must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        if not self.disparity_max > 0:
            raise ValueError("disparity_max must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def focal(self):
        return (self.width / 2.0) / math.tan(self.hfov / 2.0)

    @property
    def column_angles(self):
        """Ray angle of each pixel column relative to the heading (left is positive)."""
        u = self.width / 2.0 - (np.arange(self.width) + 0.5)
        return np.arctan(u / self.focal)


def _check_pose(world, x, y):
    if not world.inside(x, y):
        raise OutOfBounds(f"out-of-bounds: ({x}, {y}) is not inside the room")


def cast_rays(world, x, y, angles):
    """Vectorised ray/wall intersection from (x, y) along absolute `angles`.

    Returns (distance, texcoord, wall) arrays; texcoord is the hit position
    along the wall in texels.
    """
    _check_pose(world, x, y)
    angles = np.asarray(angles, dtype=float)
    dx = np.cos(angles)
    dy = np.sin(angles)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(dx > 0, (world.width - x) / dx, np.where(dx < 0, -x / dx, np.inf))
        ty = np.where(dy > 0, (world.depth - y) / dy, np.where(dy < 0, -y / dy, np.inf))
    hit_x = tx <= ty
    dist = np.where(hit_x, tx, ty)
    wall = np.where(hit_x, np.where(dx > 0, EAST, WEST), np.where(dy > 0, NORTH, SOUTH))
    along = np.where(hit_x, y + dist * dy, x + dist * dx)
    return dist, along / world.texture_scale, wall


def raycast(world, pose, angle):
    """Distance (m) and texture coordinate (texels) of the wall hit at `angle`
    relative to the pose heading."""
    d, tex, _ = cast_rays(world, pose.x, pose.y, np.array([pose.heading + angle]))
    return float(d[0]), float(tex[0])


@dataclass(frozen=True)
class ColumnHits:
    distance: np.ndarray
    depth: np.ndarray  # distance projected on the principal axis
    texcoord: np.ndarray
    wall: np.ndarray


def column_hits(world, pose, cam):
    rel = cam.column_angles
    dist, tex, wall = cast_rays(world, pose.x, pose.y, pose.heading + rel)
    return ColumnHits(dist, dist * np.cos(rel), tex, wall)


def _shading(cam):
    # ceiling brightens toward the top of the frame, floor darkens toward the bottom
    r = (np.arange(cam.height) + 0.5) / cam.height
    return np.where(r < 0.5, 0.85 - 0.3 * r, 0.45 - 0.3 * (r - 0.5))


def render_hits(world, hits, cam):
    """Rasterise precomputed column hits into a (height, width) image.

    Wall pixels sample the wall texture at the world height seen through
    that row, so texture detail shrinks with depth; the rest is floor or
    ceiling shading.
    """
    rows = cam.height / 2.0 - (np.arange(cam.height) + 0.5)
    return _render(world.textures, hits.depth, hits.texcoord, hits.wall.astype(np.int64),
                   rows, _shading(cam), cam.focal, world.camera_height, world.wall_height,
                   1.0 / world.texture_scale)


@numba.njit(cache=True)
def _render(textures, depth, texcoord, wall, rows, shading, focal, cam_h, wall_h, inv_scale):
    _, th, tw = textures.shape
    h = rows.shape[0]
    w = depth.shape[0]
    out = np.empty((h, w))
    for c in range(w):
        u = int(np.floor(texcoord[c])) % tw
        k = wall[c]
        step = depth[c] / focal
        for r in range(h):
            z = cam_h + rows[r] * step
            if z < 0.0 or z > wall_h:
                out[r, c] = shading[r]
            else:
                v = int(np.floor(z * inv_scale)) % th
                out[r, c] = textures[k, v, u]
    return out


def render_view(world, pose, cam):
    """Grayscale (height, width) image seen from `pose`."""
    return render_hits(world, column_hits(world, pose, cam), cam)


def disparity_from_depth(depth, cam):
    return float(np.mean(np.clip(cam.bf / depth, 0.0, cam.disparity_max)))


def add_disparity_noise(lam, cam, rng):
    if rng is None or cam.noise_sigma == 0:
        return lam
    return float(np.clip(lam + rng.normal(0.0, cam.noise_sigma), 0.0, cam.disparity_max))


def stereo_disparity(world, pose, cam, rng=None):
    """Average disparity over the image columns; noiseless when `rng` is None."""
    lam = disparity_from_depth(column_hits(world, pose, cam).depth, cam)
    return add_disparity_noise(lam, cam, rng)


def step_dynamics(state, command, dt, world):
    """Integrate one control step. Returns ``(new_state, contact)``.

    A step that would bring the drone within `world.margin` of a wall is
    clamped there, sliding along the wall, and reported as contact.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if command.kind == "turn":
        return replace(state, heading=wrap_angle(state.heading + command.rate * dt)), False
    if command.kind != "forward":
        raise ValueError(f"unknown command {command.kind!r}")
    step = state.forward_speed * dt
    x = state.x + step * math.cos(state.heading)
    y = state.y + step * math.sin(state.heading)
    m = world.margin
    cx = min(max(x, m), world.width - m)
    cy = min(max(y, m), world.depth - m)
    contact = cx != x or cy != y
    return replace(state, x=cx, y=cy, heading=wrap_angle(state.heading)), contact


def random_pose(world, rng, clearance=1.0, forward_speed=0.5):
    c = min(clearance, world.width / 2 - 1e-6, world.depth / 2 - 1e-6)
    return DroneState(float(rng.uniform(c, world.width - c)),
                      float(rng.uniform(c, world.depth - c)),
                      float(wrap_angle(rng.uniform(0.0, 2 * math.pi))),
                      forward_speed)


@dataclass
class OfflineFrame:
    image: np.ndarray
    disparity: float
    pose: DroneState


def generate_offline_dataset(world, cam, n_frames, seed, behavior=None, fps=10.0,
                             forward_speed=0.5):
    """Random walk under stereo-driven FSM control, recording (image, noiseless disparity)."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    behavior = behavior or BehaviorConfig()
    pose_rng, fsm_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    pose = random_pose(world, pose_rng, forward_speed=forward_speed)
    fsm = FsmState()
    frames = []
    for _ in range(n_frames):
        hits = column_hits(world, pose, cam)
        lam = disparity_from_depth(hits.depth, cam)
        frames.append(OfflineFrame(render_hits(world, hits, cam), lam, pose))
        cmd, fsm = fsm_step(fsm, lam, pose.heading, behavior, fsm_rng)
        pose, _ = step_dynamics(pose, cmd, 1.0 / fps, world)
    return frames


def save_offline_dataset(frames, directory):
    """Write frames as 8-bit binary PGMs plus labels.csv."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "disparity", "x", "y", "heading"])
        for i, f in enumerate(frames):
            pgm.write_pgm(directory / f"frame_{i:05d}.pgm", f.image)
            w.writerow([i, repr(f.disparity), repr(f.pose.x), repr(f.pose.y),
                        repr(f.pose.heading)])


def load_offline_dataset(directory):
    directory = Path(directory)
    labels = directory / "labels.csv"
    if not labels.exists():
        raise FileNotFoundError(f"{labels}: dataset has no labels.csv")
    frames = []
    with open(labels, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                i = int(row["frame"])
                pose = DroneState(float(row["x"]), float(row["y"]), float(row["heading"]))
                lam = float(row["disparity"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{labels}: malformed row {row}") from exc
            frames.append(OfflineFrame(pgm.read_pgm(directory / f"frame_{i:05d}.pgm"), lam, pose))
    return frames
