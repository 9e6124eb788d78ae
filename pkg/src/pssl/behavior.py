"""Obstacle-avoidance state machine driven by a single average-disparity value.

Forward flight continues while the disparity stays at or below the
threshold. Above it the drone picks a random new heading, rotates toward
it, and once aligned keeps rotating the same way until the view is clear.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle to [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


class Command(NamedTuple):
    kind: str  # "forward" or "turn"
    rate: float = 0.0  # rad/s, positive counter-clockwise


FORWARD = Command("forward")


def turn(rate):
    return Command("turn", float(rate))


class Mode(enum.Enum):
    FORWARD = 0
    PICK_DIRECTION = 1
    TURNING = 2


class Direction(enum.IntEnum):
    CW = -1
    CCW = 1


@dataclass(frozen=True)
class BehaviorConfig:
    t: float = 20.0 / 3.0  # disparity at 1.5 m with bf = 10
    t_e: float = math.radians(5.0)
    turn_rate: float = math.radians(90.0)

    def validate(self, disparity_max=None):
        if not self.t > 0:
            raise ValueError("behavior.t must be > 0")
        if disparity_max is not None and not self.t < disparity_max:
            raise ValueError("behavior.t must be below camera.disparity_max")
        if not self.t_e > 0:
            raise ValueError("behavior.t_e must be > 0")
        if not self.turn_rate > 0:
            raise ValueError("behavior.turn_rate must be > 0")


@dataclass(frozen=True)
class FsmState:
    mode: Mode = Mode.FORWARD
    target_heading: float | None = None
    turn_direction: Direction | None = None
    # target reached while the view was still blocked; keep turning until clear
    aligned: bool = False
    # this step passed through PickDirection
    picked: bool = False

    def __post_init__(self):
        if self.mode is Mode.TURNING and (self.target_heading is None
                                          or self.turn_direction is None):
            raise ValueError("Turning state needs a target heading and direction")


def heading_error(state, heading):
    return wrap_angle(state.target_heading - heading)


def _turning(state, lam, heading, cfg, picked):
    rotate = turn(int(state.turn_direction) * cfg.turn_rate)
    if not state.aligned and abs(heading_error(state, heading)) > cfg.t_e:
        return rotate, replace(state, picked=picked)
    if lam <= cfg.t:
        return FORWARD, FsmState(Mode.FORWARD, picked=picked)
    return rotate, replace(state, aligned=True, picked=picked)


def _pick(lam, heading, cfg, rng):
    target = float(rng.uniform(0.0, TWO_PI))
    e = wrap_angle(target - heading)
    direction = Direction.CCW if e >= 0 else Direction.CW
    return _turning(FsmState(Mode.TURNING, target, direction), lam, heading, cfg, True)


def fsm_step(state, lam, heading, cfg, rng):
    """Advance the FSM one control step; returns ``(command, new_state)``."""
    if lam < 0:
        raise ValueError("disparity must be non-negative")
    if state.mode is Mode.FORWARD:
        if lam <= cfg.t:
            return FORWARD, FsmState(Mode.FORWARD)
        return _pick(lam, heading, cfg, rng)
    if state.mode is Mode.PICK_DIRECTION:
        return _pick(lam, heading, cfg, rng)
    return _turning(state, lam, heading, cfg, False)


def force_pick(lam, heading, cfg, rng):
    """Jump straight to PickDirection, as a safety override does."""
    return _pick(lam, heading, cfg, rng)
