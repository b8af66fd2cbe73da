"""Levy-flight random walk on the 4-neighborhood.

A leg is a uniformly random heading and a power-law length with density
proportional to ``l**-mu`` on ``[1, max_length]``. The walker follows the leg
one axis step at a time, always taking the axis move that most reduces the
distance to the leg's endpoint.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .grid import D, L, R, U, Vertex
from .rng import RngStream

DEFAULT_EXPONENT = 2.0


class WalkState(NamedTuple):
    angle: float
    starting_point: Vertex
    travel_distance: float
    progress: float = 0.0

    @property
    def endpoint(self) -> tuple[float, float]:
        return (
            self.starting_point[0] + self.travel_distance * math.cos(self.angle),
            self.starting_point[1] + self.travel_distance * math.sin(self.angle),
        )


def leg_length_ccdf(length: float, max_length: float, exponent: float = DEFAULT_EXPONENT) -> float:
    """P(leg > length) for the truncated power law."""
    if length <= 1.0:
        return 1.0
    if length >= max_length:
        return 0.0
    a = exponent - 1.0
    tail = max_length ** -a
    return (length ** -a - tail) / (1.0 - tail)


def sample_length(rng: RngStream, max_length: float, exponent: float = DEFAULT_EXPONENT) -> float:
    # inverse-CDF draw from the truncated law
    if exponent <= 1.0:
        raise ValueError("Levy exponent must exceed 1")
    if max_length <= 1.0:
        return 1.0
    a = exponent - 1.0
    tail = max_length ** -a
    u = rng.random()
    return min(max_length, (1.0 - u * (1.0 - tail)) ** (-1.0 / a))


def sample_leg(rng: RngStream, max_length: float, exponent: float = DEFAULT_EXPONENT) -> tuple[float, float]:
    angle = rng.uniform_angle()
    return angle, sample_length(rng, max_length, exponent)


def new_walk(pos: Vertex, rng: RngStream, max_length: float, exponent: float = DEFAULT_EXPONENT) -> WalkState:
    angle, dist = sample_leg(rng, max_length, exponent)
    return WalkState(angle, pos, dist, 0.0)


_AXES = (R, L, U, D)


def next_step(
    walk: WalkState | None,
    pos: Vertex,
    rng: RngStream,
    max_length: float,
    exponent: float = DEFAULT_EXPONENT,
) -> tuple[str, WalkState]:
    """One step of the walk from ``pos``; never returns a stay.

    A missing or exhausted leg is replaced by a fresh one starting at ``pos``.
    """
    if walk is None or walk.progress >= walk.travel_distance:
        walk = new_walk(pos, rng, max_length, exponent)
    ex, ey = walk.endpoint
    dx = ex - pos[0]
    dy = ey - pos[1]
    ax, ay = abs(dx), abs(dy)
    if ax > ay:
        direction = R if dx > 0 else L
    elif ay > ax:
        direction = U if dy > 0 else D
    elif ax == 0.0:
        direction = _AXES[rng.below(4)]
    elif rng.random() < 0.5:
        direction = R if dx > 0 else L
    else:
        direction = U if dy > 0 else D
    return direction, walk._replace(progress=walk.progress + 1.0)
