"""Tasks, demand bookkeeping and the claim-conflict rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .rng import RngStream

Vertex = tuple[int, int]


class ConfigurationError(ValueError):
    """Raised for an inconsistent world or experiment configuration."""


@dataclass(frozen=True)
class VertexState:
    is_task: bool = False
    demand: int = 0
    residual_demand: int = 0
    task_location: Vertex | None = None
    is_home: bool = False

    def __post_init__(self):
        if not 0 <= self.residual_demand <= self.demand:
            raise ValueError(
                f"residual demand {self.residual_demand} outside [0, {self.demand}]"
            )
        if self.is_task and self.is_home:
            raise ValueError("a vertex cannot be both a task and home")

    def with_residual(self, rd: int) -> "VertexState":
        return VertexState(self.is_task, self.demand, rd, self.task_location, self.is_home)


PLAIN = VertexState()
HOME = VertexState(is_home=True)


@dataclass(frozen=True)
class HomeRect:
    """Inclusive rectangle of home vertices, lower-left to upper-right."""

    x0: int
    y0: int
    x1: int
    y1: int

    @classmethod
    def centered(cls, width: int, height: int, size: int = 3) -> "HomeRect":
        x0 = max(0, width // 2 - size // 2)
        y0 = max(0, height // 2 - size // 2)
        return cls(x0, y0, x0 + size - 1, y0 + size - 1)

    def contains(self, v: Vertex) -> bool:
        return self.x0 <= v[0] <= self.x1 and self.y0 <= v[1] <= self.y1

    def cells(self) -> list[Vertex]:
        """Home vertices in row-major order (y outer, x inner)."""
        return [
            (x, y)
            for y in range(self.y0, self.y1 + 1)
            for x in range(self.x0, self.x1 + 1)
        ]

    def nearest(self, v: Vertex) -> Vertex:
        # clamping gives a vertex that is nearest in Chebyshev and Euclidean distance
        return (min(max(v[0], self.x0), self.x1), min(max(v[1], self.y0), self.y1))

    def __len__(self) -> int:
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)


@dataclass(frozen=True)
class TaskSpec:
    count: int
    total_demand: int
    demands: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError("task count must be at least 1")
        if self.demands is not None:
            if len(self.demands) != self.count:
                raise ConfigurationError("demand vector length must equal task count")
            if sum(self.demands) != self.total_demand:
                raise ConfigurationError("demand vector must sum to total demand")
            if min(self.demands) < 1:
                raise ConfigurationError("every task needs demand of at least 1")

    def demand_vector(self) -> list[int]:
        if self.demands is not None:
            return list(self.demands)
        return split_demand(self.total_demand, self.count)


def split_demand(total: int, T: int) -> list[int]:
    """Near-equal split of ``total`` over ``T`` tasks, remainder to the front.

    >>> split_demand(80, 3)
    [27, 27, 26]
    """
    if T < 1 or total < T:
        raise ConfigurationError(f"cannot split demand {total} over {T} tasks")
    base, rem = divmod(total, T)
    return [base + 1 if i < rem else base for i in range(T)]


def place_tasks(
    rng: RngStream,
    spec: TaskSpec,
    width: int,
    height: int,
    home: HomeRect | None,
) -> list[tuple[Vertex, int]]:
    """Uniformly sample ``spec.count`` distinct non-home vertices for tasks."""
    free = [
        (x, y)
        for y in range(height)
        for x in range(width)
        if home is None or not home.contains((x, y))
    ]
    if spec.count > len(free):
        raise ConfigurationError(
            f"{spec.count} tasks requested but only {len(free)} non-home vertices"
        )
    return list(zip(rng.sample(free, spec.count), spec.demand_vector()))


def claim_task(claimants: Sequence[int], rd: int, rng: RngStream) -> set[int]:
    """Admit ``min(len(claimants), rd)`` claimants, chosen uniformly at random."""
    if rd < 0:
        raise ValueError("residual demand cannot be negative")
    if len(claimants) <= rd:
        return set(claimants)
    return set(rng.sample(sorted(claimants), rd))


def total_residual(states: Iterable[VertexState]) -> int:
    return sum(s.residual_demand for s in states)
