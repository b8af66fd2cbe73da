"""Propagation-based task allocation (PROP) and the Levy-walk baseline.

Propagators are stationary, one per vertex, and gossip ``task -> residual
demand`` knowledge to their eight neighbours every ``r_p`` rounds, but only to
neighbours within Euclidean distance ``d_p`` of the task. Followers perform the
tasks: they head for a task they can sense, otherwise pick one from the
co-located propagator's knowledge with weight ``rd / distance**2``, otherwise
take a Levy-walk step.

The baseline walker is a follower that never has propagator knowledge.

Two implementations of the propagator layer exist. The per-propagator
functions (:func:`merge_task_info`, :func:`propagation_targets`,
:func:`propagator_transition`) are the readable reference; the engine runs
:class:`PropagatorField`, which keeps the same state as dense arrays so a
2,500-propagator grid costs a handful of numpy operations per round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .grid import S, GridWorld, LocalMapping, Outcome, Vertex, dist2, step_toward
from .levy import DEFAULT_EXPONENT, WalkState, next_step
from .rng import RngStream
from .tasks import VertexState

NEIGHBOR_OFFSETS = tuple(
    (a, b) for b in (-1, 0, 1) for a in (-1, 0, 1) if (a, b) != (0, 0)
)


# -- propagators: reference implementation ----------------------------------


@dataclass(frozen=True)
class PropagatorState:
    assigned_vertex: Vertex
    task_info: Mapping[Vertex, int] = field(default_factory=dict)
    newly_updated: frozenset = frozenset()
    propagation_rate: int = 3
    propagation_ctr: int = 0
    id: int = 0


def merge_task_info(prop: PropagatorState, location: Vertex, rd: int) -> PropagatorState:
    """Keep the smaller of the stored and incoming residual demand.

    Residual demand only ever falls, so the smaller value is the fresher one.
    The location is marked newly updated when the stored value changes or is
    first learned.
    """
    if rd < 0:
        raise ValueError("residual demand cannot be negative")
    old = prop.task_info.get(location)
    if old is not None and old <= rd:
        return prop
    info = dict(prop.task_info)
    info[location] = rd
    return replace(prop, task_info=info, newly_updated=prop.newly_updated | {location})


def within_radius(v: Vertex, location: Vertex, d_p: float) -> bool:
    return dist2(v, location) <= d_p * d_p + 1e-9


def propagation_targets(
    vertex: Vertex, location: Vertex, d_p: float, width: int, height: int
) -> list[Vertex]:
    """In-grid 8-neighbours of ``vertex`` within ``d_p`` of ``location``."""
    out = []
    for a, b in NEIGHBOR_OFFSETS:
        n = (vertex[0] + a, vertex[1] + b)
        if 0 <= n[0] < width and 0 <= n[1] < height and within_radius(n, location, d_p):
            out.append(n)
    return out


def propagator_transition(
    prop: PropagatorState,
    vertex_state: VertexState,
    d_p: float,
    width: int,
    height: int,
) -> tuple[VertexState, PropagatorState, str, list[tuple[Vertex, Vertex, int]], int]:
    """One round of a single propagator.

    Returns ``(vertex_state, new_state, "S", deliveries, messages_sent)`` where
    each delivery is ``(target, task_location, rd)``; deliveries are merged into
    their targets after the round. The counter is advanced before it is
    compared, so propagation happens on every ``r_p``-th round.
    """
    new = prop
    if vertex_state.is_task:
        new = merge_task_info(new, prop.assigned_vertex, vertex_state.residual_demand)
    ctr = new.propagation_ctr + 1
    if ctr < new.propagation_rate:
        return vertex_state, replace(new, propagation_ctr=ctr), S, [], 0
    deliveries = []
    receivers = set()
    for loc in sorted(new.newly_updated):
        for target in propagation_targets(new.assigned_vertex, loc, d_p, width, height):
            deliveries.append((target, loc, new.task_info[loc]))
            receivers.add(target)
    new = replace(new, newly_updated=frozenset(), propagation_ctr=0)
    return vertex_state, new, S, deliveries, len(receivers)


# -- propagators: vectorized layer used by the engine -----------------------

UNKNOWN = np.iinfo(np.int32).max


def _shift_slices(a: int, b: int, width: int, height: int):
    """Slices mapping a sender region onto the receiver region at offset (a, b)."""
    src_x = slice(max(0, -a), width - max(0, a))
    dst_x = slice(max(0, a), width - max(0, -a))
    src_y = slice(max(0, -b), height - max(0, b))
    dst_y = slice(max(0, b), height - max(0, -b))
    return src_x, src_y, dst_x, dst_y


class PropagatorField:
    """Every propagator's task knowledge as ``(task, x, y)`` arrays.

    ``known[i, x, y]`` is the residual demand the propagator at ``(x, y)``
    believes task ``i`` has (``UNKNOWN`` if it has not heard of it) and
    ``fresh`` is its newly-updated flag. All counters start at zero and stay
    synchronized, so a single counter stands in for all of them.
    """

    def __init__(
        self,
        width: int,
        height: int,
        task_locations: list[Vertex],
        d_p: float,
        r_p: int,
        first_id: int = 0,
    ):
        if r_p < 1:
            raise ValueError("propagation timeout r_p must be at least 1")
        if d_p < 0:
            raise ValueError("propagation radius d_p must be non-negative")
        self.width = width
        self.height = height
        self.locations = list(task_locations)
        self.index = {loc: i for i, loc in enumerate(self.locations)}
        self.d_p = d_p
        self.r_p = r_p
        self.first_id = first_id
        n = len(self.locations)
        self.known = np.full((n, width, height), UNKNOWN, dtype=np.int32)
        self.fresh = np.zeros((n, width, height), dtype=bool)
        xs, ys = np.meshgrid(np.arange(width), np.arange(height), indexing="ij")
        self.reach = np.zeros((n, width, height), dtype=bool)
        for i, (lx, ly) in enumerate(self.locations):
            self.reach[i] = (xs - lx) ** 2 + (ys - ly) ** 2 <= d_p * d_p + 1e-9
        self.counter = 0
        self.sent = np.zeros((width, height), dtype=np.int64)
        self._snapshot: list[int] = []
        self._slices = [(a, b, _shift_slices(a, b, width, height)) for a, b in NEIGHBOR_OFFSETS]

    def propagator_id(self, v: Vertex) -> int:
        return self.first_id + v[1] * self.width + v[0]

    def snapshot(self, world: GridWorld) -> None:
        """Record the residual demands propagators at tasks read this round."""
        self._snapshot = [world.tasks[loc].residual_demand for loc in self.locations]

    def advance(self) -> None:
        """Finish the round: merge own-task readings, then maybe propagate."""
        for i, (lx, ly) in enumerate(self.locations):
            rd = self._snapshot[i] if self._snapshot else None
            if rd is not None and rd < self.known[i, lx, ly]:
                self.known[i, lx, ly] = rd
                self.fresh[i, lx, ly] = True
        self.counter += 1
        if self.counter >= self.r_p:
            self._propagate()
            self.counter = 0

    def _propagate(self) -> None:
        if not self.locations:
            return
        n = len(self.locations)
        active = np.flatnonzero(self.fresh.reshape(n, -1).any(axis=1))
        if active.size == 0:
            return
        fresh = self.fresh[active]
        known = self.known[active]
        reach = self.reach[active]
        vals = np.where(fresh, known, UNKNOWN)
        new = known.copy()
        for _a, _b, (sx, sy, dx, dy) in self._slices:
            delivered = fresh[:, sx, sy] & reach[:, dx, dy]
            self.sent[sx, sy] += delivered.any(axis=0)
            cand = np.where(delivered, vals[:, sx, sy], UNKNOWN)
            new[:, dx, dy] = np.minimum(new[:, dx, dy], cand)
        self.fresh[:] = False
        self.fresh[active] = new < known
        self.known[active] = new

    def entries_at(self, v: Vertex) -> dict[Vertex, int]:
        """Positive-demand knowledge held by the propagator at ``v``."""
        col = self.known[:, v[0], v[1]]
        idx = np.flatnonzero((col > 0) & (col != UNKNOWN))
        return {self.locations[i]: int(col[i]) for i in idx}

    def state_at(self, v: Vertex) -> PropagatorState:
        col = self.known[:, v[0], v[1]]
        info = {self.locations[i]: int(col[i]) for i in np.flatnonzero(col != UNKNOWN)}
        newly = frozenset(self.locations[i] for i in np.flatnonzero(self.fresh[:, v[0], v[1]]))
        return PropagatorState(v, info, newly, self.r_p, self.counter, self.propagator_id(v))

    def message_total(self) -> int:
        return int(self.sent.sum())

    def message_counts(self) -> dict[int, int]:
        xs, ys = np.nonzero(self.sent)
        return {self.propagator_id((int(x), int(y))): int(self.sent[x, y]) for x, y in zip(xs, ys)}


# -- followers ----------------------------------------------------------------


@dataclass(frozen=True)
class FollowerState:
    id: int
    destination_task: Vertex | None = None
    committed_task: Vertex | None = None
    walk: WalkState | None = None


def task_choice_distribution(entries: Mapping[Vertex, int], pos: Vertex) -> dict[Vertex, float]:
    """Probability of heading to each task: demand over squared distance, normalized."""
    if not entries:
        raise ValueError("no task information to choose from")
    weights = {}
    for loc, rd in entries.items():
        if rd <= 0:
            raise ValueError(f"task {loc} has non-positive demand {rd}")
        d2 = dist2(loc, pos)
        if d2 == 0:
            raise ValueError("follower is standing on a candidate task")
        weights[loc] = rd / d2
    total = math.fsum(weights.values())
    return {loc: w / total for loc, w in weights.items()}


def nearest_open_task(mapping: LocalMapping, pos: Vertex, rng: RngStream) -> Vertex | None:
    best: list[Vertex] = []
    best_d = None
    for loc, vs in mapping.tasks():
        if vs.residual_demand <= 0:
            continue
        d = dist2(loc, pos)
        if best_d is None or d < best_d:
            best, best_d = [loc], d
        elif d == best_d:
            best.append(loc)
    if not best:
        return None
    if len(best) == 1:
        return best[0]
    return rng.choice(sorted(best))


def _draw(probs: dict[Vertex, float], rng: RngStream) -> Vertex:
    u = rng.random()
    acc = 0.0
    last = None
    for loc in sorted(probs):
        acc += probs[loc]
        last = loc
        if u < acc:
            return loc
    return last


def follower_transition(
    f: FollowerState,
    pos: Vertex,
    mapping: LocalMapping,
    world: GridWorld,
    rng: RngStream,
    propagator_entries: Mapping[Vertex, int] | None,
    max_leg: float,
    exponent: float = DEFAULT_EXPONENT,
) -> Outcome:
    if f.committed_task is not None:
        return Outcome(f, S)
    dest = f.destination_task
    if dest is not None:
        # reads the destination vertex directly, even when out of sensing range
        vs = world.tasks.get(dest)
        if vs is None or vs.residual_demand == 0:
            return Outcome(replace(f, destination_task=None), S)
        if dest == pos:
            return Outcome(replace(f, committed_task=dest, destination_task=None), S, claim=True)
        return Outcome(f, step_toward(pos, dest, rng))
    found = nearest_open_task(mapping, pos, rng)
    if found is not None:
        if found == pos:
            return Outcome(replace(f, committed_task=found), S, claim=True)
        return Outcome(replace(f, destination_task=found), step_toward(pos, found, rng))
    if propagator_entries:
        candidates = {loc: rd for loc, rd in propagator_entries.items() if rd > 0 and loc != pos}
        if candidates:
            target = _draw(task_choice_distribution(candidates, pos), rng)
            return Outcome(f, step_toward(pos, target, rng))
    direction, walk = next_step(f.walk, pos, rng, max_leg, exponent)
    return Outcome(replace(f, walk=walk), direction)


class FollowerPolicy:
    """Followers guided by a propagator field, or plain Levy walkers without one."""

    def __init__(
        self,
        influence_radius: int = 2,
        field: PropagatorField | None = None,
        exponent: float = DEFAULT_EXPONENT,
        max_leg: float | None = None,
    ):
        self.influence_radius = influence_radius
        self.field = field
        self.exponent = exponent
        self.max_leg = max_leg

    def initial_states(self, n_agents: int) -> list[FollowerState]:
        return [FollowerState(i) for i in range(n_agents)]

    def begin_round(self, world: GridWorld, rng: RngStream) -> None:
        if self.max_leg is None:
            self.max_leg = float(world.width + world.height)
        if self.field is not None:
            self.field.snapshot(world)

    def transition(self, world, agent_id, state, pos, mapping, rng) -> Outcome:
        entries = None
        if self.field is not None and state.committed_task is None and state.destination_task is None:
            entries = self.field.entries_at(pos)
        return follower_transition(state, pos, mapping, world, rng, entries, self.max_leg, self.exponent)

    def end_round(self, world: GridWorld, rng: RngStream) -> None:
        if self.field is not None:
            self.field.advance()

    def message_total(self) -> int:
        return self.field.message_total() if self.field is not None else 0

    def message_counts(self) -> dict[int, int]:
        return self.field.message_counts() if self.field is not None else {}

    def message_classes(self, world: GridWorld):
        populations = {"agent": len(world.positions)}
        sent = {"agent": 0}
        if self.field is not None:
            populations["propagator"] = world.width * world.height
            sent["propagator"] = self.field.message_total()
        return populations, sent


def deploy_propagators(world: GridWorld, d_p: float, r_p: int) -> PropagatorField:
    """One propagator per vertex, already on its assigned vertex at round 0.

    Propagator ids follow the follower ids in row-major vertex order.
    """
    return PropagatorField(
        world.width, world.height, sorted(world.tasks), d_p, r_p, first_id=len(world.positions)
    )


def deployment_offset(width: int, height: int) -> int:
    """Rounds the propagators would need to walk out to their vertices."""
    return (width + height) // 2
