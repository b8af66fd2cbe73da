"""Grid world and the synchronous two-phase round engine.

A round works like this. In phase one every occupied vertex is visited in
row-major order and each agent there (ascending id) proposes a new state and a
direction, reading only the configuration left by the previous round. Claims
on a task are a proposed change to the vertex state. In phase two the claims at
each vertex are reconciled: at most ``residual_demand`` claimants are accepted
and the rest keep their old state and stay put. Accepted moves are then applied
all at once; a move that would leave the grid becomes a stay.

Policies plug in through three hooks (see :class:`Policy`). Policy-private
state that never moves and never claims (PROP's propagators) may live outside
the agent table as long as it is read from the previous round's snapshot.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Iterable, Protocol

from .rng import AGENT, CLAIM, RngStream
from .tasks import (
    HOME,
    PLAIN,
    ConfigurationError,
    HomeRect,
    Vertex,
    VertexState,
    claim_task,
)

R, L, U, D, S = "R", "L", "U", "D", "S"
MOVES = {R: (1, 0), L: (-1, 0), U: (0, 1), D: (0, -1), S: (0, 0)}


def chebyshev(a: Vertex, b: Vertex) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def dist2(a: Vertex, b: Vertex) -> int:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def step_toward(pos: Vertex, target: tuple[float, float], rng: RngStream) -> str:
    """Unit axis move that most reduces Euclidean distance to ``target``.

    Exact ties between the two axes are broken by a coin flip; standing on the
    target gives ``S``.
    """
    dx = target[0] - pos[0]
    dy = target[1] - pos[1]
    ax, ay = abs(dx), abs(dy)
    if ax == 0 and ay == 0:
        return S
    if ax > ay or (ax == ay and rng.random() < 0.5):
        return R if dx > 0 else L
    return U if dy > 0 else D


@dataclass
class LocalConfiguration:
    vertex_state: VertexState
    agents_here: tuple[int, ...]
    state_of: dict[int, Any]


class LocalMapping:
    """View of every in-grid vertex within Chebyshev ``radius`` of ``center``.

    Entries are keyed by offset ``(a, b)`` and built lazily; policies that only
    need tasks should use :meth:`tasks` which avoids materializing agent maps.
    """

    __slots__ = ("world", "center", "radius", "__dict__")

    def __init__(self, world: "GridWorld", center: Vertex, radius: int):
        self.world = world
        self.center = center
        self.radius = radius

    def offsets(self) -> Iterable[tuple[int, int]]:
        cx, cy = self.center
        r = self.radius
        w, h = self.world.width, self.world.height
        for b in range(max(-r, -cy), min(r, h - 1 - cy) + 1):
            for a in range(max(-r, -cx), min(r, w - 1 - cx) + 1):
                yield a, b

    @cached_property
    def entries(self) -> dict[tuple[int, int], LocalConfiguration]:
        world = self.world
        cx, cy = self.center
        occ = world.occupancy
        out = {}
        for a, b in self.offsets():
            v = (cx + a, cy + b)
            ids = tuple(occ.get(v, ()))
            out[(a, b)] = LocalConfiguration(
                world.vertex_state(v), ids, {i: world.states[i] for i in ids}
            )
        return out

    def tasks(self) -> list[tuple[Vertex, VertexState]]:
        """Task vertices in range, as ``(location, state)`` pairs."""
        world = self.world
        cx, cy = self.center
        r = self.radius
        tasks = world.tasks
        if len(tasks) <= (2 * r + 1) ** 2:
            return [
                (v, s)
                for v, s in tasks.items()
                if abs(v[0] - cx) <= r and abs(v[1] - cy) <= r
            ]
        out = []
        for a, b in self.offsets():
            v = (cx + a, cy + b)
            s = tasks.get(v)
            if s is not None:
                out.append((v, s))
        return out

    def __len__(self) -> int:
        return sum(1 for _ in self.offsets())


@dataclass
class Outcome:
    """What ``alpha`` proposes for one agent.

    ``claim`` marks a proposed decrement of the vertex's residual demand; the
    new state and direction only take effect if the claim is admitted.
    """

    state: Any
    direction: str = S
    claim: bool = False


@dataclass
class TransitionProposal:
    vertex: Vertex
    proposed_vertex_state: VertexState
    agent_outcomes: list[tuple[int, Outcome]]


class Policy(Protocol):
    influence_radius: int

    def begin_round(self, world: "GridWorld", rng: RngStream) -> None: ...

    def transition(
        self,
        world: "GridWorld",
        agent_id: int,
        state: Any,
        pos: Vertex,
        mapping: LocalMapping,
        rng: RngStream,
    ) -> Outcome: ...

    def end_round(self, world: "GridWorld", rng: RngStream) -> None: ...


@dataclass
class GridWorld:
    width: int
    height: int
    home: HomeRect | None
    tasks: dict[Vertex, VertexState]
    positions: dict[int, Vertex]
    states: dict[int, Any]
    round: int = 0
    messages: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self._occupancy: dict[Vertex, list[int]] | None = None
        self.residual_total = sum(s.residual_demand for s in self.tasks.values())

    def in_grid(self, v: Vertex) -> bool:
        return 0 <= v[0] < self.width and 0 <= v[1] < self.height

    def vertex_state(self, v: Vertex) -> VertexState:
        s = self.tasks.get(v)
        if s is not None:
            return s
        if self.home is not None and self.home.contains(v):
            return HOME
        return PLAIN

    def is_home(self, v: Vertex) -> bool:
        return self.home is not None and self.home.contains(v)

    @property
    def occupancy(self) -> dict[Vertex, list[int]]:
        """Vertex -> ascending agent ids; rebuilt lazily after each round."""
        if self._occupancy is None:
            occ: dict[Vertex, list[int]] = {}
            for aid in sorted(self.positions):
                occ.setdefault(self.positions[aid], []).append(aid)
            self._occupancy = occ
        return self._occupancy

    def local_configuration(self, v: Vertex) -> LocalConfiguration:
        ids = tuple(self.occupancy.get(v, ()))
        return LocalConfiguration(self.vertex_state(v), ids, {i: self.states[i] for i in ids})

    def place(self, agent_id: int, v: Vertex) -> None:
        if not self.in_grid(v):
            raise ValueError(f"{v} is outside the grid")
        self.positions[agent_id] = v
        self._occupancy = None

    def add_messages(self, agent_id: int, n: int = 1) -> None:
        self.messages[agent_id] = self.messages.get(agent_id, 0) + n


def build_world(
    width: int,
    height: int,
    home: HomeRect | None,
    tasks: list[tuple[Vertex, int]],
    agent_states: list[Any],
) -> GridWorld:
    """World at round 0 with agent ``i`` on home cell ``i mod |home|``.

    ``agent_states[i]`` becomes the state of agent ``i``. Without a home
    rectangle every agent starts at the grid center.
    """
    if width < 1 or height < 1:
        raise ConfigurationError("grid dimensions must be positive")
    if home is not None:
        if not (0 <= home.x0 <= home.x1 < width and 0 <= home.y0 <= home.y1 < height):
            raise ConfigurationError(f"home rectangle {home} outside {width}x{height} grid")
    vstates: dict[Vertex, VertexState] = {}
    for loc, demand in tasks:
        loc = (int(loc[0]), int(loc[1]))
        if not (0 <= loc[0] < width and 0 <= loc[1] < height):
            raise ConfigurationError(f"task at {loc} is outside the grid")
        if loc in vstates:
            raise ConfigurationError(f"two tasks at {loc}")
        if home is not None and home.contains(loc):
            raise ConfigurationError(f"task at {loc} lies on a home vertex")
        if demand < 1:
            raise ConfigurationError(f"task at {loc} has demand {demand} < 1")
        vstates[loc] = VertexState(True, demand, demand, loc)
    starts = home.cells() if home is not None else [(width // 2, height // 2)]
    positions = {i: starts[i % len(starts)] for i in range(len(agent_states))}
    states = dict(enumerate(agent_states))
    return GridWorld(width, height, home, vstates, positions, states)


def neighborhood(world: GridWorld, v: Vertex, radius: int) -> LocalMapping:
    if radius < 0:
        raise ValueError("influence radius must be non-negative")
    return LocalMapping(world, v, radius)


def _row_major(v: Vertex) -> tuple[int, int]:
    return (v[1], v[0])


def step(
    world: GridWorld,
    policy: Policy,
    rng: RngStream,
    vertex_order: Callable[[list[Vertex]], list[Vertex]] | None = None,
) -> GridWorld:
    """Advance ``world`` by one round in place and return it.

    ``vertex_order`` reorders phase-one processing; results must not depend on
    it (keyed random draws), which the test-suite checks.
    """
    k = world.round + 1
    occ = world.occupancy
    policy.begin_round(world, rng)
    radius = policy.influence_radius
    states = world.states
    round_rng = rng.spawn(k)

    vertices = sorted(occ, key=_row_major)
    if vertex_order is not None:
        vertices = vertex_order(vertices)

    proposals: list[TransitionProposal] = []
    for v in vertices:
        mapping = LocalMapping(world, v, radius)
        outcomes = []
        n_claims = 0
        for aid in occ[v]:
            out = policy.transition(world, aid, states[aid], v, mapping, round_rng.spawn(AGENT, aid))
            n_claims += out.claim
            outcomes.append((aid, out))
        vs = world.vertex_state(v)
        if n_claims:
            vs = vs.with_residual(max(0, vs.residual_demand - n_claims))
        proposals.append(TransitionProposal(v, vs, outcomes))

    proposals.sort(key=lambda p: _row_major(p.vertex))
    positions = world.positions
    w, h = world.width, world.height
    for prop in proposals:
        v = prop.vertex
        claimants = [aid for aid, out in prop.agent_outcomes if out.claim]
        winners: set[int] = set()
        if claimants:
            vs = world.tasks.get(v)
            rd = vs.residual_demand if vs is not None else 0
            winners = claim_task(claimants, rd, round_rng.spawn(CLAIM, v[0], v[1]))
            if winners:
                world.tasks[v] = vs.with_residual(rd - len(winners))
                world.residual_total -= len(winners)
        for aid, out in prop.agent_outcomes:
            if out.claim and aid not in winners:
                continue
            states[aid] = out.state
            if out.direction != S:
                dx, dy = MOVES[out.direction]
                nx, ny = v[0] + dx, v[1] + dy
                if 0 <= nx < w and 0 <= ny < h:
                    positions[aid] = (nx, ny)

    world._occupancy = None
    policy.end_round(world, rng)
    world.round = k
    return world


@dataclass
class TrialTrace:
    residual: list[int]
    messages: dict[int, int]
    populations: dict[str, int]
    class_messages: dict[str, int]
    messages_per_round: list[int]
    completion_round: int | None
    timeout: bool
    fingerprint: str = ""
    seed: int | None = None

    @property
    def elapsed_rounds(self) -> int:
        return len(self.residual) - 1


def fingerprint(params: dict) -> str:
    blob = json.dumps(params, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


def run_trial(
    world: GridWorld,
    policy: Policy,
    rng: RngStream,
    max_rounds: int,
    observer: Callable[[GridWorld], None] | None = None,
    params: dict | None = None,
) -> TrialTrace:
    """Step until total residual demand is zero or ``max_rounds`` elapse."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    residual = [world.residual_total]
    per_round = []
    sent_before = policy_message_total(world, policy)
    while world.residual_total > 0 and world.round < max_rounds:
        step(world, policy, rng)
        residual.append(world.residual_total)
        sent = policy_message_total(world, policy)
        per_round.append(sent - sent_before)
        sent_before = sent
        if observer is not None:
            observer(world)
    done = world.residual_total == 0
    messages = dict(world.messages)
    extra = getattr(policy, "message_counts", None)
    if extra is not None:
        messages.update(extra())
    populations, class_messages = policy_classes(world, policy)
    return TrialTrace(
        residual=residual,
        messages=messages,
        populations=populations,
        class_messages=class_messages,
        messages_per_round=per_round,
        completion_round=len(residual) - 1 if done else None,
        timeout=not done,
        fingerprint=fingerprint(params or {}),
        seed=rng.seed,
    )


def policy_message_total(world: GridWorld, policy: Policy) -> int:
    total = sum(world.messages.values())
    extra = getattr(policy, "message_total", None)
    if extra is not None:
        total += extra()
    return total


def policy_classes(world: GridWorld, policy: Policy) -> tuple[dict[str, int], dict[str, int]]:
    classes = getattr(policy, "message_classes", None)
    if classes is not None:
        return classes(world)
    return {"agent": len(world.positions)}, {"agent": sum(world.messages.values())}
