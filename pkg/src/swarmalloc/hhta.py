"""House-hunting task allocation (HHTA).

Agents start in the home nest in one of four core states:

* ``H`` (home) waits for recruitment messages and occasionally leaves to explore;
* ``E`` (exploring) Levy-walks until it senses a task, then either commits
  or heads home to recruit for it;
* ``R`` (recruiting) sits in the nest messaging home agents until it commits
  itself;
* ``C`` (committed) walks to its task and claims it.

Exploration rates are chosen so the long-run share of explorers among
``{H, E}`` agents equals ``P_e``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

from .grid import MOVES, S, GridWorld, Outcome, Vertex, step_toward
from .levy import DEFAULT_EXPONENT, WalkState, next_step
from .prop import nearest_open_task
from .rng import MESSAGE, RngStream
from .tasks import ConfigurationError

HOME, EXPLORE, RECRUIT, COMMIT = "H", "E", "R", "C"

# allowed core-state changes; C -> E only happens when a committed agent
# finds its task already satisfied
EDGES = frozenset(
    {
        (HOME, EXPLORE),
        (EXPLORE, HOME),
        (EXPLORE, COMMIT),
        (EXPLORE, RECRUIT),
        (HOME, COMMIT),
        (HOME, RECRUIT),
        (RECRUIT, COMMIT),
    }
)
FALLBACK_EDGE = (COMMIT, EXPLORE)


def explore_entry_probability(L: float, P_e: float) -> float:
    """Per-round chance a home agent starts exploring, ``L*P_e/(1-P_e)``."""
    if not 0.0 <= P_e < 1.0:
        raise ConfigurationError(f"P_e must lie in [0, 1), got {P_e}")
    return min(1.0, max(0.0, L * P_e / (1.0 - P_e)))


def commit_probability(P_c: float, rd: int) -> float:
    if rd < 1:
        raise ValueError("commit probability is undefined for a satisfied task")
    return max(P_c, 1.0 / rd)


def receipt_probability(r_m: float, R: int) -> float:
    """Chance a home agent hears at least one of ``R`` recruiters."""
    if R < 0:
        raise ValueError("recruiter count cannot be negative")
    return 1.0 - (1.0 - r_m) ** R


def incomplete_beta_receipt_probability(r_m: float, R: int) -> float:
    """``I_{1-r_m}(R-1, 2)``, kept as a diagnostic next to :func:`receipt_probability`.

    The two disagree in general; the engine never uses either.
    """
    from .metrics import betainc

    if R < 1:
        raise ValueError("need at least one recruiter")
    if R == 1:
        return 1.0
    return betainc(R - 1, 2, 1.0 - r_m)


@dataclass(frozen=True)
class HhtaParams:
    L: float
    P_commit: float = 0.3
    P_explore: float = 2 / 3
    message_rate: float = 1 / 6
    exponent: float = DEFAULT_EXPONENT

    @property
    def P_E(self) -> float:
        return explore_entry_probability(self.L, self.P_explore)

    @property
    def P_H(self) -> float:
        return self.L


class TaskMemory(NamedTuple):
    location: Vertex
    rd: int


class RecruitMessage(NamedTuple):
    task_location: Vertex
    remembered_rd: int
    sender: int


@dataclass(frozen=True)
class HhtaAgentState:
    id: int
    core_state: str = HOME
    walk: WalkState | None = None
    destination_task: TaskMemory | None = None
    home_destination: Vertex | None = None
    recruitment_task: TaskMemory | None = None
    committed_task: Vertex | None = None

    def check(self) -> None:
        if self.core_state == RECRUIT and self.recruitment_task is None:
            raise AssertionError(f"agent {self.id}: recruiting without a task")
        if self.core_state == COMMIT and self.committed_task is None and self.destination_task is None:
            raise AssertionError(f"agent {self.id}: committed without a task")
        if self.recruitment_task is not None and self.committed_task is not None:
            raise AssertionError(f"agent {self.id}: both recruiting and committed")
        for mem in (self.recruitment_task, self.destination_task):
            if mem is not None and mem.rd < 1:
                raise AssertionError(f"agent {self.id}: remembers a satisfied task")


def _toward_home(world: GridWorld, pos: Vertex, target: Vertex, rng: RngStream) -> tuple[str, Vertex | None]:
    d = step_toward(pos, target, rng)
    dx, dy = MOVES[d]
    if world.is_home((pos[0] + dx, pos[1] + dy)):
        return d, None
    return d, target


def hhta_transition(
    agent: HhtaAgentState,
    pos: Vertex,
    mapping,
    world: GridWorld,
    rng: RngStream,
    params: HhtaParams,
    inbox: list[RecruitMessage] = (),
    max_leg: float | None = None,
) -> Outcome:
    """The HHTA agent function for one agent and one round."""
    if max_leg is None:
        max_leg = float(world.width + world.height)
    core = agent.core_state

    if core == HOME:
        if rng.random() < params.P_E:
            d, walk = next_step(None, pos, rng, max_leg, params.exponent)
            return Outcome(replace(agent, core_state=EXPLORE, walk=walk, home_destination=None), d)
        if inbox:
            msg = inbox[0] if len(inbox) == 1 else rng.choice(inbox)
            task = TaskMemory(msg.task_location, msg.remembered_rd)
            if rng.random() < params.P_commit:
                new = replace(agent, core_state=COMMIT, destination_task=task, home_destination=None)
                return Outcome(new, step_toward(pos, task.location, rng))
            home_dest = None if world.is_home(pos) else world.home.nearest(pos)
            new = replace(agent, core_state=RECRUIT, recruitment_task=task, home_destination=home_dest)
            if home_dest is None:
                return Outcome(new, S)
            d, home_dest = _toward_home(world, pos, home_dest, rng)
            return Outcome(replace(new, home_destination=home_dest), d)
        if agent.home_destination is not None:
            # still walking back; tasks met on the way are not ignored
            found = nearest_open_task(mapping, pos, rng)
            if found is not None:
                task = TaskMemory(found, world.tasks[found].residual_demand)
                new = replace(agent, core_state=EXPLORE, destination_task=task, home_destination=None)
                return Outcome(new, step_toward(pos, found, rng))
            d, home_dest = _toward_home(world, pos, agent.home_destination, rng)
            return Outcome(replace(agent, home_destination=home_dest), d)
        return Outcome(agent, S)

    if core == EXPLORE:
        found = nearest_open_task(mapping, pos, rng)
        if found is not None:
            rd = world.tasks[found].residual_demand
            if found != pos:
                new = replace(agent, destination_task=TaskMemory(found, rd))
                return Outcome(new, step_toward(pos, found, rng))
            if rng.random() < commit_probability(params.P_commit, rd):
                new = replace(agent, core_state=COMMIT, committed_task=pos, destination_task=None, walk=None)
                return Outcome(new, S, claim=True)
            home = world.home.nearest(pos)
            d, home_dest = _toward_home(world, pos, home, rng)
            new = replace(
                agent,
                core_state=RECRUIT,
                recruitment_task=TaskMemory(pos, rd),
                destination_task=None,
                home_destination=home_dest,
                walk=None,
            )
            return Outcome(new, d)
        if rng.random() < params.P_H:
            if world.is_home(pos):
                return Outcome(replace(agent, core_state=HOME, destination_task=None, walk=None), S)
            d, home_dest = _toward_home(world, pos, world.home.nearest(pos), rng)
            new = replace(agent, core_state=HOME, destination_task=None, walk=None, home_destination=home_dest)
            return Outcome(new, d)
        d, walk = next_step(agent.walk, pos, rng, max_leg, params.exponent)
        return Outcome(replace(agent, walk=walk, destination_task=None), d)

    if core == RECRUIT:
        if agent.home_destination is not None:
            d, home_dest = _toward_home(world, pos, agent.home_destination, rng)
            return Outcome(replace(agent, home_destination=home_dest), d)
        task = agent.recruitment_task
        if rng.random() < 1.0 / task.rd:
            new = replace(agent, core_state=COMMIT, destination_task=task, recruitment_task=None)
            return Outcome(new, step_toward(pos, task.location, rng))
        return Outcome(agent, S)

    # committed
    if agent.committed_task is not None:
        return Outcome(agent, S)
    target = agent.destination_task.location
    if pos != target:
        return Outcome(agent, step_toward(pos, target, rng))
    if world.tasks[target].residual_demand == 0:
        d, walk = next_step(None, pos, rng, max_leg, params.exponent)
        return Outcome(replace(agent, core_state=EXPLORE, destination_task=None, walk=walk), d)
    new = replace(agent, committed_task=target, destination_task=None)
    return Outcome(new, S, claim=True)


def deliver_recruitment_messages(
    world: GridWorld,
    radius: int,
    r_m: float,
    rng: RngStream,
) -> dict[int, list[RecruitMessage]]:
    """Recruiters in the nest message home agents within ``radius``.

    Each (recruiter, home agent) pair succeeds independently with probability
    ``r_m``; every success counts as one message sent by the recruiter. Other
    agents are not recruitable, so no draw is made for them.
    """
    inbox: dict[int, list[RecruitMessage]] = {}
    if r_m <= 0.0 or world.home is None:
        return inbox
    states = world.states
    positions = world.positions
    occ = world.occupancy
    k = world.round + 1
    for rid in sorted(states):
        st = states[rid]
        if st.core_state != RECRUIT or st.home_destination is not None:
            continue
        pos = positions[rid]
        if not world.is_home(pos):
            continue
        targets = []
        for x in range(pos[0] - radius, pos[0] + radius + 1):
            for y in range(pos[1] - radius, pos[1] + radius + 1):
                for aid in occ.get((x, y), ()):
                    if aid != rid and states[aid].core_state == HOME:
                        targets.append(aid)
        if not targets:
            continue
        draws = rng.spawn(k, MESSAGE, rid)
        msg = RecruitMessage(st.recruitment_task.location, st.recruitment_task.rd, rid)
        sent = 0
        for aid in sorted(targets):
            if draws.random() < r_m:
                inbox.setdefault(aid, []).append(msg)
                sent += 1
        if sent:
            world.add_messages(rid, sent)
    return inbox


class HhtaPolicy:
    def __init__(self, params: HhtaParams, influence_radius: int = 2, max_leg: float | None = None):
        self.params = params
        self.influence_radius = influence_radius
        self.max_leg = max_leg
        self.inbox: dict[int, list[RecruitMessage]] = {}
        self.deliveries = 0
        self.fallbacks = 0

    def initial_states(self, n_agents: int) -> list[HhtaAgentState]:
        return [HhtaAgentState(i) for i in range(n_agents)]

    def begin_round(self, world: GridWorld, rng: RngStream) -> None:
        if self.max_leg is None:
            self.max_leg = float(world.width + world.height)
        self.inbox = deliver_recruitment_messages(
            world, self.influence_radius, self.params.message_rate, rng
        )
        self.deliveries += sum(len(v) for v in self.inbox.values())

    def transition(self, world, agent_id, state, pos, mapping, rng) -> Outcome:
        out = hhta_transition(
            state, pos, mapping, world, rng, self.params,
            self.inbox.get(agent_id, ()), self.max_leg,
        )
        if state.core_state == COMMIT and out.state.core_state == EXPLORE:
            self.fallbacks += 1
        return out

    def end_round(self, world: GridWorld, rng: RngStream) -> None:
        self.inbox = {}
