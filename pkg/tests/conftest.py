import pytest

from swarmalloc.grid import S, Outcome, build_world
from swarmalloc.hhta import HhtaParams, HhtaPolicy
from swarmalloc.prop import FollowerPolicy, deploy_propagators
from swarmalloc.rng import RngStream
from swarmalloc.tasks import HomeRect, TaskSpec, place_tasks


class ScriptedPolicy:
    """Agents claim whenever they stand on a task, otherwise follow ``moves``."""

    influence_radius = 0

    def __init__(self, moves=None):
        self.moves = moves or {}

    def begin_round(self, world, rng):
        pass

    def transition(self, world, agent_id, state, pos, mapping, rng):
        if world.vertex_state(pos).is_task and state != "done":
            return Outcome("done", S, claim=True)
        return Outcome(state, self.moves.get(agent_id, S))

    def end_round(self, world, rng):
        pass


def small_setup(algorithm, seed=3, size=16, agents=24, T=3, demand=18, d_p=8.0, r_p=2):
    home = HomeRect.centered(size, size, 3)
    rng = RngStream(seed)
    tasks = place_tasks(rng.spawn(99), TaskSpec(T, demand), size, size, home)
    if algorithm == "HHTA":
        policy = HhtaPolicy(HhtaParams(L=1 / (2 * size)))
    else:
        policy = FollowerPolicy(2)
    world = build_world(size, size, home, tasks, policy.initial_states(agents))
    if algorithm == "PROP":
        policy.field = deploy_propagators(world, d_p, r_p)
    return world, policy, rng


@pytest.fixture(params=["RW", "HHTA", "PROP"])
def algorithm(request):
    return request.param


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = config.stash.get(ACCEPTANCE, None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report):
        terminalreporter.write_line(report[number])
