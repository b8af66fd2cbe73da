"""Acceptance gate: statistical and exact checks at fixed seeds.

Every sweep uses seeds ``0 .. trials-1`` (the harness default ``base_seed = 0``),
so reruns are exact. Each test prints one ``PASS``/``FAIL`` line and the same
lines are repeated in the pytest terminal summary.

Run just this file with ``pytest tests/test_acceptance.py -s``.
"""

import math
import random
from functools import lru_cache

import mpmath
import numpy as np
import pytest

from swarmalloc.config import ExperimentConfig
from swarmalloc.grid import run_trial, step
from swarmalloc.harness import completion_times, run_sweep_rows
from swarmalloc.hhta import EDGES, FALLBACK_EDGE, explore_entry_probability
from swarmalloc.metrics import betainc, summarize, welch_t_test
from swarmalloc.prop import (
    UNKNOWN,
    PropagatorState,
    merge_task_info,
    task_choice_distribution,
)
from swarmalloc.rng import RngStream
from swarmalloc.tasks import claim_task

from conftest import small_setup

ALPHA = 0.05
HHTA_SWEEP = (2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30)
PROP_SWEEP = (1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 25, 30, 35, 40, 50, 60, 70, 80)
HHTA_DEFAULTS = dict(P_c=0.3, P_e=2 / 3, r_m=1 / 6)
PROP_DEFAULTS = dict(d_p=25.0, r_p=3)


@lru_cache(maxsize=None)
def _rows(algorithm, T, trials, params):
    cfg = ExperimentConfig(algorithm=[algorithm], T=[T], trials=trials)
    for name, value in params:
        setattr(cfg, name, [value])
    cfg.validate()
    return tuple(run_sweep_rows(cfg))


def rows(algorithm, T, trials, **params):
    if algorithm == "HHTA":
        params = {**HHTA_DEFAULTS, **params}
    elif algorithm == "PROP":
        params = {**PROP_DEFAULTS, **params}
    return _rows(algorithm, T, trials, tuple(sorted(params.items())))


def times(algorithm, T, trials, **params):
    return completion_times(rows(algorithm, T, trials, **params))


def faster(a, b):
    """Welch test that sample ``a`` finishes sooner than ``b``."""
    res = welch_t_test(a, b)
    ok = res.mean_diff < 0 and res.p < ALPHA
    return ok, f"{summarize(a).mean:.1f} vs {summarize(b).mean:.1f} (p={res.p:.2g})"


def record(report, number, title, legs):
    """Store and print the verdict line for one criterion, then fail on any failing leg."""
    passed = all(ok for ok, _ in legs.values())
    detail = "; ".join(f"{name}: {'ok' if ok else 'FAILED'} {text}" for name, (ok, text) in legs.items())
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]"
    report[number] = line
    print(line)
    assert passed, line


def test_criterion_1_hhta_versus_walk(acceptance_report):
    legs = {}
    hhta3, rw3 = times("HHTA", 3, 30), times("RW", 3, 30)
    ok, text = faster(hhta3, rw3)
    gap = summarize(rw3).mean - summarize(hhta3).mean
    legs["T=3 HHTA faster"] = (ok, text)
    legs["T=3 gap >= 50"] = (gap >= 50, f"gap {gap:.1f}")
    legs["T=30 RW faster"] = faster(times("RW", 30, 30), times("HHTA", 30, 30))
    record(acceptance_report, 1, "HHTA/RW crossover", legs)


def test_criterion_2_prop_versus_walk(acceptance_report):
    legs = {}
    legs["T=4 PROP faster"] = faster(times("PROP", 4, 20), times("RW", 4, 20))
    legs["T=80 RW faster"] = faster(times("RW", 80, 20), times("PROP", 80, 20))
    gaps = {
        T: summarize(times("RW", T, 20)).mean - summarize(times("PROP", T, 20)).mean
        for T in (1, 25)
    }
    legs["gap T=1 > gap T=25"] = (gaps[1] > gaps[25], f"{gaps[1]:.1f} vs {gaps[25]:.1f}")
    record(acceptance_report, 2, "PROP/RW crossover", legs)


def _spearman(xs, ys):
    def ranks(v):
        order = sorted(range(len(v)), key=v.__getitem__)
        r = [0.0] * len(v)
        for rank, i in enumerate(order):
            r[i] = float(rank)
        return r

    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return cov / math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))


def _rate_means(algorithm, sweep, trials):
    return {
        T: summarize([r["msgs_per_agent_per_round"] for r in rows(algorithm, T, trials)]).mean
        for T in sweep
    }


def test_criterion_3_message_rates(acceptance_report):
    hhta = _rate_means("HHTA", HHTA_SWEEP, 30)
    prop = _rate_means("PROP", PROP_SWEEP, 20)
    worst_h = max(hhta, key=hhta.get)
    worst_p = max(prop, key=prop.get)
    trend = [4, 20, 50]
    rho = _spearman(trend, [prop[T] for T in trend])
    legs = {
        "HHTA < 1.2": (hhta[worst_h] < 1.2, f"max {hhta[worst_h]:.4f} at T={worst_h}"),
        "PROP < 1.3": (prop[worst_p] < 1.3, f"max {prop[worst_p]:.4f} at T={worst_p}"),
        "PROP rises with T": (
            rho > 0,
            "rho={:.2f} ({})".format(rho, ", ".join(f"{prop[T]:.3f}" for T in trend)),
        ),
    }
    record(acceptance_report, 3, "message-rate bounds", legs)


def test_criterion_4_timeout_monotone(acceptance_report):
    values = (1, 3, 5, 10, 20)
    stats = {r: summarize(times("PROP", 10, 20, r_p=r)) for r in values}
    legs = {}
    for lo, hi in zip(values, values[1:]):
        pooled = math.hypot(stats[lo].sem, stats[hi].sem)
        rise = stats[hi].mean - stats[lo].mean
        legs[f"r_p {lo}->{hi}"] = (
            rise > -pooled,
            f"{stats[lo].mean:.1f} -> {stats[hi].mean:.1f} (se {pooled:.1f})",
        )
    record(acceptance_report, 4, "r_p monotonicity", legs)


def test_criterion_5_radius_regimes(acceptance_report):
    legs = {
        "T=4 d_p=25 beats 5": faster(times("PROP", 4, 20, d_p=25.0), times("PROP", 4, 20, d_p=5.0)),
        "T=50 d_p=10 beats 50*sqrt2": faster(
            times("PROP", 50, 20, d_p=10.0), times("PROP", 50, 20, d_p=50 * math.sqrt(2))
        ),
    }
    for T in (4, 50):
        zero, walk = times("PROP", T, 20, d_p=0.0), times("RW", T, 20)
        p = 1.0 if sorted(zero) == sorted(walk) else welch_t_test(zero, walk).p
        legs[f"T={T} d_p=0 ~ RW"] = (p > ALPHA, f"p={p:.3g}")
    record(acceptance_report, 5, "d_p regime split", legs)


def test_criterion_6_explorer_share_optimum(acceptance_report):
    grid = [round(0.1 * k, 1) for k in range(1, 10)]
    means = {p: summarize(times("HHTA", 10, 50, P_e=p)).mean for p in grid}
    best = min(means, key=means.get)
    text = f"argmin P_e={best} ({means[best]:.1f}); ends {means[grid[0]]:.1f}, {means[grid[-1]]:.1f}"
    record(acceptance_report, 6, "P_e interior optimum", {"interior minimum": (best not in (grid[0], grid[-1]), text)})


def test_criterion_7_commit_trend(acceptance_report):
    ok, text = faster(times("HHTA", 4, 50, P_c=0.4), times("HHTA", 4, 50, P_c=0.8))
    record(acceptance_report, 7, "P_c trend", {"P_c=0.8 slower than 0.4": (ok, text)})


# -- criterion 8: exact properties ---------------------------------------------


def _committed(state):
    return getattr(state, "committed_task", None) is not None


def _trace_properties(algorithm, seed):
    world, policy, rng = small_setup(algorithm, seed=seed, size=20, agents=40, T=5, demand=30, d_p=6.0, r_p=2)
    n = len(world.positions)
    demand = world.residual_total
    prev_total = demand
    prev_tasks = {v: s.residual_demand for v, s in world.tasks.items()}
    edges = set()
    problems = []
    if algorithm == "PROP":
        field = policy.field
        xs, ys = np.meshgrid(np.arange(20), np.arange(20), indexing="ij")
        allowed = np.stack([(xs - lx) ** 2 + (ys - ly) ** 2 <= 36 + 1e-9 for lx, ly in field.locations])
    for _ in range(4000):
        before = {a: getattr(s, "core_state", None) for a, s in world.states.items()}
        step(world, policy, rng)
        if len(world.positions) != n or set(world.states) != set(world.positions):
            problems.append("agent count changed")
        total = world.residual_total
        if total > prev_total or any(s.residual_demand > prev_tasks[v] for v, s in world.tasks.items()):
            problems.append("residual demand rose")
        if demand - total != sum(_committed(s) for s in world.states.values()):
            problems.append("committed agents do not match satisfied demand")
        prev_total = total
        prev_tasks = {v: s.residual_demand for v, s in world.tasks.items()}
        if algorithm == "HHTA":
            for a, s in world.states.items():
                if s.core_state != before[a]:
                    edges.add((before[a], s.core_state))
        if algorithm == "PROP" and not np.all((field.known == UNKNOWN) | allowed):
            problems.append("task knowledge outside the propagation radius")
        if total == 0:
            break
    if edges - (EDGES | {FALLBACK_EDGE}):
        problems.append(f"illegal HHTA transitions {edges - EDGES}")
    return problems


def _determinism(algorithm):
    traces = []
    for _ in range(2):
        world, policy, rng = small_setup(algorithm, seed=17)
        traces.append(run_trial(world, policy, rng, 5000))
    return traces[0] == traces[1]


def test_criterion_8_properties(acceptance_report):
    legs = {}
    bad = {alg: _trace_properties(alg, seed) for alg in ("RW", "HHTA", "PROP") for seed in (1, 2)}
    failures = sorted({p for ps in bad.values() for p in ps})
    legs["traces"] = (not failures, ", ".join(failures) or "conservation, monotonicity, accounting, edges, locality")

    rnd = random.Random(8)
    claim_ok = True
    for i in range(10_000):
        claimants = rnd.sample(range(200), rnd.randint(0, 20))
        rd = rnd.randint(0, 25)
        winners = claim_task(claimants, rd, RngStream(i))
        claim_ok &= winners <= set(claimants) and len(winners) == min(len(claimants), rd)
    legs["claim cap"] = (claim_ok, "10^4 cases")

    worst = 0.0
    for _ in range(10_000):
        entries = {}
        for _ in range(rnd.randint(1, 30)):
            loc = (rnd.randint(0, 49), rnd.randint(0, 49))
            if loc != (25, 25):
                entries[loc] = rnd.randint(1, 80)
        if entries:
            worst = max(worst, abs(math.fsum(task_choice_distribution(entries, (25, 25)).values()) - 1.0))
    legs["choice normalization"] = (worst <= 1e-12, f"max error {worst:.1e}")

    merge_ok = True
    locs = [(1, 2), (3, 4), (5, 6)]
    for _ in range(2000):
        a = [(rnd.choice(locs), rnd.randint(0, 30)) for _ in range(rnd.randint(0, 8))]
        b = [(rnd.choice(locs), rnd.randint(0, 30)) for _ in range(rnd.randint(0, 8))]

        def fold(seq, p=None):
            p = p or PropagatorState((0, 0))
            for loc, rd in seq:
                p = merge_task_info(p, loc, rd)
            return p

        ab, ba = fold(a + b), fold(b + a)
        merge_ok &= ab.task_info == ba.task_info
        merge_ok &= fold(a, ab).task_info == ab.task_info
        merge_ok &= all(ab.task_info[k] <= v for k, v in fold(a).task_info.items())
    legs["min-merge"] = (merge_ok, "idempotent, commutative, monotone")

    legs["determinism"] = (all(_determinism(a) for a in ("RW", "HHTA", "PROP")), "equal traces")

    balance = 0.0
    for _ in range(100):
        P_e = rnd.uniform(0.0, 0.9)
        L = rnd.uniform(0.001, 0.1)
        P_E = explore_entry_probability(L, P_e)
        if P_E < 1.0:
            balance = max(balance, abs(P_E * (1 - P_e) - L * P_e))
    legs["detailed balance"] = (balance <= 1e-15, f"max error {balance:.1e}")
    record(acceptance_report, 8, "property suites", legs)


# -- criterion 9: statistics oracle ---------------------------------------------

WELCH_FIXTURES = [
    ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], 0.34659350708733416),
    ([12.1, 14.3, 11.8, 15.2, 13.9, 12.7], [9.4, 16.8, 7.2, 18.1, 10.5, 13.3, 8.9, 17.6], 0.7168144421936413),
    ([0.5, 0.9, 1.4], [2.2, 2.9, 2.1, 3.8, 2.6], 0.00469464970456962),
]


def test_criterion_9_statistics(acceptance_report):
    dp = max(abs(welch_t_test(a, b).p - p) for a, b, p in WELCH_FIXTURES)
    mpmath.mp.dps = 30
    worst = 0.0
    for a, b, x in [(0.5, 0.5, 0.3), (2, 3, 0.6), (5, 0.5, 0.8), (12, 4, 0.75), (1.5, 7, 0.1), (30, 0.5, 0.97)]:
        exact = mpmath.quad(lambda u: u ** (a - 1) * (1 - u) ** (b - 1), [0, x]) / mpmath.beta(a, b)
        worst = max(worst, abs(betainc(a, b, x) - float(exact)))
    legs = {
        "Welch fixtures": (dp <= 1e-6, f"max |dp| {dp:.1e}"),
        "incomplete beta": (worst <= 1e-8, f"max error {worst:.1e}"),
    }
    record(acceptance_report, 9, "statistics oracle", legs)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
