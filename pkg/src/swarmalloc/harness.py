"""Seeded trials, parameter sweeps, CSV persistence, comparison and plots."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .config import ExperimentConfig
from .grid import TrialTrace, build_world, run_trial
from .hhta import HhtaParams, HhtaPolicy
from .metrics import (
    messages_per_agent,
    messages_per_agent_per_round,
    summarize,
    welch_t_test,
)
from .prop import FollowerPolicy, deploy_propagators, deployment_offset
from .rng import PLACEMENT, RngStream
from .tasks import TaskSpec, place_tasks

log = logging.getLogger(__name__)

COLUMNS = [
    "trial_id", "seed", "algorithm", "M", "N", "agents", "T", "total_demand",
    "P_c", "P_e", "r_m", "d_p", "r_p", "completion_rounds", "timeout",
    "total_messages", "msgs_per_agent_per_round", "msgs_per_agent",
]
PARAMS_BY_ALGORITHM = {"RW": (), "HHTA": ("P_c", "P_e", "r_m"), "PROP": ("d_p", "r_p")}
MESSAGE_CLASS = {"HHTA": "agent", "PROP": "propagator"}


@dataclass(frozen=True)
class SweepPoint:
    algorithm: str
    T: int
    P_c: float | None = None
    P_e: float | None = None
    r_m: float | None = None
    d_p: float | None = None
    r_p: int | None = None


def sweep_points(cfg: ExperimentConfig) -> list[SweepPoint]:
    """Cartesian product of swept values, keeping only each algorithm's own parameters."""
    points = []
    for alg in cfg.algorithm:
        names = PARAMS_BY_ALGORITHM[alg]
        axes = [getattr(cfg, n) for n in names]
        for T in cfg.T:
            for combo in itertools.product(*axes):
                points.append(SweepPoint(alg, T, **dict(zip(names, combo))))
    return points


def setup_trial(cfg: ExperimentConfig, point: SweepPoint, seed: int):
    """World, policy and engine stream for one trial of ``point``."""
    rng = RngStream(seed)
    spec = TaskSpec(point.T, cfg.total_demand, cfg.demands)
    tasks = place_tasks(rng.spawn(PLACEMENT), spec, cfg.width, cfg.height, cfg.home)
    if point.algorithm == "HHTA":
        P_e = point.P_e
        if P_e >= 1.0:
            # keeps the exploration formula finite; P_E clamps to 1 anyway
            P_e = 1.0 - 1e-12
        params = HhtaParams(
            L=1.0 / (cfg.width + cfg.height),
            P_commit=point.P_c,
            P_explore=P_e,
            message_rate=point.r_m,
            exponent=cfg.levy_exponent,
        )
        policy = HhtaPolicy(params, cfg.influence_radius)
    else:
        policy = FollowerPolicy(cfg.influence_radius, exponent=cfg.levy_exponent)
    world = build_world(cfg.width, cfg.height, cfg.home, tasks, policy.initial_states(cfg.agents))
    if point.algorithm == "PROP":
        policy.field = deploy_propagators(world, point.d_p, point.r_p)
    return world, policy, rng


def simulate(cfg: ExperimentConfig, point: SweepPoint, seed: int) -> TrialTrace:
    world, policy, rng = setup_trial(cfg, point, seed)
    return run_trial(world, policy, rng, cfg.max_rounds, params=asdict(point))


def trial_row(cfg: ExperimentConfig, point: SweepPoint, trial_id: int, seed: int, trace: TrialTrace) -> dict:
    completion = trace.completion_round
    if completion is not None and point.algorithm == "PROP" and cfg.deployment_offset:
        completion += deployment_offset(cfg.width, cfg.height)
    row = {
        "trial_id": trial_id,
        "seed": seed,
        "algorithm": point.algorithm,
        "M": cfg.width,
        "N": cfg.height,
        "agents": cfg.agents,
        "T": point.T,
        "total_demand": cfg.total_demand,
        "P_c": point.P_c,
        "P_e": point.P_e,
        "r_m": point.r_m,
        "d_p": point.d_p,
        "r_p": point.r_p,
        "completion_rounds": completion,
        "timeout": int(trace.timeout),
        "total_messages": None,
        "msgs_per_agent_per_round": None,
        "msgs_per_agent": None,
    }
    cls = MESSAGE_CLASS.get(point.algorithm)
    if cls is not None:
        row["total_messages"] = trace.class_messages.get(cls, 0)
        row["msgs_per_agent_per_round"] = messages_per_agent_per_round(trace, cls)
        row["msgs_per_agent"] = messages_per_agent(trace, cls)
    return row


def _run_one(args) -> dict:
    cfg, point, trial_id, seed = args
    trace = simulate(cfg, point, seed)
    return trial_row(cfg, point, trial_id, seed, trace)


def run_sweep_rows(cfg: ExperimentConfig, progress=None) -> list[dict]:
    """Run every trial of every point; rows come back sorted by point then trial id."""
    jobs = []
    for p_index, point in enumerate(sweep_points(cfg)):
        for trial_id in range(cfg.trials):
            jobs.append((p_index, (cfg, point, trial_id, cfg.base_seed + trial_id)))
    results: list[tuple[int, int, dict]] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for (p_index, job), row in zip(jobs, pool.map(_run_one, [j for _, j in jobs])):
                results.append((p_index, job[2], row))
                if progress:
                    progress(row)
    else:
        for p_index, job in jobs:
            row = _run_one(job)
            results.append((p_index, job[2], row))
            if progress:
                progress(row)
    results.sort(key=lambda r: (r[0], r[1]))
    return [row for _, _, row in results]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def write_results(rows: Sequence[dict], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(rows_to_csv(rows))
    return path


def run_sweep(cfg: ExperimentConfig, output: str | Path | None = None, progress=None) -> Path:
    rows = run_sweep_rows(cfg, progress)
    return write_results(rows, output or cfg.output)


_INT_COLS = {"trial_id", "seed", "M", "N", "agents", "T", "total_demand", "r_p", "completion_rounds", "timeout", "total_messages"}
_STR_COLS = {"algorithm"}


class SchemaError(ValueError):
    pass


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for raw in reader:
            row = {}
            for key in COLUMNS:
                text = raw[key]
                if text == "":
                    row[key] = None
                elif key in _STR_COLS:
                    row[key] = text
                elif key in _INT_COLS:
                    row[key] = int(text)
                else:
                    row[key] = float(text)
            rows.append(row)
    return rows


def point_key(row: dict) -> tuple:
    return (row["algorithm"], row["T"], row["P_c"], row["P_e"], row["r_m"], row["d_p"], row["r_p"])


def completion_times(rows: Iterable[dict]) -> list[int]:
    """Completion times of finished trials; timeouts are left out."""
    return [r["completion_rounds"] for r in rows if not r["timeout"] and r["completion_rounds"] is not None]


def aggregate(rows: Iterable[dict], column: str = "completion_rounds") -> dict[tuple, dict]:
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for row in rows:
        groups[point_key(row)].append(row)
    out = {}
    for key, members in groups.items():
        if column == "completion_rounds":
            values = completion_times(members)
        else:
            values = [r[column] for r in members if r[column] is not None]
        out[key] = {
            "stats": summarize(values) if values else None,
            "timeouts": sum(r["timeout"] for r in members),
            "trials": len(members),
        }
    return out


@dataclass
class Comparison:
    T: int
    mean_a: float
    mean_b: float
    mean_diff: float
    t: float
    df: float
    p: float
    significant: bool


def compare(rows_a: Sequence[dict], rows_b: Sequence[dict], alpha: float = 0.05) -> list[Comparison]:
    """Welch test on completion times for every task count both result sets share."""

    def by_T(rows, label):
        groups: dict[int, list[dict]] = defaultdict(list)
        for r in rows:
            groups[r["T"]].append(r)
        for T, members in groups.items():
            if len({point_key(r) for r in members}) > 1:
                raise ValueError(f"results {label} hold several parameter points at T={T}")
        return groups

    a, b = by_T(rows_a, "A"), by_T(rows_b, "B")
    shared = sorted(set(a) & set(b))
    if not shared:
        raise ValueError("the two result sets share no task counts")
    report = []
    for T in shared:
        xa, xb = completion_times(a[T]), completion_times(b[T])
        if sorted(xa) == sorted(xb):
            ma = summarize(xa).mean
            report.append(Comparison(T, ma, ma, 0.0, 0.0, float(len(xa) + len(xb) - 2), 1.0, False))
            continue
        if len(set(xa)) == 1 and len(set(xb)) == 1:
            # two different constants: the test statistic is infinite
            ma, mb = xa[0], xb[0]
            t = math.copysign(math.inf, ma - mb)
            report.append(Comparison(T, ma, mb, ma - mb, t, float(len(xa) + len(xb) - 2), 0.0, True))
            continue
        res = welch_t_test(xa, xb)
        report.append(
            Comparison(T, summarize(xa).mean, summarize(xb).mean, res.mean_diff, res.t, res.df, res.p, res.p < alpha)
        )
    return report


def format_comparison(report: Sequence[Comparison]) -> str:
    lines = [f"{'T':>4} {'mean A':>10} {'mean B':>10} {'diff':>10} {'t':>8} {'df':>7} {'p':>10}  sig"]
    for c in report:
        lines.append(
            f"{c.T:>4} {c.mean_a:>10.1f} {c.mean_b:>10.1f} {c.mean_diff:>10.1f} "
            f"{c.t:>8.3f} {c.df:>7.1f} {c.p:>10.3g}  {'*' if c.significant else ''}"
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class PlotSpec:
    x: str
    y: str
    series: tuple[str, ...]
    title: str
    ylabel: str
    algorithms: tuple[str, ...] | None = None


PLOT_PRESETS = {
    "hhta-density": PlotSpec("T", "completion_rounds", ("algorithm",), "Task count vs completion time", "completion time (rounds)", ("HHTA", "RW")),
    "hhta-messages": PlotSpec("T", "msgs_per_agent", ("algorithm",), "Task count vs messages per agent", "messages per agent", ("HHTA",)),
    "prop-density": PlotSpec("T", "completion_rounds", ("algorithm",), "Task count vs completion time", "completion time (rounds)", ("PROP", "RW")),
    "prop-messages": PlotSpec("T", "msgs_per_agent_per_round", ("algorithm",), "Task count vs messages per propagator per round", "messages / propagator / round", ("PROP",)),
    "p-commit": PlotSpec("P_c", "completion_rounds", ("T",), "Commit probability vs completion time", "completion time (rounds)", ("HHTA",)),
    "p-explore": PlotSpec("P_e", "completion_rounds", ("T",), "Explorer fraction vs completion time", "completion time (rounds)", ("HHTA",)),
    "prop-radius": PlotSpec("d_p", "completion_rounds", ("T",), "Propagation radius vs completion time", "completion time (rounds)", ("PROP",)),
    "prop-timeout": PlotSpec("r_p", "completion_rounds", ("T",), "Propagation timeout vs completion time", "completion time (rounds)", ("PROP",)),
}


def plot_series(rows: Sequence[dict], spec: PlotSpec) -> dict[tuple, list[tuple[float, float, float]]]:
    """``series label -> [(x, mean, std)]`` sorted by x."""
    for col in (spec.x, spec.y, *spec.series):
        if col not in COLUMNS:
            raise SchemaError(f"unknown column {col!r}")
    groups: dict[tuple, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if spec.algorithms and r["algorithm"] not in spec.algorithms:
            continue
        if spec.y == "completion_rounds" and r["timeout"]:
            continue
        if r[spec.x] is None and r["algorithm"] == "RW" and spec.x != "T":
            continue
        y = r[spec.y]
        if y is None:
            continue
        label = tuple(r[s] for s in spec.series)
        groups[label][r[spec.x]].append(y)
    out = {}
    for label, by_x in sorted(groups.items(), key=lambda kv: str(kv[0])):
        pts = []
        for x in sorted(by_x):
            st = summarize(by_x[x])
            pts.append((x, st.mean, st.std))
        out[label] = pts
    return out


def emit_plot(paths: Sequence[str | Path], spec: PlotSpec, output: str | Path) -> Path:
    """Mean +- std line plot of ``spec.y`` against ``spec.x`` as an SVG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for p in paths for r in read_results(p)]
    series = plot_series(rows, spec)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in series.items():
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        name = ", ".join(f"{s}={v}" if s != "algorithm" else str(v) for s, v in zip(spec.series, label))
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=name)
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.ylabel)
    ax.set_title(spec.title)
    if series:
        ax.legend()
    output = Path(output)
    fig.savefig(output, format="svg")
    plt.close(fig)
    return output
