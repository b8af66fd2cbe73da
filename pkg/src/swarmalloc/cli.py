"""Command line entry point: ``swarmalloc {run,sweep,compare,plot}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 when more than
half of a sweep's trials time out.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ALGORITHMS, ExperimentConfig, parse_config
from .harness import (
    PLOT_PRESETS,
    PlotSpec,
    SchemaError,
    SweepPoint,
    compare,
    emit_plot,
    format_comparison,
    read_results,
    run_sweep_rows,
    simulate,
    trial_row,
    write_results,
)
from .tasks import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_TIMEOUTS = 0, 1, 2, 3

log = logging.getLogger("swarmalloc")


def _load(path: str | None) -> ExperimentConfig:
    return parse_config(path) if path else ExperimentConfig().validate()


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.max_rounds is not None:
        cfg = replace(cfg, max_rounds=args.max_rounds)
    alg = (args.algorithm or cfg.algorithm[0]).upper()
    if alg not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {alg!r}")
    T = args.T if args.T is not None else cfg.T[0]
    if not 1 <= T <= cfg.total_demand:
        raise ConfigurationError(f"T={T} must lie in [1, total_demand]")
    names = {"RW": (), "HHTA": ("P_c", "P_e", "r_m"), "PROP": ("d_p", "r_p")}[alg]
    point = SweepPoint(alg, T, **{n: getattr(cfg, n)[0] for n in names})
    seed = args.seed if args.seed is not None else cfg.base_seed
    trace = simulate(cfg, point, seed)
    row = trial_row(cfg, point, 0, seed, trace)
    print(f"algorithm       {alg}")
    print(f"tasks (T)       {T}")
    print(f"seed            {seed}")
    print(f"completion      {row['completion_rounds'] if not trace.timeout else 'timeout'}")
    print(f"rounds run      {trace.elapsed_rounds}")
    if row["total_messages"] is not None:
        print(f"messages        {row['total_messages']}")
        print(f"msgs/agent/rnd  {row['msgs_per_agent_per_round']:.4f}")
    return EXIT_TIMEOUTS if trace.timeout else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    output = args.output or cfg.output

    def progress(row):
        log.info(
            "%s T=%s trial %s -> %s",
            row["algorithm"], row["T"], row["trial_id"],
            "timeout" if row["timeout"] else row["completion_rounds"],
        )

    rows = run_sweep_rows(cfg, progress)
    write_results(rows, output)
    print(f"wrote {len(rows)} rows to {output}")
    timeouts = sum(r["timeout"] for r in rows)
    if rows and timeouts * 2 > len(rows):
        print(f"{timeouts} of {len(rows)} trials timed out", file=sys.stderr)
        return EXIT_TIMEOUTS
    return EXIT_OK


def cmd_compare(args) -> int:
    a = read_results(args.a)
    b = read_results(args.b)
    report = compare(a, b, args.alpha)
    print(format_comparison(report))
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.preset:
        spec = PLOT_PRESETS[args.preset]
    else:
        if not (args.x and args.y):
            raise ConfigurationError("give --preset or both --x and --y")
        spec = PlotSpec(args.x, args.y, tuple(args.series.split(",")), args.title or "", args.y)
    out = emit_plot(args.results, spec, args.output)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmalloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one trial and print its summary")
    p.add_argument("--config")
    p.add_argument("--algorithm")
    p.add_argument("--T", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-rounds", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep and write a CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("-j", "--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="Welch test between two result files per task count")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="mean +- std plot from result files, as SVG")
    p.add_argument("results", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--preset", choices=sorted(PLOT_PRESETS))
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--series", default="algorithm")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, SchemaError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
