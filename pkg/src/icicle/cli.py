"""Command-line entry point: ``icicle run|gen|batch|verify|census``."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from .engine import (
    UnreachableState,
    check_preconditions,
    run_parallelogram_2d,
    run_to_termination,
    write_trace,
)
from .gen import GenSpec, ShapeKind, child_seed, gen_basic, gen_sphere
from .lattice import diameter
from .world import ConfigFormatError, classify, dumps_config, is_connected, read_config
from .verify import InvariantMonitor, census, census_counts, is_icicle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2
EXIT_MAX_STEPS = 3

JOBS_ENV = "ICICLE_JOBS"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors use our exit code, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- run ------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = read_config(args.input)
    except (OSError, ConfigFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problems = check_preconditions(config, planar=args.planar)
    if problems:
        print("error: " + "; ".join(problems), file=sys.stderr)
        return EXIT_USAGE

    monitor = InvariantMonitor(config) if args.check_invariants else None
    runner = run_parallelogram_2d if args.planar else run_to_termination
    try:
        result = runner(
            config, args.max_steps, [monitor] if monitor else (), keep_trace=bool(args.trace)
        )
    except UnreachableState as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    if args.trace:
        write_trace(result.trace, args.trace)

    print(f"tiles       {len(config.tiles)} (+{int(config.carrying)} carried)")
    print(f"terminated  {result.terminated}")
    print(f"steps       {result.steps_total} (proj {result.steps_proj}, "
          f"shift {result.steps_shift}, other {result.steps_other})")
    if not result.terminated:
        print(f"max steps {result.max_steps} exceeded", file=sys.stderr)
        return EXIT_MAX_STEPS

    code = EXIT_OK
    if args.planar:
        from .verify import icicle_by_towers

        ok = icicle_by_towers(result.final.tiles)
        print(f"parallelogram {ok}")
    else:
        ok = is_icicle(result.final)
        print(f"icicle      {ok}")
    if not ok:
        code = EXIT_VIOLATION
    if monitor:
        violations = monitor.finish()
        print(f"violations  {len(violations)}")
        for v in violations:
            print(f"  {v}", file=sys.stderr)
        if violations:
            code = EXIT_VIOLATION
    if args.output:
        Path(args.output).write_text(dumps_config(result.final))
    return code


# --- gen ------------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    kind = ShapeKind(args.kind)
    sizes = args.sizes
    expected = 2 if kind is ShapeKind.PARALLELOGRAM else 1
    if len(sizes) != expected:
        print(f"error: {kind.value} takes {expected} size argument(s)", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = gen_basic(GenSpec(kind, sizes[0], sizes[1] if expected == 2 else 1, args.seed))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps_config(config)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --- batch ----------------------------------------------------------------


@dataclass(frozen=True)
class BatchRow:
    n: int
    n_target: int
    sample: int
    seed: int
    steps_total: int
    steps_proj: int
    steps_shift: int
    steps_other: int
    diam_in: int
    diam_out: int
    terminated: bool
    icicle: bool
    violations: int

    @property
    def ok(self) -> bool:
        return self.terminated and self.icicle and self.violations == 0


BATCH_HEADER = tuple(f.name for f in fields(BatchRow))


def batch_cell(base_seed: int, n: int, sample: int, check: bool = True) -> BatchRow:
    seed = child_seed(base_seed, n, sample)
    config = gen_sphere(n, seed)
    monitor = InvariantMonitor(config) if check else None
    try:
        result = run_to_termination(config, observers=[monitor] if monitor else ())
    except UnreachableState:
        return BatchRow(config.n, n, sample, seed, 0, 0, 0, 0, diameter(config.tiles), 0,
                        False, False, 1)
    violations = len(monitor.finish()) if monitor else 0
    final = result.final.tiles
    return BatchRow(
        n=config.n,
        n_target=n,
        sample=sample,
        seed=seed,
        steps_total=result.steps_total,
        steps_proj=result.steps_proj,
        steps_shift=result.steps_shift,
        steps_other=result.steps_other,
        diam_in=diameter(config.tiles),
        diam_out=diameter(final) if is_connected(final) else -1,
        terminated=result.terminated,
        icicle=result.terminated and is_icicle(final),
        violations=violations,
    )


def _cell(job: tuple[int, int, int, bool]) -> BatchRow:
    return batch_cell(*job)


def run_batch(
    sizes: Sequence[int], samples: int, base_seed: int, jobs: int = 1, check: bool = True
) -> list[BatchRow]:
    """All (n, sample) cells in (n, sample) order, whatever the degree of parallelism."""
    cells = [(base_seed, n, s, check) for n in sizes for s in range(samples)]
    if jobs <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cell, cells, chunksize=1))


def format_batch(rows: Sequence[BatchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BATCH_HEADER)
    for row in rows:
        w.writerow([int(v) if isinstance(v, bool) else v for v in astuple(row)])
    return buf.getvalue()


def default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_batch(args: argparse.Namespace) -> int:
    if args.n_min < 1 or args.n_max < args.n_min or args.step < 1 or args.samples < 1:
        print("error: need 1 <= n-min <= n-max, step >= 1, samples >= 1", file=sys.stderr)
        return EXIT_USAGE
    sizes = list(range(args.n_min, args.n_max + 1, args.step))
    jobs = args.jobs if args.jobs is not None else default_jobs()
    rows = run_batch(sizes, args.samples, args.seed, jobs, check=not args.no_check)
    try:
        Path(args.out).write_text(format_batch(rows))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bad = [r for r in rows if not r.ok]
    print(f"{len(rows)} runs, {len(bad)} failed; wrote {args.out}")
    return EXIT_VIOLATION if bad else EXIT_OK


# --- verify / census ------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        config = read_config(args.input)
    except (OSError, ConfigFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    connected = is_connected(config.tiles)
    print(f"tiles      {len(config.tiles)}")
    print(f"connected  {connected}")
    print(f"icicle     {is_icicle(config) if connected else False}")
    cls = classify(config, config.agent)
    print(f"agent      {config.agent} {cls.kind.value}")
    if cls.bridges:
        print("bridges    " + " ".join(f"({x},{y},{z})" for x, y, z in sorted(cls.bridges)))
    return EXIT_OK


def cmd_census(args: argparse.Namespace) -> int:
    rows = census()
    for row in rows:
        tiled = ",".join(str(d) for d in row.tiled) or "-"
        bridges = ",".join(str(d) for d in row.bridges) or "-"
        print(f"{tiled:<24} {row.kind.value:<10} {bridges}")
    counts = census_counts()
    print(f"total {len(rows)}: " + ", ".join(f"{k.value} {v}" for k, v in counts.items()))
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="icicle", description="Single-agent icicle formation on the FCC lattice.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one configuration to termination")
    r.add_argument("--input", required=True, help="configuration file")
    r.add_argument("--trace", help="write the step trace here")
    r.add_argument("--output", help="write the final configuration here")
    r.add_argument("--check-invariants", action="store_true", help="attach the trace monitors")
    r.add_argument("--max-steps", type=int, default=None, help="default 10*n^3 + 100")
    r.add_argument("--planar", action="store_true", help="run the 2D parallelogram algorithm")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen", help="generate a configuration")
    g.add_argument("kind", choices=[k.value for k in ShapeKind])
    g.add_argument("sizes", type=int, nargs="+", help="n, k, or width height")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("batch", help="sphere-instance experiments to CSV")
    b.add_argument("--n-min", type=int, required=True)
    b.add_argument("--n-max", type=int, required=True)
    b.add_argument("--step", type=int, default=10)
    b.add_argument("--samples", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--jobs", type=int, default=None, help=f"worker processes (default ${JOBS_ENV} or 1)")
    b.add_argument("--no-check", action="store_true", help="skip the trace monitors")
    b.set_defaults(func=cmd_batch)

    v = sub.add_parser("verify", help="report connectivity, icicle status and the agent's node class")
    v.add_argument("--input", required=True)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("census", help="classify all 64 search-exit neighbourhoods")
    c.set_defaults(func=cmd_census)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
