"""The nine acceptance criteria, each at its stated tolerance."""

import itertools
import os
import statistics
import time
from collections import Counter

import numpy as np
import pytest

from icicle.cli import format_batch, main, run_batch
from icicle.engine import run_parallelogram_2d, run_to_termination
from icicle.gen import connected_sets, gen_worst_case, random_planar
from icicle.lattice import diameter, neighbor
from icicle.verify import InvariantMonitor, census, icicle_by_fragment, icicle_by_towers, is_icicle
from icicle.world import Configuration, NodeKind, is_connected

SPHERE_SIZES = list(range(10, 201, 10))
SPHERE_SAMPLES = 10
SPHERE_SEED = 0
JOBS = max(1, min(8, os.cpu_count() or 1))


@pytest.fixture(scope="module")
def sphere_batch():
    t0 = time.perf_counter()
    rows = run_batch(SPHERE_SIZES, SPHERE_SAMPLES, SPHERE_SEED, jobs=JOBS)
    return rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def worst_case_runs():
    out = []
    for k in range(2, 7):
        c = gen_worst_case(k)
        monitor = InvariantMonitor(c)
        r = run_to_termination(c, observers=[monitor])
        out.append((k, c, r, monitor.finish()))
    return out


def _brute_kind(tiled) -> NodeKind:
    """Definition-1 oracle: components of the neighbourhood, then every candidate bridge in a 5^3 box."""
    v = (0, 0, 0)
    near = {neighbor(v, d) for d in tiled}
    if is_connected(near):
        return NodeKind.REMOVABLE
    box = itertools.product(range(-2, 3), repeat=3)
    if any(w != v and w not in near and is_connected(near | {w}) for w in box):
        return NodeKind.SHIFTABLE
    return NodeKind.UNMOVABLE


def test_criterion_1_census(report):
    t0 = time.perf_counter()
    rows = census()
    elapsed = time.perf_counter() - t0
    counts = Counter(r.kind for r in rows)
    oracle_ok = all(r.kind is _brute_kind(r.tiled) for r in rows)
    unmovable = [sorted(map(str, r.tiled)) for r in rows if r.kind is NodeKind.UNMOVABLE]
    ok = (
        len(rows) == 64
        and counts[NodeKind.REMOVABLE] == 44
        and counts[NodeKind.SHIFTABLE] == 19
        and counts[NodeKind.UNMOVABLE] == 1
        and unmovable == [["DNW", "NE", "S"]]
        and oracle_ok
        and elapsed < 1.0
    )
    report(1, ok, f"{len(rows)} neighbourhoods, {counts[NodeKind.REMOVABLE]} removable, "
                  f"{counts[NodeKind.SHIFTABLE]} shiftable, {counts[NodeKind.UNMOVABLE]} unmovable "
                  f"{unmovable}, oracle agrees={oracle_ok}, {elapsed:.3f}s")


def test_criterion_2_termination_and_shape(sphere_batch, report):
    rows, elapsed = sphere_batch
    bad = [(r.n_target, r.sample) for r in rows
           if not (r.terminated and r.icicle and r.steps_total <= 10 * r.n ** 3)]
    ok = len(rows) == len(SPHERE_SIZES) * SPHERE_SAMPLES and not bad and elapsed < 300
    report(2, ok, f"{len(rows)} sphere runs, {len(bad)} failed {bad[:5]}, {elapsed:.0f}s")


def test_criterion_3_runtime_guard(sphere_batch, report):
    rows, _ = sphere_batch
    ratios = [r.steps_total / r.n ** 2 for r in rows]
    med, worst = statistics.median(ratios), max(ratios)
    report(3, med <= 30 and worst <= 100, f"steps/n^2 median {med:.2f} (<= 30), max {worst:.2f} (<= 100)")


def test_criterion_4_monitors(sphere_batch, worst_case_runs, report):
    rows, _ = sphere_batch
    sphere_bad = [(r.n_target, r.sample, r.violations) for r in rows if r.violations]
    wc_bad = {k: [str(v) for v in vs[:3]] for k, _, _, vs in worst_case_runs if vs}
    report(4, not sphere_bad and not wc_bad,
           f"violations: sphere runs {sphere_bad[:5]}, worst-case runs {wc_bad}")


def test_criterion_5_exhaustive_small(report):
    t0 = time.perf_counter()
    runs = 0
    failed = []
    by_monitor: Counter = Counter()
    for tiles in connected_sets(5, box=5):
        for start in sorted(tiles):
            c = Configuration(tiles, start)
            monitor = InvariantMonitor(c)
            r = run_to_termination(c, observers=[monitor])
            violations = monitor.finish()
            runs += 1
            by_monitor.update(v.monitor for v in violations)
            if not (r.terminated and is_icicle(r.final)) or violations:
                failed.append((sorted(tiles), start))
    elapsed = time.perf_counter() - t0
    ok = not failed and elapsed < 600
    report(5, ok, f"{runs} (set, start) runs, {len(failed)} failed, monitors {dict(by_monitor)}, "
                  f"first {failed[:1]}, {elapsed:.0f}s")


def test_criterion_6_worst_case_family(worst_case_runs, report):
    ks = np.array([k for k, *_ in worst_case_runs], dtype=float)
    n = np.array([c.n for _, c, _, _ in worst_case_runs], dtype=float)
    d_in = np.array([diameter(c.tiles) for _, c, _, _ in worst_case_runs], dtype=float)
    d_out = np.array([diameter(r.final.tiles) for _, _, r, _ in worst_case_runs], dtype=float)
    icicles = all(r.terminated and is_icicle(r.final) for _, _, r, _ in worst_case_runs)

    # Theta(k): d_in is affine in k with a positive slope
    lin = np.polyfit(ks, d_in, 1)
    resid = d_in - np.polyval(lin, ks)
    linear_in = lin[0] > 0 and float(np.max(np.abs(resid))) <= 0.05 * float(d_in.max())
    # Theta(k^2): d_out / k^2 stays within a factor of two, and d_out / k grows
    quad = d_out / ks ** 2
    quadratic_out = float(quad.max() / quad.min()) <= 2.0 and bool(np.all(np.diff(d_out / ks) > 0))
    slope = float(np.polyfit(np.log(n), np.log(d_out), 1)[0])
    slope_ok = abs(slope - 2 / 3) <= 0.15
    ok = icicles and linear_in and quadratic_out and slope_ok
    report(6, ok, f"k=2..6 icicles={icicles}; d_in {d_in.astype(int).tolist()} linear={linear_in}; "
                  f"d_out {d_out.astype(int).tolist()} quadratic={quadratic_out}; "
                  f"log-log slope vs n {slope:.3f} (2/3 +- 0.15)")


def test_criterion_7_diameter_trend(sphere_batch, report):
    rows, _ = sphere_batch
    large = [r for r in rows if r.n_target >= 100]
    connected = all(r.diam_out >= 0 for r in large)
    mean = statistics.fmean(r.diam_out - r.diam_in for r in large)
    report(7, connected and mean <= 0, f"mean diam_out - diam_in for n >= 100: {mean:.2f} over {len(large)} runs")


def test_criterion_8_planar(report):
    ss = np.random.SeedSequence(8)
    failed = []
    total = 0
    for n, child in zip((5, 10, 20), ss.spawn(3)):
        rng = np.random.default_rng(child)
        for i in range(10):
            c = random_planar(n, rng)
            r = run_parallelogram_2d(c)
            total += 1
            if not (r.terminated and icicle_by_towers(r.final.tiles)
                    and icicle_by_fragment(r.final.tiles)):
                failed.append((n, i))
    report(8, not failed, f"{total} planar runs, {len(failed)} not a parallelogram {failed[:5]}")


def test_criterion_9_determinism(tmp_path, report, capsys):
    flags = ["batch", "--n-min", "10", "--n-max", "50", "--step", "10", "--samples", "5", "--seed", "7"]
    paths = [tmp_path / f"{name}.csv" for name in ("seq1", "seq2", "par")]
    codes = [
        main([*flags, "--out", str(paths[0]), "--jobs", "1"]),
        main([*flags, "--out", str(paths[1]), "--jobs", "1"]),
        main([*flags, "--out", str(paths[2]), "--jobs", "3"]),
    ]
    capsys.readouterr()
    data = [p.read_bytes() for p in paths]
    rows = data[0].decode().count("\n") - 1
    in_memory = format_batch(run_batch(range(10, 51, 10), 5, 7)).encode() == data[0]
    ok = codes == [0, 0, 0] and data[0] == data[1] == data[2] and rows == 25 and in_memory
    report(9, ok, f"{rows} rows; repeat identical={data[0] == data[1]}, "
                  f"parallel identical={data[0] == data[2]}, exit codes {codes}")
