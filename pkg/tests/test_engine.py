import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icicle.engine import (
    Engine,
    Phase,
    PreconditionError,
    StepKind,
    default_max_steps,
    engine_init,
    engine_step,
    replay,
    run_parallelogram_2d,
    run_to_termination,
    write_trace,
)
from icicle.gen import gen_basic, gen_sphere, GenSpec, ShapeKind, random_planar
from icicle.lattice import OFFSETS
from icicle.verify import check_trace, icicle_by_towers, is_icicle
from icicle.world import TERMINATE, Configuration, Terminate


def _run_checked(config: Configuration):
    result = run_to_termination(config, keep_trace=True)
    assert result.terminated
    assert is_icicle(result.final)
    assert check_trace(config, result.trace) == []
    return result


def test_single_tile():
    r = _run_checked(Configuration(frozenset({(0, 0, 0)}), (0, 0, 0)))
    assert r.final.n == 2 and len(r.final.tiles) == 1


def test_steps_decompose():
    r = _run_checked(gen_sphere(30, 5))
    assert r.steps_total == r.steps_proj + r.steps_shift + r.steps_other
    assert r.steps_total == len(r.trace)
    assert sum(rec.kind is StepKind.PROJ for rec in r.trace) == r.steps_proj


def test_trace_ends_with_terminate():
    r = _run_checked(gen_basic(GenSpec(ShapeKind.COLUMN, 4)))
    assert isinstance(r.trace[-1].action, Terminate)
    assert r.trace[-1].phase is Phase.TERMINATED
    assert not any(isinstance(rec.action, Terminate) for rec in r.trace[:-1])


def test_icicle_input_needs_one_projection():
    # a tower is already an icicle; the agent projects its top fragment once and stops
    r = _run_checked(gen_basic(GenSpec(ShapeKind.TOWER, 5)))
    assert sum(rec.proj_start for rec in r.trace) == 1


def test_replay_matches_final():
    c = gen_sphere(25, 3)
    r = run_to_termination(c, keep_trace=True)
    assert replay(c, [rec.action for rec in r.trace]) == r.final


def test_deterministic():
    c = gen_sphere(35, 9)
    a = run_to_termination(c, keep_trace=True)
    b = run_to_termination(c, keep_trace=True)
    assert [x.format() for x in a.trace] == [x.format() for x in b.trace]


def test_engine_step_api():
    e = engine_init(Configuration(frozenset({(0, 0, 0), (0, 1, 0)}), (0, 0, 0)))
    actions = []
    while not e.terminated:
        a, e = engine_step(e)
        actions.append(a)
    assert actions[-1] == TERMINATE


def test_max_steps_cutoff():
    c = gen_sphere(40, 1)
    r = run_to_termination(c, max_steps=5)
    assert not r.terminated and r.steps_total == 5 and r.exceeded
    assert default_max_steps(10) == 10_100


@pytest.mark.parametrize(
    "config",
    [
        Configuration(frozenset(), (0, 0, 0)),
        Configuration(frozenset({(0, 0, 0)}), (1, 0, 0)),
        Configuration(frozenset({(0, 0, 0), (5, 0, 0)}), (0, 0, 0)),
        Configuration(frozenset({(0, 0, 0)}), (0, 0, 0), carrying=False),
    ],
)
def test_preconditions(config):
    with pytest.raises(PreconditionError):
        Engine(config)


def test_planar_precondition():
    with pytest.raises(PreconditionError):
        Engine(Configuration(frozenset({(0, 0, 0), (0, 0, 1)}), (0, 0, 0)), planar=True)


def test_write_trace(tmp_path):
    r = run_to_termination(gen_basic(GenSpec(ShapeKind.LINE, 3)), keep_trace=True)
    path = tmp_path / "t.log"
    write_trace(r.trace, path)
    lines = path.read_text().splitlines()
    assert len(lines) == r.steps_total
    assert lines[0].split()[0] == "0" and lines[-1].split()[2] == "terminate"


def test_one_tile_column_on_tower():
    # agent sits on a one-tile westernmost column above a tower; exercises the shiftable-at-exit path
    c = Configuration(frozenset({(-1, 1, -1), (0, 0, -1), (0, 0, 0), (0, 1, -1)}), (0, 0, 0))
    _run_checked(c)


def test_return_walk_across_layer_gap():
    # the local return walk after a tile shift lands below a gap in the first column here
    _run_checked(gen_sphere(40, np.random.SeedSequence([0, 40, 4])))


@st.composite
def random_configs(draw, max_n=14):
    n = draw(st.integers(1, max_n))
    tiles = [(0, 0, 0)]
    seen = set(tiles)
    while len(tiles) < n:
        v = tiles[draw(st.integers(0, len(tiles) - 1))]
        d = draw(st.sampled_from(OFFSETS))
        u = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
        if u not in seen:
            seen.add(u)
            tiles.append(u)
    agent = tiles[draw(st.integers(0, n - 1))]
    return Configuration(frozenset(tiles), agent)


@settings(max_examples=150, deadline=None)
@given(random_configs())
def test_random_small_configs(config):
    r = _run_checked(config)
    assert len(r.final.tiles) + int(r.final.carrying) == config.n
    assert r.steps_total <= default_max_steps(config.n)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_planar_runs_form_parallelogram(n, seed):
    c = random_planar(n, np.random.default_rng(seed))
    r = run_parallelogram_2d(c)
    assert r.terminated
    assert icicle_by_towers(r.final.tiles)
    assert {v[2] for v in r.final.tiles} == {0}


def test_single_tile_enters_buildpar_with_move_south():
    r = run_to_termination(Configuration(frozenset({(0, 0, 0)}), (0, 0, 0)), keep_trace=True)
    first = r.trace[0]
    assert str(first.action) == "move S" and first.phase is Phase.BUILD_PAR and first.search_exit
