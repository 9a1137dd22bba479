"""The agent as a step-accurate automaton.

The agent program is a generator: each ``yield`` is one Look-Compute-Move cycle
and emits exactly one action. Everything the program reads goes through
``_Agent.t`` (is the neighbour in a direction tiled?) and ``_Agent.here``, i.e.
the agent's 13-node view. Loop positions inside the generator are the finite
control state; the registers are ``first_column``, ``term`` and ``entry``.

``entry`` (the node where BuildPar started) is read only when the local return
walk misses it, which the sliced layer structure allows; see ``retrieve``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

from .lattice import (
    DIRECTIONS,
    PACKED,
    PACKED_OFFSETS,
    PACKED_PLANE_OFFSETS,
    Coord,
    Direction,
    pack,
    unpack,
)
from .world import (
    BIT,
    CONNECTED_MASK,
    MOVES,
    PICKUP,
    PLACE,
    TERMINATE,
    Action,
    Configuration,
    InvalidAction,
    Move,
    Pickup,
    Place,
    Terminate,
    is_connected,
)

UNE, UW, USE = PACKED[Direction.UNE], PACKED[Direction.UW], PACKED[Direction.USE]
N, NW, SW = PACKED[Direction.N], PACKED[Direction.NW], PACKED[Direction.SW]
S, SE, NE = PACKED[Direction.S], PACKED[Direction.SE], PACKED[Direction.NE]
DNW, DSW, DE = PACKED[Direction.DNW], PACKED[Direction.DSW], PACKED[Direction.DE]

_MOVE = {PACKED[d]: MOVES[d] for d in DIRECTIONS}
_BITS = tuple((PACKED[d], BIT[d]) for d in DIRECTIONS)

_ICICLE_SEARCH = (UW, USE, UNE, NW, SW, N)
_PLANE_SEARCH = (NW, SW, N)
_MASK_DSW_SE = BIT[Direction.DSW] | BIT[Direction.SE]
_MASK_DNW_S_NE = BIT[Direction.DNW] | BIT[Direction.S] | BIT[Direction.NE]
_MASK_DNW_S = BIT[Direction.DNW] | BIT[Direction.S]


class Phase(Enum):
    SEARCH = "search"
    BUILD_PAR = "buildpar"
    RETURN_FOR_PICKUP = "return"
    POST_PICKUP_MOVE = "postpickup"
    PROJECT_COLUMN = "project"
    PROJECT_HEIGHT_ONE = "project1"
    CASE_A_SHIFT = "caseA"
    CASE_B_SHIFT = "caseB"
    CASE_B_TRAVERSE = "caseB-traverse"
    CASE_C_PROBE = "caseC-probe"
    CASE_C_SHIFT = "caseC"
    CASE_D_MARCH = "caseD-march"
    CASE_D_SHIFT_CHAIN = "caseD-chain"
    CASE_E_MARCH = "caseE-march"
    CASE_E_SHIFT_CHAIN = "caseE-chain"
    CASE_E_RETURN = "caseE-return"
    TERMINATED = "terminated"


class StepKind(Enum):
    PROJ = "proj"
    SHIFT = "shift"
    OTHER = "other"

    __hash__ = object.__hash__


class UnreachableState(RuntimeError):
    """The automaton met an observation its case analysis rules out."""


@dataclass(slots=True)
class StepRecord:
    index: int
    action: Action
    phase: Phase
    kind: StepKind
    pos: Coord
    carrying: bool
    search_exit: bool = False
    proj_start: bool = False

    def format(self) -> str:
        a = self.action
        if isinstance(a, Move):
            name, arg = "move", str(a.direction)
        else:
            name, arg = str(a), "-"
        flags = ("X" if self.search_exit else "") + ("P" if self.proj_start else "")
        x, y, z = self.pos
        return (
            f"{self.index} {self.phase.value} {name} {arg} {x} {y} {z} "
            f"{int(self.carrying)} {self.kind.value} {flags or '-'}"
        )


Observer = Callable[[StepRecord, "Engine"], None]


@dataclass
class RunResult:
    terminated: bool
    steps_total: int
    steps_proj: int
    steps_shift: int
    steps_other: int
    final: Configuration
    trace: Optional[list[StepRecord]] = None
    max_steps: int = 0

    @property
    def exceeded(self) -> bool:
        return not self.terminated


class PreconditionError(ValueError):
    pass


class _Agent:
    """The agent program. Reads only ``self.here()`` and ``self.t(offset)``."""

    def __init__(self, engine: Engine) -> None:
        self.e = engine
        self.first_column = False
        self.term = False
        self.entry = 0
        self.phase = Phase.SEARCH
        self.kind = StepKind.OTHER
        self.search_exit = False
        self.proj_start = False

    # -- look --------------------------------------------------------------
    def here(self) -> bool:
        return self.e.pos in self.e.tiles

    def t(self, off: int) -> bool:
        return self.e.pos + off in self.e.tiles

    def first(self, offs: Sequence[int]) -> Optional[int]:
        tiles, p = self.e.tiles, self.e.pos
        for off in offs:
            if p + off in tiles:
                return off
        return None

    def mask(self) -> int:
        tiles, p = self.e.tiles, self.e.pos
        m = 0
        for off, bit in _BITS:
            if p + off in tiles:
                m |= bit
        return m

    def set(self, phase: Phase, kind: StepKind) -> None:
        self.phase, self.kind = phase, kind

    # -- top level ---------------------------------------------------------
    def icicle(self) -> Iterator[Action]:
        while True:
            yield from self.search(_ICICLE_SEARCH)
            if not self.here():
                raise UnreachableState(f"search ended on empty node {unpack(self.e.pos)}")
            self.search_exit = True
            m = self.mask()
            if CONNECTED_MASK[m]:
                yield from self.build_par_main()
            elif not m & BIT[Direction.SE] and CONNECTED_MASK[m | BIT[Direction.SE]]:
                yield from self.case_a()
            elif m == _MASK_DSW_SE:
                yield from self.case_c()
            elif not m & BIT[Direction.DE] and CONNECTED_MASK[m | BIT[Direction.DE]]:
                yield from self.case_b()
            elif m == _MASK_DNW_S_NE:
                yield from self.case_d()
            elif m == _MASK_DNW_S:
                yield from self.case_e()
            else:
                raise UnreachableState(
                    f"no case for neighbourhood {m:012b} at {unpack(self.e.pos)}"
                )
            if self.e.terminated:
                return

    def parallelogram(self) -> Iterator[Action]:
        while True:
            yield from self.search(_PLANE_SEARCH)
            self.search_exit = True
            self.first_column = True
            self.entry = self.e.pos
            yield from self.build_par()
            if not self.here():
                self.set(Phase.TERMINATED, StepKind.OTHER)
                yield TERMINATE
                return
            if not self.e.carrying:
                yield from self.retrieve()

    def search(self, order: Sequence[int]) -> Iterator[Action]:
        self.set(Phase.SEARCH, StepKind.OTHER)
        while True:
            off = self.first(order)
            if off is None:
                return
            yield _MOVE[off]

    # -- BuildPar and its continuation ---------------------------------------
    def build_par_main(self) -> Iterator[Action]:
        self.first_column = True
        self.entry = self.e.pos
        yield from self.build_par()
        if not self.here():
            yield from self.projection()
        elif not self.e.carrying:
            yield from self.retrieve()

    def build_par(self) -> Iterator[Action]:
        self.set(Phase.BUILD_PAR, StepKind.OTHER)
        while True:
            while self.here():
                up = self.first((UW, USE, UNE))
                if up is not None:
                    yield _MOVE[up]
                    return
                if self.first_column and self.t(SW):
                    yield _MOVE[SW]
                    return
                if self.t(NE) and not self.t(SE):
                    self.kind = StepKind.SHIFT
                    yield _MOVE[SE]
                    yield PLACE
                    yield _MOVE[NW]
                    return
                if self.t(N) and self.t(SE) and not self.t(NE):
                    self.kind = StepKind.SHIFT
                    yield _MOVE[NE]
                    yield PLACE
                    yield _MOVE[SW]
                    return
                yield _MOVE[S]
            if self.t(N) and self.t(NE) and self.t(SE):
                self.kind = StepKind.SHIFT
                yield PLACE
                yield _MOVE[N]
                return
            if not self.t(NE):
                return
            yield _MOVE[NE]
            yield _MOVE[N]
            self.first_column = False
            while self.here():
                if not self.t(SW) and self.t(NW):
                    while self.t(N):
                        yield _MOVE[N]
                    while not self.t(NW):
                        yield _MOVE[S]
                    return
                yield _MOVE[N]
            if self.t(S) and self.t(SE):
                self.kind = StepKind.SHIFT
                yield PLACE
                return
            yield _MOVE[S]

    def retrieve(self) -> Iterator[Action]:
        self.set(Phase.RETURN_FOR_PICKUP, StepKind.SHIFT)
        if self.first_column:
            while self.t(N):
                yield _MOVE[N]
        else:
            while (off := self.first((SW, S))) is not None:
                yield _MOVE[off]
            while (off := self.first((NW, SW, N))) is not None:
                yield _MOVE[off]
        if self.e.pos != self.entry:
            # the walk crossed a layer gap into a tile the fragment only reaches
            # through another layer; finish along a shortest tiled path
            for off in self.e.tile_path(self.e.pos, self.entry):
                yield _MOVE[off]
        yield PICKUP
        yield from self.step_off((S, SE, NE))

    def step_off(self, order: Sequence[int]) -> Iterator[Action]:
        self.set(Phase.POST_PICKUP_MOVE, StepKind.OTHER)
        off = self.first(order)
        if off is not None:
            yield _MOVE[off]

    # -- projection --------------------------------------------------------
    def projection(self) -> Iterator[Action]:
        """``move N`` from below the easternmost column, project, maybe terminate."""
        self.e.begin_projection(self.e.pos + N if not self.here() else self.e.pos)
        self.term = True
        self.proj_start = True
        self.set(Phase.PROJECT_COLUMN, StepKind.PROJ)
        yield _MOVE[N]
        yield from self.project()
        self.e.end_projection()
        if self.term:
            self.set(Phase.TERMINATED, StepKind.OTHER)
            yield TERMINATE

    def project(self) -> Iterator[Action]:
        if not self.t(N) and not self.t(S):
            self.set(Phase.PROJECT_HEIGHT_ONE, StepKind.PROJ)
            while True:
                while self.here():
                    yield _MOVE[DSW]
                yield PLACE
                while self.t(UNE):
                    yield _MOVE[UNE]
                yield PICKUP
                if self.t(NW):
                    yield _MOVE[SW]
                    yield _MOVE[DNW]
                else:
                    yield _MOVE[DSW]
                    return
                if not self.t(UNE):
                    raise UnreachableState("height-one projection lost its column")
        self.set(Phase.PROJECT_COLUMN, StepKind.PROJ)
        while True:
            while self.t(N):
                yield _MOVE[N]
            while self.here():
                yield _MOVE[DSW]
            yield PLACE
            while self.t(UNE):
                yield _MOVE[UNE]
            yield PICKUP
            if self.t(S):
                yield _MOVE[S]
            elif self.t(NW):
                yield _MOVE[NW]
            else:
                yield _MOVE[DSW]
                return

    # -- non-removable search exits ----------------------------------------
    def case_a(self) -> Iterator[Action]:
        self.set(Phase.CASE_A_SHIFT, StepKind.SHIFT)
        yield _MOVE[SE]
        yield PLACE
        yield _MOVE[NW]
        yield PICKUP
        yield from self.step_off((S, SE, NE))

    def case_b(self) -> Iterator[Action]:
        self.set(Phase.CASE_B_SHIFT, StepKind.SHIFT)
        yield _MOVE[DE]
        yield PLACE
        yield _MOVE[UW]
        yield PICKUP
        self.set(Phase.CASE_B_TRAVERSE, StepKind.OTHER)
        if self.t(SE) and self.t(NE) and not self.t(S):
            yield _MOVE[SE]
            while self.t(S) and not (self.t(UW) or self.t(USE) or self.t(SW)):
                yield _MOVE[S]
        else:
            off = self.first((S, SE, NE))
            if off is not None:
                yield _MOVE[off]

    def case_c(self) -> Iterator[Action]:
        self.set(Phase.CASE_C_PROBE, StepKind.OTHER)
        yield _MOVE[SE]
        if self.t(DSW):
            yield _MOVE[NW]
            yield from self.build_par_main()
            return
        self.set(Phase.CASE_C_SHIFT, StepKind.SHIFT)
        yield _MOVE[DSW]
        yield PLACE
        yield _MOVE[UNE]
        yield _MOVE[NW]
        yield PICKUP
        self.set(Phase.POST_PICKUP_MOVE, StepKind.OTHER)
        yield _MOVE[SE]

    def _de_chain(self) -> Iterator[Action]:
        if self.t(DE):
            yield _MOVE[N]
        yield _MOVE[DE]
        yield PLACE
        yield _MOVE[UW]
        yield PICKUP
        while self.t(N):
            yield _MOVE[NE]
            yield _MOVE[DNW]
            yield PLACE
            yield _MOVE[UW]
            yield PICKUP

    def case_d(self) -> Iterator[Action]:
        self.set(Phase.CASE_D_MARCH, StepKind.OTHER)
        stop = (UW, USE, SW, DSW, SE, DE)
        while self.t(S) and self.first(stop) is None:
            yield _MOVE[S]
        if self.first((UW, USE, SW)) is not None:
            return
        self.set(Phase.CASE_D_SHIFT_CHAIN, StepKind.SHIFT)
        yield from self._de_chain()
        self.set(Phase.POST_PICKUP_MOVE, StepKind.OTHER)
        yield _MOVE[NE]

    def case_e(self) -> Iterator[Action]:
        self.set(Phase.CASE_E_MARCH, StepKind.OTHER)
        stop = (UW, USE, SW, SE, DE)
        while self.t(S) and self.first(stop) is None:
            yield _MOVE[S]
        if self.first((UW, USE, SW)) is not None:
            return
        if not self.t(SE) and not self.t(DE):
            yield from self.projection()
            return
        self.set(Phase.CASE_E_SHIFT_CHAIN, StepKind.SHIFT)
        yield from self._de_chain()
        self.set(Phase.CASE_E_RETURN, StepKind.OTHER)
        while not self.here():
            yield _MOVE[S]
            if self.t(SE):
                yield _MOVE[SE]


class Engine:
    """Mutable run state: tiles, agent position, carried tile, the agent program."""

    def __init__(self, config: Configuration, *, planar: bool = False) -> None:
        problems = check_preconditions(config, planar=planar)
        if problems:
            raise PreconditionError("; ".join(problems))
        self.initial = config
        self.tiles: set[int] = {pack(v) for v in config.tiles}
        self.pos: int = pack(config.agent)
        self.carrying: bool = config.carrying
        self.terminated = False
        self.steps = 0
        self.counts = {StepKind.PROJ: 0, StepKind.SHIFT: 0, StepKind.OTHER: 0}
        self.planar = planar
        self.agent = _Agent(self)
        self._program = self.agent.parallelogram() if planar else self.agent.icicle()
        self._fragment: frozenset[int] = frozenset()
        self._projecting = False

    # -- helpers used by the agent program ---------------------------------
    def tile_path(self, src: int, dst: int) -> list[int]:
        """Move offsets of a shortest path from ``src`` to ``dst`` over tiled nodes."""
        tiles = self.tiles
        prev = {src: 0}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            if v == dst:
                break
            for off in PACKED_OFFSETS:
                u = v + off
                if u in tiles and u not in prev:
                    prev[u] = off
                    queue.append(u)
        if dst not in prev:
            raise UnreachableState(f"no tiled path from {unpack(src)} to {unpack(dst)}")
        path = []
        while dst != src:
            off = prev[dst]
            path.append(off)
            dst -= off
        return path[::-1]

    def begin_projection(self, start: int) -> None:
        self._fragment = frozenset(_layer_component(self.tiles, start))
        self._projecting = True

    def end_projection(self) -> None:
        self._projecting = False

    def _observe_for_term(self) -> None:
        # clear term on any tiled v in view, outside F, with v+UNE neither in F nor tiled
        tiles, frag, p = self.tiles, self._fragment, self.pos
        for off in (0, *PACKED_OFFSETS):
            v = p + off
            if v in tiles and v not in frag:
                u = v + UNE
                if u not in frag and u not in tiles:
                    self.agent.term = False
                    return

    # -- stepping ----------------------------------------------------------
    @property
    def phase(self) -> Phase:
        return Phase.TERMINATED if self.terminated else self.agent.phase

    @property
    def term(self) -> bool:
        return self.agent.term

    @property
    def first_column(self) -> bool:
        return self.agent.first_column

    def step(self) -> StepRecord:
        if self.terminated:
            raise InvalidAction("step after termination")
        agent = self.agent
        try:
            action = next(self._program)
        except StopIteration:
            raise UnreachableState("agent program ended without terminating") from None
        if self._projecting and agent.term:
            self._observe_for_term()
        self._apply(action)
        rec = StepRecord(
            self.steps, action, agent.phase, agent.kind, unpack(self.pos), self.carrying,
            agent.search_exit, agent.proj_start,
        )
        agent.search_exit = agent.proj_start = False
        self.steps += 1
        self.counts[agent.kind] += 1
        return rec

    def _apply(self, action: Action) -> None:
        if type(action) is Move:
            self.pos += PACKED[action.direction]
        elif type(action) is Place:
            if self.pos in self.tiles or not self.carrying:
                raise InvalidAction(f"invalid place at {unpack(self.pos)}")
            self.tiles.add(self.pos)
            self.carrying = False
        elif type(action) is Pickup:
            if self.pos not in self.tiles or self.carrying:
                raise InvalidAction(f"invalid pickup at {unpack(self.pos)}")
            self.tiles.remove(self.pos)
            self.carrying = True
        elif type(action) is Terminate:
            self.terminated = True
        else:
            raise TypeError(f"not an action: {action!r}")

    def configuration(self) -> Configuration:
        return Configuration(
            frozenset(unpack(k) for k in self.tiles), unpack(self.pos), self.carrying,
            terminated=self.terminated,
        )


def _layer_component(tiles: set[int], start: int) -> set[int]:
    if start not in tiles:
        return set()
    seen = {start}
    queue = deque(seen)
    while queue:
        k = queue.popleft()
        for off in PACKED_PLANE_OFFSETS:
            u = k + off
            if u in tiles and u not in seen:
                seen.add(u)
                queue.append(u)
    return seen


def check_preconditions(config: Configuration, *, planar: bool = False) -> list[str]:
    problems = []
    if not config.tiles:
        problems.append("no tiles")
    if config.agent not in config.tiles:
        problems.append(f"agent {config.agent} is not on a tile")
    if not config.carrying:
        problems.append("agent must start carrying a tile")
    if not is_connected(config.tiles):
        problems.append("tiles are not connected")
    if planar and len({v[2] for v in config.tiles}) > 1:
        problems.append("planar run needs all tiles in one layer")
    return problems


def engine_init(config: Configuration) -> Engine:
    return Engine(config)


def engine_step(engine: Engine) -> tuple[Action, Engine]:
    rec = engine.step()
    return rec.action, engine


def default_max_steps(n: int) -> int:
    return 10 * max(n, 1) ** 3 + 100


def _run(
    engine: Engine,
    max_steps: Optional[int],
    observers: Sequence[Observer],
    keep_trace: bool,
) -> RunResult:
    if max_steps is None:
        max_steps = default_max_steps(engine.initial.n)
    trace: Optional[list[StepRecord]] = [] if keep_trace else None
    step = engine.step
    while not engine.terminated and engine.steps < max_steps:
        rec = step()
        if trace is not None:
            trace.append(rec)
        for obs in observers:
            obs(rec, engine)
    c = engine.counts
    return RunResult(
        terminated=engine.terminated,
        steps_total=engine.steps,
        steps_proj=c[StepKind.PROJ],
        steps_shift=c[StepKind.SHIFT],
        steps_other=c[StepKind.OTHER],
        final=engine.configuration(),
        trace=trace,
        max_steps=max_steps,
    )


def run_to_termination(
    config: Configuration,
    max_steps: Optional[int] = None,
    observers: Sequence[Observer] = (),
    *,
    keep_trace: bool = False,
) -> RunResult:
    return _run(Engine(config), max_steps, observers, keep_trace)


def run_parallelogram_2d(
    config: Configuration,
    max_steps: Optional[int] = None,
    observers: Sequence[Observer] = (),
    *,
    keep_trace: bool = False,
) -> RunResult:
    return _run(Engine(config, planar=True), max_steps, observers, keep_trace)


def write_trace(trace: Sequence[StepRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in trace:
            fh.write(rec.format())
            fh.write("\n")


def replay(config: Configuration, actions: Sequence[Action]) -> Configuration:
    """Apply ``actions`` to ``config`` under the model rules only."""
    from .world import apply

    for a in actions:
        config = apply(config, a)
    return config


__all__ = [
    "Engine", "Phase", "RunResult", "StepKind", "StepRecord", "UnreachableState",
    "PreconditionError", "engine_init", "engine_step", "run_to_termination",
    "run_parallelogram_2d", "write_trace", "check_preconditions", "default_max_steps",
    "replay",
]
