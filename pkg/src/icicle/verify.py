"""Shape predicates, potentials and per-step monitors for checking runs.

Everything here is independent of the agent program: monitors only see the
initial configuration and the stream of actions with their annotations.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from itertools import combinations
from typing import AbstractSet, Iterable, Optional, Sequence

from .lattice import (
    OFFSETS,
    PLANE_OFFSETS,
    Bounds,
    Coord,
    Direction,
    Fragment,
    bounds,
    delta,
    fragments,
    neighbor,
    xy_coord,
)
from .world import (
    Configuration,
    Move,
    NodeKind,
    Pickup,
    Place,
    classify,
    is_connected,
)

_UP = tuple(delta(d) for d in (Direction.UW, Direction.USE, Direction.UNE))
_UNE = delta(Direction.UNE)


class CheckerDisagreement(AssertionError):
    """The two icicle checkers returned different answers."""


@dataclass(frozen=True)
class PotentialSample:
    step: int
    phi: int
    psi: int
    platform_count: int
    sum_xy: int

    def __post_init__(self) -> None:
        assert self.phi == self.sum_xy + self.platform_count


@dataclass(frozen=True)
class Violation:
    monitor: str
    step: int
    detail: str
    nodes: tuple[Coord, ...] = ()

    def __str__(self) -> str:
        where = " ".join(f"({x},{y},{z})" for x, y, z in self.nodes)
        return f"{self.monitor} @ step {self.step}: {self.detail}" + (f" [{where}]" if where else "")


def _add(v: Coord, d: Coord) -> Coord:
    return (v[0] + d[0], v[1] + d[1], v[2] + d[2])


# --- fragment properties ----------------------------------------------------


def is_platform(nodes: Iterable[Coord], tiles: AbstractSet[Coord]) -> bool:
    return not any(_add(v, d) in tiles for v in nodes for d in _UP)


def fragment_properties(
    frag: Fragment | AbstractSet[Coord], tiles: AbstractSet[Coord]
) -> tuple[bool, bool, bool]:
    """(platform, covering, aligned) for a maximal in-layer component of ``tiles``.

    Platform: nothing above it. Covering: every tile shares an xy-coordinate with
    it. Aligned: its xy-coordinates are exactly 0..max.
    """
    nodes = frag.nodes if isinstance(frag, Fragment) else frozenset(frag)
    if not nodes or not nodes <= tiles:
        raise ValueError("fragment is not a subset of the tile set")
    if len({v[2] for v in nodes}) != 1 or not is_connected(nodes) or any(
        _add(v, (dx, dy, 0)) in tiles and _add(v, (dx, dy, 0)) not in nodes
        for v in nodes
        for dx, dy, _ in PLANE_OFFSETS
    ):
        raise ValueError("not a maximal in-layer component of the tile set")
    b = bounds(tiles)
    own = {xy_coord(v, b) for v in nodes}
    platform = is_platform(nodes, tiles)
    covering = all(xy_coord(v, b) in own for v in tiles)
    aligned = own == set(range(max(own) + 1))
    return platform, covering, aligned


def _aligned_fragment(tiles: AbstractSet[Coord]) -> Optional[Fragment]:
    for f in fragments(tiles):
        if all(fragment_properties(f, tiles)):
            return f
    return None


# --- icicle checkers ------------------------------------------------------


def icicle_by_fragment(tiles: AbstractSet[Coord]) -> bool:
    """Some fragment is a covering, aligned platform; every other tile has a tile at UNE."""
    if not tiles:
        return False
    f = _aligned_fragment(tiles)
    if f is None:
        return False
    return all(_add(v, _UNE) in tiles for v in tiles if v not in f.nodes)


def icicle_by_towers(tiles: AbstractSet[Coord]) -> bool:
    """Tower tops form one partially filled parallelogram in a single layer."""
    if not tiles:
        return False
    tops = [v for v in tiles if _add(v, _UNE) not in tiles]
    if len({v[2] for v in tops}) != 1:
        return False
    columns: dict[int, list[int]] = defaultdict(list)
    for x, y, _ in tops:
        columns[x].append(y)
    xs = sorted(columns)
    if xs != list(range(xs[0], xs[-1] + 1)):
        return False
    spans = []
    for x in xs:
        ys = sorted(columns[x])
        if ys != list(range(ys[0], ys[-1] + 1)):
            return False
        spans.append((ys[0], len(ys)))
    if len({lo for lo, _ in spans}) != 1:
        return False
    # larger x lies further west; only the westernmost column may be shorter
    full = {length for _, length in spans[:-1]}
    if len(full) > 1:
        return False
    return not full or spans[-1][1] <= full.pop()


def is_icicle(c: Configuration | AbstractSet[Coord]) -> bool:
    tiles = c.tiles if isinstance(c, Configuration) else frozenset(c)
    a = icicle_by_fragment(tiles)
    b = icicle_by_towers(tiles)
    if a != b:
        raise CheckerDisagreement(f"checkers disagree ({a} vs {b}) on {sorted(tiles)}")
    return a


# --- potentials -----------------------------------------------------------


def platform_count(tiles: AbstractSet[Coord]) -> int:
    return sum(is_platform(f.nodes, tiles) for f in fragments(tiles))


def sum_xy(tiles: AbstractSet[Coord], b: Optional[Bounds] = None) -> int:
    b = b or bounds(tiles)
    return sum((x - b.x_min) * b.height + y - b.y_min for x, y, _ in tiles)


def phi(tiles: AbstractSet[Coord], step: int = 0) -> PotentialSample:
    s, pc = sum_xy(tiles), platform_count(tiles)
    return PotentialSample(step, s + pc, psi(tiles), pc, s)


def psi(tiles: AbstractSet[Coord]) -> int:
    """Empty box nodes that have a tile somewhere in direction DSW."""
    if not tiles:
        return 0
    z_top = max(v[2] for v in tiles)
    towers: dict[tuple[int, int], list[int]] = defaultdict(list)
    for x, y, z in tiles:
        towers[x, y].append(z)
    return sum(z_top - min(zs) + 1 - len(zs) for zs in towers.values())


# --- neighbourhood census ----------------------------------------------------

CENSUS_DIRECTIONS = (
    Direction.DSW, Direction.DNW, Direction.DE, Direction.S, Direction.SE, Direction.NE,
)


@dataclass(frozen=True)
class CensusRow:
    tiled: tuple[Direction, ...]
    kind: NodeKind
    bridges: tuple[Direction, ...]


def census() -> list[CensusRow]:
    """Classify every search-exit neighbourhood: any subset of the six lower/eastern directions."""
    v = (0, 0, 0)
    to_dir = {delta(d): d for d in Direction}
    rows = []
    for r in range(len(CENSUS_DIRECTIONS) + 1):
        for subset in combinations(CENSUS_DIRECTIONS, r):
            tiles = frozenset([v, *(neighbor(v, d) for d in subset)])
            cls = classify(tiles, v)
            bridges = tuple(sorted(
                (to_dir[w] for w in cls.bridges if w in to_dir and to_dir[w] in CENSUS_DIRECTIONS),
                key=list(Direction).index,
            ))
            rows.append(CensusRow(subset, cls.kind, bridges))
    return rows


def census_counts() -> dict[NodeKind, int]:
    counts = {k: 0 for k in NodeKind}
    for row in census():
        counts[row.kind] += 1
    return counts


# --- trace monitors -------------------------------------------------------

CONNECTIVITY_WINDOW = 4


class InvariantMonitor:
    """Replays actions on its own copy of the configuration and records violations.

    Feed it every step record in order (directly or as an engine observer).
    Potentials are sampled at search exits, i.e. on the configuration the agent
    sees right before the first action after a search phase.

    ``check_persistence`` additionally demands that once the agent exits search
    on an aligned covering platform it always does so again. Off by default:
    a one-tile westernmost column standing on a tower breaks it (see README).
    """

    def __init__(self, initial: Configuration, *, check_persistence: bool = False) -> None:
        self.tiles = set(initial.tiles)
        self.pos = initial.agent
        self.carrying = initial.carrying
        self.n = initial.n
        b0 = bounds(initial.tiles)
        self.cyl0 = b0
        self.anchor = sum(1 for v in initial.tiles if v[0] == b0.x_min)
        self.violations: list[Violation] = []
        self.samples: list[PotentialSample] = []
        self._disconnected = 0
        self._prev_phi: Optional[int] = None
        self._changed = False
        self._projected = False
        self.check_persistence = check_persistence
        self.aligned_onset: Optional[int] = None
        self._prev_aligned = False
        self._prev_psi = 0
        self._proj_sum: Optional[int] = None
        self._step = -1

    def __call__(self, rec, engine=None) -> None:
        self.feed(rec)

    def _flag(self, name: str, detail: str, *nodes: Coord) -> None:
        self.violations.append(Violation(name, self._step, detail, tuple(nodes)))

    def feed(self, rec) -> None:
        self._step = rec.index
        kind = getattr(rec.kind, "value", rec.kind)
        if self._proj_sum is not None and kind != "proj":
            self._end_projection()
        if rec.search_exit:
            self._search_exit()
        if rec.proj_start:
            self._proj_sum = sum_xy(self.tiles)
            self._projected = True
        self._apply(rec.action)
        if tuple(rec.pos) != self.pos or bool(rec.carrying) != self.carrying:
            self._flag("replay", f"record state {rec.pos}/{rec.carrying} differs from replay {self.pos}/{self.carrying}")

    def finish(self) -> list[Violation]:
        if self._proj_sum is not None:
            self._end_projection()
        if self._disconnected:
            self._flag("connectivity", "run ended with disconnected tiles")
        return self.violations

    def _end_projection(self) -> None:
        after = sum_xy(self.tiles)
        if after != self._proj_sum:
            self._flag("sum-xy", f"projection changed the xy sum from {self._proj_sum} to {after}")
        self._proj_sum = None

    def _apply(self, a) -> None:
        p = self.pos
        split = False
        if isinstance(a, Move):
            self.pos = neighbor(p, a.direction)
        elif isinstance(a, Place):
            if p in self.tiles or not self.carrying:
                self._flag("model", "invalid place", p)
            if not self.cyl0.in_cylinder(p):
                self._flag("cylinder", "tile placed outside the initial bounding cylinder", p)
            self.tiles.add(p)
            self.carrying = False
            self._changed = True
            if p[0] == self.cyl0.x_min:
                self.anchor += 1
        elif isinstance(a, Pickup):
            if p not in self.tiles or self.carrying:
                self._flag("model", "invalid pickup", p)
            self.tiles.discard(p)
            self.carrying = True
            self._changed = True
            if p[0] == self.cyl0.x_min:
                self.anchor -= 1
                if self.anchor == 0:
                    self._flag("anchor", "no tile left on the eastern side of the cylinder", p)
            if not self._disconnected and not _locally_connected(self.tiles, p):
                split = not is_connected(self.tiles)
        if len(self.tiles) + self.carrying != self.n:
            self._flag("conservation", f"{len(self.tiles)} tiles + carrying {self.carrying} != {self.n}")
        if self._disconnected or split:
            self._track_disconnection(a, split)

    def _track_disconnection(self, a, split: bool) -> None:
        if not split and isinstance(a, (Place, Pickup)) and is_connected(self.tiles):
            self._disconnected = 0
            return
        self._disconnected += 1
        if not self.carrying or not is_connected(self.tiles | {self.pos}):
            self._flag("connectivity", "tiles disconnected and the agent does not bridge them", self.pos)
        if self._disconnected > CONNECTIVITY_WINDOW:
            self._flag("connectivity", f"tiles disconnected for {self._disconnected} steps", self.pos)

    def _search_exit(self) -> None:
        tiles = self.tiles
        s, pc, ps, aligned = _exit_stats(tiles, self.pos)
        self.samples.append(PotentialSample(self._step, s + pc, ps, pc, s))
        cur = s + pc
        if self._prev_phi is not None:
            if cur > self._prev_phi:
                self._flag("phi", f"potential rose from {self._prev_phi} to {cur}", self.pos)
            elif cur == self._prev_phi and self._changed and not self._projected:
                self._flag("phi", f"tiles shifted without a projection but potential stayed {cur}", self.pos)
        self._prev_phi = cur
        self._changed = self._projected = False

        # the gap-count bound only holds for an interval that starts on an aligned platform
        if self._prev_aligned:
            if self.check_persistence and not aligned:
                self._flag("persistence", "agent left the aligned covering platform", self.pos)
            if self._prev_psi > 0 and ps >= self._prev_psi:
                self._flag("psi", f"gap count did not drop ({self._prev_psi} -> {ps})", self.pos)
        if aligned and self.aligned_onset is None:
            self.aligned_onset = self._step
        self._prev_aligned = aligned
        self._prev_psi = ps


_PLANE_XY = tuple((dx, dy) for dx, dy, _ in PLANE_OFFSETS)


def _exit_stats(tiles: AbstractSet[Coord], agent: Coord) -> tuple[int, int, int, bool]:
    """(sum of xy, platform count, gap count, agent's fragment is a covering aligned platform) in one pass."""
    b = bounds(tiles)
    x0, y0, h = b.x_min, b.y_min, b.height
    sxy = 0
    towers: dict[tuple[int, int], list[int]] = defaultdict(list)
    for x, y, z in tiles:
        sxy += (x - x0) * h + y - y0
        towers[x, y].append(z)
    z_top = b.z_max
    gaps = sum(z_top - min(zs) + 1 - len(zs) for zs in towers.values())

    (ux, uy, _), (sx, sy, _), (ex, ey, _) = _UP
    seen: set[Coord] = set()
    platforms = 0
    aligned = False
    for start in tiles:
        if start in seen:
            continue
        seen.add(start)
        comp = [start]
        z = start[2]
        flat = True
        i = 0
        while i < len(comp):
            x, y, _ = comp[i]
            i += 1
            if flat and ((x + ux, y + uy, z + 1) in tiles or (x + sx, y + sy, z + 1) in tiles
                         or (x + ex, y + ey, z + 1) in tiles):
                flat = False
            for dx, dy in _PLANE_XY:
                w = (x + dx, y + dy, z)
                if w in tiles and w not in seen:
                    seen.add(w)
                    comp.append(w)
        platforms += flat
        if flat and agent[2] == z and agent in tiles and not aligned:
            members = set(comp)
            if agent in members:
                own = {(x - x0) * h + y - y0 for x, y, _ in comp}
                aligned = len(own) == len(towers) and max(own) + 1 == len(own)
    return sxy, platforms, gaps, aligned


def _locally_connected(tiles: AbstractSet[Coord], v: Coord) -> bool:
    near = [u for u in (_add(v, d) for d in OFFSETS) if u in tiles]
    return is_connected(near)


def check_trace(
    initial: Configuration, trace: Sequence, *, check_persistence: bool = False
) -> list[Violation]:
    """Run every monitor over a recorded trace; empty result means all passed."""
    monitor = InvariantMonitor(initial, check_persistence=check_persistence)
    for i, rec in enumerate(trace):
        if rec.index != i:
            raise ValueError(f"malformed trace: record {i} has index {rec.index}")
        monitor.feed(rec)
    return monitor.finish()


__all__ = [
    "CheckerDisagreement", "PotentialSample", "Violation", "fragment_properties", "is_platform",
    "icicle_by_fragment", "icicle_by_towers", "is_icicle", "platform_count", "sum_xy",
    "phi", "psi", "CENSUS_DIRECTIONS", "CensusRow", "census", "census_counts",
    "InvariantMonitor", "check_trace", "CONNECTIVITY_WINDOW",
]
