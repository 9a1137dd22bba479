"""Configurations, the agent's four actions, connectivity and node classes."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import AbstractSet, Iterable, Union

from .lattice import (
    DIRECTIONS,
    OFFSETS,
    Coord,
    Direction,
    adjacent,
    neighbor,
    neighbors,
)


class InvalidAction(Exception):
    """An action that the model rules forbid in the current configuration."""


class ConfigFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    direction: Direction

    def __str__(self) -> str:
        return f"move {self.direction}"


@dataclass(frozen=True)
class Place:
    def __str__(self) -> str:
        return "place"


@dataclass(frozen=True)
class Pickup:
    def __str__(self) -> str:
        return "pickup"


@dataclass(frozen=True)
class Terminate:
    def __str__(self) -> str:
        return "terminate"


Action = Union[Move, Place, Pickup, Terminate]

MOVES: dict[Direction, Move] = {d: Move(d) for d in DIRECTIONS}
PLACE = Place()
PICKUP = Pickup()
TERMINATE = Terminate()


@dataclass(frozen=True)
class Configuration:
    tiles: frozenset[Coord]
    agent: Coord
    carrying: bool = True
    terminated: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.tiles, frozenset):
            object.__setattr__(self, "tiles", frozenset(self.tiles))

    @property
    def n(self) -> int:
        """Tile count including a carried tile."""
        return len(self.tiles) + int(self.carrying)


def apply(c: Configuration, a: Action) -> Configuration:
    if c.terminated:
        raise InvalidAction("the agent has terminated")
    p = c.agent
    if isinstance(a, Move):
        return replace(c, agent=neighbor(p, a.direction))
    if isinstance(a, Place):
        if p in c.tiles:
            raise InvalidAction(f"place on tiled node {p}")
        if not c.carrying:
            raise InvalidAction("place without a carried tile")
        return replace(c, tiles=c.tiles | {p}, carrying=False)
    if isinstance(a, Pickup):
        if p not in c.tiles:
            raise InvalidAction(f"pickup from empty node {p}")
        if c.carrying:
            raise InvalidAction("pickup while carrying")
        return replace(c, tiles=c.tiles - {p}, carrying=True)
    if isinstance(a, Terminate):
        return replace(c, terminated=True)
    raise TypeError(f"not an action: {a!r}")


def is_connected(nodes: Iterable[Coord]) -> bool:
    remaining = set(nodes)
    if not remaining:
        return True
    queue = deque([remaining.pop()])
    while queue:
        x, y, z = queue.popleft()
        for dx, dy, dz in OFFSETS:
            u = (x + dx, y + dy, z + dz)
            if u in remaining:
                remaining.discard(u)
                queue.append(u)
    return not remaining


def model_connected(c: Configuration) -> bool:
    if is_connected(c.tiles):
        return True
    return c.carrying and is_connected(c.tiles | {c.agent})


class NodeKind(Enum):
    REMOVABLE = "removable"
    SHIFTABLE = "shiftable"
    UNMOVABLE = "unmovable"


@dataclass(frozen=True)
class NodeClass:
    kind: NodeKind
    bridges: frozenset[Coord] = frozenset()


def _tile_set(c: Union[Configuration, AbstractSet[Coord]]) -> AbstractSet[Coord]:
    return c.tiles if isinstance(c, Configuration) else c


def classify(c: Union[Configuration, AbstractSet[Coord]], v: Coord) -> NodeClass:
    """Removable / shiftable / unmovable class of the tiled node ``v``.

    For shiftable nodes ``bridges`` lists every empty node ``w != v`` whose addition
    connects the tiled neighbourhood of ``v``; such a node must touch at least two
    tiled neighbours, which bounds the search.
    """
    tiles = _tile_set(c)
    if v not in tiles:
        raise ValueError(f"classify: {v} is not tiled")
    near = [u for u in neighbors(v) if u in tiles]
    if is_connected(near):
        return NodeClass(NodeKind.REMOVABLE)
    candidates: set[Coord] = set()
    for u in near:
        candidates.update(neighbors(u))
    bridges = set()
    for w in candidates:
        if w == v or w in tiles:
            continue
        if sum(adjacent(w, u) for u in near) < 2:
            continue
        if is_connected([*near, w]):
            bridges.add(w)
    if bridges:
        return NodeClass(NodeKind.SHIFTABLE, frozenset(bridges))
    return NodeClass(NodeKind.UNMOVABLE)


# 12-bit neighbourhood masks, bit i <-> DIRECTIONS[i].
BIT: dict[Direction, int] = {d: 1 << i for i, d in enumerate(DIRECTIONS)}


def _mask_connected(mask: int) -> bool:
    members = [OFFSETS[i] for i in range(12) if mask >> i & 1]
    return is_connected(members)


CONNECTED_MASK: tuple[bool, ...] = tuple(_mask_connected(m) for m in range(1 << 12))


def neighbor_mask(tiles: AbstractSet[Coord], v: Coord) -> int:
    return sum(BIT[d] for d in DIRECTIONS if neighbor(v, d) in tiles)


# --- text format ------------------------------------------------------------


def loads_config(text: str) -> Configuration:
    agent: Coord | None = None
    tiles: list[Coord] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] not in ("agent", "tile") or len(parts) != 4:
            raise ConfigFormatError(f"line {lineno}: expected 'agent|tile X Y Z', got {raw!r}")
        try:
            v = (int(parts[1]), int(parts[2]), int(parts[3]))
        except ValueError:
            raise ConfigFormatError(f"line {lineno}: non-integer coordinate in {raw!r}") from None
        if parts[0] == "agent":
            if agent is not None:
                raise ConfigFormatError(f"line {lineno}: second agent line")
            agent = v
        else:
            tiles.append(v)
    if agent is None:
        raise ConfigFormatError("missing agent line")
    if len(set(tiles)) != len(tiles):
        raise ConfigFormatError("duplicate tile")
    if agent not in tiles:
        raise ConfigFormatError(f"agent {agent} does not start on a tile")
    return Configuration(frozenset(tiles), agent, carrying=True)


def dumps_config(c: Configuration) -> str:
    lines = [f"agent {c.agent[0]} {c.agent[1]} {c.agent[2]}"]
    lines += [f"tile {x} {y} {z}" for x, y, z in sorted(c.tiles)]
    return "\n".join(lines) + "\n"


def read_config(path: str | Path) -> Configuration:
    return loads_config(Path(path).read_text())


def write_config(c: Configuration, path: str | Path) -> None:
    Path(path).write_text(dumps_config(c))

