"""Geometry of the FCC adjacency graph in skewed integer coordinates.

Layers are the planes of constant ``z``; inside a layer ``x`` grows towards
NW and ``y`` towards N, so each layer is a triangular lattice. Nodes are plain
``(x, y, z)`` tuples. The engine works on packed integer keys (see
:func:`pack`) because tuple arithmetic dominates the inner loop otherwise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

Coord = tuple[int, int, int]


class Direction(Enum):
    UNE = "UNE"
    UW = "UW"
    USE = "USE"
    N = "N"
    NW = "NW"
    SW = "SW"
    S = "S"
    SE = "SE"
    NE = "NE"
    DNW = "DNW"
    DSW = "DSW"
    DE = "DE"

    def __str__(self) -> str:
        return self.value

    # members are singletons; identity hashing skips Enum's Python-level __hash__
    __hash__ = object.__hash__


_DELTAS: dict[Direction, Coord] = {
    Direction.UNE: (0, 0, 1),
    Direction.UW: (1, -1, 1),
    Direction.USE: (0, -1, 1),
    Direction.N: (0, 1, 0),
    Direction.NW: (1, 0, 0),
    Direction.SW: (1, -1, 0),
    Direction.S: (0, -1, 0),
    Direction.SE: (-1, 0, 0),
    Direction.NE: (-1, 1, 0),
    Direction.DNW: (0, 1, -1),
    Direction.DSW: (0, 0, -1),
    Direction.DE: (-1, 1, -1),
}

_OPPOSITE: dict[Direction, Direction] = {
    d: next(e for e, de in _DELTAS.items() if de == tuple(-c for c in dd))
    for d, dd in _DELTAS.items()
}

DIRECTIONS: tuple[Direction, ...] = tuple(Direction)
PLANE_DIRECTIONS: tuple[Direction, ...] = (
    Direction.N, Direction.NW, Direction.SW, Direction.S, Direction.SE, Direction.NE,
)
OFFSETS: tuple[Coord, ...] = tuple(_DELTAS[d] for d in DIRECTIONS)
PLANE_OFFSETS: tuple[Coord, ...] = tuple(_DELTAS[d] for d in PLANE_DIRECTIONS)
_OFFSET_SET = frozenset(OFFSETS)

# Edge vectors of x, y and z; all twelve offsets map to vectors of norm sqrt(2).
EMBED_BASIS: tuple[Coord, Coord, Coord] = ((1, 1, 0), (0, 1, 1), (-1, 1, 0))


def delta(d: Direction) -> Coord:
    return _DELTAS[d]


def opposite(d: Direction) -> Direction:
    return _OPPOSITE[d]


def neighbor(v: Coord, d: Direction) -> Coord:
    dx, dy, dz = _DELTAS[d]
    return (v[0] + dx, v[1] + dy, v[2] + dz)


def neighbors(v: Coord) -> list[Coord]:
    x, y, z = v
    return [(x + dx, y + dy, z + dz) for dx, dy, dz in OFFSETS]


def adjacent(u: Coord, v: Coord) -> bool:
    return (v[0] - u[0], v[1] - u[1], v[2] - u[2]) in _OFFSET_SET


def embed(v: Coord) -> tuple[int, int, int]:
    """Cartesian image of ``v``; integer valued, nearest neighbours at distance sqrt(2)."""
    a, b, c = EMBED_BASIS
    x, y, z = v
    return (
        x * a[0] + y * b[0] + z * c[0],
        x * a[1] + y * b[1] + z * c[1],
        x * a[2] + y * b[2] + z * c[2],
    )


# Packed node keys: three biased 21-bit fields in one int. Addition of packed
# offsets is exact while every coordinate stays within +-2**20.
_BITS = 21
_BIAS = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1
_ORIGIN = (_BIAS << (2 * _BITS)) | (_BIAS << _BITS) | _BIAS


def pack(v: Coord) -> int:
    return _ORIGIN + (v[0] << (2 * _BITS)) + (v[1] << _BITS) + v[2]


def unpack(k: int) -> Coord:
    return (
        ((k >> (2 * _BITS)) & _MASK) - _BIAS,
        ((k >> _BITS) & _MASK) - _BIAS,
        (k & _MASK) - _BIAS,
    )


def pack_offset(d: Direction) -> int:
    dx, dy, dz = _DELTAS[d]
    return (dx << (2 * _BITS)) + (dy << _BITS) + dz


PACKED: dict[Direction, int] = {d: pack_offset(d) for d in DIRECTIONS}
PACKED_OFFSETS: tuple[int, ...] = tuple(PACKED[d] for d in DIRECTIONS)
PACKED_PLANE_OFFSETS: tuple[int, ...] = tuple(PACKED[d] for d in PLANE_DIRECTIONS)


@dataclass(frozen=True)
class Bounds:
    x_min: int
    x_max: int
    y_min: int
    y_max: int
    z_min: int
    z_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def depth(self) -> int:
        return self.z_max - self.z_min + 1

    def in_cylinder(self, v: Coord) -> bool:
        return self.x_min <= v[0] <= self.x_max and self.y_min <= v[1] <= self.y_max

    def in_box(self, v: Coord) -> bool:
        return self.in_cylinder(v) and self.z_min <= v[2] <= self.z_max


def bounds(nodes: Iterable[Coord]) -> Bounds:
    nodes = list(nodes)
    if not nodes:
        raise ValueError("bounds of an empty node set")
    xs, ys, zs = zip(*nodes)
    return Bounds(min(xs), max(xs), min(ys), max(ys), min(zs), max(zs))


def xy_coord(v: Coord, b: Bounds) -> int:
    """Column-major index of ``v`` inside the cylinder, counted from its south-east corner.

    Invariant along UNE/DSW. Measured from ``b.x_min`` so that arbitrary node sets
    work; for runs started at ``x_min = 0`` this is ``x * h + y - y_min``.
    """
    if not b.in_cylinder(v):
        raise ValueError(f"{v} lies outside the bounding cylinder")
    return (v[0] - b.x_min) * b.height + v[1] - b.y_min


@dataclass(frozen=True)
class Fragment:
    z: int
    nodes: frozenset[Coord]

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, v: object) -> bool:
        return v in self.nodes


def fragments(nodes: Iterable[Coord]) -> list[Fragment]:
    """Split ``nodes`` into in-layer connected components.

    Ordered by ascending ``z``, then by the lexicographically smallest ``(x, y)``.
    """
    remaining = set(nodes)
    out: list[Fragment] = []
    for start in sorted(remaining, key=lambda v: (v[2], v[0], v[1])):
        if start not in remaining:
            continue
        remaining.discard(start)
        comp = [start]
        queue = deque(comp)
        while queue:
            x, y, z = queue.popleft()
            for dx, dy, _ in PLANE_OFFSETS:
                u = (x + dx, y + dy, z)
                if u in remaining:
                    remaining.discard(u)
                    comp.append(u)
                    queue.append(u)
        out.append(Fragment(start[2], frozenset(comp)))
    return out


def _bfs_eccentricity(keys: set[int], source: int) -> tuple[int, int]:
    dist = {source: 0}
    queue = deque((source,))
    far = 0
    while queue:
        k = queue.popleft()
        dk = dist[k] + 1
        for off in PACKED_OFFSETS:
            u = k + off
            if u in keys and u not in dist:
                dist[u] = dk
                far = dk
                queue.append(u)
    return far, len(dist)


def diameter(nodes: Iterable[Coord]) -> int:
    """Largest hop distance between two nodes of a connected set (all-pairs BFS)."""
    keys = {pack(v) for v in nodes}
    if not keys:
        raise ValueError("diameter of an empty node set")
    best = 0
    for k in keys:
        far, reached = _bfs_eccentricity(keys, k)
        if reached != len(keys):
            raise ValueError("diameter of a disconnected node set")
        best = max(best, far)
    return best
