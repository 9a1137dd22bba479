"""Instance generators: random sphere samples, the worst-case family, simple shapes.

Randomness comes from numpy's PCG64 seeded through ``SeedSequence``; node sampling
and agent placement use separate spawned streams so that changing one never
perturbs the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .lattice import EMBED_BASIS, OFFSETS, Coord, Direction, delta
from .world import Configuration, is_connected


# --- random sphere instances ---------------------------------------------------


def sphere_radius(n: int) -> float:
    return 4.0 * n ** (1.0 / 3.0)


@lru_cache(maxsize=64)
def sphere_nodes(radius: float) -> tuple[Coord, ...]:
    """Lattice nodes whose embedding lies within ``radius`` of the origin, in a fixed order."""
    # |y|, |x - z| and |x + y + z| are embedding components, so |x|, |z| <= 1.5 r and |y| <= r
    r = int(math.ceil(1.5 * radius))
    axis = np.arange(-r, r + 1)
    x, y, z = (a.ravel() for a in np.meshgrid(axis, axis, axis, indexing="ij"))
    basis = np.array(EMBED_BASIS)
    e = np.stack([x, y, z], axis=1) @ basis
    keep = (e * e).sum(axis=1) <= radius * radius
    return tuple(zip(x[keep].tolist(), y[keep].tolist(), z[keep].tolist()))


def _streams(seed: int | np.random.SeedSequence) -> tuple[np.random.Generator, np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    nodes, agent = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(nodes)), np.random.Generator(np.random.PCG64(agent))


def gen_sphere(n: int, seed: int | np.random.SeedSequence) -> Configuration:
    """Tile random nodes of a ball until one component reaches ``n`` tiles; keep that component.

    The result may hold more than ``n`` tiles when the final sample merges components.
    """
    if n < 1:
        raise ValueError("n must be positive")
    nodes = sphere_nodes(sphere_radius(n))
    if len(nodes) < n:
        raise AssertionError(f"ball of radius {sphere_radius(n):.2f} holds only {len(nodes)} nodes")
    node_rng, agent_rng = _streams(seed)
    order = node_rng.permutation(len(nodes))

    # union-find over tiled nodes; sampling without replacement == repeated choice of untiled nodes
    parent: dict[Coord, Coord] = {}
    size: dict[Coord, int] = {}

    def find(v: Coord) -> Coord:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    last = None
    for idx in order:
        v = nodes[idx]
        parent[v], size[v] = v, 1
        root = v
        for dx, dy, dz in OFFSETS:
            u = (v[0] + dx, v[1] + dy, v[2] + dz)
            if u in parent:
                ru = find(u)
                if ru != root:
                    if size[ru] < size[root]:
                        ru, root = root, ru
                    parent[root] = ru
                    size[ru] += size[root]
                    root = ru
        last = v
        if size[root] >= n:
            break
    root = find(last)
    tiles = sorted(v for v in parent if find(v) == root)
    agent = tiles[int(agent_rng.integers(len(tiles)))]
    return Configuration(frozenset(tiles), agent)


def child_seed(base: int, n: int, sample: int) -> int:
    """64-bit seed for one batch cell; independent of the order cells are run in."""
    lo, hi = np.random.SeedSequence([base, n, sample]).generate_state(2)
    return int(hi) << 32 | int(lo)


# --- worst-case family -----------------------------------------------------------

COPY_HEIGHT = 2


def worst_case_copy(k: int, j: int = 0) -> set[Coord]:
    """Block ``j``: a connector row in layer 2j under nested fragments F_0..F_k in layer 2j+1.

    The start node p0 = (0, 0) is F_1. For i >= 2, F_i is an L made of a row
    at y = -2(i-1) and a column at x = 2(i-1), both reaching back to p0's row
    and column, so its bounding box holds p0 but no node of F_(i+1). F_0 is a
    single tile east of p0; it sits one step further east in every block so the
    link above it does not lead straight into the next block's F_0.
    """
    z0 = COPY_HEIGHT * j
    mid = z0 + 1
    east = -2 - j
    tiles: set[Coord] = {(0, 0, mid), (east, 0, mid)}
    for i in range(2, k + 1):
        s = 2 * (i - 1)
        tiles.update((x, -s, mid) for x in range(0, s + 1))
        tiles.update((s, y, mid) for y in range(-s, 1))
    tiles.update((x, 1, z0) for x in range(east, 2 * (k - 1) + 1))
    return tiles


def gen_worst_case(k: int, copies: Optional[int] = None) -> Configuration:
    """``copies`` (default ``k``) blocks stacked along UNE; the agent starts on p0 of the bottom one.

    Block j links to block j+1 through the tile above its F_0. After the agent
    has projected F_1..F_k of a block it reaches F_0, climbs, and walks the next
    connector row north-west until it sees that block's p0. Each projection
    pushes a tile below p0, so the tower under p0 grows with k per block.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    copies = k if copies is None else copies
    if copies < 1:
        raise ValueError("copies must be positive")
    tiles: set[Coord] = set()
    for j in range(copies):
        tiles |= worst_case_copy(k, j)
        if j + 1 < copies:
            tiles.add((-2 - j, 0, COPY_HEIGHT * j + 2))
    return Configuration(frozenset(tiles), (0, 0, 1))


# --- simple shapes ------------------------------------------------------------


class ShapeKind(Enum):
    SPHERE = "sphere"
    WORST_CASE = "worst-case"
    PARALLELOGRAM = "parallelogram"
    COLUMN = "column"
    TOWER = "tower"
    LINE = "line"


@dataclass(frozen=True)
class GenSpec:
    kind: ShapeKind
    a: int
    b: int = 1
    seed: int = 0


def _ray(d: Direction, length: int) -> list[Coord]:
    dx, dy, dz = delta(d)
    return [(i * dx, i * dy, i * dz) for i in range(length)]


def gen_basic(shape: GenSpec) -> Configuration:
    if shape.a < 1 or shape.b < 1:
        raise ValueError(f"sizes must be positive: {shape}")
    k = shape.kind
    if k is ShapeKind.SPHERE:
        return gen_sphere(shape.a, shape.seed)
    if k is ShapeKind.WORST_CASE:
        return gen_worst_case(shape.a)
    if k is ShapeKind.PARALLELOGRAM:
        # width a columns going west (+x), each b tall, southern tiles on one row
        tiles = [(x, y, 0) for x in range(shape.a) for y in range(shape.b)]
    elif k is ShapeKind.COLUMN:
        tiles = _ray(Direction.N, shape.a)
    elif k is ShapeKind.TOWER:
        tiles = _ray(Direction.DSW, shape.a)
    elif k is ShapeKind.LINE:
        tiles = _ray(Direction.NW, shape.a)
    else:  # pragma: no cover
        raise ValueError(f"unknown shape {k}")
    return Configuration(frozenset(tiles), tiles[0])


# --- exhaustive small sets -------------------------------------------------------


def _normalize(nodes: frozenset[Coord]) -> frozenset[Coord]:
    mx = min(v[0] for v in nodes)
    my = min(v[1] for v in nodes)
    mz = min(v[2] for v in nodes)
    return frozenset((x - mx, y - my, z - mz) for x, y, z in nodes)


def connected_sets(max_size: int, box: int = 5) -> Iterator[frozenset[Coord]]:
    """Every connected node set of size <= ``max_size`` up to translation that fits a box^3 box.

    Yielded smallest first, each translated so its minimum corner is the origin.
    """
    level = {frozenset({(0, 0, 0)})}
    for size in range(1, max_size + 1):
        yield from sorted(level, key=sorted)
        if size == max_size:
            return
        nxt: set[frozenset[Coord]] = set()
        for s in level:
            for v in s:
                for dx, dy, dz in OFFSETS:
                    u = (v[0] + dx, v[1] + dy, v[2] + dz)
                    if u in s:
                        continue
                    t = _normalize(s | {u})
                    if all(max(c[i] for c in t) < box for i in range(3)):
                        nxt.add(t)
        level = nxt


def random_planar(n: int, rng: np.random.Generator) -> Configuration:
    """A random connected set of ``n`` tiles in layer 0 grown from the origin."""
    plane = [delta(d) for d in (Direction.N, Direction.NW, Direction.SW,
                                Direction.S, Direction.SE, Direction.NE)]
    tiles = [(0, 0, 0)]
    seen = {tiles[0]}
    while len(tiles) < n:
        v = tiles[int(rng.integers(len(tiles)))]
        dx, dy, _ = plane[int(rng.integers(6))]
        u = (v[0] + dx, v[1] + dy, 0)
        if u not in seen:
            seen.add(u)
            tiles.append(u)
    assert is_connected(tiles)
    return Configuration(frozenset(tiles), tiles[int(rng.integers(n))])


__all__ = [
    "sphere_radius", "sphere_nodes", "gen_sphere", "child_seed", "worst_case_copy",
    "gen_worst_case", "ShapeKind", "GenSpec", "gen_basic", "connected_sets", "random_planar",
    "COPY_HEIGHT",
]
