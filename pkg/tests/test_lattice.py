import itertools

import networkx as nx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icicle.lattice import (
    DIRECTIONS,
    EMBED_BASIS,
    OFFSETS,
    PACKED,
    Direction,
    adjacent,
    bounds,
    delta,
    diameter,
    embed,
    fragments,
    neighbor,
    neighbors,
    opposite,
    pack,
    unpack,
    xy_coord,
)

coords = st.tuples(*[st.integers(-1000, 1000)] * 3)


def test_twelve_distinct_offsets_closed_under_negation():
    assert len(set(OFFSETS)) == 12
    assert {tuple(-c for c in o) for o in OFFSETS} == set(OFFSETS)


def test_opposites():
    pairs = {("UNE", "DSW"), ("UW", "DE"), ("USE", "DNW"), ("N", "S"), ("NW", "SE"), ("SW", "NE")}
    for a, b in pairs:
        assert opposite(Direction[a]) is Direction[b]
        assert opposite(Direction[b]) is Direction[a]


def test_embedding_is_fcc():
    # every offset maps to a vector of squared length 2 and all 12 such vectors are hit
    images = {embed(o) for o in OFFSETS}
    fcc = {v for v in itertools.product((-1, 0, 1), repeat=3) if sum(c * c for c in v) == 2}
    assert images == fcc


def test_embedding_basis_is_invertible():
    a, b, c = EMBED_BASIS
    det = (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
           + a[2] * (b[0] * c[1] - b[1] * c[0]))
    assert det != 0


def test_layer_is_triangular_lattice():
    # six in-plane directions, each plane neighbour shares exactly two plane neighbours with v
    plane = [delta(d) for d in DIRECTIONS if delta(d)[2] == 0]
    assert len(plane) == 6
    for o in plane:
        common = [p for p in plane if adjacent(o, p)]
        assert len(common) == 2


def test_up_directions_raise_z():
    for name in ("UNE", "UW", "USE"):
        assert delta(Direction[name])[2] == 1
    for name in ("DNW", "DSW", "DE"):
        assert delta(Direction[name])[2] == -1


def test_three_upper_neighbours_form_triangle():
    up = [delta(Direction[n]) for n in ("UNE", "UW", "USE")]
    assert all(adjacent(a, b) for a, b in itertools.combinations(up, 2))


@given(coords)
def test_pack_roundtrip(v):
    assert unpack(pack(v)) == v


@given(coords, st.sampled_from(DIRECTIONS))
def test_packed_offsets_agree(v, d):
    assert pack(v) + PACKED[d] == pack(neighbor(v, d))


@given(coords)
def test_neighbors_adjacent(v):
    ns = neighbors(v)
    assert len(ns) == 12 and all(adjacent(v, u) for u in ns)
    assert not adjacent(v, v)


def test_xy_coord_invariant_along_une():
    nodes = [(0, 0, 0), (1, 2, 0), (0, 0, 5)]
    b = bounds(nodes)
    assert xy_coord((1, 2, 0), b) == xy_coord((1, 2, 7), b) == 1 * 3 + 2
    with pytest.raises(ValueError):
        xy_coord((5, 0, 0), b)


def test_fragments_split_by_layer_and_plane_connectivity():
    nodes = [(0, 0, 0), (0, 1, 0), (3, 3, 0), (0, 0, 1)]
    frags = fragments(nodes)
    assert [f.z for f in frags] == [0, 0, 1]
    assert {len(f) for f in frags if f.z == 0} == {1, 2}


def _nx_graph(nodes):
    g = nx.Graph()
    g.add_nodes_from(nodes)
    s = set(nodes)
    for v in nodes:
        for u in neighbors(v):
            if u in s:
                g.add_edge(v, u)
    return g


def test_diameter_line_and_tower():
    assert diameter([(i, 0, 0) for i in range(7)]) == 6
    assert diameter([(0, 0, -i) for i in range(4)]) == 3
    assert diameter([(0, 0, 0)]) == 0
    with pytest.raises(ValueError):
        diameter([(0, 0, 0), (5, 5, 5)])


@given(st.sets(st.tuples(*[st.integers(0, 3)] * 3), min_size=1, max_size=25))
def test_diameter_matches_networkx(nodes):
    g = _nx_graph(list(nodes))
    if not nx.is_connected(g):
        return
    assert diameter(nodes) == nx.diameter(g)


def test_embed_example():
    assert embed((1, 1, 0)) == (1, 2, 1)
