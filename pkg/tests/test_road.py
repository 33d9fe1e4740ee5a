import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridhaul._files import FileFormatError
from gridhaul.road import NotAdjacentError, RoadGraph, leg_distances, load_road, road_to_dict, shortest_path
from oracles import brute_shortest


def triangle():
    return RoadGraph.build(["A", "B", "C"], [("A", "B", 10), ("B", "C", 10), ("A", "C", 25)])


def test_same_origin_and_destination():
    r = shortest_path(triangle(), "A", "A")
    assert r.path == ["A"] and r.miles == 0


def test_triangle_detour_is_shorter():
    r = shortest_path(triangle(), "A", "C")
    assert r.path == ["A", "B", "C"]
    assert r.miles == 20
    assert r.miles == brute_shortest({("A", "B"): 10, ("B", "C"): 10, ("A", "C"): 25}, "A", "C")


def test_no_path_between_components():
    g = RoadGraph.build([1, 2, 3, 4], [(1, 2, 5), (3, 4, 5)])
    r = shortest_path(g, 1, 4)
    assert not r.found and r.path == [] and math.isinf(r.miles)


def test_unknown_node():
    with pytest.raises(KeyError):
        shortest_path(triangle(), "A", "Z")


def test_leg_distances():
    g = triangle()
    assert leg_distances(g, ["A", "B", "C"]) == [10, 10]
    assert leg_distances(g, ["A"]) == []


def test_leg_distances_reject_missing_edge():
    g = RoadGraph.build(["A", "B", "C"], [("A", "B", 10), ("B", "C", 10)])
    with pytest.raises(NotAdjacentError) as info:
        leg_distances(g, ["A", "C"])
    assert info.value.pair == ("A", "C")


def test_ties_broken_by_smallest_id():
    # two equal routes 1-2-4 and 1-3-4
    g = RoadGraph.build([1, 2, 3, 4], [(1, 3, 5), (3, 4, 5), (1, 2, 5), (2, 4, 5)])
    assert shortest_path(g, 1, 4).path == [1, 2, 4]
    assert shortest_path(g, 4, 1).path == [4, 2, 1]


@pytest.mark.parametrize(
    "edges, msg",
    [([("A", "A", 3)], "self-loop"), ([("A", "B", 0)], "miles"), ([("A", "B", -2)], "miles"), ([("A", "Q", 1)], "unknown")],
)
def test_bad_edges_rejected(edges, msg):
    with pytest.raises(ValueError, match=msg):
        RoadGraph.build(["A", "B"], edges)


def test_parallel_edges_keep_shorter():
    g = RoadGraph.build(["A", "B"], [("A", "B", 9), ("B", "A", 4)])
    assert g.adjacency["A"]["B"] == 4


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 8))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    weights = {p: draw(st.floats(0.5, 100)) for p in chosen}
    return n, weights


@given(graphs(), st.data())
def test_optimal_against_enumeration(g, data):
    n, weights = g
    graph = RoadGraph.build(list(range(n)), [(a, b, w) for (a, b), w in weights.items()])
    o = data.draw(st.integers(0, n - 1))
    d = data.draw(st.integers(0, n - 1))
    route = shortest_path(graph, o, d)
    best = brute_shortest(weights, o, d)
    if math.isinf(best):
        assert not route.found
    else:
        assert route.miles == pytest.approx(best, rel=1e-9)
        assert route.path[0] == o and route.path[-1] == d
        assert route.miles == pytest.approx(sum(leg_distances(graph, route.path)), rel=1e-12)
        back = shortest_path(graph, d, o)
        assert back.miles == pytest.approx(route.miles, rel=1e-9)


def test_bundled_road_round_trip(tmp_path, data_dir):
    g = load_road(data_dir / "road10.json")
    assert len(g.nodes) == 10
    p = tmp_path / "road.json"
    p.write_text(json.dumps(road_to_dict(g)))
    again = load_road(p)
    assert again.edges() == g.edges()
    assert {n.bus_id for n in again.nodes.values()} == {n.bus_id for n in g.nodes.values()}


def test_bundled_road_connected(data_dir):
    g = load_road(data_dir / "road10.json")
    ids = list(g.nodes)
    assert all(shortest_path(g, ids[0], d).found for d in ids)


def test_road_file_errors(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"nodes": [{"id": "A"}, {"id": "B"}], "edges": [{"a": "A", "b": "C", "miles": 3}]}))
    with pytest.raises(FileFormatError, match=r"edges\[0\]\.b"):
        load_road(p)
