import random

import pytest
from hypothesis import given, settings, strategies as st

from migrantcdr.core import TimeWindow
from migrantcdr.graph import build_graph, dump_edges, ego_network

import helpers
import oracles


def test_two_calls_one_edge():
    recs = [helpers.call("a", "b", day=0, dur=10), helpers.call("a", "b", day=1, dur=30)]
    g = build_graph(recs, TimeWindow(0, 7))
    assert g.edges[("a", "b")].call_count == 2
    assert g.edges[("a", "b")].total_duration == 40
    assert ("b", "a") not in g.edges


def test_half_open_window():
    recs = [helpers.call("a", "b", day=6), helpers.call("a", "c", day=7)]
    g = build_graph(recs, TimeWindow(0, 7))
    assert g.nodes == {"a", "b"}
    assert build_graph(recs, TimeWindow(7, 8)).nodes == {"a", "c"}


def test_ego_is_undirected():
    recs = [helpers.call("v", "a"), helpers.call("b", "v"), helpers.call("a", "b"), helpers.call("c", "d")]
    g = build_graph(recs, TimeWindow(0, 1))
    ego = ego_network(g, "v")
    assert ego.neighbors == {"a", "b"}
    assert ego.neighbor_edges == {frozenset(("a", "b"))}
    assert ego.out_neighbors == {"a"} and ego.in_neighbors == {"b"}
    with pytest.raises(KeyError, match="unknown user"):
        ego_network(g, "zz")


def brute_force(calls, window, epoch):
    s, e = window
    kept = [c for c in calls if s <= (c[2] - epoch) // 86400 < e]
    counts, durs = {}, {}
    for c in kept:
        counts[(c[0], c[1])] = counts.get((c[0], c[1]), 0) + 1
        durs[(c[0], c[1])] = durs.get((c[0], c[1]), 0) + c[3] - c[2]
    return counts, durs


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_graph_matches_brute_force(seed):
    calls, _, _ = oracles.random_log(seed, n_users=15, n_calls=50, n_days=5)
    epoch = 1_000_000_000
    w = (1, 4)
    g = build_graph(helpers.records(calls), TimeWindow(*w), epoch)
    counts, durs = brute_force(calls, w, epoch)
    assert {k: v.call_count for k, v in g.edges.items()} == counts
    assert {k: v.total_duration for k, v in g.edges.items()} == durs
    orc = oracles.Oracle(calls, {}, [(0, 0, 1)], w, epoch)
    for v in g.nodes:
        ego = ego_network(g, v)
        assert ego.neighbors == orc.nb(v)
        want = {frozenset((a, b)) for a in orc.nb(v) for b in orc.nb(v) if a < b and orc.linked(a, b)}
        assert ego.neighbor_edges == want
        # degree: count of distinct contacts in either direction
        assert ego.degree == len({c[1] for c in orc.calls if c[0] == v} | {c[0] for c in orc.calls if c[1] == v})


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_order_invariance(seed):
    calls, _, _ = oracles.random_log(seed, n_users=20, n_calls=80, n_days=3)
    recs = helpers.records(calls)
    shuffled = recs[:]
    random.Random(seed).shuffle(shuffled)
    w = TimeWindow(0, 3)
    g1, g2 = build_graph(recs, w, 1_000_000_000), build_graph(shuffled, w, 1_000_000_000)
    assert g1.nodes == g2.nodes and g1.edges == g2.edges
    for v in g1.nodes:
        assert ego_network(g1, v) == ego_network(g2, v)


def test_dump_edges(tmp_path):
    g = build_graph([helpers.call("b", "a", dur=5), helpers.call("a", "b", dur=7)], TimeWindow(0, 1))
    dump_edges(g, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "src,dst,calls,total_duration\na,b,1,7\nb,a,1,5\n"
