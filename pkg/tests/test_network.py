import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from migrantcdr.core import TimeWindow
from migrantcdr.graph import build_graph, ego_network
from migrantcdr.network import (call_behavior, clustering_coefficient, communication_diversity,
                                homophily_fractions, neighbor_avg_degree, network_features,
                                province_diversity)

import helpers
from helpers import call, prof
import oracles

W = TimeWindow(0, 1)


def graph(pairs):
    return build_graph([call(a, b, hour=i % 24) for i, (a, b) in enumerate(pairs)], W)


def test_homophily_examples():
    g = graph([("v", "a"), ("v", "b"), ("c", "v")])
    ego = ego_network(g, "v")
    profiles = {"v": prof("v", 1990, "M", "AH"), "a": prof("a", 1993, "M", "AH"),
                "b": prof("b", 1980, "M", "SH"), "c": prof("c", 1970, "M", "SH")}
    sim, sex, loc, towns = homophily_fractions(ego, profiles, profiles["v"])
    assert sex == 1.0
    assert sim == pytest.approx(1 / 3)
    assert loc == pytest.approx(2 / 3)
    assert towns == pytest.approx(1 / 3)
    # a local's townsmen must be non-local and share the province: none here
    _, _, _, t_local = homophily_fractions(ego_network(g, "b"), profiles, profiles["b"])
    assert t_local == 0.0


def test_similar_age_half():
    g = graph([("v", "a"), ("v", "b")])
    profiles = {"v": prof("v", 1990), "a": prof("a", 1995), "b": prof("b", 1984)}
    assert homophily_fractions(ego_network(g, "v"), profiles, profiles["v"])[0] == 0.5


def test_unprofiled_contacts_excluded_and_missing():
    g = graph([("v", "a"), ("v", "b")])
    profiles = {"v": prof("v"), "a": prof("a", sex="F")}
    assert homophily_fractions(ego_network(g, "v"), profiles, profiles["v"])[1] == 0.0
    out = homophily_fractions(ego_network(g, "v"), {}, None)
    assert all(math.isnan(x) for x in out)


def test_clustering_star_and_triangle():
    star = graph([("v", "a"), ("v", "b"), ("v", "c")])
    assert clustering_coefficient(ego_network(star, "v")) == 0.0
    tri = graph([("v", "a"), ("v", "b"), ("b", "a")])
    assert clustering_coefficient(ego_network(tri, "v")) == 1.0
    single = graph([("v", "a")])
    assert clustering_coefficient(ego_network(single, "v")) == 0.0


def test_province_entropy():
    def pd(provs):
        pairs = [("v", f"u{i}") for i in range(len(provs))]
        profiles = {f"u{i}": prof(f"u{i}", province=p) for i, p in enumerate(provs)}
        return province_diversity(ego_network(graph(pairs), "v"), profiles)
    assert pd(["A", "A"]) == 0.0
    assert pd(["A", "B"]) == pytest.approx(1.0, abs=1e-12)
    assert pd(["A", "A", "A", "B"]) == pytest.approx(0.8113, abs=1e-4)
    assert math.isnan(province_diversity(ego_network(graph([("v", "a")]), "v"), {}))


def test_comm_diversity():
    assert communication_diversity(graph([("v", "a"), ("v", "b")]), "v") == pytest.approx(1.0)
    assert communication_diversity(graph([("v", "a")] * 3), "v") == 0.0
    g = graph([("v", "a")] * 3 + [("v", "b")])
    assert communication_diversity(g, "v") == pytest.approx(0.8113, abs=1e-4)
    assert math.isnan(communication_diversity(graph([("a", "v")]), "v"))


def test_call_behavior():
    g = graph([("v", "a")] * 4 + [("b", "v")])
    cb = call_behavior(g, "v", {})
    assert (cb.out_calls, cb.in_calls, cb.call_diff) == (4, 1, 3)
    assert cb.call_duration_mean == 60.0 and cb.call_duration_var == 0.0
    assert math.isnan(cb.local_duration_mean)
    g = graph([("v", "a"), ("a", "v"), ("v", "b")])
    assert call_behavior(g, "v", {}).reciprocal_frac == 0.5
    with pytest.raises(KeyError):
        call_behavior(g, "zz", {})


def test_local_durations():
    recs = [call("v", "a", dur=10), call("v", "a", hour=3, dur=30), call("v", "b", dur=100)]
    g = build_graph(recs, W)
    cb = call_behavior(g, "v", {"a": prof("a", province="SH")})
    assert (cb.local_duration_mean, cb.local_duration_var) == (20.0, 100.0)
    assert cb.call_duration_mean == pytest.approx(140 / 3)


def test_neighbor_degree():
    path = graph([("a", "v"), ("v", "b")])
    assert neighbor_avg_degree(path, ego_network(path, "v")) == 1.0
    k4 = graph([(a, b) for a in "vabc" for b in "vabc" if a < b])
    assert neighbor_avg_degree(k4, ego_network(k4, "v")) == 3.0


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_ranges_and_oracle(seed):
    calls, profs, _ = oracles.random_log(seed, n_users=20, n_calls=120, n_days=2)
    epoch = 1_000_000_000
    g = build_graph(helpers.records(calls), TimeWindow(0, 2), epoch)
    profiles = helpers.profiles(profs)
    orc = oracles.Oracle(calls, profs, [(0, 0, 1)], (0, 2), epoch)
    for v in sorted(g.nodes):
        f = network_features(g, ego_network(g, v), profiles).as_dict()
        want = orc.features(v)
        for k, x in f.items():
            assert oracles.compare(k, float(x), want[k]), (v, k, x, want[k])
        for k in ("similar_age", "same_sex", "local_frac", "townsman_frac", "cc", "reciprocal_frac",
                  "comm_diversity"):
            assert math.isnan(f[k]) or -1e-12 <= f[k] <= 1 + 1e-12
        assert math.isnan(f["province_diversity"]) or f["province_diversity"] >= 0
        assert f["degree"] >= max(f["in_degree"], f["out_degree"])


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_permutation_equivariance(seed):
    calls, profs, _ = oracles.random_log(seed, n_users=15, n_calls=60, n_days=1)
    users = sorted({c[0] for c in calls} | {c[1] for c in calls} | set(profs))
    perm = users[:]
    random.Random(seed).shuffle(perm)
    ren = dict(zip(users, (f"x{p}" for p in perm)))
    calls2 = [(ren[a], ren[b], *rest) for a, b, *rest in calls]
    profs2 = {ren[u]: p for u, p in profs.items()}
    g1 = build_graph(helpers.records(calls), W, 1_000_000_000)
    g2 = build_graph(helpers.records(calls2), W, 1_000_000_000)
    p1, p2 = helpers.profiles(profs), helpers.profiles(profs2)
    for v in g1.nodes:
        a = network_features(g1, ego_network(g1, v), p1).as_dict()
        b = network_features(g2, ego_network(g2, ren[v]), p2).as_dict()
        for k in a:
            assert (math.isnan(a[k]) and math.isnan(b[k])) or a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-12)
