"""Per-user ego-network and call-behaviour features on a :class:`WindowedGraph`.

These functions are the readable reference path; :mod:`migrantcdr.engine`
computes the same quantities for every user of a window at once. Features
with an empty denominator come back as ``nan``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Mapping

from .core import UserProfile
from .graph import EgoNetwork, WindowedGraph

MISSING = math.nan
SIMILAR_AGE_YEARS = 5


def _frac(num: int, den: int) -> float:
    return num / den if den else MISSING


def homophily_fractions(ego: EgoNetwork, profiles: Mapping[str, UserProfile],
                        v: UserProfile | None) -> tuple[float, float, float, float]:
    """``(similar_age, same_sex, local_frac, townsman_frac)`` over profiled contacts."""
    attributed = [profiles[u] for u in ego.neighbors if u in profiles]
    n = len(attributed)
    local = _frac(sum(p.is_local for p in attributed), n)
    if v is None:
        return MISSING, MISSING, local, MISSING
    similar = sum(abs(p.birth_year - v.birth_year) <= SIMILAR_AGE_YEARS for p in attributed)
    same_sex = sum(p.sex == v.sex for p in attributed)
    townsman = sum(p.birth_province == v.birth_province and not p.is_local for p in attributed)
    return _frac(similar, n), _frac(same_sex, n), local, _frac(townsman, n)


def clustering_coefficient(ego: EgoNetwork) -> float:
    d = ego.degree
    if d < 2:
        return 0.0
    return 2 * len(ego.neighbor_edges) / (d * (d - 1))


def _entropy(counts, log=math.log) -> float:
    total = sum(counts)
    return -sum((c / total) * log(c / total) for c in counts if c)


def province_diversity(ego: EgoNetwork, profiles: Mapping[str, UserProfile]) -> float:
    """Base-2 entropy of contacts' birth provinces."""
    provs = Counter(profiles[u].birth_province for u in ego.neighbors if u in profiles)
    if not provs:
        return MISSING
    return _entropy(list(provs.values()), math.log2)


def communication_diversity(g: WindowedGraph, v: str) -> float:
    """Entropy of outgoing calls over callees, normalized by log(out-degree)."""
    counts = [g.edges[(v, u)].call_count for u in g.out_adj.get(v, ())]
    k = len(counts)
    if k == 0:
        return MISSING
    if k == 1:
        return 0.0
    return _entropy(counts) / math.log(k)


@dataclass(frozen=True)
class CallBehavior:
    in_calls: int
    out_calls: int
    call_diff: int
    call_duration_mean: float
    call_duration_var: float
    local_duration_mean: float
    local_duration_var: float
    reciprocal_frac: float


def _mean_var(xs: list[int]) -> tuple[float, float]:
    if not xs:
        return MISSING, MISSING
    m = sum(xs) / len(xs)
    return m, sum((x - m) ** 2 for x in xs) / len(xs)


def call_behavior(g: WindowedGraph, v: str, profiles: Mapping[str, UserProfile]) -> CallBehavior:
    if v not in g.nodes:
        raise KeyError(f"unknown user {v!r}")
    outs = g.out_adj.get(v, set())
    ins = g.in_adj.get(v, set())
    out_calls = sum(g.edges[(v, u)].call_count for u in outs)
    in_calls = sum(g.edges[(u, v)].call_count for u in ins)
    durs: list[int] = []
    local_durs: list[int] = []
    for u in sorted(outs):
        d = g.edges[(v, u)].durations
        durs.extend(d)
        p = profiles.get(u)
        if p is not None and p.is_local:
            local_durs.extend(d)
    mean, var = _mean_var(durs)
    lmean, lvar = _mean_var(local_durs)
    recip = _frac(len(outs & ins), len(outs))
    return CallBehavior(in_calls, out_calls, out_calls - in_calls, mean, var, lmean, lvar, recip)


def neighbor_avg_degree(g: WindowedGraph, ego: EgoNetwork) -> float:
    if not ego.neighbors:
        return MISSING
    return sum(g.degree(u) for u in ego.neighbors) / len(ego.neighbors)


@dataclass(frozen=True)
class NetworkFeatures:
    similar_age: float
    same_sex: float
    local_frac: float
    townsman_frac: float
    degree: int
    in_degree: int
    out_degree: int
    neighbor_degree: float
    cc: float
    in_calls: int
    out_calls: int
    call_diff: int
    call_duration_mean: float
    call_duration_var: float
    local_duration_mean: float
    local_duration_var: float
    province_diversity: float
    reciprocal_frac: float
    comm_diversity: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def network_features(g: WindowedGraph, ego: EgoNetwork,
                     profiles: Mapping[str, UserProfile]) -> NetworkFeatures:
    v = ego.ego
    sim, sex, loc, towns = homophily_fractions(ego, profiles, profiles.get(v))
    cb = call_behavior(g, v, profiles)
    return NetworkFeatures(
        similar_age=sim, same_sex=sex, local_frac=loc, townsman_frac=towns,
        degree=ego.degree, in_degree=len(ego.in_neighbors), out_degree=len(ego.out_neighbors),
        neighbor_degree=neighbor_avg_degree(g, ego), cc=clustering_coefficient(ego),
        in_calls=cb.in_calls, out_calls=cb.out_calls, call_diff=cb.call_diff,
        call_duration_mean=cb.call_duration_mean, call_duration_var=cb.call_duration_var,
        local_duration_mean=cb.local_duration_mean, local_duration_var=cb.local_duration_var,
        province_diversity=province_diversity(ego, profiles),
        reciprocal_frac=cb.reciprocal_frac,
        comm_diversity=communication_diversity(g, v),
    )
