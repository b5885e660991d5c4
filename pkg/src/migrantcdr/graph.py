"""Windowed directed call graphs and undirected ego networks."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .core import CallRecord, TimeWindow, day_index


@dataclass
class EdgeStats:
    call_count: int = 0
    total_duration: int = 0
    durations: list[int] = field(default_factory=list)

    def add(self, duration: int) -> None:
        self.call_count += 1
        self.total_duration += duration
        self.durations.append(duration)


@dataclass
class WindowedGraph:
    window: TimeWindow
    nodes: set[str]
    edges: dict[tuple[str, str], EdgeStats]
    out_adj: dict[str, set[str]]
    in_adj: dict[str, set[str]]

    def neighbors(self, v: str) -> set[str]:
        return self.out_adj.get(v, set()) | self.in_adj.get(v, set())

    def degree(self, v: str) -> int:
        return len(self.neighbors(v))

    def connected(self, a: str, b: str) -> bool:
        """Edge in either direction."""
        return (a, b) in self.edges or (b, a) in self.edges


@dataclass(frozen=True)
class EgoNetwork:
    ego: str
    neighbors: frozenset[str]
    neighbor_edges: frozenset[frozenset[str]]
    out_neighbors: frozenset[str]
    in_neighbors: frozenset[str]

    @property
    def degree(self) -> int:
        return len(self.neighbors)


def build_graph(records: Iterable[CallRecord], window: TimeWindow, epoch: int = 0) -> WindowedGraph:
    """Aggregate the calls whose start day falls inside ``window``."""
    edges: dict[tuple[str, str], EdgeStats] = {}
    out_adj: dict[str, set[str]] = defaultdict(set)
    in_adj: dict[str, set[str]] = defaultdict(set)
    nodes: set[str] = set()
    for r in records:
        if day_index(r.start, epoch) not in window:
            continue
        key = (r.caller, r.callee)
        stats = edges.get(key)
        if stats is None:
            stats = edges[key] = EdgeStats()
        stats.add(r.duration)
        out_adj[r.caller].add(r.callee)
        in_adj[r.callee].add(r.caller)
        nodes.add(r.caller)
        nodes.add(r.callee)
    for stats in edges.values():
        stats.durations.sort()  # order-independent
    return WindowedGraph(window, nodes, edges, dict(out_adj), dict(in_adj))


def ego_network(g: WindowedGraph, v: str) -> EgoNetwork:
    if v not in g.nodes:
        raise KeyError(f"unknown user {v!r}")
    out_n = frozenset(g.out_adj.get(v, ()))
    in_n = frozenset(g.in_adj.get(v, ()))
    nbrs = out_n | in_n
    pairs = set()
    for s in nbrs:
        # set intersection iterates the smaller operand
        for t in g.neighbors(s) & nbrs:
            if s < t:
                pairs.add(frozenset((s, t)))
    return EgoNetwork(v, nbrs, frozenset(pairs), out_n, in_n)


def dump_edges(g: WindowedGraph, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "calls", "total_duration"])
        for (a, b) in sorted(g.edges):
            st = g.edges[(a, b)]
            w.writerow([a, b, st.call_count, st.total_duration])
