"""
Windowed graphs and ego-network features
========================================

Calls inside a day window form a directed graph. Each user's ego network
(their contacts and the ties among them) yields homophily, clustering and
diversity measures; the call records themselves give volume, duration and
reciprocity.
"""

from migrantcdr.core import CallRecord, Sex, TimeWindow, UserProfile
from migrantcdr.graph import build_graph, ego_network
from migrantcdr.network import (call_behavior, clustering_coefficient, communication_diversity,
                                network_features, province_diversity)

DAY = 86400


def call(a, b, day, dur=60):
    return CallRecord(a, b, day * DAY, day * DAY + dur, 31.2, 121.4)


calls = [call("m", "a", 0), call("m", "a", 1, 300), call("m", "b", 1), call("a", "b", 2),
         call("c", "m", 2), call("m", "c", 3), call("m", "d", 9)]   # day 9 is outside
profiles = {"m": UserProfile("m", 1990, Sex.M, "AH", False),
            "a": UserProfile("a", 1991, Sex.M, "AH", False),
            "b": UserProfile("b", 1970, Sex.F, "SH", True),
            "c": UserProfile("c", 1989, Sex.F, "HN", False)}

g = build_graph(calls, TimeWindow(0, 7))
ego = ego_network(g, "m")
print("neighbors", sorted(ego.neighbors), "degree", ego.degree)
# a-b is the only closed pair among three neighbors: 1 / 3
print("clustering", clustering_coefficient(ego))
print("province entropy (bits)", province_diversity(ego, profiles))
print("communication diversity", communication_diversity(g, "m"))
print(call_behavior(g, "m", profiles))

for name, value in network_features(g, ego, profiles).as_dict().items():
    print(f"  {name:24s} {value:.4f}")
