"""
Mobility, home and work, and housing prices
===========================================

Tower coordinates of a user's calls form a location trace. Its center of
mass, radius of gyration and travel distance describe mobility; calls at
night and during office hours locate home and work. A grid index over
housing estates turns locations into local price levels.
"""

from migrantcdr.core import CallRecord, Location, TimeWindow
from migrantcdr.geo import (GeoConfig, build_price_index, center_of_mass, geo_feature_vector,
                            mobility, trace)
from migrantcdr.graph import build_graph, ego_network
from migrantcdr.ingest import Estate

HOUR = 3600
HOME, WORK = (31.20, 121.40), (31.23, 121.47)
# calls at 22:00 and 10:00 local time (UTC+8) over five days
calls = []
for d in range(5):
    t = d * 86400
    calls.append(CallRecord("u", "x", t + 14 * HOUR, t + 14 * HOUR + 60, *HOME))
    calls.append(CallRecord("u", "y", t + 2 * HOUR, t + 2 * HOUR + 60, *WORK))
    calls.append(CallRecord("x", "y", t + 3 * HOUR, t + 3 * HOUR + 60, 31.21, 121.41))

w = TimeWindow(0, 5)
tr = trace(calls, "u", w)
print(len(tr), "points; center", center_of_mass(tr))
print(mobility(tr))

estates = [Estate("cheap", 31.201, 121.401, 30_000.0), Estate("dear", 31.229, 121.469, 90_000.0),
           Estate("far", 31.60, 121.90, 50_000.0)]
idx = build_price_index(estates)
# within 1 km: mean of estates in range; otherwise the nearest estate
print(idx.price_at(Location(*HOME)), idx.price_at(Location(31.5, 121.8)))

g = build_graph(calls, w)
geo = geo_feature_vector(calls, "u", w, idx, ego_network(g, "u"), cfg=GeoConfig())
for k, v in geo.as_dict().items():
    print(f"  {k:22s} {v:.4f}")
