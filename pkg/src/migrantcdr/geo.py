"""Location traces, mobility metrics, and housing-price joins."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import EARTH_RADIUS_KM, CallRecord, Location, TimeWindow, day_index, geo_distance, haversine
from .graph import EgoNetwork
from .ingest import Estate

MISSING = math.nan


@dataclass(frozen=True)
class GeoConfig:
    utc_offset_hours: int = 8
    work_hours: tuple[int, int] = (9, 16)
    home_hours: tuple[int, int] = (20, 7)
    include_callee: bool = True
    price_radius_km: float = 1.0
    cell_deg: float = 0.01


def local_hour(timestamp, utc_offset_hours: int = 8):
    return (np.asarray(timestamp, dtype=np.int64) + utc_offset_hours * 3600) // 3600 % 24


def in_hours(hour, hours: tuple[int, int] | None):
    """Inclusive start, exclusive end; ranges with start > end wrap midnight."""
    if hours is None:
        return np.ones_like(np.asarray(hour), dtype=bool)
    a, b = hours
    hour = np.asarray(hour)
    if a <= b:
        return (hour >= a) & (hour < b)
    return (hour >= a) | (hour < b)


@dataclass(frozen=True)
class LocationTrace:
    user: str
    window: TimeWindow
    points: tuple[tuple[int, Location], ...]

    def __len__(self) -> int:
        return len(self.points)


def _sort_key(r: CallRecord):
    return (r.start, r.caller, r.callee, r.end, r.tower_lat, r.tower_lon)


def trace(records: Iterable[CallRecord], v: str, window: TimeWindow,
          hours: tuple[int, int] | None = None, *, epoch: int = 0,
          cfg: GeoConfig = GeoConfig()) -> LocationTrace:
    pts = []
    for r in sorted(records, key=_sort_key):
        if r.caller != v and not (cfg.include_callee and r.callee == v):
            continue
        if day_index(r.start, epoch) not in window:
            continue
        if not in_hours(local_hour(r.start, cfg.utc_offset_hours), hours):
            continue
        pts.append((r.start, r.location))
    return LocationTrace(v, window, tuple(pts))


def center_of_mass(tr: LocationTrace) -> Location | None:
    if not tr.points:
        return None
    n = len(tr.points)
    return Location(sum(p.lat for _, p in tr.points) / n, sum(p.lon for _, p in tr.points) / n)


@dataclass(frozen=True)
class Mobility:
    moving_distance: float
    avg_move_distance: float
    avg_radius: float
    max_radius: float


def mobility(tr: LocationTrace) -> Mobility:
    if not tr.points:
        return Mobility(MISSING, MISSING, MISSING, MISSING)
    locs = [p for _, p in tr.points]
    cm = center_of_mass(tr)
    moving = sum(geo_distance(a, b) for a, b in zip(locs, locs[1:]))
    radii = [geo_distance(p, cm) for p in locs]
    return Mobility(moving, moving / len(locs), sum(radii) / len(locs), max(radii))


class PriceIndex:
    """Uniform lat/lon grid over estates.

    ``price_at`` returns the mean price of estates within ``radius_km`` of a
    point, falling back to the nearest estate via an expanding ring search.
    """

    def __init__(self, estates: Sequence[Estate], cell_deg: float = 0.01, radius_km: float = 1.0):
        if not estates:
            raise ValueError("no estates")
        self.cell_deg = cell_deg
        self.radius_km = radius_km
        self.lat = np.array([e.lat for e in estates], dtype=float)
        self.lon = np.array([e.lon for e in estates], dtype=float)
        self.price = np.array([e.price for e in estates], dtype=float)
        self.ci = np.floor(self.lat / cell_deg).astype(np.int64)
        self.cj = np.floor(self.lon / cell_deg).astype(np.int64)
        keys = self._key(self.ci, self.cj)
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]
        self.cells: dict[tuple[int, int], list[int]] = {}
        for idx, (i, j) in enumerate(zip(self.ci.tolist(), self.cj.tolist())):
            self.cells.setdefault((i, j), []).append(idx)
        self._max_abs_lat = float(np.abs(self.lat).max())
        self._i_range = (int(self.ci.min()), int(self.ci.max()))
        self._j_range = (int(self.cj.min()), int(self.cj.max()))

    @staticmethod
    def _key(i, j):
        return (np.asarray(i, dtype=np.int64) + (1 << 20)) * (1 << 21) + (np.asarray(j, dtype=np.int64) + (1 << 20))

    def __len__(self) -> int:
        return self.price.size

    @property
    def min_price(self) -> float:
        return float(self.price.min())

    @property
    def max_price(self) -> float:
        return float(self.price.max())

    def cell_of(self, lat: float, lon: float) -> tuple[int, int]:
        return int(math.floor(lat / self.cell_deg)), int(math.floor(lon / self.cell_deg))

    def _cos_floor(self, max_query_abs_lat: float) -> float:
        top = min(90.0, max(self._max_abs_lat, max_query_abs_lat) + self.cell_deg)
        return math.cos(math.radians(top))

    def _ring_span(self, max_query_abs_lat: float) -> tuple[int, int]:
        """Cell offsets in lat/lon that cover the search radius."""
        r = self.radius_km / EARTH_RADIUS_KM
        rings_lat = math.ceil(math.degrees(r) / self.cell_deg + 1e-9)
        c = self._cos_floor(max_query_abs_lat)
        s = math.sin(r / 2) / c if c > 0 else 2.0
        if s >= 1.0:
            rings_lon = math.ceil(180.0 / self.cell_deg)
        else:
            rings_lon = math.ceil(math.degrees(2 * math.asin(s)) / self.cell_deg + 1e-9)
        return rings_lat, rings_lon

    def _ring_lower_bound(self, k: int, c: float) -> float:
        """Smallest possible distance to an estate more than ``k`` rings away."""
        x = k * math.radians(self.cell_deg)
        return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, c * math.sin(min(x, math.pi) / 2)))

    def nearest(self, lat: float, lon: float) -> int:
        """Index of the nearest estate (lowest index on ties)."""
        qi, qj = self.cell_of(lat, lon)
        c = self._cos_floor(abs(lat))
        k_max = max(abs(qi - self._i_range[0]), abs(qi - self._i_range[1]),
                    abs(qj - self._j_range[0]), abs(qj - self._j_range[1]))
        if k_max > 200 or c <= 0:
            d = haversine(lat, lon, self.lat, self.lon)
            return int(np.argmin(d))
        best, best_d = -1, math.inf
        for k in range(k_max + 1):
            for i in range(qi - k, qi + k + 1):
                step = 1 if i in (qi - k, qi + k) else 2 * k
                for j in range(qj - k, qj + k + 1, max(step, 1)):
                    for idx in self.cells.get((i, j), ()):
                        d = float(haversine(lat, lon, self.lat[idx], self.lon[idx]))
                        if d < best_d or (d == best_d and idx < best):
                            best, best_d = idx, d
            if best >= 0 and best_d < self._ring_lower_bound(k, c):
                break
        return best

    def price_at(self, loc: Location) -> float:
        return float(self.prices_at(np.array([loc.lat]), np.array([loc.lon]))[0])

    def prices_at(self, lats, lons, chunk: int = 20000) -> np.ndarray:
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        out = np.empty(lats.size)
        for s in range(0, lats.size, chunk):
            out[s:s + chunk] = self._prices_chunk(lats[s:s + chunk], lons[s:s + chunk])
        return out

    def _prices_chunk(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        n = lats.size
        if n == 0:
            return np.empty(0)
        qi = np.floor(lats / self.cell_deg).astype(np.int64)
        qj = np.floor(lons / self.cell_deg).astype(np.int64)
        rl, ro = self._ring_span(float(np.abs(lats).max()))
        total = np.zeros(n)
        count = np.zeros(n, dtype=np.int64)
        qidx = np.arange(n)
        for di in range(-rl, rl + 1):
            for dj in range(-ro, ro + 1):
                keys = self._key(qi + di, qj + dj)
                lo = np.searchsorted(self._keys, keys, "left")
                hi = np.searchsorted(self._keys, keys, "right")
                cnt = hi - lo
                m = cnt.sum()
                if m == 0:
                    continue
                q = np.repeat(qidx, cnt)
                offs = np.arange(m) - np.repeat(np.cumsum(cnt) - cnt, cnt)
                e = self._order[np.repeat(lo, cnt) + offs]
                d = haversine(lats[q], lons[q], self.lat[e], self.lon[e])
                hit = d <= self.radius_km
                total += np.bincount(q[hit], weights=self.price[e[hit]], minlength=n)
                count += np.bincount(q[hit], minlength=n)
        out = np.divide(total, count, out=np.empty(n), where=count > 0)
        for i in np.flatnonzero(count == 0):
            out[i] = self.price[self.nearest(float(lats[i]), float(lons[i]))]
        return out


def build_price_index(estates: Sequence[Estate], cell_deg: float = 0.01,
                      radius_km: float = 1.0) -> PriceIndex:
    return PriceIndex(estates, cell_deg, radius_km)


def price_at(idx: PriceIndex, loc: Location) -> float:
    return idx.price_at(loc)


@dataclass(frozen=True)
class GeoFeatures:
    center_lat: float
    center_lon: float
    work_lat: float
    work_lon: float
    home_lat: float
    home_lon: float
    avg_radius: float
    max_radius: float
    moving_distance: float
    avg_move_distance: float
    home_work_distance: float
    avg_price: float
    center_price: float
    home_avg_price: float
    home_center_price: float
    work_avg_price: float
    work_center_price: float
    neighbor_avg_price: float
    neighbor_center_price: float

    @property
    def center(self) -> Location | None:
        return None if math.isnan(self.center_lat) else Location(self.center_lat, self.center_lon)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _avg_and_center_price(tr: LocationTrace, idx: PriceIndex | None) -> tuple[float, float]:
    if idx is None or not tr.points:
        return MISSING, MISSING
    prices = [idx.price_at(p) for _, p in tr.points]
    return sum(prices) / len(prices), idx.price_at(center_of_mass(tr))


def _coords(loc: Location | None) -> tuple[float, float]:
    return (MISSING, MISSING) if loc is None else (loc.lat, loc.lon)


def geo_feature_vector(records: Sequence[CallRecord], v: str, window: TimeWindow,
                       idx: PriceIndex | None, ego: EgoNetwork | None,
                       cache: dict[str, tuple[float, float]] | None = None, *,
                       epoch: int = 0, cfg: GeoConfig = GeoConfig()) -> GeoFeatures:
    """All geographic and housing-price fields for ``v`` in ``window``.

    ``cache`` maps users to their ``(avg_price, center_price)`` and is filled
    on demand for ``v``'s contacts.
    """
    cache = {} if cache is None else cache

    def prices_of(u: str) -> tuple[float, float]:
        if u not in cache:
            cache[u] = _avg_and_center_price(trace(records, u, window, epoch=epoch, cfg=cfg), idx)
        return cache[u]

    full = trace(records, v, window, epoch=epoch, cfg=cfg)
    work = trace(records, v, window, cfg.work_hours, epoch=epoch, cfg=cfg)
    home = trace(records, v, window, cfg.home_hours, epoch=epoch, cfg=cfg)
    mob = mobility(full)
    cm, wc, hc = center_of_mass(full), center_of_mass(work), center_of_mass(home)
    hw = geo_distance(hc, wc) if hc is not None and wc is not None else MISSING
    avg_p, center_p = prices_of(v)
    home_avg, home_center = _avg_and_center_price(home, idx)
    work_avg, work_center = _avg_and_center_price(work, idx)
    n_avg, n_center = MISSING, MISSING
    if ego is not None:
        vals = [prices_of(u) for u in sorted(ego.neighbors)]
        a = [x for x, _ in vals if not math.isnan(x)]
        c = [y for _, y in vals if not math.isnan(y)]
        n_avg = sum(a) / len(a) if a else MISSING
        n_center = sum(c) / len(c) if c else MISSING
    return GeoFeatures(
        *_coords(cm), *_coords(wc), *_coords(hc),
        avg_radius=mob.avg_radius, max_radius=mob.max_radius,
        moving_distance=mob.moving_distance, avg_move_distance=mob.avg_move_distance,
        home_work_distance=hw, avg_price=avg_p, center_price=center_p,
        home_avg_price=home_avg, home_center_price=home_center,
        work_avg_price=work_avg, work_center_price=work_center,
        neighbor_avg_price=n_avg, neighbor_center_price=n_center,
    )


def dump_centers(path, rows: Iterable[tuple[str, float, float, float, float]]) -> None:
    """Write ``user,home_lat,home_lon,work_lat,work_lon``; missing as empty."""
    fmt: Callable[[float], str] = lambda x: "" if math.isnan(x) else repr(float(x))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "home_lat", "home_lon", "work_lat", "work_lon"])
        for user, hla, hlo, wla, wlo in rows:
            w.writerow([user, fmt(hla), fmt(hlo), fmt(wla), fmt(wlo)])
