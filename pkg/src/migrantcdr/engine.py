"""Vectorized feature extraction for every user active in a window."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse

from .core import TimeWindow, UserProfile, day_indices, haversine
from .geo import GeoConfig, PriceIndex, in_hours, local_hour
from .ingest import CallTable

EGO_FEATURES = ["similar_age", "same_sex", "local_frac", "townsman_frac", "degree",
                "in_degree", "out_degree", "neighbor_degree", "cc"]
CALL_FEATURES = ["in_calls", "out_calls", "call_diff", "call_duration_mean",
                 "call_duration_var", "local_duration_mean", "local_duration_var",
                 "province_diversity", "reciprocal_frac", "comm_diversity"]
GEO_FEATURES = ["center_lat", "center_lon", "work_lat", "work_lon", "home_lat", "home_lon",
                "avg_radius", "max_radius", "moving_distance", "avg_move_distance",
                "home_work_distance"]
PRICE_FEATURES = ["avg_price", "center_price", "home_avg_price", "home_center_price",
                  "work_avg_price", "work_center_price", "neighbor_avg_price",
                  "neighbor_center_price"]
FEATURE_GROUPS = {"ego": EGO_FEATURES, "call": CALL_FEATURES, "geo": GEO_FEATURES,
                  "price": PRICE_FEATURES}
ALL_FEATURES = EGO_FEATURES + CALL_FEATURES + GEO_FEATURES + PRICE_FEATURES
GROUP_OF = {f: g for g, names in FEATURE_GROUPS.items() for f in names}


class ProfileArrays:
    """Profile attributes aligned with a user-code space; -1 marks unknown."""

    def __init__(self, profiles: Mapping[str, UserProfile], users: Sequence[str]):
        n = len(users)
        self.has = np.zeros(n, dtype=bool)
        self.year = np.full(n, -1, dtype=np.int64)
        self.sex = np.full(n, -1, dtype=np.int8)
        self.province = np.full(n, -1, dtype=np.int64)
        self.local = np.zeros(n, dtype=bool)
        provinces = sorted({p.birth_province for p in profiles.values()})
        code = {p: i for i, p in enumerate(provinces)}
        self.n_provinces = len(provinces)
        for i, u in enumerate(users):
            p = profiles.get(u)
            if p is None:
                continue
            self.has[i] = True
            self.year[i] = p.birth_year
            self.sex[i] = 0 if p.sex.value == "M" else 1
            self.province[i] = code[p.birth_province]
            self.local[i] = p.is_local


@dataclass
class FeatureMatrix:
    """Rows are users (ids), columns are named features; ``nan`` is missing."""

    users: np.ndarray
    names: list[str]
    values: np.ndarray
    window: TimeWindow | None = None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def row(self, user: str) -> dict[str, float]:
        i = int(np.flatnonzero(self.users == user)[0])
        return dict(zip(self.names, self.values[i].tolist()))

    def write_csv(self, path, labels: Mapping[str, str] | None = None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "label", "window", *self.names])
            win = str(self.window) if self.window is not None else ""
            for u, row in zip(self.users, self.values):
                cells = ["" if math.isnan(x) else repr(float(x)) for x in row]
                w.writerow([u, (labels or {}).get(u, ""), win, *cells])


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.full(num.shape, np.nan), where=den > 0)


def _group_max(values: np.ndarray, groups: np.ndarray, n: int) -> np.ndarray:
    """Max of ``values`` per group; ``groups`` must be sorted."""
    out = np.full(n, np.nan)
    if values.size == 0:
        return out
    starts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
    out[groups[starts]] = np.maximum.reduceat(values, starts)
    return out


def _triangle_sums(s: np.ndarray, d: np.ndarray, n: int, rows: np.ndarray,
                   chunk: int = 4096) -> np.ndarray:
    """For each user, the number of ordered connected neighbor pairs (2x triangles)."""
    out = np.zeros(n)
    if s.size == 0:
        return out
    a = sparse.csr_matrix((np.ones(s.size, dtype=np.int64), (s, d)), shape=(n, n))
    for i in range(0, rows.size, chunk):
        r = rows[i:i + chunk]
        sub = a[r]
        out[r] = np.asarray((sub @ a).multiply(sub).sum(axis=1)).ravel()
    return out


class FeatureEngine:
    """Computes the full feature set over one window of a :class:`CallTable`.

    The table must already be alias-merged and filtered. ``profiles`` are
    looked up by user id.
    """

    def __init__(self, table: CallTable, profiles: Mapping[str, UserProfile],
                 price_index: PriceIndex | None = None, *, epoch: int = 0,
                 geo: GeoConfig = GeoConfig()):
        self.table = table
        self.prof = ProfileArrays(profiles, table.users)
        self.index = price_index
        self.epoch = epoch
        self.geo = geo
        self.days = day_indices(table.start, epoch) if len(table) else np.zeros(0, dtype=np.int64)
        self.hour = local_hour(table.start, geo.utc_offset_hours)
        self._tower_price: dict[tuple[float, float], float] = {}

    def window_mask(self, window: TimeWindow) -> np.ndarray:
        return (self.days >= window.start_day) & (self.days < window.end_day)

    def extract(self, window: TimeWindow, users: Sequence[str] | None = None) -> FeatureMatrix:
        """Features for ``users`` (default: every user active in ``window``)."""
        m = self.window_mask(window)
        cols = self._compute(m)
        active = cols.pop("_active")
        if users is None:
            codes = np.flatnonzero(active)
        else:
            codes = self.table.codes_of(users)
        values = np.column_stack([cols[name][codes] for name in ALL_FEATURES]) if codes.size else \
            np.empty((0, len(ALL_FEATURES)))
        return FeatureMatrix(self.table.users[codes].astype(str), list(ALL_FEATURES), values, window)

    def _point_prices(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        if lat.size == 0:
            return np.empty(0)
        pts = np.column_stack([lat, lon])
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        prices = np.empty(len(uniq))
        todo = []
        for i, (a, b) in enumerate(uniq.tolist()):
            p = self._tower_price.get((a, b))
            if p is None:
                todo.append(i)
            else:
                prices[i] = p
        if todo:
            t = np.array(todo)
            got = self.index.prices_at(uniq[t, 0], uniq[t, 1])
            prices[t] = got
            for i, p in zip(todo, got.tolist()):
                self._tower_price[(uniq[i, 0], uniq[i, 1])] = p
        return prices[inv.ravel()]

    def _center_prices(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        out = np.full(lat.size, np.nan)
        ok = ~np.isnan(lat)
        if self.index is not None and ok.any():
            out[ok] = self.index.prices_at(lat[ok], lon[ok])
        return out

    def _compute(self, mask: np.ndarray) -> dict[str, np.ndarray]:
        t = self.table
        n = t.n_users
        pr = self.prof
        caller = t.caller[mask].astype(np.int64)
        callee = t.callee[mask].astype(np.int64)
        dur = (t.end[mask] - t.start[mask]).astype(float)
        c: dict[str, np.ndarray] = {}

        # directed edges
        key = caller * n + callee
        ekeys, ecount = np.unique(key, return_counts=True)
        src, dst = ekeys // n, ekeys % n
        out_deg = np.bincount(src, minlength=n)
        in_deg = np.bincount(dst, minlength=n)
        out_calls = np.bincount(caller, minlength=n)
        in_calls = np.bincount(callee, minlength=n)

        # undirected contacts, both orientations
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        ukeys = np.unique(lo * n + hi)
        ua, ub = ukeys // n, ukeys % n
        s = np.concatenate([ua, ub])
        d = np.concatenate([ub, ua])
        deg = np.bincount(s, minlength=n)
        active = deg > 0
        c["_active"] = active

        c["degree"] = deg.astype(float)
        c["in_degree"] = in_deg.astype(float)
        c["out_degree"] = out_deg.astype(float)
        c["neighbor_degree"] = _safe_div(np.bincount(s, weights=deg[d], minlength=n), deg)
        pairs2 = _triangle_sums(s, d, n, np.flatnonzero(deg >= 2))
        c["cc"] = np.where(deg >= 2, _safe_div(pairs2, deg * (deg - 1.0)), 0.0)

        # homophily over profiled contacts
        att = pr.has[d]
        den = np.bincount(s, weights=att, minlength=n)
        has_v = pr.has
        both = att & has_v[s]
        sim = both & (np.abs(pr.year[s] - pr.year[d]) <= 5)
        c["similar_age"] = np.where(has_v, _safe_div(np.bincount(s, weights=sim, minlength=n), den), np.nan)
        same = both & (pr.sex[s] == pr.sex[d])
        c["same_sex"] = np.where(has_v, _safe_div(np.bincount(s, weights=same, minlength=n), den), np.nan)
        c["local_frac"] = _safe_div(np.bincount(s, weights=att & pr.local[d], minlength=n), den)
        towns = both & (pr.province[s] == pr.province[d]) & ~pr.local[d]
        c["townsman_frac"] = np.where(has_v, _safe_div(np.bincount(s, weights=towns, minlength=n), den), np.nan)

        # province entropy (bits)
        ps, pp = s[att], pr.province[d[att]]
        pk, pc = np.unique(ps * max(pr.n_provinces, 1) + pp, return_counts=True)
        owner = pk // max(pr.n_provinces, 1)
        p = pc / den[owner]
        c["province_diversity"] = np.where(den > 0, np.bincount(owner, weights=-p * np.log2(p), minlength=n), np.nan)

        # call behaviour
        c["in_calls"] = in_calls.astype(float)
        c["out_calls"] = out_calls.astype(float)
        c["call_diff"] = (out_calls - in_calls).astype(float)
        mean = _safe_div(np.bincount(caller, weights=dur, minlength=n), out_calls)
        c["call_duration_mean"] = mean
        c["call_duration_var"] = _safe_div(np.bincount(caller, weights=(dur - np.nan_to_num(mean)[caller]) ** 2, minlength=n), out_calls)
        lmask = pr.local[callee]
        lc, ld = caller[lmask], dur[lmask]
        ln = np.bincount(lc, minlength=n)
        lmean = _safe_div(np.bincount(lc, weights=ld, minlength=n), ln)
        c["local_duration_mean"] = lmean
        c["local_duration_var"] = _safe_div(np.bincount(lc, weights=(ld - np.nan_to_num(lmean)[lc]) ** 2, minlength=n), ln)
        rev = dst * n + src
        pos = np.searchsorted(ekeys, rev)
        recip = (pos < ekeys.size) & (ekeys[np.minimum(pos, ekeys.size - 1)] == rev)
        c["reciprocal_frac"] = _safe_div(np.bincount(src, weights=recip, minlength=n), out_deg)
        q = ecount / out_calls[src]
        ent = np.bincount(src, weights=-q * np.log(q), minlength=n)
        cd = _safe_div(ent, np.log(np.maximum(out_deg, 1)))
        c["comm_diversity"] = np.where(out_deg == 1, 0.0, np.where(out_deg == 0, np.nan, cd))

        self._geo_columns(c, mask, n, s, d)
        return c

    def _geo_columns(self, c, mask, n, s, d) -> None:
        t = self.table
        rows = np.flatnonzero(mask)
        if self.geo.include_callee:
            pu = np.concatenate([t.caller[rows], t.callee[rows]]).astype(np.int64)
            prow = np.concatenate([rows, rows])
        else:
            pu, prow = t.caller[rows].astype(np.int64), rows
        order = np.lexsort((prow, pu))
        pu, prow = pu[order], prow[order]
        plat, plon = t.lat[prow], t.lon[prow]
        hour = self.hour[prow]

        cnt = np.bincount(pu, minlength=n)
        clat = _safe_div(np.bincount(pu, weights=plat, minlength=n), cnt)
        clon = _safe_div(np.bincount(pu, weights=plon, minlength=n), cnt)
        c["center_lat"], c["center_lon"] = clat, clon
        rad = haversine(plat, plon, clat[pu], clon[pu]) if pu.size else np.empty(0)
        c["avg_radius"] = _safe_div(np.bincount(pu, weights=rad, minlength=n), cnt)
        c["max_radius"] = _group_max(rad, pu, n)
        same = pu[1:] == pu[:-1]
        hop = haversine(plat[:-1][same], plon[:-1][same], plat[1:][same], plon[1:][same]) if pu.size > 1 else np.empty(0)
        moving = np.bincount(pu[1:][same], weights=hop, minlength=n) if pu.size > 1 else np.zeros(n)
        c["moving_distance"] = np.where(cnt > 0, moving, np.nan)
        c["avg_move_distance"] = _safe_div(moving, cnt)

        sub = {}
        for tag, hours in (("work", self.geo.work_hours), ("home", self.geo.home_hours)):
            hm = in_hours(hour, hours)
            hc = np.bincount(pu[hm], minlength=n)
            la = _safe_div(np.bincount(pu[hm], weights=plat[hm], minlength=n), hc)
            lo = _safe_div(np.bincount(pu[hm], weights=plon[hm], minlength=n), hc)
            c[f"{tag}_lat"], c[f"{tag}_lon"] = la, lo
            sub[tag] = (hm, hc, la, lo)
        ok = ~np.isnan(c["home_lat"]) & ~np.isnan(c["work_lat"])
        hw = np.full(n, np.nan)
        hw[ok] = haversine(c["home_lat"][ok], c["home_lon"][ok], c["work_lat"][ok], c["work_lon"][ok])
        c["home_work_distance"] = hw

        if self.index is None:
            for name in PRICE_FEATURES:
                c[name] = np.full(n, np.nan)
            return
        price = self._point_prices(plat, plon)
        c["avg_price"] = _safe_div(np.bincount(pu, weights=price, minlength=n), cnt)
        c["center_price"] = self._center_prices(clat, clon)
        for tag, (hm, hc, la, lo) in sub.items():
            c[f"{tag}_avg_price"] = _safe_div(np.bincount(pu[hm], weights=price[hm], minlength=n), hc)
            c[f"{tag}_center_price"] = self._center_prices(la, lo)
        for name, src in (("neighbor_avg_price", "avg_price"), ("neighbor_center_price", "center_price")):
            v = c[src][d]
            ok = ~np.isnan(v)
            c[name] = _safe_div(np.bincount(s[ok], weights=v[ok], minlength=n),
                                np.bincount(s[ok], minlength=n))
