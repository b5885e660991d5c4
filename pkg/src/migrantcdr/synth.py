"""Synthetic CDR bundles with cohort-specific social and spatial behaviour.

The city is a square plane (km) around an origin, mapped to lat/lon. Calls
are placed on a regular tower grid. New migrants arrive on the first day
after the warm-up period; leavers fall silent on their leave day.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import SECONDS_PER_DAY, CohortLabel, Sex, UserProfile, day_indices
from .ingest import CallTable, Estate, write_aliases, write_estates, write_profiles

KM_PER_DEG = 6371.0 * math.pi / 180.0
LOCAL, STAYING, LEAVING, HUB = 0, 1, 2, 3
_TRUE_LABEL = {LOCAL: CohortLabel.LOCAL, STAYING: CohortLabel.STAYING,
               LEAVING: CohortLabel.LEAVING, HUB: CohortLabel.EXCLUDED}


@dataclass
class Behavior:
    calls_per_day: float = 2.0
    initial_contacts: float = 3.0
    new_contacts_per_week: float = 3.0
    same_province_prob: float = 0.15
    closure_prob: float = 0.2
    mobility_km: float = 2.0
    commute_km: float = 5.0
    home_quantiles: list = field(default_factory=lambda: [[0.0, 1.0]])
    duration_median_s: float = 90.0
    local_duration_scale: float = 1.0


def _local_default() -> Behavior:
    return Behavior(calls_per_day=1.0, initial_contacts=2.0, new_contacts_per_week=0.0,
                    same_province_prob=0.0, closure_prob=0.6, mobility_km=2.0)


def _staying_default() -> Behavior:
    return Behavior(calls_per_day=2.0, initial_contacts=3.0, new_contacts_per_week=3.0,
                    same_province_prob=0.15, closure_prob=0.2, mobility_km=2.5,
                    home_quantiles=[[0.25, 0.75]])


def _leaving_default() -> Behavior:
    return Behavior(calls_per_day=2.0, initial_contacts=3.0, new_contacts_per_week=2.0,
                    same_province_prob=0.55, closure_prob=0.6, mobility_km=1.2,
                    home_quantiles=[[0.0, 0.12], [0.88, 1.0]], local_duration_scale=0.6)


@dataclass
class GeneratorConfig:
    n_locals: int = 20000
    n_staying: int = 2000
    n_leaving: int = 200
    n_hubs: int = 10
    hub_calls_per_day: float = 40.0
    horizon_days: int = 28
    warmup_days: int = 4
    leave_day: list = field(default_factory=lambda: [18, 18])
    epoch: int = 1472659200
    home_region: str = "SH"
    n_provinces: int = 30
    origin_lat: float = 31.23
    origin_lon: float = 121.47
    city_km: float = 30.0
    tower_spacing_km: float = 0.5
    n_estates: int = 5000
    price_base: float = 25000.0
    price_peak: float = 100000.0
    price_scale_km: float = 9.0
    price_noise: float = 0.25
    community_size: int = 8
    alias_fraction: float = 0.0
    local: Behavior = field(default_factory=_local_default)
    staying: Behavior = field(default_factory=_staying_default)
    leaving: Behavior = field(default_factory=_leaving_default)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_locals", "n_staying", "n_leaving", "n_hubs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        lo, hi = self.leave_day
        if not (self.warmup_days < lo <= hi < self.horizon_days):
            raise ValueError("leave_day range must lie inside the horizon after arrival")
        for b in (self.staying, self.leaving):
            if b.initial_contacts < 1:
                raise ValueError("infeasible config: contact pool < 1")
        if self.n_locals == 0 and (self.n_staying or self.n_leaving):
            raise ValueError("infeasible config: migrants need locals to befriend")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator keys: {sorted(unknown)}")
        for key in ("local", "staying", "leaving"):
            if key in d and isinstance(d[key], dict):
                base = {"local": _local_default, "staying": _staying_default,
                        "leaving": _leaving_default}[key]().__dict__
                extra = set(d[key]) - set(base)
                if extra:
                    raise ValueError(f"unknown {key} behavior keys: {sorted(extra)}")
                d[key] = Behavior(**{**base, **d[key]})
        return cls(**d)


@dataclass
class GroundTruth:
    user: list[str]
    label: list[CohortLabel]
    leave_day: list[int | None]

    def as_dict(self) -> dict[str, CohortLabel]:
        return dict(zip(self.user, self.label))


@dataclass
class Bundle:
    calls: CallTable
    profiles: dict[str, UserProfile]
    estates: list[Estate]
    truth: GroundTruth
    aliases: dict[str, str]
    friendships: np.ndarray  # (owner, friend, day, initiated, same_province_draw)
    cohort: dict[str, int]
    cfg: GeneratorConfig

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "calls.csv", out / "profiles.csv", out / "estates.csv", out / "ground_truth.csv"]
        self.calls.write(paths[0])
        write_profiles(paths[1], self.profiles.values())
        write_estates(paths[2], self.estates)
        with paths[3].open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "true_label", "leave_day"])
            for u, lab, d in zip(self.truth.user, self.truth.label, self.truth.leave_day):
                w.writerow([u, lab.value, "" if d is None else d])
        if self.aliases:
            paths.append(out / "aliases.csv")
            write_aliases(paths[-1], self.aliases)
        return paths


class _City:
    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        self.cfg = cfg
        half = cfg.city_km / 2
        self.bumps = np.column_stack([rng.uniform(-half, half, 12), rng.uniform(-half, half, 12),
                                      rng.uniform(-1, 1, 12), rng.uniform(2.0, 6.0, 12)])

    def price(self, x, y):
        c = self.cfg
        r2 = x ** 2 + y ** 2
        base = c.price_base + (c.price_peak - c.price_base) * np.exp(-r2 / (2 * c.price_scale_km ** 2))
        bx, by, amp, width = self.bumps.T
        d2 = (np.asarray(x)[..., None] - bx) ** 2 + (np.asarray(y)[..., None] - by) ** 2
        noise = (amp * np.exp(-d2 / (2 * width ** 2))).sum(axis=-1)
        return base * (1 + c.price_noise * np.tanh(noise))

    def clip(self, v):
        half = self.cfg.city_km / 2
        return np.clip(v, -half, half)

    def to_latlon(self, x, y):
        c = self.cfg
        lat = c.origin_lat + y / KM_PER_DEG
        lon = c.origin_lon + x / (KM_PER_DEG * math.cos(math.radians(c.origin_lat)))
        return lat, lon

    def snap(self, v):
        s = self.cfg.tower_spacing_km
        return np.round(self.clip(v) / s) * s


def _hour_weights() -> np.ndarray:
    w = np.array([0.3, 0.1, 0.05, 0.05, 0.05, 0.1, 0.4, 1.0, 1.5, 2, 2, 2,
                  2, 2, 2, 2, 1.8, 1.6, 1.8, 2, 2, 1.8, 1.2, 0.6])
    return w / w.sum()


def generate(cfg: GeneratorConfig) -> Bundle:
    """Deterministic synthetic bundle for ``cfg.seed``."""
    ss = np.random.SeedSequence(cfg.seed)
    r_people, r_graph, r_calls, r_city, r_alias = (np.random.default_rng(s) for s in ss.spawn(5))
    city = _City(cfg, r_city)
    half = cfg.city_km / 2

    counts = [cfg.n_locals, cfg.n_staying, cfg.n_leaving, cfg.n_hubs]
    cohort = np.repeat(np.arange(4), counts)
    n = cohort.size
    beh = {LOCAL: cfg.local, STAYING: cfg.staying, LEAVING: cfg.leaving, HUB: cfg.local}

    # people
    prov_weights = 1.0 / np.arange(1, cfg.n_provinces + 1)
    prov_weights /= prov_weights.sum()
    province = np.where(cohort == LOCAL, 0, 1 + r_people.choice(cfg.n_provinces, n, p=prov_weights))
    birth_year = np.where(cohort == LOCAL, r_people.integers(1950, 2001, n),
                          np.clip(np.round(r_people.normal(1991, 6, n)), 1950, 2000)).astype(int)
    sex = r_people.integers(0, 2, n)
    arrival = np.where((cohort == STAYING) | (cohort == LEAVING), cfg.warmup_days, 0)
    last_day = np.full(n, cfg.horizon_days - 1)
    lv = cohort == LEAVING
    leave = r_people.integers(cfg.leave_day[0], cfg.leave_day[1] + 1, n)
    last_day[lv] = leave[lv] - 1

    cand = r_city.uniform(-half, half, (40000, 2))
    ranked = cand[np.argsort(city.price(cand[:, 0], cand[:, 1]), kind="stable")]
    home = np.empty((n, 2))
    for c in range(4):
        idx = np.flatnonzero(cohort == c)
        qs = np.array(beh[c].home_quantiles, dtype=float)
        span = qs[:, 1] - qs[:, 0]
        pick = r_people.choice(len(qs), idx.size, p=span / span.sum())
        q = qs[pick, 0] + r_people.random(idx.size) * span[pick]
        home[idx] = ranked[np.minimum((q * len(ranked)).astype(int), len(ranked) - 1)]
    commute = np.array([beh[c].commute_km for c in cohort])
    ang = r_people.uniform(0, 2 * np.pi, n)
    dist = r_people.exponential(commute)
    work = city.clip(home + np.column_stack([np.cos(ang), np.sin(ang)]) * dist[:, None])
    sigma = np.array([beh[c].mobility_km for c in cohort])
    rate = np.array([beh[c].calls_per_day for c in cohort])
    rate[cohort == HUB] = cfg.hub_calls_per_day

    friends = _friendships(cfg, cohort, province, arrival, last_day, beh, r_graph)
    calls = _calls(cfg, city, cohort, arrival, last_day, rate, sigma, home, work, friends, beh, r_calls)

    # anonymous ids, unrelated to cohort
    perm = r_people.permutation(n)
    width = len(str(n))
    ids = np.array([f"u{perm[i]:0{width}d}" for i in range(n)], dtype=object)

    aliases: dict[str, str] = {}
    caller_names = ids[calls["caller"]]
    callee_names = ids[calls["callee"]]
    if cfg.alias_fraction > 0:
        multi = np.flatnonzero(r_alias.random(n) < cfg.alias_fraction)
        alt = {int(i): f"a{perm[i]:0{width}d}" for i in multi}
        aliases = {alt[i]: str(ids[i]) for i in alt}
        use = r_alias.random(caller_names.size) < 0.3
        caller_names = np.array([alt.get(int(c), ids[c]) if u else ids[c]
                                 for c, u in zip(calls["caller"], use)], dtype=object)

    table = CallTable.from_columns(caller_names, callee_names, calls["start"], calls["end"],
                                   calls["lat"], calls["lon"])

    home_name = cfg.home_region
    prov_name = np.array([home_name] + [f"P{i:02d}" for i in range(1, cfg.n_provinces + 1)])
    profiles = {}
    for i in np.argsort(ids.astype(str)):
        u = str(ids[i])
        pv = str(prov_name[province[i]])
        profiles[u] = UserProfile(u, int(birth_year[i]), Sex.M if sex[i] == 0 else Sex.F, pv, pv == home_name)

    ex = r_city.uniform(-half, half, (cfg.n_estates, 2))
    eprice = city.price(ex[:, 0], ex[:, 1]) * np.exp(r_city.normal(0, 0.1, cfg.n_estates))
    elat, elon = city.to_latlon(ex[:, 0], ex[:, 1])
    estates = [Estate(f"e{i:05d}", float(a), float(b), float(round(p, 2)))
               for i, (a, b, p) in enumerate(zip(elat, elon, eprice))]

    order = np.argsort(ids.astype(str))
    truth = GroundTruth([str(ids[i]) for i in order], [_TRUE_LABEL[int(cohort[i])] for i in order],
                        [int(leave[i]) if cohort[i] == LEAVING else None for i in order])
    return Bundle(table, profiles, estates, truth, aliases, friends,
                  {str(ids[i]): int(cohort[i]) for i in range(n)}, cfg)


def _friendships(cfg, cohort, province, arrival, last_day, beh, rng) -> np.ndarray:
    """Undirected friendships as rows ``(a, b, day, initiator_is_a, same_province_draw)``."""
    locals_ = np.flatnonzero(cohort == LOCAL)
    rows: list[tuple[int, int, int, int, int]] = []
    adj: dict[int, list[int]] = {}

    def link(a, b, day, same):
        rows.append((a, b, day, 1, same))
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    # locals: dense communities plus random ties
    p_in = cfg.local.closure_prob
    order = rng.permutation(locals_)
    s = max(cfg.community_size, 2)
    edges = []
    for off in range(0, order.size, s):
        grp = order[off:off + s]
        ia, ib = np.triu_indices(grp.size, 1)
        keep = rng.random(ia.size) < p_in
        edges.append(np.column_stack([grp[ia[keep]], grp[ib[keep]]]))
    k = rng.poisson(cfg.local.initial_contacts, locals_.size)
    a = np.repeat(locals_, k)
    b = locals_[rng.integers(0, max(locals_.size, 1), a.size)] if locals_.size else a
    edges.append(np.column_stack([a, b]))
    e = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=int)
    e = e[e[:, 0] != e[:, 1]]
    e = np.unique(np.sort(e, axis=1), axis=0)
    local_rows = np.column_stack([e, np.zeros((len(e), 3), dtype=int)])
    local_rows[:, 3] = 1
    for x, y in e.tolist():
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)

    # hubs befriend nobody; they call at random (see _calls)
    migrants = np.flatnonzero((cohort == STAYING) | (cohort == LEAVING))
    by_prov: dict[int, np.ndarray] = {}
    for p in np.unique(province[migrants]):
        by_prov[int(p)] = migrants[province[migrants] == p]
    for day in range(cfg.warmup_days, cfg.horizon_days):
        for m in migrants.tolist():
            if not (arrival[m] <= day <= last_day[m]):
                continue
            b_ = beh[int(cohort[m])]
            if day == arrival[m]:
                k = 1 + rng.poisson(b_.initial_contacts - 1)
            else:
                k = rng.poisson(b_.new_contacts_per_week / 7.0)
            for _ in range(k):
                mine = set(adj.get(m, ()))
                r = rng.random()
                pick, same = -1, 0
                if r < b_.same_province_prob:
                    same = 1
                    pool = by_prov[int(province[m])]
                    ok = pool[(arrival[pool] <= day) & (last_day[pool] >= day) & (pool != m)]
                    if ok.size:
                        pick = int(ok[rng.integers(ok.size)])
                elif r < b_.same_province_prob + b_.closure_prob and mine:
                    via = list(adj[m])[rng.integers(len(adj[m]))]
                    fof = [x for x in adj.get(via, ()) if x != m and x not in mine
                           and arrival[x] <= day <= last_day[x]]
                    if fof:
                        pick = fof[rng.integers(len(fof))]
                if pick < 0 and locals_.size:
                    pick = int(locals_[rng.integers(locals_.size)])
                if pick < 0 or pick in mine:
                    continue
                link(m, pick, day, same)
    mig_rows = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return np.concatenate([local_rows.astype(np.int64), mig_rows])


def _calls(cfg, city, cohort, arrival, last_day, rate, sigma, home, work, friends, beh, rng) -> dict:
    n = cohort.size
    # both directions: an owner may call each friend
    own = np.concatenate([friends[:, 0], friends[:, 1]])
    fr = np.concatenate([friends[:, 1], friends[:, 0]])
    formed = np.concatenate([friends[:, 2], friends[:, 2]])
    order = np.lexsort((fr, own))
    own, fr, formed = own[order], fr[order], formed[order]
    hubs = np.flatnonzero(cohort == HUB)
    hour_p = _hour_weights()
    is_mig = (cohort == STAYING) | (cohort == LEAVING)
    local_scale = np.array([beh[c].local_duration_scale for c in cohort])
    median = np.array([beh[c].duration_median_s for c in cohort])
    out = {k: [] for k in ("caller", "callee", "start", "end", "lat", "lon")}

    for day in range(cfg.horizon_days):
        present = (arrival <= day) & (last_day >= day)
        ok = (formed <= day) & present[own] & present[fr]
        o, f = own[ok], fr[ok]
        pool = np.bincount(o, minlength=n)
        first = np.cumsum(pool) - pool
        k = rng.poisson(rate)
        k[~present] = 0
        # guarantee activity on the arrival day unless the cohort never calls
        arr = is_mig & (arrival == day) & (rate > 0)
        k[arr] = np.maximum(k[arr], 1)
        k[pool == 0] = 0
        k[hubs] = 0
        caller = np.repeat(np.arange(n), k)
        callee = f[first[caller] + (rng.random(caller.size) * pool[caller]).astype(np.int64)]
        if hubs.size:
            targets = np.flatnonzero(present & (cohort != HUB))
            kh = rng.poisson(cfg.hub_calls_per_day, hubs.size) * bool(targets.size)
            hc = np.repeat(hubs, kh)
            caller = np.concatenate([caller, hc])
            callee = np.concatenate([callee, targets[rng.integers(0, max(targets.size, 1), hc.size)]])
        m = caller.size
        hour = rng.choice(24, m, p=hour_p)
        sec = day * SECONDS_PER_DAY + hour * 3600 + rng.integers(0, 3600, m)
        at_work = (hour >= 9) & (hour < 16)
        at_home = (hour >= 20) | (hour < 7)
        mixed = ~(at_work | at_home)
        use_work = at_work | (mixed & (rng.random(m) < 0.5))
        anchor = np.where(use_work[:, None], work[caller], home[caller])
        xy = city.snap(anchor + rng.normal(0, 1, (m, 2)) * sigma[caller][:, None])
        lat, lon = city.to_latlon(xy[:, 0], xy[:, 1])
        scale = np.where(is_mig[caller] & (cohort[callee] == LOCAL), local_scale[caller], 1.0)
        dur = np.round(median[caller] * scale * np.exp(rng.normal(0, 0.7, m))).astype(np.int64)
        out["caller"].append(caller)
        out["callee"].append(callee)
        out["start"].append(cfg.epoch + sec)
        out["end"].append(cfg.epoch + sec + dur)
        out["lat"].append(np.round(lat, 6))
        out["lon"].append(np.round(lon, 6))
    return {k: np.concatenate(v) if v else np.zeros(0) for k, v in out.items()}


@dataclass
class ValidationReport:
    checks: list[tuple[str, bool, str]]

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    def violations(self) -> list[str]:
        return [f"{name}: {detail}" for name, passed, detail in self.checks if not passed]

    def __str__(self) -> str:
        return "\n".join(f"{'ok  ' if p else 'FAIL'} {n}: {d}" for n, p, d in self.checks)


def validate(bundle: Bundle, cfg: GeneratorConfig | None = None) -> ValidationReport:
    """Compare realized statistics with the configured targets."""
    cfg = cfg or bundle.cfg
    t = bundle.calls
    checks = []
    coh = np.array([bundle.cohort.get(str(u), -1) for u in t.users])
    days = day_indices(t.start, cfg.epoch)
    leave = {u: d for u, d in zip(bundle.truth.user, bundle.truth.leave_day) if d is not None}
    n_days = {LOCAL: cfg.horizon_days, STAYING: cfg.horizon_days - cfg.warmup_days}
    for c, name, b in ((LOCAL, "local", cfg.local), (STAYING, "staying", cfg.staying),
                       (LEAVING, "leaving", cfg.leaving)):
        users = [u for u, k in bundle.cohort.items() if k == c]
        if not users:
            continue
        if c == LEAVING:
            user_days = sum(leave[u] - cfg.warmup_days for u in users)
        else:
            user_days = len(users) * n_days[c]
        made = int((coh[t.caller] == c).sum())
        realized = made / user_days
        target = b.calls_per_day
        if c != LOCAL and b.calls_per_day > 0:
            # at least one call on the arrival day
            target += len(users) * math.exp(-b.calls_per_day) / user_days
        if target == 0:
            passed = made == 0
        else:
            # 5% or three Poisson standard errors, whichever is wider
            tol = max(0.05 * target, 3 * math.sqrt(target / user_days))
            passed = abs(realized - target) <= tol
        checks.append((f"call_rate[{name}]", passed, f"realized {realized:.4f} vs target {target:.4f}"))
        if c != LOCAL:
            fr = bundle.friendships
            mine = (_cohort_codes(bundle)[fr[:, 0]] == c) & (fr[:, 3] == 1)
            if mine.any():
                frac = fr[mine, 4].mean()
                p = b.same_province_prob
                tol = max(0.05, 3 * math.sqrt(p * (1 - p) / int(mine.sum())))
                passed = abs(frac - p) <= tol
                checks.append((f"same_province[{name}]", passed,
                               f"realized {frac:.3f} vs target {b.same_province_prob:.3f}"))
    silent = 0
    code = {str(u): i for i, u in enumerate(t.users)}
    for u, d in leave.items():
        i = code.get(u)
        if i is None:
            continue
        touch = (t.caller == i) | (t.callee == i)
        silent += int((touch & (days >= d)).sum())
    checks.append(("leaver_silence", silent == 0, f"{silent} calls on/after leave day"))
    return ValidationReport(checks)


def _cohort_codes(bundle: Bundle) -> np.ndarray:
    """Cohort code per internal generator index (row order of ``friendships``)."""
    cfg = bundle.cfg
    return np.repeat(np.arange(4), [cfg.n_locals, cfg.n_staying, cfg.n_leaving, cfg.n_hubs])
