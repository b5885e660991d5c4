"""Cohort assignment: locals, staying and leaving new migrants."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .core import CallRecord, CohortLabel, TimeWindow, UserProfile, day_index, day_indices
from .ingest import CallTable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CohortConfig:
    """Calendar of the labeling rule; defaults use a 30-day month."""

    warmup_days: int = 4
    week1: TimeWindow = field(default_factory=lambda: TimeWindow(4, 11))
    week2: TimeWindow = field(default_factory=lambda: TimeWindow(11, 18))
    week3: TimeWindow = field(default_factory=lambda: TimeWindow(18, 25))
    tail_excluded_days: int = 5

    def __post_init__(self):
        if self.warmup_days < 0:
            raise ValueError("warmup_days must be >= 0")
        if self.week1.start_day < self.warmup_days:
            raise ValueError("week1 overlaps the warm-up period")
        if not (self.week1.end_day <= self.week2.start_day and self.week2.end_day <= self.week3.start_day):
            raise ValueError("weeks must be disjoint and ordered")

    @property
    def horizon_days(self) -> int:
        return self.week3.end_day + self.tail_excluded_days

    @property
    def observation_days(self) -> int:
        """Days between week1 start and week3 start: the feature budget."""
        return self.week3.start_day - self.week1.start_day

    def shifted(self, days: int) -> "CohortConfig":
        sh = lambda w: TimeWindow(w.start_day + days, w.end_day + days)
        return CohortConfig(self.warmup_days + days, sh(self.week1), sh(self.week2),
                            sh(self.week3), self.tail_excluded_days)


def activity_days(records: Iterable[CallRecord], v: str, epoch: int = 0) -> set[int]:
    return {day_index(r.start, epoch) for r in records if v in (r.caller, r.callee)}


def classify(is_local: bool, warmup: bool, w1: bool, w2: bool, w3: bool) -> CohortLabel:
    if is_local:
        return CohortLabel.LOCAL
    if warmup:
        return CohortLabel.EXCLUDED
    if w1 and w2:
        return CohortLabel.STAYING if w3 else CohortLabel.LEAVING
    return CohortLabel.EXCLUDED


def _active_in(days: np.ndarray, caller: np.ndarray, callee: np.ndarray, n: int,
               lo: int, hi: int) -> np.ndarray:
    m = (days >= lo) & (days < hi)
    return (np.bincount(caller[m], minlength=n) + np.bincount(callee[m], minlength=n)) > 0


def label_users(records, profiles: Mapping[str, UserProfile], cfg: CohortConfig = CohortConfig(),
                epoch: int = 0) -> dict[str, CohortLabel]:
    """Label every profiled user; users seen in calls without a profile are Excluded."""
    table = records if isinstance(records, CallTable) else CallTable.from_records(records)
    n = table.n_users
    days = day_indices(table.start, epoch)
    flags = [
        _active_in(days, table.caller, table.callee, n, lo, hi)
        for lo, hi in ((0, cfg.warmup_days),
                       (cfg.week1.start_day, cfg.week1.end_day),
                       (cfg.week2.start_day, cfg.week2.end_day),
                       (cfg.week3.start_day, cfg.week3.end_day))
    ]
    code = {str(u): i for i, u in enumerate(table.users)}
    out: dict[str, CohortLabel] = {}
    for user, p in profiles.items():
        i = code.get(user)
        if i is None:
            out[user] = classify(p.is_local, False, False, False, False)
        else:
            out[user] = classify(p.is_local, *(bool(f[i]) for f in flags))
    unprofiled = [str(u) for u in table.users if str(u) not in profiles]
    if unprofiled:
        log.warning("%d users without profile labeled Excluded", len(unprofiled))
        for u in unprofiled:
            out[u] = CohortLabel.EXCLUDED
    return out


def first_activity_day(table: CallTable, epoch: int = 0) -> np.ndarray:
    """Per user code, the first day with a call (-1 if none)."""
    n = table.n_users
    out = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    if len(table):
        days = day_indices(table.start, epoch)
        np.minimum.at(out, table.caller, days)
        np.minimum.at(out, table.callee, days)
    out[out == np.iinfo(np.int64).max] = -1
    return out
