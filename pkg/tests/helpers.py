"""Conversions from oracle tuples to package objects, and tiny builders."""

from __future__ import annotations

from migrantcdr.core import CallRecord, Sex, UserProfile
from migrantcdr.ingest import Estate

EPOCH = 1_000_000_000
DAY = 86400


def records(calls):
    return [CallRecord(*c) for c in calls]


def profiles(profs):
    return {u: UserProfile(u, y, Sex(s), p, loc) for u, (y, s, p, loc) in profs.items()}


def estates(ests):
    return [Estate(f"e{i}", a, b, p) for i, (a, b, p) in enumerate(ests)]


def call(a, b, day=0, hour=2, dur=60, lat=31.2, lon=121.4, epoch=0):
    """One call on ``day`` at UTC ``hour``."""
    s = epoch + day * DAY + hour * 3600
    return CallRecord(a, b, s, s + dur, lat, lon)


def prof(u, year=1990, sex="M", province="P1", home="SH"):
    return UserProfile(u, year, Sex(sex), province, province == home)
