"""CSV readers/writers for calls, profiles, estates and aliases.

Rows that break a record invariant are skipped and counted by default;
``strict=True`` turns the first bad row into a :class:`ParseError`.
Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .core import CallRecord, RecordError, Sex, UserProfile

log = logging.getLogger(__name__)

CALL_HEADER = ["caller", "callee", "start", "end", "lat", "lon"]
PROFILE_HEADER = ["user", "birth_year", "sex", "province"]
ESTATE_HEADER = ["estate_id", "lat", "lon", "price"]
ALIAS_HEADER = ["phone", "user"]


class ParseError(ValueError):
    pass


@dataclass
class ParseStats:
    accepted: int = 0
    rejected: int = 0
    reasons: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, line: int, reason: str, strict: bool) -> None:
        if strict:
            raise ParseError(f"line {line}: {reason}")
        self.rejected += 1
        if len(self.reasons) < 1000:
            self.reasons.append((line, reason))


@dataclass(frozen=True)
class Estate:
    estate_id: str
    lat: float
    lon: float
    price: float

    def __post_init__(self):
        if not self.price > 0:
            raise RecordError("non-positive price")
        if not (-90 <= self.lat <= 90 and -180 <= self.lon <= 180):
            raise RecordError("invalid coordinates")


def _rows(path, header: list[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` after checking the header."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing input file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        seen_header = False
        for row in reader:
            if not row or (row[0].startswith("#")):
                continue
            if not seen_header:
                if [c.strip() for c in row] != header:
                    raise ParseError(f"{path.name}: expected header {','.join(header)}")
                seen_header = True
                continue
            yield reader.line_num, row
        if not seen_header:
            raise ParseError(f"{path.name}: missing header")


def _coord(text: str, lo: float, hi: float) -> float:
    v = float(text)
    if not (lo <= v <= hi):
        raise ValueError(f"coordinate {text} out of range")
    return v


def _parse_call_row(row: list[str]) -> tuple[str, str, int, int, float, float]:
    if len(row) != 6:
        raise ValueError(f"expected 6 fields, got {len(row)}")
    caller, callee = row[0].strip(), row[1].strip()
    if not caller or not callee:
        raise ValueError("empty user id")
    if caller == callee:
        raise ValueError("self call")
    start, end = int(row[2]), int(row[3])
    if end < start:
        raise ValueError("end before start")
    lat = _coord(row[4], -90.0, 90.0)
    lon = _coord(row[5], -180.0, 180.0)
    return caller, callee, start, end, lat, lon


def parse_call_log(path, strict: bool = False,
                   stats: ParseStats | None = None) -> Iterator[CallRecord]:
    """Stream :class:`CallRecord` objects in file order.

    Pass a :class:`ParseStats` to collect accept/reject counts.
    """
    stats = stats if stats is not None else ParseStats()
    for line, row in _rows(path, CALL_HEADER):
        try:
            fields = _parse_call_row(row)
        except ValueError as exc:
            stats.reject(line, str(exc), strict)
            continue
        stats.accepted += 1
        yield CallRecord(*fields)


def write_call_log(path, records: Iterable[CallRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALL_HEADER)
        for r in records:
            w.writerow([r.caller, r.callee, r.start, r.end, repr(r.tower_lat), repr(r.tower_lon)])


def parse_profiles(path, home_region: str, strict: bool = False,
                   stats: ParseStats | None = None) -> dict[str, UserProfile]:
    stats = stats if stats is not None else ParseStats()
    out: dict[str, UserProfile] = {}
    for line, row in _rows(path, PROFILE_HEADER):
        if len(row) != 4:
            stats.reject(line, f"expected 4 fields, got {len(row)}", strict)
            continue
        user, year, sex, province = (c.strip() for c in row)
        if user in out:
            raise ParseError(f"line {line}: duplicate user {user!r}")
        try:
            sex_code = Sex(sex)
        except ValueError:
            stats.reject(line, f"unknown sex code {sex!r}", strict)
            continue
        try:
            birth_year = int(year)
        except ValueError:
            stats.reject(line, f"bad birth year {year!r}", strict)
            continue
        if not user or not province:
            stats.reject(line, "empty field", strict)
            continue
        out[user] = UserProfile(user, birth_year, sex_code, province, province == home_region)
        stats.accepted += 1
    return out


def write_profiles(path, profiles: Iterable[UserProfile]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for p in profiles:
            w.writerow([p.user, p.birth_year, p.sex.value, p.birth_province])


def parse_estates(path, strict: bool = False, stats: ParseStats | None = None) -> list[Estate]:
    stats = stats if stats is not None else ParseStats()
    out = []
    for line, row in _rows(path, ESTATE_HEADER):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            price = float(row[3])
            if not math.isfinite(price):
                raise ValueError("non-finite price")
            est = Estate(row[0].strip(), float(row[1]), float(row[2]), price)
        except ValueError as exc:
            stats.reject(line, str(exc), strict)
            continue
        out.append(est)
        stats.accepted += 1
    return out


def write_estates(path, estates: Iterable[Estate]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTATE_HEADER)
        for e in estates:
            w.writerow([e.estate_id, repr(e.lat), repr(e.lon), repr(e.price)])


def parse_aliases(path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line, row in _rows(path, ALIAS_HEADER):
        if len(row) != 2:
            raise ParseError(f"line {line}: expected 2 fields")
        phone, user = row[0].strip(), row[1].strip()
        if out.get(phone, user) != user:
            raise ParseError(f"line {line}: phone {phone!r} mapped to two users")
        out[phone] = user
    return out


def write_aliases(path, aliases: dict[str, str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ALIAS_HEADER)
        for phone in sorted(aliases):
            w.writerow([phone, aliases[phone]])


class AliasCounter:
    """Counts records dropped by :func:`apply_aliases`."""

    def __init__(self):
        self.dropped = 0


def apply_aliases(records: Iterable[CallRecord], aliases: dict[str, str],
                  counter: AliasCounter | None = None) -> Iterator[CallRecord]:
    """Rewrite parties to canonical ids and drop calls that become self calls."""
    for r in records:
        caller = aliases.get(r.caller, r.caller)
        callee = aliases.get(r.callee, r.callee)
        if caller == callee:
            if counter is not None:
                counter.dropped += 1
            continue
        if caller is r.caller and callee is r.callee:
            yield r
        else:
            yield CallRecord(caller, callee, r.start, r.end, r.tower_lat, r.tower_lon)


class CallTable:
    """Columnar call log.

    ``users`` holds the sorted distinct user ids; ``caller``/``callee`` are
    int32 codes into it, so code order equals lexical id order. Rows are kept
    in canonical order ``(start, caller, callee, end, lat, lon)``.
    """

    __slots__ = ("users", "caller", "callee", "start", "end", "lat", "lon")

    def __init__(self, users, caller, callee, start, end, lat, lon, *, canonical=False):
        self.users = np.asarray(users, dtype=object)
        self.caller = np.asarray(caller, dtype=np.int32)
        self.callee = np.asarray(callee, dtype=np.int32)
        self.start = np.asarray(start, dtype=np.int64)
        self.end = np.asarray(end, dtype=np.int64)
        self.lat = np.asarray(lat, dtype=np.float64)
        self.lon = np.asarray(lon, dtype=np.float64)
        if not canonical:
            self._sort()

    def _sort(self) -> None:
        order = np.lexsort((self.lon, self.lat, self.end, self.callee, self.caller, self.start))
        for name in ("caller", "callee", "start", "end", "lat", "lon"):
            setattr(self, name, getattr(self, name)[order])

    @classmethod
    def from_columns(cls, callers, callees, start, end, lat, lon) -> "CallTable":
        names = np.concatenate([np.asarray(callers, dtype=object), np.asarray(callees, dtype=object)])
        if names.size:
            users, codes = np.unique(names.astype(str), return_inverse=True)
            users = users.astype(object)
        else:
            users, codes = np.array([], dtype=object), np.array([], dtype=np.int64)
        n = len(callers)
        return cls(users, codes[:n], codes[n:], start, end, lat, lon)

    @classmethod
    def from_records(cls, records: Iterable[CallRecord]) -> "CallTable":
        recs = list(records)
        return cls.from_columns(
            [r.caller for r in recs], [r.callee for r in recs],
            np.array([r.start for r in recs], dtype=np.int64),
            np.array([r.end for r in recs], dtype=np.int64),
            np.array([r.tower_lat for r in recs], dtype=float),
            np.array([r.tower_lon for r in recs], dtype=float),
        )

    def __len__(self) -> int:
        return int(self.caller.size)

    @property
    def n_users(self) -> int:
        return int(self.users.size)

    @property
    def duration(self) -> np.ndarray:
        return self.end - self.start

    def records(self) -> Iterator[CallRecord]:
        u = self.users
        for i in range(len(self)):
            yield CallRecord(u[self.caller[i]], u[self.callee[i]], int(self.start[i]),
                             int(self.end[i]), float(self.lat[i]), float(self.lon[i]))

    def take(self, mask) -> "CallTable":
        """Row subset; keeps the user dictionary (codes stay stable)."""
        return CallTable(self.users, self.caller[mask], self.callee[mask], self.start[mask],
                         self.end[mask], self.lat[mask], self.lon[mask], canonical=True)

    def code_of(self, user: str) -> int:
        return int(self.codes_of([user])[0])

    def codes_of(self, users) -> np.ndarray:
        """Codes for many ids at once; raises KeyError on the first unknown id."""
        q = np.asarray(list(users), dtype=object)
        if q.size == 0:
            return np.zeros(0, dtype=np.int64)
        idx = np.searchsorted(self.users, q)
        clipped = np.minimum(idx, max(self.users.size - 1, 0))
        ok = (idx < self.users.size) & (self.users[clipped] == q) if self.users.size else np.zeros(q.size, bool)
        if not ok.all():
            raise KeyError(q[np.flatnonzero(~ok)[0]])
        return idx.astype(np.int64)

    def with_aliases(self, aliases: dict[str, str]) -> tuple["CallTable", int]:
        """Canonicalize ids; returns the new table and the number of dropped self calls."""
        if not aliases:
            return self, 0
        mapped = np.array([aliases.get(u, u) for u in self.users], dtype=object)
        caller, callee = mapped[self.caller], mapped[self.callee]
        keep = caller != callee
        out = CallTable.from_columns(caller[keep], callee[keep], self.start[keep],
                                     self.end[keep], self.lat[keep], self.lon[keep])
        return out, int((~keep).sum())

    def write(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(CALL_HEADER) + "\n")
            u = self.users
            lines = [
                f"{u[a]},{u[b]},{s},{e},{la!r},{lo!r}\n"
                for a, b, s, e, la, lo in zip(self.caller.tolist(), self.callee.tolist(),
                                              self.start.tolist(), self.end.tolist(),
                                              self.lat.tolist(), self.lon.tolist())
            ]
            fh.writelines(lines)


def load_call_table(path, strict: bool = False, stats: ParseStats | None = None,
                    aliases: dict[str, str] | None = None) -> CallTable:
    """Bulk-load a call log into a :class:`CallTable`.

    Uses the same row rules as :func:`parse_call_log`. Self calls created by
    alias merging are dropped and logged.
    """
    stats = stats if stats is not None else ParseStats()
    callers, callees, starts, ends, lats, lons = [], [], [], [], [], []
    for line, row in _rows(path, CALL_HEADER):
        try:
            a, b, s, e, la, lo = _parse_call_row(row)
        except ValueError as exc:
            stats.reject(line, str(exc), strict)
            continue
        callers.append(a)
        callees.append(b)
        starts.append(s)
        ends.append(e)
        lats.append(la)
        lons.append(lo)
    stats.accepted += len(callers)
    if stats.rejected:
        log.warning("%s: %d rows rejected", Path(path).name, stats.rejected)
    table = CallTable.from_columns(callers, callees, np.array(starts, dtype=np.int64),
                                   np.array(ends, dtype=np.int64), np.array(lats),
                                   np.array(lons))
    if aliases:
        table, dropped = table.with_aliases(aliases)
        if dropped:
            log.info("dropped %d self calls after alias merge", dropped)
    return table


def unique_contacts(table: CallTable) -> np.ndarray:
    """Undirected distinct-contact count per user code."""
    if len(table) == 0:
        return np.zeros(table.n_users, dtype=np.int64)
    lo = np.minimum(table.caller, table.callee).astype(np.int64)
    hi = np.maximum(table.caller, table.callee).astype(np.int64)
    pairs = np.unique(lo * table.n_users + hi)
    a, b = pairs // table.n_users, pairs % table.n_users
    return np.bincount(np.concatenate([a, b]), minlength=table.n_users)


def filter_high_degree(records, max_unique_contacts: int | None = 500,
                       percentile: float | None = None):
    """Drop every call touching a user above the contact threshold.

    ``records`` is a :class:`CallTable` or a collection of :class:`CallRecord`;
    the result has the same kind. With ``percentile`` set, the threshold is
    that percentile of the degree distribution instead of an absolute count.
    Returns ``(filtered, sorted_removed_user_ids)``.
    """
    as_list = not isinstance(records, CallTable)
    if as_list:
        records = list(records)
    table = CallTable.from_records(records) if as_list else records
    deg = unique_contacts(table)
    if percentile is not None:
        active = deg[deg > 0]
        threshold = float(np.percentile(active, percentile)) if active.size else 0.0
    else:
        if max_unique_contacts is None or max_unique_contacts < 1:
            raise ValueError("max_unique_contacts must be >= 1")
        threshold = max_unique_contacts
    bad = deg > threshold
    removed = sorted(str(u) for u in table.users[bad])
    if as_list:
        gone = set(removed)
        return [r for r in records if r.caller not in gone and r.callee not in gone], removed
    keep = ~(bad[table.caller] | bad[table.callee])
    return table.take(keep), removed
