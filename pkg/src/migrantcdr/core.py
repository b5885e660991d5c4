"""Shared value types, day arithmetic and great-circle distance."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
SECONDS_PER_DAY = 86400


class RecordError(ValueError):
    """Raised when a value violates a record invariant."""


def _check_coords(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise RecordError(f"invalid coordinates ({lat}, {lon})")


@dataclass(frozen=True)
class Location:
    lat: float
    lon: float

    def __post_init__(self):
        _check_coords(self.lat, self.lon)


@dataclass(frozen=True)
class CallRecord:
    """One directed call; duration is ``end - start`` seconds."""

    caller: str
    callee: str
    start: int
    end: int
    tower_lat: float
    tower_lon: float

    def __post_init__(self):
        if self.end < self.start:
            raise RecordError("end before start")
        if self.caller == self.callee:
            raise RecordError("self call")
        _check_coords(self.tower_lat, self.tower_lon)

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def location(self) -> Location:
        return Location(self.tower_lat, self.tower_lon)


class Sex(str, enum.Enum):
    M = "M"
    F = "F"


@dataclass(frozen=True)
class UserProfile:
    user: str
    birth_year: int
    sex: Sex
    birth_province: str
    is_local: bool


@dataclass(frozen=True, order=True)
class TimeWindow:
    """Half-open day range ``[start_day, end_day)``."""

    start_day: int
    end_day: int

    def __post_init__(self):
        if self.end_day <= self.start_day:
            raise ValueError(f"empty window [{self.start_day}, {self.end_day})")

    def __contains__(self, day: int) -> bool:
        return self.start_day <= day < self.end_day

    @property
    def days(self) -> int:
        return self.end_day - self.start_day

    def __str__(self) -> str:
        return f"{self.start_day}-{self.end_day}"


class CohortLabel(str, enum.Enum):
    LOCAL = "Local"
    STAYING = "StayingMigrant"
    LEAVING = "LeavingMigrant"
    EXCLUDED = "Excluded"


def day_index(timestamp: int, epoch: int) -> int:
    """Whole days elapsed between ``epoch`` and ``timestamp``."""
    if timestamp < epoch:
        raise ValueError("pre-epoch record")
    return (timestamp - epoch) // SECONDS_PER_DAY


def day_indices(timestamps, epoch: int) -> np.ndarray:
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size and ts.min() < epoch:
        raise ValueError("pre-epoch record")
    return (ts - epoch) // SECONDS_PER_DAY


def geo_distance(a: Location, b: Location) -> float:
    """Haversine distance in km on a sphere of radius 6371 km."""
    return float(haversine(a.lat, a.lon, b.lat, b.lon))


def haversine(lat1, lon1, lat2, lon2):
    """Vectorized haversine distance in km; accepts scalars or arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2, dtype=float) - lon1)
    h = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def km_per_degree_lat() -> float:
    return EARTH_RADIUS_KM * math.pi / 180.0
