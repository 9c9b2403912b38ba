"""Deterministic synthetic freight logs.

Each job belongs to a lane (collection hub to delivery hub). Its cost is::

    (base_rate + per_km_rate * crow_km) * load**load_exponent
        * (1 + annual_trend * years) * (1 + cost_noise)

and its revenue is ``cost * (1 + margin) * (1 + margin_noise)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import date
from typing import Optional

import numpy as np

from .domain import DEFAULT_DATUM, Dataset, Direction, GeoPoint, JobRecord
from .geo import EARTH_RADIUS_KM, haversine_km

KM_PER_DEGREE = EARTH_RADIUS_KM * math.pi / 180.0
PARCEL_MAX = 1.0 / 26.0


@dataclass(frozen=True)
class Lane:
    collection: GeoPoint
    delivery: GeoPoint
    base_rate: float
    per_km_rate: float
    collection_country: Optional[str] = None
    delivery_country: Optional[str] = None
    direction: Direction = Direction.EXPORT

    def to_dict(self) -> dict:
        return {
            "collection": [self.collection.lat, self.collection.lng],
            "delivery": [self.delivery.lat, self.delivery.lng],
            "base_rate": self.base_rate,
            "per_km_rate": self.per_km_rate,
            "collection_country": self.collection_country,
            "delivery_country": self.delivery_country,
            "direction": Direction(self.direction).value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Lane":
        return cls(
            collection=GeoPoint(*d["collection"]),
            delivery=GeoPoint(*d["delivery"]),
            base_rate=float(d["base_rate"]),
            per_km_rate=float(d["per_km_rate"]),
            collection_country=d.get("collection_country"),
            delivery_country=d.get("delivery_country"),
            direction=Direction(d.get("direction", "export")),
        )


def _lane(c, cc, d, dc, base, per_km, direction):
    return Lane(GeoPoint(*c), GeoPoint(*d), base, per_km, cc, dc, Direction(direction))


_DUBLIN = (53.3498, -6.2603)

PRESET_LANES = (
    _lane(_DUBLIN, "IE", (51.5074, -0.1278), "GB", 900.0, 1.10, "export"),
    _lane(_DUBLIN, "IE", (51.9244, 4.4777), "NL", 1400.0, 1.30, "export"),
    _lane((53.5511, 9.9937), "DE", _DUBLIN, "IE", 1700.0, 1.20, "import"),
    _lane((51.8985, -8.4756), "IE", (48.8566, 2.3522), "FR", 1500.0, 1.40, "export"),
    _lane((45.4642, 9.1900), "IT", _DUBLIN, "IE", 2300.0, 1.00, "import"),
    _lane(_DUBLIN, "IE", (40.4168, -3.7038), "ES", 2100.0, 1.15, "export"),
    _lane((52.2297, 21.0122), "PL", _DUBLIN, "IE", 2000.0, 0.90, "import"),
    _lane(_DUBLIN, "IE", (54.5973, -5.9301), "GB-NIR", 350.0, 1.60, "domestic"),
    _lane((59.9139, 10.7522), "NO", _DUBLIN, "IE", 2600.0, 1.25, "import"),
    _lane(_DUBLIN, "IE", (31.2304, 121.4737), "CN", 3200.0, 0.25, "export"),
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    ``load_mix`` weights the parcel (under one pallet), pallet-range (up to
    half a container) and full-load (half to one container) components.
    Setting ``fixed_load`` bypasses the mixture. ``lanes`` overrides the
    preset lane list; otherwise the first ``n_lanes`` presets are used.
    """

    n_jobs: int = 2000
    n_lanes: int = 5
    date_span_days: int = 730
    jitter_km: float = 15.0
    load_mix: tuple = (0.4, 0.4, 0.2)
    fixed_load: Optional[float] = None
    load_exponent: float = 1.0
    cost_noise: float = 0.10
    annual_trend: float = 0.0
    margin: float = 0.151
    margin_noise: float = 0.05
    lane_weights: Optional[tuple] = None
    lanes: Optional[tuple] = None
    datum: date = DEFAULT_DATUM
    seed: int = 0

    def __post_init__(self):
        if self.n_jobs < 0:
            raise ValueError("n_jobs must be >= 0")
        if min(self.jitter_km, self.cost_noise, self.margin_noise) < 0:
            raise ValueError("noise scales must be >= 0")
        if self.margin <= -1:
            raise ValueError("margin must exceed -1")
        if len(self.load_mix) != 3 or min(self.load_mix) < 0 or sum(self.load_mix) <= 0:
            raise ValueError("load_mix needs three nonnegative weights")
        if self.lanes is None and not 1 <= self.n_lanes <= len(PRESET_LANES):
            raise ValueError(f"n_lanes must be in 1..{len(PRESET_LANES)} without explicit lanes")

    def resolved_lanes(self) -> tuple:
        if self.lanes is not None:
            return tuple(self.lanes)
        return PRESET_LANES[: self.n_lanes]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["load_mix"] = list(self.load_mix)
        d["lane_weights"] = None if self.lane_weights is None else list(self.lane_weights)
        d["lanes"] = None if self.lanes is None else [l.to_dict() for l in self.lanes]
        d["datum"] = self.datum.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if d.get("lanes") is not None:
            d["lanes"] = tuple(Lane.from_dict(l) for l in d["lanes"])
        if "datum" in d:
            d["datum"] = date.fromisoformat(d["datum"])
        for key in ("load_mix", "lane_weights"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _jitter(rng, hub: GeoPoint, sigma_km: float) -> GeoPoint:
    north, east = rng.normal(0.0, sigma_km, 2) if sigma_km > 0 else (0.0, 0.0)
    lat = hub.lat + north / KM_PER_DEGREE
    coslat = max(math.cos(math.radians(hub.lat)), 1e-6)
    lng = hub.lng + east / (KM_PER_DEGREE * coslat)
    lat = min(90.0, max(-90.0, lat))
    if not -180.0 <= lng <= 180.0:
        lng = (lng + 180.0) % 360.0 - 180.0
    return GeoPoint(float(lat), float(lng))


def _draw_load(rng, spec: SyntheticSpec) -> float:
    if spec.fixed_load is not None:
        return float(spec.fixed_load)
    mix = np.asarray(spec.load_mix, dtype=np.float64)
    comp = rng.choice(3, p=mix / mix.sum())
    lo, hi = ((0.001, PARCEL_MAX), (PARCEL_MAX, 0.5), (0.5, 1.0))[comp]
    return float(rng.uniform(lo, hi))


def generate(spec: SyntheticSpec) -> Dataset:
    """Draw a dataset; identical specs (seed included) give identical datasets."""
    rng = np.random.default_rng(spec.seed)
    lanes = spec.resolved_lanes()
    if spec.lane_weights is not None:
        weights = np.asarray(spec.lane_weights, dtype=np.float64)
        if weights.size != len(lanes) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("lane_weights must match the lanes and be nonnegative")
    else:
        weights = np.ones(len(lanes))
    counts = rng.multinomial(spec.n_jobs, weights / weights.sum()) if spec.n_jobs else [0] * len(lanes)

    jobs = []
    serial = 0
    for lane, count in zip(lanes, counts):
        for _ in range(int(count)):
            serial += 1
            day = int(rng.integers(0, max(spec.date_span_days, 1)))
            col = _jitter(rng, lane.collection, spec.jitter_km)
            dlv = _jitter(rng, lane.delivery, spec.jitter_km)
            load = _draw_load(rng, spec)
            crow = haversine_km(col, dlv)
            noise = max(rng.normal(0.0, spec.cost_noise), -0.9) if spec.cost_noise > 0 else 0.0
            cost = (lane.base_rate + lane.per_km_rate * crow) * load ** spec.load_exponent
            cost *= (1.0 + spec.annual_trend * day / 365.25) * (1.0 + noise)
            m_noise = rng.normal(0.0, spec.margin_noise) if spec.margin_noise > 0 else 0.0
            revenue = max(cost * (1.0 + spec.margin) * (1.0 + m_noise), 0.0)
            jobs.append(JobRecord(
                id=f"J{serial:06d}", date=day, collection=col, delivery=dlv,
                load_size=max(load, 0.001), cost_eur=max(cost, 0.01), revenue_eur=revenue,
                direction=lane.direction,
                collection_country=lane.collection_country,
                delivery_country=lane.delivery_country,
            ))
    return Dataset(tuple(jobs), spec.datum)
