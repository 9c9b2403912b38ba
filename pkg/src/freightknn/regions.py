"""Country labels and coarse region classes for jobs.

Real reverse geocoding is out of scope. When a job carries no country label
the label is derived from a 5-degree lat/lng grid cell, and region classes
fall back to rough bounding boxes.
"""

from __future__ import annotations

import math

GRID_DEGREES = 5.0

IRELAND = "ireland"
UK = "uk"
OTHER_EU = "other_eu"
OTHER_EUROPE = "other_europe"
REST_OF_WORLD = "rest_of_world"
REGIONS = (IRELAND, UK, OTHER_EU, OTHER_EUROPE, REST_OF_WORLD)

EU_MEMBERS = frozenset(
    "AT BE BG HR CY CZ DK EE FI FR DE GR EL HU IT LV LT LU MT NL PL PT RO SK SI ES SE".split()
)
OTHER_EUROPEAN = frozenset(
    "AL AD AM AZ BA BY CH FO GE GI IS LI MC MD ME MK NO RS RU SM TR UA VA XK".split()
)

# (lat_min, lat_max, lng_min, lng_max)
_IRELAND_BOX = (51.3, 55.5, -10.7, -5.4)
_GB_BOX = (49.8, 61.0, -8.7, 1.9)
_EUROPE_BOX = (34.0, 72.0, -25.0, 45.0)


def grid_label(point) -> str:
    return "grid:{}:{}".format(
        int(math.floor(point.lat / GRID_DEGREES)), int(math.floor(point.lng / GRID_DEGREES))
    )


def country_label(job, side: str) -> str:
    """Country label for the ``"collection"`` or ``"delivery"`` end of a job."""
    if side == "collection":
        label, point = job.collection_country, job.collection
    elif side == "delivery":
        label, point = job.delivery_country, job.delivery
    else:
        raise ValueError(f"unknown side {side!r}")
    return label.upper() if label else grid_label(point)


def _in(box, point) -> bool:
    return box[0] <= point.lat <= box[1] and box[2] <= point.lng <= box[3]


def region_of(label: str, point) -> str:
    """Region class of a country label; grid labels use the point's coordinates.

    Northern Ireland (``GB-NIR``) counts with Ireland, matching the
    "United Kingdom (exc. Northern Ireland)" grouping.
    """
    code = label.upper()
    if not code.startswith("GRID:"):
        if code == "IE" or code in ("GB-NIR", "XI"):
            return IRELAND
        if code in ("GB", "UK"):
            return UK
        if code in EU_MEMBERS:
            return OTHER_EU
        if code in OTHER_EUROPEAN:
            return OTHER_EUROPE
        return REST_OF_WORLD
    if _in(_IRELAND_BOX, point):
        return IRELAND
    if _in(_GB_BOX, point):
        return UK
    if _in(_EUROPE_BOX, point):
        return OTHER_EU
    return REST_OF_WORLD


def job_region(job, side: str) -> str:
    point = job.collection if side == "collection" else job.delivery
    return region_of(country_label(job, side), point)
