"""Great-circle distances on a spherical Earth."""

from __future__ import annotations

import numpy as np

EARTH_RADIUS_KM = 6371.0


def _haversine(lat1, lng1, lat2, lng2):
    # abs() on the differences keeps the result exactly symmetric in its endpoints
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    half_dphi = np.radians(np.abs(lat2 - lat1)) / 2.0
    half_dlmb = np.radians(np.abs(lng2 - lng1)) / 2.0
    h = np.square(np.sin(half_dphi)) + np.cos(phi1) * np.cos(phi2) * np.square(np.sin(half_dlmb))
    h = np.minimum(h, 1.0)
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))


def haversine_km(p1, p2) -> float:
    """Great-circle distance in km between two :class:`~freightknn.domain.GeoPoint`."""
    return float(_haversine(np.float64(p1.lat), np.float64(p1.lng),
                            np.float64(p2.lat), np.float64(p2.lng)))


def haversine_matrix(lat1, lng1, lat2, lng2) -> np.ndarray:
    """Pairwise distances (km) between points ``1`` (rows) and points ``2`` (columns).

    Entry ``[i, j]`` is bit-identical to ``haversine_km`` on the same pair.
    """
    lat1 = np.asarray(lat1, dtype=np.float64)[:, None]
    lng1 = np.asarray(lng1, dtype=np.float64)[:, None]
    lat2 = np.asarray(lat2, dtype=np.float64)[None, :]
    lng2 = np.asarray(lng2, dtype=np.float64)[None, :]
    return _haversine(lat1, lng1, lat2, lng2)


def crow_distance_km(job) -> float:
    """Straight-line (great-circle) distance from collection to delivery."""
    return haversine_km(job.collection, job.delivery)
