"""Analogy-based cost estimation: attribute distance, neighbor search and solution function.

Two jobs are compared on collection location, delivery location, date and
load size. The attribute distance is::

    D = sqrt(x1 * d(col_a, col_b) + x2 * d(del_a, del_b)
             + x3 * (t_b - t_a)**2 + x4 * (l_b - l_a)**2)

where ``d`` is the great-circle distance in km (entering unsquared). The
estimate for a probe is its load size times a weighted mean of the k nearest
neighbors' normalized costs (EUR per container).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .domain import JobRecord, id_key, normalized_cost
from .geo import haversine_km, haversine_matrix


class NoHistoryError(ValueError):
    """Raised when a probe has no eligible pool jobs to compare against."""

    def __init__(self, msg="no history"):
        super().__init__(msg)


class SolutionMode(str, Enum):
    """How neighbor normalized costs are weighted.

    ``proportional`` weights each neighbor by ``D_i / sum(D)`` (far neighbors
    count more); ``inverse_distance`` uses ``(1/D_i) / sum(1/D)``.
    """

    PROPORTIONAL = "proportional"
    INVERSE_DISTANCE = "inverse_distance"

    @classmethod
    def _missing_(cls, value):
        if value == "as_printed":
            return cls.PROPORTIONAL
        return None


@dataclass(frozen=True)
class AttributeWeights:
    collection: float = 1.0
    delivery: float = 1.0
    time: float = 1.0
    load: float = 1.0

    def __post_init__(self):
        for v in self.as_tuple():
            if not math.isfinite(v) or v < 0:
                raise ValueError("attribute weights must be finite and >= 0")

    def as_tuple(self) -> tuple:
        return (self.collection, self.delivery, self.time, self.load)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @classmethod
    def from_sequence(cls, values) -> "AttributeWeights":
        c, d, t, l = (float(v) for v in values)
        return cls(c, d, t, l)

    @classmethod
    def clamped(cls, values) -> "AttributeWeights":
        """Project a raw 4-vector onto the nonnegative orthant."""
        return cls.from_sequence(max(float(v), 0.0) for v in values)

    def scaled(self, c: float) -> "AttributeWeights":
        return AttributeWeights.from_sequence(c * v for v in self.as_tuple())


@dataclass(frozen=True)
class EstimatorConfig:
    k: int = 5
    weights: AttributeWeights = field(default_factory=AttributeWeights)
    mode: SolutionMode = SolutionMode.PROPORTIONAL
    exact_match_epsilon: float = 1e-9

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be an integer >= 1")
        object.__setattr__(self, "mode", SolutionMode(self.mode))


@dataclass(frozen=True)
class Neighbor:
    job_id: str
    distance: float
    normalized_cost: float


def attribute_distance(a: JobRecord, b: JobRecord, w: AttributeWeights) -> float:
    dc = haversine_km(a.collection, b.collection)
    dd = haversine_km(a.delivery, b.delivery)
    dt = float(b.date) - float(a.date)
    dl = b.load_size - a.load_size
    return math.sqrt(
        w.collection * dc + w.delivery * dd + w.time * (dt * dt) + w.load * (dl * dl)
    )


@dataclass
class Estimates:
    """Batch output of :meth:`PairwiseProblem.estimate` (one entry per probe)."""

    values: np.ndarray        # EUR, NaN where the probe had no eligible pool
    neighbor_index: np.ndarray  # (m, k) pool column indices, -1 padded
    neighbor_distance: np.ndarray
    neighbor_count: np.ndarray
    pool_size: np.ndarray
    exact_match: np.ndarray


class PairwiseProblem:
    """Probe-by-pool geometry, precomputed once and reused across weightings.

    The great-circle terms do not depend on the attribute weights, so training
    (which evaluates thousands of weight vectors against fixed sets) computes
    them once here.

    Parameters
    ----------
    pool : sequence of JobRecord
        Candidate neighbors. Reordered internally by id.
    probes : sequence of JobRecord
        Jobs to estimate, kept in the given order.
    cutoffs : array-like, optional
        Per-probe latest admissible pool date (inclusive). ``None`` admits all.
    exclude_self : bool
        Never use a pool job with the same id as the probe.
    """

    def __init__(self, pool: Sequence[JobRecord], probes: Sequence[JobRecord],
                 cutoffs=None, exclude_self: bool = True):
        self.pool = sorted(pool, key=lambda j: id_key(j.id))
        self.probes = list(probes)
        pool, probes = self.pool, self.probes
        self.pool_ids = [j.id for j in pool]
        self.pool_t = np.array([j.date for j in pool], dtype=np.float64)
        self.pool_l = np.array([j.load_size for j in pool], dtype=np.float64)
        self.pool_nc = np.array([normalized_cost(j) for j in pool], dtype=np.float64)
        self.pool_cost = np.array([j.cost_eur for j in pool], dtype=np.float64)
        self.probe_t = np.array([j.date for j in probes], dtype=np.float64)
        self.probe_l = np.array([j.load_size for j in probes], dtype=np.float64)
        self.hav_col = haversine_matrix(
            [j.collection.lat for j in probes], [j.collection.lng for j in probes],
            [j.collection.lat for j in pool], [j.collection.lng for j in pool],
        ).reshape(len(probes), len(pool))
        self.hav_del = haversine_matrix(
            [j.delivery.lat for j in probes], [j.delivery.lng for j in probes],
            [j.delivery.lat for j in pool], [j.delivery.lng for j in pool],
        ).reshape(len(probes), len(pool))
        if cutoffs is None:
            self.cutoff = np.full(len(probes), np.inf)
        else:
            self.cutoff = np.asarray(cutoffs, dtype=np.float64).reshape(len(probes))
        position = {jid: i for i, jid in enumerate(self.pool_ids)}
        self.exclude = np.array(
            [position.get(j.id, -1) if exclude_self else -1 for j in probes],
            dtype=np.int64,
        )

    def __len__(self):
        return len(self.probes)

    def neighbors(self, weights, k: int):
        w = np.ascontiguousarray(weights, dtype=np.float64)
        m = len(self.probes)
        idx = np.full((m, k), -1, dtype=np.int64)
        dist = np.full((m, k), np.inf)
        cnt = np.zeros(m, dtype=np.int64)
        pool_size = np.zeros(m, dtype=np.int64)
        _kernels.scan_neighbors(
            self.hav_col, self.hav_del, self.probe_t, self.pool_t, self.probe_l,
            self.pool_l, w, k, self.cutoff, self.exclude, idx, dist, cnt, pool_size,
        )
        return idx, dist, cnt, pool_size

    def estimate(self, weights, k: int, mode=SolutionMode.PROPORTIONAL,
                 exact_match_epsilon: float = 1e-9) -> Estimates:
        """Estimate every probe with raw weight vector ``weights`` (length 4)."""
        idx, dist, cnt, pool_size = self.neighbors(weights, k)
        m = len(self.probes)
        est = np.empty(m)
        exact = np.zeros(m, dtype=np.bool_)
        code = (_kernels.MODE_PROPORTIONAL if SolutionMode(mode) is SolutionMode.PROPORTIONAL
                else _kernels.MODE_INVERSE)
        _kernels.solve(idx, dist, cnt, self.pool_nc, self.pool_cost, self.pool_l,
                       self.probe_l, code, float(exact_match_epsilon), est, exact)
        return Estimates(est, idx, dist, cnt, pool_size, exact)


def _single(pool, probe, cfg):
    if not pool:
        raise NoHistoryError()
    problem = PairwiseProblem(pool, [probe], exclude_self=False)
    return problem, problem.estimate(cfg.weights.as_array(), cfg.k, cfg.mode,
                                     cfg.exact_match_epsilon)


def nearest_neighbors(pool: Sequence[JobRecord], probe: JobRecord,
                      cfg: EstimatorConfig) -> list:
    """The ``min(k, len(pool))`` pool jobs nearest the probe, sorted by (D, id)."""
    problem, res = _single(pool, probe, cfg)
    n = int(res.neighbor_count[0])
    return [
        Neighbor(problem.pool_ids[c], float(res.neighbor_distance[0, r]),
                 float(problem.pool_nc[c]))
        for r, c in enumerate(res.neighbor_index[0, :n])
    ]


def estimate_cost(pool: Sequence[JobRecord], probe: JobRecord,
                  cfg: EstimatorConfig) -> float:
    """Estimated cost (EUR) of ``probe`` by analogy with ``pool``.

    Any neighbor within ``exact_match_epsilon`` short-circuits the weighting:
    the estimate becomes the mean normalized cost of those exact matches times
    the probe's load size. Throughout, a neighbor with exactly the probe's load
    contributes its recorded cost rather than ``(cost / load) * load``, which
    keeps duplicates exact in floating point.
    """
    _, res = _single(pool, probe, cfg)
    return float(res.values[0])
