"""Walk-forward evaluation of the analogy estimator on the test set.

Test jobs are estimated oldest first. The knowledge pool for a probe holds
every historical and training job dated at least ``lag_days`` before it
(optionally also earlier test jobs under the same rule, as a firm would once
those jobs are invoiced).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import stats
from .domain import Dataset, Segmentation, id_key
from .knn import AttributeWeights, PairwiseProblem, SolutionMode
from .regions import REGIONS, job_region

LOAD_CLASSES = ("under_one_pallet", "pallet_to_half_load", "half_load_and_above")
ONE_PALLET = 1.0 / 26.0
HALF_LOAD = 0.5
OUTLIER_IQR_MULTIPLE = 10.0
PROBE_CHUNK = 256


@dataclass(frozen=True)
class TrialConfig:
    """Settings for one walk-forward run.

    ``weights_source`` is a label recorded in the report (``"trained"`` or
    ``"all_ones"``); the harness itself only looks at ``weights``.
    """

    k: int
    weights: AttributeWeights = field(default_factory=AttributeWeights)
    weights_source: str = "all_ones"
    mode: SolutionMode = SolutionMode.PROPORTIONAL
    lag_days: int = 30
    include_estimated_test_jobs: bool = False
    exact_match_epsilon: float = 1e-9
    label: str = ""

    def __post_init__(self):
        if self.lag_days < 0:
            raise ValueError("lag_days must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "mode", SolutionMode(self.mode))

    @classmethod
    def trained(cls, model, **kw) -> "TrialConfig":
        return cls(k=model.k, weights=model.weights, weights_source="trained",
                   mode=model.mode, **kw)

    @classmethod
    def untrained(cls, k: int, **kw) -> "TrialConfig":
        return cls(k=k, weights=AttributeWeights(), weights_source="all_ones", **kw)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": list(self.weights.as_tuple()),
            "weights_source": self.weights_source,
            "mode": self.mode.value,
            "lag_days": self.lag_days,
            "include_estimated_test_jobs": self.include_estimated_test_jobs,
            "exact_match_epsilon": self.exact_match_epsilon,
            "label": self.label,
        }


@dataclass(frozen=True)
class TrialRow:
    id: str
    date: int
    estimate: float
    actual: float
    error_eur: float
    error_pct: float
    ape: float
    pool_size: int
    underfilled: bool
    exact_match: bool
    neighbor_ids: tuple
    outlier: bool = False


@dataclass(frozen=True)
class WeeklyPoint:
    week: int
    n: int
    mape: float


@dataclass
class TrialReport:
    config: TrialConfig
    rows: list
    skipped: list
    overall: Optional[stats.ErrorStats] = None
    overall_excluding_outliers: Optional[stats.ErrorStats] = None
    trend: Optional[stats.SlopeTest] = None
    weekly: list = field(default_factory=list)
    outlier_ids: list = field(default_factory=list)
    segments: dict = field(default_factory=dict)

    @property
    def mape(self) -> float:
        return stats.mape([r.actual for r in self.rows], [r.estimate for r in self.rows])

    def apes(self) -> dict:
        return {r.id: r.ape for r in self.rows}

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_rows": len(self.rows),
            "overall": self.overall.to_dict() if self.overall else None,
            "overall_excluding_outliers": (self.overall_excluding_outliers.to_dict()
                                           if self.overall_excluding_outliers else None),
            "trend": self.trend.to_dict() if self.trend else None,
            "weekly": [asdict(p) for p in self.weekly],
            "outlier_ids": list(self.outlier_ids),
            "segments": self.segments,
            "skipped": [{"id": i, "reason": r} for i, r in self.skipped],
            "rows": [_row_dict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "TrialReport":
        """Rebuild config, rows and skip list; summary fields are recomputed on demand."""
        c = d["config"]
        cfg = TrialConfig(
            k=int(c["k"]), weights=AttributeWeights.from_sequence(c["weights"]),
            weights_source=c["weights_source"], mode=c["mode"], lag_days=int(c["lag_days"]),
            include_estimated_test_jobs=bool(c["include_estimated_test_jobs"]),
            exact_match_epsilon=float(c["exact_match_epsilon"]), label=c.get("label", ""),
        )
        rows = [TrialRow(**{**r, "neighbor_ids": tuple(r["neighbor_ids"])}) for r in d["rows"]]
        skipped = [(s["id"], s["reason"]) for s in d.get("skipped", [])]
        return cls(config=cfg, rows=rows, skipped=skipped,
                   outlier_ids=list(d.get("outlier_ids", [])))

    def rows_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "date", "estimate", "actual", "error_eur", "error_pct", "ape",
                    "pool_size", "underfilled", "exact_match", "outlier", "neighbor_ids"])
        for r in self.rows:
            w.writerow([r.id, r.date, repr(r.estimate), repr(r.actual), repr(r.error_eur),
                        repr(r.error_pct), repr(r.ape), r.pool_size, int(r.underfilled),
                        int(r.exact_match), int(r.outlier), " ".join(r.neighbor_ids)])
        return buf.getvalue()

    def weekly_csv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["week", "n", "mape"])
        for p in self.weekly:
            w.writerow([p.week, p.n, repr(p.mape)])
        return buf.getvalue()


def _row_dict(r: TrialRow) -> dict:
    d = asdict(r)
    d["neighbor_ids"] = list(r.neighbor_ids)
    return d


def _pool_jobs(segmentation: Segmentation, dataset: Dataset, cfg: TrialConfig):
    ids = list(segmentation.historical) + list(segmentation.training)
    if cfg.include_estimated_test_jobs:
        ids += list(segmentation.test)
    return dataset.subset(ids)


def _estimate_block(pool, probes, cfg: TrialConfig):
    cutoffs = [p.date - cfg.lag_days for p in probes]
    problem = PairwiseProblem(pool, probes, cutoffs=cutoffs, exclude_self=True)
    res = problem.estimate(cfg.weights.as_array(), cfg.k, cfg.mode, cfg.exact_match_epsilon)
    out = []
    for i, probe in enumerate(probes):
        n = int(res.neighbor_count[i])
        nbrs = tuple(problem.pool_ids[c] for c in res.neighbor_index[i, :n])
        out.append((probe, float(res.values[i]), n, int(res.pool_size[i]),
                    bool(res.exact_match[i]), nbrs))
    return out


def run_trial(segmentation: Segmentation, dataset: Dataset, cfg: TrialConfig,
              workers: int = 1) -> TrialReport:
    """Walk-forward estimate of every test job; see the module docstring.

    Probes with no eligible history are skipped and listed in
    ``report.skipped``; pools smaller than k are used and marked underfilled.
    """
    if not segmentation.test:
        raise ValueError("empty test set")
    probes = sorted(dataset.subset(segmentation.test), key=lambda j: (j.date, id_key(j.id)))
    pool = _pool_jobs(segmentation, dataset, cfg)
    blocks = [probes[s:s + PROBE_CHUNK] for s in range(0, len(probes), PROBE_CHUNK)]
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: _estimate_block(pool, b, cfg), blocks))
    else:
        parts = [_estimate_block(pool, b, cfg) for b in blocks]

    rows, skipped = [], []
    for probe, est, n, pool_size, exact, nbrs in (x for part in parts for x in part):
        if n == 0:
            skipped.append((probe.id, "no eligible history"))
            continue
        err = est - probe.cost_eur
        pct = 100.0 * err / probe.cost_eur
        rows.append(TrialRow(
            id=probe.id, date=probe.date, estimate=est, actual=probe.cost_eur,
            error_eur=err, error_pct=pct, ape=abs(pct), pool_size=pool_size,
            underfilled=pool_size < cfg.k, exact_match=exact, neighbor_ids=nbrs,
        ))

    report = TrialReport(config=cfg, rows=rows, skipped=skipped)
    if rows:
        weekly, outliers = weekly_mape_series(report)
        flagged = set(outliers)
        report.rows = [replace(r, outlier=r.id in flagged) for r in rows]
        report.weekly = weekly
        report.outlier_ids = outliers
        report.overall = stats.error_stats([r.actual for r in rows], [r.estimate for r in rows])
        kept = [r for r in rows if r.id not in flagged]
        if kept:
            report.overall_excluding_outliers = stats.error_stats(
                [r.actual for r in kept], [r.estimate for r in kept])
        if len(rows) >= 3 and len({r.date for r in rows}) > 1:
            report.trend = trend_test(report)
        report.segments = segment_error_report(report, dataset)
    return report


def _class_stats(apes) -> dict:
    n = len(apes)
    if n == 0:
        return {"n": 0, "mape": None, "se": None, "ci": [None, None]}
    m = float(np.mean(apes))
    if n < 2:
        return {"n": 1, "mape": m, "se": None, "ci": [None, None]}
    m, se, ci = stats.mean_ci(apes)
    return {"n": n, "mape": m, "se": se, "ci": [ci[0], ci[1]]}


def load_class(load_size: float) -> str:
    if load_size < ONE_PALLET:
        return LOAD_CLASSES[0]
    if load_size < HALF_LOAD:
        return LOAD_CLASSES[1]
    return LOAD_CLASSES[2]


def segment_error_report(report: TrialReport, dataset: Dataset) -> dict:
    """MAPE with SE and 95% CI by load-size class and by delivery / collection region.

    Region tables carry the five base regions (a partition) plus the
    ``total_europe`` and direction totals.
    """
    by_load = {c: [] for c in LOAD_CLASSES}
    by_del = {r: [] for r in REGIONS}
    by_col = {r: [] for r in REGIONS}
    exports, imports = [], []
    for r in report.rows:
        job = dataset.get(r.id)
        by_load[load_class(job.load_size)].append(r.ape)
        by_del[job_region(job, "delivery")].append(r.ape)
        by_col[job_region(job, "collection")].append(r.ape)
        if job.direction.value == "export":
            exports.append(r.ape)
        elif job.direction.value == "import":
            imports.append(r.ape)

    def region_table(groups, total_label, total):
        table = {r: _class_stats(v) for r, v in groups.items()}
        europe = [a for r, v in groups.items() if r != "rest_of_world" for a in v]
        table["total_europe"] = _class_stats(europe)
        table[total_label] = _class_stats(total)
        return table

    return {
        "load_size": {c: _class_stats(v) for c, v in by_load.items()},
        "delivery_region": region_table(by_del, "total_export", exports),
        "collection_region": region_table(by_col, "total_import", imports),
    }


def trend_test(report: TrialReport) -> stats.SlopeTest:
    """Least-squares slope of per-job APE (percent) against job date (days)."""
    if len(report.rows) < 3:
        raise ValueError("trend test needs at least 3 rows")
    return stats.ols_slope_test([r.date for r in report.rows], [r.ape for r in report.rows])


def weekly_mape_series(report: TrialReport):
    """Weekly MAPE buckets from the first test date, plus extreme-outlier ids.

    A job is flagged when its APE exceeds ``median + 10 * IQR`` of all APEs.
    Empty weeks do not appear in the series.

    Returns
    -------
    (list of WeeklyPoint, list of str)
    """
    rows = report.rows
    if not rows:
        raise ValueError("empty report")
    first = min(r.date for r in rows)
    buckets = {}
    for r in rows:
        buckets.setdefault((r.date - first) // 7, []).append(r.ape)
    series = [WeeklyPoint(int(w), len(v), float(np.mean(v))) for w, v in sorted(buckets.items())]
    apes = [r.ape for r in rows]
    med = stats.percentile(apes, 0.5)
    iqr = stats.percentile(apes, 0.75) - stats.percentile(apes, 0.25)
    limit = med + OUTLIER_IQR_MULTIPLE * iqr
    flagged = [r.id for r in rows if r.ape > limit]
    return series, flagged


@dataclass(frozen=True)
class Comparison:
    k: int
    trained_mape: float
    untrained_mape: float
    t: float
    p_value: float
    reject: bool
    conclusion: str

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["t"]):
            d["t"] = "inf" if d["t"] > 0 else "-inf"
        return d


def compare_reports(trained: TrialReport, untrained: TrialReport,
                    sided=stats.Sided.B_LESS_THAN_A, level: float = 0.95) -> Comparison:
    """Paired t test of per-job APE, untrained minus trained.

    The one-sided default tests whether trained APE is lower.
    """
    a, b = untrained.apes(), trained.apes()
    if set(a) != set(b):
        raise ValueError("reports cover different job ids")
    ids = sorted(a, key=id_key)
    t, p = stats.paired_t_test([a[i] for i in ids], [b[i] for i in ids], sided)
    reject = p < 1.0 - level
    return Comparison(
        k=trained.config.k,
        trained_mape=trained.mape,
        untrained_mape=untrained.mape,
        t=t, p_value=p, reject=reject,
        conclusion="reject H0" if reject else "fail to reject H0",
    )


def audit_chronology(report: TrialReport, dataset: Dataset) -> list:
    """Rows whose neighbors violate the lag rule; an empty list means clean."""
    lag = report.config.lag_days
    bad = []
    for r in report.rows:
        for nid in r.neighbor_ids:
            if nid == r.id or dataset.get(nid).date > r.date - lag:
                bad.append((r.id, nid))
    return bad
