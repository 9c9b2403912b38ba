"""Forward-stepwise linear regression baseline and the min-combination forecast.

Predictor groups (each numeric feature, and each categorical feature as a
whole block of indicators) enter one at a time, choosing at every step the
group that lowers ``AIC = n ln(RSS/n) + 2p`` the most, until no group helps.

Data preparation is a transparent stand-in for automatic preprocessing:
numeric predictors are clamped at ``mean +/- z_cap * sd`` before fitting, and
category levels seen fewer than ``rare_threshold`` times share an ``OTHER``
level.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .geo import crow_distance_km
from .regions import country_label

OTHER = "OTHER"
NUMERIC_FEATURES = ("load_size", "crow_distance_km", "date")
CATEGORICAL_FEATURES = ("collection_country", "delivery_country")

# Residual sums below this fraction of sum(y^2) are numerically zero.
_RSS_FLOOR = 1e-20


@dataclass(frozen=True)
class FeatureSpec:
    numeric: tuple = NUMERIC_FEATURES
    categorical: tuple = CATEGORICAL_FEATURES
    rare_threshold: int = 10
    z_cap: float = 3.0

    def __post_init__(self):
        if self.rare_threshold < 1:
            raise ValueError("rare_threshold must be >= 1")
        if not self.z_cap > 0:
            raise ValueError("z_cap must be > 0")
        unknown = (set(self.numeric) - set(NUMERIC_FEATURES)) | (
            set(self.categorical) - set(CATEGORICAL_FEATURES))
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")


def _numeric_value(job, name: str) -> float:
    if name == "load_size":
        return float(job.load_size)
    if name == "crow_distance_km":
        return crow_distance_km(job)
    return float(job.date)


def _category(job, name: str) -> str:
    return country_label(job, "collection" if name == "collection_country" else "delivery")


@dataclass(frozen=True)
class FeatureDictionaries:
    """Category levels captured from training data; ``OTHER`` is always last."""

    levels: dict

    @classmethod
    def build(cls, jobs, spec: FeatureSpec) -> "FeatureDictionaries":
        levels = {}
        for name in spec.categorical:
            counts = Counter(_category(j, name) for j in jobs)
            kept = sorted(c for c, n in counts.items() if n >= spec.rare_threshold and c != OTHER)
            levels[name] = tuple(kept) + (OTHER,)
        return cls(levels)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.levels.items()}


def feature_layout(spec: FeatureSpec, dictionaries: FeatureDictionaries) -> dict:
    """Map each predictor group to its column positions in the feature vector."""
    layout, pos = {}, 0
    for name in spec.numeric:
        layout[name] = [pos]
        pos += 1
    for name in spec.categorical:
        width = len(dictionaries.levels[name])
        layout[name] = list(range(pos, pos + width))
        pos += width
    return layout


def build_features(job, spec: FeatureSpec, dictionaries: FeatureDictionaries) -> np.ndarray:
    """Numeric features unchanged, then a full one-hot block per categorical.

    Rare or unseen categories light the ``OTHER`` indicator.
    """
    out = [_numeric_value(job, name) for name in spec.numeric]
    for name in spec.categorical:
        levels = dictionaries.levels[name]
        cat = _category(job, name)
        hot = levels.index(cat) if cat in levels[:-1] else len(levels) - 1
        out.extend(1.0 if i == hot else 0.0 for i in range(len(levels)))
    return np.array(out, dtype=np.float64)


def trim_outliers(column, z_cap: float = 3.0):
    """Clamp values beyond ``mean +/- z_cap * sd`` to that boundary.

    Columns with fewer than three values are returned unchanged.
    """
    x = np.asarray(column, dtype=np.float64)
    if x.size < 3:
        return x.copy()
    mu = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return x.copy()
    return np.clip(x, mu - z_cap * sd, mu + z_cap * sd)


def _independent_columns(X: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Mask of columns kept when scanning left to right and skipping any
    column that is numerically a combination of those already kept."""
    kept = np.zeros(X.shape[1], dtype=bool)
    for j in range(X.shape[1]):
        norm = np.linalg.norm(X[:, j])
        if norm == 0.0:
            continue
        trial = np.flatnonzero(kept).tolist() + [j]
        r = linalg.qr(X[:, trial], mode="r")[0]
        if abs(r[len(trial) - 1, len(trial) - 1]) > rtol * norm:
            kept[j] = True
    return kept


def _fit_ls(X: np.ndarray, y: np.ndarray):
    """Least squares by QR on the independent columns. Returns (coef, rss, kept_mask)."""
    kept = _independent_columns(X)
    coef = np.zeros(X.shape[1])
    q, r = linalg.qr(X[:, kept], mode="economic")
    coef[kept] = linalg.solve_triangular(r, q.T @ y)
    resid = y - X @ coef
    return coef, float(resid @ resid), kept


def _aic(rss: float, n: int, p: int, floor: float) -> float:
    return n * math.log(max(rss, floor) / n) + 2 * p


@dataclass
class LinearModel:
    spec: FeatureSpec
    dictionaries: FeatureDictionaries
    groups: list
    columns: list
    coefficients: np.ndarray
    intercept: float
    standard_errors: np.ndarray
    aic: float
    aic_path: list = field(default_factory=list)
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "groups": list(self.groups),
            "columns": [int(c) for c in self.columns],
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "standard_errors": [float(s) for s in self.standard_errors],
            "aic": float(self.aic),
            "aic_path": [float(a) for a in self.aic_path],
            "n": self.n,
            "spec": {"numeric": list(self.spec.numeric),
                     "categorical": list(self.spec.categorical),
                     "rare_threshold": self.spec.rare_threshold,
                     "z_cap": self.spec.z_cap},
            "dictionaries": self.dictionaries.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        s = d["spec"]
        spec = FeatureSpec(tuple(s["numeric"]), tuple(s["categorical"]),
                           int(s["rare_threshold"]), float(s["z_cap"]))
        return cls(
            spec=spec,
            dictionaries=FeatureDictionaries({k: tuple(v) for k, v in d["dictionaries"].items()}),
            groups=list(d["groups"]),
            columns=list(d["columns"]),
            coefficients=np.array(d["coefficients"], dtype=np.float64),
            intercept=float(d["intercept"]),
            standard_errors=np.array(d["standard_errors"], dtype=np.float64),
            aic=float(d["aic"]),
            aic_path=list(d.get("aic_path", [])),
            n=int(d.get("n", 0)),
        )


def fit_stepwise(jobs: Sequence, spec: FeatureSpec = FeatureSpec()) -> LinearModel:
    """Forward-stepwise least squares of ``cost_eur`` on the feature groups.

    Indicator blocks drop their first level as the reference. Columns that
    are numerically dependent on those already in the model are dropped with
    a ``RuntimeWarning``.
    """
    jobs = list(jobs)
    n = len(jobs)
    if n < 10:
        raise ValueError("stepwise regression needs at least 10 jobs")
    y = np.array([j.cost_eur for j in jobs], dtype=np.float64)
    dicts = FeatureDictionaries.build(jobs, spec)
    layout = feature_layout(spec, dicts)
    F = np.vstack([build_features(j, spec, dicts) for j in jobs])
    for name in spec.numeric:
        c = layout[name][0]
        F[:, c] = trim_outliers(F[:, c], spec.z_cap)

    candidates = {}
    for name in spec.numeric:
        col = layout[name]
        if np.ptp(F[:, col[0]]) > 0:
            candidates[name] = col
    for name in spec.categorical:
        cols = [c for c in layout[name] if F[:, c].any()]
        if len(cols) > 1:
            candidates[name] = cols[1:]

    floor = _RSS_FLOOR * float(y @ y)
    ones = np.ones((n, 1))
    rss0 = float(np.sum((y - y.mean()) ** 2))
    current_aic = _aic(rss0, n, 1, floor)
    path = [current_aic]
    selected, cols = [], []
    while True:
        best = None
        for name, gcols in candidates.items():
            if name in selected:
                continue
            trial = cols + gcols
            _, rss, kept = _fit_ls(np.hstack([ones, F[:, trial]]), y)
            aic = _aic(rss, n, int(kept.sum()), floor)
            if best is None or aic < best[0]:
                best = (aic, name, gcols)
        if best is None or not best[0] < current_aic:
            break
        current_aic, name, gcols = best
        selected.append(name)
        cols = cols + gcols
        path.append(current_aic)

    X = np.hstack([ones, F[:, cols]])
    coef, rss, kept = _fit_ls(X, y)
    if not kept.all():
        dropped = [c for c, k in zip([-1] + cols, kept) if not k]
        warnings.warn(f"dropping degenerate design columns {dropped}", RuntimeWarning)
        cols = [c for c, k in zip(cols, kept[1:]) if k]
        X = np.hstack([ones, F[:, cols]])
        coef, rss, kept = _fit_ls(X, y)
    p = X.shape[1]
    if n > p:
        sigma2 = rss / (n - p)
        xtx_inv = np.linalg.pinv(X.T @ X)
        se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    else:
        se = np.full(p, np.nan)
    return LinearModel(
        spec=spec, dictionaries=dicts, groups=selected, columns=cols,
        coefficients=coef[1:], intercept=float(coef[0]), standard_errors=se[1:],
        aic=current_aic, aic_path=path, n=n,
    )


def predict(model: LinearModel, job) -> float:
    """Linear prediction in EUR; not clamped, so it may be non-positive."""
    x = build_features(job, model.spec, model.dictionaries)
    return float(model.intercept + x[model.columns] @ model.coefficients)


def predict_many(model: LinearModel, jobs) -> np.ndarray:
    return np.array([predict(model, j) for j in jobs], dtype=np.float64)


def coefficient(model: LinearModel, feature: str):
    """(coefficient, standard error) of a numeric feature, or None if not selected."""
    layout = feature_layout(model.spec, model.dictionaries)
    if feature not in model.spec.numeric or layout[feature][0] not in model.columns:
        return None
    pos = model.columns.index(layout[feature][0])
    return float(model.coefficients[pos]), float(model.standard_errors[pos])


def combine_min(analogy_estimate: float, regression_estimate: float) -> float:
    """The smaller of two estimates, ignoring one that is non-positive or non-finite."""
    valid = [v for v in (analogy_estimate, regression_estimate) if math.isfinite(v) and v > 0]
    if not valid:
        raise ValueError("no valid estimate to combine")
    return min(valid)
