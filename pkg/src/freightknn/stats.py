"""Error metrics and the small set of classical tests used to read results."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np
from scipy import stats as _st


def _vec(values, name="values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def percent_errors(actual, estimated) -> np.ndarray:
    """Signed percentage errors ``100 * (estimated - actual) / actual``."""
    a = _vec(actual, "actual")
    e = np.asarray(estimated, dtype=np.float64).ravel()
    if a.size != e.size:
        raise ValueError("actual and estimated differ in length")
    if a.size == 0:
        raise ValueError("need at least one value")
    if np.any(a <= 0):
        raise ValueError("actual values must be > 0")
    return 100.0 * (e - a) / a


def mape(actual, estimated) -> float:
    """Mean absolute percentage error, in percent."""
    return float(np.mean(np.abs(percent_errors(actual, estimated))))


def percentile(values, p: float) -> float:
    """Linear interpolation between closest ranks (rank ``h = (n-1)p + 1``)."""
    v = np.sort(_vec(values))
    if v.size == 0:
        raise ValueError("percentile of empty data")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    h = (v.size - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, v.size - 1)
    return float(v[lo] + (h - lo) * (v[hi] - v[lo]))


def t_quantile(prob: float, df: float) -> float:
    return float(_st.t.ppf(prob, df))


def mean_ci(values, level: float = 0.95):
    """Mean, standard error and two-sided t confidence interval.

    Returns
    -------
    (mean, se, (low, high))
    """
    v = _vec(values)
    n = v.size
    if n < 2:
        raise ValueError("mean_ci needs at least 2 values")
    m = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(n))
    half = t_quantile(0.5 + level / 2.0, n - 1) * se
    return m, se, (m - half, m + half)


@dataclass(frozen=True)
class ErrorStats:
    n: int
    mean_error_eur: float
    mean_error_pct: float
    mape: float
    q3ape: float
    std_error_pct: float
    min_error_pct: float
    median_error_pct: float
    max_error_pct: float
    mape_se: float
    mape_ci: tuple

    def to_dict(self) -> dict:
        return _finite_or_none(asdict(self))


def _finite_or_none(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def error_stats(actual, estimated) -> ErrorStats:
    """Summary of estimate errors. SE and CI are NaN when fewer than 2 jobs."""
    a = _vec(actual, "actual")
    e = _vec(estimated, "estimated")
    pct = percent_errors(a, e)
    ape = np.abs(pct)
    if ape.size >= 2:
        _, se, ci = mean_ci(ape)
        std = float(np.std(pct, ddof=1))
    else:
        se, ci, std = math.nan, (math.nan, math.nan), math.nan
    return ErrorStats(
        n=int(a.size),
        mean_error_eur=float(np.mean(e - a)),
        mean_error_pct=float(np.mean(pct)),
        mape=float(np.mean(ape)),
        q3ape=percentile(ape, 0.75),
        std_error_pct=std,
        min_error_pct=float(np.min(pct)),
        median_error_pct=percentile(pct, 0.5),
        max_error_pct=float(np.max(pct)),
        mape_se=se,
        mape_ci=(float(ci[0]), float(ci[1])),
    )


@dataclass(frozen=True)
class SlopeTest:
    slope: float
    intercept: float
    se: float
    t: float
    df: int
    p_value: float
    ci: tuple
    reject: bool

    def to_dict(self) -> dict:
        return _finite_or_none(asdict(self))


def ols_slope_test(x, y, level: float = 0.95) -> SlopeTest:
    """Least-squares slope of ``y`` on ``x`` with a two-sided t test against 0.

    ``reject`` is True when the confidence interval excludes zero.
    """
    x = _vec(x, "x")
    y = _vec(y, "y")
    n = x.size
    if n != y.size:
        raise ValueError("x and y differ in length")
    if n < 3:
        raise ValueError("slope test needs at least 3 points")
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise ValueError("x is constant")
    ym = float(y.mean())
    slope = float(np.dot(xc, y - ym)) / sxx
    intercept = ym - slope * float(x.mean())
    resid = y - ym - slope * xc
    df = n - 2
    se = math.sqrt(float(np.dot(resid, resid)) / df / sxx)
    if se > 0:
        t = slope / se
        p = float(2.0 * _st.t.sf(abs(t), df))
    else:
        t = 0.0 if slope == 0 else math.copysign(math.inf, slope)
        p = 1.0 if slope == 0 else 0.0
    half = t_quantile(0.5 + level / 2.0, df) * se
    ci = (slope - half, slope + half)
    return SlopeTest(slope, intercept, se, t, df, p, ci, bool(ci[0] > 0 or ci[1] < 0))


class Sided(str, Enum):
    TWO = "two"
    B_LESS_THAN_A = "b_less_than_a"


def paired_t_test(a, b, sided=Sided.TWO):
    """Paired t test on ``a - b``.

    With ``sided="b_less_than_a"`` the alternative is that ``b`` is smaller,
    i.e. a positive mean difference.

    Returns
    -------
    (t, p)
    """
    a = _vec(a, "a")
    b = _vec(b, "b")
    if a.size != b.size:
        raise ValueError("paired samples differ in length")
    n = a.size
    if n < 2:
        raise ValueError("paired t test needs at least 2 pairs")
    sided = Sided(sided)
    d = a - b
    md = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if md == 0.0:
            return 0.0, 1.0
        t = math.copysign(math.inf, md)
    else:
        t = md / (sd / math.sqrt(n))
    if sided is Sided.TWO:
        p = float(2.0 * _st.t.sf(abs(t), n - 1))
    else:
        p = float(_st.t.sf(t, n - 1))
    return float(t), min(p, 1.0)


def pearson(a, b) -> float:
    a = _vec(a, "a")
    b = _vec(b, "b")
    if a.size != b.size:
        raise ValueError("series differ in length")
    if a.size < 2:
        raise ValueError("pearson needs at least 2 points")
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(np.dot(ac, ac))
    sbb = float(np.dot(bc, bc))
    if saa == 0.0 or sbb == 0.0:
        raise ValueError("pearson correlation undefined for a constant series")
    r = float(np.dot(ac, bc)) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))
