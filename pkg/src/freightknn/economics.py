"""Manual-estimator error recovery and the labor-cost indifference simulation.

Manual errors are not recorded in job logs, only costs ``C`` and revenues
``R``. Assuming each forwarder marks up an estimate ``C + e`` by a common
target margin ``t`` (so ``R = (C + e)(1 + t)``) and that errors average out to
zero, ``t = sum(R) / sum(C) - 1`` and ``e = (R - C(1 + t)) / (1 + t)``.

The indifference cost is the expected gross profit per bid opportunity with
manual estimation minus that with an automated estimator, in a first-price
sealed-bid auction against manually estimating competitors.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import stats

TRIAL_BLOCK = 1024


@dataclass(frozen=True)
class ManualErrorProfile:
    """Recovered manual-estimation errors.

    ``errors_eur`` and ``errors_pct`` follow the input order of the jobs that
    carried revenue.
    """

    margin: float
    errors_eur: tuple
    errors_pct: tuple
    mean_error_pct: float
    mape: float
    q3ape: float
    std_error_pct: float

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "n": len(self.errors_eur),
            "mean_error_pct": self.mean_error_pct,
            "mape": self.mape,
            "q3ape": self.q3ape,
            "std_error_pct": self.std_error_pct if math.isfinite(self.std_error_pct) else None,
        }


def derive_manual_margin(jobs: Sequence) -> ManualErrorProfile:
    """Solve for the target margin that makes the mean manual error zero.

    Parameters
    ----------
    jobs : sequence of (cost, revenue) pairs
        ``revenue`` may be None; such jobs are ignored.
    """
    pairs = [(float(c), float(r)) for c, r in jobs if r is not None]
    if not pairs:
        raise ValueError("no jobs carry revenue")
    costs = np.array([c for c, _ in pairs])
    revenues = np.array([r for _, r in pairs])
    if np.any(costs <= 0) or not np.all(np.isfinite(revenues)):
        raise ValueError("costs must be > 0 and revenues finite")
    t = float(revenues.sum() / costs.sum()) - 1.0
    e = (revenues - costs * (1.0 + t)) / (1.0 + t)
    pct = 100.0 * e / costs
    ape = np.abs(pct)
    return ManualErrorProfile(
        margin=t,
        errors_eur=tuple(float(v) for v in e),
        errors_pct=tuple(float(v) for v in pct),
        mean_error_pct=float(np.mean(pct)),
        mape=float(np.mean(ape)),
        q3ape=stats.percentile(ape, 0.75),
        std_error_pct=float(np.std(pct, ddof=1)) if pct.size > 1 else math.nan,
    )


@dataclass(frozen=True)
class AuctionConfig:
    """Inputs to :func:`simulate_indifference`.

    Error distributions are empirical samples of signed fractional estimate
    errors (``0.1`` means a 10% overestimate), resampled with replacement.
    ``competitor_errors`` defaults to ``manual_errors``.
    """

    costs: tuple
    manual_errors: tuple
    method_errors: tuple
    competitor_errors: Optional[tuple] = None
    n_bidders: int = 3
    target_margin: float = 0.151
    trials: int = 25_000
    seed: int = 0
    common_random_numbers: bool = True

    def __post_init__(self):
        if self.n_bidders < 2:
            raise ValueError("n_bidders must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("costs", "manual_errors", "method_errors"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if self.competitor_errors is not None and len(self.competitor_errors) == 0:
            raise ValueError("competitor_errors must be non-empty")
        for name in ("costs", "manual_errors", "method_errors", "competitor_errors"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))
        if not any(e > -1 for e in self.manual_errors) or not any(
                e > -1 for e in self.method_errors) or not any(
                e > -1 for e in self.competitors):
            raise ValueError("every error distribution needs values above -100%")

    @property
    def competitors(self) -> tuple:
        return self.manual_errors if self.competitor_errors is None else self.competitor_errors


@dataclass(frozen=True)
class IndifferenceResult:
    manual_profit: float
    method_profit: float
    indifference_cost: float
    ci: tuple
    se: float
    manual_win_rate: float
    method_win_rate: float
    trials: int

    def to_dict(self) -> dict:
        return {
            "manual_profit": self.manual_profit,
            "method_profit": self.method_profit,
            "indifference_cost": self.indifference_cost,
            "ci": list(self.ci),
            "se": self.se,
            "manual_win_rate": self.manual_win_rate,
            "method_win_rate": self.method_win_rate,
            "trials": self.trials,
        }


def _draw_errors(rng, dist: np.ndarray, size) -> np.ndarray:
    """Resample from ``dist``, redrawing values at or below -100%."""
    out = dist[rng.integers(0, dist.size, size=size)]
    bad = out <= -1.0
    while bad.any():
        out[bad] = dist[rng.integers(0, dist.size, size=int(bad.sum()))]
        bad = out <= -1.0
    return out


def _stream(seed: int, *key: int):
    return np.random.default_rng([seed, *key])


def _simulate_block(cfg: AuctionConfig, block: int, start: int, stop: int):
    """Per-trial profits and win flags for trials ``start:stop``, per arm.

    Every block has its own substreams keyed by (seed, block), so the result
    for a trial never depends on how blocks are spread over workers.
    """
    size = stop - start
    costs = np.asarray(cfg.costs)
    comp = np.asarray(cfg.competitors)
    mult = 1.0 + cfg.target_margin

    def market(key):
        rng = _stream(cfg.seed, block, key)
        c = costs[rng.integers(0, costs.size, size=size)]
        rivals = _draw_errors(rng, comp, (size, cfg.n_bidders - 1))
        return c, np.min(c[:, None] * (1.0 + rivals) * mult, axis=1)

    shared = market(0) if cfg.common_random_numbers else None
    out = []
    for arm, dist in enumerate((cfg.manual_errors, cfg.method_errors)):
        c, best_rival = shared if shared is not None else market(10 + arm)
        firm_key = 1 if cfg.common_random_numbers else 20 + arm
        own = _draw_errors(_stream(cfg.seed, block, firm_key), np.asarray(dist), size)
        bid = c * (1.0 + own) * mult
        won = bid < best_rival
        out.append((np.where(won, bid - c, 0.0), won))
    return out


def simulate_indifference(cfg: AuctionConfig, workers: int = 1) -> IndifferenceResult:
    """Monte Carlo estimate of the indifference labor cost per estimate.

    Each trial draws a true cost and the competitors' errors, then bids once
    with a manual error and once with a method error. The firm wins only with
    a strictly lowest bid and then earns ``bid - cost``, which is negative
    when its estimate undershoots by more than the margin; a loss earns 0.
    With common random numbers both arms see the same cost, competitors and
    firm-error uniforms, so identical error distributions give an
    indifference cost of exactly zero.
    """
    bounds = [(b, s, min(s + TRIAL_BLOCK, cfg.trials))
              for b, s in enumerate(range(0, cfg.trials, TRIAL_BLOCK))]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: _simulate_block(cfg, *b), bounds))
    else:
        parts = [_simulate_block(cfg, *b) for b in bounds]
    p0 = np.concatenate([p[0][0] for p in parts])
    p1 = np.concatenate([p[1][0] for p in parts])
    w0 = np.concatenate([p[0][1] for p in parts])
    w1 = np.concatenate([p[1][1] for p in parts])
    m0, m1 = float(np.mean(p0)), float(np.mean(p1))
    ce = m0 - m1
    if cfg.trials < 2:
        se, ci = math.nan, (math.nan, math.nan)
    elif cfg.common_random_numbers:
        diff = p0 - p1
        _, se, (lo, hi) = stats.mean_ci(diff)
        # Re-centre on P0 - P1, which can differ from mean(diff) in the last bit.
        shift = ce - float(np.mean(diff))
        ci = (min(lo + shift, ce), max(hi + shift, ce))
    else:
        se = math.sqrt(np.var(p0, ddof=1) / p0.size + np.var(p1, ddof=1) / p1.size)
        half = stats.t_quantile(0.975, 2 * cfg.trials - 2) * se
        ci = (ce - half, ce + half)
    return IndifferenceResult(
        manual_profit=m0, method_profit=m1, indifference_cost=ce,
        ci=(float(ci[0]), float(ci[1])), se=float(se),
        manual_win_rate=float(np.mean(w0)), method_win_rate=float(np.mean(w1)),
        trials=cfg.trials,
    )


@dataclass(frozen=True)
class SweepGrid:
    """Indifference costs with rows indexed by bidders and columns by margins."""

    bidders: tuple
    margins: tuple
    results: tuple  # rows of IndifferenceResult

    @property
    def indifference_costs(self) -> np.ndarray:
        return np.array([[r.indifference_cost for r in row] for row in self.results])

    def to_dict(self) -> dict:
        return {
            "bidders": list(self.bidders),
            "margins": list(self.margins),
            "indifference_cost": self.indifference_costs.tolist(),
            "cells": [[r.to_dict() for r in row] for row in self.results],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_bidders"] + [repr(float(m)) for m in self.margins])
        for b, row in zip(self.bidders, self.results):
            w.writerow([b] + [repr(r.indifference_cost) for r in row])
        return buf.getvalue()


def sweep_seed(base_seed: int, cell_index: int) -> int:
    return base_seed + cell_index


def sensitivity_sweep(base: AuctionConfig, bidders: Sequence[int], margins: Sequence[float],
                      workers: int = 1) -> SweepGrid:
    """One simulation per (bidders, margin) cell, in row-major cell order."""
    bidders, margins = tuple(int(b) for b in bidders), tuple(float(m) for m in margins)
    if not bidders or not margins:
        raise ValueError("sweep axes must be non-empty")
    rows = []
    for i, b in enumerate(bidders):
        row = []
        for j, m in enumerate(margins):
            cfg = replace(base, n_bidders=b, target_margin=m,
                          seed=sweep_seed(base.seed, i * len(margins) + j))
            row.append(simulate_indifference(cfg, workers=workers))
        rows.append(tuple(row))
    return SweepGrid(bidders, margins, tuple(rows))


def breakeven_hours(indifference_cost: float, hourly_rate: float = 28.29) -> float:
    """Estimator labor time per job at which the two methods cost the same."""
    if not hourly_rate > 0:
        raise ValueError("hourly_rate must be > 0")
    return indifference_cost / hourly_rate
