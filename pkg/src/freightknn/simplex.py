"""Nelder-Mead downhill simplex minimization.

Derivative-free, so it copes with the piecewise-constant error surface of a
nearest-neighbor estimator. Deterministic: no randomness anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SimplexOptions:
    max_iterations: int = 2500
    x_tolerance: float = 1e-8
    f_tolerance: float = 1e-8
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.x_tolerance > 0 and self.f_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if not (self.reflection > 0 and self.expansion > 1
                and 0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("invalid simplex coefficients")


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool
    best_history: list = field(default_factory=list)


def initial_simplex(x0: np.ndarray) -> np.ndarray:
    """``x0`` plus one vertex per coordinate, that coordinate nudged by 5%."""
    n = x0.size
    sim = np.empty((n + 1, n))
    sim[0] = x0
    for i in range(n):
        v = x0.copy()
        v[i] = v[i] * 1.05 if v[i] != 0 else 0.00025
        sim[i + 1] = v
    return sim


def minimize(f: Callable[[np.ndarray], float], x0, opts: SimplexOptions | None = None) -> SimplexResult:
    """Minimize ``f`` starting from ``x0``.

    ``f`` may return ``+inf`` to mark an infeasible point; NaN or ``-inf``
    raise ``FloatingPointError``. Iteration stops once both the vertex spread
    (max abs coordinate difference to the best vertex) and the value spread
    are within tolerance, or after ``max_iterations`` reflect / expand /
    contract / shrink cycles.

    Returns
    -------
    SimplexResult
        ``best_history`` holds the best value after each completed iteration
        (entry 0 is the initial simplex).
    """
    opts = opts or SimplexOptions()
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    if x0.ndim != 1 or x0.size < 1:
        raise ValueError("x0 must be a non-empty vector")
    n = x0.size
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        v = float(f(x.copy()))
        if math.isnan(v) or v == -math.inf:
            raise FloatingPointError(f"objective returned {v} at {x!r}")
        return v

    sim = initial_simplex(x0)
    fsim = np.array([call(v) for v in sim])
    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]

    a, g, rho, sig = opts.reflection, opts.expansion, opts.contraction, opts.shrink
    history = [float(fsim[0])]
    iterations = 0
    converged = False
    while True:
        with np.errstate(invalid="ignore"):
            x_spread = float(np.max(np.abs(sim[1:] - sim[0])))
            f_spread = float(np.max(np.abs(fsim[1:] - fsim[0])))
        if x_spread <= opts.x_tolerance and f_spread <= opts.f_tolerance:
            converged = True
            break
        if iterations >= opts.max_iterations:
            break

        centroid = sim[:-1].mean(axis=0)
        xr = centroid + a * (centroid - sim[-1])
        fr = call(xr)
        shrink = False
        if fr < fsim[0]:
            xe = centroid + a * g * (centroid - sim[-1])
            fe = call(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-1]:
            xc = centroid + rho * a * (centroid - sim[-1])
            fc = call(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = centroid - rho * (centroid - sim[-1])
            fcc = call(xcc)
            if fcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for j in range(1, n + 1):
                sim[j] = sim[0] + sig * (sim[j] - sim[0])
                fsim[j] = call(sim[j])

        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        iterations += 1
        history.append(float(fsim[0]))

    return SimplexResult(sim[0].copy(), float(fsim[0]), iterations, evals, converged, history)
