import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from freightknn.simplex import SimplexOptions, initial_simplex, minimize


def sphere(x):
    return float(np.sum(np.square(x)))


def rosenbrock(x):
    return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)


def non_increasing(seq):
    return all(b <= a for a, b in zip(seq, seq[1:]))


def test_sphere_2d():
    r = minimize(sphere, [1.0, 1.0])
    assert r.converged and r.fun < 1e-10
    assert np.max(np.abs(r.x)) < 1e-6


def test_sphere_4d():
    r = minimize(sphere, [1.0, -0.5, 0.25, 2.0])
    assert r.fun < 1e-10 and r.converged


def test_rosenbrock_matches_reference_minimizer():
    r = minimize(rosenbrock, [-1.2, 1.0])
    assert r.iterations <= 500 and r.converged
    assert np.max(np.abs(r.x - 1.0)) < 1e-4
    ref = optimize.minimize(rosenbrock, [-1.2, 1.0], method="Nelder-Mead",
                            options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 2500})
    assert np.max(np.abs(r.x - ref.x)) < 1e-4
    assert non_increasing(r.best_history)


def test_constant_function_returns_start():
    x0 = np.array([0.3, 0.0, 7.0])
    r = minimize(lambda x: 4.0, x0)
    assert np.array_equal(r.x, x0) and r.fun == 4.0 and r.converged


def test_initial_simplex_perturbation():
    sim = initial_simplex(np.array([2.0, 0.0]))
    assert np.array_equal(sim, [[2.0, 0.0], [2.1, 0.0], [2.0, 0.00025]])


def test_iteration_cap():
    r = minimize(rosenbrock, [-1.2, 1.0], SimplexOptions(max_iterations=5))
    assert r.iterations == 5 and not r.converged
    assert r.fun <= rosenbrock([-1.2, 1.0])


def test_infinite_sentinel_allowed_nan_rejected():
    r = minimize(lambda x: math.inf if x[0] < 0 else (x[0] - 1) ** 2, [0.5])
    assert abs(r.x[0] - 1) < 1e-4
    with pytest.raises(FloatingPointError):
        minimize(lambda x: math.nan, [1.0])
    with pytest.raises(FloatingPointError):
        minimize(lambda x: -math.inf, [1.0])


@pytest.mark.parametrize("kw", [dict(max_iterations=0), dict(x_tolerance=0),
                                dict(expansion=1.0), dict(contraction=1.0), dict(shrink=0)])
def test_options_validated(kw):
    with pytest.raises(ValueError):
        SimplexOptions(**kw)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4),
       st.lists(st.floats(0.1, 5), min_size=4, max_size=4),
       st.integers(1, 200))
def test_contract_and_determinism(x0, scales, cap):
    def f(x):
        return float(np.sum(np.asarray(scales[: x.size]) * np.abs(x - 0.7) ** 1.5))

    opts = SimplexOptions(max_iterations=cap)
    r1, r2 = minimize(f, x0, opts), minimize(f, x0, opts)
    assert r1.fun <= f(np.asarray(x0))
    assert non_increasing(r1.best_history)
    assert np.array_equal(r1.x, r2.x) and r1.best_history == r2.best_history
