"""Shared fixtures: job factories, an exhaustive-scan neighbor oracle, and the
acceptance-criterion reporter that prints one PASS/FAIL line per criterion."""

from __future__ import annotations

import math

import numpy as np
import pytest

from freightknn.domain import GeoPoint, JobRecord, id_key
from freightknn.geo import haversine_km

_CRITERIA_KEY = pytest.StashKey[list]()


def make_job(id, date=0, col=(53.35, -6.26), dlv=(51.51, -0.13), load=1.0, cost=1000.0,
             revenue=None, direction="export", col_country=None, del_country=None):
    return JobRecord(id=str(id), date=int(date), collection=GeoPoint(*col),
                     delivery=GeoPoint(*dlv), load_size=float(load), cost_eur=float(cost),
                     revenue_eur=revenue, direction=direction,
                     collection_country=col_country, delivery_country=del_country)


def random_jobs(rng, n, prefix="J", date_span=400, ties=False):
    """Jobs scattered over Europe; ``ties`` snaps values to a coarse lattice so
    equal distances (and tie-breaks) actually occur."""
    jobs = []
    for i in range(n):
        if ties:
            col = (50.0 + rng.integers(0, 3), float(rng.integers(-3, 3)))
            dlv = (45.0 + rng.integers(0, 3), float(rng.integers(0, 4)))
            load = float(rng.choice([0.25, 0.5, 1.0]))
            date = int(rng.integers(0, 6))
        else:
            col = (float(rng.uniform(36, 60)), float(rng.uniform(-10, 25)))
            dlv = (float(rng.uniform(36, 60)), float(rng.uniform(-10, 25)))
            load = float(rng.uniform(0.001, 1.0))
            date = int(rng.integers(0, date_span))
        jobs.append(make_job(f"{prefix}{i}", date, col, dlv, load,
                             float(rng.uniform(50, 5000))))
    return jobs


def oracle_distance(a, b, w):
    dc = haversine_km(a.collection, b.collection)
    dd = haversine_km(a.delivery, b.delivery)
    dt = float(b.date) - float(a.date)
    dl = b.load_size - a.load_size
    return math.sqrt(w[0] * dc + w[1] * dd + w[2] * (dt * dt) + w[3] * (dl * dl))


def oracle_neighbors(pool, probe, w, k, cutoff=None, exclude_self=False):
    """Every eligible pool job scored, sorted by (D, id), first k kept."""
    scored = []
    for job in pool:
        if exclude_self and job.id == probe.id:
            continue
        if cutoff is not None and job.date > cutoff:
            continue
        scored.append((oracle_distance(probe, job, w), id_key(job.id), job))
    scored.sort(key=lambda s: (s[0], s[1]))
    return [(d, job) for d, _, job in scored[:k]]


def oracle_estimate(pool, probe, w, k, mode="proportional", eps=1e-9, cutoff=None,
                    exclude_self=False):
    return oracle_solve(oracle_neighbors(pool, probe, w, k, cutoff, exclude_self), probe,
                        mode, eps)


def oracle_solve(nbrs, probe, mode="proportional", eps=1e-9):
    """Solution function applied to an already ranked neighbor list."""
    if not nbrs:
        return math.nan

    def scaled(job):
        if job.load_size == probe.load_size:
            return job.cost_eur
        return (job.cost_eur / job.load_size) * probe.load_size

    exact = [scaled(job) for d, job in nbrs if d <= eps]
    if exact:
        s = 0.0
        for v in exact:
            s += v
        return s / len(exact)
    acc = 0.0
    if mode == "proportional":
        tot = 0.0
        for d, _ in nbrs:
            tot += d
        for d, job in nbrs:
            acc += (d / tot) * scaled(job)
    else:
        tot = 0.0
        for d, _ in nbrs:
            tot += 1.0 / d
        for d, job in nbrs:
            acc += ((1.0 / d) / tot) * scaled(job)
    return acc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = []


@pytest.fixture
def criterion(request):
    """Record a criterion outcome: ``criterion(n, title, detail)`` after the asserts
    pass; a failure inside the test is recorded as FAIL by the report hook."""
    lines = request.config.stash[_CRITERIA_KEY]
    state = {}

    def record(number, title, detail=""):
        state.update(number=number, title=title, detail=detail)

    request.node._criterion_state = state
    request.node._criterion_lines = lines
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    state = getattr(item, "_criterion_state", None)
    if state is None or rep.when != "call":
        return
    number = getattr(item.function, "criterion_number", None)
    title = getattr(item.function, "criterion_title", item.name)
    verdict = "PASS" if rep.passed else "FAIL"
    detail = state.get("detail", "") if rep.passed else str(call.excinfo.value).splitlines()[0]
    item._criterion_lines.append((number, f"[criterion {number:>2}] {verdict}  {title}"
                                          + (f"  ({detail})" if detail else "")))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
