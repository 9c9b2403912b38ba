"""End-to-end orchestration behind the command-line tool.

Every step reads and writes files under one output directory::

    data/       jobs.csv, segmentation.json, synth_spec.json, rejections.jsonl
    models/     k<K>.json per trained k, regression.json
    reports/    trial reports, baseline, comparison, simulation, CSV exports
    manifests/  one <step>.json per step with input and output digests

All randomness derives from one master seed through named substreams, and
no output depends on the worker count, so two runs with the same seed and
config produce byte-identical trees apart from manifest timing fields.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import time
import zlib
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, backtest, economics, regression, stats, synth, training
from .domain import Dataset, Segmentation, id_key, parse_jobs_csv, segment, serialize_jobs_csv
from .knn import SolutionMode
from .simplex import SimplexOptions

VOLATILE_MANIFEST_KEYS = ("started_at", "finished_at", "runtime_seconds")

DEFAULT_CONFIG = {
    "seed": 0,
    "datum": "2000-01-01",
    "synth": {},
    "segment": {"historical_share": 0.6},
    "train": {
        "random_iterations": training.DESK_RANDOM_ITERATIONS,
        "simplex_max_iterations": 2500,
        "k_range": [1, 2, 3, 4, 5, 6],
        "mode": "proportional",
    },
    "backtest": {"lag_days": 30, "include_estimated_test_jobs": False},
    "baseline": {"rare_threshold": 10, "z_cap": 3.0},
    "simulate": {
        "n_bidders": 3,
        "target_margin": None,  # None: use the margin recovered from revenues
        "trials": 25_000,
        "common_random_numbers": True,
        "sweep_bidders": [2, 3, 4, 5, 6],
        "sweep_margins": [0.05, 0.10, 0.151, 0.20, 0.25],
        "hourly_rate": 28.29,
    },
}

PAPER_FIDELITY = {"train": {"random_iterations": training.FULL_RANDOM_ITERATIONS,
                            "simplex_max_iterations": 2500}}


class PipelineError(RuntimeError):
    pass


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins and unknown top-level keys are rejected."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base and base is DEFAULT_CONFIG:
            raise PipelineError(f"unknown config section {key!r}")
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def build_config(user: dict | None = None, seed: int | None = None,
                 paper_fidelity: bool = False) -> dict:
    cfg = merge_config(DEFAULT_CONFIG, user or {})
    if paper_fidelity:
        cfg = merge_config(cfg, PAPER_FIDELITY)
    if seed is not None:
        cfg["seed"] = int(seed)
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def substream_seed(master: int, name: str) -> int:
    """Seed for a named consumer of randomness, derived from the master seed."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1)[0])


class Workspace:
    """Output directory with digest bookkeeping for the current step."""

    def __init__(self, root, config: dict, workers: int = 1):
        self.root = Path(root)
        self.config = config
        self.workers = max(1, int(workers))
        self._inputs: dict = {}
        self._outputs: dict = {}

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def datum(self) -> date:
        return date.fromisoformat(self.config["datum"])

    def path(self, rel: str) -> Path:
        return self.root / rel

    def read_bytes(self, rel_or_path, external: bool = False) -> bytes:
        p = Path(rel_or_path) if external else self.path(rel_or_path)
        if not p.is_file():
            raise PipelineError(f"missing input {p}; run the earlier step first")
        data = p.read_bytes()
        key = str(p) if external else rel_or_path
        self._inputs[key] = sha256_bytes(data)
        return data

    def read_json(self, rel: str):
        return json.loads(self.read_bytes(rel))

    def write_text(self, rel: str, text: str) -> None:
        data = text.encode("utf-8")
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        self._outputs[rel] = sha256_bytes(data)

    def write_json(self, rel: str, obj) -> None:
        self.write_text(rel, canonical_json(obj))

    def step(self, command: str):
        return _Step(self, command)


class _Step:
    def __init__(self, ws: Workspace, command: str):
        self.ws, self.command = ws, command

    def __enter__(self):
        self.ws._inputs, self.ws._outputs = {}, {}
        self.t0 = time.perf_counter()
        self.started = datetime.now(timezone.utc).isoformat()
        return self.ws

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            return False
        ws = self.ws
        manifest = {
            "command": self.command,
            "version": __version__,
            "master_seed": ws.seed,
            "config_digest": sha256_bytes(canonical_json(ws.config).encode()),
            "config": ws.config,
            "inputs": dict(sorted(ws._inputs.items())),
            "outputs": dict(sorted(ws._outputs.items())),
            "started_at": self.started,
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "runtime_seconds": round(time.perf_counter() - self.t0, 3),
        }
        p = ws.path(f"manifests/{self.command}.json")
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(canonical_json(manifest), encoding="utf-8")
        return False


# ---------------------------------------------------------------- loaders

def _dataset(ws: Workspace) -> Dataset:
    ds, rejections = parse_jobs_csv(ws.read_bytes("data/jobs.csv"), ws.datum)
    if rejections:
        raise PipelineError(f"data/jobs.csv has {len(rejections)} invalid rows; re-run ingest")
    return ds


def _segmentation(ws: Workspace) -> Segmentation:
    return Segmentation.from_dict(ws.read_json("data/segmentation.json"))


def _k_range(ws: Workspace) -> list:
    return [int(k) for k in ws.config["train"]["k_range"]]


def _models(ws: Workspace) -> dict:
    return {k: training.TrainedModel.from_dict(ws.read_json(f"models/k{k}.json"))
            for k in _k_range(ws)}


def _trial(ws: Workspace, trial: int, k: int) -> backtest.TrialReport:
    return backtest.TrialReport.from_dict(ws.read_json(f"reports/trial{trial}_k{k}.json"))


def _best_k(reports: dict) -> int:
    return min(reports, key=lambda k: (reports[k].mape, k))


# ------------------------------------------------------------------ steps

def run_synth(ws: Workspace) -> Dataset:
    with ws.step("synth"):
        params = dict(ws.config["synth"])
        params.setdefault("seed", substream_seed(ws.seed, "synth"))
        params.setdefault("datum", ws.config["datum"])
        spec = synth.SyntheticSpec.from_dict(params)
        ds = synth.generate(spec)
        ws.write_json("data/synth_spec.json", spec.to_dict())
        ws.write_text("data/jobs.csv", serialize_jobs_csv(ds))
    return ds


def run_ingest(ws: Workspace, source) -> tuple:
    with ws.step("ingest"):
        ds, rejections = parse_jobs_csv(ws.read_bytes(source, external=True), ws.datum)
        ws.write_text("data/jobs.csv", serialize_jobs_csv(ds))
        ws.write_text("data/rejections.jsonl", "".join(r.to_json() + "\n" for r in rejections))
    return ds, rejections


def run_segment(ws: Workspace) -> Segmentation:
    with ws.step("segment"):
        ds = _dataset(ws)
        seg = segment(ds, substream_seed(ws.seed, "segmentation"),
                      float(ws.config["segment"]["historical_share"]))
        ws.write_json("data/segmentation.json", seg.to_dict())
    return seg


def training_config(ws: Workspace) -> training.TrainingConfig:
    t = ws.config["train"]
    return training.TrainingConfig(
        random_iterations=int(t["random_iterations"]),
        simplex=SimplexOptions(max_iterations=int(t["simplex_max_iterations"])),
        seed=substream_seed(ws.seed, "training"),
        k_range=tuple(int(k) for k in t["k_range"]),
        mode=SolutionMode(t["mode"]),
    )


def run_train(ws: Workspace) -> dict:
    with ws.step("train"):
        ds, seg = _dataset(ws), _segmentation(ws)
        cfg = training_config(ws)
        models = training.train_all(ds.subset(seg.historical), ds.subset(seg.training),
                                    cfg, workers=ws.workers)
        for k, model in models.items():
            ws.write_json(f"models/k{k}.json", model.to_dict())
        ws.write_json("models/training_config.json", {
            "random_iterations": cfg.random_iterations,
            "simplex_max_iterations": cfg.simplex.max_iterations,
            "k_range": list(cfg.k_range),
            "mode": cfg.mode.value,
            "seed": cfg.seed,
        })
    return models


def _write_trial(ws: Workspace, name: str, report: backtest.TrialReport) -> None:
    ws.write_text(f"reports/{name}.json", report.to_json() + "\n")
    ws.write_text(f"reports/{name}_rows.csv", report.rows_csv())
    ws.write_text(f"reports/{name}_weekly.csv", report.weekly_csv())


def _trial_summary(report: backtest.TrialReport) -> dict:
    return {
        "k": report.config.k,
        "weights": list(report.config.weights.as_tuple()),
        "overall": report.overall.to_dict() if report.overall else None,
        "overall_excluding_outliers": (report.overall_excluding_outliers.to_dict()
                                       if report.overall_excluding_outliers else None),
        "trend": report.trend.to_dict() if report.trend else None,
        "n_skipped": len(report.skipped),
        "outlier_ids": list(report.outlier_ids),
    }


def run_backtest(ws: Workspace, trials=(1, 2)) -> dict:
    with ws.step("backtest"):
        ds, seg = _dataset(ws), _segmentation(ws)
        b = ws.config["backtest"]
        opts = {"lag_days": int(b["lag_days"]),
                "include_estimated_test_jobs": bool(b["include_estimated_test_jobs"])}
        mode = SolutionMode(ws.config["train"]["mode"])
        out = {}
        models = _models(ws) if 1 in trials else {}
        for trial in trials:
            for k in _k_range(ws):
                if trial == 1:
                    cfg = backtest.TrialConfig.trained(models[k], label="trial1", **opts)
                else:
                    cfg = backtest.TrialConfig.untrained(k, mode=mode, label="trial2", **opts)
                report = backtest.run_trial(seg, ds, cfg, workers=ws.workers)
                _write_trial(ws, f"trial{trial}_k{k}", report)
                out[(trial, k)] = report
        ws.write_json("reports/backtest_summary.json", {
            f"trial{t}": {str(k): _trial_summary(r) for (tt, k), r in out.items() if tt == t}
            for t in trials
        })
    return out


def _safe_pearson(a, b):
    try:
        return stats.pearson(a, b)
    except ValueError:
        return None


def run_baseline(ws: Workspace) -> dict:
    with ws.step("baseline"):
        ds, seg = _dataset(ws), _segmentation(ws)
        b = ws.config["baseline"]
        spec = regression.FeatureSpec(rare_threshold=int(b["rare_threshold"]),
                                      z_cap=float(b["z_cap"]))
        model = regression.fit_stepwise(ds.subset(seg.historical + seg.training), spec)
        ws.write_json("models/regression.json", model.to_dict())

        trial1 = {k: _trial(ws, 1, k) for k in _k_range(ws)}
        best = _best_k(trial1)
        rows = trial1[best].rows
        jobs = [ds.get(r.id) for r in rows]
        reg = regression.predict_many(model, jobs)
        actual = [r.actual for r in rows]
        combined = [regression.combine_min(r.estimate, float(p)) for r, p in zip(rows, reg)]
        ana_err = [r.error_pct for r in rows]
        reg_err = list(stats.percent_errors(actual, reg))
        result = {
            "best_k": best,
            "n": len(rows),
            "regression_groups": list(model.groups),
            "regression_aic_path": list(model.aic_path),
            "analogy": stats.error_stats(actual, [r.estimate for r in rows]).to_dict(),
            "regression": stats.error_stats(actual, reg).to_dict(),
            "regression_nonpositive": int(np.sum(reg <= 0)),
            "combined_min": stats.error_stats(actual, combined).to_dict(),
            "error_correlation": _safe_pearson(ana_err, reg_err),
            "rows": [{"id": r.id, "analogy": r.estimate, "regression": float(p),
                      "combined": c, "actual": r.actual}
                     for r, p, c in zip(rows, reg, combined)],
        }
        ws.write_json("reports/baseline.json", result)
    return result


def _manual_profile(ds: Dataset, seg: Segmentation):
    jobs = ds.subset(seg.test)
    return economics.derive_manual_margin([(j.cost_eur, j.revenue_eur) for j in jobs])


def run_compare(ws: Workspace) -> dict:
    with ws.step("compare"):
        ds, seg = _dataset(ws), _segmentation(ws)
        table5 = []
        trial1 = {}
        for k in _k_range(ws):
            trial1[k] = _trial(ws, 1, k)
            cmp = backtest.compare_reports(trial1[k], _trial(ws, 2, k))
            table5.append(cmp.to_dict())
        base = ws.read_json("reports/baseline.json")
        methods = {
            f"analogy_k{base['best_k']}": base["analogy"],
            "regression": base["regression"],
            "combined_min": base["combined_min"],
        }
        try:
            manual = _manual_profile(ds, seg)
            methods["manual"] = {"n": len(manual.errors_pct), "mape": manual.mape,
                                 "q3ape": manual.q3ape, "mean_error_pct": manual.mean_error_pct,
                                 "std_error_pct": manual.to_dict()["std_error_pct"],
                                 "margin": manual.margin}
        except ValueError:
            methods["manual"] = None
        result = {"trained_vs_untrained": table5, "methods": methods,
                  "error_correlation": base["error_correlation"]}
        ws.write_json("reports/compare.json", result)
    return result


def _auction_errors(rows, key) -> tuple:
    return tuple(key(r) / 100.0 for r in rows)


def run_simulate(ws: Workspace) -> dict:
    with ws.step("simulate"):
        ds, seg = _dataset(ws), _segmentation(ws)
        s = ws.config["simulate"]
        manual = _manual_profile(ds, seg)
        trial1 = {k: _trial(ws, 1, k) for k in _k_range(ws)}
        best = _best_k(trial1)
        flagged = set(trial1[best].outlier_ids)
        rows = [r for r in trial1[best].rows if r.id not in flagged]
        base = ws.read_json("reports/baseline.json")
        combined = [(c["combined"] - c["actual"]) / c["actual"] * 100.0
                    for c in base["rows"] if c["id"] not in flagged]

        margin = manual.margin if s["target_margin"] is None else float(s["target_margin"])
        seed = substream_seed(ws.seed, "simulation")
        common = dict(
            costs=tuple(j.cost_eur for j in ds.subset(seg.test)),
            manual_errors=tuple(e / 100.0 for e in manual.errors_pct),
            n_bidders=int(s["n_bidders"]), target_margin=margin, trials=int(s["trials"]),
            common_random_numbers=bool(s["common_random_numbers"]),
        )
        arms = {
            "analogy": economics.AuctionConfig(
                method_errors=_auction_errors(rows, lambda r: r.error_pct), seed=seed, **common),
            "combined_min": economics.AuctionConfig(
                method_errors=tuple(e / 100.0 for e in combined), seed=seed + 1, **common),
        }
        rate = float(s["hourly_rate"])
        result = {"best_k": best, "target_margin": margin, "hourly_rate": rate,
                  "excluded_outliers": sorted(flagged, key=id_key), "arms": {}}
        for name, cfg in arms.items():
            res = economics.simulate_indifference(cfg, workers=ws.workers)
            d = res.to_dict()
            d["breakeven_hours"] = economics.breakeven_hours(res.indifference_cost, rate)
            result["arms"][name] = d
        ws.write_json("reports/indifference.json", result)

        grid = economics.sensitivity_sweep(arms["analogy"], s["sweep_bidders"],
                                           s["sweep_margins"], workers=ws.workers)
        ws.write_json("reports/sweep.json", grid.to_dict())
        ws.write_text("reports/sweep.csv", grid.to_csv())
    return result


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def run_report(ws: Workspace) -> dict:
    """Collect the step outputs into summary.json plus flat CSV tables."""
    with ws.step("report"):
        summary = ws.read_json("reports/backtest_summary.json")
        compare = ws.read_json("reports/compare.json")
        sim = ws.read_json("reports/indifference.json")

        overall_rows = []
        for trial in sorted(summary):
            for k in sorted(summary[trial], key=int):
                o = summary[trial][k]["overall"] or {}
                x = summary[trial][k]["overall_excluding_outliers"] or {}
                tr = summary[trial][k]["trend"] or {}
                overall_rows.append([trial, int(k), o.get("n"), o.get("mape"), o.get("q3ape"),
                                     x.get("mape"), tr.get("slope"), tr.get("p_value")])
        ws.write_text("reports/overall.csv", _csv(
            ["trial", "k", "n", "mape", "q3ape", "mape_excluding_outliers",
             "trend_slope", "trend_p"], overall_rows))
        ws.write_text("reports/trained_vs_untrained.csv", _csv(
            ["k", "trained_mape", "untrained_mape", "t", "p_value", "conclusion"],
            [[c["k"], c["trained_mape"], c["untrained_mape"], c["t"], c["p_value"],
              c["conclusion"]] for c in compare["trained_vs_untrained"]]))
        ws.write_text("reports/methods.csv", _csv(
            ["method", "n", "mape", "q3ape"],
            [[name, m.get("n"), m.get("mape"), m.get("q3ape")]
             for name, m in compare["methods"].items() if m]))

        best = sim["best_k"]
        t1 = ws.read_json(f"reports/trial1_k{best}.json")
        seg_rows = []
        for table, classes in t1["segments"].items():
            for name, c in classes.items():
                seg_rows.append([table, name, c["n"], c["mape"], c["se"], c["ci"][0], c["ci"][1]])
        ws.write_text("reports/segments.csv", _csv(
            ["table", "class", "n", "mape", "se", "ci_low", "ci_high"], seg_rows))

        out = {
            "best_k": best,
            "backtest": summary,
            "compare": compare,
            "indifference": sim,
        }
        ws.write_json("reports/summary.json", out)
    return out


def run_all(ws: Workspace, source=None) -> None:
    """Data, segmentation, training, both trials, baseline, comparison, simulation, report."""
    if source is None:
        run_synth(ws)
    else:
        run_ingest(ws, source)
    run_segment(ws)
    run_train(ws)
    run_backtest(ws)
    run_baseline(ws)
    run_compare(ws)
    run_simulate(ws)
    run_report(ws)


def strip_volatile(manifest: dict) -> dict:
    return {k: v for k, v in manifest.items() if k not in VOLATILE_MANIFEST_KEYS}


def tree_digest(root) -> dict:
    """Digest of every file under ``root``, ignoring manifest timing fields."""
    root = Path(root)
    out = {}
    for p in sorted(root.rglob("*")):
        if not p.is_file():
            continue
        rel = p.relative_to(root).as_posix()
        data = p.read_bytes()
        if rel.startswith("manifests/"):
            data = canonical_json(strip_volatile(json.loads(data))).encode()
        out[rel] = sha256_bytes(data)
    return out

