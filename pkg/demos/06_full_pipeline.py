"""The whole chain through the command-line entry point, twice, to check reproducibility."""

# %%
import json
import sys
import tempfile
from pathlib import Path

from freightknn.cli import main
from freightknn.pipeline import tree_digest

root = Path(tempfile.mkdtemp(prefix="freightknn-"))
config = root / "config.json"
config.write_text(json.dumps({"synth": {"n_jobs": 800},
                              "train": {"random_iterations": 100, "k_range": [1, 2, 3]},
                              "simulate": {"trials": 5000}}))

# %%
for name, workers in (("a", 4), ("b", 1)):
    code = main(["--seed", "1", "--config", str(config), "--out", str(root / name),
                 "--workers", str(workers), "pipeline"])
    if code:
        sys.exit(code)

# %% Same seed, different worker counts: identical trees (manifest timings aside).
same = tree_digest(root / "a") == tree_digest(root / "b")
print(f"{len(tree_digest(root / 'a'))} files, identical: {same}")
summary = json.loads((root / "a" / "reports" / "summary.json").read_text())
print("best k:", summary["best_k"])
for name, s in summary["compare"]["methods"].items():
    print(f"  {name:14s} MAPE {s['mape']:7.2f}%  Q3APE {s['q3ape']:7.2f}%  n={s['n']}")
for name, a in summary["indifference"]["arms"].items():
    print(f"  {name:14s} C_e {a['indifference_cost']:7.2f} EUR, "
          f"{a['breakeven_hours']:.2f} h of estimator time")
print("outputs in", root)
