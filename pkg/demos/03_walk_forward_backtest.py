"""Walk-forward evaluation: trained weights against equal weights."""

# %%
from freightknn.backtest import TrialConfig, audit_chronology, compare_reports, run_trial
from freightknn.domain import segment
from freightknn.synth import SyntheticSpec, generate
from freightknn.training import TrainingConfig, train_all

ds = generate(SyntheticSpec(n_jobs=900, n_lanes=5, seed=3))
seg = segment(ds, seed=3)
model = train_all(ds.subset(seg.historical), ds.subset(seg.training),
                  TrainingConfig(random_iterations=200, seed=3, k_range=(3,)))[3]

# %% Each test job only sees history at least 30 days older than itself.
trained = run_trial(seg, ds, TrialConfig.trained(model))
untrained = run_trial(seg, ds, TrialConfig.untrained(3))
print("look-ahead violations:", len(audit_chronology(trained, ds)))
for name, rep in (("trained", trained), ("equal weights", untrained)):
    o = rep.overall
    print(f"{name:14s} MAPE {o.mape:6.2f}%  Q3APE {o.q3ape:6.2f}%  rows {o.n}  "
          f"skipped {len(rep.skipped)}  outliers {len(rep.outlier_ids)}")

# %% Paired one-sided t test on per-job APE.
c = compare_reports(trained, untrained)
print(f"t = {c.t:.3f}, p = {c.p_value:.3g}: {c.conclusion}")

# %% Does accuracy drift over the test window?
t = trained.trend
print(f"APE slope {t.slope:.4f} %/day, 95% CI ({t.ci[0]:.4f}, {t.ci[1]:.4f}), p = {t.p_value:.3g}")
for p in trained.weekly[:5]:
    print(f"  week {p.week:2d}: {p.n:3d} jobs, MAPE {p.mape:6.2f}%")

# %% Error by load-size class.
for cls, s in trained.segments["load_size"].items():
    if s["n"]:
        print(f"  {cls:20s} n={s['n']:4d}  MAPE {s['mape']:6.2f}%")
