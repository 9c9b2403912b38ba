"""A stepwise linear baseline and the min-combination forecast."""

# %%
import numpy as np

from freightknn import stats
from freightknn.backtest import TrialConfig, run_trial
from freightknn.domain import segment
from freightknn.regression import combine_min, fit_stepwise, predict
from freightknn.synth import SyntheticSpec, generate

ds = generate(SyntheticSpec(n_jobs=900, n_lanes=5, seed=5))
seg = segment(ds, seed=5)

# %% Fit on everything that is not test data, then predict the test jobs.
model = fit_stepwise(ds.subset(seg.historical + seg.training))
print("selected groups:", model.groups)
print("AIC path:", [round(a, 1) for a in model.aic_path])

# %%
analogy = {r.id: r.estimate for r in run_trial(seg, ds, TrialConfig.untrained(3)).rows}
actual, est_a, est_r, est_c = [], [], [], []
for jid, a in analogy.items():
    job = ds.get(jid)
    r = predict(model, job)
    actual.append(job.cost_eur)
    est_a.append(a)
    est_r.append(r)
    est_c.append(combine_min(a, r))

# %% The linear model can go non-positive; the combination drops such estimates.
print(f"analogy    MAPE {stats.mape(actual, est_a):7.2f}%")
print(f"regression MAPE {stats.mape(actual, est_r):7.2f}%  "
      f"({sum(v <= 0 for v in est_r)} non-positive)")
print(f"combined   MAPE {stats.mape(actual, est_c):7.2f}%")
err_a = np.subtract(est_a, actual) / actual
err_r = np.subtract(est_r, actual) / actual
print(f"error correlation {stats.pearson(err_a, err_r):.3f}")
