"""How much estimator labor an automated method is worth in a sealed-bid auction."""

# %%
from dataclasses import replace

import numpy as np

from freightknn.economics import (
    AuctionConfig, breakeven_hours, derive_manual_margin, sensitivity_sweep,
    simulate_indifference,
)
from freightknn.synth import SyntheticSpec, generate

ds = generate(SyntheticSpec(n_jobs=800, n_lanes=5, seed=9))

# %% Revenues alone reveal the markup and the implied manual errors.
profile = derive_manual_margin([(j.cost_eur, j.revenue_eur) for j in ds])
print(f"margin {100 * profile.margin:.2f}%, manual MAPE {profile.mape:.2f}%, "
      f"sd {profile.std_error_pct:.2f}%")

# %% Pretend the method errs half as much as a person.
manual = np.array(profile.errors_pct) / 100
cfg = AuctionConfig(costs=[j.cost_eur for j in ds], manual_errors=manual,
                    method_errors=manual / 2, target_margin=profile.margin, seed=9)
res = simulate_indifference(cfg, workers=4)
print(f"P0 {res.manual_profit:.2f}  P1 {res.method_profit:.2f}  "
      f"C_e {res.indifference_cost:.2f} EUR (95% CI {res.ci[0]:.2f} to {res.ci[1]:.2f})")
print(f"that is {60 * breakeven_hours(res.indifference_cost):.1f} minutes of labor per job")

# %% A more accurate firm wins more often but at thinner profit per win, so the
# sign of C_e depends on how crowded the auction is and on the margin.
grid = sensitivity_sweep(replace(cfg, trials=5000), bidders=[2, 3, 5],
                         margins=[0.05, 0.15, 0.25])
print(grid.to_csv())
