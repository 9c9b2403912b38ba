"""Random search followed by a simplex polish, one model per k."""

# %%
import time

from freightknn.domain import segment
from freightknn.synth import SyntheticSpec, generate
from freightknn.training import TrainingConfig, objective_mape, train_all

ds = generate(SyntheticSpec(n_jobs=1200, n_lanes=5, seed=7))
seg = segment(ds, seed=7)
hist, train = ds.subset(seg.historical), ds.subset(seg.training)
print(f"historical {len(hist)}, training {len(train)}, test {len(seg.test)}")

# %% Candidate 0 is always (1, 1, 1, 1), so training can never lose to equal weights.
cfg = TrainingConfig(random_iterations=300, seed=7, k_range=(1, 3, 5))
t0 = time.perf_counter()
models = train_all(hist, train, cfg, workers=4)
print(f"trained {len(models)} models in {time.perf_counter() - t0:.1f}s")

# %%
for k, m in models.items():
    ones = objective_mape(hist, train, k, (1, 1, 1, 1))
    x = ", ".join(f"{v:.4f}" for v in m.weights.as_tuple())
    print(f"k={k}: equal weights {ones:6.2f}%  random search {m.random_search_mape:6.2f}%  "
          f"polished {m.training_mape:6.2f}%  w=({x})")
