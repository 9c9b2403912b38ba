"""Distances between jobs and what the nearest neighbors look like."""

# %%
from freightknn.domain import GeoPoint, JobRecord
from freightknn.geo import haversine_km
from freightknn.knn import AttributeWeights, EstimatorConfig, estimate_cost, nearest_neighbors
from freightknn.synth import SyntheticSpec, generate

dublin, london = GeoPoint(53.3498, -6.2603), GeoPoint(51.5074, -0.1278)
print(f"Dublin to London over the sphere: {haversine_km(dublin, london):.1f} km")

# %% A small synthetic log: 3 lanes, 300 jobs.
ds = generate(SyntheticSpec(n_jobs=300, n_lanes=3, seed=1))
pool = list(ds)[:-1]
probe = list(ds)[-1]
print(f"probe {probe.id}: day {probe.date}, load {probe.load_size:.3f}, cost {probe.cost_eur:.2f}")

# %% Equal weights let the date gap dominate (days are squared, kilometres are not).
for w in (AttributeWeights(), AttributeWeights(1.0, 1.0, 0.0, 1.0)):
    cfg = EstimatorConfig(k=3, weights=w)
    print("weights", w.as_tuple())
    for n in nearest_neighbors(pool, probe, cfg):
        print(f"   {n.job_id}  D={n.distance:10.3f}  cost/container={n.normalized_cost:9.2f}")
    print(f"   estimate {estimate_cost(pool, probe, cfg):.2f}")

# %% The two solution-weighting modes side by side.
for mode in ("proportional", "inverse_distance"):
    cfg = EstimatorConfig(k=5, mode=mode)
    print(f"{mode:17s} estimate {estimate_cost(pool, probe, cfg):9.2f}")

# %% An exact duplicate short-circuits the weighting and reproduces its cost.
twin = JobRecord("twin", probe.date, probe.collection, probe.delivery, probe.load_size,
                 probe.cost_eur)
print("with a twin in the pool:", estimate_cost(pool + [twin], probe, EstimatorConfig(k=5)))
