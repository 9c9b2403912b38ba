"""Attribute-weight training: seeded random search, then simplex refinement.

One model is trained per neighbor count k. The error criterion is the MAPE of
estimating every training-set job from the historical set.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .knn import AttributeWeights, PairwiseProblem, SolutionMode
from .simplex import SimplexOptions, minimize

DESK_RANDOM_ITERATIONS = 500
FULL_RANDOM_ITERATIONS = 22_500
EQUAL_WEIGHTS = (1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class TrainingConfig:
    random_iterations: int = DESK_RANDOM_ITERATIONS
    simplex: SimplexOptions = field(default_factory=SimplexOptions)
    seed: int = 0
    k_range: tuple = (1, 2, 3, 4, 5, 6)
    mode: SolutionMode = SolutionMode.PROPORTIONAL

    def __post_init__(self):
        if self.random_iterations < 0:
            raise ValueError("random_iterations must be >= 0")
        if not self.k_range:
            raise ValueError("k_range must be non-empty")
        object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        object.__setattr__(self, "mode", SolutionMode(self.mode))


@dataclass(frozen=True)
class TrainedModel:
    k: int
    weights: AttributeWeights
    training_mape: float
    random_search_mape: float
    iterations_used: tuple = (0, 0)
    seed: int = 0
    mode: SolutionMode = SolutionMode.PROPORTIONAL

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "weights": list(self.weights.as_tuple()),
            "training_mape": self.training_mape,
            "random_search_mape": self.random_search_mape,
            "iterations_used": {"random": self.iterations_used[0],
                                "simplex": self.iterations_used[1]},
            "seed": self.seed,
            "mode": SolutionMode(self.mode).value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        it = d.get("iterations_used", {})
        return cls(
            k=int(d["k"]),
            weights=AttributeWeights.from_sequence(d["weights"]),
            training_mape=float(d["training_mape"]),
            random_search_mape=float(d.get("random_search_mape", d["training_mape"])),
            iterations_used=(int(it.get("random", 0)), int(it.get("simplex", 0))),
            seed=int(d.get("seed", 0)),
            mode=SolutionMode(d.get("mode", "proportional")),
        )


class TrainingObjective:
    """Callable ``w -> MAPE`` over fixed historical and training sets.

    Negative weight components are clamped to zero before use. Returns
    ``inf`` if any training job cannot be estimated.
    """

    def __init__(self, historical, training, k: int,
                 mode=SolutionMode.PROPORTIONAL, problem: Optional[PairwiseProblem] = None):
        if not historical or not training:
            raise ValueError("historical and training sets must be non-empty")
        self.k = int(k)
        self.mode = SolutionMode(mode)
        self.problem = problem or PairwiseProblem(historical, training, exclude_self=False)
        self.actual = np.array([j.cost_eur for j in self.problem.probes], dtype=np.float64)
        if np.any(self.actual <= 0):
            raise ValueError("training costs must be > 0")

    def __call__(self, w) -> float:
        w = np.maximum(np.asarray(w, dtype=np.float64).reshape(4), 0.0)
        est = self.problem.estimate(w, self.k, self.mode).values
        if not np.all(np.isfinite(est)):
            return math.inf
        return float(np.mean(np.abs(est - self.actual) / self.actual) * 100.0)


def objective_mape(historical, training, k: int, w, mode=SolutionMode.PROPORTIONAL) -> float:
    return TrainingObjective(historical, training, k, mode)(w)


def candidate_weights(seed: int, index: int) -> np.ndarray:
    """Candidate ``index`` of the search: 0 is all-ones, others uniform on [0, 1]^4."""
    if index == 0:
        return np.array(EQUAL_WEIGHTS)
    return np.random.default_rng([seed, index]).random(4)


def random_search(historical, training, k: int, cfg: TrainingConfig,
                  objective: Optional[TrainingObjective] = None, workers: int = 1):
    """Best of ``cfg.random_iterations`` random draws plus the all-ones candidate.

    Each candidate comes from its own seeded substream, so the result does
    not depend on ``workers``. Ties go to the lowest candidate index.

    Returns
    -------
    (AttributeWeights, float)
    """
    objective = objective or TrainingObjective(historical, training, k, cfg.mode)
    n = cfg.random_iterations + 1

    def evaluate(indices):
        return [objective(candidate_weights(cfg.seed, i)) for i in indices]

    if workers <= 1 or n < 2:
        scores = evaluate(range(n))
    else:
        chunks = [range(s, min(s + 16, n)) for s in range(0, n, 16)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = [s for part in pool.map(evaluate, chunks) for s in part]
    best = min(range(n), key=lambda i: (scores[i], i))
    return AttributeWeights.from_sequence(candidate_weights(cfg.seed, best)), scores[best]


def fine_tune(historical, training, k: int, start: AttributeWeights,
              opts: Optional[SimplexOptions] = None,
              objective: Optional[TrainingObjective] = None,
              mode=SolutionMode.PROPORTIONAL, random_iterations: int = 0,
              seed: int = 0) -> TrainedModel:
    """Refine ``start`` with the downhill simplex; never returns a worse model."""
    objective = objective or TrainingObjective(historical, training, k, mode)
    x0 = start.as_array()
    res = minimize(objective, x0, opts or SimplexOptions())
    weights = AttributeWeights.clamped(res.x)
    return TrainedModel(
        k=int(k),
        weights=weights,
        training_mape=objective(weights.as_array()),
        random_search_mape=objective(x0),
        iterations_used=(int(random_iterations), res.iterations),
        seed=seed,
        mode=objective.mode,
    )


def train_one(historical, training, k: int, cfg: TrainingConfig, workers: int = 1,
              problem: Optional[PairwiseProblem] = None) -> TrainedModel:
    objective = TrainingObjective(historical, training, k, cfg.mode, problem=problem)
    start, _ = random_search(historical, training, k, cfg, objective, workers)
    return fine_tune(historical, training, k, start, cfg.simplex, objective,
                     random_iterations=cfg.random_iterations, seed=cfg.seed)


def train_all(historical, training, cfg: TrainingConfig, workers: int = 1) -> dict:
    """Independently trained models keyed by k.

    The probe-by-pool geometry is shared across k values.
    """
    problem = PairwiseProblem(historical, training, exclude_self=False)
    return {k: train_one(historical, training, k, cfg, workers, problem) for k in cfg.k_range}
