"""Synthetic regression data with known mechanism effects."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..simulation import LAB_GRID, GridEntry

# Effects on the worker-optimal incidence, in probability points, against the 2x2-I baseline.
PLANTED_EFFECTS = {"2x2-E": -0.390, "3x3-I": -0.109, "3x3-E": -0.383}
PLANTED_BASE = 0.586
PLANTED_TYPE_EFFECTS = {"BB": 0.0, "BE": 0.177, "EE": 0.133}


@dataclass(frozen=True)
class PlantedDesign:
    effects: dict
    base: float = PLANTED_BASE
    type_effects: dict = None
    grid: tuple[GridEntry, ...] = LAB_GRID
    periods: int = 10
    session_sd: float = 0.0

    def probabilities(self, mechanism: str, pair: str) -> float:
        type_effects = self.type_effects or PLANTED_TYPE_EFFECTS
        p = self.base + self.effects.get(mechanism, 0.0) + type_effects[pair]
        if not 0 <= p <= 1:
            raise ValueError(f"planted probability {p} outside [0, 1] for {mechanism}/{pair}")
        return p


def planted_frame(design: PlantedDesign, seed: int) -> pd.DataFrame:
    """Group-period rows whose outcome indicator is Bernoulli with the planted mean.

    ``session_sd`` adds a normal session-level shift to every probability
    (clipped to [0, 1]) to induce within-cluster correlation.
    """
    rng = np.random.default_rng(seed)
    rows = []
    session = 0
    for entry in design.grid:
        for size in entry.sizes:
            session += 1
            shift = rng.normal(0, design.session_sd) if design.session_sd else 0.0
            for period in range(design.periods):
                for group in range(size // 3):
                    types = rng.random(2) < 0.5
                    pair = {0: "BB", 1: "BE", 2: "EE"}[int(types.sum())]
                    p = min(max(design.probabilities(entry.mechanism, pair) + shift, 0.0), 1.0)
                    rows.append(
                        {
                            "session": session,
                            "mechanism": entry.mechanism,
                            "period": period + 1,
                            "group": group + 1,
                            "type_pair": pair,
                            "censored": False,
                            "worker_optimal": float(rng.random() < p),
                        }
                    )
    return pd.DataFrame(rows)


def planted_estimates(design: PlantedDesign, seeds, spec=None) -> np.ndarray:
    """Estimated mechanism coefficients, one row per seed, columns in ``design.effects`` order."""
    from .regression import RegressionSpec, fit_lpm

    spec = spec or RegressionSpec("worker_optimal")
    terms = [f"{m} mechanism" for m in design.effects]
    rows = []
    for seed in seeds:
        fit = fit_lpm(planted_frame(design, seed), spec)
        rows.append([fit[t] for t in terms])
    return np.array(rows)


@dataclass(frozen=True)
class RecoveryRegion:
    """Joint Monte Carlo acceptance region around the planted effects.

    A point is inside when its Mahalanobis distance to the plants, under the
    Monte Carlo covariance of the estimates, is at most the ``level`` quantile
    of the same distance over the Monte Carlo draws.
    """

    centre: np.ndarray
    precision: np.ndarray
    threshold: float

    def distance(self, estimates: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(estimates) - self.centre
        return np.einsum("ij,jk,ik->i", d, self.precision, d)

    def contains(self, estimates: np.ndarray) -> np.ndarray:
        return self.distance(estimates) <= self.threshold


def recovery_region(design: PlantedDesign, reps: int = 400, first_seed: int = 10_000, level: float = 0.95) -> RecoveryRegion:
    draws = planted_estimates(design, range(first_seed, first_seed + reps))
    centre = np.array(list(design.effects.values()), dtype=float)
    precision = np.linalg.inv(np.cov(draws.T))
    region = RecoveryRegion(centre, precision, 0.0)
    return RecoveryRegion(centre, precision, float(np.quantile(region.distance(draws), level)))
