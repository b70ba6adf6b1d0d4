"""Exact permutation rank tests on session-level averages.

Ranks are mid-ranks, doubled so every rank sum is an integer; statistics are
compared in integer arithmetic, so ties and equal statistics are counted
exactly. Above :data:`EXACT_MAX` pooled observations the tests fall back to
the usual large-sample approximations.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from ..env import BEGINNER, EXPERT
from ..simulation import SessionDataset
from .frames import worker_frame

EXACT_MAX = 14


class InsufficientSessionsError(ValueError):
    """A compared group has fewer than two sessions."""


def _doubled_ranks(values: np.ndarray) -> np.ndarray:
    return np.rint(2 * stats.rankdata(values)).astype(np.int64)


@lru_cache(maxsize=None)
def _combos(n: int, k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(n), k)), dtype=np.int64).reshape(-1, k)


def mann_whitney_exact(x: Sequence[float], y: Sequence[float]) -> float:
    """Two-sided exact p-value: P(|R - E R| >= |r_obs - E R|) over all splits."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    n1, n = len(x), len(x) + len(y)
    ranks = _doubled_ranks(np.concatenate([x, y]))
    centre = n1 * (n + 1)  # doubled expected rank sum of the first sample
    observed = abs(int(ranks[:n1].sum()) - centre)
    sums = ranks[_combos(n, n1)].sum(axis=1)
    return float(np.count_nonzero(np.abs(sums - centre) >= observed) / len(sums))


def kruskal_wallis_exact(*samples: Sequence[float]) -> float:
    """Exact p-value of the Kruskal-Wallis statistic over all group assignments.

    The statistic is monotone in ``sum_g R_g**2 / n_g`` once ties are fixed, so
    that sum (scaled to an integer) is what gets compared.
    """
    sizes = [len(s) for s in samples]
    if any(k == 0 for k in sizes):
        raise ValueError("empty sample")
    ranks = _doubled_ranks(np.concatenate([np.asarray(s, float) for s in samples]))
    scale = math.lcm(*sizes)
    weights = [scale // k for k in sizes]
    bounds = np.cumsum([0, *sizes])
    observed = sum(int(ranks[a:b].sum()) ** 2 * w for a, b, w in zip(bounds[:-1], bounds[1:], weights))
    if len(sizes) == 1:
        return 1.0
    # The first group is enumerated in Python, the rest in one vectorised block.
    order = sorted(range(len(sizes)), key=lambda g: sizes[g])
    sizes = [sizes[g] for g in order]
    weights = np.array([weights[g] for g in order[1:]], dtype=np.int64)
    onehot = _assignments(tuple(sizes[1:]))  # (groups-1, count, rest)
    hits = total = 0
    everyone = np.arange(len(ranks))
    for pick in _combos(len(ranks), sizes[0]):
        rest = np.delete(everyone, pick)
        head = int(ranks[pick].sum()) ** 2 * (scale // sizes[0])
        sums = onehot @ ranks[rest]  # (groups-1, count)
        stat = head + (sums * sums * weights[:, None]).sum(axis=0)
        hits += int(np.count_nonzero(stat >= observed))
        total += stat.shape[0]
    return hits / total


@lru_cache(maxsize=None)
def _assignments(sizes: tuple[int, ...]) -> np.ndarray:
    """One-hot group membership for every split of ``sum(sizes)`` positions."""
    m = sum(sizes)
    labels = _split(np.arange(m), sizes)
    out = np.zeros((len(sizes), len(labels), m), dtype=np.int64)
    for g in range(len(sizes)):
        out[g] = labels == g
    return out


def _split(positions: np.ndarray, sizes: tuple[int, ...]) -> np.ndarray:
    if len(sizes) == 1:
        return np.zeros((1, len(positions)), dtype=np.int64)
    rows = []
    for pick in _combos(len(positions), sizes[0]):
        sub = _split(np.delete(positions, pick), sizes[1:]) + 1
        block = np.empty((sub.shape[0], len(positions)), dtype=np.int64)
        rest = np.delete(np.arange(len(positions)), pick)
        block[:, pick] = 0
        block[:, rest] = sub
        rows.append(block)
    return np.concatenate(rows)


def mann_whitney(x, y) -> tuple[float, str]:
    if len(x) + len(y) <= EXACT_MAX:
        return mann_whitney_exact(x, y), "exact"
    return float(stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic").pvalue), "normal"


def kruskal_wallis(*samples) -> tuple[float, str]:
    if sum(len(s) for s in samples) <= EXACT_MAX:
        return kruskal_wallis_exact(*samples), "exact"
    return float(stats.kruskal(*samples).pvalue), "chi-square"


def session_rates(dataset: SessionDataset) -> pd.DataFrame:
    """Per-session truthful-action rates by player type, with and without unanswered actions."""
    wf = worker_frame(dataset)
    rows = []
    for (session, mech), df in wf.groupby(["session", "mechanism"], sort=True):
        row = {"session": session, "mechanism": mech}
        for label, sub in (("beginner", df[df["true_type"] == BEGINNER]),
                           ("expert", df[df["true_type"] == EXPERT]),
                           ("all", df)):
            answered = sub[sub["unanswered"] == 0]
            row[f"{label}_truthful"] = sub["truthful"].mean() if len(sub) else np.nan
            row[f"{label}_unanswered"] = sub["unanswered"].mean() if len(sub) else np.nan
            row[f"{label}_truthful_answered"] = answered["truthful"].mean() if len(answered) else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


GROUPINGS = {
    "all mechanisms equal": None,
    "direct vs extended": (("2x2-I", "2x2-E"), ("3x3-I", "3x3-E")),
    "implicit vs explicit": (("2x2-I", "3x3-I"), ("2x2-E", "3x3-E")),
}


def rank_tests(dataset: SessionDataset) -> pd.DataFrame:
    rates = session_rates(dataset)
    mechs = [m for m in ("2x2-I", "2x2-E", "3x3-I", "3x3-E") if m in set(rates["mechanism"])]
    rows = []
    for measure in ("beginner_truthful", "expert_truthful", "all_truthful",
                    "beginner_truthful_answered", "expert_truthful_answered", "all_truthful_answered"):
        for name, split in GROUPINGS.items():
            if split is None:
                groups = [rates.loc[rates["mechanism"] == m, measure].dropna().to_numpy() for m in mechs]
            else:
                groups = [rates.loc[rates["mechanism"].isin(side), measure].dropna().to_numpy() for side in split]
            if len(groups) < 2 or any(len(g) < 2 for g in groups):
                raise InsufficientSessionsError(f"{name}: each group needs at least two sessions with data on {measure}")
            p, method = kruskal_wallis(*groups) if split is None else mann_whitney(*groups)
            rows.append({"measure": measure, "test": name, "p": p, "method": method,
                         "sessions": int(sum(len(g) for g in groups))})
    return pd.DataFrame(rows)
