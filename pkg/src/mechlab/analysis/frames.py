"""Outcome classification and the tabular views used by the analysis."""
from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np
import pandas as pd

from ..env import BEGINNER, EXPERT
from ..mechanism import BUILTIN_NAMES, UNANSWERED, builtin
from ..simulation import SessionDataset

BASELINE = "2x2-I"
TYPE_PAIRS = ("BB", "BE", "EE")


class DataIntegrityError(ValueError):
    """The dataset does not have the shape an analysis step requires."""


class OutcomeClass(Enum):
    TRUTHFUL = "truthful"
    WORKER_OPTIMAL = "worker-optimal"
    BOTH = "both"  # censored: consistent with either equilibrium
    NEITHER = "neither"


def classify(types: Sequence[str], messages: Sequence[str]) -> OutcomeClass:
    """Classify an action pair given canonical messages in {B, E, U}."""
    types, messages = tuple(types), tuple(messages)
    if messages == (EXPERT, EXPERT):
        return OutcomeClass.BOTH if types == (EXPERT, EXPERT) else OutcomeClass.WORKER_OPTIMAL
    if messages == types:
        return OutcomeClass.TRUTHFUL
    return OutcomeClass.NEITHER


def type_pair(types: Sequence[str]) -> str:
    return "".join(sorted(types))


def group_frame(dataset: SessionDataset, include_practice: bool = False) -> pd.DataFrame:
    """One row per group and period, messages mapped to their canonical meaning."""
    mechs = {name: builtin(name) for name in BUILTIN_NAMES}
    rows = []
    for r in dataset.records:
        if r.practice and not include_practice:
            continue
        mech = mechs[r.mechanism]
        canon = tuple(mech.message(k, m).canonical for k, m in enumerate(r.messages))
        cls = classify(r.types, canon)
        rows.append(
            {
                "session": r.session,
                "mechanism": r.mechanism,
                "period": r.period,
                "group": r.group,
                "type1": r.types[0],
                "type2": r.types[1],
                "msg1": canon[0],
                "msg2": canon[1],
                "type_pair": type_pair(r.types),
                "outcome": cls.value,
                "censored": cls is OutcomeClass.BOTH,
                "worker_optimal": float(cls in (OutcomeClass.WORKER_OPTIMAL, OutcomeClass.BOTH)),
                "truthful": float(cls in (OutcomeClass.TRUTHFUL, OutcomeClass.BOTH)),
                "both_expert_claims": float(canon == (EXPERT, EXPERT)),
                "both_truthful": float(canon == r.types),
                "staffer_profit": r.staffer_payoff,
                "workers_profit": r.workers[0].payoff + r.workers[1].payoff,
                "paid": r.paid,
            }
        )
    return pd.DataFrame(rows, columns=_GROUP_COLUMNS)


_GROUP_COLUMNS = [
    "session", "mechanism", "period", "group", "type1", "type2", "msg1", "msg2",
    "type_pair", "outcome", "censored", "worker_optimal", "truthful",
    "both_expert_claims", "both_truthful", "staffer_profit", "workers_profit", "paid",
]


def worker_frame(dataset: SessionDataset, include_practice: bool = False) -> pd.DataFrame:
    """One row per worker and period."""
    mechs = {name: builtin(name) for name in BUILTIN_NAMES}
    rows = []
    for r in dataset.records:
        if r.practice and not include_practice:
            continue
        mech = mechs[r.mechanism]
        for pos, w in enumerate(r.workers):
            canon = mech.message(pos, w.message).canonical
            rows.append(
                {
                    "session": r.session,
                    "mechanism": r.mechanism,
                    "period": r.period,
                    "subject": w.subject,
                    "true_type": w.true_type,
                    "type_pair": type_pair(r.types),
                    "message": canon,
                    "truthful": float(canon == w.true_type),
                    "deceptive": float(canon not in (w.true_type, UNANSWERED)),
                    "unanswered": float(canon == UNANSWERED),
                    "expert_claim": float(canon == EXPERT),
                }
            )
    cols = ["session", "mechanism", "period", "subject", "true_type", "type_pair", "message",
            "truthful", "deceptive", "unanswered", "expert_claim"]
    return pd.DataFrame(rows, columns=cols)


def beginner_frame(dataset: SessionDataset) -> pd.DataFrame:
    wf = worker_frame(dataset)
    return wf[wf["true_type"] == BEGINNER].reset_index(drop=True)


def summary_rates(dataset: SessionDataset) -> pd.DataFrame:
    """Rates by mechanism and type pair; empty cells are NaN, never 0."""
    gf = group_frame(dataset)
    wf = worker_frame(dataset)
    wf_b = wf[wf["true_type"] == BEGINNER]
    rows = []
    for mech in BUILTIN_NAMES:
        for pair in (*TYPE_PAIRS, "all"):
            g = gf[gf["mechanism"] == mech]
            b = wf_b[wf_b["mechanism"] == mech]
            if pair != "all":
                g = g[g["type_pair"] == pair]
                b = b[b["type_pair"] == pair]
            rows.append(
                {
                    "mechanism": mech,
                    "type_pair": pair,
                    "n_groups": len(g),
                    "both_expert_rate": _mean(g["both_expert_claims"]),
                    "both_truthful_rate": _mean(g["both_truthful"]),
                    "n_beginner_actions": len(b),
                    "beginner_truthful_rate": _mean(b["truthful"]),
                    "beginner_deceptive_rate": _mean(b["deceptive"]),
                    "beginner_unanswered_rate": _mean(b["unanswered"]),
                }
            )
    return pd.DataFrame(rows)


def _mean(col: pd.Series) -> float:
    return float(col.mean()) if len(col) else float("nan")


def expert_claim_histogram(dataset: SessionDataset, periods: int = 10) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Expert claims per worker subject over the paid periods, and their bins.

    Returns ``(per_subject, bins)``; ``bins`` has one row per mechanism and
    count ``0..periods``.
    """
    wf = worker_frame(dataset)
    if wf.empty:
        return (
            pd.DataFrame(columns=["session", "subject", "mechanism", "periods", "expert_claims"]),
            pd.DataFrame(columns=["mechanism", "expert_claims", "subjects"]),
        )
    per = (
        wf.groupby(["session", "subject", "mechanism"], sort=True)
        .agg(periods=("period", "size"), expert_claims=("expert_claim", "sum"))
        .reset_index()
    )
    bad = per[per["periods"] != periods]
    if len(bad):
        row = bad.iloc[0]
        raise DataIntegrityError(
            f"subject {row['subject']} of session {row['session']} has {row['periods']} "
            f"non-practice records, expected {periods}"
        )
    per["expert_claims"] = per["expert_claims"].astype(int)
    bins = []
    for mech in sorted(per["mechanism"].unique(), key=BUILTIN_NAMES.index):
        counts = np.bincount(per.loc[per["mechanism"] == mech, "expert_claims"], minlength=periods + 1)
        bins.extend({"mechanism": mech, "expert_claims": k, "subjects": int(c)} for k, c in enumerate(counts))
    return per, pd.DataFrame(bins)
