"""Agent-based simulation of the laboratory sessions.

Roles are fixed per session (2/3 workers, 1/3 staffers), worker types are
redrawn every period, and two workers plus one staffer are matched uniformly
at random each period. Each worker follows a behaviour rule:

* ``Truthteller`` always sends the message meaning its true type.
* ``Coordinator`` always sends the worker-optimal message (claim expert).
* ``LieAverse(cost)`` maximises expected combined worker payoff (own plus
  ``partner_weight`` times the partner's) under its belief, minus ``cost``
  whenever the message is an explicit false type claim.
* ``Noisy(base, epsilon)`` follows ``base`` but, with probability
  ``epsilon``, sends a uniformly drawn different message.

Everything is driven by ``numpy`` generators seeded from ``SeedSequence``; a
session is a pure function of its config, population and seed.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence, Union

import numpy as np

from .env import BEGINNER, EXPERT, WORKER_TYPES, contract_payoff, staffer_payoff
from .mechanism import (
    BUILTIN_NAMES,
    Mechanism,
    builtin,
    inferred_types,
    message_is_lie,
)


class ConfigError(ValueError):
    """Invalid session configuration or population."""


@dataclass(frozen=True)
class Truthteller:
    pass


@dataclass(frozen=True)
class Coordinator:
    pass


@dataclass(frozen=True)
class LieAverse:
    cost: Fraction
    partner_weight: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        if self.cost < 0:
            raise ConfigError("lying cost must be non-negative")


@dataclass(frozen=True)
class Noisy:
    base: "BehaviorRule"
    epsilon: float

    def __post_init__(self) -> None:
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")


BehaviorRule = Union[Truthteller, Coordinator, LieAverse, Noisy]


def behavioral_utility(rule: BehaviorRule, pecuniary: Fraction, is_lie: bool) -> Fraction:
    if isinstance(rule, Noisy):
        return behavioral_utility(rule.base, pecuniary, is_lie)
    if isinstance(rule, LieAverse) and is_lie:
        return pecuniary - rule.cost
    return pecuniary


def worker_optimal_belief(mech: Mechanism, agent: int = 1) -> dict:
    return {mech.by_canonical(agent, EXPERT): Fraction(1)}


def choose_message(
    rule: BehaviorRule,
    mech: Mechanism,
    own_type: str,
    belief: Mapping[Hashable, Fraction],
    rng: np.random.Generator,
    agent: int = 0,
    expert_prob: Fraction = Fraction(1, 2),
) -> Hashable:
    """Message sent by a worker in position ``agent`` of a two-worker group.

    ``belief`` is a distribution over the opponent's message ids.
    """
    if isinstance(rule, Noisy):
        base = choose_message(rule.base, mech, own_type, belief, rng, agent, expert_prob)
        draw = rng.random()
        others = [m for m in mech.message_ids(agent) if m != base]
        pick = int(rng.integers(len(others))) if others else 0
        if others and draw < rule.epsilon:
            return others[pick]
        return base
    truthful = mech.by_canonical(agent, own_type)
    if isinstance(rule, Truthteller):
        return truthful
    if isinstance(rule, Coordinator):
        return mech.by_canonical(agent, EXPERT)
    if isinstance(rule, LieAverse):
        return _best_message(rule, mech, own_type, belief, agent, Fraction(expert_prob), truthful)
    raise TypeError(f"unknown behaviour rule {rule!r}")


def _best_message(rule, mech, own_type, belief, agent, expert_prob, truthful):
    if sum(belief.values()) != 1:
        raise ConfigError("belief must sum to 1")
    other = 1 - agent
    partner_types = ((BEGINNER, 1 - expert_prob), (EXPERT, expert_prob))
    best, best_value = truthful, None
    for m in (truthful, *[x for x in mech.message_ids(agent) if x != truthful]):
        value = Fraction(0)
        for opp, q in belief.items():
            if q == 0:
                continue
            msgs = [None, None]
            msgs[agent], msgs[other] = m, opp
            alloc = mech.table[tuple(msgs)]
            own = contract_payoff(alloc[agent], own_type)
            partner = sum(p * contract_payoff(alloc[other], t) for t, p in partner_types)
            value += q * (own + rule.partner_weight * partner)
        value = behavioral_utility(rule, value, message_is_lie(mech, agent, own_type, m))
        if best_value is None or value > best_value:
            best, best_value = m, value
    return best


@dataclass(frozen=True)
class SessionConfig:
    mechanism: str
    n_subjects: int = 12
    n_periods: int = 13
    n_practice: int = 3
    worker_fraction: Fraction = Fraction(2, 3)
    expert_prob: Fraction = Fraction(1, 2)
    paid_from_last: int = 10
    ecu_per_dollar: int = 1
    belief_mode: str = "static"
    seed: int = 0
    session: int = 1

    def __post_init__(self) -> None:
        if self.mechanism not in BUILTIN_NAMES:
            raise ConfigError(f"unknown mechanism {self.mechanism!r}")
        if self.n_subjects <= 0 or self.n_subjects % 3:
            raise ConfigError(f"n_subjects={self.n_subjects} is not a positive multiple of 3")
        n_workers = self.n_subjects * Fraction(self.worker_fraction)
        if n_workers.denominator != 1 or n_workers % 2 or n_workers / 2 != self.n_subjects - n_workers:
            raise ConfigError("worker fraction must give two workers per staffer")
        if not 0 <= self.n_practice < self.n_periods:
            raise ConfigError("need at least one non-practice period")
        if not 1 <= self.paid_from_last <= self.n_periods - self.n_practice:
            raise ConfigError("paid period must be drawn from non-practice periods")
        if self.belief_mode not in ("static", "empirical"):
            raise ConfigError(f"unknown belief mode {self.belief_mode!r}")

    @property
    def n_workers(self) -> int:
        return int(self.n_subjects * Fraction(self.worker_fraction))

    @property
    def n_groups(self) -> int:
        return self.n_subjects - self.n_workers

    def to_dict(self) -> dict:
        d = asdict(self)
        d["worker_fraction"] = str(self.worker_fraction)
        d["expert_prob"] = str(self.expert_prob)
        return d


@dataclass(frozen=True)
class WorkerRecord:
    subject: int
    true_type: str
    message: Hashable
    payoff: int
    lie: bool


@dataclass(frozen=True)
class PeriodRecord:
    session: int
    mechanism: str
    period: int
    group: int
    workers: tuple[WorkerRecord, WorkerRecord]
    staffer: int
    staffer_payoff: int
    practice: bool
    paid: bool

    @property
    def types(self) -> tuple[str, str]:
        return (self.workers[0].true_type, self.workers[1].true_type)

    @property
    def messages(self) -> tuple:
        return (self.workers[0].message, self.workers[1].message)


@dataclass
class SessionDataset:
    records: list[PeriodRecord] = field(default_factory=list)
    configs: list[SessionConfig] = field(default_factory=list)
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)


def run_session(
    config: SessionConfig,
    population: Mapping[int, BehaviorRule] | Sequence[BehaviorRule],
    default_belief: Mapping[str, Fraction] | None = None,
) -> SessionDataset:
    """Simulate one session. ``default_belief`` is over canonical opponent messages.

    Without it, workers expect the opponent to claim expert (worker-optimal play).
    In ``empirical`` belief mode the default acts as one pseudo-observation and
    each subject adds the canonical messages its past opponents sent.
    """
    if isinstance(population, Mapping):
        subjects = sorted(population)
        rules = dict(population)
    else:
        subjects = list(range(1, len(population) + 1))
        rules = dict(zip(subjects, population))
    if len(subjects) != config.n_subjects:
        raise ConfigError(f"population has {len(subjects)} subjects, config expects {config.n_subjects}")

    mech = builtin(config.mechanism)
    rng = np.random.default_rng(config.seed)
    prior = dict(default_belief) if default_belief is not None else {EXPERT: Fraction(1)}
    if sum(prior.values()) != 1:
        raise ConfigError("default belief must sum to 1")

    order = rng.permutation(len(subjects))
    workers = [subjects[k] for k in order[: config.n_workers]]
    staffers = [subjects[k] for k in order[config.n_workers:]]
    first_paid = config.n_periods - config.paid_from_last + 1
    paid_period = int(rng.integers(first_paid, config.n_periods + 1))
    seen: dict[int, dict[str, int]] = {s: {} for s in workers}

    records = []
    for period in range(1, config.n_periods + 1):
        w_order = rng.permutation(len(workers))
        s_order = rng.permutation(len(staffers))
        draws = rng.random(len(workers))
        for g in range(config.n_groups):
            pair = (workers[w_order[2 * g]], workers[w_order[2 * g + 1]])
            staffer = staffers[s_order[g]]
            types = tuple(EXPERT if draws[2 * g + k] < config.expert_prob else BEGINNER for k in range(2))
            msgs = []
            for pos, subj in enumerate(pair):
                belief = _belief(mech, 1 - pos, prior, seen[subj] if config.belief_mode == "empirical" else {})
                msgs.append(choose_message(rules[subj], mech, types[pos], belief, rng, pos, config.expert_prob))
            msgs = tuple(msgs)
            alloc = mech.table[msgs]
            ws = tuple(
                WorkerRecord(
                    subject=subj,
                    true_type=types[pos],
                    message=msgs[pos],
                    payoff=contract_payoff(alloc[pos], types[pos]),
                    lie=message_is_lie(mech, pos, types[pos], msgs[pos]),
                )
                for pos, subj in enumerate(pair)
            )
            for pos, subj in enumerate(pair):
                canon = mech.message(1 - pos, msgs[1 - pos]).canonical
                seen[subj][canon] = seen[subj].get(canon, 0) + 1
            records.append(
                PeriodRecord(
                    session=config.session,
                    mechanism=mech.name,
                    period=period,
                    group=g + 1,
                    workers=ws,
                    staffer=staffer,
                    staffer_payoff=staffer_payoff(types, inferred_types(mech, msgs)),
                    practice=period <= config.n_practice,
                    paid=period == paid_period,
                )
            )
    return SessionDataset(
        records=records,
        configs=[config],
        seed=config.seed,
        metadata={"belief_mode": config.belief_mode, "paid_periods": {config.session: paid_period}},
    )


def _belief(mech: Mechanism, opp: int, prior: Mapping[str, Fraction], counts: Mapping[str, int]) -> dict:
    total = 1 + sum(counts.values())
    out: dict = {}
    for canon in sorted(set(prior) | set(counts)):
        weight = (Fraction(prior.get(canon, 0)) + counts.get(canon, 0)) / total
        if weight:
            out[mech.by_canonical(opp, canon)] = weight
    return out


# -- populations --------------------------------------------------------------


@dataclass(frozen=True)
class MixturePopulation:
    """Samples i.i.d. behaviour rules per subject.

    ``costs`` are the support of the lying-cost distribution for lie-averse
    subjects, drawn with ``cost_weights`` (uniform if omitted).
    """

    truthteller: float = 0.10
    coordinator: float = 0.30
    lie_averse: float = 0.60
    costs: tuple[Fraction, ...] = (Fraction(1), Fraction(4))
    cost_weights: tuple[float, ...] | None = (0.15, 0.85)
    epsilon: float = 0.05

    def __call__(self, rng: np.random.Generator, n: int) -> list[BehaviorRule]:
        shares = np.array([self.truthteller, self.coordinator, self.lie_averse], dtype=float)
        if np.any(shares < 0) or not np.isclose(shares.sum(), 1.0):
            raise ConfigError("population shares must be non-negative and sum to 1")
        kinds = rng.choice(3, size=n, p=shares)
        weights = None if self.cost_weights is None else np.asarray(self.cost_weights, dtype=float)
        picks = rng.choice(len(self.costs), size=n, p=weights)
        rules: list[BehaviorRule] = []
        for kind, pick in zip(kinds, picks):
            base: BehaviorRule
            if kind == 0:
                base = Truthteller()
            elif kind == 1:
                base = Coordinator()
            else:
                base = LieAverse(Fraction(self.costs[pick]))
            rules.append(Noisy(base, self.epsilon) if self.epsilon > 0 else base)
        return rules


# Lie-averse subjects with cost 4 exceed the largest joint gain from a false
# claim (2), so they turn truthful once claims are explicit; cost 1 does not.
CALIBRATION = MixturePopulation()


@dataclass(frozen=True)
class UniformPopulation:
    """Every subject follows the same rule."""

    rule: BehaviorRule

    def __call__(self, rng: np.random.Generator, n: int) -> list[BehaviorRule]:
        return [self.rule] * n


# -- experiments ----------------------------------------------------------------


@dataclass(frozen=True)
class GridEntry:
    mechanism: str
    sizes: tuple[int, ...]


LAB_GRID = (
    GridEntry("2x2-I", (12, 12, 12)),
    GridEntry("2x2-E", (12, 12, 12)),
    GridEntry("3x3-I", (12, 12, 12, 9)),
    GridEntry("3x3-E", (12, 12, 9, 9)),
)


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _run_one(args) -> SessionDataset:
    config, sampler, pop_seed, default_belief = args
    population = sampler(np.random.default_rng(pop_seed), config.n_subjects)
    return run_session(config, population, default_belief)


def run_experiment(
    grid: Sequence[GridEntry] = LAB_GRID,
    population_sampler: Callable[[np.random.Generator, int], list] = CALIBRATION,
    master_seed: int = 0,
    belief_mode: str = "static",
    default_belief: Mapping[str, Fraction] | None = None,
    workers: int = 1,
    session_options: Mapping[str, object] | None = None,
) -> SessionDataset:
    """Run every session of ``grid`` and pool them, ordered by session then period.

    Session ``k`` (1-based, in grid order) gets the ``k``-th child of
    ``SeedSequence(master_seed)``; its first grandchild seeds the population
    draw and the second the session itself.
    """
    layout = [(e.mechanism, size) for e in grid for size in e.sizes]
    children = np.random.SeedSequence(master_seed).spawn(len(layout))
    jobs = []
    for k, ((mech, size), child) in enumerate(zip(layout, children), start=1):
        pop_seq, run_seq = child.spawn(2)
        config = SessionConfig(
            mech, size, belief_mode=belief_mode, seed=_seed_int(run_seq), session=k, **dict(session_options or {})
        )
        jobs.append((config, population_sampler, _seed_int(pop_seq), default_belief))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_one, jobs))
    else:
        parts = [_run_one(job) for job in jobs]
    pooled = SessionDataset(seed=master_seed, metadata={"belief_mode": belief_mode, "paid_periods": {}})
    for part in sorted(parts, key=lambda d: d.configs[0].session):
        pooled.records.extend(part.records)
        pooled.configs.extend(part.configs)
        pooled.metadata["paid_periods"].update(part.metadata["paid_periods"])
    return pooled


# -- CSV ----------------------------------------------------------------------

CSV_HEADER = (
    "session", "period", "group", "mechanism", "subject", "role",
    "true_type", "message", "lie_flag", "payoff", "practice", "paid",
)


class SchemaError(ValueError):
    """A dataset file does not follow the CSV schema."""


def to_csv(dataset: SessionDataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in dataset.records:
        base = (r.session, r.period, r.group, r.mechanism)
        flags = (int(r.practice), int(r.paid))
        for w in r.workers:
            writer.writerow((*base, w.subject, "worker", w.true_type, w.message, int(w.lie), w.payoff, *flags))
        writer.writerow((*base, r.staffer, "staffer", "", "", "", r.staffer_payoff, *flags))
    return buf.getvalue()


def write_csv(dataset: SessionDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(dataset))


def read_csv(path_or_text: str, text: bool = False) -> SessionDataset:
    """Rebuild a dataset from CSV; rows of one group must be worker, worker, staffer."""
    fh = io.StringIO(path_or_text) if text else open(path_or_text, encoding="utf-8", newline="")
    with fh:
        reader = csv.DictReader(fh)
        found = tuple(reader.fieldnames or ())
        if found != CSV_HEADER:
            bad = next((k for k, (a, b) in enumerate(zip(found, CSV_HEADER)) if a != b), min(len(found), len(CSV_HEADER)))
            name = found[bad] if bad < len(found) else "(missing)"
            want = CSV_HEADER[bad] if bad < len(CSV_HEADER) else "(none)"
            raise SchemaError(f"line 1: header column {bad + 1} is {name!r}, expected {want!r}")
        rows = list(reader)
    records = []
    for k in range(0, len(rows), 3):
        chunk = rows[k:k + 3]
        line = k + 2
        if len(chunk) != 3 or [c["role"] for c in chunk] != ["worker", "worker", "staffer"]:
            raise SchemaError(f"line {line}: expected rows worker, worker, staffer for one group")
        key = {(c["session"], c["period"], c["group"]) for c in chunk}
        if len(key) != 1:
            raise SchemaError(f"line {line}: group rows disagree on session/period/group")
        head, st = chunk[0], chunk[2]
        mechanism = _check(head["mechanism"], BUILTIN_NAMES, "mechanism", line)
        mech = builtin(mechanism)
        workers = []
        for pos, c in enumerate(chunk[:2]):
            row = line + pos
            if c["message"] not in mech.message_ids(pos):
                raise SchemaError(f"line {row}: column message has value {c['message']!r} not offered by {mechanism}")
            workers.append(
                WorkerRecord(
                    subject=_int(c["subject"], "subject", row),
                    true_type=_check(c["true_type"], WORKER_TYPES, "true_type", row),
                    message=c["message"],
                    payoff=_int(c["payoff"], "payoff", row),
                    lie=_flag(c["lie_flag"], "lie_flag", row),
                )
            )
        records.append(
            PeriodRecord(
                session=_int(head["session"], "session", line),
                mechanism=mechanism,
                period=_int(head["period"], "period", line),
                group=_int(head["group"], "group", line),
                workers=tuple(workers),
                staffer=_int(st["subject"], "subject", line + 2),
                staffer_payoff=_int(st["payoff"], "payoff", line + 2),
                practice=_flag(head["practice"], "practice", line),
                paid=_flag(head["paid"], "paid", line),
            )
        )
    return SessionDataset(records=records)


def _check(value: str, allowed, column: str, line: int) -> str:
    if value not in allowed:
        raise SchemaError(f"line {line}: column {column} has invalid value {value!r}")
    return value


def _int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise SchemaError(f"line {line}: column {column} must be an integer, got {value!r}") from None


def _flag(value: str, column: str, line: int) -> bool:
    if value not in ("0", "1"):
        raise SchemaError(f"line {line}: column {column} must be 0 or 1, got {value!r}")
    return value == "1"


def metadata_json(dataset: SessionDataset) -> str:
    meta = {
        "seed": dataset.seed,
        "belief_mode": dataset.metadata.get("belief_mode"),
        "paid_periods": {str(k): v for k, v in dataset.metadata.get("paid_periods", {}).items()},
        "sessions": [c.to_dict() for c in dataset.configs],
    }
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"


def subject_counts(dataset: SessionDataset) -> dict:
    workers = {(r.session, w.subject) for r in dataset.records for w in r.workers}
    staffers = {(r.session, r.staffer) for r in dataset.records}
    return {
        "sessions": len({r.session for r in dataset.records}),
        "workers": len(workers),
        "staffers": len(staffers),
        "subjects": len(workers) + len(staffers),
    }

