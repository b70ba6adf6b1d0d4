"""Finite private-value environments and the principal-worker instance.

An :class:`Environment` holds agents, finite type spaces, a finite outcome
set and an exact payoff table ``(agent, outcome, own_type) -> Fraction``.
The principal-worker instance is available from :func:`lab_environment`;
its outcomes are allocations, i.e. one :class:`Contract` per worker.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence

BEGINNER = "B"
EXPERT = "E"
WORKER_TYPES = (BEGINNER, EXPERT)

HIGH, LOW = "H", "L"
DELICATE, MIXED, PERFUNCTORY = "D", "M", "P"


class DomainError(ValueError):
    """An agent, type, outcome or message is not part of the model."""


class Contract(NamedTuple):
    salary: str
    task: str

    def __str__(self) -> str:
        return f"({self.salary},{self.task})"

    @classmethod
    def parse(cls, text: str) -> "Contract":
        body = text.strip().strip("()")
        try:
            salary, task = (part.strip() for part in body.split(","))
        except ValueError:
            raise DomainError(f"cannot parse contract {text!r}") from None
        if salary not in (HIGH, LOW) or task not in (DELICATE, MIXED, PERFUNCTORY):
            raise DomainError(f"unknown contract {text!r}")
        return cls(salary, task)


HM = Contract(HIGH, MIXED)
HD = Contract(HIGH, DELICATE)
LM = Contract(LOW, MIXED)
LP = Contract(LOW, PERFUNCTORY)
CONTRACTS = (HM, HD, LM, LP)

# Worker payoffs in ECU, used in the laboratory sessions.
CONTRACT_PAYOFFS: Mapping[str, Mapping[Contract, int]] = {
    EXPERT: {HM: 4, HD: 2, LM: 1, LP: 0},
    BEGINNER: {LP: 4, HM: 4, LM: 2, HD: 2},
}

Allocation = tuple  # one Contract per worker
TypeProfile = tuple


def format_allocation(outcome: Allocation) -> str:
    return ",".join(str(c) for c in outcome)


@dataclass(frozen=True)
class Environment:
    """Finite private-value environment.

    ``payoffs`` maps ``(agent, outcome, own_type)`` to an exact rational. Agents
    are the integers ``0..n-1``; ``type_spaces[i]`` lists agent ``i``'s types in
    a fixed order, which is also the order used for strategies.
    """

    type_spaces: tuple[tuple[Hashable, ...], ...]
    outcomes: tuple[Hashable, ...]
    payoffs: Mapping[tuple[int, Hashable, Hashable], Fraction]
    name: str = "environment"
    _outcome_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_outcome_index", {x: k for k, x in enumerate(self.outcomes)})
        for i, types in enumerate(self.type_spaces):
            if not types or len(set(types)) != len(types):
                raise DomainError(f"agent {i} needs a non-empty set of distinct types")
            for x in self.outcomes:
                for t in types:
                    if (i, x, t) not in self.payoffs:
                        raise DomainError(f"payoff missing for agent {i}, outcome {x!r}, type {t!r}")

    @property
    def agents(self) -> range:
        return range(len(self.type_spaces))

    @property
    def n_agents(self) -> int:
        return len(self.type_spaces)

    def type_profiles(self) -> Iterator[TypeProfile]:
        return itertools.product(*self.type_spaces)

    def payoff(self, agent: int, outcome: Hashable, own_type: Hashable) -> Fraction:
        if agent not in self.agents:
            raise DomainError(f"unknown agent {agent!r}")
        if own_type not in self.type_spaces[agent]:
            raise DomainError(f"unknown type {own_type!r} for agent {agent}")
        try:
            return self.payoffs[(agent, outcome, own_type)]
        except (KeyError, TypeError):
            raise DomainError(f"unknown outcome {outcome!r}") from None

    def outcome_index(self, outcome: Hashable) -> int:
        try:
            return self._outcome_index[outcome]
        except (KeyError, TypeError):
            raise DomainError(f"unknown outcome {outcome!r}") from None


def contract_payoff(contract: Contract, own_type: str) -> int:
    try:
        return CONTRACT_PAYOFFS[own_type][contract]
    except KeyError:
        raise DomainError(f"no payoff for contract {contract} and type {own_type!r}") from None


def lab_environment() -> Environment:
    """Two workers, types {B, E}, outcomes = every pair of the four contracts."""
    outcomes = tuple(itertools.product(CONTRACTS, repeat=2))
    payoffs = {
        (i, x, t): Fraction(contract_payoff(x[i], t))
        for i in range(2)
        for x in outcomes
        for t in WORKER_TYPES
    }
    return Environment((WORKER_TYPES, WORKER_TYPES), outcomes, payoffs, name="principal-worker")


def _check_pair(types: Sequence[str]) -> tuple[str, str]:
    if len(types) != 2 or any(t not in WORKER_TYPES for t in types):
        raise DomainError(f"expected two worker types in {{B, E}}, got {types!r}")
    return types[0], types[1]


def principal_scf(types: Sequence[str]) -> Allocation:
    a, b = _check_pair(types)
    if a == b:
        return (HM, HM) if a == EXPERT else (LM, LM)
    return (HD, LP) if a == EXPERT else (LP, HD)


def worker_optimal_scf(types: Sequence[str]) -> Allocation:
    _check_pair(types)
    return (HM, HM)


def staffer_payoff(true_types: Sequence[str], identified_types: Sequence[str]) -> int:
    true_types = _check_pair(true_types)
    identified_types = _check_pair(identified_types)
    hits = sum(t == s for t, s in zip(true_types, identified_types))
    return {2: 5, 1: 3, 0: 1}[hits]


@dataclass(frozen=True)
class SocialChoiceFunction:
    """Total map from type profiles to outcomes, stored as a table."""

    table: Mapping[TypeProfile, Hashable]
    name: str = "scf"

    def __call__(self, types: Iterable[Hashable]) -> Hashable:
        key = tuple(types)
        try:
            return self.table[key]
        except KeyError:
            raise DomainError(f"type profile {key!r} outside the domain") from None

    @classmethod
    def tabulate(cls, env: Environment, rule: Callable[[TypeProfile], Hashable], name: str = "scf") -> "SocialChoiceFunction":
        table = {theta: rule(theta) for theta in env.type_profiles()}
        for theta, x in table.items():
            env.outcome_index(x)
        return cls(table, name)

    def is_total(self, env: Environment) -> bool:
        return all(theta in self.table for theta in env.type_profiles())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SocialChoiceFunction):
            return NotImplemented
        return dict(self.table) == dict(other.table)

    def __hash__(self) -> int:
        return hash(frozenset(self.table.items()))


def principal(env: Environment | None = None) -> SocialChoiceFunction:
    return SocialChoiceFunction.tabulate(env or lab_environment(), principal_scf, "principal")


def worker_optimal(env: Environment | None = None) -> SocialChoiceFunction:
    return SocialChoiceFunction.tabulate(env or lab_environment(), worker_optimal_scf, "worker-optimal")


def group_total(types: Sequence[str], outcome: Allocation, identified: Sequence[str]) -> int:
    """Both workers' payoffs plus the staffer's for one group."""
    return (
        sum(contract_payoff(c, t) for c, t in zip(outcome, types))
        + staffer_payoff(types, identified)
    )
