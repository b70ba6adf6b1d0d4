"""Pure-strategy ex-post equilibria, dominance and strategy-proofness.

All comparisons are exact. Payoffs are rescaled per agent by the least common
multiple of their denominators, which turns every comparison into an integer
comparison without changing its result.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .env import DomainError, Environment, SocialChoiceFunction
from .mechanism import Mechanism, build_direct

DEFAULT_CAP = 10**7


class SizeError(ValueError):
    """The strategy-profile space is larger than the enumeration cap."""


class CompositionError(ValueError):
    """Inner strategy outputs fall outside the outer strategy's domain."""


@dataclass(frozen=True, order=True)
class StrategyProfile:
    """One strategy per agent, each stored as ``((type, message), ...)``."""

    strategies: tuple[tuple[tuple[Hashable, Hashable], ...], ...]

    @classmethod
    def from_maps(cls, maps: Sequence[Mapping[Hashable, Hashable]]) -> "StrategyProfile":
        return cls(tuple(tuple(m.items()) for m in maps))

    @classmethod
    def constant(cls, env: Environment, messages: Sequence[Hashable]) -> "StrategyProfile":
        return cls.from_maps([{t: m for t in types} for types, m in zip(env.type_spaces, messages)])

    @classmethod
    def identity(cls, env: Environment) -> "StrategyProfile":
        return cls.from_maps([{t: t for t in types} for types in env.type_spaces])

    @property
    def n_agents(self) -> int:
        return len(self.strategies)

    def maps(self) -> list[dict]:
        return [dict(s) for s in self.strategies]

    def message(self, agent: int, own_type: Hashable) -> Hashable:
        for t, m in self.strategies[agent]:
            if t == own_type:
                return m
        raise DomainError(f"strategy of agent {agent} undefined at type {own_type!r}")

    def __call__(self, types: Sequence[Hashable]) -> tuple:
        if len(types) != self.n_agents:
            raise DomainError(f"expected {self.n_agents} types, got {len(types)}")
        return tuple(self.message(i, t) for i, t in enumerate(types))

    def describe(self) -> str:
        parts = []
        for i, s in enumerate(self.strategies):
            parts.append(f"w{i + 1}[" + " ".join(f"{t}->{m}" for t, m in s) + "]")
        return " ".join(parts)


def truthful_profile(env: Environment, mech: Mechanism) -> StrategyProfile:
    return StrategyProfile.from_maps(
        [{t: mech.by_canonical(i, t) for t in types} for i, types in enumerate(env.type_spaces)]
    )


def compose(outer: StrategyProfile, inner: StrategyProfile) -> StrategyProfile:
    """``(outer o inner)_i(t) = outer_i(inner_i(t))``."""
    if outer.n_agents != inner.n_agents:
        raise CompositionError("profiles have different numbers of agents")
    maps = []
    for i, (o, s) in enumerate(zip(outer.maps(), inner.maps())):
        missing = [r for r in s.values() if r not in o]
        if missing:
            raise CompositionError(f"agent {i}: report {missing[0]!r} not in the outer strategy's domain")
        maps.append({t: o[r] for t, r in s.items()})
    return StrategyProfile.from_maps(maps)


def _lcm_scale(values: Iterable[Fraction]) -> int:
    scale = 1
    for v in values:
        scale = math.lcm(scale, Fraction(v).denominator)
    return scale


class CompiledGame:
    """Integer payoff arrays ``P[i][own type, m_1, ..., m_n]`` for (env, mech)."""

    def __init__(self, env: Environment, mech: Mechanism) -> None:
        if env.n_agents != mech.n_agents:
            raise DomainError(f"environment has {env.n_agents} agents, mechanism {mech.n_agents}")
        self.env, self.mech = env, mech
        self.n = env.n_agents
        self.type_ids = [{t: k for k, t in enumerate(ts)} for ts in env.type_spaces]
        self.msg_ids = [{m: k for k, m in enumerate(mech.message_ids(i))} for i in range(self.n)]
        shape_m = tuple(len(mech.message_ids(i)) for i in range(self.n))
        outcome_idx = np.empty(shape_m, dtype=np.int64)
        for prof in itertools.product(*(range(s) for s in shape_m)):
            msgs = tuple(mech.message_ids(i)[k] for i, k in enumerate(prof))
            outcome_idx[prof] = env.outcome_index(mech.table[msgs])
        self.payoffs = []
        for i, types in enumerate(env.type_spaces):
            raw = [[env.payoffs[(i, x, t)] for x in env.outcomes] for t in types]
            scale = _lcm_scale(v for row in raw for v in row)
            table = np.array([[int(v * scale) for v in row] for row in raw], dtype=np.int64)
            self.payoffs.append(table[:, outcome_idx])
        self.best = [p.max(axis=1 + i, keepdims=True) for i, p in enumerate(self.payoffs)]
        grids = np.array(list(itertools.product(*(range(len(ts)) for ts in env.type_spaces))), dtype=np.int64)
        self.theta = grids.reshape(-1, self.n)

    def index_profile(self, profile: StrategyProfile) -> list[np.ndarray]:
        if profile.n_agents != self.n:
            raise DomainError(f"profile has {profile.n_agents} agents, expected {self.n}")
        out = []
        for i, types in enumerate(self.env.type_spaces):
            try:
                out.append(np.array([self.msg_ids[i][profile.message(i, t)] for t in types], dtype=np.int64))
            except KeyError as exc:
                raise DomainError(f"agent {i}: message {exc.args[0]!r} not in {self.mech.name}") from None
        return out

    def is_ex_post(self, sig: Sequence[np.ndarray]) -> bool:
        th = self.theta
        sent = [sig[j][th[:, j]] for j in range(self.n)]
        for i in range(self.n):
            own = self.payoffs[i][(th[:, i], *sent)]
            ref = [sent[j] if j != i else np.zeros_like(sent[j]) for j in range(self.n)]
            if np.any(own < self.best[i][(th[:, i], *ref)]):
                return False
        return True

    def dominant_table(self) -> list[np.ndarray]:
        """``D[i][t, m]``: message ``m`` weakly dominant for agent ``i`` of type ``t``."""
        out = []
        for i in range(self.n):
            p, b = self.payoffs[i], self.best[i]
            n_t, n_m = p.shape[0], p.shape[1 + i]
            d = np.zeros((n_t, n_m), dtype=bool)
            for t in range(n_t):
                for m in range(n_m):
                    d[t, m] = np.all(np.take(p[t], [m], axis=i) == b[t])
            out.append(d)
        return out

    def dominated_table(self) -> list[np.ndarray]:
        """``W[i][t, m]``: message ``m`` weakly dominated by another message."""
        out = []
        for i in range(self.n):
            p = self.payoffs[i]
            n_t, n_m = p.shape[0], p.shape[1 + i]
            w = np.zeros((n_t, n_m), dtype=bool)
            for t in range(n_t):
                cols = [np.take(p[t], [m], axis=i) for m in range(n_m)]
                for m in range(n_m):
                    w[t, m] = any(
                        np.all(cols[k] >= cols[m]) and np.any(cols[k] > cols[m])
                        for k in range(n_m)
                        if k != m
                    )
            out.append(w)
        return out

    def strategy_count(self) -> int:
        total = 1
        for i, types in enumerate(self.env.type_spaces):
            total *= len(self.msg_ids[i]) ** len(types)
        return total


def is_ex_post_equilibrium(env: Environment, mech: Mechanism, profile: StrategyProfile) -> bool:
    game = CompiledGame(env, mech)
    return game.is_ex_post(game.index_profile(profile))


def is_weakly_dominant_message(
    env: Environment, mech: Mechanism, agent: int, own_type: Hashable, msg: Hashable
) -> bool:
    game = CompiledGame(env, mech)
    t = game.type_ids[agent].get(own_type)
    if t is None:
        raise DomainError(f"unknown type {own_type!r} for agent {agent}")
    mech.message(agent, msg)
    return bool(game.dominant_table()[agent][t, game.msg_ids[agent][msg]])


def is_strategy_proof(env: Environment, f: SocialChoiceFunction) -> bool:
    direct = build_direct(env, f, explicit=True)
    game = CompiledGame(env, direct)
    dom = game.dominant_table()
    return all(
        dom[i][k, game.msg_ids[i][t]]
        for i, types in enumerate(env.type_spaces)
        for k, t in enumerate(types)
    )


def induced_scf(env: Environment, mech: Mechanism, profile: StrategyProfile, name: str = "induced") -> SocialChoiceFunction:
    return SocialChoiceFunction({theta: mech.table[profile(theta)] for theta in env.type_profiles()}, name)


@dataclass(frozen=True)
class EquilibriumReport:
    profile: StrategyProfile
    ex_post: bool
    dominant_strategy: bool
    weakly_dominated_components: tuple[tuple[int, Hashable], ...]
    induced_scf: SocialChoiceFunction


def _report(game: CompiledGame, idx: Sequence[np.ndarray], dom, wdom) -> EquilibriumReport:
    env, mech = game.env, game.mech
    maps = []
    dominant = True
    dominated = []
    for i, types in enumerate(env.type_spaces):
        ids = mech.message_ids(i)
        maps.append({t: ids[idx[i][k]] for k, t in enumerate(types)})
        for k, t in enumerate(types):
            dominant &= bool(dom[i][k, idx[i][k]])
            if wdom[i][k, idx[i][k]]:
                dominated.append((i, t))
    profile = StrategyProfile.from_maps(maps)
    return EquilibriumReport(
        profile=profile,
        ex_post=True,
        dominant_strategy=dominant,
        weakly_dominated_components=tuple(dominated),
        induced_scf=induced_scf(env, mech, profile),
    )


def enumerate_ex_post_equilibria(env: Environment, mech: Mechanism, cap: int = DEFAULT_CAP) -> list[EquilibriumReport]:
    """Every pure ex-post equilibrium, in lexicographic order of message indices.

    Agent 0's strategy varies slowest; within a strategy the first type's
    message varies slowest.
    """
    game = CompiledGame(env, mech)
    size = game.strategy_count()
    if size > cap:
        raise SizeError(f"{size} strategy profiles exceed the cap of {cap}")
    per_agent = [
        [np.array(s, dtype=np.int64) for s in itertools.product(range(len(game.msg_ids[i])), repeat=len(types))]
        for i, types in enumerate(env.type_spaces)
    ]
    dom, wdom = game.dominant_table(), game.dominated_table()
    return [
        _report(game, idx, dom, wdom)
        for idx in itertools.product(*per_agent)
        if game.is_ex_post(idx)
    ]


def interim_best_response_check(
    env: Environment,
    mech: Mechanism,
    profile: StrategyProfile,
    prior: Mapping[tuple, Fraction],
) -> bool:
    """Each type's message maximises its expected payoff under ``prior``.

    Types with zero marginal probability are not checked.
    """
    probs = {theta: Fraction(prior.get(theta, 0)) for theta in env.type_profiles()}
    extra = set(prior) - set(probs)
    if extra:
        raise DomainError(f"prior puts mass on unknown profile {next(iter(extra))!r}")
    if any(p < 0 for p in probs.values()) or sum(probs.values()) != 1:
        raise DomainError("prior must be non-negative and sum to exactly 1")
    sent = {theta: profile(theta) for theta in probs}
    for i, types in enumerate(env.type_spaces):
        for t in types:
            cond = [(theta, p) for theta, p in probs.items() if theta[i] == t and p > 0]
            if not cond:
                continue

            def expected(m: Hashable) -> Fraction:
                total = Fraction(0)
                for theta, p in cond:
                    msgs = list(sent[theta])
                    msgs[i] = m
                    total += p * env.payoff(i, mech.table[tuple(msgs)], t)
                return total

            chosen = expected(profile.message(i, t))
            if any(expected(m) > chosen for m in mech.message_ids(i)):
                return False
    return True
