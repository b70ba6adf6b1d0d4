"""Composition of equilibria and its brute-force verification.

If ``sigma`` is an ex-post equilibrium of a mechanism whose outcome under
``sigma`` reproduces ``f``, then for every ex-post equilibrium ``delta`` of the
direct mechanism of ``f``, ``sigma o delta`` is an ex-post equilibrium of the
mechanism and it induces ``f o delta``. :func:`verify_composition` checks the
statement for one instance; :func:`random_suite` checks it on random small
environments.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .env import Environment, SocialChoiceFunction, lab_environment, principal
from .equilibrium import (
    CompiledGame,
    StrategyProfile,
    compose,
    enumerate_ex_post_equilibria,
    induced_scf,
    truthful_profile,
)
from .mechanism import Mechanism, Message, MessageLabel, build_direct, mechanism_3x3

SCF_CAP = 65_536


class PreconditionError(ValueError):
    """``sigma`` is not an equilibrium implementing ``f`` in the mechanism."""


@dataclass(frozen=True)
class CompositionCheck:
    delta: StrategyProfile
    composite: StrategyProfile
    ex_post: bool
    scf_matches: bool

    @property
    def passed(self) -> bool:
        return self.ex_post and self.scf_matches


@dataclass
class VerificationReport:
    mechanism: str
    checks: list[CompositionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> list[CompositionCheck]:
        return [c for c in self.checks if not c.passed]


def verify_composition(
    env: Environment, f: SocialChoiceFunction, mech: Mechanism, sigma: StrategyProfile
) -> VerificationReport:
    game = CompiledGame(env, mech)
    if not game.is_ex_post(game.index_profile(sigma)):
        raise PreconditionError(f"sigma is not an ex-post equilibrium of {mech.name}")
    if induced_scf(env, mech, sigma) != f:
        raise PreconditionError(f"outcome of sigma in {mech.name} differs from {f.name}")
    direct = build_direct(env, f, explicit=True)
    report = VerificationReport(mech.name)
    for eq in enumerate_ex_post_equilibria(env, direct):
        delta = eq.profile
        composite = compose(sigma, delta)
        target = SocialChoiceFunction({theta: f(delta(theta)) for theta in env.type_profiles()})
        report.checks.append(
            CompositionCheck(
                delta=delta,
                composite=composite,
                ex_post=game.is_ex_post(game.index_profile(composite)),
                scf_matches=induced_scf(env, mech, composite) == target,
            )
        )
    return report


def lab_instance() -> tuple[Environment, SocialChoiceFunction, Mechanism, StrategyProfile]:
    env = lab_environment()
    mech = mechanism_3x3(explicit=True)
    return env, principal(env), mech, truthful_profile(env, mech)


def random_environment(rng: np.random.Generator, max_types: int = 3, max_outcomes: int = 4) -> Environment:
    """Two agents, 2..max_types types each, integer payoffs in [0, 9].

    Sizes are redrawn until the number of SCFs stays under :data:`SCF_CAP`.
    """
    while True:
        n_types = [int(rng.integers(2, max_types + 1)) for _ in range(2)]
        n_out = int(rng.integers(2, max_outcomes + 1))
        if n_out ** (n_types[0] * n_types[1]) <= SCF_CAP:
            break
    type_spaces = tuple(tuple(f"t{k}" for k in range(n)) for n in n_types)
    outcomes = tuple(f"x{k}" for k in range(n_out))
    payoffs = {
        (i, x, t): Fraction(int(rng.integers(0, 10)))
        for i in range(2)
        for t in type_spaces[i]
        for x in outcomes
    }
    return Environment(type_spaces, outcomes, payoffs, name="random")


def strategy_proof_scfs(env: Environment) -> np.ndarray:
    """All strategy-proof SCFs as rows of outcome indices over ``env.type_profiles()``.

    Exhaustive filter over every map from type profiles to outcomes.
    """
    profiles = list(env.type_profiles())
    n_out = len(env.outcomes)
    if n_out ** len(profiles) > SCF_CAP:
        raise ValueError(f"{n_out ** len(profiles)} SCFs exceed the cap of {SCF_CAP}")
    grid = np.array(list(itertools.product(range(n_out), repeat=len(profiles))), dtype=np.int64)
    col = {theta: k for k, theta in enumerate(profiles)}
    keep = np.ones(len(grid), dtype=bool)
    for i, types in enumerate(env.type_spaces):
        scale = _denom(env, i)
        util = {t: np.array([int(env.payoffs[(i, x, t)] * scale) for x in env.outcomes]) for t in types}
        for theta in profiles:
            t = theta[i]
            truth = util[t][grid[:, col[theta]]]
            for r in types:
                lie = list(theta)
                lie[i] = r
                keep &= truth >= util[t][grid[:, col[tuple(lie)]]]
    return grid[keep]


def _denom(env: Environment, agent: int) -> int:
    d = 1
    for (i, _, _), v in env.payoffs.items():
        if i == agent:
            d = np.lcm(d, v.denominator)
    return int(d)


def duplicated_direct(env: Environment, f: SocialChoiceFunction) -> Mechanism:
    """Direct mechanism of ``f`` with every message offered twice."""
    spaces = []
    for types in env.type_spaces:
        spaces.append(
            tuple(
                Message((t, c), MessageLabel.neutral(f"{t}#{c}"), None)
                for t in types
                for c in range(2)
            )
        )
    table = {}
    for prof in itertools.product(*spaces):
        theta = tuple(m.id[0] for m in prof)
        table[tuple(m.id for m in prof)] = f(theta)
    return Mechanism(f"dup-{f.name}", tuple(spaces), table)


@dataclass
class TrialResult:
    index: int
    env: Environment
    f: SocialChoiceFunction
    report: VerificationReport


def random_trial(rng: np.random.Generator, index: int = 0) -> TrialResult:
    env = random_environment(rng)
    scfs = strategy_proof_scfs(env)
    row = scfs[int(rng.integers(len(scfs)))]
    profiles = list(env.type_profiles())
    f = SocialChoiceFunction({theta: env.outcomes[row[k]] for k, theta in enumerate(profiles)}, name=f"f{index}")
    mech = duplicated_direct(env, f)
    sigma = StrategyProfile.from_maps([{t: (t, 0) for t in types} for types in env.type_spaces])
    return TrialResult(index, env, f, verify_composition(env, f, mech, sigma))


def random_suite(trials: int, seed: int, include_lab: bool = True) -> list[TrialResult]:
    """Laboratory instance as trial 0 (optional), then ``trials`` seeded random instances."""
    results = []
    if include_lab:
        env, f, mech, sigma = lab_instance()
        results.append(TrialResult(0, env, f, verify_composition(env, f, mech, sigma)))
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(trials), start=1):
        results.append(random_trial(np.random.default_rng(child), k))
    return results
