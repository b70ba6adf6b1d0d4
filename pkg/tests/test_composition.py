import numpy as np
import pytest

from mechlab.env import EXPERT as E, lab_environment, principal, worker_optimal
from mechlab.equilibrium import StrategyProfile, compose, induced_scf, is_strategy_proof, truthful_profile
from mechlab.mechanism import builtin
from mechlab.composition import (
    SCF_CAP,
    PreconditionError,
    duplicated_direct,
    lab_instance,
    random_environment,
    random_suite,
    strategy_proof_scfs,
    verify_composition,
)


def test_lab_instance_passes_and_yields_worker_optimal():
    env, f, mech, sigma = lab_instance()
    report = verify_composition(env, f, mech, sigma)
    assert report.passed and report.checks
    all_e = StrategyProfile.constant(env, [E, E])
    check = next(c for c in report.checks if c.delta == all_e)
    assert induced_scf(env, mech, check.composite) == worker_optimal(env)


def test_direct_mechanism_instance_passes():
    env = lab_environment()
    mech = builtin("2x2-I")
    assert verify_composition(env, principal(env), mech, truthful_profile(env, mech)).passed


def test_precondition_errors_are_distinct():
    env = lab_environment()
    mech = builtin("3x3-E")
    not_eq = StrategyProfile.constant(env, ["U", "U"])
    with pytest.raises(PreconditionError, match="not an ex-post"):
        verify_composition(env, principal(env), mech, not_eq)
    all_e = StrategyProfile.constant(env, [E, E])
    with pytest.raises(PreconditionError, match="differs"):
        verify_composition(env, principal(env), mech, all_e)


def test_random_suite_has_no_violations():
    results = random_suite(200, seed=7)
    assert len(results) == 201 and results[0].index == 0
    assert all(r.report.passed for r in results)
    assert sum(len(r.report.checks) for r in results) > 200


def test_random_suite_is_deterministic():
    a = [(r.f.table, len(r.report.checks)) for r in random_suite(10, seed=3)]
    b = [(r.f.table, len(r.report.checks)) for r in random_suite(10, seed=3)]
    assert a == b


def test_random_environments_respect_size_limits():
    rng = np.random.default_rng(0)
    for _ in range(100):
        env = random_environment(rng)
        n_theta = len(list(env.type_profiles()))
        assert env.n_agents == 2
        assert all(2 <= len(t) <= 3 for t in env.type_spaces)
        assert 2 <= len(env.outcomes) <= 4
        assert len(env.outcomes) ** n_theta <= SCF_CAP
        assert all(0 <= v <= 9 and v.denominator == 1 for v in env.payoffs.values())


def test_filtered_scfs_are_strategy_proof():
    from mechlab.env import SocialChoiceFunction

    rng = np.random.default_rng(5)
    env = random_environment(rng, max_types=2, max_outcomes=3)
    rows = strategy_proof_scfs(env)
    profiles = list(env.type_profiles())
    kept = {tuple(r) for r in rows}
    import itertools

    for row in itertools.product(range(len(env.outcomes)), repeat=len(profiles)):
        f = SocialChoiceFunction({th: env.outcomes[k] for th, k in zip(profiles, row)})
        assert is_strategy_proof(env, f) == (row in kept)


def test_duplicated_direct_implements_f_truthfully():
    env = lab_environment()
    f = principal(env)
    mech = duplicated_direct(env, f)
    sigma = StrategyProfile.from_maps([{t: (t, 0) for t in ts} for ts in env.type_spaces])
    assert induced_scf(env, mech, sigma) == f
    delta = StrategyProfile.constant(env, [E, E])
    assert induced_scf(env, mech, compose(sigma, delta)) == worker_optimal(env)
