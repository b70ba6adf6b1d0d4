from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mechlab.env import (
    BEGINNER as B,
    EXPERT as E,
    HD,
    HM,
    LM,
    LP,
    Contract,
    DomainError,
    contract_payoff,
    group_total,
    lab_environment,
    principal,
    principal_scf,
    staffer_payoff,
    worker_optimal,
    worker_optimal_scf,
)

PROFILES = [(B, B), (B, E), (E, B), (E, E)]


def test_payoff_examples():
    env = lab_environment()
    assert env.payoff(0, (HM, LP), E) == 4
    assert env.payoff(0, (LP, HM), B) == 4
    assert env.payoff(1, (HM, LP), E) == 0


def test_payoffs_are_exact_rationals():
    env = lab_environment()
    assert all(isinstance(v, Fraction) for v in env.payoffs.values())


def test_expert_ordering_is_strict():
    assert contract_payoff(HM, E) > contract_payoff(HD, E) > contract_payoff(LM, E) > contract_payoff(LP, E)


def test_beginner_ordering():
    assert contract_payoff(LP, B) == contract_payoff(HM, B)
    assert contract_payoff(HM, B) > contract_payoff(LM, B)
    assert contract_payoff(LM, B) == contract_payoff(HD, B)


def test_payoff_rejects_unknowns():
    env = lab_environment()
    with pytest.raises(DomainError):
        env.payoff(2, (HM, HM), E)
    with pytest.raises(DomainError):
        env.payoff(0, (HM, HM), "X")
    with pytest.raises(DomainError):
        env.payoff(0, "nothing", E)


def test_lab_outcomes_are_all_contract_pairs():
    env = lab_environment()
    assert len(env.outcomes) == 16
    assert len(set(env.outcomes)) == 16


@pytest.mark.parametrize(
    "types, expected",
    [((B, E), (LP, HD)), ((E, E), (HM, HM)), ((B, B), (LM, LM)), ((E, B), (HD, LP))],
)
def test_principal_scf(types, expected):
    assert principal_scf(types) == expected


@pytest.mark.parametrize("types", PROFILES)
def test_worker_optimal_is_constant(types):
    assert worker_optimal_scf(types) == (HM, HM)


@pytest.mark.parametrize(
    "true, identified, expected",
    [((B, E), (B, E), 5), ((B, E), (E, E), 3), ((B, B), (E, E), 1)],
)
def test_staffer_payoff(true, identified, expected):
    assert staffer_payoff(true, identified) == expected


def test_scf_arguments_are_checked():
    with pytest.raises(DomainError):
        principal_scf((B,))
    with pytest.raises(DomainError):
        principal_scf((B, "X"))


@pytest.mark.parametrize("types, total", [((B, B), 9), ((B, E), 11), ((E, B), 11), ((E, E), 13)])
def test_total_payoff_constancy(types, total):
    truthful = group_total(types, principal_scf(types), types)
    coordinated = group_total(types, worker_optimal_scf(types), (E, E))
    assert truthful == coordinated == total


def test_expected_total_under_uniform_prior():
    totals = [group_total(t, principal_scf(t), t) for t in PROFILES]
    assert sum(Fraction(x, 4) for x in totals) == 11


def test_scf_tables_are_total():
    env = lab_environment()
    assert principal(env).is_total(env)
    assert worker_optimal(env).is_total(env)
    assert principal(env) != worker_optimal(env)


@given(st.sampled_from([0, 1]), st.sampled_from(list(lab_environment().outcomes)), st.sampled_from([B, E]))
def test_payoff_is_pure(agent, outcome, own):
    env = lab_environment()
    assert env.payoff(agent, outcome, own) == env.payoff(agent, outcome, own)
    assert env.payoff(agent, outcome, own) == contract_payoff(outcome[agent], own)


def test_contract_parse_round_trip():
    for c in (HM, HD, LM, LP):
        assert Contract.parse(str(c)) == c
    with pytest.raises(DomainError):
        Contract.parse("(X,Y)")
