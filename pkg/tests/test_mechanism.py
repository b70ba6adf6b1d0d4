import itertools

import pytest
from hypothesis import given, strategies as st

from mechlab.env import BEGINNER as B, EXPERT as E, HD, HM, LM, LP, SocialChoiceFunction, lab_environment, principal, principal_scf
from mechlab.mechanism import (
    BUILTIN_NAMES,
    UNANSWERED as U,
    DomainError,
    LabelKind,
    build_direct,
    builtin,
    canonical_bijection,
    inferred_types,
    message_is_lie,
    outcome,
    render,
    truthful_message,
)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_render_matches_golden(name, golden):
    assert render(builtin(name)) == golden(f"render_{name}.txt")


def test_outcome_examples():
    assert outcome(builtin("3x3-E"), (E, U)) == (HD, LP)
    assert outcome(builtin("3x3-E"), (U, U)) == (LM, LM)
    assert outcome(builtin("2x2-E"), (B, E)) == (LP, HD)


def test_outcome_rejects_bad_profiles():
    with pytest.raises(DomainError):
        outcome(builtin("2x2-E"), (B, U))
    with pytest.raises(DomainError):
        outcome(builtin("2x2-E"), (B,))


def test_lie_examples():
    assert message_is_lie(builtin("2x2-E"), 0, B, E)
    assert not message_is_lie(builtin("2x2-I"), 0, B, "B")
    assert not message_is_lie(builtin("3x3-E"), 0, B, U)
    assert not message_is_lie(builtin("3x3-E"), 1, E, E)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_implicit_messages_are_never_lies(name):
    mech = builtin(name)
    explicit = name.endswith("E")
    lies = [message_is_lie(mech, i, t, m) for i in (0, 1) for t in (B, E) for m in mech.message_ids(i)]
    assert any(lies) == explicit


def test_inference_examples():
    assert inferred_types(builtin("3x3-E"), (U, B)) == (E, B)
    assert inferred_types(builtin("3x3-E"), (U, U)) == (B, B)
    assert inferred_types(builtin("3x3-E"), (E, U)) == (E, B)
    assert inferred_types(builtin("2x2-E"), (E, E)) == (E, E)
    assert inferred_types(builtin("3x3-I"), ("C", "A")) == (E, B)


@pytest.mark.parametrize("pair", [("2x2-I", "2x2-E"), ("3x3-I", "3x3-E")])
def test_implicit_and_explicit_are_isomorphic(pair):
    imp, exp = builtin(pair[0]), builtin(pair[1])
    f = canonical_bijection(imp, exp)
    for p in imp.profiles():
        q = tuple(f[i][m] for i, m in enumerate(p))
        assert outcome(imp, p) == outcome(exp, q)
        assert inferred_types(imp, p) == inferred_types(exp, q)


@pytest.mark.parametrize("suffix", ["I", "E"])
def test_3x3_restricts_to_2x2(suffix):
    small, big = builtin(f"2x2-{suffix}"), builtin(f"3x3-{suffix}")
    for p in small.profiles():
        canon = [small.message(i, m).canonical for i, m in enumerate(p)]
        q = tuple(big.by_canonical(i, c) for i, c in enumerate(canon))
        assert outcome(small, p) == outcome(big, q)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_truthful_messages_implement_principal(name):
    mech = builtin(name)
    for theta in itertools.product((B, E), repeat=2):
        msgs = [truthful_message(mech, i, t) for i, t in enumerate(theta)]
        assert outcome(mech, msgs) == principal_scf(theta)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_inference_without_unanswered_is_face_value(name):
    mech = builtin(name)
    for p in mech.profiles():
        canon = tuple(mech.message(i, m).canonical for i, m in enumerate(p))
        if U not in canon:
            assert inferred_types(mech, p) == canon


def test_build_direct_matches_table_1():
    env = lab_environment()
    direct = build_direct(env, principal(env), explicit=True)
    table = builtin("2x2-E")
    assert all(outcome(direct, p) == outcome(table, p) for p in table.profiles())
    assert all(m.label.kind is LabelKind.CLAIM for m in direct.message_spaces[0])


def test_build_direct_implicit_uses_neutral_labels():
    env = lab_environment()
    direct = build_direct(env, principal(env), explicit=False)
    assert all(m.label.kind is LabelKind.NEUTRAL for s in direct.message_spaces for m in s)
    canon = [outcome(direct, p) for p in direct.profiles()]
    assert canon == [outcome(builtin("2x2-I"), p) for p in builtin("2x2-I").profiles()]


@given(st.sampled_from(list(lab_environment().outcomes)), st.booleans())
def test_build_direct_of_constant_scf(x, explicit):
    env = lab_environment()
    f = SocialChoiceFunction({theta: x for theta in env.type_profiles()})
    mech = build_direct(env, f, explicit)
    assert {outcome(mech, p) for p in mech.profiles()} == {x}


def test_unknown_builtin():
    with pytest.raises(DomainError):
        builtin("4x4-E")
