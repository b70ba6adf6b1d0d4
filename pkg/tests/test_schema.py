import json

import pytest

from mechlab.env import lab_environment, principal, worker_optimal
from mechlab.mechanism import BUILTIN_NAMES, builtin, render
from mechlab.composition import duplicated_direct
from mechlab.schema import (
    ParseError,
    config_from_dict,
    dump_environment,
    dump_mechanism,
    environment_from_dict,
    load_config,
    load_environment,
    load_mechanism,
    mechanism_from_dict,
)
from mechlab.simulation import ConfigError, LAB_GRID


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_mechanism_round_trip(name, tmp_path):
    mech = builtin(name)
    path = tmp_path / "m.json"
    path.write_text(dump_mechanism(mech))
    back = load_mechanism(str(path))
    assert back == mech
    assert render(back) == render(mech)


def test_outcomes_are_row_major():
    data = json.loads(dump_mechanism(builtin("3x3-E")))
    assert data["outcomes"][:3] == ["(L,M),(L,M)", "(L,P),(H,D)", "(L,P),(H,D)"]
    assert data["outcomes"][-1] == "(L,M),(L,M)"


def test_environment_round_trip(tmp_path):
    env = lab_environment()
    path = tmp_path / "env.json"
    path.write_text(dump_environment(env, [principal(env), worker_optimal(env)]))
    back, scfs = load_environment(str(path))
    assert back.payoffs == env.payoffs and back.type_spaces == env.type_spaces
    assert scfs == [principal(env), worker_optimal(env)]


def test_duplicated_mechanism_with_renamed_ids_loads():
    env = lab_environment()
    data = json.loads(dump_mechanism(duplicated_direct(env, principal(env))))
    for space in data["messages"]:
        for m in space:
            m["id"] = f"{m['id'][0]}{m['id'][1]}"
    mech = mechanism_from_dict(data)
    assert len(list(mech.profiles())) == 16


def test_malformed_json_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"kind": "mechanism",\n  "name": "x",\n  "messages": [oops]\n}\n')
    with pytest.raises(ParseError, match=r"line 3, column 16"):
        load_mechanism(str(path))


def test_schema_errors_name_the_field():
    data = json.loads(dump_mechanism(builtin("2x2-E")))
    data["outcomes"] = data["outcomes"][:3]
    with pytest.raises(ParseError, match="expected 4 entries"):
        mechanism_from_dict(data)
    data = json.loads(dump_mechanism(builtin("2x2-E")))
    data["messages"][0][0]["label"] = "shout"
    with pytest.raises(ParseError, match=r"messages\[0\]\[0\]\.label"):
        mechanism_from_dict(data)
    with pytest.raises(ParseError, match="kind"):
        environment_from_dict({"kind": "mechanism"})


def test_incomplete_scf_is_rejected():
    env = lab_environment()
    data = json.loads(dump_environment(env, [principal(env)]))
    data["scfs"][0]["table"].pop()
    with pytest.raises(ParseError, match="not total"):
        environment_from_dict(data)


def test_config_defaults_to_lab_layout():
    cfg = config_from_dict({"preset": "lab"})
    assert cfg.grid == LAB_GRID and cfg.seed == 0


def test_config_rejects_bad_session_size():
    with pytest.raises(ConfigError, match="multiple of 3"):
        config_from_dict({"grid": [{"mechanism": "2x2-I", "sizes": [10]}]})


def test_config_rejects_unknown_fields():
    with pytest.raises(ParseError, match="colour"):
        config_from_dict({"colour": "red"})
    with pytest.raises(ParseError, match="population"):
        config_from_dict({"population": {"liars": 1.0}})


def test_shipped_lab_config_loads():
    from pathlib import Path

    cfg = load_config(str(Path(__file__).parents[1] / "configs" / "lab.json"))
    assert cfg.grid == LAB_GRID
    assert cfg.session == {"n_periods": 13, "n_practice": 3, "paid_from_last": 10}


def test_non_contract_outcomes_stay_strings():
    import numpy as np

    from mechlab.composition import random_environment
    from mechlab.env import SocialChoiceFunction

    env = random_environment(np.random.default_rng(0))
    f = SocialChoiceFunction({th: env.outcomes[0] for th in env.type_profiles()}, "const")
    back, scfs = environment_from_dict(json.loads(dump_environment(env, [f])))
    assert back.outcomes == env.outcomes and scfs == [f]
