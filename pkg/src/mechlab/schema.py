"""JSON file formats for environments, SCFs, mechanisms and experiment configs.

Environment::

    {"kind": "environment", "name": "...",
     "types": [["B", "E"], ["B", "E"]],
     "outcomes": ["(H,M),(H,M)", ...],
     "payoffs": [{"B": {"(H,M),(H,M)": "4", ...}, "E": {...}}, {...}],
     "scfs": [{"name": "principal", "table": [{"types": ["B", "E"], "outcome": "..."}, ...]}]}

Payoffs are strings or integers read as exact fractions. Outcome strings that
parse as a list of contracts become contract tuples.

Mechanism::

    {"kind": "mechanism", "name": "3x3-E",
     "messages": [[{"id": "B", "label": "claim", "value": "B", "canonical": "B"}, ...], [...]],
     "outcomes": ["(L,M),(L,M)", ...]}

``outcomes`` is dense in row-major message order (last agent varies fastest).
Labels are ``claim`` (``value`` is the claimed type), ``neutral`` and
``unanswered`` (``value`` is a display tag).

Experiment config::

    {"preset": "lab"} or {"grid": [{"mechanism": "2x2-I", "sizes": [12, 12, 12]}, ...]},
    optional "seed", "belief_mode", "population": {...MixturePopulation fields...},
    and "session": {"n_periods": 13, "n_practice": 3, "paid_from_last": 10}
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable

from .env import Contract, DomainError, Environment, SocialChoiceFunction, format_allocation
from .mechanism import LabelKind, Mechanism, Message, MessageLabel
from .simulation import LAB_GRID, ConfigError, GridEntry, MixturePopulation, SessionConfig


class ParseError(ValueError):
    """A file is not valid JSON or does not follow the documented schema."""


def _load(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def _need(obj: Any, key: str, kind: type, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise ParseError(f"{where}.{key}: expected {kind.__name__}")
    return value


def encode_outcome(x: Hashable) -> str:
    if isinstance(x, tuple) and all(isinstance(c, Contract) for c in x):
        return format_allocation(x)
    return str(x)


def decode_outcome(text: str) -> Hashable:
    parts = [p for p in text.replace(" ", "").split("),(")]
    try:
        contracts = [Contract.parse(p) for p in parts]
    except DomainError:
        return text
    return tuple(contracts)


# -- environments and SCFs ---------------------------------------------------


def environment_to_dict(env: Environment, scfs: list[SocialChoiceFunction] = ()) -> dict:
    return {
        "kind": "environment",
        "name": env.name,
        "types": [list(ts) for ts in env.type_spaces],
        "outcomes": [encode_outcome(x) for x in env.outcomes],
        "payoffs": [
            {t: {encode_outcome(x): str(env.payoffs[(i, x, t)]) for x in env.outcomes} for t in ts}
            for i, ts in enumerate(env.type_spaces)
        ],
        "scfs": [
            {
                "name": f.name,
                "table": [{"types": list(theta), "outcome": encode_outcome(f(theta))} for theta in env.type_profiles()],
            }
            for f in scfs
        ],
    }


def environment_from_dict(data: dict, source: str = "environment") -> tuple[Environment, list[SocialChoiceFunction]]:
    if data.get("kind") != "environment":
        raise ParseError(f"{source}: kind must be 'environment'")
    types = _need(data, "types", list, source)
    outcomes_raw = _need(data, "outcomes", list, source)
    payoff_raw = _need(data, "payoffs", list, source)
    if len(payoff_raw) != len(types):
        raise ParseError(f"{source}.payoffs: need one entry per agent")
    outcomes = tuple(decode_outcome(str(x)) for x in outcomes_raw)
    by_text = dict(zip((str(x) for x in outcomes_raw), outcomes))
    payoffs = {}
    for i, (ts, table) in enumerate(zip(types, payoff_raw)):
        for t in ts:
            row = table.get(t) if isinstance(table, dict) else None
            if not isinstance(row, dict):
                raise ParseError(f"{source}.payoffs[{i}]: missing type {t!r}")
            for text, value in row.items():
                if text not in by_text:
                    raise ParseError(f"{source}.payoffs[{i}].{t}: unknown outcome {text!r}")
                try:
                    payoffs[(i, by_text[text], t)] = Fraction(str(value))
                except (ValueError, ZeroDivisionError):
                    raise ParseError(f"{source}.payoffs[{i}].{t}.{text}: not a rational {value!r}") from None
    try:
        env = Environment(tuple(tuple(ts) for ts in types), outcomes, payoffs, name=data.get("name", "environment"))
    except DomainError as exc:
        raise ParseError(f"{source}: {exc}") from None
    scfs = []
    for k, raw in enumerate(data.get("scfs", [])):
        where = f"{source}.scfs[{k}]"
        table = {}
        for entry in _need(raw, "table", list, where):
            theta = tuple(_need(entry, "types", list, where))
            text = str(_need(entry, "outcome", str, where))
            if text not in by_text:
                raise ParseError(f"{where}: unknown outcome {text!r}")
            table[theta] = by_text[text]
        f = SocialChoiceFunction(table, raw.get("name", f"scf{k}"))
        if not f.is_total(env):
            raise ParseError(f"{where}: SCF is not total on the type space")
        scfs.append(f)
    return env, scfs


def dump_environment(env: Environment, scfs: list[SocialChoiceFunction] = ()) -> str:
    return json.dumps(environment_to_dict(env, list(scfs)), indent=2) + "\n"


def load_environment(path: str) -> tuple[Environment, list[SocialChoiceFunction]]:
    return environment_from_dict(_load(_read(path), path), path)


# -- mechanisms ----------------------------------------------------------------


def mechanism_to_dict(mech: Mechanism) -> dict:
    return {
        "kind": "mechanism",
        "name": mech.name,
        "messages": [
            [
                {"id": m.id, "label": m.label.kind.value, "value": m.label.value, "canonical": m.canonical}
                for m in space
            ]
            for space in mech.message_spaces
        ],
        "outcomes": [encode_outcome(mech.table[p]) for p in mech.profiles()],
    }


def mechanism_from_dict(data: dict, source: str = "mechanism") -> Mechanism:
    if data.get("kind") != "mechanism":
        raise ParseError(f"{source}: kind must be 'mechanism'")
    spaces = []
    for i, raw_space in enumerate(_need(data, "messages", list, source)):
        space = []
        for j, raw in enumerate(raw_space):
            where = f"{source}.messages[{i}][{j}]"
            kind = _need(raw, "label", str, where)
            try:
                label = MessageLabel(LabelKind(kind), raw.get("value", raw.get("id")))
            except ValueError:
                raise ParseError(f"{where}.label: unknown label kind {kind!r}") from None
            space.append(Message(_need(raw, "id", str, where), label, raw.get("canonical")))
        spaces.append(tuple(space))
    outcomes = _need(data, "outcomes", list, source)
    profiles = list(itertools.product(*([m.id for m in s] for s in spaces)))
    if len(outcomes) != len(profiles):
        raise ParseError(f"{source}.outcomes: expected {len(profiles)} entries, got {len(outcomes)}")
    table = {p: decode_outcome(str(x)) for p, x in zip(profiles, outcomes)}
    try:
        return Mechanism(data.get("name", "mechanism"), tuple(spaces), table)
    except DomainError as exc:
        raise ParseError(f"{source}: {exc}") from None


def dump_mechanism(mech: Mechanism) -> str:
    return json.dumps(mechanism_to_dict(mech), indent=2) + "\n"


def load_mechanism(path: str) -> Mechanism:
    return mechanism_from_dict(_load(_read(path), path), path)


# -- experiment configs ---------------------------------------------------------


@dataclass
class ExperimentConfig:
    grid: tuple[GridEntry, ...] = LAB_GRID
    population: MixturePopulation = field(default_factory=MixturePopulation)
    seed: int = 0
    belief_mode: str = "static"
    session: dict = field(default_factory=dict)


_SESSION_KEYS = {"n_periods", "n_practice", "paid_from_last", "ecu_per_dollar"}
_POP_KEYS = {"truthteller", "coordinator", "lie_averse", "costs", "cost_weights", "epsilon"}


def config_from_dict(data: dict, source: str = "config") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: expected an object")
    unknown = set(data) - {"preset", "grid", "seed", "belief_mode", "population", "session"}
    if unknown:
        raise ParseError(f"{source}: unknown field {sorted(unknown)[0]!r}")
    cfg = ExperimentConfig()
    if "grid" in data:
        entries = []
        for k, raw in enumerate(_need(data, "grid", list, source)):
            where = f"{source}.grid[{k}]"
            sizes = tuple(_need(raw, "sizes", list, where))
            if not all(isinstance(s, int) for s in sizes):
                raise ParseError(f"{where}.sizes: expected integers")
            entries.append(GridEntry(_need(raw, "mechanism", str, where), sizes))
        cfg.grid = tuple(entries)
    elif data.get("preset", "lab") != "lab":
        raise ParseError(f"{source}.preset: only 'lab' is defined")
    if "seed" in data:
        cfg.seed = _need(data, "seed", int, source)
    cfg.belief_mode = data.get("belief_mode", cfg.belief_mode)
    session = data.get("session", {})
    if set(session) - _SESSION_KEYS:
        raise ParseError(f"{source}.session: unknown field {sorted(set(session) - _SESSION_KEYS)[0]!r}")
    cfg.session = dict(session)
    pop = data.get("population", {})
    if set(pop) - _POP_KEYS:
        raise ParseError(f"{source}.population: unknown field {sorted(set(pop) - _POP_KEYS)[0]!r}")
    kwargs = dict(pop)
    if "costs" in kwargs:
        kwargs["costs"] = tuple(Fraction(str(c)) for c in kwargs["costs"])
    if kwargs.get("cost_weights") is not None and "cost_weights" in kwargs:
        kwargs["cost_weights"] = tuple(kwargs["cost_weights"])
    cfg.population = MixturePopulation(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise :class:`ConfigError` for any session the config would fail to build."""
    for entry in cfg.grid:
        for size in entry.sizes:
            SessionConfig(entry.mechanism, size, belief_mode=cfg.belief_mode, **cfg.session)
    cfg.population(__import__("numpy").random.default_rng(0), 3)


def load_config(path: str) -> ExperimentConfig:
    return config_from_dict(_load(_read(path), path), path)


__all__ = [
    "ConfigError", "ExperimentConfig", "ParseError", "config_from_dict", "dump_environment",
    "dump_mechanism", "environment_from_dict", "environment_to_dict", "load_config",
    "load_environment", "load_mechanism", "mechanism_from_dict", "mechanism_to_dict",
]
