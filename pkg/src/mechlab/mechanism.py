"""Finite mechanisms with labelled messages.

A :class:`Mechanism` stores each agent's message list and a dense outcome
table over the message-profile product. Each message carries a label that
decides whether sending it can be a lie, plus an optional *canonical* meaning
(the type it stands for, or ``"U"`` for the unanswered option) that links
implicit and explicit variants and drives type inference for the staffer.
"""
from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterator, Mapping, Sequence

from .env import (
    BEGINNER,
    EXPERT,
    HD,
    HM,
    LM,
    LP,
    DomainError,
    Environment,
    SocialChoiceFunction,
    format_allocation,
    lab_environment,
    principal,
)

UNANSWERED = "U"


class UnsupportedOperation(RuntimeError):
    """The mechanism does not define the requested operation."""


class LabelKind(Enum):
    CLAIM = "claim"
    NEUTRAL = "neutral"
    UNANSWERED = "unanswered"


@dataclass(frozen=True)
class MessageLabel:
    kind: LabelKind
    value: Hashable  # claimed type for CLAIM, display tag otherwise

    @classmethod
    def claim(cls, t: Hashable) -> "MessageLabel":
        return cls(LabelKind.CLAIM, t)

    @classmethod
    def neutral(cls, tag: str) -> "MessageLabel":
        return cls(LabelKind.NEUTRAL, tag)

    @classmethod
    def unanswered(cls, tag: str = "Decline to State") -> "MessageLabel":
        return cls(LabelKind.UNANSWERED, tag)


@dataclass(frozen=True)
class Message:
    id: Hashable
    label: MessageLabel
    canonical: Hashable | None = None


MessageProfile = tuple


@dataclass(frozen=True)
class Mechanism:
    name: str
    message_spaces: tuple[tuple[Message, ...], ...]
    table: Mapping[MessageProfile, Hashable]
    _index: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index = []
        for i, space in enumerate(self.message_spaces):
            ids = [m.id for m in space]
            if not ids or len(set(ids)) != len(ids):
                raise DomainError(f"agent {i}: message ids must be distinct and non-empty")
            if len(set(m.label for m in space)) != len(space):
                raise DomainError(f"agent {i}: message labels must be distinct")
            index.append({m.id: m for m in space})
        object.__setattr__(self, "_index", tuple(index))
        missing = [p for p in self.profiles() if p not in self.table]
        if missing:
            raise DomainError(f"{self.name}: outcome table misses {missing[0]!r}")

    @property
    def n_agents(self) -> int:
        return len(self.message_spaces)

    def message_ids(self, agent: int) -> tuple:
        return tuple(m.id for m in self.message_spaces[agent])

    def message(self, agent: int, msg_id: Hashable) -> Message:
        try:
            return self._index[agent][msg_id]
        except IndexError:
            raise DomainError(f"unknown agent {agent!r}") from None
        except (KeyError, TypeError):
            raise DomainError(f"{self.name}: agent {agent} has no message {msg_id!r}") from None

    def profiles(self) -> Iterator[MessageProfile]:
        return itertools.product(*(self.message_ids(i) for i in range(self.n_agents)))

    def by_canonical(self, agent: int, canonical: Hashable) -> Hashable:
        for m in self.message_spaces[agent]:
            if m.canonical == canonical:
                return m.id
        raise DomainError(f"{self.name}: agent {agent} has no message meaning {canonical!r}")

    @property
    def supports_inference(self) -> bool:
        return all(m.canonical is not None for space in self.message_spaces for m in space)


def outcome(mech: Mechanism, msgs: Sequence[Hashable]) -> Hashable:
    msgs = tuple(msgs)
    if len(msgs) != mech.n_agents:
        raise DomainError(f"{mech.name}: expected {mech.n_agents} messages, got {len(msgs)}")
    for i, m in enumerate(msgs):
        mech.message(i, m)
    return mech.table[msgs]


def message_is_lie(mech: Mechanism, agent: int, own_type: Hashable, msg: Hashable) -> bool:
    label = mech.message(agent, msg).label
    return label.kind is LabelKind.CLAIM and label.value != own_type


def truthful_message(mech: Mechanism, agent: int, own_type: Hashable) -> Hashable:
    return mech.by_canonical(agent, own_type)


def inferred_types(mech: Mechanism, msgs: Sequence[Hashable]) -> tuple:
    """Types the mechanism attributes to the workers after seeing ``msgs``.

    Claims (explicit or neutral-canonical) are read at face value. With two
    agents and a binary type space, a lone unanswered report is assigned the
    type opposite to the other report, and two unanswered reports are both
    read as beginners.
    """
    if not mech.supports_inference:
        raise UnsupportedOperation(f"{mech.name} has no type-inference rule")
    claims = [mech.message(i, m).canonical for i, m in enumerate(msgs)]
    if len(claims) != mech.n_agents:
        raise DomainError(f"{mech.name}: expected {mech.n_agents} messages, got {len(claims)}")
    n_blank = claims.count(UNANSWERED)
    if n_blank == 0:
        return tuple(claims)
    if len(claims) != 2:
        raise UnsupportedOperation("unanswered reports are only interpreted for two workers")
    if n_blank == 2:
        return (BEGINNER, BEGINNER)
    other = claims[1] if claims[0] == UNANSWERED else claims[0]
    opposite = {BEGINNER: EXPERT, EXPERT: BEGINNER}.get(other)
    if opposite is None:
        raise UnsupportedOperation(f"no opposite type for {other!r}")
    return tuple(opposite if c == UNANSWERED else c for c in claims)


def _neutral_ids(n: int) -> list[str]:
    return list(string.ascii_uppercase[:n])


def build_direct(env: Environment, f: SocialChoiceFunction, explicit: bool, name: str | None = None) -> Mechanism:
    """Direct revelation mechanism of ``f``: messages are types, outcome is ``f``.

    Explicit variants use the types themselves as message ids with claim
    labels; implicit variants use neutral tags ``A, B, ...`` in type order.
    """
    if not f.is_total(env):
        raise DomainError(f"{f.name} is not total on the type space")
    spaces = []
    rename = []
    for types in env.type_spaces:
        if explicit:
            ids = list(types)
            space = tuple(Message(t, MessageLabel.claim(t), t) for t in types)
        else:
            ids = _neutral_ids(len(types))
            space = tuple(
                Message(k, MessageLabel.neutral(f"Option {k}"), t) for k, t in zip(ids, types)
            )
        spaces.append(space)
        rename.append(dict(zip(types, ids)))
    table = {
        tuple(rename[i][t] for i, t in enumerate(theta)): f(theta)
        for theta in env.type_profiles()
    }
    if name is None:
        name = f"direct-{f.name}-{'E' if explicit else 'I'}"
    return Mechanism(name, tuple(spaces), table)


_EXPLICIT_LABELS = {
    BEGINNER: MessageLabel.claim(BEGINNER),
    EXPERT: MessageLabel.claim(EXPERT),
    UNANSWERED: MessageLabel.unanswered(),
}
_IMPLICIT_IDS = {BEGINNER: "A", EXPERT: "B", UNANSWERED: "C"}

# Worker 1's report indexes rows, worker 2's report indexes columns.
_TABLE_3X3 = {
    (BEGINNER, BEGINNER): (LM, LM),
    (BEGINNER, EXPERT): (LP, HD),
    (BEGINNER, UNANSWERED): (LP, HD),
    (EXPERT, BEGINNER): (HD, LP),
    (EXPERT, EXPERT): (HM, HM),
    (EXPERT, UNANSWERED): (HD, LP),
    (UNANSWERED, BEGINNER): (HD, LP),
    (UNANSWERED, EXPERT): (LP, HD),
    (UNANSWERED, UNANSWERED): (LM, LM),
}


def _lab_mechanism(name: str, canon: Sequence[str], explicit: bool) -> Mechanism:
    if explicit:
        space = tuple(Message(c, _EXPLICIT_LABELS[c], c) for c in canon)
        rename = {c: c for c in canon}
    else:
        rename = {c: _IMPLICIT_IDS[c] for c in canon}
        space = tuple(
            Message(rename[c], MessageLabel.neutral(f"Option {rename[c]}"), c) for c in canon
        )
    table = {
        (rename[a], rename[b]): _TABLE_3X3[(a, b)]
        for a in canon
        for b in canon
    }
    return Mechanism(name, (space, space), table)


def mechanism_2x2(explicit: bool) -> Mechanism:
    return _lab_mechanism("2x2-E" if explicit else "2x2-I", (BEGINNER, EXPERT), explicit)


def mechanism_3x3(explicit: bool) -> Mechanism:
    return _lab_mechanism("3x3-E" if explicit else "3x3-I", (BEGINNER, EXPERT, UNANSWERED), explicit)


BUILTIN_NAMES = ("2x2-I", "2x2-E", "3x3-I", "3x3-E")


def builtin(name: str) -> Mechanism:
    key = name.strip().replace("×", "x").upper().replace("X", "x")
    makers = {
        "2x2-I": lambda: mechanism_2x2(False),
        "2x2-E": lambda: mechanism_2x2(True),
        "3x3-I": lambda: mechanism_3x3(False),
        "3x3-E": lambda: mechanism_3x3(True),
    }
    if key not in makers:
        raise DomainError(f"unknown mechanism {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return makers[key]()


def canonical_bijection(a: Mechanism, b: Mechanism) -> list[dict]:
    """Per-agent map from ``a``'s message ids to ``b``'s with the same meaning."""
    if a.n_agents != b.n_agents:
        raise DomainError("mechanisms have different numbers of agents")
    return [
        {m.id: b.by_canonical(i, m.canonical) for m in a.message_spaces[i]}
        for i in range(a.n_agents)
    ]


def render(mech: Mechanism) -> str:
    """Aligned text matrix: worker 1's messages as rows, worker 2's as columns."""
    if mech.n_agents != 2:
        lines = [f"mechanism: {mech.name}"]
        for p in mech.profiles():
            lines.append(f"{' '.join(map(str, p))}  ->  {_fmt(mech.table[p])}")
        return "\n".join(lines) + "\n"
    rows, cols = mech.message_ids(0), mech.message_ids(1)
    cells = [[_fmt(mech.table[(r, c)]) for c in cols] for r in rows]
    head_w = max(len(str(r)) for r in rows)
    col_w = [max(len(str(c)), *(len(cells[k][j]) for k in range(len(rows)))) for j, c in enumerate(cols)]
    lines = [
        f"mechanism: {mech.name}",
        "rows: worker 1 message; columns: worker 2 message",
    ]
    for i in range(2):
        legend = ", ".join(f"{m.id} = {_describe(m.label)}" for m in mech.message_spaces[i])
        lines.append(f"worker {i + 1} messages: {legend}")
    lines.append("")
    lines.append("  ".join([" " * head_w] + [str(c).ljust(w) for c, w in zip(cols, col_w)]).rstrip())
    for r, row in zip(rows, cells):
        lines.append("  ".join([str(r).ljust(head_w)] + [v.ljust(w) for v, w in zip(row, col_w)]).rstrip())
    return "\n".join(lines) + "\n"


def _describe(label: MessageLabel) -> str:
    if label.kind is LabelKind.CLAIM:
        return {BEGINNER: "Beginner", EXPERT: "Expert"}.get(label.value, f"claim {label.value}")
    return str(label.value)


def _fmt(x: Hashable) -> str:
    if isinstance(x, tuple) and x and all(hasattr(c, "salary") for c in x):
        return format_allocation(x)
    return str(x)


def lab_direct(explicit: bool) -> Mechanism:
    """Direct mechanism of the principal's SCF built generically."""
    env = lab_environment()
    return build_direct(env, principal(env), explicit)
