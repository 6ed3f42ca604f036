"""Shared vocabulary of the Byzantine/rational committee game.

Parameters, player types, Byzantine seat assignments, information sets and
round actions. Everything here is an immutable value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple, Union

Number = Union[int, str, Fraction]


class GameError(Exception):
    """Base class for all errors raised by this package."""


class ParamsError(GameError, ValueError):
    pass


class OrderingViolated(ParamsError):
    """kappa > R > c_check > c_send > 0 does not hold."""


class RangeViolated(ParamsError):
    """n, f or nu out of range."""


class StrategyDomainError(GameError, ValueError):
    """A strategy produced an action outside the six leaf behaviors."""


class PreconditionViolated(GameError, ValueError):
    pass


class DomainError(GameError, ValueError):
    """An analytic quantity was requested outside its round range."""


class DivisionByZero(GameError, ZeroDivisionError):
    pass


class InfeasibleConditioning(GameError, ValueError):
    """No Byzantine assignment is consistent with the requested history."""


class EnumerationTooLarge(GameError, ValueError):
    pass


def to_fraction(x: Number) -> Fraction:
    if isinstance(x, float):
        # floats are only accepted through their shortest repr, never their binary expansion
        return Fraction(repr(x))
    return Fraction(x)


def validate_params(p: "GameParams", *, relax_ordering: bool = False) -> None:
    """Raise if ``p`` breaks a range or cost-ordering invariant.

    ``f = 0`` is accepted so the no-Byzantine regime can be expressed.
    """
    if p.n < 2:
        raise RangeViolated(f"n must be >= 2, got {p.n}")
    if not 0 <= p.f < p.n:
        raise RangeViolated(f"f must satisfy 0 <= f < n, got f={p.f}, n={p.n}")
    if not 1 <= p.nu <= p.n:
        raise RangeViolated(f"nu must satisfy 1 <= nu <= n, got nu={p.nu}, n={p.n}")
    if p.cost_send <= 0:
        raise OrderingViolated(f"c_send must be > 0, got {p.cost_send}")
    if not p.cost_check > p.cost_send:
        raise OrderingViolated(f"c_check ({p.cost_check}) must exceed c_send ({p.cost_send})")
    if not p.reward > p.cost_check:
        raise OrderingViolated(f"R ({p.reward}) must exceed c_check ({p.cost_check})")
    if not relax_ordering and not p.kappa > p.reward:
        raise OrderingViolated(f"kappa ({p.kappa}) must exceed R ({p.reward})")


@dataclass(frozen=True)
class GameParams:
    n: int
    f: int
    nu: int
    reward: Fraction
    cost_check: Fraction
    cost_send: Fraction
    kappa: Fraction
    height: str = "k"
    relaxed: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        for name in ("reward", "cost_check", "cost_send", "kappa"):
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        for name in ("n", "f", "nu"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise RangeViolated(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        validate_params(self, relax_ordering=self.relaxed)

    @classmethod
    def relaxed_kappa(cls, **kwargs) -> "GameParams":
        """Build params allowing kappa <= R (used for near-miss regime reports)."""
        return cls(relaxed=True, **kwargs)

    def with_(self, **changes) -> "GameParams":
        return replace(self, **changes)

    @property
    def checker_bound(self) -> int:
        """Largest index that checks in the validity-and-termination profile, n - nu + f + 1."""
        return self.n - self.nu + self.f + 1

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "nu": self.nu,
            "reward": self.reward,
            "cost_check": self.cost_check,
            "cost_send": self.cost_send,
            "kappa": self.kappa,
            "height": self.height,
        }


class PlayerType(enum.Enum):
    BYZANTINE = "byzantine"
    RATIONAL = "rational"


@dataclass(frozen=True)
class ByzantineAssignment:
    """Set of Byzantine seats (1-based) in a committee of ``n``."""

    n: int
    indexes: frozenset

    def __post_init__(self):
        idx = frozenset(int(i) for i in self.indexes)
        if any(not 1 <= i <= self.n for i in idx):
            raise RangeViolated(f"Byzantine indexes must lie in 1..{self.n}: {sorted(idx)}")
        object.__setattr__(self, "indexes", idx)

    @classmethod
    def of(cls, p: GameParams, indexes) -> "ByzantineAssignment":
        idx = list(indexes)
        if len(set(idx)) != len(idx):
            raise RangeViolated(f"duplicate Byzantine indexes: {idx}")
        a = cls(p.n, frozenset(idx))
        if len(a.indexes) != p.f:
            raise RangeViolated(f"expected {p.f} Byzantine indexes, got {len(a.indexes)}")
        return a

    @classmethod
    def worst_case(cls, p: GameParams) -> "ByzantineAssignment":
        """Byzantines occupy seats 1..f, so they propose first."""
        return cls(p.n, frozenset(range(1, p.f + 1)))

    @property
    def highest(self) -> int:
        """i_B, the highest Byzantine index (0 when there are none)."""
        return max(self.indexes, default=0)

    def type_of(self, i: int) -> PlayerType:
        return PlayerType.BYZANTINE if i in self.indexes else PlayerType.RATIONAL

    def __contains__(self, i) -> bool:
        return i in self.indexes


class SendRule(enum.Enum):
    NEVER = "never"
    ALWAYS = "always"
    IF_VALID = "if-valid"
    IF_INVALID = "if-invalid"


@dataclass(frozen=True)
class RoundAction:
    """What a player does in one round.

    ``propose_valid`` only matters when the player is the round's proposer.
    Conditional send rules need a check first; anything else is rejected.
    """

    check: bool
    send: SendRule
    propose_valid: Optional[bool] = None

    def __post_init__(self):
        if not isinstance(self.send, SendRule):
            raise StrategyDomainError(f"send must be a SendRule, got {self.send!r}")
        if self.send in (SendRule.IF_VALID, SendRule.IF_INVALID) and not self.check:
            raise StrategyDomainError(f"send rule {self.send.value} requires a validity check")

    def sends(self, block_valid: bool) -> bool:
        if self.send is SendRule.ALWAYS:
            return True
        if self.send is SendRule.IF_VALID:
            return block_valid
        if self.send is SendRule.IF_INVALID:
            return not block_valid
        return False

    def behavior(self) -> "RoundAction":
        """The receiver part of the action, proposal choice dropped."""
        return RoundAction(self.check, self.send)

    @property
    def label(self) -> str:
        s = f"{'check' if self.check else 'nocheck'}:{self.send.value}"
        if self.propose_valid is not None:
            s = f"{'valid' if self.propose_valid else 'invalid'}/" + s
        return s

    @classmethod
    def parse(cls, text: str) -> "RoundAction":
        text = text.strip()
        propose = None
        if "/" in text:
            head, text = text.split("/", 1)
            if head not in ("valid", "invalid"):
                raise StrategyDomainError(f"bad proposal token {head!r}")
            propose = head == "valid"
        try:
            c, s = text.split(":")
            check = {"check": True, "nocheck": False}[c]
            send = SendRule(s)
        except (ValueError, KeyError):
            raise StrategyDomainError(f"cannot parse action {text!r}") from None
        return cls(check, send, propose)


def all_behaviors() -> Tuple[RoundAction, ...]:
    """The six leaves of the receiver decision tree."""
    out = []
    for check in (False, True):
        for send in SendRule:
            try:
                out.append(RoundAction(check, send))
            except StrategyDomainError:
                continue
    return tuple(out)


BEHAVIORS = all_behaviors()


@dataclass(frozen=True)
class RoundOutcome:
    """What a player observes at the end of a round."""

    messages: int
    accepted: bool
    checked: bool
    block_valid: Optional[bool] = None


@dataclass(frozen=True)
class InfoSet:
    """A player's information at the start of a round.

    ``validity`` holds, for every past round, ``None`` (not checked) or the
    observed validity; ``messages`` and ``accepted`` hold the public history.
    """

    round: int
    own_type: PlayerType
    index: int = 0
    validity: Tuple[Optional[bool], ...] = ()
    messages: Tuple[int, ...] = ()
    accepted: Tuple[bool, ...] = ()

    @classmethod
    def initial(cls, own_type: PlayerType, index: int = 0) -> "InfoSet":
        return cls(1, own_type, index)

    @property
    def is_proposer_round(self) -> bool:
        return self.index == self.round


def update_info_set(h: InfoSet, outcome: RoundOutcome) -> InfoSet:
    """Information set for round ``h.round + 1`` after observing ``outcome``."""
    if outcome.accepted:
        raise ValueError(f"a block was accepted at round {h.round}; the game is over")
    seen = outcome.block_valid if outcome.checked else None
    if outcome.checked and seen is None:
        raise ValueError("a check must reveal the block validity")
    return InfoSet(
        round=h.round + 1,
        own_type=h.own_type,
        index=h.index,
        validity=h.validity + (seen,),
        messages=h.messages + (outcome.messages,),
        accepted=h.accepted + (False,),
    )


Strategy = Callable[[InfoSet], RoundAction]


@dataclass(frozen=True)
class StrategyProfile:
    """One strategy per seat, used whenever the seat is held by a rational player.

    Byzantine seats ignore the profile. ``table`` is an optional compact form
    (round -> seat -> action) for strategies that depend only on the round and
    seat; it enables the compiled simulation kernel.
    """

    n: int
    strategies: Tuple[Strategy, ...]
    name: str = "custom"
    table: Optional[Tuple[Tuple[RoundAction, ...], ...]] = None

    def __post_init__(self):
        if len(self.strategies) != self.n:
            raise ValueError(f"profile needs {self.n} strategies, got {len(self.strategies)}")

    def strategy(self, i: int) -> Strategy:
        return self.strategies[i - 1]

    def action(self, i: int, h: InfoSet) -> RoundAction:
        a = self.strategies[i - 1](h)
        if not isinstance(a, RoundAction):
            raise StrategyDomainError(f"strategy of player {i} returned {a!r}")
        return a

    @classmethod
    def from_table(cls, n: int, table: Sequence[Sequence[RoundAction]], name: str = "table") -> "StrategyProfile":
        """Profile whose action depends only on (round, seat); rows are rounds 1..len(table)."""
        rows = tuple(tuple(row) for row in table)
        for row in rows:
            if len(row) != n:
                raise ValueError(f"table rows need {n} actions, got {len(row)}")
            for a in row:
                if not isinstance(a, RoundAction):
                    raise StrategyDomainError(f"table entry {a!r} is not a RoundAction")

        def make(i):
            def strategy(h: InfoSet) -> RoundAction:
                t = min(h.round, len(rows))
                return rows[t - 1][i - 1]

            return strategy

        return cls(n, tuple(make(i) for i in range(1, n + 1)), name, rows)

    def table_action(self, t: int, i: int) -> RoundAction:
        if self.table is None:
            raise ValueError(f"profile {self.name!r} has no action table")
        return self.table[min(t, len(self.table)) - 1][i - 1]
