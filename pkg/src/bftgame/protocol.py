"""Round-based execution of one consensus height.

Each round: seat ``t`` proposes, every player decides whether to check and
whether to vote, the block is accepted when at least ``nu`` votes arrive.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .core import (
    ByzantineAssignment,
    GameParams,
    InfoSet,
    PreconditionViolated,
    PlayerType,
    RoundAction,
    RoundOutcome,
    SendRule,
    StrategyDomainError,
    StrategyProfile,
    update_info_set,
)


@dataclass(frozen=True)
class RealizedAction:
    checked: bool
    sent: bool


@dataclass(frozen=True)
class RoundRecord:
    round: int
    proposer: int
    proposer_type: PlayerType
    block_valid: bool
    actions: Tuple[RealizedAction, ...]  # seat order 1..n
    messages: int
    accepted: bool
    shadow: Optional[RealizedAction] = None

    def action_of(self, i: int) -> RealizedAction:
        return self.actions[i - 1]


@dataclass(frozen=True)
class Deviation:
    """One-shot change of ``player``'s action at ``round``; later rounds follow the profile.

    ``action`` replaces the receiver behavior (``None`` keeps the prescribed
    one). A proposal choice in ``action`` overrides the prescribed proposal,
    and ``flip_proposal`` inverts whatever proposal would have been made.
    """

    player: int
    round: int
    action: Optional[RoundAction] = None
    flip_proposal: bool = False

    def resolve(self, prescribed: RoundAction) -> RoundAction:
        act = self.action if self.action is not None else prescribed
        pv = act.propose_valid if act.propose_valid is not None else prescribed.propose_valid
        if self.flip_proposal:
            pv = not (True if pv is None else pv)
        return RoundAction(act.check, act.send, pv)

    @property
    def label(self) -> str:
        parts = []
        if self.action is not None:
            parts.append(self.action.label)
        if self.flip_proposal:
            parts.append("flip-proposal")
        return "+".join(parts) or "none"


@dataclass(frozen=True)
class ExecutionTrace:
    params: GameParams
    assignment: ByzantineAssignment
    rounds: Tuple[RoundRecord, ...]
    termination_round: int
    accepted_valid: Optional[bool]
    max_rounds: int
    shadow: Optional[int] = None

    @property
    def accepted(self) -> bool:
        return bool(self.rounds) and self.rounds[-1].accepted

    def player_actions(self, i: int) -> Tuple[RealizedAction, ...]:
        """Realized actions of rational player ``i`` (the shadow voter if ``i`` is the shadow)."""
        if i == self.shadow:
            return tuple(r.shadow for r in self.rounds)
        if i in self.assignment:
            raise ValueError(f"player {i} is Byzantine in this trace")
        return tuple(r.action_of(i) for r in self.rounds)

    def rational_players(self) -> Tuple[int, ...]:
        out = [i for i in range(1, self.params.n + 1) if i not in self.assignment]
        if self.shadow is not None:
            out.append(self.shadow)
        return tuple(sorted(out))

    @property
    def decided(self) -> frozenset:
        """Rational players whose own vote was part of the accepted quorum."""
        if not self.accepted:
            return frozenset()
        return frozenset(i for i in self.rational_players() if self.player_actions(i)[-1].sent)


@dataclass(frozen=True)
class LedgerEntry:
    reward: Fraction
    check_cost: Fraction
    send_cost: Fraction
    penalty: Fraction
    net: Fraction

    @property
    def signed_sum(self) -> Fraction:
        return self.reward - self.check_cost - self.send_cost - self.penalty


@dataclass(frozen=True)
class PayoffLedger:
    entries: Dict[int, LedgerEntry]

    def __getitem__(self, i: int) -> LedgerEntry:
        return self.entries[i]

    def net(self, i: int) -> Fraction:
        return self.entries[i].net


@dataclass(frozen=True)
class ConsensusProperties:
    termination: bool
    agreement: bool
    validity: bool
    all_rational_decided: bool


def byzantine_action(h: InfoSet) -> RoundAction:
    """Fixed Byzantine behavior: propose invalid blocks, vote only for invalid ones."""
    if h.own_type is not PlayerType.BYZANTINE:
        raise ValueError("byzantine_action called for a rational player")
    if h.is_proposer_round:
        return RoundAction(True, SendRule.IF_INVALID, propose_valid=False)
    return RoundAction(True, SendRule.IF_INVALID)


def _checked(a) -> RoundAction:
    if not isinstance(a, RoundAction):
        raise StrategyDomainError(f"strategy returned {a!r}, expected a RoundAction")
    return a


def run_height(
    p: GameParams,
    a: ByzantineAssignment,
    s: StrategyProfile,
    max_rounds: Optional[int] = None,
    *,
    deviation: Optional[Deviation] = None,
    shadow: Optional[int] = None,
) -> Tuple[ExecutionTrace, PayoffLedger]:
    """Run one height and settle payoffs.

    ``shadow`` names a player whose seat is Byzantine in ``a`` but who still
    takes part as an extra rational voter (it never proposes). The
    equilibrium oracle uses this to evaluate a player whose beliefs treat its
    own seat like any other.
    """
    n = p.n
    if max_rounds is None:
        max_rounds = n
    if not 1 <= max_rounds <= n:
        raise ValueError(f"max_rounds must lie in 1..{n}, got {max_rounds}")
    if a.n != n:
        raise ValueError("assignment and params disagree on n")
    if s.n != n:
        raise ValueError("profile and params disagree on n")
    if shadow is not None and shadow not in a:
        raise ValueError(f"shadow player {shadow} must hold a Byzantine seat")

    infos = {i: InfoSet.initial(a.type_of(i), i) for i in range(1, n + 1)}
    shadow_info = InfoSet.initial(PlayerType.RATIONAL, shadow) if shadow is not None else None

    def rational_action(i: int, h: InfoSet) -> RoundAction:
        prescribed = s.action(i, h)
        if deviation is not None and deviation.player == i and deviation.round == h.round:
            return _checked(deviation.resolve(prescribed))
        return prescribed

    records = []
    accepted = False
    t = 0
    for t in range(1, max_rounds + 1):
        acts = {}
        for i in range(1, n + 1):
            if i in a:
                acts[i] = byzantine_action(infos[i])
            else:
                acts[i] = rational_action(i, infos[i])
        if t in a:
            valid = False
        else:
            pv = acts[t].propose_valid
            valid = True if pv is None else bool(pv)
        realized = tuple(RealizedAction(acts[i].check, acts[i].sends(valid)) for i in range(1, n + 1))
        shadow_real = None
        if shadow is not None:
            sa = rational_action(shadow, shadow_info)
            shadow_real = RealizedAction(sa.check, sa.sends(valid))
        messages = sum(r.sent for r in realized) + (1 if shadow_real is not None and shadow_real.sent else 0)
        accepted = messages >= p.nu
        records.append(
            RoundRecord(t, t, a.type_of(t), valid, realized, messages, accepted, shadow_real)
        )
        if accepted:
            break
        for i in range(1, n + 1):
            infos[i] = update_info_set(infos[i], RoundOutcome(messages, False, realized[i - 1].checked, valid))
        if shadow is not None:
            shadow_info = update_info_set(shadow_info, RoundOutcome(messages, False, shadow_real.checked, valid))

    trace = ExecutionTrace(
        params=p,
        assignment=a,
        rounds=tuple(records),
        termination_round=t if accepted else n,
        accepted_valid=records[-1].block_valid if accepted else None,
        max_rounds=max_rounds,
        shadow=shadow,
    )
    return trace, settle(trace)


def settle(trace: ExecutionTrace) -> PayoffLedger:
    p = trace.params
    invalid_accepted = trace.accepted and trace.accepted_valid is False
    entries = {}
    for i in trace.rational_players():
        acts = trace.player_actions(i)
        checks = sum(x.checked for x in acts)
        sends = sum(x.sent for x in acts)
        rewarded = trace.accepted and acts[-1].sent
        reward = p.reward if rewarded else Fraction(0)
        penalty = p.kappa if invalid_accepted else Fraction(0)
        check_cost = checks * p.cost_check
        send_cost = sends * p.cost_send
        net = p.reward * rewarded - p.kappa * invalid_accepted - checks * p.cost_check - sends * p.cost_send
        entries[i] = LedgerEntry(reward, check_cost, send_cost, penalty, net)
    return PayoffLedger(entries)


def evaluate_consensus_properties(tr: ExecutionTrace) -> ConsensusProperties:
    """Consensus properties read off a trace.

    ``termination`` means a block was accepted; ``all_rational_decided`` is the
    stricter reading in which every rational player voted for the accepted block.
    """
    decided_rounds = {tr.termination_round for _ in tr.decided}
    rational = tr.rational_players()
    return ConsensusProperties(
        termination=tr.accepted,
        agreement=len(decided_rounds) <= 1,
        validity=not (tr.accepted and tr.accepted_valid is False),
        all_rational_decided=tr.accepted and all(i in tr.decided for i in rational),
    )


# canonical profiles

NO_CHECK_SEND = RoundAction(False, SendRule.ALWAYS, True)
NO_CHECK_SILENT = RoundAction(False, SendRule.NEVER, True)
CHECK_SEND_IF_VALID = RoundAction(True, SendRule.IF_VALID, True)


def profile_prop1(p: GameParams) -> StrategyProfile:
    """Invalid-acceptance regime: nobody checks, everybody votes; proposers check their own block."""
    rows = []
    for t in range(1, p.n + 1):
        rows.append(tuple(CHECK_SEND_IF_VALID if i == t else NO_CHECK_SEND for i in range(1, p.n + 1)))
    return StrategyProfile.from_table(p.n, rows, "prop1")


def profile_prop2(p: GameParams) -> StrategyProfile:
    """Coordination failure: rational players never check and never vote."""
    rows = [tuple(NO_CHECK_SILENT for _ in range(p.n)) for _ in range(p.n)]
    return StrategyProfile.from_table(p.n, rows, "prop2")


def profile_prop4(p: GameParams) -> StrategyProfile:
    """Validity-and-termination profile.

    Up to round f, seats ``<= n - nu + f + 1`` check and vote iff valid while
    the top ``nu - f - 1`` seats vote without checking; from round f + 1 on
    everybody votes without checking. Seats below the current round never
    hold a rational player on the equilibrium path; they are treated as
    checkers.
    """
    if not (p.f < p.nu and p.n - p.f > p.nu):
        raise PreconditionViolated(f"requires f < nu < n - f, got n={p.n}, f={p.f}, nu={p.nu}")
    m = p.checker_bound
    rows = []
    for t in range(1, p.n + 1):
        if t <= p.f:
            rows.append(tuple(CHECK_SEND_IF_VALID if i <= m else NO_CHECK_SEND for i in range(1, p.n + 1)))
        else:
            rows.append(tuple(NO_CHECK_SEND for _ in range(p.n)))
    return StrategyProfile.from_table(p.n, rows, "prop4")


def profile_prescribed(p: GameParams) -> StrategyProfile:
    """The prescribed protocol: always check, vote iff valid."""
    rows = [tuple(CHECK_SEND_IF_VALID for _ in range(p.n)) for _ in range(p.n)]
    return StrategyProfile.from_table(p.n, rows, "prescribed")


PROFILES = {
    "prop1": profile_prop1,
    "prop2": profile_prop2,
    "prop4": profile_prop4,
    "prescribed": profile_prescribed,
}


def canonical_profile(name: str, p: GameParams) -> StrategyProfile:
    try:
        return PROFILES[name](p)
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
