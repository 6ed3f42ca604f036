from fractions import Fraction

import pytest

from bftgame.core import (
    BEHAVIORS,
    ByzantineAssignment,
    GameParams,
    InfoSet,
    OrderingViolated,
    PlayerType,
    RangeViolated,
    RoundAction,
    RoundOutcome,
    SendRule,
    StrategyDomainError,
    StrategyProfile,
    update_info_set,
)


def params(**kw):
    base = dict(n=10, f=3, nu=5, reward=10, cost_check=2, cost_send=1, kappa=20)
    base.update(kw)
    return GameParams(**base)


class TestParams:
    def test_coerces_to_fractions(self):
        p = params(reward="21/2", cost_check=0.5, cost_send="1/4")
        assert p.reward == Fraction(21, 2)
        assert p.cost_check == Fraction(1, 2)
        assert isinstance(p.kappa, Fraction)

    @pytest.mark.parametrize("kw", [
        dict(kappa=10),          # kappa must exceed R
        dict(reward=2),          # R must exceed c_check
        dict(cost_check=1),      # c_check must exceed c_send
        dict(cost_send=0, cost_check="1/2"),
    ])
    def test_ordering(self, kw):
        with pytest.raises(OrderingViolated):
            params(**kw)

    @pytest.mark.parametrize("kw", [dict(n=1, f=0, nu=1), dict(f=10), dict(f=-1), dict(nu=0), dict(nu=11)])
    def test_ranges(self, kw):
        with pytest.raises(RangeViolated):
            params(**kw)

    def test_zero_byzantines_allowed(self):
        assert params(f=0, nu=1).f == 0

    def test_relaxed_kappa(self):
        p = GameParams.relaxed_kappa(n=10, f=3, nu=5, reward=10, cost_check=2, cost_send=1, kappa=5)
        assert p.kappa == 5
        with pytest.raises(OrderingViolated):
            GameParams.relaxed_kappa(n=10, f=3, nu=5, reward=10, cost_check=1, cost_send=1, kappa=5)

    def test_non_integer_sizes(self):
        with pytest.raises(RangeViolated):
            params(n=10.5)

    def test_checker_bound(self):
        assert params().checker_bound == 10 - 5 + 3 + 1


class TestAssignment:
    def test_worst_case(self):
        p = params()
        a = ByzantineAssignment.worst_case(p)
        assert a.indexes == {1, 2, 3}
        assert a.highest == 3
        assert a.type_of(3) is PlayerType.BYZANTINE and a.type_of(4) is PlayerType.RATIONAL

    def test_cardinality_and_range(self):
        p = params()
        with pytest.raises(RangeViolated):
            ByzantineAssignment.of(p, [1, 2])
        with pytest.raises(RangeViolated):
            ByzantineAssignment.of(p, [1, 1, 2])
        with pytest.raises(RangeViolated):
            ByzantineAssignment.of(p, [1, 2, 11])

    def test_empty(self):
        assert ByzantineAssignment(4, frozenset()).highest == 0


class TestActions:
    def test_six_behaviors(self):
        assert len(BEHAVIORS) == 6
        assert len(set(BEHAVIORS)) == 6
        assert sum(b.check for b in BEHAVIORS) == 4

    @pytest.mark.parametrize("rule", [SendRule.IF_VALID, SendRule.IF_INVALID])
    def test_conditional_send_requires_check(self, rule):
        with pytest.raises(StrategyDomainError):
            RoundAction(False, rule)

    def test_send_rule_table(self):
        got = {(b.check, b.send): (b.sends(True), b.sends(False)) for b in BEHAVIORS}
        assert got[(True, SendRule.IF_VALID)] == (True, False)
        assert got[(True, SendRule.IF_INVALID)] == (False, True)
        assert got[(False, SendRule.ALWAYS)] == (True, True)
        assert got[(True, SendRule.NEVER)] == (False, False)

    @pytest.mark.parametrize("text", ["check:if-valid", "nocheck:never", "invalid/check:always", "valid/nocheck:always"])
    def test_label_roundtrip(self, text):
        assert RoundAction.parse(text).label == text

    @pytest.mark.parametrize("text", ["check", "maybe:always", "nocheck:if-valid", "bogus/check:never"])
    def test_parse_errors(self, text):
        with pytest.raises(StrategyDomainError):
            RoundAction.parse(text)


class TestInfoSets:
    def test_update_records_history(self):
        h = InfoSet.initial(PlayerType.RATIONAL, 4)
        h2 = update_info_set(h, RoundOutcome(3, False, True, False))
        assert (h2.round, h2.validity, h2.messages, h2.accepted) == (2, (False,), (3,), (False,))
        h3 = update_info_set(h2, RoundOutcome(1, False, False, True))
        assert h3.validity == (False, None)

    def test_no_update_after_acceptance(self):
        with pytest.raises(ValueError):
            update_info_set(InfoSet.initial(PlayerType.RATIONAL), RoundOutcome(5, True, False))

    def test_proposer_round(self):
        assert InfoSet(3, PlayerType.RATIONAL, 3).is_proposer_round
        assert not InfoSet(2, PlayerType.RATIONAL, 3).is_proposer_round


class TestProfiles:
    def test_bad_strategy_output(self):
        prof = StrategyProfile(2, (lambda h: "send", lambda h: RoundAction(False, SendRule.NEVER)))
        with pytest.raises(StrategyDomainError):
            prof.action(1, InfoSet.initial(PlayerType.RATIONAL, 1))

    def test_table_reuses_last_row(self):
        a, b = RoundAction(False, SendRule.NEVER), RoundAction(True, SendRule.IF_VALID)
        prof = StrategyProfile.from_table(2, [(a, b)])
        assert prof.action(2, InfoSet(2, PlayerType.RATIONAL, 2)) == b
        assert prof.table_action(5, 1) == a

    def test_table_width(self):
        with pytest.raises(ValueError):
            StrategyProfile.from_table(3, [(RoundAction(False, SendRule.NEVER),)])
