import math
from fractions import Fraction as F

import pytest

from bftgame import analytics as an
from bftgame.core import DomainError, GameParams, PreconditionViolated
from oracle import brute_prob_iB_below


def P(n, f, nu, R=10, cc=2, cs=1, kappa=20):
    return GameParams(n, f, nu, R, cc, cs, kappa)


class TestRecurrences:
    def test_phi_values(self):
        assert an.phi(10, 3, 3) == 1
        assert an.phi(10, 3, 2) == F(11, 9)
        assert an.phi(10, 3, 1) == F(41, 30)

    def test_psi_values(self):
        assert an.psi(10, 3, 4) == 1
        assert an.psi(10, 3, 3) == F(9, 8)

    @pytest.mark.parametrize("n", range(2, 13))
    def test_property_p_identity(self, n):
        for f in range(1, n):
            for t in range(1, f):
                assert an.phi(n, f, t) - 1 == F(f - t + 1, n - t + 1) * an.phi(n, f, t + 1)
            for t in range(1, f + 1):
                assert an.psi(n, f, t) - 1 == F(f - t + 1, n - t + 1) * an.psi(n, f, t + 1)
            assert all(an.phi(n, f, t) >= 1 for t in range(1, f + 1))

    def test_property_p_boundary_value(self):
        assert an.property_p(10, 3, 3, 3, 5) == 5
        assert an.property_p(10, 3, 2, 3, 5) == 1 + F(2, 9) * 5

    @pytest.mark.parametrize("call", [
        lambda: an.phi(10, 3, 0), lambda: an.phi(10, 3, 4), lambda: an.psi(10, 3, 5),
        lambda: an.hazard(10, 3, 5), lambda: an.property_p(10, 3, 3, 2),
    ])
    def test_domains(self, call):
        with pytest.raises(DomainError):
            call()


class TestPayoffs:
    def test_pi_values(self):
        p = P(10, 3, 5)
        assert an.pi_check(p, 3) == 7
        assert an.pi_check(p, 2) == F(59, 9)
        assert an.pi_send(p, 4) == 9

    def test_checker_continuation_at_f_plus_1(self):
        p = P(10, 3, 5)
        assert an.checker_continuation(p, 4) == 9
        assert an.checker_continuation(p, 2) == an.pi_check(p, 2)

    def test_reward_threshold(self):
        assert an.reward_threshold(P(10, 3, 5)) == F(27, 7)
        assert an.reward_threshold(P(10, 0, 1)) == 3  # c_send + c_check

    def test_hazard(self):
        assert an.hazard(10, 3, 1) == F(3, 10)
        assert an.hazard(10, 3, 4) == 0


class TestIndexProbability:
    def test_examples(self):
        assert an.prob_iB_below(6, 2, 3, 1) == 1
        assert an.prob_iB_below(6, 2, 4, 1) == F(2, 3)
        assert an.prob_iB_below(6, 2, 4, 2) == F(4, 5)

    @pytest.mark.parametrize("n", range(2, 10))
    def test_against_enumeration(self, n):
        for f in range(1, n):
            for nu in range(1, n + 1):
                for t in range(1, f + 1):
                    q = an.prob_iB_below(n, f, nu, t)
                    assert 0 <= q <= 1
                    assert q == brute_prob_iB_below(n, f, nu, t)

    def test_domain(self):
        with pytest.raises(DomainError):
            an.prob_iB_below(6, 2, 4, 3)


class TestKappaBounds:
    def test_small_example(self):
        p = P(6, 2, 4)
        assert an.beta(p, 1) == F(1, 2)
        assert an.alpha(p, 1) == F(11, 2)
        assert an.kappa_threshold(p) == F(11, 2) * 2 - F(1, 2)

    def test_round_two_by_hand(self):
        p = P(10, 3, 5)
        assert an.alpha(p, 2) == F(95, 14)
        assert an.beta(p, 2) == F(2, 7)
        assert an.kappa_bounds(p)[2] == F(93, 7)

    def test_beta_zero_when_certain(self):
        p = P(8, 2, 3)  # n - nu + f + 1 = 8 covers every seat
        assert an.beta(p, 1) == 0

    def test_vacuous_for_single_byzantine(self):
        assert an.kappa_threshold(P(10, 1, 4)) == -math.inf

    def test_alpha_nonnegative(self):
        for n in range(4, 11):
            for f in range(2, n):
                for nu in range(f + 1, n - f):
                    p = P(n, f, nu)
                    assert all(an.alpha(p, t) >= 0 for t in range(1, f))

    def test_monotone_in_check_cost(self):
        lo = an.kappa_threshold(P(10, 3, 5, cc=2))
        hi = an.kappa_threshold(P(10, 3, 5, cc=3))
        assert hi > lo

    def test_round_range(self):
        with pytest.raises(DomainError):
            an.alpha(P(10, 3, 5), 3)

    def test_requires_f_below_nu(self):
        with pytest.raises(PreconditionViolated):
            an.kappa_threshold(P(10, 4, 4))


class TestProbInvalid:
    def test_cases(self):
        assert an.prob_invalid(10, 3, 1) == F(3, 10)
        assert an.prob_invalid(10, 3, 4, byzantine_before=3) == 0
        assert an.prob_invalid(10, 3, 3, byzantine_before=1) == F(2, 8)
        assert an.prob_invalid(10, 3, 2, exclude=2) == 0
        assert an.prob_invalid(10, 3, 2, exclude=5) == F(3, 9)
        assert an.prob_invalid(10, 3, 3, byzantine_before=0, exclude=7) == F(3, 7)


class TestClassification:
    def test_invalid_acceptance(self):
        c = an.classify_regime(P(10, 4, 4))
        assert c.regimes == (an.Regime.INVALID_ACCEPTANCE,)
        assert an.PREDICTED[c.regime] == (True, False)

    def test_both_f_below_nu_regimes(self):
        c = an.classify_regime(P(10, 2, 4, kappa=1000))
        assert set(c.regimes) == {an.Regime.COORDINATION_FAILURE, an.Regime.VALIDITY_AND_TERMINATION}
        assert c.kappa_margin == 1000 - F(57, 4)
        assert c.reward_margin == 10 - F(7, 2)

    def test_kappa_too_small(self):
        c = an.classify_regime(P(10, 2, 4, kappa=12))
        assert c.regimes == (an.Regime.COORDINATION_FAILURE,)
        assert ("kappa > kappa threshold", False) in c.conditions

    def test_no_byzantine(self):
        c = an.classify_regime(P(10, 0, 1))
        assert c.regimes == (an.Regime.NO_BYZANTINE,)

    def test_unclassified(self):
        assert an.classify_regime(P(10, 3, 8)).regime is an.Regime.UNCLASSIFIED

    def test_near_miss_with_relaxed_kappa(self):
        p = GameParams.relaxed_kappa(n=10, f=2, nu=4, reward=10, cost_check=2, cost_send=1, kappa=5)
        c = an.classify_regime(p)
        assert c.kappa_margin == 5 - F(57, 4)
        assert an.Regime.VALIDITY_AND_TERMINATION not in c.regimes

    def test_pure_function(self):
        assert an.classify_regime(P(9, 2, 4)) == an.classify_regime(P(9, 2, 4))
