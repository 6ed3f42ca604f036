import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bftgame import analytics as an
from bftgame import kernel
from bftgame.core import (
    BEHAVIORS,
    EnumerationTooLarge,
    GameParams,
    InfeasibleConditioning,
    RoundAction,
    SendRule,
    StrategyProfile,
)
from bftgame.protocol import Deviation, profile_prop1, profile_prop2, profile_prop4
from bftgame.verifier import (
    _mc_record,
    exact_kappa_interval,
    expected_utility_exact,
    expected_utility_mc,
    sample_masks,
    subset_masks,
    verify_equilibrium,
)
import oracle

RULE = {SendRule.NEVER: "never", SendRule.ALWAYS: "always", SendRule.IF_VALID: "valid", SendRule.IF_INVALID: "invalid"}


def cell_of(a: RoundAction):
    return (a.check, RULE[a.send], a.propose_valid)


def P(n, f, nu, kappa=20, R=10, cc=2, cs=1):
    return GameParams(n, f, nu, R, cc, cs, kappa)


def oracle_utility(p, cell, player, dev=None, **kw):
    d = (dev.round, cell_of(dev.action)) if dev is not None else None
    return oracle.expected(p.n, p.f, p.nu, p.reward, p.cost_check, p.cost_send, p.kappa, cell, player, d, **kw)


CANONICAL = [
    (P(6, 3, 2), profile_prop1, oracle.cell_prop1),
    (P(7, 2, 3), profile_prop2, oracle.cell_prop2),
    (P(7, 2, 4), profile_prop2, oracle.cell_prop2),
    (P(7, 2, 4), profile_prop4, oracle.cell_prop4(7, 2, 4)),
    (P(8, 2, 3), profile_prop4, oracle.cell_prop4(8, 2, 3)),
]


class TestAgainstOracle:
    @pytest.mark.parametrize("p, make, cell", CANONICAL)
    @pytest.mark.parametrize("prior", ["uniform", "own-type"])
    def test_canonical_profiles(self, p, make, cell, prior):
        prof = make(p)
        for player in (1, 2, p.n):
            for t in range(1, p.f + 2):
                try:
                    want = oracle_utility(p, cell, player, at_round=t, prior=prior)
                except ValueError:
                    with pytest.raises(InfeasibleConditioning):
                        expected_utility_exact(p, prof, player, at_round=t, prior=prior)
                    continue
                assert expected_utility_exact(p, prof, player, at_round=t, prior=prior) == want
                for b in BEHAVIORS:
                    dev = Deviation(player, t, b)
                    got = expected_utility_exact(p, prof, player, dev, at_round=t, prior=prior)
                    assert got == oracle_utility(p, cell, player, dev, at_round=t, prior=prior)

    @pytest.mark.parametrize("p, make, cell", CANONICAL[::2])
    def test_verifier_records(self, p, make, cell):
        rep = verify_equilibrium(p, make(p), players=[1, 3], rounds=[1, 2, 3])
        assert rep.records
        for r in rep.records:
            kw = dict(at_round=r.round, proposer_knows_seat=True)
            assert r.eq_utility == oracle_utility(p, cell, r.player, **kw)
            if r.deviation != "flip-proposal":
                dev = Deviation(r.player, r.round, RoundAction.parse(r.deviation))
                assert r.dev_utility == oracle_utility(p, cell, r.player, dev, **kw)

    def test_known_prefix(self):
        p = P(7, 2, 4)
        prof = profile_prop4(p)
        cell = oracle.cell_prop4(7, 2, 4)
        for prefix in ([True], [False], [None, True]):
            t = len(prefix) + 1
            try:
                want = oracle_utility(p, cell, 5, at_round=t, prefix=prefix)
            except ValueError:
                with pytest.raises(InfeasibleConditioning):
                    expected_utility_exact(p, prof, 5, at_round=t, prefix=prefix)
                continue
            assert expected_utility_exact(p, prof, 5, at_round=t, prefix=prefix) == want

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_random_tables(self, data):
        n = data.draw(st.integers(2, 6))
        f = data.draw(st.integers(0, n - 1))
        p = P(n, f, data.draw(st.integers(1, n)))
        rows = [tuple(kernel.decode(data.draw(st.sampled_from(kernel.VALID_CODES))) for _ in range(n))
                for _ in range(n)]
        prof = StrategyProfile.from_table(n, rows)
        player = data.draw(st.integers(1, n))
        dev = Deviation(player, data.draw(st.integers(1, n)), data.draw(st.sampled_from(BEHAVIORS)))
        cell = lambda t, i: cell_of(rows[t - 1][i - 1])  # noqa: E731
        want = oracle_utility(p, cell, player, Deviation(dev.player, dev.round, dev.resolve(rows[dev.round - 1][player - 1])))
        assert expected_utility_exact(p, prof, player, dev) == want
        assert expected_utility_exact(p, prof, player, dev, backend="engine") == want


class TestExamples:
    def test_prop1_utilities(self):
        p = P(10, 4, 4)
        prof = profile_prop1(p)
        assert expected_utility_exact(p, prof, 3) == p.reward - p.cost_send - F(4, 10) * p.kappa
        assert expected_utility_exact(p, prof, 3, Deviation(3, 1, RoundAction(False, SendRule.NEVER))) == -F(4, 10) * p.kappa

    def test_own_type_prior(self):
        p = P(10, 4, 4)
        assert expected_utility_exact(p, profile_prop1(p), 2, prior="own-type") == 9 - F(4, 9) * 20

    def test_prop2_zero(self):
        p = P(10, 2, 4)
        assert expected_utility_exact(p, profile_prop2(p), 6) == 0

    def test_prop1_equilibrium(self):
        p = P(10, 4, 4)
        rep = verify_equilibrium(p, profile_prop1(p))
        assert rep.all_dominated and rep.exit_code == 0

    def test_prop2_deviations_nonpositive(self):
        p = P(10, 2, 4)
        rep = verify_equilibrium(p, profile_prop2(p))
        assert rep.exit_code == 0
        assert all(r.dev_utility <= 0 for r in rep.records if r.deviation != "flip-proposal")

    def test_prop4_below_threshold(self):
        p = P(10, 2, 4, kappa=12)
        assert p.kappa < an.kappa_threshold(p)
        rep = verify_equilibrium(p, profile_prop4(p))
        assert rep.exit_code == 4
        assert any(r.round < p.f and r.deviation == "nocheck:always" for r in rep.profitable)


class TestProofExpressions:
    @pytest.mark.parametrize("p, make", [(P(8, 3, 2), profile_prop1), (P(8, 2, 3), profile_prop2),
                                         (P(8, 2, 4), profile_prop2), (P(9, 3, 5), profile_prop4)])
    def test_expressions_attached(self, p, make):
        rep = verify_equilibrium(p, make(p), information="proposers")
        assert any(r.expression for r in rep.records)

    @pytest.mark.parametrize("p, make", [(P(8, 3, 2), profile_prop1), (P(8, 2, 3), profile_prop2),
                                         (P(8, 2, 4), profile_prop2)])
    def test_exact_match(self, p, make):
        for info in ("reached", "proposers"):
            rep = verify_equilibrium(p, make(p), information=info)
            for r in rep.records:
                if r.expression:
                    assert r.expression_diff == 0 and r.eq_expression_diff == 0, r

    def test_prop2_pivot_discontinuity(self):
        pivot, no_pivot = P(8, 2, 3), P(8, 2, 4)
        for p, expect in ((pivot, -1 + F(2, 8) * (10 - 20)), (no_pivot, F(-1))):
            dev = Deviation(5, 1, RoundAction(False, SendRule.ALWAYS))
            assert expected_utility_exact(p, profile_prop2(p), 5, dev) == expect

    def test_prop4_secondary_deviations_exact(self):
        p = P(9, 3, 5)
        rep = verify_equilibrium(p, profile_prop4(p))
        main_family = ("main", "-c_check+h[q")
        for r in rep.records:
            if r.expression and not r.expression.startswith(main_family):
                assert r.expression_diff == 0, r
            if r.eq_expression_value is not None:
                assert r.eq_expression_diff == 0

    @pytest.mark.parametrize("n, f", [(7, 2), (9, 3), (10, 2)])
    def test_prop4_main_exact_when_pivot_certain(self, n, f):
        # nu = f + 1 leaves no free senders, so the deviator is pivotal whenever the block is invalid
        p = P(n, f, f + 1)
        rep = verify_equilibrium(p, profile_prop4(p))
        assert all(r.expression_diff == 0 for r in rep.records if r.expression)

    def test_prop4_main_closed_form_is_approximate(self):
        p = P(10, 3, 5)
        rep = verify_equilibrium(p, profile_prop4(p))
        diffs = [r.expression_diff for r in rep.records if r.expression and r.expression.startswith("main:")]
        assert diffs and any(d != 0 for d in diffs)


class TestKappaInterval:
    def test_round_f_binds(self):
        p = P(10, 2, 4)
        iv = exact_kappa_interval(p, profile_prop4)
        assert iv.lower == (p.n - p.f + 1) * p.cost_check == 18
        assert iv.binding[1] == p.f and iv.binding[2] == "nocheck:always"
        assert iv.upper is None and not iv.empty
        assert iv.contains(18) and not iv.contains(17)

    def test_agrees_with_verdicts(self):
        p = P(9, 2, 4)
        iv = exact_kappa_interval(p, profile_prop4)
        for k in (iv.lower - F(1, 7), iv.lower, iv.lower + 1):
            q = p.with_(kappa=k)
            assert (verify_equilibrium(q, profile_prop4(q)).exit_code == 0) == iv.contains(k)


class TestDeviationSet:
    def test_proposer_keeps_prescribed_check(self):
        p = P(9, 3, 5)
        rep = verify_equilibrium(p, profile_prop4(p), players=[2], rounds=[2])
        labels = {r.deviation for r in rep.records}
        assert "flip-proposal" in labels
        assert not any(l.startswith("nocheck") for l in labels)

    def test_unchecking_proposer_keeps_all_behaviors(self):
        p = P(8, 2, 4)
        rep = verify_equilibrium(p, profile_prop2(p), players=[3], rounds=[3])
        assert len({r.deviation for r in rep.records}) == 6  # five behaviors plus the flip


class TestGuards:
    def test_enumeration_bound(self):
        p = P(13, 3, 5)
        with pytest.raises(EnumerationTooLarge):
            expected_utility_exact(p, profile_prop4(p), 4)
        with pytest.raises(EnumerationTooLarge):
            verify_equilibrium(p, profile_prop4(p))

    def test_infeasible(self):
        p = P(8, 2, 4)
        with pytest.raises(InfeasibleConditioning):
            expected_utility_exact(p, profile_prop4(p), 5, at_round=4)

    def test_deviation_before_conditioning(self):
        p = P(8, 2, 4)
        with pytest.raises(ValueError):
            expected_utility_exact(p, profile_prop4(p), 5, Deviation(5, 1, BEHAVIORS[0]), at_round=2)

    def test_bad_arguments(self):
        p = P(8, 2, 4)
        with pytest.raises(ValueError):
            verify_equilibrium(p, profile_prop4(p), mode="fast")
        with pytest.raises(ValueError):
            expected_utility_exact(p, profile_prop4(p), 3, prior="jeffreys")

    def test_subset_masks(self):
        m = subset_masks(6, 2)
        assert m.shape == (15, 6) and (m.sum(axis=1) == 2).all()
        assert subset_masks(6, 2, exclude=3)[:, 2].sum() == 0


class TestMonteCarlo:
    def test_reproducible(self):
        p = P(8, 2, 4)
        a = expected_utility_mc(p, profile_prop4(p), 3, trials=5000, seed=11)
        b = expected_utility_mc(p, profile_prop4(p), 3, trials=5000, seed=11)
        c = expected_utility_mc(p, profile_prop4(p), 3, trials=5000, seed=12)
        assert a == b and a != c

    def test_stderr_shrinks(self):
        p = P(8, 2, 4)
        _, s1 = expected_utility_mc(p, profile_prop4(p), 3, trials=10_000, seed=5)
        _, s4 = expected_utility_mc(p, profile_prop4(p), 3, trials=40_000, seed=5)
        assert 0.4 < s4 / s1 < 0.6

    def test_sampler_uniform_marginals(self):
        p = P(8, 2, 4)
        m = sample_masks(p, 0, "uniform", 40_000, 3)
        assert (m.sum(axis=1) == 2).all()
        freq = m.mean(axis=0)
        assert np.allclose(freq, 2 / 8, atol=0.01)
        assert sample_masks(p, 4, "own-type", 1000, 3)[:, 3].sum() == 0

    def test_within_three_sigma(self):
        p = P(9, 3, 5)
        prof = profile_prop4(p)
        dev = Deviation(4, 1, RoundAction(False, SendRule.ALWAYS))
        mean, se = expected_utility_mc(p, prof, 4, dev, trials=20_000, seed=2)
        assert abs(mean - float(expected_utility_exact(p, prof, 4, dev))) <= 3 * se

    def test_verdicts(self):
        rng = np.random.default_rng(0)
        noise = rng.normal(size=400)
        assert _mc_record(1, 1, "g", "d", noise + 1, noise).verdict == "dominated"
        assert _mc_record(1, 1, "g", "d", noise, noise + 1).verdict == "profitable"
        assert _mc_record(1, 1, "g", "d", noise, rng.normal(size=400)).verdict == "inconclusive"

    def test_mc_report(self):
        p = P(8, 2, 4, kappa=40)
        rep = verify_equilibrium(p, profile_prop4(p), "mc", trials=4000, seed=1)
        assert rep.exit_code in (0, 5)
        assert not rep.profitable
        assert all(r.diff_stderr is not None for r in rep.records)
        assert math.isfinite(rep.records[0].eq_stderr)
