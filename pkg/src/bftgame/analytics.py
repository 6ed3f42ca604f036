"""Closed-form payoffs and thresholds, in exact rational arithmetic.

Expected check/send counts (phi, psi) follow the backward recurrence

    g(t) = 1 + (f - t + 1) / (n - t + 1) * g(t + 1)

and feed the continuation payoffs of checkers and free senders in the
validity-and-termination profile. Byzantine seats are a uniformly random
f-subset of the committee.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

from .core import DivisionByZero, DomainError, GameParams, PreconditionViolated

NEG_INF = -math.inf
Threshold = Union[Fraction, float]


def hazard(n: int, f: int, t: int) -> Fraction:
    """Probability that seat t is Byzantine given seats 1..t-1 all are."""
    if not 1 <= t <= f + 1 or t > n:
        raise DomainError(f"hazard needs 1 <= t <= f+1, got t={t}, f={f}")
    return Fraction(f - t + 1, n - t + 1)


def property_p(n: int, f: int, t: int, boundary_round: int, boundary_value=1) -> Fraction:
    """Evaluate the property-P recurrence from ``boundary_round`` down to ``t``."""
    if not (1 <= t <= boundary_round <= f + 1) or boundary_round > n:
        raise DomainError(f"need 1 <= t <= boundary <= f+1 <= n+1, got t={t}, boundary={boundary_round}, f={f}")
    g = Fraction(boundary_value)
    for s in range(boundary_round - 1, t - 1, -1):
        g = 1 + Fraction(f - s + 1, n - s + 1) * g
    return g


def phi(n: int, f: int, t: int) -> Fraction:
    """Expected number of checks from round t on, for a checker; phi(f) = 1."""
    if not 1 <= t <= f:
        raise DomainError(f"phi is defined for 1 <= t <= f, got t={t}, f={f}")
    return property_p(n, f, t, f, 1)


def psi(n: int, f: int, t: int) -> Fraction:
    """Expected number of votes from round t on, for a free sender; psi(f+1) = 1."""
    if not 1 <= t <= f + 1:
        raise DomainError(f"psi is defined for 1 <= t <= f+1, got t={t}, f={f}")
    return property_p(n, f, t, f + 1, 1)


def pi_check(p: GameParams, t: int) -> Fraction:
    return p.reward - p.cost_send - phi(p.n, p.f, t) * p.cost_check


def pi_send(p: GameParams, t: int) -> Fraction:
    return p.reward - psi(p.n, p.f, t) * p.cost_send


def checker_continuation(p: GameParams, t: int) -> Fraction:
    """pi_check extended to round f + 1, where nobody checks any more."""
    if t == p.f + 1:
        return p.reward - p.cost_send
    return pi_check(p, t)


def prob_iB_below(n: int, f: int, nu: int, t: int) -> Fraction:
    """Pr(highest Byzantine index < n - nu + f + 2 | seats 1..t-1 Byzantine).

    The remaining f - t + 1 Byzantines are a uniform subset of seats t..n.
    """
    if not 1 <= t <= f or f >= n or not 1 <= nu <= n:
        raise DomainError(f"need 1 <= t <= f < n and 1 <= nu <= n, got n={n}, f={f}, nu={nu}, t={t}")
    m = n - nu + f + 1
    if m >= n:
        return Fraction(1)
    k = f - t + 1
    return Fraction(math.comb(m - t + 1, k), math.comb(n - t + 1, k))


def _prop4_pre(p: GameParams) -> None:
    # the pivot argument needs f < nu; n - f > nu is checked by classify_regime
    if not p.f < p.nu:
        raise PreconditionViolated(f"requires f < nu, got f={p.f}, nu={p.nu}")


def _q(p: GameParams, t: int) -> Fraction:
    _prop4_pre(p)
    if not 1 <= t < p.f:
        raise DomainError(f"alpha/beta are defined for 1 <= t < f, got t={t}, f={p.f}")
    q = prob_iB_below(p.n, p.f, p.nu, t)
    if q == 0:
        raise DivisionByZero(f"Pr(i_B < n - nu + f + 2) is zero at t={t}")
    return q


def alpha(p: GameParams, t: int) -> Fraction:
    q = _q(p, t)
    n, f = p.n, p.f
    num = (n - t + 1) * phi(n, f, t) - (f - t + 1) * (1 - q) * phi(n, f, t + 1)
    return num / ((f - t + 1) * q)


def beta(p: GameParams, t: int) -> Fraction:
    q = _q(p, t)
    return (1 - q) / q


def kappa_bounds(p: GameParams) -> Dict[int, Fraction]:
    """Per-round lower bounds on kappa, alpha(t) c_check - beta(t) c_send for t < f."""
    _prop4_pre(p)
    return {t: alpha(p, t) * p.cost_check - beta(p, t) * p.cost_send for t in range(1, p.f)}


def kappa_threshold(p: GameParams) -> Threshold:
    """Largest per-round bound; ``-inf`` when f = 1 and the condition is vacuous."""
    bounds = kappa_bounds(p)
    return max(bounds.values()) if bounds else NEG_INF


def reward_threshold(p: GameParams) -> Fraction:
    if p.n <= p.f:
        raise PreconditionViolated("requires n > f")
    ratio = Fraction(p.n, p.n - p.f)
    return max(ratio * p.cost_send, p.cost_send + ratio * p.cost_check)


def prob_invalid(n: int, f: int, t: int, byzantine_before: Optional[int] = None,
                 exclude: Optional[int] = None) -> Fraction:
    """Probability that the round-t proposer is Byzantine.

    ``byzantine_before`` is the number of Byzantine seats among 1..t-1 when
    those seats are known (``None``: nothing known). ``exclude`` is a seat
    known to be rational (the evaluating player, under the own-type prior).
    """
    if not 1 <= t <= n:
        raise DomainError(f"round {t} outside 1..{n}")
    if exclude == t:
        return Fraction(0)
    if byzantine_before is None:
        pool = n - (1 if exclude is not None else 0)
        return Fraction(f, pool)
    left = f - byzantine_before
    pool = n - t + 1 - (1 if exclude is not None and exclude > t else 0)
    if left < 0 or pool <= 0:
        raise DomainError("inconsistent known prefix")
    return Fraction(left, pool)


class Regime(enum.Enum):
    INVALID_ACCEPTANCE = "invalid-acceptance"
    COORDINATION_FAILURE = "coordination-failure"
    VALIDITY_AND_TERMINATION = "validity-and-termination"
    NO_BYZANTINE = "no-byzantine"
    UNCLASSIFIED = "unclassified"


PREDICTED = {
    # regime -> (termination, validity) in that regime's equilibrium
    Regime.INVALID_ACCEPTANCE: (True, False),
    Regime.COORDINATION_FAILURE: (False, True),
    Regime.VALIDITY_AND_TERMINATION: (True, True),
    Regime.NO_BYZANTINE: (True, True),
    Regime.UNCLASSIFIED: (None, None),
}


@dataclass(frozen=True)
class RegimeClassification:
    regimes: Tuple[Regime, ...]
    conditions: Tuple[Tuple[str, bool], ...]
    kappa_threshold: Optional[Threshold]
    reward_threshold: Optional[Fraction]
    kappa_margin: Optional[Threshold]
    reward_margin: Optional[Fraction]

    @property
    def regime(self) -> Regime:
        return self.regimes[0]

    def predicted(self, regime: Regime) -> Tuple[Optional[bool], Optional[bool]]:
        return PREDICTED[regime]


def classify_regime(p: GameParams) -> RegimeClassification:
    n, f, nu = p.n, p.f, p.nu
    conds = []

    def cond(name, value):
        conds.append((name, bool(value)))
        return bool(value)

    regimes = []
    if f == 0 and nu == 1:
        # unique equilibrium without Byzantines; the other results assume f >= 1
        cond("f = 0 and nu = 1", True)
        return RegimeClassification((Regime.NO_BYZANTINE,), tuple(conds), None, None, None, None)
    if cond("n - f >= nu + 1", n - f >= nu + 1) & cond("f >= nu", f >= nu):
        regimes.append(Regime.INVALID_ACCEPTANCE)
    if cond("f < nu", f < nu) & cond("n - f >= nu", n - f >= nu) & cond("nu >= 2", nu >= 2):
        regimes.append(Regime.COORDINATION_FAILURE)

    k_thr = r_thr = k_margin = r_margin = None
    if cond("n - f > nu", n - f > nu) and f < nu:
        k_thr = kappa_threshold(p)
        r_thr = reward_threshold(p)
        k_margin = p.kappa - k_thr
        r_margin = p.reward - r_thr
        k_ok = cond("kappa > kappa threshold", p.kappa > k_thr)
        r_ok = cond("R >= reward threshold", p.reward >= r_thr)
        if k_ok and r_ok:
            regimes.append(Regime.VALIDITY_AND_TERMINATION)
    if not regimes:
        regimes.append(Regime.UNCLASSIFIED)
    return RegimeClassification(tuple(regimes), tuple(conds), k_thr, r_thr, k_margin, r_margin)
