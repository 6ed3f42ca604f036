"""Equilibrium verification by exhaustive one-shot deviations.

Expected utilities are averages over Byzantine seat assignments drawn from a
uniform prior. Two priors are offered for the evaluated player ``i``:

``uniform``
    All C(n, f) subsets, including those that contain ``i``. In those, seat
    ``i`` is held by a Byzantine proxy (it proposes and votes as a Byzantine)
    while ``i`` itself still votes as an extra rational voter. This is the
    belief model under which the hazard (f - t + 1) / (n - t + 1) of a
    Byzantine proposer at round t holds for every player, including the
    evaluated one.
``own-type``
    Only subsets that exclude ``i``: the player conditions on its own type.

Conditioning at round t is on reaching round t (no earlier acceptance),
optionally refined by which earlier proposers were Byzantine.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import analytics as an
from . import kernel
from .core import (
    BEHAVIORS,
    ByzantineAssignment,
    EnumerationTooLarge,
    GameParams,
    InfeasibleConditioning,
    RoundAction,
    SendRule,
    StrategyProfile,
)
from .protocol import Deviation, run_height

PRIORS = ("uniform", "own-type")
INFORMATION = ("reached", "proposers")
DEFAULT_MAX_N = 12
CHUNK = 8192

# columns of the simulator output
T, ACC, VALID, CHECKS, SENDS, REWARDED = range(6)


@lru_cache(maxsize=128)
def subset_masks(n: int, f: int, exclude: int = 0) -> np.ndarray:
    """Every f-subset of seats 1..n (skipping ``exclude``) as a 0/1 row."""
    seats = [s for s in range(n) if s != exclude - 1]
    rows = list(itertools.combinations(seats, f))
    out = np.zeros((len(rows), n), dtype=np.uint8)
    for r, combo in enumerate(rows):
        out[r, list(combo)] = 1
    out.setflags(write=False)
    return out


def _check_prior(prior: str) -> None:
    if prior not in PRIORS:
        raise ValueError(f"prior must be one of {PRIORS}, got {prior!r}")


class _TableSim:
    """Batch simulation through the (compiled or pure) table kernel."""

    def __init__(self, p: GameParams, profile: StrategyProfile, backend=None):
        self.p = p
        self.profile = profile
        self.table = kernel.encode_table(profile)
        self.backend = backend

    def prescribed(self, t: int, i: int) -> RoundAction:
        return self.profile.table_action(t, i)

    def run(self, masks, player, start_round=1, deviation: Optional[Deviation] = None, shadow=True):
        dev_round = dev_code = 0
        if deviation is not None:
            dev_round = deviation.round
            dev_code = kernel.encode(deviation.resolve(self.prescribed(deviation.round, player)))
        return kernel.simulate_batch(masks, self.table, self.p.nu, player - 1, start_round,
                                     dev_round, dev_code, shadow, backend=self.backend)


class _EngineSim:
    """Row-by-row simulation through the general engine, for arbitrary strategies."""

    def __init__(self, p: GameParams, profile: StrategyProfile):
        self.p = p
        self.profile = profile

    def prescribed(self, t, i):
        return None

    def run(self, masks, player, start_round=1, deviation: Optional[Deviation] = None, shadow=True):
        n = self.p.n
        out = np.zeros((len(masks), 6), dtype=np.int64)
        for r, row in enumerate(np.asarray(masks)):
            a = ByzantineAssignment(n, frozenset(int(s) + 1 for s in np.flatnonzero(row)))
            sh = player if (player in a and shadow) else None
            if player in a and sh is None:
                continue
            trace, _ = run_height(self.p, a, self.profile, deviation=deviation, shadow=sh)
            acts = trace.player_actions(player)
            tail = acts[start_round - 1:]
            out[r] = (
                trace.termination_round,
                trace.accepted,
                bool(trace.accepted and trace.accepted_valid),
                sum(x.checked for x in tail),
                sum(x.sent for x in tail),
                bool(trace.accepted and acts[-1].sent),
            )
        return out


def simulator(p: GameParams, profile: StrategyProfile, backend=None):
    if profile.table is not None and backend != "engine":
        return _TableSim(p, profile, backend)
    return _EngineSim(p, profile)


def _components(out: np.ndarray) -> np.ndarray:
    """Per-row (rewarded, penalized, checks, sends) counts."""
    pen = out[:, ACC] * (1 - out[:, VALID])
    return np.stack([out[:, REWARDED], pen, out[:, CHECKS], out[:, SENDS]], axis=1)


def _exact_utility(p: GameParams, sums: Sequence[int], count: int) -> Fraction:
    rew, pen, chk, snd = (int(x) for x in sums)
    total = p.reward * rew - p.kappa * pen - p.cost_check * chk - p.cost_send * snd
    return total / count


def _float_utility(p: GameParams, comp: np.ndarray) -> np.ndarray:
    w = np.array([float(p.reward), -float(p.kappa), -float(p.cost_check), -float(p.cost_send)])
    return comp @ w


def _prior_masks(p: GameParams, player: int, prior: str, max_n: int) -> np.ndarray:
    _check_prior(prior)
    if p.n > max_n:
        raise EnumerationTooLarge(f"n={p.n} exceeds the exact-enumeration bound {max_n}; use Monte Carlo")
    return subset_masks(p.n, p.f, player if prior == "own-type" else 0)


def _reached(masks, out, t: int, prefix: Optional[Sequence[Optional[bool]]]) -> np.ndarray:
    keep = out[:, T] >= t
    if prefix is not None:
        if len(prefix) > t - 1:
            raise ValueError("prefix longer than the rounds before the conditioning round")
        for s, byz in enumerate(prefix):
            if byz is not None:
                keep &= masks[:, s] == (1 if byz else 0)
    return keep


def expected_utility_exact(
    p: GameParams,
    profile: StrategyProfile,
    player: int,
    deviation: Optional[Deviation] = None,
    *,
    at_round: int = 1,
    prefix: Optional[Sequence[Optional[bool]]] = None,
    prior: str = "uniform",
    max_n: int = DEFAULT_MAX_N,
    backend=None,
) -> Fraction:
    """Exact continuation utility of ``player`` from ``at_round`` on.

    Averages over every Byzantine assignment that reaches ``at_round`` (and
    matches ``prefix``: per earlier seat, True = Byzantine, False = rational,
    None = unknown). Costs are counted from ``at_round``; at round 1 this is
    the full expected utility.
    """
    if not 1 <= player <= p.n:
        raise ValueError(f"player {player} outside 1..{p.n}")
    if deviation is not None:
        if deviation.player != player:
            raise ValueError("deviation belongs to another player")
        if deviation.round < at_round:
            raise ValueError("a one-shot deviation cannot precede the conditioning round")
    masks = _prior_masks(p, player, prior, max_n)
    sim = simulator(p, profile, backend)
    out = sim.run(masks, player, at_round, deviation)
    keep = _reached(masks, out, at_round, prefix)
    count = int(keep.sum())
    if count == 0:
        raise InfeasibleConditioning(f"no assignment reaches round {at_round} with prefix {prefix}")
    return _exact_utility(p, _components(out[keep]).sum(axis=0), count)


def sample_masks(p: GameParams, player: int, prior: str, trials: int, seed) -> np.ndarray:
    """Uniform f-subsets, drawn chunk by chunk from independent child seeds."""
    _check_prior(prior)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pool = np.array([s for s in range(p.n) if not (prior == "own-type" and s == player - 1)])
    nchunks = -(-trials // CHUNK)
    children = np.random.SeedSequence(seed).spawn(nchunks)
    out = np.zeros((trials, p.n), dtype=np.uint8)
    for j, child in enumerate(children):
        lo, hi = j * CHUNK, min(trials, (j + 1) * CHUNK)
        rng = np.random.Generator(np.random.PCG64(child))
        keys = rng.random((hi - lo, len(pool)))
        picks = pool[np.argsort(keys, axis=1)[:, : p.f]]
        np.put_along_axis(out[lo:hi], picks, 1, axis=1)
    return out


def expected_utility_mc(
    p: GameParams,
    profile: StrategyProfile,
    player: int,
    deviation: Optional[Deviation] = None,
    trials: int = 100_000,
    seed: int = 0,
    *,
    prior: str = "uniform",
    backend=None,
) -> Tuple[float, float]:
    """Monte-Carlo estimate of the ex-ante utility of ``player``, with its standard error."""
    masks = sample_masks(p, player, prior, trials, seed)
    out = simulator(p, profile, backend).run(masks, player, 1, deviation)
    u = _float_utility(p, _components(out))
    se = float(u.std(ddof=1) / math.sqrt(len(u))) if len(u) > 1 else math.inf
    return float(u.mean()), se


# reports


@dataclass(frozen=True)
class DominanceRecord:
    player: int
    round: int
    group: str
    deviation: str
    rows: int
    eq_utility: object  # Fraction (exact) or float (mc)
    dev_utility: object
    verdict: str  # dominated | profitable | inconclusive
    eq_stderr: Optional[float] = None
    dev_stderr: Optional[float] = None
    diff_stderr: Optional[float] = None
    expression: Optional[str] = None
    expression_value: Optional[Fraction] = None
    eq_expression_value: Optional[Fraction] = None

    @property
    def dominated(self) -> bool:
        return self.verdict == "dominated"

    @property
    def expression_diff(self):
        if self.expression_value is None:
            return None
        return abs(self.dev_utility - self.expression_value)

    @property
    def eq_expression_diff(self):
        if self.eq_expression_value is None:
            return None
        return abs(self.eq_utility - self.eq_expression_value)


@dataclass(frozen=True)
class DominanceReport:
    params: GameParams
    profile: str
    mode: str
    prior: str
    information: str
    records: Tuple[DominanceRecord, ...] = field(default_factory=tuple)

    @property
    def profitable(self) -> Tuple[DominanceRecord, ...]:
        return tuple(r for r in self.records if r.verdict == "profitable")

    @property
    def inconclusive(self) -> Tuple[DominanceRecord, ...]:
        return tuple(r for r in self.records if r.verdict == "inconclusive")

    @property
    def all_dominated(self) -> bool:
        return all(r.dominated for r in self.records)

    @property
    def exit_code(self) -> int:
        if self.profitable:
            return 4
        if self.inconclusive:
            return 5
        return 0

    def find(self, player: int, round: int, deviation: str) -> Tuple[DominanceRecord, ...]:
        return tuple(r for r in self.records if r.player == player and r.round == round and r.deviation == deviation)


def deviations_at(sim, player: int, t: int) -> List[Deviation]:
    """Every one-shot deviation at (player, t): six behaviors plus a proposal flip.

    A proposer whose profile has it check its own block is held to that
    check: at its own round, alternatives that skip it are not enumerated.
    """
    prescribed = sim.prescribed(t, player)
    devs = []
    for b in BEHAVIORS:
        if prescribed is not None and b == prescribed.behavior():
            continue
        if t == player and prescribed is not None and prescribed.check and not b.check:
            continue
        devs.append(Deviation(player, t, b))
    if t == player:
        devs.append(Deviation(player, t, None, flip_proposal=True))
    return devs


def _group_keys(masks: np.ndarray, t: int, information: str):
    """Group labels and inverse index for rows reaching round t."""
    if information == "reached" or t == 1:
        return ["reached"], np.zeros(len(masks), dtype=np.int64), [None]
    prefix = masks[:, : t - 1]
    uniq, inv = np.unique(prefix, axis=0, return_inverse=True)
    labels = ["byz:" + "".join("B" if x else "r" for x in row) for row in uniq]
    known = [int(row.sum()) for row in uniq]
    return labels, inv.reshape(-1), known


def _group_sums(comp: np.ndarray, inv: np.ndarray, ngroups: int) -> np.ndarray:
    sums = np.zeros((ngroups, comp.shape[1]), dtype=np.int64)
    np.add.at(sums, inv, comp)
    return sums


def verify_equilibrium(
    p: GameParams,
    profile: StrategyProfile,
    mode: str = "exact",
    *,
    players: Optional[Iterable[int]] = None,
    rounds: Optional[Iterable[int]] = None,
    prior: str = "uniform",
    information: str = "reached",
    trials: int = 100_000,
    seed: int = 0,
    max_n: int = DEFAULT_MAX_N,
    backend=None,
) -> DominanceReport:
    """Compare every on-path one-shot deviation against the profile.

    For each player, each round reached with positive probability and each
    information group, the conditional continuation utility of the profile
    is compared with that of each deviation. Exact mode enumerates all
    assignments; ``mc`` samples ``trials`` assignments and uses paired
    differences with a 3-standard-error rule.
    """
    if mode not in ("exact", "mc"):
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if information not in INFORMATION:
        raise ValueError(f"information must be one of {INFORMATION}")
    _check_prior(prior)
    sim = simulator(p, profile, backend)
    players = list(players) if players is not None else list(range(1, p.n + 1))
    round_filter = set(rounds) if rounds is not None else None
    records = []
    for i in players:
        if mode == "exact":
            masks = _prior_masks(p, i, prior, max_n)
        else:
            masks = sample_masks(p, i, prior, trials, (seed, i))
        base_full = sim.run(masks, i, 1)
        for t in range(1, p.n + 1):
            if round_filter is not None and t not in round_filter:
                continue
            keep = base_full[:, T] >= t
            if t == i:
                # a player that proposes knows its own seat is not Byzantine
                keep &= masks[:, i - 1] == 0
            if not keep.any():
                continue
            m_t = np.ascontiguousarray(masks[keep])
            labels, inv, known = _group_keys(m_t, t, information)
            base = _components(sim.run(m_t, i, t))
            counts = np.bincount(inv, minlength=len(labels))
            base_sums = _group_sums(base, inv, len(labels))
            for dev in deviations_at(sim, i, t):
                comp = _components(sim.run(m_t, i, t, dev))
                if mode == "exact":
                    dev_sums = _group_sums(comp, inv, len(labels))
                    for g, label in enumerate(labels):
                        eq = _exact_utility(p, base_sums[g], counts[g])
                        du = _exact_utility(p, dev_sums[g], counts[g])
                        expr = proof_expression(p, profile.name, i, t, dev, prior, known[g])
                        records.append(
                            DominanceRecord(
                                player=i, round=t, group=label, deviation=dev.label, rows=int(counts[g]),
                                eq_utility=eq, dev_utility=du,
                                verdict="dominated" if eq >= du else "profitable",
                                expression=expr[0] if expr else None,
                                expression_value=expr[1] if expr else None,
                                eq_expression_value=expr[2] if expr else None,
                            )
                        )
                else:
                    ub = _float_utility(p, base)
                    ud = _float_utility(p, comp)
                    for g, label in enumerate(labels):
                        sel = inv == g
                        records.append(_mc_record(i, t, label, dev.label, ub[sel], ud[sel]))
    return DominanceReport(p, profile.name, mode, prior, information, tuple(records))


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.inf


def _mc_record(i, t, label, dev_label, ub, ud) -> DominanceRecord:
    diff = ub - ud
    d, se = float(diff.mean()), _se(diff)
    if d >= 3 * se:
        verdict = "dominated"
    elif -d >= 3 * se:
        verdict = "profitable"
    else:
        verdict = "inconclusive"
    return DominanceRecord(
        player=i, round=t, group=label, deviation=dev_label, rows=len(ub),
        eq_utility=float(ub.mean()), dev_utility=float(ud.mean()), verdict=verdict,
        eq_stderr=_se(ub), dev_stderr=_se(ud), diff_stderr=se,
    )


# closed-form deviation payoffs from the equilibrium arguments

_NC_NEVER = RoundAction(False, SendRule.NEVER)
_NC_ALWAYS = RoundAction(False, SendRule.ALWAYS)
_C_NEVER = RoundAction(True, SendRule.NEVER)
_C_ALWAYS = RoundAction(True, SendRule.ALWAYS)
_C_VALID = RoundAction(True, SendRule.IF_VALID)
_C_INVALID = RoundAction(True, SendRule.IF_INVALID)


def proof_expression(p: GameParams, profile_name: str, i: int, t: int, dev: Deviation,
                     prior: str, known_byzantine: Optional[int] = None):
    """Closed-form (name, deviation payoff, equilibrium payoff) for canonical profiles, or None."""
    if dev.flip_proposal or dev.action is None:
        return None
    own = i == t
    b = dev.action.behavior()
    n, f, nu = p.n, p.f, p.nu
    R, cc, cs, k = p.reward, p.cost_check, p.cost_send, p.kappa
    if profile_name == "prop1" and t == 1 and not own and n - f >= nu + 1 and f >= nu:
        h = Fraction(f, n)
        eq = R - cs - h * k
        table = {
            _NC_NEVER: ("-(f/n)kappa", -h * k),
            _C_VALID: ("-c_check+(1-f/n)(R-c_send)-(f/n)kappa", -cc + (1 - h) * (R - cs) - h * k),
            _C_INVALID: ("-c_check+(f/n)(R-c_send-kappa)", -cc + h * (R - cs - k)),
            _C_ALWAYS: ("R-c_send-(f/n)kappa-c_check", R - cs - h * k - cc),
            _C_NEVER: ("-c_check-(f/n)kappa", -cc - h * k),
        }
        if b in table:
            return table[b] + (eq,)
        return None
    if profile_name == "prop2" and f < nu and n - f >= nu and nu >= 2:
        P = an.prob_invalid(n, f, t, known_byzantine, i if (own or prior == "own-type") else None)
        piv = 1 if f == nu - 1 else 0
        table = {
            _NC_ALWAYS: ("-c_send+Pr(invalid)1[f=nu-1](R-kappa)", -cs + P * piv * (R - k)),
            _C_VALID: ("-c_check-Pr(valid)c_send", -cc - (1 - P) * cs),
            _C_INVALID: ("-c_check+Pr(invalid)(1[f=nu-1](R-kappa)-c_send)", -cc + P * (piv * (R - k) - cs)),
            _C_ALWAYS: ("-c_send-c_check+Pr(invalid)1[f=nu-1](R-kappa)", -cs - cc + P * piv * (R - k)),
            _C_NEVER: ("-c_check", -cc),
        }
        if b in table:
            return table[b] + (Fraction(0),)
        return None
    if profile_name == "prop4" and f < nu < n - f and not own:
        if known_byzantine is not None and known_byzantine != t - 1:
            return None
        if t == f + 1:
            eq = R - cs
            table = {
                _NC_NEVER: ("0", Fraction(0)),
                _C_VALID: ("R-c_send-c_check", R - cs - cc),
                _C_ALWAYS: ("R-c_send-c_check", R - cs - cc),
                _C_NEVER: ("-c_check", -cc),
                _C_INVALID: ("-c_check", -cc),
            }
            return table[b] + (eq,) if b in table else None
        if t > f:
            return None
        h = an.hazard(n, f, t)
        if i <= p.checker_bound:
            nxt = an.checker_continuation(p, t + 1)
            q = an.prob_iB_below(n, f, nu, t)
            main = (1 - h) * (R - cs) + h * q * (R - cs - k) + h * (1 - q) * (nxt - cs)
            table = {
                _NC_ALWAYS: ("main: (1-h)(R-c_send)+h q (R-c_send-kappa)+h(1-q)(pi_check(t+1)-c_send)", main),
                _C_ALWAYS: ("main-c_check", main - cc),
                _C_INVALID: ("-c_check+h[q(R-c_send-kappa)+(1-q)(pi_check(t+1)-c_send)]",
                             -cc + h * (q * (R - cs - k) + (1 - q) * (nxt - cs))),
                _NC_NEVER: ("h pi_check(t+1)", h * nxt),
                _C_NEVER: ("-c_check+h pi_check(t+1)", -cc + h * nxt),
            }
            eq = an.pi_check(p, t)
        else:
            nxt = an.pi_send(p, t + 1)
            table = {
                _NC_NEVER: ("h pi_send(t+1)", h * nxt),
                _C_VALID: ("-c_check+(1-h)(R-c_send)+h pi_send(t+1)", -cc + (1 - h) * (R - cs) + h * nxt),
                _C_NEVER: ("-c_check+h pi_send(t+1)", -cc + h * nxt),
                _C_ALWAYS: ("pi_send(t)-c_check", an.pi_send(p, t) - cc),
                _C_INVALID: ("-c_check+h(pi_send(t+1)-c_send)", -cc + h * (nxt - cs)),
            }
            eq = an.pi_send(p, t)
        return table[b] + (eq,) if b in table else None
    return None


@dataclass(frozen=True)
class KappaInterval:
    """Range of kappa over which every deviation is weakly dominated.

    ``lower``/``upper`` are ``None`` when unbounded; ``empty`` is set when some
    deviation is profitable for every kappa.
    """

    lower: Optional[Fraction]
    upper: Optional[Fraction]
    empty: bool
    binding: Optional[Tuple[int, int, str]] = None  # (player, round, deviation) setting ``lower``

    def contains(self, kappa) -> bool:
        k = Fraction(kappa)
        if self.empty:
            return False
        return (self.lower is None or k >= self.lower) and (self.upper is None or k <= self.upper)


def exact_kappa_interval(p: GameParams, profile_factory, **kwargs) -> KappaInterval:
    """Exact set of kappa making ``profile_factory(p)`` an equilibrium, all else fixed.

    Expected utilities are affine in kappa for fixed strategies, so two exact
    runs determine every dominance margin as a line in kappa.
    """
    k0, k1 = p.kappa, p.kappa + 1
    reps = [verify_equilibrium(q, profile_factory(q), "exact", **kwargs)
            for q in (p, p.with_(kappa=k1))]
    lower = upper = None
    binding = None
    empty = False
    for r0, r1 in zip(*(r.records for r in reps)):
        assert (r0.player, r0.round, r0.group, r0.deviation) == (r1.player, r1.round, r1.group, r1.deviation)
        d0 = r0.eq_utility - r0.dev_utility
        slope = (r1.eq_utility - r1.dev_utility) - d0
        if slope == 0:
            empty |= d0 < 0
            continue
        root = k0 - d0 / slope
        if slope > 0 and (lower is None or root > lower):
            lower, binding = root, (r0.player, r0.round, r0.deviation)
        elif slope < 0 and (upper is None or root < upper):
            upper = root
    if lower is not None and upper is not None and lower > upper:
        empty = True
    return KappaInterval(lower, upper, empty, binding)
