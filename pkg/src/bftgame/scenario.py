"""Scenario files.

Line-oriented ``key = value`` pairs, ``#`` comments, and two optional
sections::

    version = 1
    n = 10
    f = 3
    nu = 5
    reward = 10
    cost_check = 2
    cost_send = 1
    kappa = 20
    profile = prop4            # prop1 | prop2 | prop4 | prescribed
    assignment = worst-case    # worst-case | uniform-random | explicit list "1,4"
    seed = 7
    trials = 1000
    analyses = simulate, verify

    [strategy]                 # replaces ``profile`` by an inline table
    # rounds  seats  action    (later lines override earlier ones)
    1..3      1..9   valid/check:if-valid
    1..3      10     nocheck:always
    4..       *      nocheck:always

    [sweep]                    # grid for the sweep command
    nu = 4..6
    kappa = 15, 20, 25
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .core import GameParams, RoundAction, StrategyProfile, to_fraction
from .protocol import PROFILES, canonical_profile

SCENARIO_VERSION = 1
PARAM_KEYS = ("n", "f", "nu", "reward", "cost_check", "cost_send", "kappa")
INT_KEYS = ("n", "f", "nu")
ANALYSES = ("simulate", "analytics", "verify", "classify")
KNOWN_KEYS = set(PARAM_KEYS) | {
    "version", "height", "profile", "assignment", "seed", "trials", "analyses", "mode",
    "output", "format", "prior", "information", "max_n", "max_rounds",
}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


@dataclass(frozen=True)
class Scenario:
    values: Dict[str, str]
    strategy: Tuple[Tuple[str, str, str], ...] = ()
    sweep: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    source: str = "<inline>"

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def with_values(self, **kw) -> "Scenario":
        v = dict(self.values)
        v.update({k: str(x) for k, x in kw.items() if x is not None})
        return replace(self, values=v)

    def params(self, relaxed: bool = False) -> GameParams:
        """Game parameters; ``relaxed`` admits kappa <= R for regime reports."""
        missing = [k for k in PARAM_KEYS if k not in self.values]
        if missing:
            raise ScenarioError(f"missing parameter(s): {', '.join(missing)}")
        kw = {}
        for k in PARAM_KEYS:
            raw = self.values[k]
            try:
                kw[k] = int(raw) if k in INT_KEYS else to_fraction(raw)
            except ValueError:
                raise ScenarioError(f"{k}: cannot parse {raw!r}") from None
        return GameParams(height=self.values.get("height", "k"), relaxed=relaxed, **kw)

    @property
    def seed(self) -> int:
        return _int(self.values.get("seed", "0"), "seed", lo=0)

    @property
    def trials(self) -> int:
        return _int(self.values.get("trials", "100"), "trials", lo=1)

    @property
    def mode(self) -> str:
        m = self.values.get("mode", "exact")
        if m not in ("exact", "mc"):
            raise ScenarioError(f"mode must be exact or mc, got {m!r}")
        return m

    @property
    def analyses(self) -> Tuple[str, ...]:
        raw = self.values.get("analyses", "")
        items = tuple(x.strip() for x in raw.split(",") if x.strip())
        bad = [x for x in items if x not in ANALYSES]
        if bad:
            raise ScenarioError(f"unknown analyses: {bad}")
        return items

    def profile(self, p: GameParams) -> StrategyProfile:
        if self.strategy:
            return build_table(p.n, self.strategy)
        name = self.values.get("profile")
        if name is None:
            raise ScenarioError("no profile and no [strategy] table")
        if name not in PROFILES:
            raise ScenarioError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        return canonical_profile(name, p)

    @property
    def profile_name(self) -> str:
        return "custom" if self.strategy else self.values.get("profile", "")

    def assignment_spec(self, p: GameParams):
        """``"worst-case"``, ``"uniform-random"`` or a tuple of Byzantine seats."""
        raw = self.values.get("assignment", "worst-case").strip()
        if raw in ("worst-case", "uniform-random"):
            return raw
        try:
            seats = tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
        except ValueError:
            raise ScenarioError(f"assignment: cannot parse {raw!r}") from None
        if len(set(seats)) != len(seats) or len(seats) != p.f:
            raise ScenarioError(f"explicit assignment needs {p.f} distinct seats, got {list(seats)}")
        if any(not 1 <= s <= p.n for s in seats):
            raise ScenarioError(f"assignment seats must lie in 1..{p.n}")
        return seats

    def resolved(self) -> Dict[str, str]:
        out = {k: self.values[k] for k in sorted(self.values)}
        if self.strategy:
            out["strategy"] = "; ".join(" ".join(line) for line in self.strategy)
        return out

    def grid(self) -> List["Scenario"]:
        """One scenario per point of the [sweep] product, first key varying slowest."""
        if not self.sweep:
            raise ScenarioError("empty sweep grid")
        keys = [k for k, _ in self.sweep]
        axes = [vals for _, vals in self.sweep]
        if any(len(a) == 0 for a in axes):
            raise ScenarioError("empty sweep grid")
        return [self.with_values(**dict(zip(keys, combo))) for combo in itertools.product(*axes)]


def _int(raw: str, name: str, lo: int = None) -> int:
    try:
        v = int(raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name} must be an integer, got {raw!r}") from None
    if lo is not None and v < lo:
        raise ScenarioError(f"{name} must be >= {lo}")
    return v


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def expand_values(raw: str) -> Tuple[str, ...]:
    """``"1, 2, 5"`` or ``"3..6"`` (integer range, inclusive)."""
    out = []
    for part in (x.strip() for x in raw.split(",")):
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = _int(a, "range start"), _int(b, "range end")
            out += [str(v) for v in range(lo, hi + 1)]
        else:
            out.append(part)
    return tuple(out)


def parse_scenario(text: str, source: str = "<inline>") -> Scenario:
    values: Dict[str, str] = {}
    strategy: List[Tuple[str, str, str]] = []
    sweep: List[Tuple[str, Tuple[str, ...]]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("strategy", "sweep"):
                raise ScenarioError(f"{where}: unknown section [{section}]")
            continue
        if section == "strategy":
            parts = line.split()
            if len(parts) != 3:
                raise ScenarioError(f"{where}: strategy lines are 'rounds seats action'")
            strategy.append(tuple(parts))
            continue
        if "=" not in line:
            raise ScenarioError(f"{where}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if section == "sweep":
            if key not in PARAM_KEYS and key not in ("mode", "profile", "trials"):
                raise ScenarioError(f"{where}: cannot sweep {key!r}")
            if any(k == key for k, _ in sweep):
                raise ScenarioError(f"{where}: duplicate sweep key {key!r}")
            sweep.append((key, expand_values(value)))
            continue
        if key not in KNOWN_KEYS:
            raise ScenarioError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ScenarioError(f"{where}: duplicate key {key!r}")
        values[key] = value
    if "version" not in values:
        raise ScenarioError(f"{source}: missing 'version' field")
    if values["version"] != str(SCENARIO_VERSION):
        raise ScenarioError(f"{source}: unsupported scenario version {values['version']!r}")
    return Scenario(values, tuple(strategy), tuple(sweep), source)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}") from None
    return parse_scenario(text, path)


def _span(token: str, n: int, what: str) -> range:
    if token == "*":
        return range(1, n + 1)
    if ".." in token:
        a, b = token.split("..", 1)
        lo = _int(a, what)
        hi = _int(b, what) if b else n
    else:
        lo = hi = _int(token, what)
    if not 1 <= lo <= hi <= n:
        raise ScenarioError(f"{what} {token!r} outside 1..{n}")
    return range(lo, hi + 1)


def build_table(n: int, lines: Sequence[Tuple[str, str, str]]) -> StrategyProfile:
    grid: List[List[Optional[RoundAction]]] = [[None] * n for _ in range(n)]
    for rounds, seats, action in lines:
        try:
            act = RoundAction.parse(action)
        except ValueError as e:
            raise ScenarioError(str(e)) from None
        for t in _span(rounds, n, "rounds"):
            for i in _span(seats, n, "seats"):
                grid[t - 1][i - 1] = act
    holes = [(t + 1, i + 1) for t in range(n) for i in range(n) if grid[t][i] is None]
    if holes:
        raise ScenarioError(f"strategy table leaves {len(holes)} (round, seat) cells undefined, e.g. {holes[0]}")
    return StrategyProfile.from_table(n, grid, "custom")
