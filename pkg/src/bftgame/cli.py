"""Command-line front end.

Exit codes: 0 success (or every deviation dominated), 2 configuration
error, 3 engine error, 4 a profitable deviation was found, 5 Monte-Carlo
verification was inconclusive.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Dict, List, Sequence

from . import analytics as an
from . import formats as fmt
from .core import (
    ByzantineAssignment,
    DivisionByZero,
    DomainError,
    EnumerationTooLarge,
    GameError,
    GameParams,
    ParamsError,
    PreconditionViolated,
)
from .protocol import evaluate_consensus_properties, run_height
from .scenario import Scenario, ScenarioError, load_scenario
from .verifier import exact_kappa_interval, sample_masks, verify_equilibrium

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE, EXIT_PROFITABLE, EXIT_INCONCLUSIVE = 0, 2, 3, 4, 5
ENV_SEED = "BFTGAME_SEED"
ENV_JOBS = "BFTGAME_JOBS"

CONFIG_ERRORS = (ScenarioError, ParamsError, EnumerationTooLarge, PreconditionViolated)


# option resolution


def _resolve(args) -> Scenario:
    sc = load_scenario(args.scenario)
    over: Dict[str, Any] = {}
    for item in args.set or ():
        if "=" not in item:
            raise ScenarioError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        over[k] = v
    env_seed = os.environ.get(ENV_SEED)
    if args.seed is not None:
        over["seed"] = args.seed
    elif env_seed not in (None, ""):
        over["seed"] = env_seed
    for key in ("trials", "mode", "prior", "information"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if args.format is not None:
        over["format"] = args.format
    sc = sc.with_values(**over)
    sc.seed, sc.trials, sc.mode  # validate early
    return sc


def _jobs(args) -> int:
    raw = args.jobs if args.jobs is not None else os.environ.get(ENV_JOBS, "1")
    try:
        j = int(raw)
    except ValueError:
        raise ScenarioError(f"parallelism must be an integer, got {raw!r}") from None
    if j < 1:
        raise ScenarioError("parallelism must be >= 1")
    return j


def _format(sc: Scenario) -> str:
    f = sc.get("format", "structured")
    if f not in ("csv", "structured"):
        raise ScenarioError(f"format must be csv or structured, got {f!r}")
    return f


def _config(command: str, sc: Scenario) -> Dict[str, Any]:
    cfg = {"command": command}
    cfg.update(sc.resolved())
    return cfg


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# simulate


def _assignments(sc: Scenario, p: GameParams) -> List[ByzantineAssignment]:
    spec = sc.assignment_spec(p)
    if spec == "worst-case":
        return [ByzantineAssignment.worst_case(p)]
    if spec == "uniform-random":
        masks = sample_masks(p, 0, "uniform", sc.trials, sc.seed)
        return [ByzantineAssignment(p.n, frozenset(int(s) + 1 for s in row.nonzero()[0])) for row in masks]
    return [ByzantineAssignment.of(p, spec)]


def cmd_simulate(sc: Scenario) -> (str, int):
    p = sc.params()
    profile = sc.profile(p)
    max_rounds = int(sc.get("max_rounds", p.n))
    runs = [run_height(p, a, profile, max_rounds) for a in _assignments(sc, p)]
    config = _config("simulate", sc)
    rational = sum(len(l.entries) for _, l in runs)
    summary = {
        "runs": len(runs),
        "accepted": sum(t.accepted for t, _ in runs),
        "invalid_accepted": sum(t.accepted and t.accepted_valid is False for t, _ in runs),
        "mean_termination_round": Fraction(sum(t.termination_round for t, _ in runs), len(runs)),
        "mean_rational_utility": (sum(sum(e.net for e in l.entries.values()) for _, l in runs) / rational
                                  if rational else None),
        "termination_note": "termination = a block was accepted; all_rational_decided = every rational voted for it",
    }
    if _format(sc) == "structured":
        body = {"config": config, "summary": summary, "traces": [fmt.trace_to_dict(t, l) for t, l in runs]}
        return fmt.dump_structured(fmt.TRACE_FORMAT, body), EXIT_OK
    rows = []
    for k, (t, ledger) in enumerate(runs, 1):
        props = evaluate_consensus_properties(t)
        nets = ";".join(f"{i}:{fmt.rat(e.net)}" for i, e in sorted(ledger.entries.items()))
        for r in t.rounds:
            rows.append({
                "run": k, "byzantine": " ".join(map(str, sorted(t.assignment.indexes))), "round": r.round,
                "proposer": r.proposer, "proposer_type": r.proposer_type.value, "block_valid": r.block_valid,
                "messages": r.messages, "accepted": r.accepted,
                "actions": " ".join(fmt._act(a) for a in r.actions),
                "termination_round": t.termination_round, "termination": props.termination,
                "all_rational_decided": props.all_rational_decided, "validity": props.validity, "nets": nets,
            })
    cols = ["run", "byzantine", "round", "proposer", "proposer_type", "block_valid", "messages", "accepted",
            "actions", "termination_round", "termination", "all_rational_decided", "validity", "nets"]
    return fmt.write_csv(cols, rows, config), EXIT_OK


# analytics


def _safe(fn, *a):
    try:
        return fn(*a)
    except (DomainError, PreconditionViolated, DivisionByZero):
        return None


def analytics_rows(p: GameParams) -> List[Dict[str, Any]]:
    n, f, nu = p.n, p.f, p.nu
    rows = []
    for t in range(1, f + 2):
        rows.append({
            "t": t,
            "hazard": _safe(an.hazard, n, f, t),
            "phi": _safe(an.phi, n, f, t),
            "psi": _safe(an.psi, n, f, t),
            "pi_check": _safe(an.pi_check, p, t),
            "pi_send": _safe(an.pi_send, p, t),
            "prob_iB_below": _safe(an.prob_iB_below, n, f, nu, t),
            "alpha": _safe(an.alpha, p, t),
            "beta": _safe(an.beta, p, t),
        })
    for r in rows:
        a, b = r["alpha"], r["beta"]
        r["kappa_bound"] = a * p.cost_check - b * p.cost_send if a is not None and b is not None else None
    return rows


def cmd_analytics(sc: Scenario):
    p = sc.params()
    rows = analytics_rows(p)
    k_thr = _safe(an.kappa_threshold, p) if p.f < p.nu else None
    r_thr = an.reward_threshold(p)
    config = _config("analytics", sc)
    if _format(sc) == "structured":
        body = {"config": config, "rows": rows, "thresholds": {"kappa_threshold": k_thr, "reward_threshold": r_thr}}
        return fmt.dump_structured(fmt.REPORT_FORMAT, body), EXIT_OK
    cols = ["t", "hazard", "phi", "psi", "pi_check", "pi_send", "prob_iB_below", "alpha", "beta", "kappa_bound",
            "kappa_threshold", "reward_threshold"]
    rational = cols[1:]
    rows = rows + [{"t": "thresholds", "kappa_threshold": k_thr, "reward_threshold": r_thr}]
    return fmt.write_csv(cols, rows, config, rational), EXIT_OK


# verify


def _record_row(r) -> Dict[str, Any]:
    exact = isinstance(r.eq_utility, Fraction)
    return {
        "player": r.player, "round": r.round, "group": r.group, "deviation": r.deviation, "rows": r.rows,
        "eq_utility": r.eq_utility, "dev_utility": r.dev_utility,
        "margin": r.eq_utility - r.dev_utility,
        "eq_stderr": None if exact else r.eq_stderr, "dev_stderr": None if exact else r.dev_stderr,
        "diff_stderr": None if exact else r.diff_stderr,
        "dominated": r.dominated, "verdict": r.verdict, "expression": r.expression,
        "expression_value": r.expression_value, "expression_diff": r.expression_diff,
        "eq_expression_value": r.eq_expression_value, "eq_expression_diff": r.eq_expression_diff,
    }


def _verify_kwargs(sc: Scenario) -> Dict[str, Any]:
    return {
        "prior": sc.get("prior", "uniform"),
        "information": sc.get("information", "reached"),
        "trials": sc.trials,
        "seed": sc.seed,
        "max_n": int(sc.get("max_n", 12)),
    }


def cmd_verify(sc: Scenario):
    p = sc.params()
    profile = sc.profile(p)
    kw = _verify_kwargs(sc)
    report = verify_equilibrium(p, profile, sc.mode, **kw)
    summary = {
        "verdict": {0: "all-dominated", 4: "profitable-deviation", 5: "inconclusive"}[report.exit_code],
        "records": len(report.records),
        "profitable": len(report.profitable),
        "inconclusive": len(report.inconclusive),
    }
    if sc.mode == "exact":
        kw.pop("trials"), kw.pop("seed")
        iv = exact_kappa_interval(p, sc.profile, **kw)
        summary["exact_kappa_lower"] = iv.lower
        summary["exact_kappa_upper"] = iv.upper
        summary["exact_kappa_empty"] = iv.empty
        summary["exact_kappa_binding"] = list(iv.binding) if iv.binding else None
    config = _config("verify", sc)
    rows = [_record_row(r) for r in report.records]
    if _format(sc) == "structured":
        body = {"config": config, "summary": summary, "records": rows}
        return fmt.dump_structured(fmt.REPORT_FORMAT, body), report.exit_code
    cols = list(rows[0]) if rows else ["player"]
    rational = ["eq_utility", "dev_utility", "margin", "expression_value", "expression_diff",
                "eq_expression_value", "eq_expression_diff"]
    config.update({"summary." + k: v for k, v in summary.items()})
    return fmt.write_csv(cols, rows, config, rational), report.exit_code


# classify


def classification_dict(p: GameParams) -> Dict[str, Any]:
    c = an.classify_regime(p)
    return {
        "regimes": [r.value for r in c.regimes],
        "predicted": {r.value: {"termination": an.PREDICTED[r][0], "validity": an.PREDICTED[r][1]}
                      for r in c.regimes},
        "conditions": [{"condition": name, "holds": ok} for name, ok in c.conditions],
        "kappa_threshold": c.kappa_threshold,
        "reward_threshold": c.reward_threshold,
        "kappa_margin": c.kappa_margin,
        "reward_margin": c.reward_margin,
    }


def _relaxed_params(sc: Scenario) -> GameParams:
    return sc.params(relaxed=True)


def cmd_classify(sc: Scenario):
    p = _relaxed_params(sc)
    d = classification_dict(p)
    config = _config("classify", sc)
    if _format(sc) == "structured":
        return fmt.dump_structured(fmt.REPORT_FORMAT, {"config": config, "classification": d}), EXIT_OK
    rows = [{"condition": c["condition"], "holds": c["holds"]} for c in d["conditions"]]
    for k in ("kappa_threshold", "reward_threshold", "kappa_margin", "reward_margin"):
        config[k] = d[k]
    config["regimes"] = "|".join(d["regimes"])
    return fmt.write_csv(["condition", "holds"], rows, config), EXIT_OK


# sweep


SWEEP_COLUMNS = ["point", "n", "f", "nu", "reward", "cost_check", "cost_send", "kappa", "status", "regimes",
                 "kappa_threshold", "reward_threshold", "kappa_margin", "reward_margin",
                 "verdict", "exit_code", "profitable", "exact_kappa_lower"]
SWEEP_RATIONAL = ["reward", "cost_check", "cost_send", "kappa", "kappa_threshold", "reward_threshold",
                  "kappa_margin", "reward_margin", "exact_kappa_lower"]


def sweep_point(args) -> Dict[str, Any]:
    k, sc, verify = args
    row: Dict[str, Any] = {"point": k}
    for key in ("n", "f", "nu"):
        row[key] = sc.get(key)
    for key in ("reward", "cost_check", "cost_send", "kappa"):
        row[key] = Fraction(sc.get(key)) if sc.get(key) is not None else None
    try:
        p = _relaxed_params(sc)
        d = classification_dict(p)
        row.update({
            "regimes": "|".join(d["regimes"]),
            "kappa_threshold": d["kappa_threshold"], "reward_threshold": d["reward_threshold"],
            "kappa_margin": d["kappa_margin"], "reward_margin": d["reward_margin"],
        })
        if verify:
            p = sc.params()
            profile = sc.profile(p)
            kw = _verify_kwargs(sc)
            rep = verify_equilibrium(p, profile, sc.mode, **kw)
            row.update({
                "exit_code": rep.exit_code, "profitable": len(rep.profitable),
                "verdict": {0: "all-dominated", 4: "profitable-deviation", 5: "inconclusive"}[rep.exit_code],
            })
            if sc.mode == "exact":
                kw.pop("trials"), kw.pop("seed")
                row["exact_kappa_lower"] = exact_kappa_interval(p, sc.profile, **kw).lower
        row["status"] = "ok"
    except (GameError, ScenarioError) as e:
        row["status"] = f"{type(e).__name__}: {e}"
    if isinstance(row.get("kappa_threshold"), float):
        row["kappa_threshold"] = None  # vacuous condition, reported via status columns
        row["kappa_margin"] = None
    return row


def cmd_sweep(sc: Scenario, jobs: int = 1):
    points = sc.grid()
    verify = "verify" in sc.analyses
    work = [(k, pt, verify) for k, pt in enumerate(points, 1)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(sweep_point, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [sweep_point(w) for w in work]
    config = _config("sweep", sc)
    config["grid"] = {k: list(v) for k, v in sc.sweep}
    if _format(sc) == "structured":
        return fmt.dump_structured(fmt.REPORT_FORMAT, {"config": config, "rows": rows}), EXIT_OK
    return fmt.write_csv(SWEEP_COLUMNS, rows, config, SWEEP_RATIONAL), EXIT_OK


# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bftgame", description="Rational/Byzantine committee consensus game toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "run one consensus height and report traces and payoffs"),
        ("analytics", "closed-form recurrences, payoffs and thresholds per round"),
        ("verify", "check every one-shot deviation against a profile"),
        ("sweep", "classify and optionally verify over a parameter grid"),
        ("classify", "report which equilibrium regimes the parameters fall in"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--scenario", required=True, help="scenario file")
        sp.add_argument("--seed", help=f"RNG seed (overrides ${ENV_SEED} and the file)")
        sp.add_argument("--trials", help="number of sampled assignments")
        sp.add_argument("--mode", choices=("exact", "mc"))
        sp.add_argument("--out", help="output path (default: standard output)")
        sp.add_argument("--format", choices=("csv", "structured"))
        sp.add_argument("--jobs", help=f"parallel workers for sweeps (overrides ${ENV_JOBS})")
        sp.add_argument("--prior", choices=("uniform", "own-type"))
        sp.add_argument("--information", choices=("reached", "proposers"))
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario value")
    return ap


COMMANDS = {
    "simulate": cmd_simulate,
    "analytics": cmd_analytics,
    "verify": cmd_verify,
    "classify": cmd_classify,
}


def main(argv: Sequence[str] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _resolve(args)
        if args.command == "sweep":
            text, code = cmd_sweep(sc, _jobs(args))
        else:
            text, code = COMMANDS[args.command](sc)
    except CONFIG_ERRORS as e:
        print(f"bftgame: config error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (GameError, ValueError, ArithmeticError) as e:
        print(f"bftgame: engine error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ENGINE
    try:
        _emit(text, args.out)
    except OSError as e:
        print(f"bftgame: cannot write output: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
