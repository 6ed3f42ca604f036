"""Serialization of traces and reports.

Structured output is JSON with a ``format``/``version`` header and a fixed
key order; exact rationals are written as ``"num/den"`` strings. CSV output
starts with ``#`` lines holding the resolved configuration and writes every
rational twice, exactly and as a decimal.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

from .core import ByzantineAssignment, GameParams, PlayerType
from .protocol import (
    ConsensusProperties,
    ExecutionTrace,
    LedgerEntry,
    PayoffLedger,
    RealizedAction,
    RoundRecord,
    evaluate_consensus_properties,
    settle,
)

TRACE_FORMAT = "bftgame-trace"
REPORT_FORMAT = "bftgame-report"
VERSION = 1


class FormatError(ValueError):
    pass


def rat(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s: str) -> Fraction:
    return Fraction(s)


def dec(x, digits: int = 12) -> str:
    """Locale-independent decimal rendering; infinities become ``inf``/``-inf``."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), f".{digits}g")


def plain(x):
    """Recursively convert a value to JSON-ready primitives."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return rat(x)
    if isinstance(x, float):
        return dec(x) if math.isinf(x) else x
    if isinstance(x, Mapping):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if hasattr(x, "value"):  # enums
        return x.value
    raise TypeError(f"cannot serialize {type(x).__name__}")


def params_to_dict(p: GameParams) -> Dict[str, Any]:
    return plain(p.as_dict())


def params_from_dict(d: Mapping[str, Any]) -> GameParams:
    return GameParams(
        n=int(d["n"]), f=int(d["f"]), nu=int(d["nu"]),
        reward=parse_rat(d["reward"]), cost_check=parse_rat(d["cost_check"]),
        cost_send=parse_rat(d["cost_send"]), kappa=parse_rat(d["kappa"]),
        height=d.get("height", "k"),
    )


def _act(a: RealizedAction) -> str:
    return ("c" if a.checked else "-") + ("s" if a.sent else "-")


def _unact(s: str) -> RealizedAction:
    if len(s) != 2 or s[0] not in "c-" or s[1] not in "s-":
        raise FormatError(f"bad action token {s!r}")
    return RealizedAction(s[0] == "c", s[1] == "s")


def trace_to_dict(trace: ExecutionTrace, ledger: PayoffLedger = None) -> Dict[str, Any]:
    ledger = ledger or settle(trace)
    props = evaluate_consensus_properties(trace)
    return {
        "params": params_to_dict(trace.params),
        "byzantine": sorted(trace.assignment.indexes),
        "shadow": trace.shadow,
        "max_rounds": trace.max_rounds,
        "rounds": [
            {
                "round": r.round,
                "proposer": r.proposer,
                "proposer_type": r.proposer_type.value,
                "block_valid": r.block_valid,
                "actions": " ".join(_act(a) for a in r.actions),
                "shadow": _act(r.shadow) if r.shadow is not None else None,
                "messages": r.messages,
                "accepted": r.accepted,
            }
            for r in trace.rounds
        ],
        "termination_round": trace.termination_round,
        "accepted": trace.accepted,
        "accepted_valid": trace.accepted_valid,
        "ledger": {
            str(i): {
                "reward": rat(e.reward), "check_cost": rat(e.check_cost),
                "send_cost": rat(e.send_cost), "penalty": rat(e.penalty), "net": rat(e.net),
            }
            for i, e in sorted(ledger.entries.items())
        },
        "properties": {
            "termination": props.termination,
            "all_rational_decided": props.all_rational_decided,
            "agreement": props.agreement,
            "validity": props.validity,
        },
    }


def trace_from_dict(d: Mapping[str, Any]) -> Tuple[ExecutionTrace, PayoffLedger]:
    p = params_from_dict(d["params"])
    a = ByzantineAssignment(p.n, frozenset(d["byzantine"]))
    rounds = tuple(
        RoundRecord(
            round=r["round"], proposer=r["proposer"], proposer_type=PlayerType(r["proposer_type"]),
            block_valid=r["block_valid"], actions=tuple(_unact(s) for s in r["actions"].split()),
            messages=r["messages"], accepted=r["accepted"],
            shadow=_unact(r["shadow"]) if r["shadow"] is not None else None,
        )
        for r in d["rounds"]
    )
    trace = ExecutionTrace(p, a, rounds, d["termination_round"], d["accepted_valid"], d["max_rounds"], d["shadow"])
    ledger = PayoffLedger({
        int(i): LedgerEntry(*(parse_rat(e[k]) for k in ("reward", "check_cost", "send_cost", "penalty", "net")))
        for i, e in d["ledger"].items()
    })
    return trace, ledger


def dump_structured(kind: str, body: Mapping[str, Any]) -> str:
    doc = {"format": kind, "version": VERSION}
    doc.update(plain(body))
    return json.dumps(doc, indent=1, ensure_ascii=True) + "\n"


def load_structured(text: str, kind: str = None) -> Dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"not a structured document: {e}") from None
    if doc.get("format") not in (TRACE_FORMAT, REPORT_FORMAT):
        raise FormatError(f"unknown format {doc.get('format')!r}")
    if kind is not None and doc["format"] != kind:
        raise FormatError(f"expected {kind}, got {doc['format']}")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported version {doc.get('version')!r}; this reader handles {VERSION}")
    return doc


def dump_traces(traces: Sequence[Tuple[ExecutionTrace, PayoffLedger]], config: Mapping[str, Any]) -> str:
    return dump_structured(TRACE_FORMAT, {"config": config, "traces": [trace_to_dict(t, l) for t, l in traces]})


def load_traces(text: str) -> List[Tuple[ExecutionTrace, PayoffLedger]]:
    doc = load_structured(text, TRACE_FORMAT)
    return [trace_from_dict(t) for t in doc["traces"]]


def _cell(x) -> str:
    if isinstance(x, Fraction):
        return rat(x)
    if isinstance(x, float):
        return dec(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    return str(plain(x))


def write_csv(columns: Sequence[str], rows: Iterable[Mapping[str, Any]], config: Mapping[str, Any],
              rational: Iterable[str] = ()) -> str:
    """CSV text; columns listed in ``rational`` are split into ``col`` and ``col_dec``."""
    rational = set(rational)
    out = io.StringIO()
    for k, v in plain(config).items():
        out.write(f"# {k}={json.dumps(v, separators=(',', ':'))}\n")
    w = csv.writer(out, lineterminator="\n")
    header = []
    for c in columns:
        header += [c, c + "_dec"] if c in rational else [c]
    w.writerow(header)
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c)
            if c in rational:
                if v is None:
                    cells += ["", ""]
                else:
                    cells += [dec(v) if isinstance(v, float) else rat(v), dec(v)]
            else:
                cells.append(_cell(v))
        w.writerow(cells)
    return out.getvalue()


def read_csv(text: str) -> Tuple[Dict[str, Any], List[Dict[str, str]]]:
    config, body = {}, []
    for line in text.splitlines():
        if line.startswith("# ") and "=" in line:
            k, v = line[2:].split("=", 1)
            config[k] = json.loads(v)
        else:
            body.append(line)
    return config, list(csv.DictReader(body))
