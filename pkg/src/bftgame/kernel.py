"""Backend selection for the batch simulator.

The compiled extension is used when it was built; otherwise, or when
``BFTGAME_PURE=1`` is set, the pure-Python implementation is used.
"""

import os

import numpy as np

from . import _kernel_py
from .core import BEHAVIORS, RoundAction, StrategyProfile

try:
    if os.environ.get("BFTGAME_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _kernel as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled.simulate_batch if _compiled is not None else _kernel_py.simulate_batch

INVALID_BIT = 8
VALID_CODES = tuple(b | flag for flag in (0, INVALID_BIT) for b in range(len(BEHAVIORS)))


def encode(action: RoundAction) -> int:
    code = BEHAVIORS.index(action.behavior())
    if action.propose_valid is False:
        code |= INVALID_BIT
    return code


def decode(code: int) -> RoundAction:
    if code not in VALID_CODES:
        raise ValueError(f"invalid action code {code}")
    b = BEHAVIORS[code & 7]
    return RoundAction(b.check, b.send, not (code & INVALID_BIT))


def encode_table(profile: StrategyProfile) -> np.ndarray:
    if profile.table is None:
        raise ValueError(f"profile {profile.name!r} is not table-driven")
    return np.array([[encode(a) for a in row] for row in profile.table], dtype=np.int8)


def simulate_batch(byz, table, nu, player=-1, start_round=1, dev_round=0, dev_code=0,
                   shadow=False, max_rounds=0, backend=None):
    """Simulate every row of ``byz``; see ``_kernel_py`` for the column layout."""
    byz = np.ascontiguousarray(byz, dtype=np.uint8)
    table = np.ascontiguousarray(table, dtype=np.int8)
    if table.ndim != 2 or byz.ndim != 2 or table.shape[1] != byz.shape[1] or table.shape[0] < 1:
        raise ValueError("byz is (m, n) and table is (rounds >= 1, n)")
    if not np.isin(table, VALID_CODES).all() or int(dev_code) not in VALID_CODES:
        raise ValueError("action codes must encode one of the six behaviors")
    if not -1 <= int(player) < byz.shape[1]:
        raise ValueError("player index out of range")
    if backend is None:
        fn = _impl
    elif backend == "python":
        fn = _kernel_py.simulate_batch
    elif backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        fn = _compiled.simulate_batch
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return fn(byz, table, int(nu), int(player), int(start_round), int(dev_round), int(dev_code),
              bool(shadow), int(max_rounds))
