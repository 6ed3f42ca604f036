"""Compiled vs pure-Python batch kernel.

    python3 benchmarks/bench_kernel.py [--n 12] [--f 4] [--repeat 3]

Times exhaustive enumeration of all C(n, f) assignments under the
validity-and-termination profile, with and without a deviation, and checks
that both backends return identical arrays.
"""

import argparse
import time

import numpy as np

from bftgame import kernel
from bftgame.core import BEHAVIORS, GameParams
from bftgame.protocol import profile_prop4
from bftgame.verifier import subset_masks


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--f", type=int, default=4)
    ap.add_argument("--nu", type=int)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    nu = args.nu or args.f + 2
    p = GameParams(args.n, args.f, nu, 10, 2, 1, 50)
    table = kernel.encode_table(profile_prop4(p))
    masks = subset_masks(p.n, p.f)
    dev = kernel.encode(BEHAVIORS[1])  # no check, always vote
    cases = [("baseline", {}), ("deviation", dict(player=0, dev_round=1, dev_code=dev, shadow=True))]
    print(f"n={p.n} f={p.f} nu={p.nu} assignments={len(masks)} compiled={'yes' if kernel.BACKEND == 'compiled' else 'no'}")
    print(f"{'case':<10} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8}")
    for name, kw in cases:
        tp, outp = best_of(lambda: kernel.simulate_batch(masks, table, p.nu, backend="python", **kw), args.repeat)
        if kernel.BACKEND != "compiled":
            print(f"{name:<10} {tp * 1e3:>12.2f} {'n/a':>14} {'n/a':>8}")
            continue
        tc, outc = best_of(lambda: kernel.simulate_batch(masks, table, p.nu, backend="compiled", **kw), args.repeat)
        if not np.array_equal(outp, outc):
            raise SystemExit(f"backend mismatch in case {name}")
        print(f"{name:<10} {tp * 1e3:>12.2f} {tc * 1e3:>14.2f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
