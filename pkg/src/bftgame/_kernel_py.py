"""Pure-Python batch simulator for table-driven profiles.

Row ``r`` of ``byz`` marks the Byzantine seats of one assignment. ``table``
holds one action code per (round, seat): bits 0-2 index the receiver
behavior, bit 3 means "propose an invalid block". Rounds past the last table
row reuse it.

Returns an ``(m, 6)`` int64 array with columns
``T, accepted, accepted_valid, checks, sends, rewarded``; the last four
describe ``player`` (0-based, -1 for none) and count only rounds
``>= start_round``.
"""

import numpy as np

CHECKS = (0, 0, 1, 1, 1, 1)
SEND_VALID = (0, 1, 0, 1, 1, 0)
SEND_INVALID = (0, 1, 0, 1, 0, 1)


def simulate_batch(byz, table, nu, player=-1, start_round=1, dev_round=0, dev_code=0,
                   shadow=False, max_rounds=0):
    byz = np.asarray(byz, dtype=np.uint8)
    table = np.asarray(table, dtype=np.int8)
    m, n = byz.shape
    nrows = table.shape[0]
    if table.shape[1] != n:
        raise ValueError("table width must equal committee size")
    if nrows < 1:
        raise ValueError("table needs at least one round")
    if max_rounds <= 0 or max_rounds > n:
        max_rounds = n
    tab = table.tolist()
    out = np.zeros((m, 6), dtype=np.int64)
    for r, seats in enumerate(byz.tolist()):
        accepted = 0
        checks = sends = 0
        T = n
        valid = 0
        p_sent = 0
        for t in range(1, max_rounds + 1):
            codes = tab[min(t, nrows) - 1]
            if seats[t - 1]:
                valid = 0
            else:
                code = dev_code if (t - 1 == player and t == dev_round) else codes[t - 1]
                valid = 0 if code & 8 else 1
            send_of = SEND_VALID if valid else SEND_INVALID
            msgs = 0
            p_chk = p_sent = 0
            for j in range(n):
                if seats[j]:
                    msgs += not valid
                    continue
                code = dev_code if (j == player and t == dev_round) else codes[j]
                sent = send_of[code & 7]
                msgs += sent
                if j == player:
                    p_chk = CHECKS[code & 7]
                    p_sent = sent
            if shadow and player >= 0 and seats[player]:
                code = dev_code if t == dev_round else codes[player]
                sent = send_of[code & 7]
                msgs += sent
                p_chk = CHECKS[code & 7]
                p_sent = sent
            if t >= start_round:
                checks += p_chk
                sends += p_sent
            if msgs >= nu:
                accepted = 1
                T = t
                break
        out[r] = (T, accepted, valid if accepted else 0, checks, sends, p_sent if accepted else 0)
    return out
