# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch simulator for table-driven profiles (see _kernel_py for the reference)."""

import numpy as np

cdef int[6] CHECKS = [0, 0, 1, 1, 1, 1]
cdef int[6] SEND_VALID = [0, 1, 0, 1, 1, 0]
cdef int[6] SEND_INVALID = [0, 1, 0, 1, 0, 1]


def simulate_batch(const unsigned char[:, ::1] byz, const signed char[:, ::1] table, int nu,
                   int player=-1, int start_round=1, int dev_round=0, int dev_code=0,
                   bint shadow=False, int max_rounds=0):
    cdef Py_ssize_t m = byz.shape[0]
    cdef int n = byz.shape[1]
    cdef int nrows = table.shape[0]
    if table.shape[1] != n:
        raise ValueError("table width must equal committee size")
    if nrows < 1:
        raise ValueError("table needs at least one round")
    if max_rounds <= 0 or max_rounds > n:
        max_rounds = n
    out_arr = np.zeros((m, 6), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    cdef Py_ssize_t r
    cdef int t, j, row, code, valid, msgs, sent, p_chk, p_sent, accepted, checks, sends, T
    for r in range(m):
        accepted = 0
        checks = 0
        sends = 0
        T = n
        valid = 0
        p_sent = 0
        for t in range(1, max_rounds + 1):
            row = (t if t < nrows else nrows) - 1
            if byz[r, t - 1]:
                valid = 0
            else:
                code = table[row, t - 1]
                if t - 1 == player and t == dev_round:
                    code = dev_code
                valid = 0 if (code & 8) else 1
            msgs = 0
            p_chk = 0
            p_sent = 0
            for j in range(n):
                if byz[r, j]:
                    if not valid:
                        msgs += 1
                    continue
                code = table[row, j]
                if j == player and t == dev_round:
                    code = dev_code
                code &= 7
                sent = SEND_VALID[code] if valid else SEND_INVALID[code]
                msgs += sent
                if j == player:
                    p_chk = CHECKS[code]
                    p_sent = sent
            if shadow and player >= 0 and byz[r, player]:
                code = table[row, player]
                if t == dev_round:
                    code = dev_code
                code &= 7
                sent = SEND_VALID[code] if valid else SEND_INVALID[code]
                msgs += sent
                p_chk = CHECKS[code]
                p_sent = sent
            if t >= start_round:
                checks += p_chk
                sends += p_sent
            if msgs >= nu:
                accepted = 1
                T = t
                break
        out[r, 0] = T
        out[r, 1] = accepted
        out[r, 2] = valid if accepted else 0
        out[r, 3] = checks
        out[r, 4] = sends
        out[r, 5] = p_sent if accepted else 0
    return out_arr
