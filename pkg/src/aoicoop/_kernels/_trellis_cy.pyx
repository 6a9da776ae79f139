# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled twin of ``_trellis_py``; same contracts, C-speed inner loops."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"

cdef long long NEG_INF = -(<long long>1 << 60)


cdef inline int _parity(int x) nogil:
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


def conv_encode(bits, int g0, int g1, int k):
    """Encode ``bits`` plus ``k - 1`` zero tail bits; two outputs per input."""
    cdef cnp.uint8_t[::1] inp = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef Py_ssize_t n_in = inp.shape[0]
    cdef Py_ssize_t n = n_in + (k - 1)
    out_arr = np.empty(2 * n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef int reg = 0
    cdef int mask = (1 << k) - 1
    cdef int b
    cdef Py_ssize_t i
    for i in range(n):
        b = inp[i] if i < n_in else 0
        reg = ((reg << 1) | b) & mask
        out[2 * i] = <cnp.uint8_t>_parity(reg & g0)
        out[2 * i + 1] = <cnp.uint8_t>_parity(reg & g1)
    return out_arr


def viterbi_decode(soft, int g0, int g1, int k):
    """Maximum-metric zero-terminated path for integer soft inputs.

    Returns ``(info_bits, path_metric)``; branch metric is ``s`` for an
    expected output bit of 1 and ``255 - s`` otherwise. Ties go to the
    lower-numbered predecessor state.
    """
    cdef cnp.int64_t[::1] s = np.ascontiguousarray(soft, dtype=np.int64)
    cdef int n_states = 1 << (k - 1)
    cdef Py_ssize_t n_steps = s.shape[0] // 2
    cdef Py_ssize_t n_info = n_steps - (k - 1)

    pred0_arr = np.empty(n_states, dtype=np.int32)
    pred1_arr = np.empty(n_states, dtype=np.int32)
    bm_sel_arr = np.empty(2 * n_states, dtype=np.int32)  # (o0 + 2*o1) per edge
    cdef cnp.int32_t[::1] pred0 = pred0_arr
    cdef cnp.int32_t[::1] pred1 = pred1_arr
    cdef cnp.int32_t[::1] edge_out = bm_sel_arr
    cdef int ns, p0, p1, bit_in, w
    for ns in range(n_states):
        p0 = ns >> 1
        p1 = p0 | (n_states >> 1)
        bit_in = ns & 1
        pred0[ns] = p0
        pred1[ns] = p1
        w = (p0 << 1) | bit_in
        edge_out[2 * ns] = _parity(w & g0) | (_parity(w & g1) << 1)
        w = (p1 << 1) | bit_in
        edge_out[2 * ns + 1] = _parity(w & g0) | (_parity(w & g1) << 1)

    metrics_arr = np.full(n_states, NEG_INF, dtype=np.int64)
    next_arr = np.empty(n_states, dtype=np.int64)
    take_arr = np.empty((n_steps, n_states), dtype=np.uint8)
    cdef cnp.int64_t[::1] metrics = metrics_arr
    cdef cnp.int64_t[::1] nxt = next_arr
    cdef cnp.uint8_t[:, ::1] take = take_arr
    metrics[0] = 0

    cdef Py_ssize_t step
    cdef long long a, b, bm0, bm1, cand0, cand1
    cdef long long m00, m01, m10, m11  # branch metrics for output pairs 00,01,10,11
    cdef int sel
    for step in range(n_steps):
        a = s[2 * step]
        b = s[2 * step + 1]
        m00 = (255 - a) + (255 - b)
        m01 = (255 - a) + b
        m10 = a + (255 - b)
        m11 = a + b
        for ns in range(n_states):
            sel = edge_out[2 * ns]
            bm0 = m00 if sel == 0 else (m10 if sel == 1 else (m01 if sel == 2 else m11))
            sel = edge_out[2 * ns + 1]
            bm1 = m00 if sel == 0 else (m10 if sel == 1 else (m01 if sel == 2 else m11))
            cand0 = metrics[pred0[ns]] + bm0
            cand1 = metrics[pred1[ns]] + bm1
            if cand1 > cand0:
                nxt[ns] = cand1
                take[step, ns] = 1
            else:
                nxt[ns] = cand0
                take[step, ns] = 0
        if step >= n_info:
            # tail steps admit only input bit 0, i.e. even successor states
            for ns in range(1, n_states, 2):
                nxt[ns] = NEG_INF
        metrics[:] = nxt

    out_arr = np.empty(n_steps, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef int state = 0
    cdef int upper = n_states >> 1
    for step in range(n_steps - 1, -1, -1):
        out[step] = state & 1
        if take[step, state]:
            state = (state >> 1) | upper
        else:
            state = state >> 1
    return out_arr[:n_info], int(metrics[0])
