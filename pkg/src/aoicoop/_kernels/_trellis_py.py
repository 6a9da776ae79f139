"""NumPy implementation of the convolutional-code trellis kernels.

``aoicoop._kernels`` prefers the compiled twin (``_trellis_cy``) when it is
importable; both implementations must produce bit-identical outputs and are
tested against each other. The register convention puts the newest input bit
at the LSB of the tap window, so a generator mask ``g`` taps the input from
``d`` slots ago when bit ``d`` of ``g`` is set.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_NEG_INF = -(1 << 60)

_TABLE_CACHE: dict[tuple[int, int, int], dict[str, np.ndarray]] = {}


def _parity(values: np.ndarray) -> np.ndarray:
    # table-build helper, runs once per code; int.bit_count keeps it
    # independent of the NumPy version
    return np.array([int(v).bit_count() & 1 for v in values], dtype=np.int64)


def _tables(g0: int, g1: int, k: int) -> dict[str, np.ndarray]:
    key = (g0, g1, k)
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    n_states = 1 << (k - 1)
    ns = np.arange(n_states)
    pred0 = ns >> 1                    # lower-numbered predecessor of each state
    pred1 = pred0 | (n_states >> 1)
    bit_in = ns & 1                    # input bit carried by every edge into ns
    win0 = (pred0 << 1) | bit_in
    win1 = (pred1 << 1) | bit_in
    tables = {
        "pred0": pred0,
        "pred1": pred1,
        "o00": _parity(win0 & g0),
        "o01": _parity(win0 & g1),
        "o10": _parity(win1 & g0),
        "o11": _parity(win1 & g1),
        "odd": (ns & 1) == 1,
    }
    _TABLE_CACHE[key] = tables
    return tables


def conv_encode(bits: np.ndarray, g0: int, g1: int, k: int) -> np.ndarray:
    """Encode ``bits`` plus ``k - 1`` zero tail bits; two outputs per input."""
    tail = k - 1
    full = np.concatenate([np.asarray(bits, dtype=np.uint8), np.zeros(tail, dtype=np.uint8)])
    n = full.size
    taps0 = np.array([(g0 >> d) & 1 for d in range(k)], dtype=np.uint8)
    taps1 = np.array([(g1 >> d) & 1 for d in range(k)], dtype=np.uint8)
    y0 = np.convolve(full, taps0)[:n] & 1
    y1 = np.convolve(full, taps1)[:n] & 1
    out = np.empty(2 * n, dtype=np.uint8)
    out[0::2] = y0
    out[1::2] = y1
    return out


def viterbi_decode(soft: np.ndarray, g0: int, g1: int, k: int) -> tuple[np.ndarray, int]:
    """Maximum-metric zero-terminated path for integer soft inputs.

    Returns ``(info_bits, path_metric)`` where the metric of a branch with
    expected output bit ``b`` and soft value ``s`` is ``s`` if ``b`` else
    ``255 - s``. Ties go to the lower-numbered predecessor state.
    """
    t = _tables(g0, g1, k)
    pred0, pred1 = t["pred0"], t["pred1"]
    o00, o01, o10, o11 = t["o00"], t["o01"], t["o10"], t["o11"]
    odd = t["odd"]
    n_states = pred0.size
    n_steps = soft.size // 2
    n_info = n_steps - (k - 1)

    s0 = soft[0::2]
    s1 = soft[1::2]
    metrics = np.full(n_states, _NEG_INF, dtype=np.int64)
    metrics[0] = 0
    take = np.empty((n_steps, n_states), dtype=bool)
    for step in range(n_steps):
        a = int(s0[step])
        b = int(s1[step])
        base = 510 - a - b
        wa = 2 * a - 255
        wb = 2 * b - 255
        bm_lo = base + o00 * wa + o01 * wb
        bm_hi = base + o10 * wa + o11 * wb
        cand0 = metrics[pred0] + bm_lo
        cand1 = metrics[pred1] + bm_hi
        hi = cand1 > cand0
        metrics = np.where(hi, cand1, cand0)
        if step >= n_info:
            # tail steps admit only input bit 0, i.e. even successor states
            metrics[odd] = _NEG_INF
        take[step] = hi

    out = np.empty(n_steps, dtype=np.uint8)
    state = 0
    upper = n_states >> 1
    for step in range(n_steps - 1, -1, -1):
        out[step] = state & 1
        state = (state >> 1) | upper if take[step, state] else state >> 1
    return out[:n_info], int(metrics[0])
