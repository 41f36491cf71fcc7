"""Soft-output Viterbi decoding of the zero-tail convolutional code.

The forward pass is a standard add-compare-select over the 64-state trellis;
reliabilities of the maximum-likelihood path's coded bits are then refined
with the Hagenauer update along a fixed merge window: every competitor that
loses an ACS on the ML path caps the reliability of the coded bits on which
it disagrees.  Extrinsic output is the scaled difference between the output
reliabilities and the input LLRs, saturated at +/-l_max.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .demapper import L_MAX
from .txchain import CodeConfig

SOVA_WINDOW_FACTOR = 5
EXT_SCALE = 0.75
_REL_CAP = 1e9


@dataclass(frozen=True)
class TrellisState:
    """Transition and output tables of the code's shift-register trellis.

    State packs the previous constraint_len - 1 input bits, LSB newest.
    next_state[s, b] is the state after input b; out_bits[s, b] holds the
    two generator outputs for that branch.
    """

    n_states: int
    next_state: np.ndarray  # (S, 2) int32
    out_bits: np.ndarray  # (S, 2, 2) uint8


@lru_cache(maxsize=4)
def make_trellis(code: CodeConfig) -> TrellisState:
    k = code.constraint_len
    n_states = 1 << (k - 1)
    g0, g1 = code.taps
    next_state = np.empty((n_states, 2), dtype=np.int32)
    out_bits = np.empty((n_states, 2, 2), dtype=np.uint8)
    for s in range(n_states):
        reg = np.empty(k, dtype=np.uint8)
        reg[1:] = (s >> np.arange(k - 1)) & 1  # reg[j] = input delayed by j
        for b in (0, 1):
            reg[0] = b
            next_state[s, b] = ((s << 1) | b) & (n_states - 1)
            out_bits[s, b, 0] = int(reg @ g0) % 2
            out_bits[s, b, 1] = int(reg @ g1) % 2
    return TrellisState(n_states, next_state, out_bits)


def sova_decode(
    llr_in: np.ndarray,
    n_info: int,
    code: CodeConfig = CodeConfig(),
    window: int | None = None,
    ext_scale: float = EXT_SCALE,
    l_max: float = L_MAX,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode one terminated codeword from coded-bit LLRs.

    Args:
        llr_in: (2 * (n_info + n_tail),) coded-bit LLRs, ln(P1/P0).
        n_info: number of information bits in the codeword.
        code: code definition.
        window: merge window for reliability updates, default 5 * constraint_len.
        ext_scale: scaling applied to the extrinsic output.
        l_max: extrinsic saturation magnitude.

    Returns:
        (info_bits, ext_llr, post_llr): hard information decisions, extrinsic
        coded-bit LLRs and unscaled posterior coded-bit LLRs.
    """
    llr_in = np.ascontiguousarray(llr_in, dtype=np.float64)
    n_steps = n_info + code.n_tail
    if llr_in.shape != (2 * n_steps,):
        raise ValueError(
            f"expected {2 * n_steps} coded LLRs for {n_info} info bits, "
            f"got {llr_in.shape}"
        )
    if window is None:
        window = SOVA_WINDOW_FACTOR * code.constraint_len
    tr = make_trellis(code)
    out_f = tr.out_bits.astype(np.float64)
    info, coded, rel = _sova_kernel(
        llr_in, n_info, n_steps, tr.out_bits, out_f, int(window)
    )
    post = (2.0 * coded - 1.0) * np.minimum(rel, _REL_CAP)
    ext = np.clip(ext_scale * (post - llr_in), -l_max, l_max)
    return info, ext, post


@njit(cache=True)
def _sova_kernel(llr, n_info, n_steps, out_bits, out_f, window):
    n_states = out_bits.shape[0]
    top = n_states >> 1
    neg = -1.0e30

    metric = np.full(n_states, neg)
    metric[0] = 0.0
    dec = np.zeros((n_steps, n_states), dtype=np.uint8)
    delta = np.zeros((n_steps, n_states))

    for k in range(n_steps):
        l0 = llr[2 * k]
        l1 = llr[2 * k + 1]
        new_metric = np.full(n_states, neg)
        for sp in range(n_states):
            b = sp & 1
            if b == 1 and k >= n_info:
                continue  # tail steps force zero inputs
            p0 = sp >> 1
            p1 = p0 | top
            m0 = metric[p0] + out_f[p0, b, 0] * l0 + out_f[p0, b, 1] * l1
            m1 = metric[p1] + out_f[p1, b, 0] * l0 + out_f[p1, b, 1] * l1
            if m0 >= m1:
                new_metric[sp] = m0
                dec[k, sp] = 0
                delta[k, sp] = m0 - m1
            else:
                new_metric[sp] = m1
                dec[k, sp] = 1
                delta[k, sp] = m1 - m0
        metric = new_metric

    # traceback of the surviving path from the terminating zero state
    path = np.empty(n_steps + 1, dtype=np.int32)
    path[n_steps] = 0
    for k in range(n_steps - 1, -1, -1):
        s = path[k + 1]
        p = s >> 1
        if dec[k, s] == 1:
            p |= top
        path[k] = p

    info = np.empty(n_info, dtype=np.uint8)
    coded = np.empty(2 * n_steps, dtype=np.float64)
    for k in range(n_steps):
        b = path[k + 1] & 1
        if k < n_info:
            info[k] = b
        coded[2 * k] = out_bits[path[k], b, 0]
        coded[2 * k + 1] = out_bits[path[k], b, 1]

    # Hagenauer reliability update along the merge window
    rel = np.full(2 * n_steps, np.inf)
    for k in range(n_steps):
        sp = path[k + 1]
        b = sp & 1
        loser = path[k] ^ top  # the other predecessor of sp
        d = delta[k, sp]
        # branch into the merge state first, then walk the competitor back
        c = loser
        for j in range(2):
            if out_bits[c, b, j] != out_bits[path[k], b, j]:
                if d < rel[2 * k + j]:
                    rel[2 * k + j] = d
        for i in range(k - 1, max(k - window, 0) - 1, -1):
            if c == path[i + 1]:
                break  # competitor merged back into the ML path
            bc = c & 1
            cp = c >> 1
            if dec[i, c] == 1:
                cp |= top
            bm = path[i + 1] & 1
            for j in range(2):
                if out_bits[cp, bc, j] != out_bits[path[i], bm, j]:
                    if d < rel[2 * i + j]:
                        rel[2 * i + j] = d
            c = cp
    return info, coded, rel
