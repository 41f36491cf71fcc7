"""Slow, independent reference implementations used only by the tests.

Everything here is written from first principles with deliberately different
data layouts than the library (tuple-keyed trellises, per-tone loops, plain
accumulation) so that agreement is evidence rather than tautology.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.integrate import quad

from turbokal.demapper import L_MAX, soft_symbol_stats
from turbokal.txchain import CodeConfig, ModulationConfig, to_codeword_order, to_tx_domain


# ---------------------------------------------------------------------------
# convolutional code


def encode_by_register(info_bits, code: CodeConfig) -> np.ndarray:
    """Shift-register walk, bit by bit, tail appended.  No convolve, no trellis."""
    g0, g1 = code.taps
    reg = [0] * code.constraint_len
    out = []
    for b in list(np.asarray(info_bits, dtype=int)) + [0] * code.n_tail:
        reg = [int(b)] + reg[:-1]
        out.append(sum(r * t for r, t in zip(reg, g0)) % 2)
        out.append(sum(r * t for r, t in zip(reg, g1)) % 2)
    return np.array(out, dtype=np.uint8)


def _oracle_trellis(code: CodeConfig):
    """Trellis keyed by bit tuples, oldest input first (opposite packing
    to the library, which keeps the newest bit in the LSB of an int)."""
    k = code.constraint_len
    g0, g1 = (tuple(int(v) for v in t) for t in code.taps)
    states = list(itertools.product((0, 1), repeat=k - 1))
    step = {}
    for st in states:
        for b in (0, 1):
            reg = (b,) + st[::-1]  # newest first for the tap dot product
            o0 = sum(r * t for r, t in zip(reg, g0)) % 2
            o1 = sum(r * t for r, t in zip(reg, g1)) % 2
            nxt = st[1:] + (b,)  # oldest-first state tuple
            step[st, b] = (nxt, o0, o1)
    return states, step


def viterbi_hard(llr: np.ndarray, n_info: int, code: CodeConfig) -> np.ndarray:
    """Max-likelihood hard decisions from coded-bit LLRs, one frame.

    Maximizes sum of bit * llr over zero-terminated paths.
    """
    states, step = _oracle_trellis(code)
    n_steps = n_info + code.n_tail
    llr = np.asarray(llr, dtype=float)
    assert llr.shape == (2 * n_steps,)
    zero = (0,) * (code.constraint_len - 1)
    metric = {zero: 0.0}
    back = []
    for i in range(n_steps):
        l0, l1 = llr[2 * i], llr[2 * i + 1]
        nxt_metric: dict = {}
        nxt_back: dict = {}
        for st, m in metric.items():
            for b in (0, 1) if i < n_info else (0,):
                nxt, o0, o1 = step[st, b]
                cand = m + o0 * l0 + o1 * l1
                if nxt not in nxt_metric or cand > nxt_metric[nxt]:
                    nxt_metric[nxt] = cand
                    nxt_back[nxt] = (st, b)
        metric, back_i = nxt_metric, nxt_back
        back.append(back_i)
    st = zero
    bits = []
    for i in reversed(range(n_steps)):
        st, b = back[i][st]
        bits.append(b)
    return np.array(bits[::-1][:n_info], dtype=np.uint8)


def viterbi_hard_batch(llr: np.ndarray, n_info: int, code: CodeConfig) -> np.ndarray:
    """Vectorized variant of viterbi_hard over a batch of frames.

    Same math, array state; packing differs from the library: here the
    OLDEST surviving input sits in the LSB.
    """
    code_k = code.constraint_len
    n_states = 1 << (code_k - 1)
    half = n_states >> 1
    g0, g1 = code.taps
    # Arrival-indexed trellis: state t holds the last k-1 inputs with the
    # NEWEST in the MSB, so the input consumed on any edge into t is t's MSB
    # and the two incoming edges differ only in the dropped oldest bit a.
    src = np.empty((n_states, 2), dtype=np.int64)
    eout = np.empty((n_states, 2, 2), dtype=np.float64)
    for t in range(n_states):
        b = t >> (code_k - 2)
        for a in (0, 1):
            s = ((t & (half - 1)) << 1) | a
            src[t, a] = s
            st = [(s >> j) & 1 for j in range(code_k - 1)]  # oldest in LSB
            reg = [b] + st[::-1]
            eout[t, a, 0] = sum(r * g for r, g in zip(reg, g0)) % 2
            eout[t, a, 1] = sum(r * g for r, g in zip(reg, g1)) % 2
    llr = np.asarray(llr, dtype=float)
    n_frames = llr.shape[0]
    n_steps = n_info + code.n_tail
    neg_inf = -1e30
    metric = np.full((n_frames, n_states), neg_inf)
    metric[:, 0] = 0.0
    choice = np.empty((n_steps, n_frames, n_states), dtype=np.uint8)
    for i in range(n_steps):
        gain = (
            eout[:, :, 0] * llr[:, None, None, 2 * i]
            + eout[:, :, 1] * llr[:, None, None, 2 * i + 1]
        )  # (n_frames, n_states, 2); [f, t, a] = gain of edge src[t, a] -> t
        cand = metric[:, src] + gain
        best = cand.argmax(axis=2).astype(np.uint8)
        metric = np.take_along_axis(cand, best[:, :, None], axis=2)[:, :, 0]
        if i >= n_info:  # tail forces b = 0; arrival bit is the MSB
            metric[:, half:] = neg_inf
        choice[i] = best
    bits = np.empty((n_frames, n_steps), dtype=np.uint8)
    state = np.zeros(n_frames, dtype=np.int64)
    rows = np.arange(n_frames)
    for i in reversed(range(n_steps)):
        bits[:, i] = state >> (code_k - 2)
        state = src[state, choice[i][rows, state]]
    return bits[:, :n_info]


# ---------------------------------------------------------------------------
# demapper


def map_demap_bruteforce(z, h, n0_eff, prior_llr, mod: ModulationConfig):
    """Exact MAP extrinsic LLRs by plain loops over tones and joint hypotheses."""
    n_sc, n_rx, n_tx = h.shape
    q = mod.bits_per_symbol
    post = np.empty((n_sc, n_tx, q))
    for f in range(n_sc):
        lp = []  # (log weight, bits) per joint hypothesis
        for combo in itertools.product(range(mod.order), repeat=n_tx):
            s = np.array([mod.points[c] for c in combo])
            d = z[f] - h[f] @ s
            metric = -np.sum(np.abs(d) ** 2 / n0_eff[f])
            bits = np.concatenate([mod.bit_table[c] for c in combo])
            logp = metric
            for t in range(n_tx):
                for j in range(q):
                    l = prior_llr[f, t, j]
                    b = mod.bit_table[combo[t], j]
                    logp += -np.logaddexp(0.0, -l) if b else -np.logaddexp(0.0, l)
            lp.append((logp, bits))
        logw = np.array([w for w, _ in lp])
        tab = np.array([b for _, b in lp], dtype=bool)
        logw -= logw.max()
        w = np.exp(logw)
        for t in range(n_tx):
            for j in range(q):
                col = tab[:, t * q + j]
                post[f, t, j] = np.log(w[col].sum()) - np.log(w[~col].sum())
    ext = post - prior_llr
    return np.clip(post, -L_MAX, L_MAX), np.clip(ext, -L_MAX, L_MAX)


# ---------------------------------------------------------------------------
# estimation


def lmmse_batch(z_rows, s_rows, v, rho):
    """One-shot regularized LS estimate  (S^H S + v R^-1)^-1 S^H z  per tone/rx.

    Args:
        z_rows: (n_d, n_sc, n_rx)
        s_rows: (n_d, n_sc, n_tx) regressor rows (soft symbol means).
        v: scalar or (n_rx,) noise power used for regularization.
        rho: (n_rx, n_tx) prior channel power.

    Returns:
        (n_sc, n_rx, n_tx) estimate.
    """
    n_d, n_sc, n_rx = z_rows.shape
    n_tx = s_rows.shape[2]
    v = np.broadcast_to(np.asarray(v, dtype=float), (n_rx,))
    h = np.empty((n_sc, n_rx, n_tx), dtype=complex)
    for f in range(n_sc):
        s = s_rows[:, f, :]
        gram = s.conj().T @ s
        for r in range(n_rx):
            a = gram + v[r] * np.diag(1.0 / rho[r])
            h[f, r] = np.linalg.solve(a, s.conj().T @ z_rows[:, f, r])
    return h


def kalman_reference_step(h_prev, p_prev, z_rows, s_rows, var_rows, keep, n0):
    """Information-form update for one tone and one rx antenna, plain loops.

    Args:
        h_prev: (n_tx,) prior mean.
        p_prev: (n_tx, n_tx) prior covariance.
        z_rows: (n_d,) observations.
        s_rows: (n_d, n_tx) soft symbol rows.
        var_rows: (n_d,) per-row decision-error variance totals (already
            summed over streams, scaled by channel power), excluding n0.
        keep: (n_d,) bool puncture mask.
        n0: channel noise variance.

    Returns:
        (h_new, p_new).
    """
    n_tx = h_prev.shape[0]
    p_inv = np.linalg.inv(p_prev)
    m = p_inv.astype(complex).copy()
    rhs = np.zeros(n_tx, dtype=complex)
    for d in range(len(z_rows)):
        if not keep[d]:
            continue
        w = 1.0 / (var_rows[d] + n0)
        s = s_rows[d]
        m += w * np.outer(s.conj(), s)
        rhs += w * s.conj() * (z_rows[d] - s @ h_prev)
    p_new = np.linalg.inv(m)
    h_new = h_prev + p_new @ rhs
    return h_new, p_new


# ---------------------------------------------------------------------------
# mutual information


def j_function(sigma: float) -> float:
    """MI of a consistent Gaussian LLR channel, by numerical integration.

    L | b ~ N((2b-1) sigma^2 / 2, sigma^2);  J(sigma) in [0, 1].
    """
    if sigma < 1e-9:
        return 0.0
    s2 = sigma * sigma

    def integrand(l):
        pdf = np.exp(-((l - s2 / 2.0) ** 2) / (2.0 * s2)) / np.sqrt(2.0 * np.pi * s2)
        return pdf * np.log2(1.0 + np.exp(-l))

    val, _ = quad(integrand, -40.0 * sigma, 40.0 * sigma, limit=200)
    return 1.0 - val


def gaussian_llrs(rng, bits, sigma):
    """Draw LLRs from the consistent Gaussian model given true bits."""
    mu = (2.0 * bits - 1.0) * sigma * sigma / 2.0
    return mu + sigma * rng.standard_normal(bits.shape)


# ---------------------------------------------------------------------------
# non-pipelined turbo receiver


def idd_sequential(packet, z_data, h, n0, n_itr, demap_fn, l_max=L_MAX):
    """Classic iterative detection and decoding, one OFDM symbol at a time.

    With a fixed channel estimate there is no coupling between symbols, so
    each symbol independently alternates demap and decode n_itr times.

    Args:
        packet: TxPacket.
        z_data: (n_sym, n_sc, n_rx) received data symbols.
        h: (n_sc, n_rx, n_tx) fixed channel estimate.
        n0: noise variance (also used as the effective noise, i.e. the
            estimate is trusted completely).
        n_itr: number of demap/decode rounds.
        demap_fn: map_demap-compatible callable.

    Returns:
        list of per-symbol hard info-bit arrays.
    """
    from turbokal.decoder import sova_decode

    layout = packet.layout
    mod = layout.modulation
    n_sc = layout.n_sc
    n_rx = z_data.shape[2]
    n0_eff = np.full((n_sc, n_rx), float(n0))
    decided = []
    for m in range(layout.n_sym):
        _, filler = to_tx_domain(
            np.zeros(layout.codeword_len(m)), True, layout, m
        )
        prior = np.zeros((n_sc, layout.n_tx, mod.bits_per_symbol))
        prior[filler] = -l_max
        info = None
        for _ in range(n_itr):
            _, ext_dem = demap_fn(z_data[m], h, n0_eff, prior, mod)
            dem_llr = np.where(filler, -l_max, ext_dem.llr)
            cw_llr = to_codeword_order(dem_llr, layout, m)
            info, ext_dec, _ = sova_decode(
                cw_llr, layout.info_split[m], layout.code
            )
            prior, _ = to_tx_domain(ext_dec, -l_max, layout, m)
        decided.append(info)
    return decided
