"""Soft MIMO demappers: exact MAP over joint hypotheses and an MMSE variant.

Both demappers consume per-bit prior LLRs, work tone by tone (vectorized
across tones) and emit posterior plus extrinsic per-bit LLRs.  LLRs follow
the ln(P[b=1]/P[b=0]) convention and saturate at +/-l_max.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .txchain import ModulationConfig

L_MAX = 30.0


@dataclass
class LlrFrame:
    """Per (tone, stream, bit) LLRs plus a saturation marker."""

    llr: np.ndarray
    saturated: bool = False


@dataclass
class SoftSymbolFrame:
    """First- and second-order per-stream symbol statistics."""

    mean: np.ndarray  # (n_sc, n_tx) complex
    var: np.ndarray  # (n_sc, n_tx) real, >= 0


@dataclass
class EffectiveNoise:
    """Per (tone, rx) noise-plus-estimation-error variance seen by a demapper."""

    per_rx: np.ndarray  # (n_sc, n_rx)


def _log_bit_probs(llr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(log P[b=0], log P[b=1]) from LLRs, numerically safe at saturation."""
    lp1 = -np.logaddexp(0.0, -llr)
    lp0 = -np.logaddexp(0.0, llr)
    return lp0, lp1


def bit_probs_from_llr(llr: np.ndarray, mod: ModulationConfig) -> np.ndarray:
    """Per-symbol probabilities from independent per-bit LLRs.

    Args:
        llr: (..., Q) prior LLRs for one stream's symbol.
        mod: constellation description.

    Returns:
        (..., order) probabilities over the constellation, summing to one.
    """
    lp0, lp1 = _log_bit_probs(np.asarray(llr, dtype=float))
    bits = mod.bit_table.astype(float)  # (M, Q)
    logp = lp1 @ bits.T + lp0 @ (1.0 - bits).T
    p = np.exp(logp - logp.max(axis=-1, keepdims=True))
    return p / p.sum(axis=-1, keepdims=True)


def soft_symbol_stats(llr: np.ndarray, mod: ModulationConfig) -> SoftSymbolFrame:
    """Soft symbol mean and variance per (tone, stream) from bit LLRs."""
    p = bit_probs_from_llr(llr, mod)
    mean = p @ mod.points
    e2 = p @ np.abs(mod.points) ** 2
    var = np.maximum(e2 - np.abs(mean) ** 2, 0.0)
    return SoftSymbolFrame(mean, var)


@lru_cache(maxsize=8)
def _joint_tables(order: int, n_tx: int) -> tuple[np.ndarray, np.ndarray]:
    """Joint hypothesis tables: symbols (n_tx, M^n_tx) and bits (M^n_tx, n_tx*Q)."""
    mod = ModulationConfig(order)
    n_hyp = order**n_tx
    if n_hyp > 65536:
        raise ValueError(f"{order}-QAM with {n_tx} streams is too large for MAP")
    idx = np.arange(n_hyp)
    sym = np.empty((n_tx, n_hyp), dtype=complex)
    bits = np.empty((n_hyp, n_tx * mod.bits_per_symbol), dtype=np.float64)
    for t in range(n_tx):
        # stream 0 varies slowest so bit blocks keep stream-major order
        part = (idx // order ** (n_tx - 1 - t)) % order
        sym[t] = mod.points[part]
        q = mod.bits_per_symbol
        bits[:, t * q : (t + 1) * q] = mod.bit_table[part]
    return sym, bits


def map_demap(
    z: np.ndarray,
    h: np.ndarray,
    n0_eff: np.ndarray,
    prior_llr: np.ndarray,
    mod: ModulationConfig,
    l_max: float = L_MAX,
) -> tuple[LlrFrame, LlrFrame]:
    """Exact MAP demapping by enumeration of all joint stream hypotheses.

    Args:
        z: (n_sc, n_rx) received samples.
        h: (n_sc, n_rx, n_tx) channel estimate.
        n0_eff: (n_sc, n_rx) effective noise variance per receive antenna.
        prior_llr: (n_sc, n_tx, Q) prior LLRs.
        mod: constellation description.
        l_max: saturation magnitude for the returned LLRs.

    Returns:
        (posterior, extrinsic) LLR frames of shape (n_sc, n_tx, Q).
    """
    n_sc, n_rx, n_tx = h.shape
    q = mod.bits_per_symbol
    sym, bits = _joint_tables(mod.order, n_tx)

    hs = np.einsum("frt,th->frh", h, sym)
    d2 = np.abs(z[:, :, None] - hs) ** 2
    metric = -np.einsum("frh,fr->fh", d2, 1.0 / n0_eff)

    prior = np.asarray(prior_llr, dtype=float).reshape(n_sc, n_tx * q)
    lp0, lp1 = _log_bit_probs(prior)
    total = metric + lp1 @ bits.T + lp0 @ (1.0 - bits).T

    w = np.exp(total - total.max(axis=1, keepdims=True))
    pos = w @ bits
    neg = w @ (1.0 - bits)
    with np.errstate(divide="ignore"):
        post = np.log(pos) - np.log(neg)
    ext = post - prior

    post = np.clip(post, -l_max, l_max).reshape(n_sc, n_tx, q)
    ext_clipped = np.clip(ext, -l_max, l_max)
    saturated = bool(np.any(np.abs(ext) > l_max))
    return (
        LlrFrame(post, bool(np.any(np.abs(post) >= l_max))),
        LlrFrame(ext_clipped.reshape(n_sc, n_tx, q), saturated),
    )


def mmse_demap(
    z: np.ndarray,
    h: np.ndarray,
    est_err_cov: np.ndarray,
    n0: float,
    prior_llr: np.ndarray,
    mod: ModulationConfig,
    l_max: float = L_MAX,
) -> tuple[np.ndarray, LlrFrame, LlrFrame]:
    """Soft-interference-cancelling MMSE demapper.

    The returned soft symbol estimate is the joint conditional-mean filter
    output; LLRs come from per-stream detection where the probed stream is
    treated as fully unknown and the residual is modeled as Gaussian with
    gain mu_t and variance mu_t * (1 - mu_t) * E_s.

    Args:
        z: (n_sc, n_rx) received samples.
        h: (n_sc, n_rx, n_tx) channel estimate.
        est_err_cov: (n_sc, n_rx) channel-estimation error variance.
        n0: channel noise variance.
        prior_llr: (n_sc, n_tx, Q) prior LLRs.
        mod: constellation description.
        l_max: saturation magnitude.

    Returns:
        (s_hat, posterior frame, extrinsic frame).
    """
    n_sc, n_rx, n_tx = h.shape
    q = mod.bits_per_symbol
    es = float(np.mean(np.abs(mod.points) ** 2))
    soft = soft_symbol_stats(prior_llr, mod)

    hvh = np.einsum("frt,ft,fut->fru", h, soft.var, h.conj())
    rzz = hvh + _eye_scaled(est_err_cov + n0, n_rx)
    resid = z - np.einsum("frt,ft->fr", h, soft.mean)

    y = np.linalg.solve(rzz, resid[..., None])[..., 0]
    s_hat = soft.mean + soft.var * np.einsum("frt,fr->ft", h.conj(), y)

    post = np.empty((n_sc, n_tx, q))
    ext = np.empty((n_sc, n_tx, q))
    prior = np.asarray(prior_llr, dtype=float)
    bit_tab = mod.bit_table.astype(float)
    for t in range(n_tx):
        ht = h[:, :, t]
        # probed stream back to full uncertainty, others keep their priors
        rt = rzz + np.einsum("fr,fu->fru", ht * (es - soft.var[:, t, None]), ht.conj())
        zt = resid + ht * soft.mean[:, t, None]
        yt = np.linalg.solve(rt, zt[..., None])[..., 0]
        raw = es * np.einsum("fr,fr->f", ht.conj(), yt)
        mu = es * np.einsum("fr,fr->f", ht.conj(), np.linalg.solve(rt, ht[..., None])[..., 0])
        mu = np.maximum(mu.real, 0.0)
        var = np.maximum(mu * (1.0 - mu) * es, 1e-30)
        usable = mu > 1e-12

        metric = -(np.abs(raw[:, None] - mu[:, None] * mod.points[None, :]) ** 2) / var[:, None]
        metric[~usable] = 0.0
        lp0, lp1 = _log_bit_probs(prior[:, t, :])
        total = metric + lp1 @ bit_tab.T + lp0 @ (1.0 - bit_tab).T
        w = np.exp(total - total.max(axis=1, keepdims=True))
        pos = w @ bit_tab
        neg = w @ (1.0 - bit_tab)
        with np.errstate(divide="ignore"):
            lpost = np.log(pos) - np.log(neg)
        post[:, t, :] = lpost
        ext[:, t, :] = lpost - prior[:, t, :]

    post_c = np.clip(post, -l_max, l_max)
    ext_c = np.clip(ext, -l_max, l_max)
    return (
        s_hat,
        LlrFrame(post_c, bool(np.any(np.abs(post) >= l_max))),
        LlrFrame(ext_c, bool(np.any(np.abs(ext) > l_max))),
    )


def _eye_scaled(diag: np.ndarray, n: int) -> np.ndarray:
    """(..., n, n) array with diag broadcast onto the diagonal."""
    out = np.zeros(diag.shape[:-1] + (n, n), dtype=float)
    idx = np.arange(n)
    out[..., idx, idx] = diag
    return out
