"""Pipelined iterative receiver: 2 * n_itr module slots working in lock step.

One OFDM symbol enters the pipeline per time step and moves through
demapper/decoder modules alternately, one module per step.  All modules run
on register contents latched at the previous step, so the channel estimator
update of a step takes effect one step later, and the estimator's feedback
window collects the latched outputs of the symbols that have completed
between 2 and 2 * n_itr - 1 modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import decoder as dec
from .analysis import measure_mi
from .demapper import (
    L_MAX,
    LlrFrame,
    SoftSymbolFrame,
    map_demap,
    mmse_demap,
    soft_symbol_stats,
)
from .estimator import FeedbackRow
from .txchain import PacketLayout, TxPacket, to_codeword_order, to_tx_domain


@dataclass
class SlotRecord:
    """Latched output of one module for the symbol it processed last step."""

    symbol_id: int
    source: str  # "dem" or "dec"
    ext: np.ndarray  # (n_sc, n_tx, Q) extrinsic LLRs, transmit-bit order
    soft: SoftSymbolFrame
    info_bits: np.ndarray | None = None


@dataclass
class PipelineState:
    """Receiver registers: one slot per module plus decided symbols."""

    n_itr: int
    slots: list[SlotRecord | None] = field(init=False)
    n: int = 0
    decided: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.slots = [None] * (2 * self.n_itr)


def feedback_window(state: PipelineState, z_data: np.ndarray) -> list[FeedbackRow]:
    """Ordered feedback rows, newest first.

    Row f comes from the symbol that has completed f + 2 modules; decoder
    outputs sit at even completed counts, demapper outputs at odd ones.
    """
    rows = []
    for k in range(2, 2 * state.n_itr):
        rec = state.slots[k - 1]
        if rec is None:
            continue
        rows.append(
            FeedbackRow(
                symbol_id=rec.symbol_id,
                stage=k,
                source=rec.source,
                soft=rec.soft,
                z=z_data[rec.symbol_id],
            )
        )
    return rows


@dataclass
class PacketResult:
    decoded: dict[int, np.ndarray]
    packet_error: bool
    bit_errors: int
    mse_trace: np.ndarray | None
    mi_dem_in: np.ndarray | None = None
    mi_dem_out: np.ndarray | None = None
    kept_fraction: float = 1.0
    corr: dict | None = None
    final_mse: float | None = None


class _Modules:
    """Per-packet context shared by every module pass."""

    def __init__(
        self,
        packet: TxPacket,
        z_data: np.ndarray,
        demap_kind: str = "auto",
        l_max: float = L_MAX,
    ):
        self.layout: PacketLayout = packet.layout
        self.mod = self.layout.modulation
        self.packet = packet
        self.z_data = z_data
        self.l_max = l_max
        n_hyp = self.mod.order**self.layout.n_tx
        if demap_kind == "auto":
            demap_kind = "map" if n_hyp <= 4096 else "mmse"
        self.demap_kind = demap_kind
        self._blank_priors = {}

    def blank_priors(self, i_sym: int):
        """First-pass priors: zero for codeword bits, pinned for known filler."""
        if i_sym not in self._blank_priors:
            k_cw = self.layout.codeword_len(i_sym)
            prior, mask = to_tx_domain(np.zeros(k_cw), -self.l_max, self.layout, i_sym)
            self._blank_priors[i_sym] = (
                prior,
                soft_symbol_stats(prior, self.mod),
                mask,
            )
        return self._blank_priors[i_sym]

    def filler_mask(self, i_sym: int) -> np.ndarray:
        return self.blank_priors(i_sym)[2]

    def demap(
        self,
        i_sym: int,
        prev: SlotRecord | None,
        h_hat: np.ndarray,
        noise_for,
        n0: float,
    ) -> SlotRecord:
        if prev is None:
            prior, prior_soft, _ = self.blank_priors(i_sym)
        else:
            prior, prior_soft = prev.ext, prev.soft
        n0_eff = noise_for(prior_soft.mean)
        z = self.z_data[i_sym]
        if self.demap_kind == "map":
            _, ext = map_demap(z, h_hat, n0_eff, prior, self.mod, self.l_max)
        else:
            err_cov = np.maximum(n0_eff - n0, 0.0)
            _, _, ext = mmse_demap(z, h_hat, err_cov, n0, prior, self.mod, self.l_max)
        filler = self.filler_mask(i_sym)
        ext_arr = np.where(filler, -self.l_max, ext.llr)  # known bits stay pinned
        return SlotRecord(
            i_sym, "dem", ext_arr, soft_symbol_stats(ext_arr, self.mod)
        )

    def decode(self, i_sym: int, prev: SlotRecord) -> SlotRecord:
        cw_llr = to_codeword_order(prev.ext, self.layout, i_sym)
        info, ext_cw, _ = dec.sova_decode(
            cw_llr, self.layout.info_split[i_sym], self.layout.code, l_max=self.l_max
        )
        ext_arr, _ = to_tx_domain(ext_cw, -self.l_max, self.layout, i_sym)
        return SlotRecord(
            i_sym, "dec", ext_arr, soft_symbol_stats(ext_arr, self.mod), info
        )


def advance(
    state: PipelineState,
    ctx: _Modules,
    new_symbol_id: int | None,
    h_hat: np.ndarray,
    noise_for,
    n0: float,
) -> PipelineState:
    """Run every occupied module slot once, all on last step's registers."""
    old = state.slots
    new_slots: list[SlotRecord | None] = [None] * len(old)
    if new_symbol_id is not None:
        new_slots[0] = ctx.demap(new_symbol_id, None, h_hat, noise_for, n0)
    for k in range(2, 2 * state.n_itr + 1):
        prev = old[k - 2]
        if prev is None:
            continue
        if k % 2 == 1:
            new_slots[k - 1] = ctx.demap(prev.symbol_id, prev, h_hat, noise_for, n0)
        else:
            new_slots[k - 1] = ctx.decode(prev.symbol_id, prev)
    final = new_slots[2 * state.n_itr - 1]
    if final is not None:
        state.decided[final.symbol_id] = final.info_bits
    state.slots = new_slots
    state.n += 1
    return state


def run_packet(
    packet: TxPacket,
    z_all: np.ndarray,
    estimator,
    n_itr: int = 7,
    n0: float = 1.0,
    h_true: np.ndarray | None = None,
    demap_kind: str = "auto",
    collect_mi: bool = False,
    collect_corr: bool = False,
    l_max: float = L_MAX,
) -> PacketResult:
    """Receive one packet end to end with the pipelined turbo receiver.

    Args:
        packet: transmitted packet (ground truth for error counting).
        z_all: (n_train + n_sym, n_sc, n_rx) received grid, training first.
        estimator: object with init_from_preamble/step/h_hat/noise_for.
        n_itr: demapper/decoder iteration pairs.
        n0: channel noise variance.
        h_true: (n_sc, n_rx, n_tx) true response for MSE diagnostics.
        demap_kind: "map", "mmse" or "auto".
        collect_mi: record per-stage demapper mutual information.
        collect_corr: accumulate lag-2 innovation statistics (steady state).

    Returns:
        PacketResult with decisions and diagnostics.
    """
    layout = packet.layout
    n_tr = layout.n_train_sym
    z_pre, z_data = z_all[:n_tr], z_all[n_tr:]
    estimator.init_from_preamble(z_pre, layout.train_matrix)

    ctx = _Modules(packet, z_data, demap_kind, l_max)
    state = PipelineState(n_itr)
    n_total = layout.n_sym + 2 * n_itr
    mse_trace = np.full(n_total, np.nan) if h_true is not None else None
    kept = total = 0
    corr = _CorrAccumulator(2 * n_itr - 2) if collect_corr else None

    for n in range(1, n_total + 1):
        h_used = estimator.h_hat
        noise_used = estimator.noise_for
        rows = feedback_window(state, z_data)
        diag = estimator.step(rows, h_true=h_true)
        if mse_trace is not None:
            mse_trace[n - 1] = diag.mse
        kept += diag.rows_kept
        total += diag.rows_total
        if corr is not None:
            corr.push(estimator)
        new_sym = n - 1 if n <= layout.n_sym else None
        state = advance(state, ctx, new_sym, h_used, noise_used, n0)

    bit_errors = 0
    for m in range(layout.n_sym):
        bit_errors += int(np.sum(state.decided[m] != packet.info_bits[m]))
    result = PacketResult(
        decoded=state.decided,
        packet_error=bit_errors > 0,
        bit_errors=bit_errors,
        mse_trace=mse_trace,
        kept_fraction=kept / total if total else 1.0,
        corr=corr.matrices() if corr is not None else None,
        final_mse=float(mse_trace[-1]) if mse_trace is not None else None,
    )
    if collect_mi:
        result.mi_dem_in, result.mi_dem_out = _measure_stage_mi(
            packet, z_data, estimator, ctx, n_itr, n0
        )
    return result


class _CorrAccumulator:
    """Steady-state lag-2 innovation cross-moments, raw and punctured."""

    def __init__(self, n_f: int):
        self.n_f = n_f
        self.xx = np.zeros((n_f, n_f), dtype=complex)
        self.yy = np.zeros((n_f, n_f), dtype=complex)
        self.pxp = np.zeros(n_f)  # window-slot powers, lagged and current
        self.pxn = np.zeros(n_f)
        self.pyp = np.zeros(n_f)
        self.pyn = np.zeros(n_f)
        self.e0 = 0.0
        self.count = 0
        self._buf: list[tuple[np.ndarray, np.ndarray]] = []

    def push(self, estimator) -> None:
        x = getattr(estimator, "last_x", None)
        keep = getattr(estimator, "last_keep", None)
        if x is None or x.shape[-1] != self.n_f:
            self._buf.clear()
            return
        self._buf.append((x, keep))
        if len(self._buf) < 3:
            return
        x_prev, keep_prev = self._buf.pop(0)
        y, y_prev = x * keep, x_prev * keep_prev
        cells = x.shape[0] * x.shape[1]
        self.xx += np.einsum("sri,srj->ij", x_prev, x.conj()) / cells
        self.yy += np.einsum("sri,srj->ij", y_prev, y.conj()) / cells
        self.pxp += np.mean(np.abs(x_prev) ** 2, axis=(0, 1))
        self.pxn += np.mean(np.abs(x) ** 2, axis=(0, 1))
        self.pyp += np.mean(np.abs(y_prev) ** 2, axis=(0, 1))
        self.pyn += np.mean(np.abs(y) ** 2, axis=(0, 1))
        self.e0 += float(np.mean(np.abs(x[:, :, 0]) ** 2))
        self.count += 1

    def matrices(self) -> dict:
        if self.count == 0:
            return {"count": 0}
        k = float(self.count)
        return {
            "xx": self.xx / k,
            "yy": self.yy / k,
            "pxp": self.pxp / k,
            "pxn": self.pxn / k,
            "pyp": self.pyp / k,
            "pyn": self.pyn / k,
            "e0": self.e0 / k,
            "count": self.count,
        }


def _measure_stage_mi(packet, z_data, estimator, ctx, n_itr, n0):
    """Per-stage demapper MI over the packet, final channel state, no feedback.

    Runs the module chain sequentially per symbol with the estimator frozen
    at its end-of-packet value; used for trajectory reporting only.
    """
    layout = packet.layout
    mi_in = [[] for _ in range(n_itr)]
    mi_out = [[] for _ in range(n_itr)]
    h = estimator.h_hat
    noise_for = estimator.noise_for
    for m in range(layout.n_sym):
        good = ~ctx.filler_mask(m)
        bits = packet.tx_bits[m][good]
        rec = None
        for i in range(n_itr):
            prior = rec.ext if rec is not None else ctx.blank_priors(m)[0]
            rec_dem = ctx.demap(m, rec, h, noise_for, n0)
            mi_in[i].append((prior[good], bits))
            mi_out[i].append((rec_dem.ext[good], bits))
            rec = ctx.decode(m, rec_dem)
    f_in = np.array(
        [measure_mi(np.concatenate([a for a, _ in s]), np.concatenate([b for _, b in s]))
         for s in mi_in]
    )
    f_out = np.array(
        [measure_mi(np.concatenate([a for a, _ in s]), np.concatenate([b for _, b in s]))
         for s in mi_out]
    )
    return f_in, f_out
