"""Soft-decision-directed sequential MIMO channel estimation, one filter per
(receive antenna, tone).

Every pipeline step stacks the soft decisions the in-flight modules produced
for the symbols still in the window into a small observation block.  The
innovation of each row is screened against the same symbol's innovation from
two steps earlier (the previous pass of the same module type); rows whose
lag-2 innovation correlation exceeds c * N0 are punctured before the Kalman
update so that reused decision errors do not re-enter the filter.  The two
newest rows are always kept.

Reference single-tone operations are provided alongside the batched
implementation used by the pipeline; both compute the same recursion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .demapper import SoftSymbolFrame

P_COND_LIMIT = 1e12
P_REG_EPS = 1e-12
_DIAG_IMAG_TOL = 1e-10


class BaselineKind(Enum):
    INITIAL_ONLY = "initial"
    SONG_KALMAN = "song"
    EM_DD = "emdd"


@dataclass
class FeedbackRow:
    """One row of the stacked observation block for one pipeline step."""

    symbol_id: int
    stage: int  # modules completed by this symbol (2 .. 2*n_itr - 1)
    source: str  # "dec" for decoder output, "dem" for demapper output
    soft: SoftSymbolFrame  # per-tone soft decisions, (n_sc, n_tx)
    z: np.ndarray  # (n_sc, n_rx) received samples of this OFDM symbol


@dataclass
class EstimatorState:
    """Per-(tone, rx) filter state: estimate, covariance and innovation history."""

    h_hat: np.ndarray  # (n_sc, n_rx, n_tx)
    p: np.ndarray  # (n_sc, n_rx, n_tx, n_tx)
    p_inv: np.ndarray  # (n_sc, n_rx, n_tx, n_tx)
    n: int = 0
    hist: list[dict[int, np.ndarray]] = field(default_factory=lambda: [{}, {}])


@dataclass
class StepDiag:
    """Per-step estimator diagnostics."""

    n: int
    n_rows: int
    rows_kept: int
    rows_total: int
    beta_abs_mean: float
    trace_p: float
    mse: float | None = None


# ---------------------------------------------------------------------------
# reference single-(rx, tone) operations
# ---------------------------------------------------------------------------


def est_init(
    z_pre: np.ndarray, s_tr: np.ndarray, n0: float, es: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Initial estimate and covariance from the orthogonal preamble.

    Args:
        z_pre: (n_train,) received preamble samples of one (rx, tone).
        s_tr: (n_train, n_tx) training matrix with s_tr.T @ s_tr = n_train * I.
        n0: noise variance.
        es: per-stream symbol energy.

    Returns:
        (h0, p0): least-squares estimate and its diagonal covariance model.
    """
    n_train, n_tx = s_tr.shape
    h0 = s_tr.T @ z_pre / n_train
    gamma = es / (n_tx * n0)
    mag2 = np.abs(h0) ** 2
    p0 = np.diag(mag2 / (gamma * mag2 + 1.0))
    return h0, p0


def residual(z_rows: np.ndarray, s_rows: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """Innovation x = z - S_tilde @ h for one (rx, tone)."""
    return z_rows - s_rows @ h_prev


def correlation_measure(x_now: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
    """Lag-2 innovation correlation per row.

    x_prev[f] must hold the same symbol's innovation from two steps earlier
    (NaN where that history does not exist); the measure is the real inner
    product Re(a)Re(b) + Im(a)Im(b).
    """
    return np.real(x_prev) * np.real(x_now) + np.imag(x_prev) * np.imag(x_now)


def build_puncturer(beta: np.ndarray, c: float, n0: float) -> np.ndarray:
    """Row-selection matrix G keeping weakly correlated rows.

    Row f survives when |beta[f]| <= c * n0, when it is one of the two newest
    window rows, or when beta is undefined (NaN).
    """
    beta = np.asarray(beta, dtype=float)
    keep = np.isnan(beta) | (np.abs(beta) <= c * n0)
    keep[:2] = True
    return np.eye(beta.size)[keep]


def q_matrix(p: np.ndarray, h_prev: np.ndarray, var_rows: np.ndarray) -> np.ndarray:
    """Decision-error covariance diagonal for the kept rows.

    Args:
        p: (n_tx, n_tx) current covariance.
        h_prev: (n_tx,) current estimate.
        var_rows: (n_d, n_tx) per-row, per-stream soft-decision variances.

    Returns:
        (n_d,) diagonal of Q.
    """
    weights = np.real(np.diag(p)) + np.abs(h_prev) ** 2
    return var_rows @ weights


def gain(
    s_rows: np.ndarray, q_diag: np.ndarray, p: np.ndarray, n0: float
) -> np.ndarray:
    """Kalman gain for one (rx, tone) update.

    Uses the information form when the prior covariance is comfortably
    invertible; otherwise the covariance form takes over, which needs no
    prior inverse and yields the exact zero gain for a perfectly known
    channel (P = 0).
    """
    d_inv = 1.0 / (q_diag + n0)
    sh_d = s_rows.conj().T * d_inv
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(p)
    if np.isfinite(cond) and cond <= P_COND_LIMIT:
        try:
            return np.linalg.solve(sh_d @ s_rows + np.linalg.inv(p), sh_d)
        except np.linalg.LinAlgError:
            pass
    r = s_rows @ p @ s_rows.conj().T + np.diag(q_diag + n0)
    return p @ np.linalg.solve(r, s_rows).conj().T  # P S^H R^-1, R Hermitian


def update(
    h_prev: np.ndarray,
    p_prev: np.ndarray,
    a: np.ndarray,
    s_rows: np.ndarray,
    y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one gain to the punctured innovations: new estimate and covariance."""
    h_new = h_prev + a @ y
    p_new = (np.eye(p_prev.shape[0]) - a @ s_rows) @ p_prev
    p_new = _clean_cov(p_new)
    return h_new, p_new


def noise_cov(p: np.ndarray, s_mean: np.ndarray, n0: float) -> float:
    """Effective demapper noise for one (rx, tone): estimation error plus N0."""
    return float(np.real(np.diag(p)) @ np.abs(s_mean) ** 2 + n0)


def _clean_cov(p: np.ndarray) -> np.ndarray:
    """Force a numerically Hermitian covariance with a real diagonal."""
    p = 0.5 * (p + np.conj(np.swapaxes(p, -1, -2)))
    diag = np.einsum("...tt->...t", p)
    imag_res = np.max(np.abs(diag.imag)) if diag.size else 0.0
    if imag_res > _DIAG_IMAG_TOL:
        raise FloatingPointError(f"covariance diagonal imaginary residue {imag_res:g}")
    return p


# ---------------------------------------------------------------------------
# batched estimators driven by the pipeline
# ---------------------------------------------------------------------------


class KalmanEstimator:
    """Sequential estimator across all tones and receive antennas.

    kind "proposed" applies innovation screening with threshold c; the
    Song-style baseline consumes decoder rows only with no puncturing; the
    initial-only baseline never updates past the preamble estimate.
    """

    def __init__(
        self,
        n0: float,
        c: float = 2.5,
        es: float = 1.0,
        puncture: bool = True,
        source_filter: str | None = None,
        frozen: bool = False,
    ):
        self.n0 = n0
        self.c = c
        self.es = es
        self.puncture = puncture
        self.source_filter = source_filter
        self.frozen = frozen
        self.state: EstimatorState | None = None
        self.last_x: np.ndarray | None = None
        self.last_keep: np.ndarray | None = None
        self.last_symbol_ids: list[int] = []

    def init_from_preamble(self, z_pre: np.ndarray, s_tr: np.ndarray) -> None:
        """Vectorized est_init over (tone, rx).

        z_pre is (n_train, n_sc, n_rx); s_tr is (n_train, n_tx).
        """
        n_train = s_tr.shape[0]
        h0 = np.einsum("it,isr->srt", s_tr, z_pre) / n_train
        gamma = self.es / (s_tr.shape[1] * self.n0)
        mag2 = np.abs(h0) ** 2
        p0_diag = mag2 / (gamma * mag2 + 1.0)
        p0_diag = np.maximum(p0_diag, 1e-15)  # keep the information form usable
        self.state = EstimatorState(
            h_hat=h0,
            p=_diag_embed(p0_diag.astype(complex)),
            p_inv=_diag_embed((1.0 / p0_diag).astype(complex)),
        )

    def init_from_prior(self, rho, n_sc: int) -> None:
        """Start at the channel prior: zero estimate, covariance diag(rho)."""
        rho = np.atleast_2d(np.asarray(rho, dtype=float))
        rho_b = np.broadcast_to(rho, (n_sc,) + rho.shape).astype(complex)
        self.state = EstimatorState(
            h_hat=np.zeros_like(rho_b),
            p=_diag_embed(rho_b.copy()),
            p_inv=_diag_embed(1.0 / rho_b),
        )

    @property
    def h_hat(self) -> np.ndarray:
        return self.state.h_hat

    @property
    def p_diag(self) -> np.ndarray:
        return np.real(np.einsum("srtt->srt", self.state.p))

    def noise_for(self, soft_mean: np.ndarray) -> np.ndarray:
        """Effective noise per (tone, rx) for a demapper stage's soft priors."""
        return np.einsum("srt,st->sr", self.p_diag, np.abs(soft_mean) ** 2) + self.n0

    def step(self, rows: list[FeedbackRow], h_true: np.ndarray | None = None) -> StepDiag:
        st = self.state
        if self.source_filter is not None:
            rows = [r for r in rows if r.source == self.source_filter]
        st.n += 1
        if not rows:
            st.hist = [{}, st.hist[0]]
            self.last_x = None
            self.last_keep = None
            self.last_symbol_ids = []
            return self._diag(0, 0, 0, np.nan, h_true)

        s = np.stack([r.soft.mean for r in rows], axis=1)  # (n_sc, F, n_tx)
        v = np.stack([r.soft.var for r in rows], axis=1)
        z = np.stack([r.z for r in rows], axis=2)  # (n_sc, n_rx, F)

        x = z - np.einsum("sfc,src->srf", s, st.h_hat)
        if self.frozen:
            st.hist = self._push_hist(rows, x)
            self.last_x = x
            self.last_keep = np.ones(x.shape, dtype=float)
            self.last_symbol_ids = [r.symbol_id for r in rows]
            return self._diag(len(rows), 0, 0, np.nan, h_true)
        beta = self._lag2_beta(rows, x, st)
        keep = self._keep_mask(beta)

        q = np.einsum("srt,sft->srf", self.p_diag + np.abs(st.h_hat) ** 2, v)
        w = keep / (q + self.n0)
        m = st.p_inv + np.einsum("sft,srf,sfu->srtu", s.conj(), w, s)
        p_new = _batched_inv(m)
        rhs = np.einsum("sft,srf,srf->srt", s.conj(), w, x)
        st.h_hat = st.h_hat + np.einsum("srtu,sru->srt", p_new, rhs)
        st.p = _clean_cov(p_new)
        st.p_inv = m

        st.hist = self._push_hist(rows, x)
        self.last_x = x
        self.last_keep = keep
        self.last_symbol_ids = [r.symbol_id for r in rows]
        finite = beta[np.isfinite(beta)]
        return self._diag(
            len(rows),
            int(keep.sum()),
            int(keep.size),
            float(np.mean(np.abs(finite))) if finite.size else np.nan,
            h_true,
        )

    def _lag2_beta(
        self, rows: list[FeedbackRow], x: np.ndarray, st: EstimatorState
    ) -> np.ndarray:
        n_sc, n_rx, n_f = x.shape
        beta = np.full((n_sc, n_rx, n_f), np.nan)
        prev = st.hist[1]
        for f, row in enumerate(rows):
            xp = prev.get(row.symbol_id)
            if xp is not None:
                beta[:, :, f] = xp.real * x[:, :, f].real + xp.imag * x[:, :, f].imag
        return beta

    def _keep_mask(self, beta: np.ndarray) -> np.ndarray:
        if not self.puncture:
            return np.ones_like(beta, dtype=float)
        keep = np.isnan(beta) | (np.abs(beta) <= self.c * self.n0)
        keep[:, :, :2] = True
        return keep.astype(float)

    def _push_hist(self, rows, x) -> list[dict[int, np.ndarray]]:
        newest = {row.symbol_id: x[:, :, f] for f, row in enumerate(rows)}
        return [newest, self.state.hist[0]]

    def _diag(self, n_rows, kept, total, beta_mean, h_true) -> StepDiag:
        mse = None
        if h_true is not None:
            err = np.abs(h_true - self.state.h_hat) ** 2
            mse = float(np.mean(np.sum(err, axis=(1, 2))))  # all links, per tone
        return StepDiag(
            n=self.state.n,
            n_rows=n_rows,
            rows_kept=kept,
            rows_total=total,
            beta_abs_mean=beta_mean,
            trace_p=float(self.p_diag.sum(axis=-1).mean()),
            mse=mse,
        )


class PerfectEstimator:
    """Oracle estimator: the true channel with zero error covariance."""

    def __init__(self, h_true: np.ndarray, n0: float):
        self._h = h_true
        self.n0 = n0
        self.state = EstimatorState(
            h_hat=h_true,
            p=np.zeros(h_true.shape + (h_true.shape[-1],), dtype=complex),
            p_inv=np.zeros(h_true.shape + (h_true.shape[-1],), dtype=complex),
        )

    @property
    def h_hat(self) -> np.ndarray:
        return self._h

    def noise_for(self, soft_mean: np.ndarray) -> np.ndarray:
        n_sc = soft_mean.shape[0]
        return np.full((n_sc, self._h.shape[1]), self.n0)

    def init_from_preamble(self, z_pre, s_tr) -> None:
        pass

    def step(self, rows, h_true=None) -> StepDiag:
        self.state.n += 1
        return StepDiag(self.state.n, len(rows), 0, 0, np.nan, 0.0, 0.0 if h_true is not None else None)


class EmDdEstimator:
    """Per-step least-squares re-estimation blended with the preamble estimate.

    The LS solution over all current feedback rows is combined with the
    preamble estimate using inverse-variance weights; the noise estimate fed
    to the demappers is the mean residual power of the blended estimate.
    """

    def __init__(self, n0: float, es: float = 1.0):
        self.n0 = n0
        self.es = es
        self.state: EstimatorState | None = None
        self.h_pre: np.ndarray | None = None
        self.sigma_p2: float | None = None
        self.n0_em: np.ndarray | None = None  # (n_sc,)

    def init_from_preamble(self, z_pre: np.ndarray, s_tr: np.ndarray) -> None:
        n_train, n_tx = s_tr.shape
        h0 = np.einsum("it,isr->srt", s_tr, z_pre) / n_train
        self.h_pre = h0
        self.sigma_p2 = n_tx * self.n0 / n_train
        shape = h0.shape + (n_tx,)
        self.state = EstimatorState(
            h_hat=h0.copy(), p=np.zeros(shape, complex), p_inv=np.zeros(shape, complex)
        )
        self.n0_em = np.full(h0.shape[0], self.n0)

    @property
    def h_hat(self) -> np.ndarray:
        return self.state.h_hat

    def noise_for(self, soft_mean: np.ndarray) -> np.ndarray:
        n_rx = self.state.h_hat.shape[1]
        return np.broadcast_to(self.n0_em[:, None], (self.n0_em.size, n_rx)).copy()

    def step(self, rows: list[FeedbackRow], h_true: np.ndarray | None = None) -> StepDiag:
        st = self.state
        st.n += 1
        n_tx = st.h_hat.shape[-1]
        if len(rows) < n_tx:
            st.h_hat = self.h_pre.copy()  # not enough rows for LS, fall back
            return self._diag(len(rows), h_true)

        s = np.stack([r.soft.mean for r in rows], axis=1)  # (n_sc, F, n_tx)
        z = np.stack([r.z for r in rows], axis=2)  # (n_sc, n_rx, F)
        n_f = len(rows)

        gram = np.einsum("sft,sfu->stu", s.conj(), s)
        gram += 1e-12 * np.trace(gram, axis1=1, axis2=2)[:, None, None].real * np.eye(n_tx)
        rhs = np.einsum("sft,srf->srt", s.conj(), z)
        h_o = np.linalg.solve(gram[:, None], rhs[..., None])[..., 0]

        resid_o = z - np.einsum("sfc,src->srf", s, h_o)
        sigma_o2 = np.mean(np.abs(resid_o) ** 2, axis=(1, 2)) / n_f  # per tone
        a = sigma_o2 / (self.sigma_p2 + sigma_o2)
        b = self.sigma_p2 / (self.sigma_p2 + sigma_o2)
        st.h_hat = a[:, None, None] * self.h_pre + b[:, None, None] * h_o

        resid = z - np.einsum("sfc,src->srf", s, st.h_hat)
        self.n0_em = np.mean(np.abs(resid) ** 2, axis=(1, 2))
        return self._diag(len(rows), h_true)

    def _diag(self, n_rows: int, h_true) -> StepDiag:
        mse = None
        if h_true is not None:
            err = np.abs(h_true - self.state.h_hat) ** 2
            mse = float(np.mean(np.sum(err, axis=(1, 2))))
        return StepDiag(self.state.n, n_rows, n_rows, n_rows, np.nan, 0.0, mse)


def make_estimator(kind: str, n0: float, c: float = 2.5, es: float = 1.0, h_true=None):
    """Estimator factory for the runner's --estimator choices."""
    if kind == "perfect":
        if h_true is None:
            raise ValueError("perfect estimator needs the true channel")
        return PerfectEstimator(h_true, n0)
    if kind == "proposed":
        return KalmanEstimator(n0, c=c, es=es)
    if kind == BaselineKind.INITIAL_ONLY.value:
        return KalmanEstimator(n0, c=c, es=es, frozen=True)
    if kind == BaselineKind.SONG_KALMAN.value:
        return KalmanEstimator(n0, c=c, es=es, puncture=False, source_filter="dec")
    if kind == BaselineKind.EM_DD.value:
        return EmDdEstimator(n0, es=es)
    raise ValueError(f"unknown estimator kind {kind!r}")


def baseline_estimate(kind: BaselineKind, estimator, rows: list[FeedbackRow]):
    """Advance a baseline estimator one step and return its estimate."""
    if not isinstance(kind, BaselineKind):
        raise TypeError("kind must be a BaselineKind")
    estimator.step(rows)
    return estimator.h_hat


def _diag_embed(diag: np.ndarray) -> np.ndarray:
    out = np.zeros(diag.shape + (diag.shape[-1],), dtype=diag.dtype)
    idx = np.arange(diag.shape[-1])
    out[..., idx, idx] = diag
    return out


def _batched_inv(m: np.ndarray) -> np.ndarray:
    """Inverse of stacked Hermitian matrices, analytic in the 2x2 case."""
    if m.shape[-1] == 2:
        a = m[..., 0, 0]
        b = m[..., 0, 1]
        d = m[..., 1, 1]
        det = (a * d - b * np.conj(b)).real
        out = np.empty_like(m)
        out[..., 0, 0] = d / det
        out[..., 1, 1] = a / det
        out[..., 0, 1] = -b / det
        out[..., 1, 0] = -np.conj(b) / det
        return out
    return np.linalg.inv(m)
