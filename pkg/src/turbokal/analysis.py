"""Closed-form MSE predictions and open-loop validation harnesses.

The closed forms describe decision-directed LMMSE channel estimation with
N_d feedback rows per receive antenna: regressor rows of per-entry power
E_s + sigma_s^2 and effective white noise v = sigma_s^2 * sum_t rho + N_0
independent of the rows.  The Monte Carlo helpers generate data under
explicitly stated surrogate models so each formula can be checked against
simulation; the individual docstrings state the model each one uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import EstimatorState, KalmanEstimator, FeedbackRow, _diag_embed
from .demapper import SoftSymbolFrame


def noise_power(sigma_s2: float, n0: float, rho: np.ndarray) -> np.ndarray:
    """Effective per-row noise v per receive antenna; rho is (n_rx, n_tx)."""
    rho = np.atleast_2d(rho)
    return sigma_s2 * rho.sum(axis=1) + n0


def eps_opt(n_d: int, sigma_s2: float, n0: float, rho, es: float = 1.0) -> float:
    """Estimation error power of matched LMMSE with N_d unbiased rows.

    Summed over every (rx, tx) link; rho holds per-link average gains.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    v = noise_power(sigma_s2, n0, rho)
    return float(np.sum(1.0 / (n_d * (es + sigma_s2) / v[:, None] + 1.0 / rho)))


def bias_penalty(
    n_d: int,
    sigma_s2: float,
    bias_power: float,
    n0: float,
    rho,
    es: float = 1.0,
) -> float:
    """Excess error power from a decision-error bias shared across rows.

    Error model e = m + q with the bias m common to all rows and streams
    and |m|^2 + var(q) = sigma_s2 held fixed, so the shared part adds
    N_d * Phi to the regressor Gram, Phi having zero diagonal and |m|^2
    off it.  The penalty per receive antenna is

        N_d (E_s + sigma_s2) tr{[(Psi + N_d Phi)^-1 - Psi^-1] R_h}

    which is nonnegative for this hollow Phi; the leading term per link
    works out to (N_d |m|^2 / psi)^2 * sum_{u != t} rho_u.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    n_rx, n_tx = rho.shape
    v = noise_power(sigma_s2, n0, rho)
    phi = bias_power * (np.ones((n_tx, n_tx)) - np.eye(n_tx))
    total = 0.0
    for r in range(n_rx):
        psi = n_d * (es + sigma_s2) * np.eye(n_tx) + v[r] * np.diag(1.0 / rho[r])
        lam = np.linalg.inv(psi + n_d * phi) - np.linalg.inv(psi)
        total += n_d * (es + sigma_s2) * float(np.trace(lam @ np.diag(rho[r])))
    return total


def eps_biased(
    n_d: int,
    sigma_s2: float,
    bias_power: float,
    n0: float,
    rho,
    es: float = 1.0,
) -> float:
    """eps_opt plus bias_penalty for the same feedback error budget."""
    return eps_opt(n_d, sigma_s2, n0, rho, es) + bias_penalty(
        n_d, sigma_s2, bias_power, n0, rho, es
    )


def eps_mismatch_limit(
    n_d: int, sigma_s2: float, n0: float, rho, es: float = 1.0
) -> float:
    """Large-N_d error power of LMMSE that ignores the decision error variance.

    eps_opt plus a floor that does not shrink with more feedback rows.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    ratio = es / (es + sigma_s2)
    floor = float(np.sum(rho.sum(axis=1) * ratio * (1.0 - ratio)))
    return eps_opt(n_d, sigma_s2, n0, rho, es) + floor


@dataclass(frozen=True)
class BiasedErrorModel:
    """Decision errors e[d, t] = m + q[d, t] with realization-wide bias m."""

    bias_power: float
    white_var: float

    @property
    def total_var(self) -> float:
        return self.bias_power + self.white_var

    def draw(self, rng: np.random.Generator, n_trials: int, n_d: int, n_t: int):
        m = _cn(rng, (n_trials, 1, 1), self.bias_power)
        q = _cn(rng, (n_trials, n_d, n_t), self.white_var)
        return m + q


@dataclass
class LmmseMcResult:
    """Moments of matched and variance-blind LMMSE on identical draws."""

    mse_matched: float
    mse_mismatched: float
    cross_matched: float  # Re tr E{h hhat^H}
    power_mismatched: float  # tr E{what what^H}
    n_trials: int

    def mismatched_decomposed(self, eps_opt_value: float) -> float:
        """Mismatch error power via the moment decomposition of the limit law."""
        return eps_opt_value + self.cross_matched - self.power_mismatched


def lmmse_mc(
    n_d: int,
    sigma_s2: float,
    n0: float,
    rho,
    rng: np.random.Generator,
    es: float = 1.0,
    bias_power: float = 0.0,
    n_trials: int = 2000,
) -> LmmseMcResult:
    """One-shot LMMSE Monte Carlo with decision errors in the regressor.

    Model: z = S h + w with true unit-energy QAM-like rows S, while the
    estimators regress on stilde = S + e (e of total power sigma_s2,
    optionally containing a shared bias).  The matched filter weights with
    v and the prior; the mismatched one uses N_0 in place of v.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    n_rx, n_tx = rho.shape
    error = BiasedErrorModel(bias_power, sigma_s2 - bias_power)
    mse_m = mse_w = cross = power = 0.0
    for r in range(n_rx):
        v = float(noise_power(sigma_s2, n0, rho)[r])
        h = _cn(rng, (n_trials, n_tx), rho[r])
        s = _qam_like(rng, (n_trials, n_d, n_tx), es)
        e = error.draw(rng, n_trials, n_d, n_tx)
        st = s + e
        w = _cn(rng, (n_trials, n_d), n0)
        z = np.einsum("kdt,kt->kd", s, h) + w

        gram = np.einsum("kdt,kdu->ktu", st.conj(), st)
        rhs = np.einsum("kdt,kd->kt", st.conj(), z)
        prior = np.diag(1.0 / rho[r])
        h_m = np.linalg.solve(gram + v * prior, rhs[..., None])[..., 0]
        h_w = np.linalg.solve(gram + n0 * prior, rhs[..., None])[..., 0]

        mse_m += float(np.mean(np.sum(np.abs(h - h_m) ** 2, axis=1)))
        mse_w += float(np.mean(np.sum(np.abs(h - h_w) ** 2, axis=1)))
        cross += float(np.mean(np.sum((h * h_m.conj()).real, axis=1)))
        power += float(np.mean(np.sum(np.abs(h_w) ** 2, axis=1)))
    return LmmseMcResult(mse_m, mse_w, cross, power, n_trials)


@dataclass
class OpenLoopResult:
    """Sequential estimator MSE against the closed-form prediction."""

    n_d: int
    sigma_s2: float
    mse_trace: np.ndarray  # mse_trace[k] = error power after k rows
    predicted: np.ndarray  # predicted[k] = eps_opt with k rows
    n_realizations: int

    @property
    def final_mse(self) -> float:
        return float(self.mse_trace[-1])

    @property
    def final_predicted(self) -> float:
        return float(self.predicted[-1])


def open_loop_mse(
    n_d: int,
    sigma_s2: float,
    n0: float,
    rho,
    rng: np.random.Generator,
    es: float = 1.0,
    n_reps: int = 30,
    n_tones: int = 52,
) -> OpenLoopResult:
    """Feed the sequential estimator synthetic rows of known quality.

    Instead of live demapper/decoder feedback, unbiased soft decisions with
    variance sigma_s2 are generated artificially: row noise is independent
    of the regressors (power sigma_s2 * sum_t |h_t|^2 + N_0), puncturing is
    off, and each row is used once.  The trace then descends to the N_d-row
    closed form.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    n_rx, n_tx = rho.shape
    trace = np.zeros(n_d + 1)
    predicted = np.array(
        [np.sum(rho)] + [eps_opt(k, sigma_s2, n0, rho, es) for k in range(1, n_d + 1)]
    )
    for _ in range(n_reps):
        h = _cn(rng, (n_tones, n_rx, n_tx), rho)
        est = KalmanEstimator(n0, es=es, puncture=False)
        est.init_from_prior(rho, n_tones)
        trace[0] += _mse(h, est.h_hat)
        for d in range(n_d):
            s_mean = _qam_like(rng, (n_tones, n_tx), es + sigma_s2)
            v_inst = sigma_s2 * np.sum(np.abs(h) ** 2, axis=2) + n0
            z = np.einsum("st,srt->sr", s_mean, h) + _cn(
                rng, (n_tones, n_rx), 1.0
            ) * np.sqrt(v_inst)
            row = FeedbackRow(
                symbol_id=d,
                stage=2,
                source="dec",
                soft=SoftSymbolFrame(
                    mean=s_mean, var=np.full((n_tones, n_tx), sigma_s2)
                ),
                z=z,
            )
            est.step([row])
            trace[d + 1] += _mse(h, est.h_hat)
    return OpenLoopResult(n_d, sigma_s2, trace / n_reps, predicted, n_reps * n_tones)


def measure_mi(llr: np.ndarray, bits: np.ndarray) -> float:
    """Mutual information between coded bits and their LLRs, time-averaged."""
    llr = np.asarray(llr, dtype=float).ravel()
    bits = np.asarray(bits).ravel()
    signed = np.where(bits > 0, llr, -llr)
    mi = 1.0 - np.mean(np.logaddexp(0.0, -signed)) / np.log(2.0)
    return float(np.clip(mi, 0.0, 1.0))


def _cn(rng: np.random.Generator, shape, var) -> np.ndarray:
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _qam_like(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Unit-ish kurtosis regressor rows: 16-QAM points scaled to `power`."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
    re = rng.choice(levels, size=shape)
    im = rng.choice(levels, size=shape)
    return np.sqrt(power) * (re + 1j * im)


def _mse(h_true: np.ndarray, h_hat: np.ndarray) -> float:
    return float(np.mean(np.sum(np.abs(h_true - h_hat) ** 2, axis=(1, 2))))
