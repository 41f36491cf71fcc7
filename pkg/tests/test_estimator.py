import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import kalman_reference_step
from turbokal.demapper import SoftSymbolFrame
from turbokal.estimator import (
    BaselineKind,
    EmDdEstimator,
    FeedbackRow,
    KalmanEstimator,
    PerfectEstimator,
    baseline_estimate,
    build_puncturer,
    correlation_measure,
    est_init,
    gain,
    make_estimator,
    noise_cov,
    q_matrix,
    residual,
    update,
)
from turbokal.txchain import gen_preamble


def _rows(rng, n_sc, n_rx, n_tx, n_f, var_scale=0.1, start_id=0):
    rows = []
    for f in range(n_f):
        mean = (rng.standard_normal((n_sc, n_tx)) + 1j * rng.standard_normal((n_sc, n_tx))) / np.sqrt(2)
        var = var_scale * rng.random((n_sc, n_tx))
        z = (rng.standard_normal((n_sc, n_rx)) + 1j * rng.standard_normal((n_sc, n_rx))) / np.sqrt(2)
        rows.append(FeedbackRow(start_id + f, 2 + f, "dec", SoftSymbolFrame(mean, var), z))
    return rows


def test_est_init_single_tone(rng):
    n_tx, n_train, n0 = 2, 4, 0.1
    s_tr = gen_preamble(n_tx, n_train)
    h = np.array([0.7 - 0.2j, -0.3 + 1.1j])
    z = s_tr @ h + np.sqrt(n0 / 2) * (rng.standard_normal(n_train) + 1j * rng.standard_normal(n_train))
    h0, p0 = est_init(z, s_tr, n0)
    assert h0.shape == (n_tx,)
    assert np.mean(np.abs(h0 - h) ** 2) < 0.1
    gamma = 1.0 / (n_tx * n0)
    mag2 = np.abs(h0) ** 2
    assert np.allclose(np.diag(p0), mag2 / (gamma * mag2 + 1.0))


def test_est_init_noiseless_exact():
    s_tr = gen_preamble(2, 2)
    h = np.array([1.0 + 0.5j, -0.25j])
    z = s_tr @ h
    h0, _ = est_init(z, s_tr, n0=1e-9)
    assert np.allclose(h0, h)


def test_preamble_init_matches_single_tone(rng):
    n_sc, n_rx, n_tx, n0 = 5, 2, 2, 0.2
    s_tr = gen_preamble(n_tx)
    z_pre = (rng.standard_normal((2, n_sc, n_rx)) + 1j * rng.standard_normal((2, n_sc, n_rx)))
    est = KalmanEstimator(n0)
    est.init_from_preamble(z_pre, s_tr)
    for f in range(n_sc):
        for r in range(n_rx):
            h0, p0 = est_init(z_pre[:, f, r], s_tr, n0)
            assert np.allclose(est.h_hat[f, r], h0)
            assert np.allclose(np.diag(est.state.p[f, r]).real, np.maximum(np.diag(p0), 1e-15))


def test_residual_definition(rng):
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    s = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    h = np.array([0.3, -1.0 + 0.2j])
    assert np.allclose(residual(z, s, h), z - s @ h)


def test_correlation_measure_is_real_inner_product():
    a = np.array([1.0 + 2.0j, -0.5 + 0.0j])
    b = np.array([3.0 - 1.0j, 2.0 + 2.0j])
    want = np.real(a) * np.real(b) + np.imag(a) * np.imag(b)
    assert np.allclose(correlation_measure(b, a), want)


def test_build_puncturer_rules():
    beta = np.array([5.0, -5.0, 0.1, np.nan, 3.0])
    g = build_puncturer(beta, c=2.0, n0=1.0)
    kept = [bool(g[:, i].any()) for i in range(5)]
    # rows 0 and 1 exceed the threshold but are the two newest: kept
    # row 2 is small: kept; row 3 undefined: kept; row 4 exceeds: dropped
    assert kept == [True, True, True, True, False]
    assert g.shape == (4, 5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
def test_keep_count_monotone_in_c(c_lo, c_hi, seed):
    c1, c2 = sorted((c_lo, c_hi))
    beta = np.random.default_rng(seed).standard_normal(12)
    g1 = build_puncturer(beta, c1, 1.0)
    g2 = build_puncturer(beta, c2, 1.0)
    assert g2.shape[0] >= g1.shape[0]


def test_q_matrix_formula(rng):
    p = np.diag([0.2, 0.05]).astype(complex)
    h = np.array([1.0 + 1.0j, 0.5])
    var = rng.random((6, 2))
    q = q_matrix(p, h, var)
    want = var @ (np.real(np.diag(p)) + np.abs(h) ** 2)
    assert np.allclose(q, want)


def test_noise_cov_formula():
    p = np.diag([0.1, 0.4]).astype(complex)
    s = np.array([0.5 + 0.5j, -1.0])
    assert np.isclose(noise_cov(p, s, 0.05), 0.1 * 0.5 + 0.4 * 1.0 + 0.05)


def test_gain_zero_for_perfectly_known_channel(rng):
    s = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    a = gain(s, q_diag=np.full(3, 0.1), p=np.zeros((2, 2)), n0=0.1)
    assert np.allclose(a, 0.0)


def test_single_update_reduces_covariance(rng):
    p = np.eye(2, dtype=complex)
    h = np.zeros(2, dtype=complex)
    s = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    q = np.full(4, 0.01)
    a = gain(s, q, p, n0=0.1)
    h2, p2 = update(h, p, a, s, rng.standard_normal(4) + 0j)
    assert np.all(np.diag(p2).real < np.diag(p).real)
    assert np.all(np.diag(p2).real > 0)


def test_batched_step_equals_reference_composition(rng):
    """One batched step must equal the per-(tone, rx) information-form update."""
    n_sc, n_rx, n_tx, n0 = 3, 2, 2, 0.15
    est = KalmanEstimator(n0, c=2.5, puncture=False)
    est.init_from_prior(np.full((n_rx, n_tx), 0.8), n_sc)
    h_prev = est.h_hat.copy()
    p_prev = est.state.p.copy()
    rows = _rows(rng, n_sc, n_rx, n_tx, n_f=4)
    est.step(rows)
    s = np.stack([r.soft.mean for r in rows], axis=1)
    v = np.stack([r.soft.var for r in rows], axis=1)
    z = np.stack([r.z for r in rows], axis=2)
    for f in range(n_sc):
        for r in range(n_rx):
            var_rows = v[f] @ (np.diag(p_prev[f, r]).real + np.abs(h_prev[f, r]) ** 2)
            h_new, p_new = kalman_reference_step(
                h_prev[f, r], p_prev[f, r], z[f, r], s[f],
                var_rows, np.ones(4, dtype=bool), n0,
            )
            assert np.allclose(est.h_hat[f, r], h_new, atol=1e-10)
            assert np.allclose(est.state.p[f, r], p_new, atol=1e-10)


def test_punctured_rows_are_excluded(rng):
    """A punctured row must not influence the estimate at all."""
    n_sc, n_rx, n_tx, n0 = 2, 1, 2, 0.1
    rows = _rows(rng, n_sc, n_rx, n_tx, n_f=4)

    def run(huge_c):
        est = KalmanEstimator(n0, c=huge_c)
        est.init_from_prior(np.full((n_rx, n_tx), 0.5), n_sc)
        # seed lag-2 history so beta is defined for every row on the next step
        est.step(rows)
        est.step([])  # a gap step; history rotates
        est.step(rows)
        return est

    est = run(huge_c=1e12)  # nothing punctured
    assert est.last_keep.min() == 1.0
    est2 = run(huge_c=1e-12)  # every row with defined beta punctured
    kept2 = est2.last_keep
    assert kept2[:, :, 2:].max() == 0.0  # all stale rows dropped
    assert kept2[:, :, :2].min() == 1.0  # newest two always kept


def test_p_diag_stays_real_nonnegative(rng):
    n_sc, n_rx, n_tx, n0 = 4, 2, 2, 0.1
    est = KalmanEstimator(n0, c=2.5)
    est.init_from_prior(np.full((n_rx, n_tx), 1.0), n_sc)
    for k in range(15):
        est.step(_rows(rng, n_sc, n_rx, n_tx, n_f=5, start_id=10 * k))
        d = est.p_diag
        assert np.all(d >= -1e-10)
        assert np.max(np.abs(np.imag(np.einsum("srtt->srt", est.state.p)))) < 1e-10


def test_song_filter_consumes_decoder_rows_only(rng):
    n_sc, n_rx, n_tx, n0 = 2, 2, 2, 0.1
    est = make_estimator("song", n0)
    est.init_from_prior(np.full((n_rx, n_tx), 0.5), n_sc)
    rows = _rows(rng, n_sc, n_rx, n_tx, n_f=3)
    rows[1].source = "dem"
    diag = est.step(rows)
    assert diag.n_rows == 2
    assert est.last_symbol_ids == [rows[0].symbol_id, rows[2].symbol_id]


def test_initial_only_never_moves(rng):
    n_sc, n_rx, n_tx, n0 = 3, 2, 2, 0.1
    est = make_estimator("initial", n0)
    z_pre = rng.standard_normal((2, n_sc, n_rx)) + 1j * rng.standard_normal((2, n_sc, n_rx))
    est.init_from_preamble(z_pre, gen_preamble(n_tx))
    h0 = est.h_hat.copy()
    est.step(_rows(rng, n_sc, n_rx, n_tx, n_f=4))
    assert np.array_equal(est.h_hat, h0)


def test_perfect_estimator_noise_is_n0(rng):
    h = rng.standard_normal((5, 2, 2)) + 0j
    est = PerfectEstimator(h, n0=0.3)
    out = est.noise_for(np.zeros((5, 2), dtype=complex))
    assert np.allclose(out, 0.3)
    assert est.h_hat is h


def test_emdd_perfect_rows_noiseless_exact(rng):
    n_sc, n_rx, n_tx = 4, 2, 2
    h = (rng.standard_normal((n_sc, n_rx, n_tx)) + 1j * rng.standard_normal((n_sc, n_rx, n_tx)))
    est = EmDdEstimator(n0=1e-12)
    s_tr = gen_preamble(n_tx)
    z_pre = np.einsum("it,srt->isr", s_tr, h)
    est.init_from_preamble(z_pre, s_tr)
    rows = []
    for f in range(3):
        mean = (rng.standard_normal((n_sc, n_tx)) + 1j * rng.standard_normal((n_sc, n_tx)))
        z = np.einsum("srt,st->sr", h, mean)
        rows.append(FeedbackRow(f, 2 + f, "dec", SoftSymbolFrame(mean, np.zeros((n_sc, n_tx))), z))
    est.step(rows)
    assert np.allclose(est.h_hat, h, atol=1e-5)


def test_emdd_underdetermined_falls_back(rng):
    est = EmDdEstimator(n0=0.1)
    s_tr = gen_preamble(2)
    z_pre = rng.standard_normal((2, 3, 2)) + 1j * rng.standard_normal((2, 3, 2))
    est.init_from_preamble(z_pre, s_tr)
    est.step(_rows(rng, 3, 2, 2, n_f=1))  # one row < n_tx
    assert np.allclose(est.h_hat, est.h_pre)


def test_make_estimator_kinds():
    h = np.zeros((2, 2, 2), dtype=complex)
    assert isinstance(make_estimator("perfect", 0.1, h_true=h), PerfectEstimator)
    prop = make_estimator("proposed", 0.1, c=3.0)
    assert prop.puncture and prop.c == 3.0
    song = make_estimator("song", 0.1)
    assert not song.puncture and song.source_filter == "dec"
    init = make_estimator("initial", 0.1)
    assert init.frozen
    assert isinstance(make_estimator("emdd", 0.1), EmDdEstimator)
    with pytest.raises(ValueError):
        make_estimator("nope", 0.1)
    with pytest.raises(ValueError):
        make_estimator("perfect", 0.1)


def test_baseline_estimate_dispatch(rng):
    est = make_estimator("song", 0.1)
    est.init_from_prior(np.full((2, 2), 0.5), 3)
    rows = _rows(rng, 3, 2, 2, n_f=2)
    out = baseline_estimate(BaselineKind.SONG_KALMAN, est, rows)
    assert out is est.h_hat
    with pytest.raises(TypeError):
        baseline_estimate("song", est, rows)
