"""Quasi-static frequency-selective MIMO channel with exponential delay profile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelProfile:
    """Tap statistics shared by every (rx, tx) link.

    Tap l carries power proportional to exp(-l * t_samp / t_rms), the number
    of taps spans six delay spreads, and each link is normalized to unit
    total power.  Per-tone responses come from the tap DFT on an FFT grid of
    the next power of two covering the data tones.
    """

    n_rx: int
    n_tx: int
    n_sc: int = 52
    t_rms: float = 50e-9
    t_samp: float = 50e-9

    @property
    def n_taps(self) -> int:
        return int(np.ceil(6.0 * self.t_rms / self.t_samp)) + 1

    @property
    def n_fft(self) -> int:
        return 1 << int(np.ceil(np.log2(max(self.n_sc, self.n_taps))))

    @property
    def pdp(self) -> np.ndarray:
        p = np.exp(-np.arange(self.n_taps) * self.t_samp / self.t_rms)
        return p / p.sum()


@dataclass
class ChannelRealization:
    """One packet's channel: taps and the per-tone frequency response."""

    profile: ChannelProfile
    taps: np.ndarray  # (n_rx, n_tx, n_taps)
    freq: np.ndarray  # (n_sc, n_rx, n_tx)


def draw_channel(profile: ChannelProfile, rng: np.random.Generator) -> ChannelRealization:
    """Draw an independent Rayleigh realization for every (rx, tx) link."""
    shape = (profile.n_rx, profile.n_tx, profile.n_taps)
    scale = np.sqrt(profile.pdp / 2.0)
    taps = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    freq = np.fft.fft(taps, n=profile.n_fft, axis=-1)[..., : profile.n_sc]
    return ChannelRealization(profile, taps, np.ascontiguousarray(freq.transpose(2, 0, 1)))


def transmit(
    grid: np.ndarray,
    chan: ChannelRealization,
    n0: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Push a symbol grid through the channel and add complex white noise.

    Args:
        grid: (n_sym, n_sc, n_tx) transmitted points (training rows included).
        chan: channel realization, held fixed for the whole grid.
        n0: total complex noise variance per received sample.
        rng: noise source.

    Returns:
        (n_sym, n_sc, n_rx) received samples.
    """
    if grid.shape[1] != chan.profile.n_sc or grid.shape[2] != chan.profile.n_tx:
        raise ValueError(f"grid shape {grid.shape} does not match channel profile")
    clean = np.einsum("frt,sft->sfr", chan.freq, grid)
    noise = rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape)
    return clean + np.sqrt(n0 / 2.0) * noise


def snr_to_n0(snr_db: float) -> float:
    """Noise variance for a given SNR with unit total transmit energy per tone."""
    return 10.0 ** (-snr_db / 10.0)
