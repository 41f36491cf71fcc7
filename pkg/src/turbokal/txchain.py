"""Transmit bit chain: convolutional coding, stream demux, interleaving and QAM.

A packet is a sequence of OFDM symbols.  Each OFDM symbol carries its own
zero-tail terminated codeword so the receiver can decode symbols as they
arrive; leftover slot capacity inside a symbol is padded with known filler
zeros.  Coded bits are round-robin split across the spatial streams, each
stream runs through its own fixed pseudo-random interleaver, and groups of
Q bits map onto one Gray-labeled QAM constellation point per tone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import hadamard


@dataclass(frozen=True)
class CodeConfig:
    """Rate-1/2 feedforward convolutional code with zero-tail termination."""

    constraint_len: int = 7
    g0_octal: int = 0o133
    g1_octal: int = 0o171

    @property
    def n_tail(self) -> int:
        return self.constraint_len - 1

    @cached_property
    def taps(self) -> tuple[np.ndarray, np.ndarray]:
        """Generator taps, index j multiplies the input delayed by j."""
        return (
            _octal_to_taps(self.g0_octal, self.constraint_len),
            _octal_to_taps(self.g1_octal, self.constraint_len),
        )


def _octal_to_taps(g: int, n: int) -> np.ndarray:
    if g >= 1 << n:
        raise ValueError(f"generator 0o{g:o} does not fit {n} taps")
    return np.array([(g >> (n - 1 - j)) & 1 for j in range(n)], dtype=np.uint8)


@dataclass(frozen=True)
class ModulationConfig:
    """Square QAM with independent per-axis Gray labeling, unit mean energy.

    The first half of a symbol's bits selects the in-phase level, the second
    half the quadrature level.  Per axis the two-bit Gray order is
    00, 01, 11, 10 from the most negative to the most positive amplitude.
    """

    order: int = 16

    def __post_init__(self) -> None:
        q = int(np.log2(self.order))
        if 2**q != self.order or q % 2 != 0:
            raise ValueError(f"order {self.order} is not an even power of two")

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @cached_property
    def _axis(self) -> np.ndarray:
        """Amplitude level for each per-axis bit pattern (MSB-first)."""
        m = 1 << (self.bits_per_symbol // 2)
        levels = 2.0 * np.arange(m) - (m - 1)
        axis = np.empty(m)
        for a in range(m):
            axis[a ^ (a >> 1)] = levels[a]
        return axis

    @cached_property
    def points(self) -> np.ndarray:
        """Constellation table indexed by the MSB-first packed bit label."""
        qa = self.bits_per_symbol // 2
        scale = 1.0 / np.sqrt(2.0 * np.mean(self._axis**2))
        idx = np.arange(self.order)
        re = self._axis[idx >> qa]
        im = self._axis[idx & ((1 << qa) - 1)]
        return scale * (re + 1j * im)

    @cached_property
    def bit_table(self) -> np.ndarray:
        """(order, Q) table of the bits behind each constellation index."""
        q = self.bits_per_symbol
        idx = np.arange(self.order)[:, None]
        return ((idx >> (q - 1 - np.arange(q))) & 1).astype(np.uint8)


def conv_encode(info_bits: np.ndarray, code: CodeConfig) -> np.ndarray:
    """Encode one zero-tail terminated codeword.

    Args:
        info_bits: (k,) array of 0/1 information bits.
        code: code definition.

    Returns:
        (2 * (k + n_tail),) coded bits, the two generator outputs of each
        input step interleaved g0 first.
    """
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    if info_bits.ndim != 1 or info_bits.size == 0:
        raise ValueError("info_bits must be a non-empty 1-D bit array")
    x = np.concatenate([info_bits, np.zeros(code.n_tail, dtype=np.uint8)])
    g0, g1 = code.taps
    out = np.empty(2 * x.size, dtype=np.uint8)
    out[0::2] = np.convolve(x, g0)[: x.size] % 2
    out[1::2] = np.convolve(x, g1)[: x.size] % 2
    return out


def spatial_demux(bits: np.ndarray, n_tx: int) -> np.ndarray:
    """Round-robin split of a coded bit sequence into n_tx streams."""
    bits = np.asarray(bits)
    if bits.size % n_tx != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {n_tx} streams")
    return bits.reshape(-1, n_tx).T.copy()


def spatial_remux(streams: np.ndarray) -> np.ndarray:
    """Inverse of spatial_demux; streams is (n_tx, stream_len)."""
    return np.asarray(streams).T.reshape(-1).copy()


def interleave(x: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Permute x so output position j carries x[perm[j]]."""
    return np.asarray(x)[..., perm]


def deinterleave(x: np.ndarray, perm: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    out = np.empty_like(x)
    out[..., perm] = x
    return out


def make_interleaver(length: int, seed) -> np.ndarray:
    """Seeded pseudo-random permutation; same seed gives the same permutation."""
    return np.random.default_rng(seed).permutation(length)


def gen_preamble(n_tx: int, n_train: int | None = None) -> np.ndarray:
    """Orthogonal +/-1 training matrix S with S.T @ S = n_train * I.

    Rows are training OFDM symbols (flat across tones), columns are streams.
    """
    if n_train is None:
        n_train = 1 << max(0, int(np.ceil(np.log2(n_tx))))
    if n_train < n_tx:
        raise ValueError(f"n_train={n_train} must be >= n_tx={n_tx}")
    h = hadamard(n_train).astype(float)
    return h[:, :n_tx].copy()


@dataclass(frozen=True)
class PacketLayout:
    """Static description of how a payload fills a packet's OFDM symbols."""

    n_info_bytes: int
    n_tx: int
    n_sc: int = 52
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    code: CodeConfig = field(default_factory=CodeConfig)
    n_train: int | None = None
    interleaver_seed: int = 24247

    def __post_init__(self) -> None:
        if self.n_info_bytes <= 0:
            raise ValueError("payload must be at least one byte")
        if self.n_tx < 1:
            raise ValueError("n_tx must be positive")
        if self.capacity // 2 - self.code.n_tail < 1:
            raise ValueError("OFDM symbol too small for even one info bit")

    @property
    def capacity(self) -> int:
        """Coded-bit slots per OFDM symbol."""
        return self.modulation.bits_per_symbol * self.n_tx * self.n_sc

    @property
    def stream_len(self) -> int:
        return self.capacity // self.n_tx

    @property
    def n_info_bits(self) -> int:
        return 8 * self.n_info_bytes

    @property
    def n_sym(self) -> int:
        k_max = self.capacity // 2 - self.code.n_tail
        return -(-self.n_info_bits // k_max)

    @cached_property
    def info_split(self) -> tuple[int, ...]:
        """Info bits carried by each OFDM symbol's codeword."""
        base, extra = divmod(self.n_info_bits, self.n_sym)
        return tuple(base + (1 if i < extra else 0) for i in range(self.n_sym))

    def codeword_len(self, i_sym: int) -> int:
        return 2 * (self.info_split[i_sym] + self.code.n_tail)

    @cached_property
    def train_matrix(self) -> np.ndarray:
        return gen_preamble(self.n_tx, self.n_train)

    @property
    def n_train_sym(self) -> int:
        return self.train_matrix.shape[0]

    @cached_property
    def interleavers(self) -> tuple[np.ndarray, ...]:
        root = np.random.SeedSequence(self.interleaver_seed)
        return tuple(
            make_interleaver(self.stream_len, s) for s in root.spawn(self.n_tx)
        )

    @cached_property
    def _slot_of_position(self) -> np.ndarray:
        """Codeword-order slot carried by each flat stream-major tx position."""
        streams = spatial_demux(np.arange(self.capacity), self.n_tx)
        return np.concatenate(
            [interleave(streams[t], self.interleavers[t]) for t in range(self.n_tx)]
        )

    @cached_property
    def _position_of_slot(self) -> np.ndarray:
        fwd = np.empty(self.capacity, dtype=np.int64)
        fwd[self._slot_of_position] = np.arange(self.capacity)
        return fwd

    def slot_order(self, i_sym: int) -> tuple[np.ndarray, np.ndarray]:
        """Index maps between codeword order and the transmitted stream grid.

        Returns (fwd, filler_mask): fwd[j] is the flat (stream-major)
        tx-domain position of codeword-order slot j, covering the whole
        capacity with filler slots at the tail; filler_mask flags tx-domain
        positions holding filler rather than codeword bits.
        """
        filler = self._slot_of_position >= self.codeword_len(i_sym)
        return self._position_of_slot, filler


@dataclass
class TxPacket:
    """One transmitted packet: payload, per-symbol codewords and the QAM grid."""

    layout: PacketLayout
    payload: bytes
    info_bits: list[np.ndarray]
    coded_bits: list[np.ndarray]
    tx_bits: np.ndarray  # (n_sym, n_sc, n_tx, Q) transmitted bit grid
    grid: np.ndarray  # (n_sym, n_sc, n_tx) constellation points


def qam_map(bits: np.ndarray, mod: ModulationConfig) -> np.ndarray:
    """Map (..., Q) bit groups to constellation points."""
    bits = np.asarray(bits, dtype=np.int64)
    q = mod.bits_per_symbol
    if bits.shape[-1] != q:
        raise ValueError(f"expected {q} bits per symbol, got {bits.shape[-1]}")
    weights = 1 << np.arange(q - 1, -1, -1)
    return mod.points[bits @ weights]


def to_tx_domain(
    codeword_vals: np.ndarray, filler_value, layout: PacketLayout, i_sym: int
):
    """Spread codeword-order values onto the (n_sc, n_tx, Q) transmit grid.

    Filler slots take filler_value.  Works for bits and for LLRs alike.
    """
    fwd, filler = layout.slot_order(i_sym)
    dtype = np.result_type(np.asarray(codeword_vals), np.asarray(filler_value))
    flat = np.full(layout.capacity, filler_value, dtype=dtype)
    flat[fwd[: np.shape(codeword_vals)[-1]]] = codeword_vals
    q = layout.modulation.bits_per_symbol
    return (
        flat.reshape(layout.n_tx, layout.n_sc, q).transpose(1, 0, 2),
        filler.reshape(layout.n_tx, layout.n_sc, q).transpose(1, 0, 2),
    )


def to_codeword_order(
    grid_vals: np.ndarray, layout: PacketLayout, i_sym: int
) -> np.ndarray:
    """Collect codeword-order values back out of an (n_sc, n_tx, Q) grid."""
    fwd, _ = layout.slot_order(i_sym)
    flat = np.asarray(grid_vals).transpose(1, 0, 2).reshape(layout.capacity)
    return flat[fwd[: layout.codeword_len(i_sym)]]


def build_packet(payload: bytes, layout: PacketLayout) -> TxPacket:
    """Encode, demux, interleave and map one payload into a packet grid."""
    if len(payload) != layout.n_info_bytes:
        raise ValueError(
            f"payload is {len(payload)} bytes, layout wants {layout.n_info_bytes}"
        )
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    q = layout.modulation.bits_per_symbol
    info_bits, coded_bits = [], []
    tx_bits = np.empty((layout.n_sym, layout.n_sc, layout.n_tx, q), dtype=np.uint8)
    grid = np.empty((layout.n_sym, layout.n_sc, layout.n_tx), dtype=complex)
    pos = 0
    for i, k in enumerate(layout.info_split):
        info = bits[pos : pos + k]
        pos += k
        coded = conv_encode(info, layout.code)
        sym_bits, _ = to_tx_domain(coded, 0, layout, i)
        info_bits.append(info)
        coded_bits.append(coded)
        tx_bits[i] = sym_bits
        grid[i] = qam_map(sym_bits, layout.modulation)
    return TxPacket(layout, payload, info_bits, coded_bits, tx_bits, grid)
