"""Transmitter chain: data mapping, pilot implant, OFDM modulation with CP."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexGrid, Direction, Domain, ShapeError, dft_cols
from .pilot import Pilot2D, PilotSpec, assemble


class FrameError(ValueError):
    pass


class Modulation(enum.Enum):
    QPSK = "qpsk"
    QAM16 = "16qam"

    @property
    def bits_per_symbol(self) -> int:
        return 2 if self is Modulation.QPSK else 4

    @property
    def points(self) -> np.ndarray:
        """Constellation indexed by the integer value of its bit label (MSB first)."""
        return _CONSTELLATIONS[self]


def _qpsk() -> np.ndarray:
    idx = np.arange(4)
    b0, b1 = (idx >> 1) & 1, idx & 1
    return ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2)


def _qam16() -> np.ndarray:
    # 3GPP TS 38.211 Gray labelling; b0/b2 set the in-phase level, b1/b3 quadrature
    idx = np.arange(16)
    b0, b1, b2, b3 = (idx >> 3) & 1, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
    i = (1 - 2 * b0) * (2 - (1 - 2 * b2))
    q = (1 - 2 * b1) * (2 - (1 - 2 * b3))
    return (i + 1j * q) / np.sqrt(10)


_CONSTELLATIONS = {Modulation.QPSK: _qpsk(), Modulation.QAM16: _qam16()}


@dataclass(frozen=True)
class FrameConfig:
    """Numerology of one frame. ``cp_len`` defaults to ``M // 4``."""

    M: int = 64
    N: int = 16
    delta_f: float = 60e3
    cp_len: int | None = None
    carrier_hz: float = 6e9
    pilot: PilotSpec = field(default_factory=PilotSpec)
    modulation: Modulation = Modulation.QAM16

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise FrameError(f"M and N must be positive, got M={self.M}, N={self.N}")
        if self.cp_len is None:
            object.__setattr__(self, "cp_len", self.M // 4)
        if not 0 <= self.cp_len <= self.M:
            raise FrameError(f"cp_len must lie in [0, M], got {self.cp_len}")
        if self.delta_f <= 0 or self.carrier_hz <= 0:
            raise FrameError("delta_f and carrier_hz must be positive")
        if isinstance(self.modulation, str):
            object.__setattr__(self, "modulation", Modulation(self.modulation))
        self.pilot.check_frame(self.M, self.N)
        for name, n in (("M", self.M), ("N", self.N)):
            if n & (n - 1):
                warnings.warn(f"{name}={n} is not a power of two; FFTs will be slower",
                              stacklevel=3)

    @property
    def symbol_len(self) -> int:
        return self.M + self.cp_len

    @property
    def num_samples(self) -> int:
        return self.N * self.symbol_len

    def build_pilot(self) -> Pilot2D:
        return assemble(self.pilot, self)

    def with_pilot(self, **changes) -> FrameConfig:
        from dataclasses import replace
        return replace(self, pilot=replace(self.pilot, **changes))


@dataclass(frozen=True, eq=False)
class TxFrame:
    data_tf: ComplexGrid
    x_tf: ComplexGrid
    samples: np.ndarray
    payload_bits: np.ndarray | None = None


def data_positions(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the free resource elements in column-major order."""
    cols, rows = np.nonzero(~np.asarray(mask, dtype=bool).T)
    return rows, cols


def map_data(bits: np.ndarray, mask: np.ndarray, modulation: Modulation) -> ComplexGrid:
    """Place Gray-mapped symbols on every resource element not covered by ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = data_positions(mask)
    if len(rows) == 0:
        raise FrameError("no data capacity: the pilot occupies every resource element")
    bps = modulation.bits_per_symbol
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size != bps * len(rows):
        raise FrameError(f"need {bps * len(rows)} bits for {len(rows)} symbols, got {bits.size}")
    weights = 1 << np.arange(bps - 1, -1, -1)
    idx = bits.reshape(-1, bps) @ weights
    grid = np.zeros(mask.shape, dtype=np.complex128)
    grid[rows, cols] = modulation.points[idx]
    return ComplexGrid(grid, Domain.TIME_FREQUENCY)


def data_capacity(mask: np.ndarray, modulation: Modulation) -> int:
    return int((~np.asarray(mask, dtype=bool)).sum()) * modulation.bits_per_symbol


def add_cp(td: np.ndarray, cp_len: int) -> np.ndarray:
    """Prepend the last ``cp_len`` rows of every column."""
    if cp_len == 0:
        return np.array(td, copy=True)
    return np.vstack([td[-cp_len:], td])


def tf_to_samples(x_tf: ComplexGrid, cp_len: int) -> np.ndarray:
    """Per-symbol IDFT, cyclic prefix, and serialization symbol by symbol."""
    td = dft_cols(x_tf, Direction.INVERSE)
    return add_cp(td.data, cp_len).ravel(order="F")


def modulate(cfg: FrameConfig, pilot, data_tf: ComplexGrid,
             payload_bits: np.ndarray | None = None) -> TxFrame:
    """Implant the TF pilot into ``data_tf`` and produce the CP-OFDM sample stream.

    ``pilot`` is anything with ``tf`` and ``occupied_tf_mask`` (a :class:`Pilot2D`
    or a conventional comb DMRS).
    """
    if data_tf.domain is not Domain.TIME_FREQUENCY:
        raise FrameError("data grid must be on the time-frequency plane")
    if data_tf.shape != (cfg.M, cfg.N) or pilot.tf.shape != data_tf.shape:
        raise ShapeError(f"frame is {cfg.M}x{cfg.N}, got data {data_tf.shape} / pilot {pilot.tf.shape}")
    if np.any(data_tf.data[pilot.occupied_tf_mask] != 0):
        raise FrameError("data overlaps the pilot comb")
    x_tf = ComplexGrid(pilot.tf.data + data_tf.data, Domain.TIME_FREQUENCY)
    return TxFrame(data_tf, x_tf, tf_to_samples(x_tf, cfg.cp_len), payload_bits)


def transmit(cfg: FrameConfig, pilot, bits: np.ndarray) -> TxFrame:
    data = map_data(bits, pilot.occupied_tf_mask, cfg.modulation)
    return modulate(cfg, pilot, data, payload_bits=np.asarray(bits))


def demodulate_frame_sync(samples: np.ndarray, cfg: FrameConfig) -> ComplexGrid:
    """Strip the CP of each symbol and take its DFT (perfect timing assumed)."""
    samples = np.asarray(samples)
    if samples.ndim != 1 or samples.size != cfg.num_samples:
        raise FrameError(f"expected {cfg.num_samples} samples, got {samples.size}")
    blocks = samples.reshape(cfg.N, cfg.symbol_len).T
    td = ComplexGrid(blocks[cfg.cp_len:], Domain.TIME_DELAY)
    return dft_cols(td, Direction.FORWARD)


def papr_db(samples: np.ndarray) -> float:
    power = np.abs(samples) ** 2
    return float(10 * np.log10(power.max() / power.mean()))


def dump_iq(samples: np.ndarray, path) -> None:
    """Write samples as interleaved little-endian float32 I/Q pairs."""
    out = np.empty(2 * len(samples), dtype="<f4")
    out[0::2] = np.real(samples)
    out[1::2] = np.imag(samples)
    out.tofile(path)


def load_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    return raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
