"""OFDM receiver: comb channel estimation, single-tap MMSE, hard demapping."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .frame import Modulation, data_positions
from .grid import ComplexGrid, Domain, ShapeError

RELIABILITY_FLOOR = 1e-6
DIVISION_FLOOR = 1e-12


class EstimationMethod(enum.Enum):
    LS_COMB_INTERP = "ls_comb_interp"
    GENIE_DIAGONAL = "genie_diagonal"


@dataclass(frozen=True, eq=False)
class TfChannelEstimate:
    h_tf: ComplexGrid
    noise_var: float
    method: EstimationMethod

    def __post_init__(self):
        if not np.all(np.isfinite(self.h_tf.data)):
            raise ValueError("channel estimate has non-finite entries")


def _interp_complex(x_new, x, y):
    # np.interp holds the end values outside [x0, x-1], i.e. nearest extension
    return np.interp(x_new, x, y.real) + 1j * np.interp(x_new, x, y.imag)


def estimate_channel(y_tf: ComplexGrid, pilot, sigma2: float,
                     reliability_floor: float = RELIABILITY_FLOOR) -> TfChannelEstimate:
    """LS on the comb, then linear interpolation along frequency in every symbol.

    ``pilot`` is anything carrying ``tf`` and ``occupied_tf_mask``. Comb
    elements weaker than ``reliability_floor * max|p|`` are treated as holes.
    Symbols without usable pilots (``d_t > 1``) are filled by linear
    interpolation across symbols.
    """
    if y_tf.domain is not Domain.TIME_FREQUENCY:
        raise ValueError("estimate_channel expects a time-frequency grid")
    p = pilot.tf.data
    if y_tf.shape != p.shape:
        raise ShapeError(f"received grid {y_tf.shape} does not match pilot {p.shape}")
    mask = np.asarray(pilot.occupied_tf_mask, dtype=bool)
    if not mask.any():
        raise ValueError("pilot comb is empty")
    mag = np.abs(p)
    usable = mask & (mag >= reliability_floor * mag.max())
    M, N = p.shape
    rows = np.arange(M)
    h = np.zeros((M, N), dtype=np.complex128)
    have = np.zeros(N, dtype=bool)
    y = y_tf.data
    for n in range(N):
        sel = np.nonzero(usable[:, n])[0]
        if sel.size == 0:
            continue
        ls = y[sel, n] / p[sel, n]
        h[:, n] = _interp_complex(rows, sel, ls)
        have[n] = True
    if not have.all():
        cols = np.nonzero(have)[0]
        for m in range(M):
            h[m, ~have] = _interp_complex(np.nonzero(~have)[0], cols, h[m, cols])
    return TfChannelEstimate(ComplexGrid(h, Domain.TIME_FREQUENCY), float(sigma2),
                             EstimationMethod.LS_COMB_INTERP)


def genie_estimate(h_true: np.ndarray, sigma2: float) -> TfChannelEstimate:
    return TfChannelEstimate(ComplexGrid(h_true, Domain.TIME_FREQUENCY), float(sigma2),
                             EstimationMethod.GENIE_DIAGONAL)


def equalize_mmse(y_tf: ComplexGrid, est: TfChannelEstimate) -> ComplexGrid:
    """``x = conj(h) y / (|h|^2 + sigma2)``; ``sigma2 = 0`` gives zero forcing."""
    h = est.h_tf.data
    if y_tf.shape != h.shape:
        raise ShapeError(f"received grid {y_tf.shape} does not match estimate {h.shape}")
    den = np.abs(h) ** 2 + est.noise_var
    den = np.maximum(den, DIVISION_FLOOR)
    return ComplexGrid(np.conj(h) * y_tf.data / den, Domain.TIME_FREQUENCY)


def demap(x_hat: ComplexGrid, mask: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Minimum-distance hard decisions on the data positions, column-major.

    A point equidistant from several constellation points goes to the lowest
    bit label among them.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x_hat.shape:
        raise ShapeError(f"mask {mask.shape} does not match grid {x_hat.shape}")
    rows, cols = data_positions(mask)
    sym = x_hat.data[rows, cols]
    pts = modulation.points
    d = np.abs(sym[:, None] - pts[None, :]) ** 2
    # round so exact ties are not split by last-bit noise; argmin picks the first
    idx = np.argmin(np.round(d, 12), axis=1)
    bps = modulation.bits_per_symbol
    shifts = np.arange(bps - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8).ravel()


def ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.shape != rx.shape:
        raise ValueError(f"bit vectors differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("empty bit vectors")
    return float(np.count_nonzero(tx != rx) / tx.size)


def nmse(h_est, h_true) -> float:
    """``||h_est - h_true||_F^2 / ||h_true||_F^2``."""
    a = getattr(h_est, "data", h_est)
    b = getattr(h_true, "data", h_true)
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    ref = np.sum(np.abs(b) ** 2)
    if ref == 0:
        raise ValueError("reference channel is identically zero")
    return float(np.sum(np.abs(a - b) ** 2) / ref)
