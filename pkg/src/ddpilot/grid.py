"""Complex sample grids and the transforms between the DD and TF planes.

Axis convention used throughout the package: rows are delay taps (DD plane)
or subcarriers (TF plane), columns are Doppler taps (DD plane) or OFDM
symbols (TF plane). All DFTs are unitary.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Domain(enum.Enum):
    DELAY_DOPPLER = "delay-doppler"
    TIME_FREQUENCY = "time-frequency"
    TIME_DELAY = "time-delay"


class Direction(enum.Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


class DomainError(ValueError):
    """A grid was passed to a transform defined for another plane."""


class ShapeError(ValueError):
    """Grid dimensions are incompatible with the operation."""


@dataclass(frozen=True, eq=False)
class ComplexGrid:
    """An immutable ``rows x cols`` complex matrix tagged with its plane."""

    data: np.ndarray
    domain: Domain

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, order="C", copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"grid data must be a non-empty 2-D array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if not isinstance(self.domain, Domain):
            raise TypeError(f"domain must be a Domain, got {self.domain!r}")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def replace(self, data: np.ndarray) -> ComplexGrid:
        """New grid in the same domain holding ``data``."""
        return ComplexGrid(data, self.domain)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    @classmethod
    def zeros(cls, rows: int, cols: int, domain: Domain) -> ComplexGrid:
        return cls(np.zeros((rows, cols), dtype=np.complex128), domain)


def _require(g: ComplexGrid, domain: Domain, op: str):
    if g.domain is not domain:
        raise DomainError(f"{op} expects a {domain.value} grid, got {g.domain.value}")


def _same_shape(a: ComplexGrid, b: ComplexGrid, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: dimension mismatch {a.shape} vs {b.shape}")


_DFT_COLS_DOMAIN = {
    (Direction.FORWARD, Domain.TIME_DELAY): Domain.TIME_FREQUENCY,
    (Direction.INVERSE, Domain.TIME_FREQUENCY): Domain.TIME_DELAY,
}


def dft_cols(g: ComplexGrid, direction: Direction) -> ComplexGrid:
    """Unitary M-point DFT (or IDFT) of every column.

    Forward maps a time-delay grid to the time-frequency plane, inverse goes
    back.
    """
    try:
        out_domain = _DFT_COLS_DOMAIN[(direction, g.domain)]
    except KeyError:
        raise DomainError(
            f"dft_cols {direction.value} is not defined on a {g.domain.value} grid"
        ) from None
    if direction is Direction.FORWARD:
        data = np.fft.fft(g.data, axis=0, norm="ortho")
    else:
        data = np.fft.ifft(g.data, axis=0, norm="ortho")
    return ComplexGrid(data, out_domain)


def isfft(dd: ComplexGrid) -> ComplexGrid:
    """DD grid to TF grid: ``F_M @ P @ F_N^H`` with unitary factors."""
    _require(dd, Domain.DELAY_DOPPLER, "isfft")
    data = np.fft.fft(np.fft.ifft(dd.data, axis=1, norm="ortho"), axis=0, norm="ortho")
    return ComplexGrid(data, Domain.TIME_FREQUENCY)


def sfft(tf: ComplexGrid) -> ComplexGrid:
    """TF grid to DD grid, the exact inverse of :func:`isfft`."""
    _require(tf, Domain.TIME_FREQUENCY, "sfft")
    data = np.fft.fft(np.fft.ifft(tf.data, axis=0, norm="ortho"), axis=1, norm="ortho")
    return ComplexGrid(data, Domain.DELAY_DOPPLER)


def cyclic_shift(g: ComplexGrid, dl: int, dk: int) -> ComplexGrid:
    """``out[l, k] = g[(l - dl) mod M, (k - dk) mod N]``."""
    return g.replace(np.roll(g.data, (int(dl), int(dk)), axis=(0, 1)))


def inner_product(a: ComplexGrid, b: ComplexGrid) -> complex:
    """``sum(conj(a) * b)``; the first argument is conjugated."""
    _same_shape(a, b, "inner_product")
    return complex(np.vdot(a.data, b.data))


def hadamard(a: ComplexGrid, b: ComplexGrid) -> ComplexGrid:
    _same_shape(a, b, "hadamard")
    return a.replace(a.data * b.data)


def hadamard_div(a: ComplexGrid, b: ComplexGrid, floor: float = 0.0) -> ComplexGrid:
    """Pointwise ``a / b`` with ``floor`` added to ``|b|`` along the phase of ``b``.

    A zero entry in ``b`` is treated as a positive real before flooring.
    """
    _same_shape(a, b, "hadamard_div")
    if floor < 0:
        raise ValueError("floor must be non-negative")
    den = b.data
    if floor > 0:
        mag = np.abs(den)
        unit = np.where(mag > 0, den / np.where(mag > 0, mag, 1.0), 1.0)
        den = unit * (mag + floor)
    return a.replace(a.data / den)
