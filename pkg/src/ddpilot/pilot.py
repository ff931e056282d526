"""The 2-D delay-Doppler pilot and its comb image on the TF plane.

The base block is the outer product of a delay sequence ``b`` (length
``M/d_f``) and a Doppler sequence ``a`` (length ``N/d_t``). Tiling the base
block ``d_f`` times along delay and ``d_t`` times along Doppler makes its
ISFFT vanish off a comb of ``MN/(d_f d_t)`` resource elements, which then acts
as the DMRS for the OFDM data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexGrid, Domain, cyclic_shift, isfft
from .sequences import (
    MSequenceSpec,
    component_sequence,
    generate_mseq,
)

COMB_THRESHOLD = 1e-9


class PilotError(ValueError):
    pass


@dataclass(frozen=True)
class PilotSpec:
    """Pilot geometry and power.

    ``seq_delay`` and ``seq_doppler`` default to the built-in primitive
    polynomials for the required lengths. ``power_scale`` is the per-element
    pilot power relative to unit data power.
    """

    d_f: int = 2
    d_t: int = 1
    power_scale: float = 0.2
    seq_delay: MSequenceSpec | None = None
    seq_doppler: MSequenceSpec | None = None

    def __post_init__(self):
        if self.d_f < 1 or self.d_t < 1:
            raise PilotError(f"densities must be >= 1, got d_f={self.d_f}, d_t={self.d_t}")
        if self.power_scale < 0:
            raise PilotError(f"power_scale must be >= 0, got {self.power_scale}")

    def check_frame(self, M: int, N: int):
        if M % self.d_f:
            raise PilotError(f"d_f must divide M: d_f={self.d_f}, M={M}")
        if N % self.d_t:
            raise PilotError(f"d_t must divide N: d_t={self.d_t}, N={N}")


@dataclass(frozen=True, eq=False)
class Pilot2D:
    base_block: ComplexGrid
    full_dd: ComplexGrid
    tf: ComplexGrid
    occupied_tf_mask: np.ndarray
    delay_seq: np.ndarray
    doppler_seq: np.ndarray
    d_f: int
    d_t: int
    power_scale: float
    _key: bytes = field(default=b"", repr=False)

    @property
    def M(self) -> int:
        return self.full_dd.rows

    @property
    def N(self) -> int:
        return self.full_dd.cols

    @property
    def delay_window(self) -> int:
        return self.M // self.d_f

    @property
    def doppler_window(self) -> int:
        return self.N // self.d_t

    @property
    def delay_factor(self) -> np.ndarray:
        """Length-M column of the rank-1 full pilot (amplitude scale included)."""
        return np.sqrt(self.power_scale) * np.tile(self.delay_seq, self.d_f)

    @property
    def doppler_factor(self) -> np.ndarray:
        return np.tile(self.doppler_seq, self.d_t).astype(np.complex128)

    @property
    def key(self) -> bytes:
        """Content fingerprint, used to cache per-pilot tables."""
        return self._key


def build_base_block(a: np.ndarray, b: np.ndarray, q: int = 0, p: int = 0) -> ComplexGrid:
    """``block[l, k] = b[(l - p) mod P] * a[(k - q) mod Q]``."""
    a = np.roll(np.asarray(a, dtype=np.float64), q)
    b = np.roll(np.asarray(b, dtype=np.float64), p)
    return ComplexGrid(np.outer(b, a), Domain.DELAY_DOPPLER)


def _finish(base: ComplexGrid, b: np.ndarray, a: np.ndarray, d_f: int, d_t: int,
            power_scale: float) -> Pilot2D:
    full = np.sqrt(power_scale) * np.tile(base.data, (d_f, d_t))
    full_dd = ComplexGrid(full, Domain.DELAY_DOPPLER)
    tf = isfft(full_dd)
    mag = np.abs(tf.data)
    peak = mag.max()
    mask = mag > COMB_THRESHOLD * peak if peak > 0 else np.zeros(mag.shape, dtype=bool)
    mask.setflags(write=False)
    key = b"".join([full_dd.data.tobytes(), bytes([d_f, d_t])])
    return Pilot2D(base, full_dd, tf, mask, np.asarray(b, float), np.asarray(a, float),
                   d_f, d_t, float(power_scale), key)


def assemble(spec: PilotSpec, frame) -> Pilot2D:
    """Build the pilot for a frame of ``frame.M`` delay taps and ``frame.N`` Doppler taps."""
    M, N = frame.M, frame.N
    spec.check_frame(M, N)
    P, Q = M // spec.d_f, N // spec.d_t
    b = component_sequence(P, spec.seq_delay, which=0)
    a = component_sequence(Q, spec.seq_doppler, which=1)
    if len(b) != P or len(a) != Q:
        raise PilotError(f"sequence lengths {len(b)}x{len(a)} do not match base block {P}x{Q}")
    return _finish(build_base_block(a, b), b, a, spec.d_f, spec.d_t, spec.power_scale)


def impulse_pilot(spec: PilotSpec, frame) -> Pilot2D:
    """An impulse base block carrying the same energy as the sequence pilot."""
    M, N = frame.M, frame.N
    spec.check_frame(M, N)
    P, Q = M // spec.d_f, N // spec.d_t
    b = np.zeros(P)
    a = np.zeros(Q)
    b[0] = np.sqrt(P)
    a[0] = np.sqrt(Q)
    return _finish(build_base_block(a, b), b, a, spec.d_f, spec.d_t, spec.power_scale)


def local_replica(p: Pilot2D, l: int, k: int) -> ComplexGrid:
    """The full pilot cyclically shifted to hypothesis ``(l, k)``.

    Only shifts inside the unambiguous window are accepted; larger shifts alias
    onto a tiled copy of the base block.
    """
    if not (0 <= l < p.delay_window and 0 <= k < p.doppler_window):
        raise PilotError(
            f"hypothesis ({l}, {k}) outside the unambiguous window "
            f"[0, {p.delay_window}) x [0, {p.doppler_window})"
        )
    return cyclic_shift(p.full_dd, l, k)


@dataclass(frozen=True, eq=False)
class CombDmrs:
    """A TF-plane reference signal without DD structure."""

    tf: ComplexGrid
    occupied_tf_mask: np.ndarray


def conventional_dmrs(pilot: Pilot2D) -> CombDmrs:
    """Flat-magnitude BPSK DMRS on the same comb, with the same total energy."""
    mask = pilot.occupied_tf_mask
    count = int(mask.sum())
    if count == 0:
        raise PilotError("pilot occupies no resource elements")
    degree = max(3, int(np.ceil(np.log2(count + 1))))
    chips = np.resize(generate_mseq(MSequenceSpec.default(degree)), count)
    amp = np.sqrt(pilot.power_scale * mask.size / count)
    data = np.zeros(mask.shape, dtype=np.complex128)
    cols, rows = np.nonzero(mask.T)
    data[rows, cols] = amp * chips
    return CombDmrs(ComplexGrid(data, Domain.TIME_FREQUENCY), mask)
