"""Maximal-length LFSR sequences and their cyclic correlation profile.

Polynomials are given as integer tap masks with bit ``i`` holding the
coefficient of ``x**i``; ``0x43`` is ``x^6 + x + 1``. Bits map to symbols as
``0 -> +1`` and ``1 -> -1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

# Two distinct primitive polynomials per degree; the first drives the delay
# sequence, the second the Doppler sequence. Degree 2 has only one.
PRIMITIVE_TAPS = {
    2: (0x7, 0x7),
    3: (0xB, 0xD),
    4: (0x13, 0x19),
    5: (0x25, 0x3D),
    6: (0x43, 0x67),
    7: (0x83, 0x89),
    8: (0x11D, 0x12B),
    9: (0x211, 0x259),
    10: (0x409, 0x41B),
    11: (0x805, 0x82B),
    12: (0x1053, 0x1099),
}


class SequenceError(ValueError):
    pass


class NonPrimitivePolynomial(SequenceError):
    """The register does not cycle through all ``2**degree - 1`` states."""

    def __init__(self, taps: int, degree: int, period: int | None):
        self.taps = taps
        self.degree = degree
        self.period = period
        measured = "never returns to the seed" if period is None else f"period {period}"
        super().__init__(
            f"taps {taps:#x} are not primitive for degree {degree}: "
            f"{measured}, expected {2 ** degree - 1}"
        )


@dataclass(frozen=True)
class MSequenceSpec:
    degree: int
    taps: int
    seed_state: int = 1

    def __post_init__(self):
        if self.degree < 2:
            raise SequenceError(f"degree must be >= 2, got {self.degree}")
        if self.taps >> self.degree != 1:
            raise SequenceError(
                f"taps {self.taps:#x} must have x^{self.degree} as leading term"
            )
        if not 0 < self.seed_state < 2 ** self.degree:
            raise SequenceError(
                f"seed_state must be a nonzero {self.degree}-bit fill, got {self.seed_state}"
            )

    @classmethod
    def default(cls, degree: int, which: int = 0) -> MSequenceSpec:
        """Spec from :data:`PRIMITIVE_TAPS`; ``which`` selects the polynomial."""
        try:
            taps = PRIMITIVE_TAPS[degree][which]
        except KeyError:
            raise SequenceError(f"no default polynomial for degree {degree}") from None
        return cls(degree, taps)


def _lfsr_bits(spec: MSequenceSpec, count: int) -> tuple[np.ndarray, int | None]:
    """``count`` output bits and the measured state period (None if the seed never recurs)."""
    d = spec.degree
    feedback = spec.taps & ((1 << d) - 1)
    state = spec.seed_state
    bits = np.empty(count, dtype=np.int8)
    period = None
    limit = max(count, 2 ** d)
    for n in range(limit):
        if n < count:
            bits[n] = state & 1
        # s[n+d] = xor of s[n+i] over the nonzero coefficients c_i, i < d
        fb = (state & feedback).bit_count() & 1
        state = (state >> 1) | (fb << (d - 1))
        if period is None and state == spec.seed_state:
            period = n + 1
            if n + 1 >= count:
                break
    return bits, period


def measure_period(spec: MSequenceSpec) -> int | None:
    _, period = _lfsr_bits(spec, 0)
    return period


def generate_mseq(spec: MSequenceSpec) -> np.ndarray:
    """One full period of the m-sequence as a ``+/-1`` float array.

    Raises :class:`NonPrimitivePolynomial` if the register period is not
    ``2**degree - 1``.
    """
    length = 2 ** spec.degree - 1
    bits, period = _lfsr_bits(spec, length)
    if period != length:
        raise NonPrimitivePolynomial(spec.taps, spec.degree, period)
    return 1.0 - 2.0 * bits.astype(np.float64)


def _flatness_loss(seq: np.ndarray) -> float:
    power = np.abs(np.fft.fft(seq)) ** 2
    if power.min() <= 1e-12:
        return math.inf
    return float(np.mean(1.0 / power) * np.mean(power))


def extend_by_one(seq: np.ndarray) -> np.ndarray:
    """Insert one chip, keeping the sidelobes next to the peak small and the spectrum flat.

    Every insertion position and both chip values are tried. Candidates are
    ranked by the magnitude of the shift-1 cyclic autocorrelation (it sets the
    leakage into adjacent Doppler bins), then by the flatness loss
    ``mean(1/|S|^2) * mean(|S|^2)`` (1.0 for a perfectly flat spectrum).
    Ties keep the earliest candidate.
    """
    best, best_key = None, (math.inf, math.inf)
    for pos in range(len(seq) + 1):
        for chip in (1.0, -1.0):
            cand = np.insert(seq, pos, chip)
            side = abs(float(np.dot(cand, np.roll(cand, 1))))
            key = (side, _flatness_loss(cand))
            if key[0] < best_key[0] or (key[0] == best_key[0] and key[1] < best_key[1] - 1e-12):
                best, best_key = cand, key
    return best


def component_sequence(length: int, spec: MSequenceSpec | None = None, which: int = 0) -> np.ndarray:
    """A ``+/-1`` sequence of exactly ``length`` chips built from an m-sequence.

    ``2**n - 1`` chips give the plain m-sequence, ``2**n`` chips the one-chip
    extension of the degree-``n`` sequence. Any other length is a truncated
    m-sequence of the next degree, which loses the two-valued autocorrelation
    and is reported with a warning.
    """
    if length < 1:
        raise SequenceError(f"sequence length must be positive, got {length}")
    if length == 1:
        return np.ones(1)
    if length == 2:
        return np.array([1.0, -1.0])
    if length & (length - 1) == 0:
        degree = length.bit_length() - 1
        extend = True
    else:
        degree = math.ceil(math.log2(length + 1))
        extend = False
    if spec is None:
        spec = MSequenceSpec.default(degree, which)
    elif spec.degree != degree:
        raise SequenceError(
            f"a length-{length} component needs degree {degree}, spec has {spec.degree}"
        )
    base = generate_mseq(spec)
    if extend:
        return extend_by_one(base)
    if len(base) != length:
        warnings.warn(
            f"length {length} is not 2^n or 2^n-1; truncating a {len(base)}-chip m-sequence",
            stacklevel=2,
        )
    return base[:length]


def cyclic_autocorr(s: np.ndarray, shift: int) -> float:
    """``(1/L) * sum_n s[n] * s[(n - shift) mod L]``."""
    s = np.asarray(s, dtype=np.float64)
    return float(np.dot(s, np.roll(s, shift)) / len(s))


def _cyclic_corr_all(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``c[t] = (1/L) sum_n a[n] b[(n - t) mod L]`` for every t."""
    # exact integer sums; sequences are short enough for the direct form
    L = len(a)
    idx = (np.arange(L)[None, :] - np.arange(L)[:, None]) % L
    return (b[idx] @ a) / L


@dataclass(frozen=True)
class CorrelationProfile:
    peak: float
    max_offpeak_abs: float
    cross_max_abs: float | None
    offpeak_a: float
    offpeak_b: float


def profile(a: np.ndarray, b: np.ndarray) -> CorrelationProfile:
    """Exhaustive cyclic auto/cross-correlation scan of two component sequences.

    ``cross_max_abs`` is only defined when both sequences have equal length.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ca = _cyclic_corr_all(a, a)
    cb = _cyclic_corr_all(b, b)
    off_a = float(np.max(np.abs(ca[1:]))) if len(a) > 1 else 0.0
    off_b = float(np.max(np.abs(cb[1:]))) if len(b) > 1 else 0.0
    cross = None
    if len(a) == len(b):
        cross = float(np.max(np.abs(_cyclic_corr_all(a, b))))
    return CorrelationProfile(
        peak=float(min(ca[0], cb[0])),
        max_offpeak_abs=max(off_a, off_b),
        cross_max_abs=cross,
        offpeak_a=off_a,
        offpeak_b=off_b,
    )
