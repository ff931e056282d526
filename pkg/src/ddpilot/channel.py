"""Doubly dispersive channel, simulated on the DD plane and in the time domain.

Both routes describe the same physics (per-path integer delay, integer plus
fractional Doppler, complex gain) and are used as oracles for each other:
:func:`apply_dd` works on DD samples directly, :func:`apply_time` on the
CP-OFDM sample stream.

With a cyclic prefix on every OFDM symbol a delayed sample never crosses a
symbol boundary, so the DD input-output relation for path ``i`` is::

    r[l, k] = h * sum_q beta(q)/N * x[l - l_i, k - k_i + q]
              * exp(j 2 pi (L_cp + l - l_i)(k_i + kappa_i) / (N (M + L_cp)))

with the rectangular-pulse leakage kernel
``beta(q) = (exp(j 2 pi (q + kappa)) - 1) / (exp(j 2 pi (q + kappa)/N) - 1)``.
Summing ``q`` over all ``N`` residues makes the relation exact.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .frame import FrameConfig
from .grid import ComplexGrid, Domain, DomainError
from .metrics import Numerology, SPEED_OF_LIGHT, velocity_to_doppler_hz

# 3GPP TS 36.101 Annex B.2.1, Extended Vehicular A model
EVA_DELAYS_NS = (0, 30, 150, 310, 370, 710, 1090, 1730, 2510)
EVA_POWERS_DB = (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelPath:
    delay_tap: int
    doppler_tap: int = 0
    frac_doppler: float = 0.0
    gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.delay_tap < 0:
            raise ChannelError(f"delay_tap must be >= 0, got {self.delay_tap}")
        if abs(self.frac_doppler) > 0.5:
            raise ChannelError(f"|frac_doppler| must be <= 0.5, got {self.frac_doppler}")

    @classmethod
    def from_doppler(cls, delay_tap: int, doppler_bins: float, gain: complex = 1.0) -> ChannelPath:
        k = int(np.rint(doppler_bins))
        return cls(int(delay_tap), k, float(doppler_bins - k), complex(gain))

    @property
    def doppler(self) -> float:
        """Total Doppler in bins."""
        return self.doppler_tap + self.frac_doppler


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[ChannelPath, ...]
    noise_var: float = 0.0
    idi_span: int = 5

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        if not self.paths:
            raise ChannelError("a channel needs at least one path")
        if self.noise_var < 0:
            raise ChannelError("noise_var must be >= 0")
        if self.idi_span < 0:
            raise ChannelError("idi_span must be >= 0")

    def check(self, cfg: FrameConfig):
        for p in self.paths:
            if p.delay_tap >= max(cfg.cp_len, 1):
                raise ChannelError(
                    f"delay tap {p.delay_tap} is not covered by the cyclic prefix "
                    f"(cp_len={cfg.cp_len})"
                )
        if self.idi_span > cfg.N // 2:
            raise ChannelError(f"idi_span {self.idi_span} exceeds N/2 = {cfg.N // 2}")


def snr_to_noise_var(snr_db: float) -> float:
    """Noise variance for unit average data-symbol power."""
    return float(10.0 ** (-snr_db / 10.0))


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def complex_noise(shape, noise_var: float, rng) -> np.ndarray:
    g = _rng(rng)
    scale = np.sqrt(noise_var / 2.0)
    return scale * (g.standard_normal(shape) + 1j * g.standard_normal(shape))


def idi_offsets(span: int, N: int) -> np.ndarray:
    """Doppler leakage offsets ``-span..span`` with duplicates modulo N removed."""
    seen, out = set(), []
    for q in range(-span, span + 1):
        if q % N not in seen:
            seen.add(q % N)
            out.append(q)
    return np.array(out, dtype=np.int64)


def beta(q, kappa: float, N: int) -> np.ndarray:
    """Leakage kernel ``sum_{n<N} exp(j 2 pi n (q + kappa) / N)``.

    The removable singularity at ``q + kappa = 0 (mod N)`` evaluates to N.
    """
    q = np.asarray(q, dtype=np.float64)
    x = q + kappa
    if kappa == 0.0:
        return np.where(np.mod(q, N) == 0, float(N), 0.0).astype(np.complex128)
    num = np.exp(2j * np.pi * x) - 1.0
    den = np.exp(2j * np.pi * x / N) - 1.0
    singular = np.isclose(np.mod(x + N / 2, N) - N / 2, 0.0, atol=1e-12)
    safe = np.where(singular, 1.0, den)
    return np.where(singular, float(N), num / safe)


def _row_phase(cfg: FrameConfig, delay: int, doppler: float) -> np.ndarray:
    l = np.arange(cfg.M)
    return np.exp(2j * np.pi * (cfg.cp_len + l - delay) * doppler / (cfg.N * cfg.symbol_len))


def apply_dd(tx_dd: ComplexGrid, ch: ChannelRealization, cfg: FrameConfig,
             rng=None) -> ComplexGrid:
    """DD-plane twisted convolution with fractional-Doppler leakage plus AWGN.

    Leakage is truncated to ``|q| <= ch.idi_span`` Doppler bins around each
    path; ``idi_span >= N/2`` gives the exact response.
    """
    if tx_dd.domain is not Domain.DELAY_DOPPLER:
        raise DomainError("apply_dd expects a delay-doppler grid")
    ch.check(cfg)
    M, N = tx_dd.shape
    tx = np.ascontiguousarray(tx_dd.data)
    out = np.zeros((M, N), dtype=np.complex128)
    for p in ch.paths:
        if p.frac_doppler != 0.0 and ch.idi_span == 0:
            warnings.warn("fractional Doppler with idi_span=0 ignores all leakage", stacklevel=2)
        if p.frac_doppler == 0.0:
            offsets = np.zeros(1, dtype=np.int64)
        else:
            offsets = idi_offsets(ch.idi_span, N)
        coef = complex(p.gain) * beta(offsets, p.frac_doppler, N) / N
        _kernels.twisted_accumulate(out, tx, p.delay_tap, p.doppler_tap, offsets,
                                    np.ascontiguousarray(coef),
                                    _row_phase(cfg, p.delay_tap, p.doppler))
    if ch.noise_var > 0:
        out += complex_noise(out.shape, ch.noise_var, rng)
    return ComplexGrid(out, Domain.DELAY_DOPPLER)


def apply_integer_dd(tx_dd: ComplexGrid, ch: ChannelRealization, cfg: FrameConfig,
                     rng=None, pre_delay_branch: bool = False) -> ComplexGrid:
    """Integer-only DD channel: fractional Doppler and leakage dropped.

    ``pre_delay_branch`` applies the extra ``(N-1)/N`` factor and phase to rows
    ``l < l_i``; that term belongs to frames without a per-symbol CP and is off
    by default.
    """
    if tx_dd.domain is not Domain.DELAY_DOPPLER:
        raise DomainError("apply_integer_dd expects a delay-doppler grid")
    ch.check(cfg)
    M, N = tx_dd.shape
    out = np.zeros((M, N), dtype=np.complex128)
    cols = np.arange(N)
    for p in ch.paths:
        shifted = np.roll(tx_dd.data, (p.delay_tap, p.doppler_tap), axis=(0, 1))
        term = complex(p.gain) * _row_phase(cfg, p.delay_tap, p.doppler_tap)[:, None] * shifted
        if pre_delay_branch and p.delay_tap > 0:
            alpha = (N - 1) / N * np.exp(-2j * np.pi * np.mod(cols - p.doppler_tap, N) / N)
            term[:p.delay_tap] *= alpha[None, :]
        out += term
    if ch.noise_var > 0:
        out += complex_noise(out.shape, ch.noise_var, rng)
    return ComplexGrid(out, Domain.DELAY_DOPPLER)


def apply_time(samples: np.ndarray, ch: ChannelRealization, cfg: FrameConfig,
               rng=None) -> np.ndarray:
    """``y = sum_i h_i Pi^{l_i} Delta^{(k_i)} s + w`` on the CP-OFDM sample stream.

    The Doppler ramp runs over the global sample index; the delay is a cyclic
    shift inside each CP-extended symbol block.
    """
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.size != cfg.num_samples:
        raise ChannelError(f"expected {cfg.num_samples} samples, got {samples.size}")
    ch.check(cfg)
    n = np.arange(samples.size)
    denom = cfg.N * cfg.symbol_len
    y = np.zeros_like(samples)
    for p in ch.paths:
        ramped = samples * np.exp(2j * np.pi * p.doppler * n / denom)
        blocks = ramped.reshape(cfg.N, cfg.symbol_len)
        y += complex(p.gain) * np.roll(blocks, p.delay_tap, axis=1).ravel()
    if ch.noise_var > 0:
        y += complex_noise(y.shape, ch.noise_var, rng)
    return y


def symbol_channel_matrix(ch: ChannelRealization, cfg: FrameConfig, n: int) -> np.ndarray:
    """Effective ``M x M`` time-domain matrix of OFDM symbol ``n`` after CP removal."""
    M, L = cfg.M, cfg.cp_len
    H = np.zeros((M, M), dtype=np.complex128)
    t = np.arange(M)
    denom = cfg.N * cfg.symbol_len
    for p in ch.paths:
        src = (t - p.delay_tap) % M
        phase = np.exp(2j * np.pi * p.doppler * (n * cfg.symbol_len + L + t - p.delay_tap) / denom)
        H[t, src] += complex(p.gain) * phase
    return H


def tf_channel_diagonal(ch: ChannelRealization, cfg: FrameConfig) -> np.ndarray:
    """Per-resource-element channel: the diagonal of ``F H_n F^H`` for every symbol."""
    M, N, L = cfg.M, cfg.N, cfg.cp_len
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    t = np.arange(M)
    denom = N * cfg.symbol_len
    out = np.zeros((M, N), dtype=np.complex128)
    for p in ch.paths:
        ramp = np.exp(2j * np.pi * p.doppler * (L + t - p.delay_tap) / denom).mean()
        sym = np.exp(2j * np.pi * p.doppler * n * cfg.symbol_len / denom)
        out += complex(p.gain) * np.exp(-2j * np.pi * m * p.delay_tap / M) * ramp * sym
    return out


def random_targets(count: int, max_doppler: float, max_delay_tap: int, rng_seed,
                   doppler_window: int | None = None, distinct_delays: bool = True
                   ) -> list[ChannelPath]:
    """Echo paths with Doppler ~ U(0, max_doppler) bins and unit-variance complex gains.

    Delay taps are uniform on ``0..max_delay_tap``, drawn without replacement
    when ``distinct_delays`` so that every target is resolvable in delay.
    """
    if count < 1:
        raise ChannelError("count must be >= 1")
    if max_doppler < 0:
        raise ChannelError("max_doppler must be >= 0")
    if doppler_window is not None and max_doppler > doppler_window / 2:
        raise ChannelError(
            f"max Doppler {max_doppler:.3f} bins exceeds the unambiguous window "
            f"+/-{doppler_window / 2}"
        )
    rng = _rng(rng_seed)
    if distinct_delays and count > max_delay_tap + 1:
        raise ChannelError(f"cannot draw {count} distinct delays from 0..{max_delay_tap}")
    if distinct_delays:
        delays = rng.choice(max_delay_tap + 1, size=count, replace=False)
    else:
        delays = rng.integers(0, max_delay_tap + 1, size=count)
    dopplers = rng.uniform(0.0, max_doppler, size=count)
    gains = (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / np.sqrt(2)
    return [ChannelPath.from_doppler(int(l), float(d), complex(h))
            for l, d, h in zip(delays, dopplers, gains)]


def eva_paths(cfg: FrameConfig, velocity_kmh: float, rng) -> list[ChannelPath]:
    """One EVA realization resampled to the nearest tap at rate ``M * delta_f``.

    Taps landing on the same sample are merged; each merged tap gets a Rayleigh
    gain and a Doppler ``f_D cos(theta)`` with uniform ``theta``.
    """
    rng = _rng(rng)
    fs = cfg.M * cfg.delta_f
    taps = np.rint(np.asarray(EVA_DELAYS_NS) * 1e-9 * fs).astype(int)
    powers = 10.0 ** (np.asarray(EVA_POWERS_DB) / 10.0)
    uniq = np.unique(taps)
    merged = np.array([powers[taps == t].sum() for t in uniq])
    merged /= merged.sum()
    fd_bins = velocity_to_doppler_hz(velocity_kmh / 3.6, cfg.carrier_hz, two_way=False) \
        / Numerology.from_frame(cfg).doppler_resolution_hz
    gains = np.sqrt(merged / 2) * (rng.standard_normal(len(uniq)) + 1j * rng.standard_normal(len(uniq)))
    theta = rng.uniform(0.0, 2 * np.pi, size=len(uniq))
    return [ChannelPath.from_doppler(int(t), float(fd_bins * np.cos(th)), complex(g))
            for t, g, th in zip(uniq, gains, theta)]


__all__ = [
    "ChannelError", "ChannelPath", "ChannelRealization", "EVA_DELAYS_NS", "EVA_POWERS_DB",
    "SPEED_OF_LIGHT", "apply_dd", "apply_integer_dd", "apply_time", "beta", "complex_noise",
    "eva_paths", "idi_offsets", "random_targets", "snr_to_noise_var", "symbol_channel_matrix",
    "tf_channel_diagonal",
]
