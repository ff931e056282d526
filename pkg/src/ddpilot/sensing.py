"""Two-stage sensing receiver on the DD plane.

Stage one scans integer delay/Doppler hypotheses with a phase-compensated
2-D correlation against the local pilot and keeps the thresholded peaks.
Stage two refines each peak's Doppler with the ratio of the peak magnitude to
the sum over its ``+/-n_j`` Doppler neighbours, matched against the same
ratio synthesized for a noiseless single path with trial fractional Doppler.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import ChannelPath, ChannelRealization, beta, idi_offsets
from .frame import FrameConfig
from .grid import ComplexGrid, Domain, DomainError
from .metrics import Numerology, bins_to_physical
from .pilot import Pilot2D


@dataclass(frozen=True, eq=False)
class PhaseMatrix:
    grid: ComplexGrid


def phase_matrix(l: int, k: int, cfg: FrameConfig, pre_delay_branch: bool = False) -> PhaseMatrix:
    """Expected phase of the echo of hypothesis ``(l, k)`` on every DD sample.

    Entry ``(l', k')`` is ``exp(j 2 pi (L_cp + l' - l) k / (N (M + L_cp)))``;
    ``pre_delay_branch`` scales rows ``l' < l`` by ``(N-1)/N exp(-j 2 pi [k'-k]_N / N)``.
    """
    M, N = cfg.M, cfg.N
    rows = np.arange(M)[:, None]
    cols = np.arange(N)[None, :]
    data = np.exp(2j * np.pi * (cfg.cp_len + rows - l) * k / (N * cfg.symbol_len)) \
        * np.ones((1, N))
    if pre_delay_branch and l > 0:
        alpha = (N - 1) / N * np.exp(-2j * np.pi * np.mod(cols - k, N) / N)
        data[:l] *= alpha
    return PhaseMatrix(ComplexGrid(data, Domain.DELAY_DOPPLER))


@dataclass(frozen=True, eq=False)
class Surface:
    """Correlation magnitudes over the unambiguous window.

    ``values[l, j]`` is the hypothesis with delay tap ``l`` and signed Doppler
    tap ``doppler_taps[j]``.
    """

    values: np.ndarray
    complex_values: np.ndarray
    doppler_taps: np.ndarray

    @property
    def delay_taps(self) -> np.ndarray:
        return np.arange(self.values.shape[0])

    def column(self, k: int) -> int:
        return int(k) % self.values.shape[1]

    def at(self, l: int, k: int) -> float:
        return float(self.values[l % self.values.shape[0], self.column(k)])


def signed_doppler_taps(window: int) -> np.ndarray:
    j = np.arange(window)
    return np.where(j < (window + 1) // 2, j, j - window)


def _correlate_fft(r: np.ndarray, pilot: Pilot2D, cfg: FrameConfig, taps: np.ndarray,
                   compensate: bool) -> np.ndarray:
    M, N = r.shape
    P, Q = pilot.delay_window, pilot.doppler_window
    A = pilot.doppler_factor
    B = pilot.delay_factor.astype(np.complex128)
    # C[l', k] = sum_k' conj(A[k' - k]) r[l', k']
    C = np.fft.ifft(np.fft.fft(r, axis=1) * np.conj(np.fft.fft(A))[None, :], axis=1)[:, :Q]
    denom = N * cfg.symbol_len
    if compensate:
        rows = np.arange(M)[:, None]
        C = C * np.exp(-2j * np.pi * (cfg.cp_len + rows) * taps[None, :] / denom)
    out = np.fft.ifft(np.fft.fft(C, axis=0) * np.conj(np.fft.fft(B))[:, None], axis=0)[:P]
    if compensate:
        out = out * np.exp(2j * np.pi * np.arange(P)[:, None] * taps[None, :] / denom)
    return out


def correlate_direct(r: ComplexGrid, pilot: Pilot2D, cfg: FrameConfig, delays, dopplers,
                     compensate_phase: bool = True, pre_delay_branch: bool = False) -> np.ndarray:
    """Complex correlation at explicit hypotheses, summed term by term."""
    return _kernels.correlate_direct(
        np.ascontiguousarray(r.data), np.ascontiguousarray(pilot.full_dd.data),
        np.ascontiguousarray(delays, dtype=np.int64), np.ascontiguousarray(dopplers, dtype=np.int64),
        cfg.cp_len, bool(compensate_phase), bool(pre_delay_branch))


def correlate_integer(r: ComplexGrid, pilot: Pilot2D, cfg: FrameConfig, *,
                      compensate_phase: bool = True, method: str = "fft",
                      pre_delay_branch: bool = False, rescore: int = 16) -> Surface:
    """Magnitude of the phase-compensated correlation for every integer hypothesis.

    ``method="fft"`` evaluates all hypotheses with separable FFT correlations
    (the pilot is rank one); ``"direct"`` sums every hypothesis explicitly.
    The FFT route has no per-hypothesis pre-delay factor, so with
    ``pre_delay_branch`` its ``rescore`` strongest cells are recomputed directly.
    """
    if r.domain is not Domain.DELAY_DOPPLER:
        raise DomainError("correlate_integer expects a delay-doppler grid")
    if r.shape != pilot.full_dd.shape:
        raise ValueError(f"received grid {r.shape} does not match pilot {pilot.full_dd.shape}")
    P, Q = pilot.delay_window, pilot.doppler_window
    taps = signed_doppler_taps(Q)
    if method == "fft":
        cval = _correlate_fft(r.data, pilot, cfg, taps, compensate_phase)
        if pre_delay_branch and compensate_phase and rescore > 0:
            flat = np.argsort(-np.abs(cval), axis=None, kind="stable")[:rescore]
            ls, js = np.unravel_index(flat, cval.shape)
            cval = cval.copy()
            cval[ls, js] = correlate_direct(r, pilot, cfg, ls, taps[js], True, True)
    elif method == "direct":
        ls, js = np.meshgrid(np.arange(P), np.arange(Q), indexing="ij")
        cval = correlate_direct(r, pilot, cfg, ls.ravel(), taps[js.ravel()],
                                compensate_phase, pre_delay_branch).reshape(P, Q)
    else:
        raise ValueError(f"unknown correlation method {method!r}")
    return Surface(np.abs(cval), cval, taps)


@dataclass(frozen=True)
class Peak:
    delay_tap: int
    doppler_tap: int
    magnitude: float


def relative_threshold(surface: Surface, fraction: float = 0.3) -> float:
    return float(fraction * surface.values.max())


def cfar_threshold(surface: Surface, multiplier: float = 8.0) -> np.ndarray:
    """Per-delay-row threshold ``multiplier * median(row)``."""
    return multiplier * np.median(surface.values, axis=1)


def extract_peaks(surface: Surface, gamma, exclusion: int = 1) -> list[Peak]:
    """Local maxima at or above ``gamma``, strongest first.

    ``gamma`` is a scalar or one threshold per delay row. A candidate within
    ``exclusion`` Doppler bins of an accepted peak on the same delay tap is
    dropped, so fractional-Doppler side lobes are not reported as targets.
    """
    v = surface.values
    P, Q = v.shape
    thr = np.broadcast_to(np.asarray(gamma, dtype=np.float64).reshape(-1, 1)
                          if np.ndim(gamma) else np.asarray(gamma, dtype=np.float64), (P, 1))
    if np.any(thr <= 0):
        raise ValueError("gamma must be positive")
    is_max = np.ones_like(v, dtype=bool)
    for dl in (-1, 0, 1):
        for dk in (-1, 0, 1):
            if dl == 0 and dk == 0:
                continue
            if (P == 1 and dl) or (Q == 1 and dk):
                continue
            is_max &= v >= np.roll(v, (dl, dk), axis=(0, 1))
    ls, js = np.nonzero(is_max & (v >= thr))
    order = sorted(zip(ls, js), key=lambda c: (-v[c], c[0], c[1]))
    accepted: list[tuple[int, int]] = []
    peaks = []
    for l, j in order:
        clash = False
        for al, aj in accepted:
            d = abs(int(j) - aj) % Q
            if al == l and min(d, Q - d) <= exclusion:
                clash = True
                break
        if clash:
            continue
        accepted.append((int(l), int(j)))
        peaks.append(Peak(int(l), int(surface.doppler_taps[j]), float(v[l, j])))
    return peaks


def _echo(tx: np.ndarray, path: ChannelPath, cfg: FrameConfig, idi_span: int) -> np.ndarray:
    """Noiseless DD echo of one path, without the CP-coverage check."""
    N = cfg.N
    offsets = np.zeros(1, dtype=np.int64) if path.frac_doppler == 0.0 else idi_offsets(idi_span, N)
    coef = complex(path.gain) * beta(offsets, path.frac_doppler, N) / N
    rows = np.arange(cfg.M)
    phase = np.exp(2j * np.pi * (cfg.cp_len + rows - path.delay_tap) * path.doppler
                   / (N * cfg.symbol_len))
    out = np.zeros(tx.shape, dtype=np.complex128)
    _kernels.twisted_accumulate(out, np.ascontiguousarray(tx, dtype=np.complex128),
                                path.delay_tap, path.doppler_tap, offsets,
                                np.ascontiguousarray(coef), phase)
    return out


def fractional_profile(l0: int, k0: int, kappa: float, pilot: Pilot2D, cfg: FrameConfig,
                       n_j: int = 1, idi_span: int = 5) -> np.ndarray:
    """Correlation magnitudes at Doppler offsets ``-n_j..n_j`` for a unit-gain echo.

    The echo is the noiseless pilot through a single path ``(l0, k0 + kappa)``.
    """
    echo = _echo(pilot.full_dd.data, ChannelPath(l0, k0, kappa, 1.0), cfg, idi_span)
    offs = np.arange(-n_j, n_j + 1)
    vals = _kernels.correlate_direct(echo, np.ascontiguousarray(pilot.full_dd.data),
                                     np.full(len(offs), l0, dtype=np.int64),
                                     (k0 + offs).astype(np.int64), cfg.cp_len, True, False)
    return np.abs(vals)


def fractional_model(l0: int, k0: int, kappa: float, pilot: Pilot2D, cfg: FrameConfig,
                     n_j: int = 1, idi_span: int = 5) -> float:
    """Peak-to-window magnitude ratio of a unit echo with fractional Doppler ``kappa``."""
    prof = fractional_profile(l0, k0, kappa, pilot, cfg, n_j, idi_span)
    return float(prof[n_j] / prof.sum())


def kappa_grid(delta_kappa: float) -> np.ndarray:
    n = int(math.floor(1.0 / delta_kappa + 1e-9))
    return np.round(-0.5 + delta_kappa * np.arange(n + 1), 12)


@dataclass(frozen=True, eq=False)
class ModelTable:
    kappas: np.ndarray
    profiles: np.ndarray
    n_j: int

    @property
    def ratios(self) -> np.ndarray:
        return self.profiles[:, self.n_j] / self.profiles.sum(axis=1)


_TABLES: dict = {}


def model_table(pilot: Pilot2D, cfg: FrameConfig, n_j: int = 1, idi_span: int = 5,
                delta_kappa: float = 0.01) -> ModelTable:
    """Fractional model over the search grid, synthesized at ``(l0, k0) = (0, 0)``.

    The magnitudes do not depend on where the hypothesis sits in the window, so
    one table serves every detection of a frame geometry. Tables are cached.
    """
    key = (pilot.key, cfg.M, cfg.N, cfg.cp_len, n_j, idi_span, round(delta_kappa, 12))
    table = _TABLES.get(key)
    if table is None:
        kap = kappa_grid(delta_kappa)
        profs = np.array([fractional_profile(0, 0, float(x), pilot, cfg, n_j, idi_span)
                          for x in kap])
        table = ModelTable(kap, profs, n_j)
        if len(_TABLES) > 64:
            _TABLES.clear()
        _TABLES[key] = table
    return table


def measured_profile(r: ComplexGrid, pilot: Pilot2D, cfg: FrameConfig, l0: int, k0: int,
                     n_j: int = 1, compensate_phase: bool = True) -> np.ndarray:
    offs = np.arange(-n_j, n_j + 1)
    vals = correlate_direct(r, pilot, cfg, np.full(len(offs), l0), k0 + offs, compensate_phase)
    return np.abs(vals)


def estimate_fractional(r: ComplexGrid, pilot: Pilot2D, cfg: FrameConfig, det,
                        delta_kappa: float = 0.01, n_j: int = 1, idi_span: int = 5) -> float:
    """Fractional Doppler of a detected peak by magnitude-ratio matching.

    The ratio is even in ``kappa``, so the sign comes from the larger of the
    two adjacent bins and the grid search runs over that half only.
    """
    if n_j < 1:
        raise ValueError("n_j must be >= 1 for fractional estimation")
    meas = measured_profile(r, pilot, cfg, det.delay_tap, det.doppler_tap, n_j)
    total = meas.sum()
    if total <= 0:
        return 0.0
    ratio = meas[n_j] / total
    sign = 1.0 if meas[n_j + 1] >= meas[n_j - 1] else -1.0
    table = model_table(pilot, cfg, n_j, idi_span, delta_kappa)
    kap = table.kappas
    half = (kap * sign >= 0)
    # nearest-to-zero first so ties resolve toward the integer estimate
    cand = np.nonzero(half)[0]
    cand = cand[np.argsort(np.abs(kap[cand]), kind="stable")]
    err = np.abs(table.ratios[cand] - ratio)
    return float(kap[cand[int(np.argmin(err))]])


@dataclass(frozen=True)
class DetectionResult:
    delay_tap: int
    doppler_tap: int
    frac_doppler: float
    peak_mag: float
    est_doppler_hz: float
    est_range_m: float

    @property
    def doppler(self) -> float:
        return self.doppler_tap + self.frac_doppler


@dataclass(frozen=True)
class DetectorOptions:
    gamma: float = 0.3
    threshold: str = "relative"
    delta_kappa: float = 0.01
    n_j: int = 1
    fractional: bool = True
    compensate_phase: bool = True
    idi_span: int = 5

    def __post_init__(self):
        if self.threshold not in ("relative", "cfar"):
            raise ValueError(f"threshold must be 'relative' or 'cfar', got {self.threshold!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.delta_kappa <= 0.5:
            raise ValueError("delta_kappa must lie in (0, 0.5]")
        if self.n_j < 1:
            raise ValueError("n_j must be >= 1")


def detect(r: ComplexGrid, pilot: Pilot2D, cfg: FrameConfig,
           opts: DetectorOptions = DetectorOptions(), surface: Surface | None = None
           ) -> list[DetectionResult]:
    """Integer detection followed (optionally) by fractional refinement."""
    if surface is None:
        surface = correlate_integer(r, pilot, cfg, compensate_phase=opts.compensate_phase)
    if opts.threshold == "relative":
        gamma = relative_threshold(surface, opts.gamma)
        if gamma <= 0:
            return []
    else:
        gamma = np.maximum(cfar_threshold(surface, opts.gamma), 1e-300)
    num = Numerology.from_frame(cfg)
    out = []
    for pk in extract_peaks(surface, gamma, exclusion=opts.n_j):
        kappa = 0.0
        if opts.fractional:
            kappa = estimate_fractional(r, pilot, cfg, pk, opts.delta_kappa, opts.n_j,
                                        opts.idi_span)
        dop = pk.doppler_tap + kappa
        rng_m, _ = bins_to_physical(pk.delay_tap, dop, num)
        out.append(DetectionResult(pk.delay_tap, pk.doppler_tap, kappa, pk.magnitude,
                                   dop * num.doppler_resolution_hz, rng_m))
    return out


DETECTION_FIELDS = ("frame_id", "l", "k", "kappa", "peak_mag", "doppler_hz", "range_m")


def write_detections_csv(fh, detections, frame_id: int = 0, header: bool = True):
    """Append detections as CSV rows to an open text file."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(DETECTION_FIELDS)
    for d in detections:
        w.writerow([frame_id, d.delay_tap, d.doppler_tap, f"{d.frac_doppler:.6g}",
                    f"{d.peak_mag:.10g}", f"{d.est_doppler_hz:.10g}", f"{d.est_range_m:.10g}"])


@dataclass(frozen=True)
class SensingSinr:
    signal: float
    ipi_pilot: float
    ipi_data: float
    noise: float
    z: float = field(init=False)

    def __post_init__(self):
        den = self.ipi_pilot + self.ipi_data + self.noise
        object.__setattr__(self, "z", math.inf if den == 0 else self.signal / den)


def sensing_sinr(pilot: Pilot2D, truth: ChannelRealization, cfg: FrameConfig,
                 data_dd: ComplexGrid | None = None, noise: ComplexGrid | None = None
                 ) -> SensingSinr:
    """Split the correlation at path 0's bin into signal, pilot IPI, data and noise terms.

    Each term is the magnitude of the correlation of the local template with
    one reconstructed component of the received grid.
    """
    p0 = truth.paths[0]
    span = truth.idi_span

    def corr(x: np.ndarray) -> float:
        return float(abs(_kernels.correlate_direct(
            np.ascontiguousarray(x), np.ascontiguousarray(pilot.full_dd.data),
            np.array([p0.delay_tap], dtype=np.int64), np.array([p0.doppler_tap], dtype=np.int64),
            cfg.cp_len, True, False)[0]))

    P = pilot.full_dd.data
    signal = corr(_echo(P, p0, cfg, span))
    ipi = sum(corr(_echo(P, p, cfg, span)) for p in truth.paths[1:])
    data = 0.0
    if data_dd is not None:
        data = sum(corr(_echo(data_dd.data, p, cfg, span)) for p in truth.paths)
    nz = corr(noise.data) if noise is not None else 0.0
    return SensingSinr(signal, ipi, data, nz)
