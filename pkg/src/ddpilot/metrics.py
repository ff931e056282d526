"""Unit conversions and the sensing and link metrics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
ZERO_DOPPLER_GUARD = 1e-6


@dataclass(frozen=True)
class Numerology:
    """Grid resolutions of one frame.

    A Doppler bin spans ``1 / (N * T_sym)`` with the CP included in the symbol
    duration ``T_sym = (M + cp_len) / (M * delta_f)``; for ``cp_len = 0`` this
    is ``delta_f / N``.
    """

    delta_f: float
    M: int
    N: int
    cp_len: int
    carrier_hz: float
    d_f: int = 1
    d_t: int = 1

    @classmethod
    def from_frame(cls, cfg) -> Numerology:
        return cls(cfg.delta_f, cfg.M, cfg.N, cfg.cp_len, cfg.carrier_hz,
                   cfg.pilot.d_f, cfg.pilot.d_t)

    @property
    def delay_resolution_s(self) -> float:
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_resolution_hz(self) -> float:
        return self.M * self.delta_f / (self.N * (self.M + self.cp_len))


def velocity_to_doppler_hz(velocity_mps: float, carrier_hz: float, two_way: bool = True) -> float:
    """Doppler of a mover; ``two_way`` for a monostatic echo."""
    factor = 2.0 if two_way else 1.0
    return factor * velocity_mps * carrier_hz / SPEED_OF_LIGHT


def bins_to_physical(l: float, k_plus_kappa: float, num: Numerology) -> tuple[float, float]:
    """(range in m, radial velocity in m/s) of a monostatic echo at DD bin ``(l, k + kappa)``."""
    range_m = SPEED_OF_LIGHT * l * num.delay_resolution_s / 2.0
    velocity = SPEED_OF_LIGHT * k_plus_kappa * num.doppler_resolution_hz / (2.0 * num.carrier_hz)
    return range_m, velocity


def physical_to_bins(range_m: float, velocity_mps: float, num: Numerology) -> tuple[float, float]:
    l = 2.0 * range_m / (SPEED_OF_LIGHT * num.delay_resolution_s)
    k = 2.0 * num.carrier_hz * velocity_mps / (SPEED_OF_LIGHT * num.doppler_resolution_hz)
    return l, k


def doppler_error_rate(truth, est) -> float:
    """Mean of ``|(est - truth) / truth|`` over associated target pairs.

    Pairs whose true Doppler is below :data:`ZERO_DOPPLER_GUARD` bins are left
    out. An empty set returns NaN with a warning.
    """
    truth = np.asarray(truth, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if truth.shape != est.shape:
        raise ValueError(f"truth and estimates differ in length: {truth.shape} vs {est.shape}")
    keep = np.abs(truth) >= ZERO_DOPPLER_GUARD
    if not keep.any():
        warnings.warn("no associated targets with nonzero Doppler", RuntimeWarning, stacklevel=2)
        return math.nan
    return float(np.mean(np.abs((est[keep] - truth[keep]) / truth[keep])))


@dataclass(frozen=True)
class Association:
    pairs: list  # (truth_index, detection_index)
    missed: list  # truth indices without a detection
    false_alarms: list  # detection indices left over
    zero_doppler: list  # truth indices excluded by the zero-Doppler guard


def associate(truth_paths, detections, doppler_window: int | None = None) -> Association:
    """Match each true path to the unused detection on its delay tap with the nearest Doppler.

    Truths are served strongest first. Doppler distance is circular when
    ``doppler_window`` is given.
    """
    def dist(a, b):
        d = abs(a - b)
        if doppler_window:
            d = d % doppler_window
            d = min(d, doppler_window - d)
        return d

    order = sorted(range(len(truth_paths)), key=lambda i: -abs(truth_paths[i].gain))
    used, pairs, missed, zero = set(), [], [], []
    for i in order:
        t = truth_paths[i]
        if abs(t.doppler) < ZERO_DOPPLER_GUARD:
            zero.append(i)
        cands = [j for j, d in enumerate(detections)
                 if j not in used and d.delay_tap == t.delay_tap]
        if not cands:
            missed.append(i)
            continue
        j = min(cands, key=lambda j: (dist(detections[j].doppler_tap + detections[j].frac_doppler,
                                           t.doppler), j))
        used.add(j)
        pairs.append((i, j))
    pairs.sort()
    fa = [j for j in range(len(detections)) if j not in used]
    return Association(pairs, sorted(missed), fa, sorted(zero))
