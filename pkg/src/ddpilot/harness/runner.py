"""Seeded Monte-Carlo execution of the sweep scenarios.

Each trial draws its randomness from ``SeedSequence([master_seed, point,
trial])`` so results do not depend on how trials are scheduled. Trials run
serially or on a process pool; results are reduced in (point, trial) order.
"""
from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import commsrx, frame, sensing
from ..channel import (
    ChannelPath,
    ChannelRealization,
    apply_dd,
    apply_time,
    eva_paths,
    random_targets,
    snr_to_noise_var,
    tf_channel_diagonal,
)
from ..grid import ComplexGrid, Domain, sfft
from ..metrics import Numerology, associate, doppler_error_rate, velocity_to_doppler_hz
from ..pilot import conventional_dmrs
from . import svg
from .config import ExperimentSpec, Scenario, max_delay_tap, point_frame

log = logging.getLogger(__name__)

# Three-target demo paths: (delay tap, Doppler in bins, gain)
DEMO3_PATHS = (
    (0, -21.7875, 0.2352 + 0.3241j),
    (9, 0.9816, 0.1336 + 0.7132j),
    (20, 22.5537, 0.5972 + 0.3935j),
)
DEMO3_SNR_DB = 18.0

SENSING_COLUMNS = ("N", "snr_db", "err_integer_mean", "err_refined_mean", "err_integer_std",
                   "err_refined_std", "miss_rate", "false_alarms_mean", "zero_doppler", "trials")
COMMS_COLUMNS = ("snr_db", "ber_unified", "ber_conventional", "ber_genie",
                 "nmse_unified_db", "nmse_conventional_db", "frames")


@dataclass(frozen=True)
class RunResult:
    columns: tuple
    rows: list
    csv_path: Path | None
    plots: tuple = ()


def trial_rng(master_seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, point, trial]))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".12g")


_PILOTS: dict = {}


def _pilot_for(cfg):
    p = _PILOTS.get(cfg)
    if p is None:
        p = cfg.build_pilot()
        _PILOTS[cfg] = p
    return p


def _snr(spec: ExperimentSpec, point: dict) -> float:
    if "snr_db" in point:
        return point["snr_db"]
    return DEMO3_SNR_DB


def _random_data_dd(cfg, pilot, rng) -> ComplexGrid:
    nbits = frame.data_capacity(pilot.occupied_tf_mask, cfg.modulation)
    bits = rng.integers(0, 2, size=nbits)
    return sfft(frame.map_data(bits, pilot.occupied_tf_mask, cfg.modulation))


def sensing_trial(spec: ExperimentSpec, point_idx: int, point: dict, trial: int) -> tuple:
    """(err_integer, err_refined, missed, false_alarms, zero_doppler, targets) for one frame."""
    cfg = point_frame(spec, point)
    pilot = _pilot_for(cfg)
    rng = trial_rng(spec.master_seed, point_idx, trial)
    num = Numerology.from_frame(cfg)
    v = point.get("velocity_kmh", spec.velocity_kmh)
    nu_max = velocity_to_doppler_hz(v / 3.6, cfg.carrier_hz, spec.two_way) / num.doppler_resolution_hz
    window = pilot.doppler_window
    paths = random_targets(spec.channel.targets, nu_max, max_delay_tap(spec, cfg), rng,
                           doppler_window=window)
    ch = ChannelRealization(paths, snr_to_noise_var(_snr(spec, point)), spec.channel.idi_span)
    tx = ComplexGrid(pilot.full_dd.data + _random_data_dd(cfg, pilot, rng).data,
                     Domain.DELAY_DOPPLER)
    r = apply_dd(tx, ch, cfg, rng)
    d = spec.detector
    opts = sensing.DetectorOptions(gamma=d.gamma, threshold=d.threshold, delta_kappa=d.delta_kappa,
                                   n_j=d.n_j, fractional=False, compensate_phase=d.compensate_phase,
                                   idi_span=spec.channel.idi_span)
    surface = sensing.correlate_integer(r, pilot, cfg, compensate_phase=d.compensate_phase)
    coarse = sensing.detect(r, pilot, cfg, opts, surface=surface)
    assoc = associate(paths, coarse, doppler_window=window)
    truth = [paths[i].doppler for i, _ in assoc.pairs if i not in assoc.zero_doppler]
    sel = [j for i, j in assoc.pairs if i not in assoc.zero_doppler]
    est_int = [coarse[j].doppler_tap for j in sel]
    est_ref = [coarse[j].doppler_tap + sensing.estimate_fractional(
        r, pilot, cfg, coarse[j], d.delta_kappa, d.n_j, spec.channel.idi_span) for j in sel]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        e_int = doppler_error_rate(truth, est_int) if truth else math.nan
        e_ref = doppler_error_rate(truth, est_ref) if truth else math.nan
    return (e_int, e_ref, len(assoc.missed), len(assoc.false_alarms), len(assoc.zero_doppler),
            len(paths))


def comms_trial(spec: ExperimentSpec, point_idx: int, point: dict, trial: int) -> tuple:
    """Paired unified / conventional frame through one EVA realization.

    Returns bit errors (unified, conventional, genie), bit count, and the two
    per-frame NMSE values.
    """
    cfg = point_frame(spec, point)
    uni = _pilot_for(cfg)
    conv = conventional_dmrs(uni)
    rng = trial_rng(spec.master_seed, point_idx, trial)
    sigma2 = snr_to_noise_var(_snr(spec, point))
    v = point.get("velocity_kmh", spec.velocity_kmh)
    paths = eva_paths(cfg, v, rng)
    ch = ChannelRealization(paths, sigma2, spec.channel.idi_span)
    nbits = frame.data_capacity(uni.occupied_tf_mask, cfg.modulation)
    bits = rng.integers(0, 2, size=nbits)
    noise = (rng.standard_normal(cfg.num_samples) + 1j * rng.standard_normal(cfg.num_samples)) \
        * math.sqrt(sigma2 / 2)
    h_true = tf_channel_diagonal(ch, cfg)
    noiseless = ChannelRealization(paths, 0.0, spec.channel.idi_span)
    out = []
    nmse = []
    for pil in (uni, conv):
        tx = frame.transmit(cfg, pil, bits)
        y = frame.demodulate_frame_sync(apply_time(tx.samples, noiseless, cfg) + noise, cfg)
        est = commsrx.estimate_channel(y, pil, sigma2)
        rx = commsrx.demap(commsrx.equalize_mmse(y, est), pil.occupied_tf_mask, cfg.modulation)
        out.append(int(np.count_nonzero(rx != bits)))
        nmse.append(commsrx.nmse(est.h_tf, h_true))
        if pil is uni:
            g = commsrx.equalize_mmse(y, commsrx.genie_estimate(h_true, sigma2))
            genie_err = int(np.count_nonzero(
                commsrx.demap(g, pil.occupied_tf_mask, cfg.modulation) != bits))
    return (out[0], out[1], genie_err, nbits, nmse[0], nmse[1])


def _work(args):
    fn, spec, pi, point, lo, hi = args
    return [fn(spec, pi, point, t) for t in range(lo, hi)]


def _run_trials(fn, spec: ExperimentSpec, pi: int, point: dict, pool) -> list:
    if pool is None:
        return [fn(spec, pi, point, t) for t in range(spec.trials)]
    chunks = max(1, min(spec.trials, spec.threads * 4))
    bounds = np.linspace(0, spec.trials, chunks + 1).astype(int)
    jobs = [(fn, spec, pi, point, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    out = []
    for part in pool.map(_work, jobs):
        out.extend(part)
    return out


def _aggregate_sensing(cfg, point, results) -> tuple:
    arr = np.array([r[:2] for r in results], dtype=np.float64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mi, mr = np.nanmean(arr[:, 0]), np.nanmean(arr[:, 1])
        si, sr = np.nanstd(arr[:, 0]), np.nanstd(arr[:, 1])
    missed = sum(r[2] for r in results)
    total = sum(r[5] for r in results)
    fa = sum(r[3] for r in results) / len(results)
    zero = sum(r[4] for r in results)
    return (cfg.N, point.get("snr_db", DEMO3_SNR_DB), mi, mr, si, sr, missed / total, fa, zero,
            len(results))


def _aggregate_comms(cfg, point, results) -> tuple:
    bits = sum(r[3] for r in results)
    return (point.get("snr_db", DEMO3_SNR_DB),
            sum(r[0] for r in results) / bits, sum(r[1] for r in results) / bits,
            sum(r[2] for r in results) / bits,
            10 * math.log10(float(np.mean([r[4] for r in results]))),
            10 * math.log10(float(np.mean([r[5] for r in results]))), len(results))


def run(spec: ExperimentSpec, out_dir: Path | None = None, plots: bool = True) -> RunResult:
    """Execute a sweep, streaming one CSV row per point.

    ``out_dir=None`` uses ``spec.out_dir``; pass ``False`` to skip all files.
    """
    if spec.scenario is Scenario.DEMO3:
        return run_demo3(spec, out_dir)
    sens = spec.scenario is Scenario.SENSING_SWEEP
    fn, agg, cols = (sensing_trial, _aggregate_sensing, SENSING_COLUMNS) if sens \
        else (comms_trial, _aggregate_comms, COMMS_COLUMNS)
    target = None if out_dir is False else Path(out_dir or spec.out_dir)
    csv_path = None
    fh = None
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
        csv_path = target / f"{spec.scenario.value}.csv"
        fh = open(csv_path, "w", newline="")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        fh.flush()
    pool = ProcessPoolExecutor(max_workers=spec.threads) if spec.threads > 1 else None
    rows = []
    try:
        for pi, point in enumerate(spec.points()):
            cfg = point_frame(spec, point)
            log.info("point %d/%d %s", pi + 1, len(spec.points()), point)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                results = _run_trials(fn, spec, pi, point, pool)
            row = agg(cfg, point, results)
            rows.append(row)
            if fh is not None:
                w.writerow([_fmt(v) for v in row])
                fh.flush()
    finally:
        if pool is not None:
            pool.shutdown()
        if fh is not None:
            fh.close()
    svgs = ()
    if target is not None and plots:
        svgs = tuple(_plots(spec, cols, rows, target))
    return RunResult(cols, rows, csv_path, svgs)


def _plots(spec, cols, rows, target: Path) -> list:
    out = []
    if spec.scenario is Scenario.SENSING_SWEEP:
        snrs = sorted({r[1] for r in rows})
        series = []
        for s in snrs:
            sub = [r for r in rows if r[1] == s]
            series.append((f"integer {s:g} dB", [r[0] for r in sub], [r[2] for r in sub]))
            series.append((f"refined {s:g} dB", [r[0] for r in sub], [r[3] for r in sub]))
        path = target / f"{spec.scenario.value}_N.svg"
        svg.write_line_chart(path, series, "N", "Doppler error rate", log_y=True, log_x=True)
        out.append(path)
    else:
        x = [r[0] for r in rows]
        path = target / f"{spec.scenario.value}_snr_db.svg"
        svg.write_line_chart(path, [("unified", x, [r[1] for r in rows]),
                                    ("conventional", x, [r[2] for r in rows]),
                                    ("genie", x, [r[3] for r in rows])],
                             "SNR (dB)", "BER", log_y=True)
        out.append(path)
        path = target / f"{spec.scenario.value}_snr_db_nmse.svg"
        svg.write_line_chart(path, [("unified", x, [r[4] for r in rows]),
                                    ("conventional", x, [r[5] for r in rows])],
                             "SNR (dB)", "NMSE (dB)")
        out.append(path)
    return out


def demo3_channel(cfg, snr_db: float = DEMO3_SNR_DB, idi_span: int = 5) -> ChannelRealization:
    paths = [ChannelPath.from_doppler(l, nu, h) for l, nu, h in DEMO3_PATHS]
    return ChannelRealization(paths, snr_to_noise_var(snr_db), idi_span)


def run_demo3(spec: ExperimentSpec, out_dir: Path | None = None) -> RunResult:
    """Three-target detection on one frame; writes detections and the surface."""
    cfg = spec.base
    pilot = _pilot_for(cfg)
    rng = trial_rng(spec.master_seed, 0, 0)
    snr = dict(spec.sweep).get("snr_db", (DEMO3_SNR_DB,))[0]
    ch = demo3_channel(cfg, snr, spec.channel.idi_span)
    ch.check(cfg)
    tx = ComplexGrid(pilot.full_dd.data + _random_data_dd(cfg, pilot, rng).data,
                     Domain.DELAY_DOPPLER)
    r = apply_dd(tx, ch, cfg, rng)
    d = spec.detector
    opts = sensing.DetectorOptions(gamma=d.gamma, threshold=d.threshold, delta_kappa=d.delta_kappa,
                                   n_j=d.n_j, fractional=d.fractional,
                                   compensate_phase=d.compensate_phase,
                                   idi_span=spec.channel.idi_span)
    surface = sensing.correlate_integer(r, pilot, cfg, compensate_phase=d.compensate_phase)
    dets = sensing.detect(r, pilot, cfg, opts, surface=surface)
    cols = sensing.DETECTION_FIELDS
    rows = [(0, x.delay_tap, x.doppler_tap, x.frac_doppler, x.peak_mag, x.est_doppler_hz,
             x.est_range_m) for x in dets]
    target = None if out_dir is False else Path(out_dir or spec.out_dir)
    csv_path = None
    if target is not None:
        target.mkdir(parents=True, exist_ok=True)
        csv_path = target / "demo3_detections.csv"
        with open(csv_path, "w", newline="") as fh:
            sensing.write_detections_csv(fh, dets)
        with open(target / "demo3_surface.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["l"] + [str(k) for k in surface.doppler_taps])
            for l, row in enumerate(surface.values):
                w.writerow([l] + [_fmt(v) for v in row])
    return RunResult(cols, rows, csv_path)
