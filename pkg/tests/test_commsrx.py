import numpy as np
import pytest

from ddpilot import FrameConfig, commsrx
from ddpilot.channel import (
    ChannelPath, ChannelRealization, apply_time, eva_paths, snr_to_noise_var, tf_channel_diagonal,
)
from ddpilot.frame import Modulation, data_capacity, demodulate_frame_sync, map_data, transmit
from ddpilot.grid import ComplexGrid, Domain, ShapeError
from ddpilot.pilot import CombDmrs, PilotSpec, conventional_dmrs


@pytest.fixture(scope="module")
def comm_cfg():
    return FrameConfig(M=64, N=16, pilot=PilotSpec(power_scale=1.0))


@pytest.fixture(scope="module")
def comm_pilot(comm_cfg):
    return comm_cfg.build_pilot()


def _tx(cfg, pilot, rng):
    bits = rng.integers(0, 2, data_capacity(pilot.occupied_tf_mask, cfg.modulation))
    return bits, transmit(cfg, pilot, bits)


def test_identity_channel_ls(comm_cfg, comm_pilot, rng):
    bits, tx = _tx(comm_cfg, comm_pilot, rng)
    y = demodulate_frame_sync(tx.samples, comm_cfg)
    est = commsrx.estimate_channel(y, comm_pilot, 0.0)
    assert est.method is commsrx.EstimationMethod.LS_COMB_INTERP
    assert np.allclose(est.h_tf.data[comm_pilot.occupied_tf_mask], 1, atol=1e-9)
    rx = commsrx.demap(commsrx.equalize_mmse(y, est), comm_pilot.occupied_tf_mask,
                       comm_cfg.modulation)
    assert np.array_equal(rx, bits)


def test_pure_delay_response(comm_cfg, comm_pilot, rng):
    _, tx = _tx(comm_cfg, comm_pilot, rng)
    ch = ChannelRealization([ChannelPath(2)])
    y = demodulate_frame_sync(apply_time(tx.samples, ch, comm_cfg), comm_cfg)
    est = commsrx.estimate_channel(y, comm_pilot, 0.0).h_tf.data
    m = np.arange(64)
    ideal = np.exp(-2j * np.pi * 2 * m / 64)
    comb = comm_pilot.occupied_tf_mask[:, 0]
    assert np.allclose(est[comb, 0], ideal[comb], atol=1e-9)
    # interior off-comb: chord midpoint of the unit circle
    assert np.max(np.abs(est[1:63, 0] - ideal[1:63])) <= 1 - np.cos(2 * np.pi * 2 / 64) + 1e-9
    # row 63 lies past the last comb row and takes its value
    assert est[63, 0] == est[62, 0]


def test_band_edge_nearest_extension():
    mask = np.zeros((8, 1), dtype=bool)
    mask[[2, 4], 0] = True
    tf = np.where(mask, 1.0, 0.0).astype(complex)
    pil = CombDmrs(ComplexGrid(tf, Domain.TIME_FREQUENCY), mask)
    y = np.zeros((8, 1), complex)
    y[2, 0], y[4, 0] = 2.0, 4.0
    est = commsrx.estimate_channel(ComplexGrid(y, Domain.TIME_FREQUENCY), pil, 0.1).h_tf.data[:, 0]
    assert est.tolist() == [2, 2, 2, 3, 4, 4, 4, 4]


def test_weak_comb_elements_skipped():
    mask = np.zeros((4, 1), dtype=bool)
    mask[[0, 1, 2], 0] = True
    tf = np.array([[1.0], [1e-9], [1.0], [0]], dtype=complex)
    pil = CombDmrs(ComplexGrid(tf, Domain.TIME_FREQUENCY), mask)
    y = np.array([[1.0], [5.0], [3.0], [0]], dtype=complex)
    est = commsrx.estimate_channel(ComplexGrid(y, Domain.TIME_FREQUENCY), pil, 0.0).h_tf.data[:, 0]
    assert est.tolist() == [1, 2, 3, 3]


def test_time_interpolation_for_sparse_symbols(rng):
    cfg = FrameConfig(M=16, N=8, pilot=PilotSpec(d_f=2, d_t=2, power_scale=1.0))
    p = cfg.build_pilot()
    assert not p.occupied_tf_mask[:, 1].any()
    y = demodulate_frame_sync(_tx(cfg, p, rng)[1].samples, cfg)
    est = commsrx.estimate_channel(y, p, 0.0)
    assert np.allclose(est.h_tf.data, 1, atol=1e-9)


def test_empty_comb_rejected():
    pil = CombDmrs(ComplexGrid(np.zeros((4, 2)), Domain.TIME_FREQUENCY), np.zeros((4, 2), bool))
    with pytest.raises(ValueError, match="empty"):
        commsrx.estimate_channel(ComplexGrid(np.zeros((4, 2)), Domain.TIME_FREQUENCY), pil, 0.0)


def test_mmse_examples():
    def eq(h, s2, y):
        g = ComplexGrid(np.full((1, 1), y, complex), Domain.TIME_FREQUENCY)
        est = commsrx.genie_estimate(np.full((1, 1), h, complex), s2)
        return commsrx.equalize_mmse(g, est).data[0, 0]
    assert eq(1, 0, 0.7 + 0.1j) == 0.7 + 0.1j
    assert eq(2, 0, 1.0) == 0.5
    assert eq(1, 1, 1.0) == 0.5
    assert np.isfinite(eq(0, 0, 1.0))
    with pytest.raises(ShapeError):
        commsrx.equalize_mmse(ComplexGrid(np.ones((2, 2)), Domain.TIME_FREQUENCY),
                              commsrx.genie_estimate(np.ones((1, 2)), 0))


def test_demap_round_trip_and_ties(rng):
    mask = np.zeros((4, 4), dtype=bool)
    mask[0] = True
    for mod in Modulation:
        bits = rng.integers(0, 2, 12 * mod.bits_per_symbol)
        assert np.array_equal(commsrx.demap(map_data(bits, mask, mod), mask, mod), bits)
    zero = ComplexGrid(np.zeros((2, 2)), Domain.TIME_FREQUENCY)
    out = commsrx.demap(zero, np.zeros((2, 2), bool), Modulation.QPSK)
    assert out.tolist() == [0, 0] * 4
    with pytest.raises(ShapeError):
        commsrx.demap(zero, np.zeros((3, 2), bool), Modulation.QPSK)


def test_ber_nmse():
    a = np.array([0, 1, 1, 0])
    assert commsrx.ber(a, a) == 0 and commsrx.ber(a, 1 - a) == 1
    with pytest.raises(ValueError):
        commsrx.ber(a, a[:3])
    h = np.ones((2, 2)) * (1 + 1j)
    assert commsrx.nmse(h, h) == 0
    assert np.isclose(commsrx.nmse(2 * h, h), 1.0)
    with pytest.raises(ShapeError):
        commsrx.nmse(h, h[:1])


def test_nmse_tracks_noise(comm_cfg, comm_pilot):
    """NMSE falls roughly in proportion to sigma^2 until interpolation error takes over."""
    out = []
    for snr in (0, 10, 20, 30):
        rng = np.random.default_rng(11)
        s2 = snr_to_noise_var(snr)
        acc = []
        for _ in range(60):
            ch = ChannelRealization(eva_paths(comm_cfg, 30, rng), s2, 8)
            _, tx = _tx(comm_cfg, comm_pilot, rng)
            y = demodulate_frame_sync(apply_time(tx.samples, ch, comm_cfg, rng), comm_cfg)
            est = commsrx.estimate_channel(y, comm_pilot, s2)
            acc.append(commsrx.nmse(est.h_tf, tf_channel_diagonal(ch, comm_cfg)))
        out.append(10 * np.log10(np.mean(acc)))
    steps = np.diff(out)
    assert np.all(steps < 0)
    assert -11.5 < steps[0] < -8.5 and -11.5 < steps[1] < -7.0


def test_conventional_dmrs_identity(comm_cfg, comm_pilot, rng):
    conv = conventional_dmrs(comm_pilot)
    bits, tx = _tx(comm_cfg, conv, rng)
    y = demodulate_frame_sync(tx.samples, comm_cfg)
    est = commsrx.estimate_channel(y, conv, 0.0)
    rx = commsrx.demap(commsrx.equalize_mmse(y, est), conv.occupied_tf_mask, comm_cfg.modulation)
    assert np.array_equal(rx, bits)
