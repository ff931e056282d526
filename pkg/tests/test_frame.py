import numpy as np
import pytest

from ddpilot import FrameConfig
from ddpilot.frame import (
    FrameError, Modulation, add_cp, data_capacity, demodulate_frame_sync, dump_iq, load_iq,
    map_data, modulate, papr_db, tf_to_samples, transmit,
)
from ddpilot.grid import ComplexGrid, Domain, inner_product, sfft
from ddpilot.pilot import PilotSpec, impulse_pilot


def test_defaults():
    cfg = FrameConfig()
    assert (cfg.M, cfg.N, cfg.delta_f, cfg.carrier_hz) == (64, 16, 60e3, 6e9)
    assert cfg.cp_len == 16 and cfg.modulation is Modulation.QAM16
    assert cfg.num_samples == 16 * 80


def test_non_power_of_two_warns():
    with pytest.warns(UserWarning, match="power of two"):
        FrameConfig(M=64, N=100, pilot=PilotSpec(d_t=1))


def test_qpsk_zero_bits_golden():
    mask = np.zeros((4, 2), dtype=bool)
    g = map_data(np.zeros(16, dtype=int), mask, Modulation.QPSK)
    assert np.allclose(g.data, (1 + 1j) / np.sqrt(2))


def test_qam16_golden():
    pts = Modulation.QAM16.points
    assert np.isclose(pts[0b0000], (1 + 1j) / np.sqrt(10))
    assert np.isclose(pts[0b1111], (-3 - 3j) / np.sqrt(10))
    assert np.isclose(pts[0b0010], (3 + 1j) / np.sqrt(10))
    assert np.isclose(pts[0b1000], (-1 + 1j) / np.sqrt(10))


@pytest.mark.parametrize("mod", list(Modulation))
def test_unit_power_and_gray(mod):
    pts = mod.points
    assert np.isclose(np.mean(np.abs(pts) ** 2), 1.0)
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = d[d > 0].min()
    for i in range(len(pts)):
        for j in range(len(pts)):
            if np.isclose(d[i, j], dmin):
                assert bin(i ^ j).count("1") == 1


def test_random_power(rng):
    mask = np.zeros((100, 100), dtype=bool)
    bits = rng.integers(0, 2, 4 * 10000)
    g = map_data(bits, mask, Modulation.QAM16)
    assert abs(np.mean(np.abs(g.data) ** 2) - 1) < 0.01


def test_map_data_errors(pilot64):
    with pytest.raises(FrameError, match="no data capacity"):
        map_data([], np.ones((4, 4), dtype=bool), Modulation.QPSK)
    with pytest.raises(FrameError):
        map_data(np.zeros(3), np.zeros((2, 2), dtype=bool), Modulation.QPSK)


def test_column_major_placement():
    mask = np.zeros((2, 2), dtype=bool)
    mask[0, 0] = True
    bits = np.array([0, 0, 1, 1, 0, 1])
    g = map_data(bits, mask, Modulation.QPSK)
    pts = Modulation.QPSK.points
    assert g.data[1, 0] == pts[0] and g.data[0, 1] == pts[3] and g.data[1, 1] == pts[1]
    assert g.data[0, 0] == 0


def test_add_cp_block_structure():
    col = np.array([[0], [1], [2], [3]])
    assert add_cp(col, 1)[:, 0].tolist() == [3, 0, 1, 2, 3]


def test_round_trip_any_grid(rng):
    cfg = FrameConfig(M=16, N=8, cp_len=3)
    x = ComplexGrid(rng.standard_normal((16, 8)) + 1j * rng.standard_normal((16, 8)),
                    Domain.TIME_FREQUENCY)
    s = tf_to_samples(x, 3)
    blocks = s.reshape(8, 19)
    assert np.array_equal(blocks[:, :3], blocks[:, -3:])
    back = demodulate_frame_sync(s, cfg)
    assert np.max(np.abs(back.data - x.data)) < 1e-12
    assert abs(back.norm() - x.norm()) < 1e-12
    with pytest.raises(FrameError):
        demodulate_frame_sync(s[:-1], cfg)


def test_pilot_only_energy(cfg64, pilot64):
    data = ComplexGrid.zeros(64, 64, Domain.TIME_FREQUENCY)
    tx = modulate(cfg64, pilot64, data)
    blocks = tx.samples.reshape(64, 80)
    tails = np.sum(np.abs(blocks[:, -16:]) ** 2)
    assert np.isclose(np.sum(np.abs(tx.samples) ** 2), pilot64.tf.norm() ** 2 + tails)


def test_orthogonal_multiplexing(cfg64, pilot64, rng):
    bits = rng.integers(0, 2, data_capacity(pilot64.occupied_tf_mask, cfg64.modulation))
    tx = transmit(cfg64, pilot64, bits)
    assert inner_product(pilot64.tf, tx.data_tf) == 0
    assert np.all(tx.data_tf.data[pilot64.occupied_tf_mask] == 0)
    comb = np.where(pilot64.occupied_tf_mask, tx.x_tf.data, 0)
    assert np.max(np.abs(sfft(ComplexGrid(comb, Domain.TIME_FREQUENCY)).data
                         - pilot64.full_dd.data)) < 1e-12


def test_modulate_rejects_overlap(cfg64, pilot64):
    bad = np.ones((64, 64), dtype=complex)
    with pytest.raises(FrameError, match="overlaps"):
        modulate(cfg64, pilot64, ComplexGrid(bad, Domain.TIME_FREQUENCY))


def test_papr_sequence_not_worse_than_impulse(cfg64, pilot64, rng):
    imp = impulse_pilot(cfg64.pilot, cfg64)
    nb = data_capacity(pilot64.occupied_tf_mask, cfg64.modulation)
    seq, ref = [], []
    for _ in range(100):
        bits = rng.integers(0, 2, nb)
        seq.append(papr_db(transmit(cfg64, pilot64, bits).samples))
        ref.append(papr_db(transmit(cfg64, imp, bits).samples))
    assert np.mean(seq) <= np.mean(ref)


def test_iq_dump_round_trip(tmp_path, rng):
    s = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    dump_iq(s, tmp_path / "x.iq")
    raw = np.fromfile(tmp_path / "x.iq", dtype="<f4")
    assert raw.size == 20 and np.isclose(raw[1], np.float32(s[0].imag))
    assert np.allclose(load_iq(tmp_path / "x.iq"), s, atol=1e-6)
