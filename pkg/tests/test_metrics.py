import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddpilot import FrameConfig
from ddpilot.channel import ChannelPath
from ddpilot.metrics import (
    SPEED_OF_LIGHT, Numerology, associate, bins_to_physical, doppler_error_rate,
    physical_to_bins, velocity_to_doppler_hz,
)


@dataclass
class Det:
    delay_tap: int
    doppler_tap: int
    frac_doppler: float = 0.0


def test_error_rate_examples():
    assert doppler_error_rate([3.0, 5.0], [3.0, 5.0]) == 0
    assert doppler_error_rate([10.0], [11.0]) == pytest.approx(0.1)
    assert doppler_error_rate([10.0, 4.0, 5.0], [11.0, 4.0, 6.0]) == pytest.approx(0.1)


def test_error_rate_guards():
    assert doppler_error_rate([0.0, 2.0], [1.0, 3.0]) == pytest.approx(0.5)
    with pytest.warns(RuntimeWarning):
        assert math.isnan(doppler_error_rate([], []))
    with pytest.raises(ValueError):
        doppler_error_rate([1.0], [1.0, 2.0])


def test_conversions():
    num = Numerology(60e3, 64, 64, 0, 6e9)
    assert bins_to_physical(0, 0, num) == (0, 0)
    assert bins_to_physical(1, 0, num)[0] == pytest.approx(39.03, abs=0.05)
    assert bins_to_physical(0, 1, num)[1] == pytest.approx(23.4, abs=0.05)
    assert num.doppler_resolution_hz == 60e3 / 64
    assert num.delay_resolution_s == 1 / (64 * 60e3)


def test_cp_stretches_doppler_bin():
    num = Numerology.from_frame(FrameConfig(M=64, N=64))
    assert num.doppler_resolution_hz == pytest.approx(60e3 * 64 / (64 * 80))


@given(l=st.floats(0, 500), k=st.floats(-300, 300), n=st.sampled_from([16, 64, 512]),
       cp=st.integers(0, 32))
def test_round_trip(l, k, n, cp):
    num = Numerology(60e3, 64, n, cp, 6e9)
    back = physical_to_bins(*bins_to_physical(l, k, num), num)
    assert back[0] == pytest.approx(l, abs=1e-9) and back[1] == pytest.approx(k, abs=1e-9)


def test_velocity():
    assert velocity_to_doppler_hz(1.0, SPEED_OF_LIGHT) == 2.0
    assert velocity_to_doppler_hz(1.0, SPEED_OF_LIGHT, two_way=False) == 1.0


def test_association():
    truth = [ChannelPath(3, 5, 0.2, 1.0), ChannelPath(7, 1, 0.0, 0.5), ChannelPath(9, 0, 0.0, 2.0)]
    dets = [Det(3, 9), Det(3, 5, 0.1), Det(7, 2), Det(11, 4)]
    a = associate(truth, dets)
    assert a.pairs == [(0, 1), (1, 2)]
    assert a.missed == [2] and a.zero_doppler == [2]
    assert a.false_alarms == [0, 3]


def test_association_circular():
    truth = [ChannelPath(0, 31, 0.0)]
    dets = [Det(0, -32), Det(0, 20)]
    assert associate(truth, dets, doppler_window=64).pairs == [(0, 0)]
    assert associate(truth, dets).pairs == [(0, 1)]
