import warnings

import numpy as np
import pytest

from ddpilot.sequences import (
    PRIMITIVE_TAPS, MSequenceSpec, NonPrimitivePolynomial, SequenceError, component_sequence,
    cyclic_autocorr, extend_by_one, generate_mseq, measure_period, profile,
)


def brute_lfsr(taps, degree, seed, count):
    """Bit-by-bit Fibonacci register written from the polynomial, no bit tricks."""
    coeffs = [(taps >> i) & 1 for i in range(degree)]
    reg = [(seed >> i) & 1 for i in range(degree)]
    out = []
    for _ in range(count):
        out.append(reg[0])
        fb = sum(c * r for c, r in zip(coeffs, reg)) % 2
        reg = reg[1:] + [fb]
    return out


@pytest.mark.parametrize("degree", sorted(PRIMITIVE_TAPS))
@pytest.mark.parametrize("which", [0, 1])
def test_defaults_are_maximal_and_two_valued(degree, which):
    spec = MSequenceSpec.default(degree, which)
    s = generate_mseq(spec)
    L = 2 ** degree - 1
    assert len(s) == L
    assert set(np.unique(s)) <= {-1.0, 1.0}
    assert s.sum() == -1  # one more -1 (bit 1) than +1
    ac = [cyclic_autocorr(s, t) for t in range(L)]
    assert ac[0] == 1.0
    assert all(a == -1.0 / L for a in ac[1:])


@pytest.mark.parametrize("degree", [3, 5, 7])
def test_matches_brute_force_register(degree):
    spec = MSequenceSpec.default(degree)
    bits = brute_lfsr(spec.taps, degree, spec.seed_state, 2 ** degree - 1)
    expect = 1 - 2 * np.array(bits, dtype=float)
    assert np.array_equal(generate_mseq(spec), expect)


def test_degree3_reference():
    assert generate_mseq(MSequenceSpec(3, 0xB)).tolist() == [-1, 1, 1, -1, 1, -1, -1]


def test_non_primitive_rejected():
    spec = MSequenceSpec(3, 0xF)
    assert measure_period(spec) == 4
    with pytest.raises(NonPrimitivePolynomial) as err:
        generate_mseq(spec)
    assert err.value.period == 4


def test_spec_validation():
    with pytest.raises(SequenceError):
        MSequenceSpec(1, 0x3)
    with pytest.raises(SequenceError):
        MSequenceSpec(4, 0x7)
    with pytest.raises(SequenceError):
        MSequenceSpec(4, 0x13, seed_state=0)
    with pytest.raises(SequenceError):
        MSequenceSpec.default(40)


def test_seed_only_rotates():
    a = generate_mseq(MSequenceSpec(5, 0x25, 1))
    b = generate_mseq(MSequenceSpec(5, 0x25, 7))
    assert any(np.array_equal(np.roll(a, s), b) for s in range(31))


@pytest.mark.parametrize("length", [4, 8, 16, 32, 64])
def test_power_of_two_extension(length):
    s = component_sequence(length)
    assert len(s) == length
    assert set(np.unique(s)) <= {-1.0, 1.0}
    base = generate_mseq(MSequenceSpec.default(int(np.log2(length))))
    # removing one chip gives back the m-sequence
    assert any(np.array_equal(np.delete(s, i), base) for i in range(length))
    S = np.abs(np.fft.fft(s)) ** 2
    assert S.min() > 0


def test_extension_ranking():
    base = generate_mseq(MSequenceSpec.default(6, 1))
    best = extend_by_one(base)

    def loss(x):
        S = np.abs(np.fft.fft(x)) ** 2
        return np.mean(1 / S) * np.mean(S) if S.min() > 1e-12 else np.inf
    cands = [np.insert(base, i, v) for i in range(len(base) + 1) for v in (1.0, -1.0)]
    side = [abs(np.dot(c, np.roll(c, 1))) for c in cands]
    assert np.dot(best, np.roll(best, 1)) == min(side) == 0
    assert loss(best) <= min(loss(c) for c, s in zip(cands, side) if s == 0) + 1e-12


def test_odd_length_warns_and_truncates():
    with pytest.warns(UserWarning):
        s = component_sequence(20)
    assert len(s) == 20


def test_plain_length_is_mseq():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = component_sequence(15)
    assert np.array_equal(s, generate_mseq(MSequenceSpec.default(4)))


def test_profile_measures_cross_correlation():
    a = generate_mseq(MSequenceSpec.default(5, 0))
    b = generate_mseq(MSequenceSpec.default(5, 1))
    p = profile(a, b)
    assert p.peak == 1.0
    assert np.isclose(p.max_offpeak_abs, 1 / 31)
    brute = max(abs(np.dot(a, np.roll(b, t))) / 31 for t in range(31))
    assert np.isclose(p.cross_max_abs, brute)
    assert p.cross_max_abs < 0.4
    assert profile(a, generate_mseq(MSequenceSpec.default(4))).cross_max_abs is None
