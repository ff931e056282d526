"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled with
``DDPILOT_PURE_PYTHON=1``. Results agree with the compiled versions to
floating-point rounding.
"""
import numpy as np


def twisted_accumulate(out, tx, delay, doppler, q_offsets, q_coef, row_phase):
    """out[l, k] += row_phase[l] * sum_j q_coef[j] * tx[l - delay, k - doppler + q_j]."""
    if out.shape != tx.shape:
        raise ValueError("out and tx shapes differ")
    M, N = tx.shape
    if len(row_phase) != M or len(q_coef) != len(q_offsets):
        raise ValueError("coefficient lengths do not match the grid")
    delayed = np.roll(tx, int(delay), axis=0)
    acc = np.zeros_like(tx)
    for q, c in zip(q_offsets, q_coef):
        # column k reads tx[:, k - doppler + q]
        acc += c * np.roll(delayed, int(doppler) - int(q), axis=1)
    out += row_phase[:, None] * acc


def correlate_direct(r, pilot, hyp_delay, hyp_doppler, cp_len,
                     compensate=True, pre_delay_branch=False):
    """Complex correlation of ``r`` with the phase-weighted shifted pilot per hypothesis."""
    if pilot.shape != r.shape:
        raise ValueError("pilot and received grid shapes differ")
    if len(hyp_delay) != len(hyp_doppler):
        raise ValueError("hypothesis arrays differ in length")
    M, N = r.shape
    rows = np.arange(M)
    cols = np.arange(N)
    denom = N * (M + cp_len)
    out = np.empty(len(hyp_delay), dtype=np.complex128)
    for h, (l0, k0) in enumerate(zip(hyp_delay, hyp_doppler)):
        l0 = int(l0)
        k0 = int(k0)
        shifted = np.roll(pilot, (l0, k0), axis=(0, 1))
        prod = np.conj(shifted) * r
        if compensate and pre_delay_branch and l0 > 0:
            pc = (cols - k0) % N
            branch = (N - 1) / N * np.exp(2j * np.pi * pc / N)
            prod[:l0] *= branch[None, :]
        row_sum = prod.sum(axis=1)
        if compensate:
            row_sum = row_sum * np.exp(-2j * np.pi * (cp_len + rows - l0) * k0 / denom)
        out[h] = row_sum.sum()
    return out
