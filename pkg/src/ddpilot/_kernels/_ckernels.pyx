# cython: language_level=3
"""Compiled inner loops for the delay-Doppler channel and the direct correlator.

Signatures and semantics mirror :mod:`ddpilot._kernels._pykernels` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

cnp.import_array()


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) nogil:
    i = i % n
    if i < 0:
        i += n
    return i


def twisted_accumulate(double complex[:, ::1] out,
                       const double complex[:, ::1] tx,
                       Py_ssize_t delay,
                       Py_ssize_t doppler,
                       const cnp.int64_t[::1] q_offsets,
                       const double complex[::1] q_coef,
                       const double complex[::1] row_phase):
    """out[l, k] += row_phase[l] * sum_j q_coef[j] * tx[l - delay, k - doppler + q_j]."""
    cdef Py_ssize_t M = tx.shape[0]
    cdef Py_ssize_t N = tx.shape[1]
    cdef Py_ssize_t Q = q_offsets.shape[0]
    cdef Py_ssize_t l, k, j, src_row, src_col
    cdef double complex acc
    if out.shape[0] != M or out.shape[1] != N:
        raise ValueError("out and tx shapes differ")
    if row_phase.shape[0] != M or q_coef.shape[0] != Q:
        raise ValueError("coefficient lengths do not match the grid")
    with nogil:
        for l in range(M):
            src_row = _wrap(l - delay, M)
            for k in range(N):
                acc = 0
                for j in range(Q):
                    src_col = _wrap(k - doppler + q_offsets[j], N)
                    acc = acc + q_coef[j] * tx[src_row, src_col]
                out[l, k] = out[l, k] + row_phase[l] * acc


def correlate_direct(const double complex[:, ::1] r,
                     const double complex[:, ::1] pilot,
                     const cnp.int64_t[::1] hyp_delay,
                     const cnp.int64_t[::1] hyp_doppler,
                     Py_ssize_t cp_len,
                     bint compensate=True,
                     bint pre_delay_branch=False):
    """Complex correlation of ``r`` with the phase-weighted shifted pilot per hypothesis."""
    cdef Py_ssize_t M = r.shape[0]
    cdef Py_ssize_t N = r.shape[1]
    cdef Py_ssize_t H = hyp_delay.shape[0]
    cdef Py_ssize_t h, lp, kp, l0, k0, pr, pc
    cdef double denom = <double>N * <double>(M + cp_len)
    cdef double ang
    cdef double complex acc, row_acc, p
    cdef bint branch
    if pilot.shape[0] != M or pilot.shape[1] != N:
        raise ValueError("pilot and received grid shapes differ")
    if hyp_doppler.shape[0] != H:
        raise ValueError("hypothesis arrays differ in length")
    result = np.zeros(H, dtype=np.complex128)
    cdef double complex[::1] res = result
    # conj of ((N-1)/N) exp(-j 2 pi [k'-k]_N / N), indexed by [k'-k]_N
    cdef double complex[::1] br = ((N - 1.0) / N) * np.exp(2j * np.pi * np.arange(N) / N)
    with nogil:
        for h in range(H):
            l0 = hyp_delay[h]
            k0 = hyp_doppler[h]
            acc = 0
            for lp in range(M):
                pr = _wrap(lp - l0, M)
                branch = pre_delay_branch and compensate and lp < l0
                row_acc = 0
                pc = _wrap(-k0, N)
                for kp in range(N):
                    p = pilot[pr, pc]
                    if branch:
                        row_acc = row_acc + (p.real - 1j * p.imag) * br[pc] * r[lp, kp]
                    else:
                        row_acc = row_acc + (p.real - 1j * p.imag) * r[lp, kp]
                    pc = pc + 1
                    if pc == N:
                        pc = 0
                if compensate:
                    ang = -2.0 * M_PI * <double>(cp_len + lp - l0) * <double>k0 / denom
                    acc = acc + (cos(ang) + 1j * sin(ang)) * row_acc
                else:
                    acc = acc + row_acc
            res[h] = acc
    return result
