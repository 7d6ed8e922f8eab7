# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled state-vector kernels.

Hot inner loops of the Monte Carlo harness: single-particle gate
application, computational-basis marginals, and projective collapse.
Signatures match qsdcsim._kernels_py exactly.
"""

import numpy as np

from libc.math cimport sqrt


def apply_single(const double complex[::1] amps, const double complex[:, ::1] mat, Py_ssize_t stride):
    cdef Py_ssize_t d = mat.shape[0]
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t block = d * stride
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t base, off, r, c
    cdef double complex acc
    for base in range(0, n, block):
        for off in range(stride):
            for r in range(d):
                acc = 0
                for c in range(d):
                    acc = acc + mat[r, c] * amps[base + off + c * stride]
                ov[base + off + r * stride] = acc
    return out


def particle_probs(const double complex[::1] amps, Py_ssize_t d, Py_ssize_t stride):
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t block = d * stride
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t base, off, k
    cdef double complex a
    for base in range(0, n, block):
        for off in range(stride):
            for k in range(d):
                a = amps[base + off + k * stride]
                ov[k] += a.real * a.real + a.imag * a.imag
    return out


def project_digit(const double complex[::1] amps, Py_ssize_t d, Py_ssize_t stride, Py_ssize_t digit):
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t block = d * stride
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t base, off
    cdef double prob = 0.0
    cdef double inv
    cdef double complex a
    for base in range(0, n, block):
        for off in range(stride):
            a = amps[base + off + digit * stride]
            prob += a.real * a.real + a.imag * a.imag
    if prob > 0.0:
        inv = 1.0 / sqrt(prob)
        for base in range(0, n, block):
            for off in range(stride):
                ov[base + off + digit * stride] = amps[base + off + digit * stride] * inv
    return out, prob
