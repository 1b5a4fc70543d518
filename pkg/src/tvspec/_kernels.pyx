# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: sequential QR reduction scan and scaled products.

Mirrors the semantics of ``_kernels_py`` (the pure numpy reference).
Both compute the same factorizations; results agree to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, log, sqrt

cnp.import_array()


cdef inline void _matmul(const double[:, ::1] a, const double[:, ::1] b,
                         double[:, ::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += a[i, k] * b[k, j]
            out[i, j] = s


def qr_logdiag_scan(steps, q0=None):
    """Sequential orthogonal triangular reduction; see the numpy twin.

    Uses modified Gram-Schmidt with one reorthogonalization pass, which
    keeps Q orthonormal to rounding for the well-conditioned factors the
    validation layer admits.
    """
    steps_c = np.ascontiguousarray(steps, dtype=np.float64)
    if steps_c.ndim != 3 or steps_c.shape[1] != steps_c.shape[2]:
        raise ValueError("square factors required")
    cdef Py_ssize_t k_steps = steps_c.shape[0]
    cdef Py_ssize_t d = steps_c.shape[1]

    out_arr = np.empty((k_steps, d), dtype=np.float64)
    if q0 is None:
        q_arr = np.eye(d)
    else:
        q_arr = np.array(q0, dtype=np.float64, order="C")
        if q_arr.shape != (d, d):
            raise ValueError("q0 must match the factor dimension")
    z_arr = np.empty((d, d), dtype=np.float64)

    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] z = z_arr
    cdef const double[:, :, ::1] sv = steps_c
    cdef Py_ssize_t k, i, j, p, rep
    cdef double proj, nrm

    with nogil:
        for k in range(k_steps):
            _matmul(sv[k], q, z, d)
            # MGS on the columns of z, reorthogonalized, written back to q.
            for i in range(d):
                for rep in range(2):
                    for p in range(i):
                        proj = 0.0
                        for j in range(d):
                            proj += q[j, p] * z[j, i]
                        for j in range(d):
                            z[j, i] -= proj * q[j, p]
                nrm = 0.0
                for j in range(d):
                    nrm += z[j, i] * z[j, i]
                nrm = sqrt(nrm)
                if nrm > 0.0:
                    for j in range(d):
                        q[j, i] = z[j, i] / nrm
                    out[k, i] = log(nrm)
                else:
                    for j in range(d):
                        q[j, i] = 0.0
                    out[k, i] = -1e308
    return out_arr


def renorm_product(factors):
    """Scaled product in application order; see the numpy twin."""
    factors_c = np.ascontiguousarray(factors, dtype=np.float64)
    if factors_c.ndim != 3 or factors_c.shape[1] != factors_c.shape[2]:
        raise ValueError("expected a (K, d, d) stack")
    cdef Py_ssize_t k_steps = factors_c.shape[0]
    cdef Py_ssize_t d = factors_c.shape[1]

    acc_arr = np.eye(d)
    tmp_arr = np.empty((d, d), dtype=np.float64)

    cdef double[:, ::1] acc = acc_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef const double[:, :, ::1] fv = factors_c
    cdef double logscale = 0.0
    cdef double peak, v
    cdef Py_ssize_t k, i, j

    with nogil:
        for k in range(k_steps):
            _matmul(fv[k], acc, tmp, d)
            peak = 0.0
            for i in range(d):
                for j in range(d):
                    v = fabs(tmp[i, j])
                    if v > peak:
                        peak = v
            if peak > 1e100 or (0.0 < peak < 1e-100):
                logscale += log(peak)
                for i in range(d):
                    for j in range(d):
                        acc[i, j] = tmp[i, j] / peak
            else:
                for i in range(d):
                    for j in range(d):
                        acc[i, j] = tmp[i, j]
    return acc_arr, logscale
