# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled leapfrog kernels; same contracts as ``_numpy_kernels``."""
cimport cython

NAME = "cython"


def leapfrog1d(const double[::1] u_prev, const double[::1] u, const double[::1] src,
               double[::1] out, double lam2, double dt2):
    cdef Py_ssize_t i, n = u.shape[0]
    with nogil:
        for i in range(1, n - 1):
            out[i] = (2.0 * u[i] - u_prev[i]
                      + lam2 * (u[i + 1] - 2.0 * u[i] + u[i - 1]) + dt2 * src[i])
    return out.base if out.base is not None else out


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    if i < 0:
        return i + n
    if i >= n:
        return i - n
    return i


def leapfrog3d(const double[:, :, ::1] u_prev, const double[:, :, ::1] u, src,
               double[:, :, ::1] out, double lam2, double dt2, bint periodic):
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], n2 = u.shape[2]
    cdef Py_ssize_t i, j, k, lo0, hi0, lo1, hi1, lo2, hi2, im, ip, jm, jp
    cdef double lap, s
    cdef const double[:, :, ::1] sv
    cdef bint has_src = src is not None
    if has_src:
        sv = src
    if periodic:
        lo0 = lo1 = lo2 = 0
        hi0, hi1, hi2 = n0, n1, n2
    else:
        lo0 = lo1 = lo2 = 1
        hi0, hi1, hi2 = n0 - 1, n1 - 1, n2 - 1
    with nogil:
        for i in range(lo0, hi0):
            im = _wrap(i - 1, n0)
            ip = _wrap(i + 1, n0)
            for j in range(lo1, hi1):
                jm = _wrap(j - 1, n1)
                jp = _wrap(j + 1, n1)
                if periodic:
                    for k in range(n2):
                        lap = (u[ip, j, k] + u[im, j, k] + u[i, jp, k] + u[i, jm, k]
                               + u[i, j, _wrap(k + 1, n2)] + u[i, j, _wrap(k - 1, n2)]
                               - 6.0 * u[i, j, k])
                        s = sv[i, j, k] if has_src else 0.0
                        out[i, j, k] = 2.0 * u[i, j, k] - u_prev[i, j, k] + lam2 * lap + dt2 * s
                else:
                    for k in range(lo2, hi2):
                        lap = (u[ip, j, k] + u[im, j, k] + u[i, jp, k] + u[i, jm, k]
                               + u[i, j, k + 1] + u[i, j, k - 1] - 6.0 * u[i, j, k])
                        s = sv[i, j, k] if has_src else 0.0
                        out[i, j, k] = 2.0 * u[i, j, k] - u_prev[i, j, k] + lam2 * lap + dt2 * s
    return out.base if out.base is not None else out
