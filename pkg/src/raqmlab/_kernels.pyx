# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Must stay bit-identical to _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int8_t
from libc.math cimport floor, sqrt, log, isfinite

cnp.import_array()

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

cdef enum:
    TAG_X = 1
    TAG_Y = 2
    TAG_A = 3
    TAG_B = 4
    TAG_SRC = 5


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t draw(uint64_t seed, uint64_t run, uint64_t tag, uint64_t k) nogil:
    cdef uint64_t h = mix64(seed + GOLDEN)
    h = mix64(h ^ run)
    return mix64(h ^ ((tag << 32) | k))


cdef inline double unif(uint64_t seed, uint64_t run, uint64_t tag, uint64_t k) nogil:
    return <double>(draw(seed, run, tag, k) >> 11) * TWO_M53


def uniforms(seed, runs, int tag, int k):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.int64_t[:] r = np.ascontiguousarray(runs, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[:] o = out
    with nogil:
        for i in range(n):
            o[i] = unif(s, <uint64_t>r[i], tag, k)
    return out


def sample_runs(seed, int64_t start, int64_t count, int64_t p, int n_cells, m_lo, n_adm):
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef cnp.int64_t[:] lo = np.ascontiguousarray(m_lo, dtype=np.int64)
    cdef cnp.int64_t[:] na = np.ascontiguousarray(n_adm, dtype=np.int64)
    cell_a = np.empty(count, dtype=np.int8)
    m_a = np.empty(count, dtype=np.int64)
    idx_a = np.empty(count, dtype=np.int64)
    oa_a = np.empty(count, dtype=np.int8)
    ob_a = np.empty(count, dtype=np.int8)
    uj_a = np.empty(count, dtype=np.float64)
    cdef int8_t[:] cell = cell_a
    cdef cnp.int64_t[:] mm = m_a
    cdef cnp.int64_t[:] idx = idx_a
    cdef int8_t[:] oa = oa_a
    cdef int8_t[:] ob = ob_a
    cdef double[:] uj = uj_a
    cdef Py_ssize_t i
    cdef uint64_t run
    cdef int c
    cdef double u
    cdef int64_t m, j, same, kp, km, two_p = 2 * p
    with nogil:
        for i in range(count):
            run = <uint64_t>(start + i)
            if n_cells == 4:
                c = <int>(2 * (draw(s, run, TAG_X, 0) >> 63) + (draw(s, run, TAG_Y, 0) >> 63))
            else:
                c = <int>floor(unif(s, run, TAG_X, 0) * n_cells)
            u = unif(s, run, TAG_A, 0) + unif(s, run, TAG_B, 0)
            if u >= 1.0:
                u = u - 1.0
            j = <int64_t>floor(u * na[c])
            m = lo[c] + j
            cell[i] = c
            mm[i] = m
            uj[i] = u
            j = <int64_t>floor(unif(s, run, TAG_SRC, 0) * two_p)
            idx[i] = j
            same = two_p - m
            kp = (same + 1) // 2
            km = same // 2
            if j < p:
                oa[i] = 1
                ob[i] = 1 if j < kp else -1
            else:
                oa[i] = -1
                ob[i] = -1 if j - p < km else 1
    return {"cell": cell_a, "m": m_a, "index": idx_a, "a": oa_a, "b": ob_a, "u_jit": uj_a}


cdef inline void lorenz_rhs(double x, double y, double z, double sigma, double rho,
                            double beta, double* d) nogil:
    d[0] = sigma * (y - x)
    d[1] = x * (rho - z) - y
    d[2] = x * y - beta * z


cdef inline void rk4_step(double* s, double sigma, double rho, double beta, double dt) nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double h = 0.5 * dt
    lorenz_rhs(s[0], s[1], s[2], sigma, rho, beta, k1)
    lorenz_rhs(s[0] + h * k1[0], s[1] + h * k1[1], s[2] + h * k1[2], sigma, rho, beta, k2)
    lorenz_rhs(s[0] + h * k2[0], s[1] + h * k2[1], s[2] + h * k2[2], sigma, rho, beta, k3)
    lorenz_rhs(s[0] + dt * k3[0], s[1] + dt * k3[1], s[2] + dt * k3[2], sigma, rho, beta, k4)
    s[0] = s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    s[1] = s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    s[2] = s[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])


def lorenz_rk4(double x0, double y0, double z0, double sigma, double rho, double beta,
               double dt, int64_t steps):
    """Return a (steps + 1, 3) trajectory, or None if it leaves the finite range."""
    out = np.empty((steps + 1, 3), dtype=np.float64)
    cdef double[:, :] o = out
    cdef double s[3]
    cdef int64_t i
    cdef bint ok = True
    s[0] = x0; s[1] = y0; s[2] = z0
    o[0, 0] = x0; o[0, 1] = y0; o[0, 2] = z0
    with nogil:
        for i in range(1, steps + 1):
            rk4_step(s, sigma, rho, beta, dt)
            if not (isfinite(s[0]) and isfinite(s[1]) and isfinite(s[2])):
                ok = False
                break
            o[i, 0] = s[0]; o[i, 1] = s[1]; o[i, 2] = s[2]
    return out if ok else None


def lyapunov_benettin(double x0, double y0, double z0, double sigma, double rho, double beta,
                      double dt, int64_t steps, int64_t transient, double d0, int64_t every):
    """Largest Lyapunov exponent by two-trajectory renormalization."""
    cdef double a[3]
    cdef double b[3]
    cdef double acc = 0.0, dx, dy, dz, d
    cdef int64_t i
    a[0] = x0; a[1] = y0; a[2] = z0
    with nogil:
        for i in range(transient):
            rk4_step(a, sigma, rho, beta, dt)
        b[0] = a[0] + d0; b[1] = a[1]; b[2] = a[2]
        for i in range(1, steps + 1):
            rk4_step(a, sigma, rho, beta, dt)
            rk4_step(b, sigma, rho, beta, dt)
            if i % every == 0:
                dx = b[0] - a[0]; dy = b[1] - a[1]; dz = b[2] - a[2]
                d = sqrt(dx * dx + dy * dy + dz * dz)
                acc = acc + log(d / d0)
                b[0] = a[0] + dx * (d0 / d)
                b[1] = a[1] + dy * (d0 / d)
                b[2] = a[2] + dz * (d0 / d)
    return acc / (steps * dt)
