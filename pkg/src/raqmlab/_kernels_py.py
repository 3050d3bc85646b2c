"""Pure-Python/numpy versions of the compiled kernels.

Arithmetic is ordered exactly as in ``_kernels.pyx`` so both backends give
bit-identical results.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_U64 = np.uint64
GOLDEN = _U64(0x9E3779B97F4A7C15)
_C1 = _U64(0xBF58476D1CE4E5B9)
_C2 = _U64(0x94D049BB133111EB)
TWO_M53 = 1.0 / 9007199254740992.0

TAG_X, TAG_Y, TAG_A, TAG_B, TAG_SRC = 1, 2, 3, 4, 5


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _C1
    z = (z ^ (z >> _U64(27))) * _C2
    return z ^ (z >> _U64(31))


def _draw(seed: int, runs: np.ndarray, tag: int, k: int) -> np.ndarray:
    s = np.full(runs.shape, seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(s + GOLDEN)
        h = _mix64(h ^ runs.astype(np.uint64))
        return _mix64(h ^ _U64((tag << 32) | k))


def uniforms(seed: int, runs, tag: int, k: int) -> np.ndarray:
    runs = np.ascontiguousarray(runs, dtype=np.int64)
    return (_draw(seed, runs, tag, k) >> _U64(11)).astype(np.float64) * TWO_M53


def sample_runs(seed, start, count, p, n_cells, m_lo, n_adm):
    runs = np.arange(start, start + count, dtype=np.int64)
    m_lo = np.asarray(m_lo, dtype=np.int64)
    n_adm = np.asarray(n_adm, dtype=np.int64)
    if n_cells == 4:
        x = _draw(seed, runs, TAG_X, 0) >> _U64(63)
        y = _draw(seed, runs, TAG_Y, 0) >> _U64(63)
        cell = (2 * x + y).astype(np.int8)
    else:
        cell = np.floor(uniforms(seed, runs, TAG_X, 0) * n_cells).astype(np.int8)
    u = uniforms(seed, runs, TAG_A, 0) + uniforms(seed, runs, TAG_B, 0)
    u = np.where(u >= 1.0, u - 1.0, u)
    j = np.floor(u * n_adm[cell]).astype(np.int64)
    m = m_lo[cell] + j
    two_p = 2 * p
    idx = np.floor(uniforms(seed, runs, TAG_SRC, 0) * two_p).astype(np.int64)
    same = two_p - m
    kp = (same + 1) // 2
    km = same // 2
    alice_plus = idx < p
    a = np.where(alice_plus, 1, -1).astype(np.int8)
    b = np.where(alice_plus, np.where(idx < kp, 1, -1), np.where(idx - p < km, -1, 1)).astype(np.int8)
    return {"cell": cell, "m": m, "index": idx, "a": a, "b": b, "u_jit": u}


def _rk4_step(x, y, z, sigma, rho, beta, dt):
    h = 0.5 * dt
    k1x = sigma * (y - x); k1y = x * (rho - z) - y; k1z = x * y - beta * z
    ax, ay, az = x + h * k1x, y + h * k1y, z + h * k1z
    k2x = sigma * (ay - ax); k2y = ax * (rho - az) - ay; k2z = ax * ay - beta * az
    ax, ay, az = x + h * k2x, y + h * k2y, z + h * k2z
    k3x = sigma * (ay - ax); k3y = ax * (rho - az) - ay; k3z = ax * ay - beta * az
    ax, ay, az = x + dt * k3x, y + dt * k3y, z + dt * k3z
    k4x = sigma * (ay - ax); k4y = ax * (rho - az) - ay; k4z = ax * ay - beta * az
    c = dt / 6.0
    return (
        x + c * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + c * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        z + c * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
    )


def lorenz_rk4(x0, y0, z0, sigma, rho, beta, dt, steps):
    out = np.empty((steps + 1, 3), dtype=np.float64)
    x, y, z = float(x0), float(y0), float(z0)
    rows = [(x, y, z)]
    isfinite = math.isfinite
    for _ in range(steps):
        try:
            x, y, z = _rk4_step(x, y, z, sigma, rho, beta, dt)
        except OverflowError:
            return None
        if not (isfinite(x) and isfinite(y) and isfinite(z)):
            return None
        rows.append((x, y, z))
    out[:] = rows
    return out


def lyapunov_benettin(x0, y0, z0, sigma, rho, beta, dt, steps, transient, d0, every):
    a = (float(x0), float(y0), float(z0))
    for _ in range(transient):
        a = _rk4_step(*a, sigma, rho, beta, dt)
    b = (a[0] + d0, a[1], a[2])
    acc = 0.0
    for i in range(1, steps + 1):
        a = _rk4_step(*a, sigma, rho, beta, dt)
        b = _rk4_step(*b, sigma, rho, beta, dt)
        if i % every == 0:
            dx, dy, dz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            acc = acc + math.log(d / d0)
            b = (a[0] + dx * (d0 / d), a[1] + dy * (d0 / d), a[2] + dz * (d0 / d))
    return acc / (steps * dt)
