"""Chaos calculations: gravitational butterfly amplification and the Lorenz system."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels

G_NEWTON = 6.674e-11


class NonAmplifying(ValueError):
    pass


class NonFinite(ArithmeticError):
    pass


class EmptyTrajectory(ValueError):
    pass


@dataclass(frozen=True)
class ButterflyParams:
    l: float = 1e-7
    R: float = 1e-10
    tau: float = 1e-9
    G: float = G_NEWTON
    m_source: float = 1e-5
    delta_r: float = 1e-2
    r: float = 1e22

    def __post_init__(self) -> None:
        for name in ("l", "R", "tau", "G", "m_source", "r"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta_r < 0:
            raise ValueError("delta_r must be non-negative")

    @property
    def log10_ratio(self) -> float:
        return math.log10(self.l) - math.log10(self.R)


@dataclass(frozen=True)
class Perturbation:
    delta_a: float
    delta_theta1: float
    log10_delta_a: float
    log10_delta_theta1: float


def _log10(x: float) -> float:
    return -math.inf if x == 0 else math.log10(x)


def grav_perturbation(p: ButterflyParams) -> Perturbation:
    """Tidal acceleration change 2 G m dr / r^3 and the first deflection tau^2 da / R."""
    if p.delta_r == 0:
        return Perturbation(0.0, 0.0, -math.inf, -math.inf)
    log_da = math.log10(2.0) + _log10(p.G) + _log10(p.m_source) + _log10(p.delta_r) - 3 * _log10(p.r)
    log_dt = 2 * _log10(p.tau) + log_da - _log10(p.R)
    return Perturbation(10.0**log_da, 10.0**log_dt, log_da, log_dt)


def log10_collision_growth(p: ButterflyParams, M: int, log10_theta1: float) -> float:
    if M < 0:
        raise ValueError("M must be >= 0")
    return M * p.log10_ratio + log10_theta1


def collision_growth(p: ButterflyParams, M: int, delta_theta1: float) -> float:
    """(l/R)**M * delta_theta1, evaluated in log space."""
    if delta_theta1 == 0:
        return 0.0
    return 10.0 ** log10_collision_growth(p, M, math.log10(delta_theta1))


def collisions_until(p: ButterflyParams, delta_theta1: float, target: float) -> int:
    if p.l / p.R <= 1:
        raise NonAmplifying(f"l/R = {p.l / p.R:g} does not amplify")
    if delta_theta1 <= 0:
        raise ValueError("delta_theta1 must be positive")
    need = (math.log10(target) - math.log10(delta_theta1)) / p.log10_ratio
    if need <= 0:
        return 0
    # l/R = 1e-7/1e-10 is not exactly 1000 in binary; absorb that rounding
    return math.ceil(need - 1e-9)


def butterfly_table(p: ButterflyParams, delta_theta1: Optional[float] = None,
                    target: float = 1.0) -> list[tuple[int, float]]:
    """Rows (M, log10 dtheta_M) from M = 0 to the first M reaching target."""
    if delta_theta1 is None:
        delta_theta1 = grav_perturbation(p).delta_theta1
    last = collisions_until(p, delta_theta1, target)
    lt1 = math.log10(delta_theta1)
    return [(M, log10_collision_growth(p, M, lt1)) for M in range(last + 1)]


# -- Lorenz ---------------------------------------------------------------------

@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    dt: float = 1e-3
    steps: int = 10_000

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def lorenz_integrate(initial, params: LorenzParams = LorenzParams()) -> np.ndarray:
    x0, y0, z0 = (float(v) for v in initial)
    if not all(map(math.isfinite, (x0, y0, z0))):
        raise NonFinite("initial state is not finite")
    traj = kernels.lorenz_rk4(x0, y0, z0, params.sigma, params.rho, params.beta,
                              params.dt, int(params.steps))
    if traj is None:
        raise NonFinite("trajectory overflowed")
    return traj


def lyapunov_exponent(initial=(1.0, 1.0, 1.0), params: LorenzParams = LorenzParams(dt=0.01, steps=200_000),
                      transient: int = 2_000, d0: float = 1e-8, renorm_every: int = 10) -> float:
    """Largest exponent from a reference/shadow pair renormalized every few steps."""
    x0, y0, z0 = (float(v) for v in initial)
    return kernels.lyapunov_benettin(x0, y0, z0, params.sigma, params.rho, params.beta,
                                     params.dt, int(params.steps), int(transient), d0, int(renorm_every))


@dataclass(frozen=True)
class CoarseGrainSpec:
    epsilon: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


class _Empty:
    def __repr__(self) -> str:
        return "EMPTY"

    def __bool__(self) -> bool:
        return False


EMPTY = _Empty()


@dataclass
class CoarseStats:
    """Occupancy of cubic bins of side 2*epsilon and per-bin means.

    ``global_mean`` uses bin centres weighted by occupancy, i.e. what an
    observer who only sees epsilon-resolution output would compute.
    """

    spec: CoarseGrainSpec
    keys: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    total: int
    global_mean: np.ndarray
    _index: dict = field(default_factory=dict, repr=False)

    def bin_key(self, point) -> tuple[int, int, int]:
        w = 2.0 * self.spec.epsilon
        o = np.asarray(self.spec.origin, dtype=float)
        k = np.floor((np.asarray(point, dtype=float) - o) / w).astype(np.int64)
        return tuple(int(v) for v in k)

    def lookup(self, point):
        """(occupancy measure, mean) for the bin holding ``point``, or EMPTY."""
        if not self._index:
            self._index = {tuple(int(v) for v in k): i for i, k in enumerate(self.keys)}
        i = self._index.get(self.bin_key(point))
        if i is None:
            return EMPTY
        return self.counts[i] / self.total, self.means[i]

    def to_json_obj(self) -> dict:
        return {
            "epsilon": self.spec.epsilon,
            "origin": list(self.spec.origin),
            "occupied_bins": int(len(self.counts)),
            "samples": self.total,
            "coarse_mean": [float(v) for v in self.global_mean],
        }


def coarse_grain_stats(trajectory, spec: CoarseGrainSpec) -> CoarseStats:
    pts = np.asarray(trajectory, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyTrajectory("trajectory has no points")
    w = 2.0 * spec.epsilon
    origin = np.asarray(spec.origin, dtype=float)
    keys = np.floor((pts - origin) / w).astype(np.int64)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    means = np.empty((len(uniq), 3))
    for d in range(3):
        means[:, d] = np.bincount(inverse, weights=pts[:, d], minlength=len(uniq)) / counts
    centres = origin + (uniq + 0.5) * w
    gmean = (centres * counts[:, None]).sum(axis=0) / len(pts)
    return CoarseStats(spec, uniq, counts, means, int(len(pts)), gmean)
