"""Superdeterministic Bell/CHSH experiment simulator.

Each run is a pure function of (master seed, run index). The hidden variable
lambda is a family of counter-based hash streams: a shared source stream that
picks the singlet-ensemble member, and side-tagged streams lambda_A / lambda_B
that fix where inside the epsilon-disks the exact settings fall and which
rational vertex angles relate the counterfactual great circles. The nominal
choices x, y come from two further streams standing in for the experimenters'
parity bits.

Exact settings live on the grid cos(theta) = m/p - 1 shared with the qubit
model, so every realized pair has a rational cosine. Single-flip
counterfactuals are certified undefined by ``chsh_certify``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .exactmath import PrimeModulus, RationalAngle
from .raqm import bob_bit, singlet_ensemble
from .sphgeom import QuadSpec, Tag, TriangleSpec, chsh_certify, impossible_triangle

CHUNK = 4096
MAX_REDRAW = 8
PERTURB_K = 1 << 20
ANGLE_K = 32

CHSH_CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))
BELL_PAIRS = ((0, 1), (0, 2), (1, 2))
CHSH_FLAGS = ("def_xy", "def_xy'", "def_x'y", "def_x'y'")
BELL_FLAGS = ("def_x1x2", "def_x1x3", "def_x2x3")


class NoAdmissibleSetting(ValueError):
    pass


class CertifierInconclusive(RuntimeError):
    pass


class DegenerateReport(ValueError):
    pass


def band(epsilon: float) -> float:
    """Half-width of the admissible cos(theta) window for disks of radius epsilon."""
    return 2.0 * math.sin(epsilon) * (1.0 + epsilon)


@dataclass(frozen=True)
class NominalSetting:
    label: int
    center_angle: float
    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class HiddenVariable:
    """lambda for one run. ``perturb_a``/``perturb_b`` select a perturbed
    lambda'_A / lambda'_B substream; zero is the actual world."""

    master_seed: int
    run_index: int
    perturb_a: int = 0
    perturb_b: int = 0

    def _u(self, tag: int, k: int) -> float:
        return float(kernels.uniforms(self.master_seed, np.array([self.run_index]), tag, k)[0])

    def side(self, side: str, k: int = 0) -> float:
        if side == "A":
            return self._u(kernels.TAG_A, k + PERTURB_K * self.perturb_a)
        if side == "B":
            return self._u(kernels.TAG_B, k + PERTURB_K * self.perturb_b)
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")

    def source(self) -> float:
        return self._u(kernels.TAG_SRC, 0)

    def jitter(self, k: int = 0) -> float:
        u = self.side("A", k) + self.side("B", k)
        return u - 1.0 if u >= 1.0 else u

    def perturbed(self, side: str) -> HiddenVariable:
        if side == "A":
            return replace(self, perturb_a=self.perturb_a + 1)
        return replace(self, perturb_b=self.perturb_b + 1)


# -- exact settings -----------------------------------------------------------

@dataclass(frozen=True)
class GridWindow:
    m_lo: int
    m_hi: int

    @property
    def size(self) -> int:
        return self.m_hi - self.m_lo + 1

    def pick(self, u: float) -> int:
        return self.m_lo + math.floor(u * self.size)


def admissible_window(cos_nominal: float, epsilon: float, p: int) -> GridWindow:
    bd = band(epsilon)
    lo = max(0, math.ceil(p * (1.0 + cos_nominal - bd)))
    hi = min(2 * p, math.floor(p * (1.0 + cos_nominal + bd)))
    if lo > hi:
        raise NoAdmissibleSetting(
            f"no grid point m/{p} - 1 within {bd:.3g} of cos = {cos_nominal:.6f}")
    return GridWindow(lo, hi)


_ANGLE_DENS = tuple(b for b in range(5, 100) if math.gcd(b, 6) == 1)


@lru_cache(maxsize=None)
def _numerators(b: int) -> tuple[int, ...]:
    return tuple(a for a in range(1, (b - 1) // 2 + 1) if math.gcd(a, b) == 1)


def angle_from_uniforms(u1: float, u2: float) -> RationalAngle:
    """A vertex angle in (0, 180) degrees with denominator coprime to 24."""
    b = _ANGLE_DENS[math.floor(u1 * len(_ANGLE_DENS))]
    nums = _numerators(b)
    return RationalAngle(Fraction(nums[math.floor(u2 * len(nums))], b))


def draw_vertex_angles(lam: HiddenVariable, attempt: int = 0) -> dict[str, RationalAngle]:
    """alpha, beta sit at Alice's points (lambda_A); gamma, delta at Bob's (lambda_B)."""
    out = {}
    for i, (name, side) in enumerate((("alpha", "A"), ("beta", "A"), ("gamma", "B"), ("delta", "B"))):
        k = ANGLE_K + 8 * attempt + 2 * i
        out[name] = angle_from_uniforms(lam.side(side, k), lam.side(side, k + 1))
    return out


@dataclass(frozen=True)
class ExactConfig:
    p: int
    m: int
    vertex_angles: dict = field(default_factory=dict, compare=False)
    counterfactual_m: dict = field(default_factory=dict, compare=False)

    @property
    def cos_realized(self) -> Fraction:
        return Fraction(self.m, self.p) - 1


def _relative_cos(a: NominalSetting, b: NominalSetting) -> float:
    return math.cos(a.center_angle - b.center_angle)


def exact_config(lam: HiddenVariable, a: NominalSetting, b: NominalSetting,
                 p: int | PrimeModulus) -> ExactConfig:
    """X = E(lambda, x): a lambda-chosen grid point inside the band, plus vertex angles."""
    p = int(p.p if isinstance(p, PrimeModulus) else PrimeModulus(p).p)
    win = admissible_window(_relative_cos(a, b), max(a.epsilon, b.epsilon), p)
    return ExactConfig(p, win.pick(lam.jitter(0)), draw_vertex_angles(lam))


def nearest_config(a: NominalSetting, b: NominalSetting, p: int | PrimeModulus) -> ExactConfig:
    """The grid point closest to the nominal relative cosine (lambda-free)."""
    p = int(p.p if isinstance(p, PrimeModulus) else PrimeModulus(p).p)
    c = _relative_cos(a, b)
    m = min(2 * p, max(0, round(p * (1.0 + c))))
    if abs(m / p - 1.0 - c) > band(max(a.epsilon, b.epsilon)):
        raise NoAdmissibleSetting(f"nearest grid point {m}/{p} - 1 is outside the band")
    return ExactConfig(p, m)


def measure_pair(lam: HiddenVariable, cfg: ExactConfig) -> tuple[int, int]:
    """Outcomes (S_A, S_B): the source stream picks a member of singlet_ensemble(p, m)."""
    p = cfg.p
    idx = math.floor(lam.source() * (2 * p))
    return (1 if idx < p else -1), bob_bit(p, cfg.m, idx)


# -- experiment configuration -------------------------------------------------------

DEFAULT_ANGLES = {"chsh": (0.0, 45.0, 22.5, 67.5), "bell1964": (0.0, 45.0, 90.0)}


@dataclass(frozen=True)
class ExperimentConfig:
    """Angles are in degrees. With ``polarizer`` they are polariser orientations
    and the spin-space angle is twice the orientation."""

    experiment: str = "chsh"
    seed: int = 42
    p: int = 10007
    epsilon: Optional[float] = None
    runs: int = 100_000
    mode: str = "sampled"
    angles: Optional[tuple[float, ...]] = None
    polarizer: Optional[bool] = None
    workers: int = 1
    certify: bool = True

    def __post_init__(self) -> None:
        if self.experiment not in DEFAULT_ANGLES:
            raise ValueError(f"experiment must be chsh or bell1964, got {self.experiment!r}")
        PrimeModulus(self.p)
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.mode not in ("exact", "sampled"):
            raise ValueError("mode must be exact or sampled")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", 10.0 / self.p)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.angles is None:
            object.__setattr__(self, "angles", DEFAULT_ANGLES[self.experiment])
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        need = 4 if self.experiment == "chsh" else 3
        if len(self.angles) != need:
            raise ValueError(f"{self.experiment} needs {need} angles")
        if self.polarizer is None:
            object.__setattr__(self, "polarizer", self.experiment == "chsh")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def angle_factor(self) -> float:
        return 2.0 if self.polarizer else 1.0

    def settings(self) -> tuple[list[NominalSetting], list[NominalSetting]]:
        f = self.angle_factor
        rad = [math.radians(a) * f for a in self.angles]
        if self.experiment == "chsh":
            alice = [NominalSetting(i, rad[i], self.epsilon) for i in range(2)]
            bob = [NominalSetting(i, rad[2 + i], self.epsilon) for i in range(2)]
            return alice, bob
        s = [NominalSetting(i + 1, r, self.epsilon) for i, r in enumerate(rad)]
        return s, s

    def cells(self) -> list[tuple[int, int]]:
        return list(CHSH_CELLS) if self.experiment == "chsh" else list(BELL_PAIRS)

    def cell_settings(self, cell: int) -> tuple[NominalSetting, NominalSetting]:
        alice, bob = self.settings()
        i, j = self.cells()[cell]
        return alice[i], bob[j]

    def windows(self) -> list[GridWindow]:
        out = []
        for c in range(len(self.cells())):
            a, b = self.cell_settings(c)
            out.append(admissible_window(_relative_cos(a, b), self.epsilon, self.p))
        return out

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment, "seed": self.seed, "p": self.p,
            "epsilon": self.epsilon, "runs": self.runs, "mode": self.mode,
            "angles": list(self.angles), "polarizer": self.polarizer,
            "certify": self.certify,
        }


# -- runs -------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    lam: HiddenVariable
    nominal: tuple[int, int]
    exact: ExactConfig
    outcome_a: int
    outcome_b: int
    definedness: Optional[tuple[bool, ...]]


@dataclass
class RunLog:
    """Column store for many runs; ``log[i]`` gives a ``RunRecord``."""

    config: ExperimentConfig
    run: np.ndarray
    cell: np.ndarray
    m: np.ndarray
    index: np.ndarray
    a: np.ndarray
    b: np.ndarray
    u_jit: np.ndarray
    cf_m: np.ndarray
    defined: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.run)

    @property
    def nominal(self) -> np.ndarray:
        return np.asarray(self.config.cells(), dtype=np.int64)[self.cell]

    def __getitem__(self, i: int) -> RunRecord:
        cfg = self.config
        cf = {int(c): int(v) for c, v in enumerate(self.cf_m[i]) if v >= 0}
        lam = HiddenVariable(cfg.seed, int(self.run[i]))
        exact = ExactConfig(cfg.p, int(self.m[i]), draw_vertex_angles(lam), cf)
        d = None if self.defined is None else tuple(bool(v) for v in self.defined[i])
        return RunRecord(lam, cfg.cells()[int(self.cell[i])], exact,
                         int(self.a[i]), int(self.b[i]), d)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def concat(cls, config: ExperimentConfig, parts: Sequence[RunLog]) -> RunLog:
        defined = None
        if parts and all(p.defined is not None for p in parts):
            defined = np.concatenate([p.defined for p in parts])
        cols = {k: np.concatenate([getattr(p, k) for p in parts])
                for k in ("run", "cell", "m", "index", "a", "b", "u_jit", "cf_m")}
        return cls(config, defined=defined, **cols)


def _sample_chunk(config: ExperimentConfig, start: int, count: int) -> RunLog:
    wins = config.windows()
    n_cells = len(wins)
    lo = np.array([w.m_lo for w in wins], dtype=np.int64)
    sz = np.array([w.size for w in wins], dtype=np.int64)
    out = kernels.sample_runs(config.seed, start, count, config.p, n_cells, lo, sz)
    runs = np.arange(start, start + count, dtype=np.int64)
    # counterfactual exact settings: one lambda-jittered grid point per other cell
    cf = np.full((count, n_cells), -1, dtype=np.int64)
    for c in range(n_cells):
        u = kernels.uniforms(config.seed, runs, kernels.TAG_A, 1 + c) + \
            kernels.uniforms(config.seed, runs, kernels.TAG_B, 1 + c)
        u = np.where(u >= 1.0, u - 1.0, u)
        col = lo[c] + np.floor(u * sz[c]).astype(np.int64)
        cf[:, c] = np.where(out["cell"] == c, -1, col)
    log = RunLog(config, runs, out["cell"], out["m"], out["index"], out["a"], out["b"],
                 out["u_jit"], cf)
    if config.certify:
        log.defined = np.array([counterfactual_table(log[i]) for i in range(count)], dtype=bool)
    return log


def _chunks(runs: int) -> list[tuple[int, int]]:
    return [(s, min(CHUNK, runs - s)) for s in range(0, runs, CHUNK)]


def simulate_runs(config: ExperimentConfig) -> RunLog:
    """All runs of an experiment; identical output for any worker count."""
    jobs = _chunks(config.runs)
    if config.workers == 1 or len(jobs) == 1:
        parts = [_sample_chunk(config, s, n) for s, n in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            parts = list(ex.map(_sample_chunk, [config] * len(jobs),
                                [s for s, _ in jobs], [n for _, n in jobs]))
    return RunLog.concat(config, parts)


# -- counterfactual definedness ----------------------------------------------------

def _cos(m: int, p: int) -> Fraction:
    return Fraction(m, p) - 1


def chsh_quad(run: RunRecord, angles: dict) -> QuadSpec:
    """The quadrilateral in the realized frame: X0, Y0 realized, X1, Y1 flipped."""
    p = run.exact.p
    x, y = run.nominal
    cf = run.exact.counterfactual_m
    cell_of = {xy: i for i, xy in enumerate(CHSH_CELLS)}
    return QuadSpec(
        cos_x0y0=run.exact.cos_realized,
        cos_x1y0=_cos(cf[cell_of[(1 - x, y)]], p),
        cos_x0y1=_cos(cf[cell_of[(x, 1 - y)]], p),
        cos_x1y1=_cos(cf[cell_of[(1 - x, 1 - y)]], p),
        **angles,
    )


def counterfactual_table(run: RunRecord) -> tuple[bool, ...]:
    """Definedness of the counterfactual cells for one run.

    CHSH order: (x, y), (x, y'), (x', y), (x', y'). Bell-1964 order: the three
    pairs (1,2), (1,3), (2,3). Angle draws are repeated from fresh lambda
    substreams if a certificate comes back inconclusive.
    """
    for attempt in range(MAX_REDRAW):
        angles = draw_vertex_angles(run.lam, attempt)
        try:
            if len(run.exact.counterfactual_m) == 3:
                return _chsh_flags(run, angles)
            return _bell_flags(run, angles)
        except CertifierInconclusive:
            continue
    raise CertifierInconclusive(f"run {run.lam.run_index}: no conclusive certificate after redraws")


def _chsh_flags(run: RunRecord, angles: dict) -> tuple[bool, ...]:
    cert = chsh_certify(chsh_quad(run, angles))
    for edge in ("X1Y0", "X0Y1"):
        if cert[edge].tag is not Tag.FORCED_IRRATIONAL:
            raise CertifierInconclusive(f"{edge}: {cert[edge].tag.value}")
    # x,y / x,y' / x',y / x',y'
    return (True, False, False, True)


def _bell_flags(run: RunRecord, angles: dict) -> tuple[bool, ...]:
    i, j = run.nominal
    k = 3 - i - j
    p = run.exact.p
    pair_index = {pr: n for n, pr in enumerate(BELL_PAIRS)}
    c_ik = _cos(run.exact.counterfactual_m[pair_index[tuple(sorted((i, k)))]], p)
    verdict = impossible_triangle(TriangleSpec(run.exact.cos_realized, c_ik, angles["alpha"]))
    flags = [False, False, False]
    flags[pair_index[(i, j)]] = True
    flags[pair_index[tuple(sorted((i, k)))]] = True
    if verdict.tag is Tag.FORCED_IRRATIONAL:
        flags[pair_index[tuple(sorted((j, k)))]] = False
    elif verdict.tag is Tag.DEGENERATE:
        # X_j coincides with X_i (or its antipode): no triangle, nothing forced
        flags[pair_index[tuple(sorted((j, k)))]] = True
    else:
        raise CertifierInconclusive(verdict.tag.value)
    return tuple(flags)


# -- experiment ---------------------------------------------------------------------

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    correlations: dict
    grid_m: dict
    log: RunLog
    s_value: Optional[Fraction] = None
    bell_lhs: Optional[Fraction] = None
    bell_rhs: Optional[Fraction] = None

    @property
    def violated(self) -> bool:
        if self.s_value is not None:
            return self.s_value > 2
        return self.bell_lhs > self.bell_rhs


def exact_correlations(config: ExperimentConfig) -> tuple[dict, dict]:
    """Full-ensemble correlation per cell at the nearest grid point."""
    corr, ms = {}, {}
    for c, xy in enumerate(config.cells()):
        a, b = config.cell_settings(c)
        cfg = nearest_config(a, b, config.p)
        corr[xy] = singlet_ensemble(config.p, cfg.m).correlation()
        ms[xy] = cfg.m
    return corr, ms


def sampled_correlations(log: RunLog) -> dict:
    prod = log.a.astype(np.int64) * log.b
    out = {}
    for c, xy in enumerate(log.config.cells()):
        sel = log.cell == c
        n = int(sel.sum())
        out[xy] = None if n == 0 else Fraction(int(prod[sel].sum()), n)
    return out


def chsh_value(corr: dict) -> Fraction:
    return abs(corr[(0, 0)] - corr[(0, 1)] + corr[(1, 0)] + corr[(1, 1)])


def bell1964_sides(corr: dict) -> tuple[Fraction, Fraction]:
    return abs(corr[(0, 1)] - corr[(0, 2)]), 1 + corr[(1, 2)]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    log = simulate_runs(config)
    if config.mode == "exact":
        corr, ms = exact_correlations(config)
    else:
        corr = sampled_correlations(log)
        ms = {}
        if any(v is None for v in corr.values()):
            raise DegenerateReport("some setting pair never occurred; increase runs")
    res = ExperimentResult(config, corr, ms, log)
    if config.experiment == "chsh":
        res.s_value = chsh_value(corr)
    else:
        res.bell_lhs, res.bell_rhs = bell1964_sides(corr)
    return res


# -- measurement independence ----------------------------------------------------------

@dataclass
class MIReport:
    cells: list
    run_count: int
    cell_counts: dict
    exact_histograms: dict
    support: Optional[dict]
    all_defined_rate: Optional[float]
    product_zero_rate: Optional[float]
    single_flip_undefined_rate: Optional[float]
    coarse_bin_width: float
    coarse_histograms: dict
    coarse_chi2: float
    coarse_dof: int
    coarse_p: float


def mi_report(log: RunLog, bin_width: Optional[float] = None) -> MIReport:
    """Measurement independence at exact and at coarse (bin_width) resolution.

    Exact: which cells the same lambda could also have been measured in.
    Coarse: chi-square test that the binned lambda coordinate fixing the exact
    settings has the same distribution in every (x, y) cell.
    """
    cells = log.config.cells()
    counts = {xy: int((log.cell == c).sum()) for c, xy in enumerate(cells)}
    populated = [c for c, xy in enumerate(cells) if counts[xy] > 0]
    if len(populated) < 2:
        raise DegenerateReport("need runs in at least two (x, y) cells")
    width = log.config.epsilon if bin_width is None else bin_width

    hist = {}
    for c, xy in enumerate(cells):
        vals, cnt = np.unique(log.m[log.cell == c], return_counts=True)
        hist[xy] = {int(v): int(n) for v, n in zip(vals, cnt)}

    support = all_def = prod_zero = single_undef = None
    if log.defined is not None:
        d = log.defined
        support = {}
        for c, xy in enumerate(cells):
            sel = log.cell == c
            if sel.any():
                support[xy] = [float(v) for v in d[sel].mean(axis=0)]
        all_def = float(d.all(axis=1).mean())
        prod_zero = float((~d.all(axis=1)).mean())
        if log.config.experiment == "chsh":
            single_undef = float((~d[:, 1] & ~d[:, 2]).mean())

    nbins = max(1, math.ceil(1.0 / width))
    bins = np.minimum((log.u_jit / width).astype(np.int64), nbins - 1)
    table = np.zeros((len(cells), nbins), dtype=np.int64)
    np.add.at(table, (log.cell.astype(np.int64), bins), 1)
    table = table[populated][:, table.sum(axis=0) > 0]
    chi2, pval, dof, _ = stats.chi2_contingency(table, correction=False)
    coarse_hist = {cells[c]: table[n].tolist() for n, c in enumerate(populated)}
    return MIReport(cells, len(log), counts, hist, support, all_def, prod_zero, single_undef,
                    width, coarse_hist, float(chi2), int(dof), float(pval))


# -- local causality -------------------------------------------------------------------

@dataclass
class CausalityAudit:
    lc1_violations: int = 0
    lc2_undefined: int = 0
    defined_checked: int = 0
    by_kind: dict = field(default_factory=dict)

    def _note(self, kind: str, what: str) -> None:
        self.by_kind.setdefault(kind, {"lc1": 0, "lc2": 0, "defined": 0})[what] += 1


def _perturbed_setting(run: RunRecord, window: GridWindow, side: str):
    """Exact setting after a lambda'_side perturbation, and whether it is defined."""
    lam2 = run.lam.perturbed(side)
    m2 = window.pick(lam2.jitter(0))
    if m2 == run.exact.m:
        return lam2, m2, True
    p = run.exact.p
    k = ANGLE_K + PERTURB_K * (lam2.perturb_a if side == "A" else lam2.perturb_b)
    angle = angle_from_uniforms(lam2.side(side, k), lam2.side(side, k + 1))
    v = impossible_triangle(TriangleSpec(run.exact.cos_realized, _cos(m2, p), angle))
    return lam2, m2, v.tag is Tag.DEGENERATE


def causality_audit(log: RunLog) -> CausalityAudit:
    """Count lc1 events: a defined counterfactual changing only the far side that
    flips the near outcome. Undefined counterfactuals are counted as lc2."""
    audit = CausalityAudit()
    if len(log) == 0:
        return audit
    if log.defined is None:
        raise ValueError("records carry no counterfactual tables; run with certify=True")
    config = log.config
    windows = config.windows()
    cells = config.cells()
    cell_of = {xy: i for i, xy in enumerate(cells)}
    for i in range(len(log)):
        run = log[i]
        x, y = run.nominal
        flags = run.definedness
        if config.experiment == "chsh":
            far = [("x,y'", "B", (x, 1 - y), flags[1]), ("x',y", "A", (1 - x, y), flags[2])]
        else:
            k = 3 - x - y
            pair = {pr: n for n, pr in enumerate(BELL_PAIRS)}
            far = [("x_i,x_k", "B", tuple(sorted((x, k))), flags[pair[tuple(sorted((x, k)))]]),
                   ("x_k,x_j", "A", tuple(sorted((k, y))), flags[pair[tuple(sorted((k, y)))]])]
        for kind, changed, xy2, defined in far:
            if not defined:
                audit.lc2_undefined += 1
                audit._note(kind, "lc2")
                continue
            m2 = run.exact.counterfactual_m[cell_of[xy2]]
            a2, b2 = measure_pair(run.lam, ExactConfig(run.exact.p, m2))
            audit.defined_checked += 1
            audit._note(kind, "defined")
            flipped = (a2 != run.outcome_a) if changed == "B" else (b2 != run.outcome_b)
            if flipped:
                audit.lc1_violations += 1
                audit._note(kind, "lc1")
        for side in ("B", "A"):
            kind = f"lambda'_{side}"
            lam2, m2, defined = _perturbed_setting(run, windows[cell_of[(x, y)]], side)
            if not defined:
                audit.lc2_undefined += 1
                audit._note(kind, "lc2")
                continue
            a2, b2 = measure_pair(lam2, ExactConfig(run.exact.p, m2))
            audit.defined_checked += 1
            audit._note(kind, "defined")
            if (side == "B" and a2 != run.outcome_a) or (side == "A" and b2 != run.outcome_b):
                audit.lc1_violations += 1
                audit._note(kind, "lc1")
    return audit


# -- singular limit -----------------------------------------------------------------

def convergence_scan(base: ExperimentConfig, primes: Sequence[int] = (101, 1009, 10007)) -> list[dict]:
    """Exact-count S (or Bell sides) as p grows, with epsilon = 10/p each time."""
    rows = []
    for p in primes:
        cfg = replace(base, p=p, epsilon=10.0 / p, mode="exact")
        corr, ms = exact_correlations(cfg)
        row = {"p": p}
        if cfg.experiment == "chsh":
            s = chsh_value(corr)
            row.update(S=s, deviation=abs(float(s) - 2.0 * math.sqrt(2.0)), bound=4.0 / p)
        else:
            lhs, rhs = bell1964_sides(corr)
            row.update(lhs=lhs, rhs=rhs)
        rows.append(row)
    return rows


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))
