import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chi2_homogeneity, hash_uniform
from raqmlab import bellharness as bh
from raqmlab.bellharness import (
    CertifierInconclusive, DegenerateReport, ExactConfig, ExperimentConfig, HiddenVariable,
    NoAdmissibleSetting, NominalSetting, band, causality_audit, counterfactual_table,
    exact_config, measure_pair, mi_report, nearest_config, run_experiment, simulate_runs,
)
from raqmlab.exactmath import is_exceptional
from raqmlab.raqm import singlet_ensemble
from raqmlab.sphgeom import Tag

EPS = 0.01


def setting(deg, eps=EPS, label=0):
    return NominalSetting(label, math.radians(deg), eps)


# -- exact settings ---------------------------------------------------------------------

def test_nearest_config_examples():
    assert nearest_config(setting(0), setting(0), 101).m == 202
    cfg = nearest_config(setting(45), setting(0), 101)
    assert cfg.m == 172 and cfg.cos_realized == Fraction(71, 101)
    with pytest.raises(NoAdmissibleSetting):
        nearest_config(setting(45, 1e-6), setting(0, 1e-6), 3)


def test_exact_config_no_admissible():
    with pytest.raises(NoAdmissibleSetting):
        exact_config(HiddenVariable(1, 0), setting(45, 1e-6), setting(0, 1e-6), 3)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 10**6), st.floats(0, 180), st.sampled_from([101, 1009, 10007]))
def test_exact_config_within_band_and_deterministic(seed, run, deg, p):
    a, b = setting(deg, 10 / p), setting(0, 10 / p)
    lam = HiddenVariable(seed, run)
    cfg = exact_config(lam, a, b, p)
    assert abs(float(cfg.cos_realized) - math.cos(math.radians(deg))) <= band(10 / p) + 1e-12
    assert -1 <= cfg.cos_realized <= 1
    assert cfg == exact_config(lam, a, b, p)
    assert cfg.vertex_angles == exact_config(lam, a, b, p).vertex_angles
    for ang in cfg.vertex_angles.values():
        assert math.gcd(ang.turns.denominator, 24) == 1 and not is_exceptional(ang)
        assert 0 < ang.turns < Fraction(1, 2)


def test_exact_config_jitter_covers_window():
    a, b = setting(45, 10 / 101), setting(0, 10 / 101)
    win = bh.admissible_window(math.cos(math.radians(45)), 10 / 101, 101)
    seen = {exact_config(HiddenVariable(5, r), a, b, 101).m for r in range(4000)}
    assert seen == set(range(win.m_lo, win.m_hi + 1))
    assert 172 in seen


def test_hidden_variable_streams():
    lam = HiddenVariable(9, 123)
    assert lam.side("A", 4) == hash_uniform(9, 123, 3, 4)
    assert lam.side("B", 4) == hash_uniform(9, 123, 4, 4)
    assert lam.source() == hash_uniform(9, 123, 5, 0)
    pa = lam.perturbed("A")
    assert pa.side("B", 4) == lam.side("B", 4)
    assert pa.side("A", 4) != lam.side("A", 4)
    with pytest.raises(ValueError):
        lam.side("C")


# -- measurement -----------------------------------------------------------------------------

@given(st.integers(0, 2**32), st.integers(0, 10**6))
def test_aligned_axes_anticorrelate(seed, run):
    a, b = measure_pair(HiddenVariable(seed, run), ExactConfig(101, 202))
    assert a == -b


def test_measure_pair_draws_from_the_ensemble():
    p, m = 101, 151
    ens = singlet_ensemble(p, m)
    for r in range(300):
        lam = HiddenVariable(3, r)
        idx = math.floor(lam.source() * 2 * p)
        assert measure_pair(lam, ExactConfig(p, m)) == ens.outcome(idx)
    assert ens.correlation() == Fraction(-50, 101)


def test_exact_mode_identities():
    cfg = ExperimentConfig(runs=10, mode="exact", certify=False)
    res = run_experiment(cfg)
    for xy, c in res.correlations.items():
        assert c == -(Fraction(res.grid_m[xy], cfg.p) - 1)
    same = ExperimentConfig(runs=10, mode="exact", angles=(0, 0, 0, 0), certify=False)
    assert all(c == -1 for c in run_experiment(same).correlations.values())


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(p=100)
    with pytest.raises(ValueError):
        ExperimentConfig(runs=0)
    with pytest.raises(ValueError):
        ExperimentConfig(mode="other")
    with pytest.raises(ValueError):
        ExperimentConfig(angles=(0, 1, 2))
    assert ExperimentConfig(p=101).epsilon == pytest.approx(10 / 101)


# -- counterfactual tables ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def chsh_log():
    return simulate_runs(ExperimentConfig(runs=3000, seed=17))


@pytest.fixture(scope="module")
def bell_log():
    return simulate_runs(ExperimentConfig(experiment="bell1964", runs=2000, seed=17))


def test_chsh_tables(chsh_log):
    d = chsh_log.defined
    assert d.shape == (3000, 4)
    assert d[:, 0].all() and d[:, 3].all()
    assert not d[:, 1].any() and not d[:, 2].any()
    assert (d.astype(int).prod(axis=1) == 0).all()


def test_chsh_table_is_certified(chsh_log):
    from raqmlab.sphgeom import chsh_certify
    for i in (0, 1, 500, 2999):
        run = chsh_log[i]
        cert = chsh_certify(bh.chsh_quad(run, run.exact.vertex_angles))
        assert cert["X1Y0"].tag is Tag.FORCED_IRRATIONAL
        assert cert["X0Y1"].tag is Tag.FORCED_IRRATIONAL
        assert cert["X1Y1"].tag is Tag.NO_VERDICT
        assert counterfactual_table(run) == (True, False, False, True)


def test_bell_tables(bell_log):
    d = bell_log.defined
    pair = {xy: n for n, xy in enumerate(bh.BELL_PAIRS)}
    for i in range(len(bell_log)):
        x, y = bell_log.config.cells()[int(bell_log.cell[i])]
        assert d[i, pair[(x, y)]]
        assert d[i].sum() == 2


def test_redraw_on_inconclusive(monkeypatch, chsh_log):
    calls = []
    real = bh._chsh_flags

    def flaky(run, angles):
        calls.append(angles)
        if len(calls) == 1:
            raise CertifierInconclusive("forced for the test")
        return real(run, angles)

    monkeypatch.setattr(bh, "_chsh_flags", flaky)
    assert counterfactual_table(chsh_log[0]) == (True, False, False, True)
    assert len(calls) == 2 and calls[0] != calls[1]


def test_runlog_records(chsh_log):
    r = chsh_log[5]
    assert r.lam == HiddenVariable(17, 5)
    assert r.definedness[0] is True
    assert len(r.exact.counterfactual_m) == 3
    assert (r.outcome_a, r.outcome_b) == measure_pair(r.lam, r.exact)


# -- MI and causality -----------------------------------------------------------------------

def test_mi_report(chsh_log):
    rep = mi_report(chsh_log)
    assert sum(rep.cell_counts.values()) == len(chsh_log)
    assert sum(sum(h.values()) for h in rep.exact_histograms.values()) == len(chsh_log)
    assert sum(sum(h) for h in rep.coarse_histograms.values()) == len(chsh_log)
    assert rep.all_defined_rate == 0 and rep.product_zero_rate == 1
    assert rep.single_flip_undefined_rate == 1
    table = np.array([rep.coarse_histograms[c] for c in rep.coarse_histograms])
    assert rep.coarse_chi2 == pytest.approx(chi2_homogeneity(table), rel=1e-9)


def test_mi_report_degenerate():
    log = simulate_runs(ExperimentConfig(runs=1, certify=False))
    with pytest.raises(DegenerateReport):
        mi_report(log)


def test_causality_audit(chsh_log, bell_log):
    a = causality_audit(chsh_log)
    assert a.lc1_violations == 0
    assert a.by_kind["x,y'"]["lc2"] == len(chsh_log)
    assert a.by_kind["x',y"]["lc2"] == len(chsh_log)
    b = causality_audit(bell_log)
    assert b.lc1_violations == 0
    assert b.by_kind["x_i,x_k"]["defined"] == len(bell_log)
    cols = ("run", "cell", "m", "index", "a", "b", "u_jit", "cf_m")
    empty = bh.RunLog(chsh_log.config, *(getattr(chsh_log, k)[:0] for k in cols),
                      defined=chsh_log.defined[:0])
    assert causality_audit(empty).lc1_violations == 0


def test_audit_detects_a_planted_violation():
    """A nonlocal outcome rule must be caught, so the zero count is not vacuous."""
    log = simulate_runs(ExperimentConfig(experiment="bell1964", runs=200, seed=3))
    real = bh.measure_pair

    def nonlocal_pair(lam, cfg):
        a, b = real(lam, cfg)
        return (-a if cfg.m % 2 else a), b

    try:
        bh.measure_pair = nonlocal_pair
        assert causality_audit(log).lc1_violations > 0
    finally:
        bh.measure_pair = real


# -- workers ---------------------------------------------------------------------------------------

def test_worker_count_does_not_change_results():
    one = simulate_runs(ExperimentConfig(runs=9000, workers=1, certify=False))
    three = simulate_runs(ExperimentConfig(runs=9000, workers=3, certify=False))
    for k in ("run", "cell", "m", "index", "a", "b", "u_jit", "cf_m"):
        assert np.array_equal(getattr(one, k), getattr(three, k))


def test_convergence_scan_monotone():
    rows = bh.convergence_scan(ExperimentConfig())
    devs = [r["deviation"] for r in rows]
    assert devs[0] > devs[1] > devs[2]
    assert all(r["deviation"] <= r["bound"] for r in rows)
