import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import singlet_correlation_bruteforce
from raqmlab.raqm import (
    bits_to_csv, bob_bit, born_frequency, grid_mean_toward_zero, make_qubit, phase_permute,
    singlet_ensemble, uncertainty_stats, xy_ensembles,
)

states = st.sampled_from([5, 7, 101]).flatmap(
    lambda p: st.tuples(st.just(p), st.integers(0, 2 * p), st.integers(0, 4 * p - 1)))


def test_make_qubit_examples():
    assert make_qubit(5, 10, 0).bits.tolist() == [1] * 10
    assert make_qubit(5, 5, 0).bits.tolist() == [1] * 5 + [-1] * 5
    canon = [1, 1, 1] + [-1] * 7
    assert make_qubit(5, 3, 2).bits.tolist() == canon[-2:] + canon[:-2]


def test_make_qubit_ranges():
    for bad in [(5, -1, 0), (5, 11, 0), (5, 3, 20), (5, 3, -1), (4, 1, 0)]:
        with pytest.raises(ValueError):
            make_qubit(*bad)


def test_bits_are_read_only():
    with pytest.raises(ValueError):
        make_qubit(5, 3, 0).bits[0] = -1


def test_born_examples():
    assert born_frequency(make_qubit(5, 0, 0)) == 0
    assert born_frequency(make_qubit(5, 10, 0)) == 1
    assert born_frequency(make_qubit(5, 5, 0)) == Fraction(1, 2)


@given(states)
def test_born_equals_plus_fraction(s):
    q = make_qubit(*s)
    assert born_frequency(q) == Fraction(int((q.bits == 1).sum()), 2 * q.p)
    assert born_frequency(q) == Fraction(s[1], 2 * s[0])


@given(states, st.integers(0, 1000), st.integers(0, 1000))
def test_phase_composition(s, a, b):
    q = make_qubit(*s)
    assert phase_permute(phase_permute(q, a), b) == phase_permute(q, a + b)
    assert np.array_equal(phase_permute(q, a).bits, np.roll(q.bits, a))


def test_phase_period():
    q = make_qubit(5, 3, 1)
    assert phase_permute(q, 0) == q
    full = phase_permute(q, 10)
    assert np.array_equal(full.bits, q.bits)
    assert full.n1 == q.n1 + 10       # phi advanced by pi, bits unchanged
    assert phase_permute(q, 20) == q


@given(states, st.integers(0, 50))
def test_z_quantities_invariant_under_phase(s, k):
    q = make_qubit(*s)
    r = phase_permute(q, k)
    assert born_frequency(r) == born_frequency(q)
    assert uncertainty_stats(r).mean_z == uncertainty_stats(q).mean_z


def test_qubit_json_and_csv():
    q = make_qubit(5, 3, 2)
    assert q.to_json_obj() == {"p": 5, "m1": 3, "n1": 2}
    assert bits_to_csv(q.bits).strip().split(",") == [str(v) for v in q.bits]


# -- uncertainty ---------------------------------------------------------------------

def test_uncertainty_examples():
    eig = uncertainty_stats(make_qubit(101, 202, 0))
    assert eig.product_lhs == Fraction(1, 4) and eig.bound_rhs == Fraction(1, 4)
    assert eig.holds
    eq = uncertainty_stats(make_qubit(101, 101, 7))
    assert eq.bound_rhs == 0 and eq.holds


def test_grid_mean_truncates_toward_zero():
    p = 10
    assert grid_mean_toward_zero(0.35, p) == 13     # 0.3 on the grid k/p - 1
    assert grid_mean_toward_zero(-0.35, p) == 7     # -0.3
    assert grid_mean_toward_zero(0.3, p) == 13
    assert grid_mean_toward_zero(1.0, p) == 20


@settings(max_examples=300)
@given(states)
def test_std_matches_numpy(s):
    q = make_qubit(*s)
    st_ = uncertainty_stats(q)
    bx, by = xy_ensembles(q)
    # spin units: the +/-1 strings are twice the spin component
    assert abs(float(st_.std_x) - np.std(bx / 2.0)) < 1e-12
    assert abs(float(st_.std_y) - np.std(by / 2.0)) < 1e-12
    assert st_.mean_x == Fraction(int(bx.sum()), len(bx))


def test_xy_means_close_to_bloch_components():
    p = 101
    for m1, n1 in [(30, 17), (150, 300), (101, 0), (5, 401)]:
        q = make_qubit(p, m1, n1)
        c = float(q.cos_theta)
        s = math.sqrt(1 - c * c)
        phi = 2 * math.pi * n1 / (4 * p)
        st_ = uncertainty_stats(q)
        assert abs(float(st_.mean_x) - s * math.cos(phi)) <= 1 / p + 1e-12
        assert abs(float(st_.mean_y) - s * math.sin(phi)) <= 1 / p + 1e-12


def test_uncertainty_sweep_p5():
    for m1 in range(11):
        for n1 in range(20):
            assert uncertainty_stats(make_qubit(5, m1, n1)).holds


# -- singlet ------------------------------------------------------------------------------

def test_singlet_examples():
    assert singlet_ensemble(101, 202).correlation() == -1
    assert singlet_ensemble(101, 101).correlation() == 0
    assert singlet_ensemble(101, 151).correlation() == Fraction(-50, 101)


@given(st.sampled_from([3, 5, 7, 101, 1009]).flatmap(lambda p: st.tuples(st.just(p), st.integers(0, 2 * p))))
def test_singlet_structure(pm):
    p, m = pm
    e = singlet_ensemble(p, m)
    a, b = e.alice_bits, e.bob_bits
    assert int((a == -b).sum()) == m
    assert int(a.sum()) == 0
    assert abs(int((b == 1).sum()) - p) <= 1       # balanced to within one count
    assert (int((b == 1).sum()) == p) == ((2 * p - m) % 2 == 0)
    assert e.correlation() == singlet_correlation_bruteforce(p, m) == -(Fraction(m, p) - 1)
    assert [bob_bit(p, m, i) for i in range(2 * p)] == b.tolist()


def test_singlet_range():
    with pytest.raises(ValueError):
        singlet_ensemble(5, 11)
