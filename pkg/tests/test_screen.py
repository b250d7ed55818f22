import itertools
import math

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr
from hypothesis import assume, given, strategies as st

from trinodisc.quadforms import class_number, enumerate_forms
from trinodisc.screen import (
    TrinomialSignature,
    best_triple,
    log_abs_j,
    margin_of,
    principal_rhs,
    refined_principal_rhs,
    scan_small,
    witness_margin,
)
from trinodisc.singular_moduli import singular_moduli

SIG1 = TrinomialSignature(5, 4)


def brute_force_best(logs):
    best = -math.inf
    for i, j, k in itertools.combinations(range(len(logs)), 3):
        best = max(best, margin_of(logs[i], logs[j], logs[k]))
    return best


def test_witness_1467():
    r = witness_margin(-1467)
    assert r.h == 4
    assert 0.001 < r.margin - r.error_bound
    assert r.margin + r.error_bound < 0.15
    assert abs(r.margin - 0.0017417) < 1e-6
    assert r.triple[0] == (1, 1, 367) and r.triple[2] == (9, 9, 43)
    assert r.triple[1][0] == 9 and abs(r.triple[1][1]) == 3
    assert r.error_bound < 1e-6


def test_witness_479():
    r = witness_margin(-479)
    assert r.h == 25
    assert r.margin - r.error_bound > 0.15
    assert r.certified


@pytest.mark.parametrize("delta", [-23, -31, -59, -83, -107, -283, -907])
def test_class_number_three_is_degenerate(delta):
    r = witness_margin(delta)
    assert r.h == 3
    assert not r.certified
    xs = singular_moduli(delta)
    ratio = float(abs(xs[1].value) / abs(xs[0].value))
    assert abs(abs(r.margin) - (2 * ratio + 2 * ratio**3)) <= r.error_bound + 1e-15


def test_witness_rejects_small_class_number():
    with pytest.raises(ValueError):
        witness_margin(-15)


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=14))
def test_best_triple_matches_brute_force(values):
    logs = sorted(values, reverse=True)
    assume(logs[0] > logs[1])
    i0, i1, i2, m = best_triple(logs)
    assert m == pytest.approx(brute_force_best(logs), abs=1e-12)
    assert m == pytest.approx(margin_of(logs[i0], logs[i1], logs[i2]))


def test_best_triple_matches_brute_force_on_moduli():
    for delta in (-1467, -479, -2999, -4004, -9999):
        vals, _ = log_abs_j(*zip(*[(-delta, f.a, f.b) for f in enumerate_forms(delta)]))
        logs = sorted(vals.tolist(), reverse=True)
        assert best_triple(logs)[3] == pytest.approx(brute_force_best(logs), abs=1e-12)


@given(st.integers(3, 8).flatmap(lambda m: st.tuples(
    st.just(m), st.integers(1, m - 1),
    st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
    st.floats(-1e3, 1e3).filter(lambda b: abs(b) > 1e-3))))
def test_trinomial_roots_never_have_positive_margin(params):
    m, n, A, B = params
    coeffs = np.zeros(m + 1, dtype=complex)
    coeffs[0], coeffs[m - n], coeffs[m] = 1, A, B
    roots = sorted(np.roots(coeffs), key=lambda z: -abs(z))
    logs = [math.log(abs(z)) for z in roots]
    for i, j, k in itertools.combinations(range(m), 3):
        assert margin_of(logs[i], logs[j], logs[k]) <= 1e-6


@pytest.mark.parametrize("delta", [-1467, -479, -3299, -8711])
def test_precision_refinement(delta):
    lo = witness_margin(delta, 128)
    hi = witness_margin(delta, 256)
    assert abs(lo.margin - hi.margin) <= lo.error_bound + hi.error_bound
    assert hi.error_bound <= lo.error_bound / 2
    assert lo.triple == hi.triple


def test_fast_path_agrees_with_certified():
    fast = {r.delta: r for r in scan_small(2500, keep_all=True)}
    for delta in (-1467, -479, -1151, -2003, -2500 + 1, -2496):
        if class_number(delta) <= 3:
            continue
        slow = witness_margin(delta)
        f = fast[delta]
        assert abs(f.margin - slow.margin) <= f.error_bound + slow.error_bound
        assert f.error_bound < 1e-6


def test_log_abs_j_against_mpfr():
    for delta in (-23, -1467, -99995):
        forms = enumerate_forms(delta)
        vals, errs = log_abs_j(*zip(*[(-delta, f.a, f.b) for f in forms]))
        for f, v, e in zip(forms, vals, errs):
            x = singular_moduli(delta, 2048 if -delta > 10**4 else 256)
            ref = next(m for m in x if m.form == f)
            with gmpy2.context(precision=200):
                exact = float(gmpy2.log(abs(ref.value)))
            assert abs(v - exact) <= e


def test_scan_small_2000():
    fails = scan_small(2000)
    assert [r.delta for r in fails] == [-1467]
    assert scan_small(2000, margin_threshold=0.001) == []


def test_scan_small_thread_independence():
    one = scan_small(3000, keep_all=True)
    two = scan_small(3000, keep_all=True, threads=2, block=700)
    assert one == two
    assert all(r.h > 3 for r in one)
    assert [r.delta for r in one] == sorted((r.delta for r in one), reverse=True)


def test_scan_small_tiny_limit():
    assert scan_small(2) == []
    assert scan_small(38, keep_all=True) == []  # h <= 3 throughout
    assert [r.delta for r in scan_small(39, keep_all=True)] == [-39]


def test_signature_validation():
    with pytest.raises(ValueError):
        TrinomialSignature(3, 3)
    with pytest.raises(ValueError):
        TrinomialSignature(3, 0)
    with pytest.raises(TypeError):
        TrinomialSignature(3.0, 1)


def test_principal_half():
    got = principal_rhs(-10**6, SIG1, 0.0, "half")
    with gmpy2.context(precision=128):
        want = gmpy2.exp(-gmpy2.const_pi() * 500 + mpfr("0.7"))
    assert abs(got / want - 1) < 1e-30


def test_principal_mn_equals_full_at_unit_gap():
    for delta in (-1000, -10**6 + 1, -10**9):
        for lx in (0.0, 10.0, 1000.0):
            assert principal_rhs(delta, SIG1, lx, "mn") == principal_rhs(delta, SIG1, lx, "full")


def test_principal_single_vs_half():
    D = 10**6
    lx = math.pi * math.sqrt(D) / 2
    single = principal_rhs(-D, SIG1, lx, "single")
    half = principal_rhs(-D, SIG1, lx, "half")
    assert abs(single / half - 1) < 1e-12
    smaller = principal_rhs(-D, SIG1, lx - 1, "single")
    assert abs(half / smaller - math.e) < 1e-9


def test_principal_full_scales_with_gap():
    sig3 = TrinomialSignature(7, 4)
    a = principal_rhs(-4000, SIG1, 50.0)
    b = principal_rhs(-4000, sig3, 50.0)
    with gmpy2.context(precision=128):
        assert abs(gmpy2.log(b / 2) - 3 * gmpy2.log(a / 2)) < mpfr("1e-25")


def test_principal_rejects_small_delta():
    with pytest.raises(ValueError):
        principal_rhs(-999, SIG1, 0.0)
    with pytest.raises(ValueError):
        principal_rhs(-1000, SIG1, 0.0, "other")


def test_refined_fourth_display():
    D = 10**11
    got = refined_principal_rhs(-D, SIG1, variant=4)
    with gmpy2.context(precision=128):
        want = gmpy2.exp(-gmpy2.const_pi() * gmpy2.sqrt(mpfr(D)) + 2 * gmpy2.log(mpfr(D)))
    assert abs(got / want - 1) < 1e-25


def test_refined_second_and_third_coincide_at_unit_gap():
    for rho in (1.5, 1912.1, 1e30):
        assert refined_principal_rhs(-10**7 + 1, SIG1, rho, 2) == refined_principal_rhs(-10**7 + 1, SIG1, rho, 3)


def test_refined_first_is_second_over_rho():
    sig = TrinomialSignature(9, 1)
    rho = 777.0
    first = refined_principal_rhs(-10**5 + 1, sig, variant=1)
    second = refined_principal_rhs(-10**5 + 1, sig, rho, 2)
    assert abs(second / first / rho - 1) < 1e-30


def test_refined_needs_rho():
    with pytest.raises(ValueError):
        refined_principal_rhs(-10**5 + 1, SIG1, variant=2)
    with pytest.raises(ValueError):
        refined_principal_rhs(-10**5 + 1, SIG1, variant=5)
