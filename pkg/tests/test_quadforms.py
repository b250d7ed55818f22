from collections import Counter
from math import gcd, isqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trinodisc.ntheory import is_prime
from trinodisc.quadforms import (
    InvalidDiscriminant,
    ReducedForm,
    as_discriminant,
    certify_by_enumeration,
    class_number,
    enumerate_forms,
    forms_in_range,
    is_reduced,
    iter_discriminant_forms,
    recipe_suitable,
    sqrt_square_mod_4m,
    suitable_integers,
)

discriminants = st.integers(3, 10**5).filter(lambda D: D % 4 in (0, 3)).map(lambda D: -D)


def naive_reduced(a, b, c):
    if a <= 0 or gcd(gcd(a, b), c) != 1:
        return False
    if -a < b <= a < c:
        return True
    return 0 <= b <= a == c


@pytest.mark.parametrize("delta,forms", [
    (-3, [(1, 1, 1)]),
    (-4, [(1, 0, 1)]),
    (-23, [(1, 1, 6), (2, -1, 3), (2, 1, 3)]),
])
def test_enumerate_examples(delta, forms):
    assert enumerate_forms(delta) == [ReducedForm(*f) for f in forms]


@pytest.mark.parametrize("delta,h", [(-4, 1), (-23, 3), (-47, 5), (-163, 1), (-1467, 4)])
def test_class_number_examples(delta, h):
    assert class_number(delta) == h


@pytest.mark.parametrize("delta,a", [(-23, [1, 2]), (-4, [1]), (-15, [1, 2])])
def test_suitable_examples(delta, a):
    assert suitable_integers(delta) == a


@pytest.mark.parametrize("bad", [-5, -1, -2, 0, 4, 5, 7, 2.0])
def test_invalid_discriminants(bad):
    with pytest.raises(InvalidDiscriminant):
        as_discriminant(bad)


@pytest.mark.parametrize("x,m,y", [(5, 7, 5), (9, 7, 5), (-3, 3, 3)])
def test_sqrt_square_mod_4m(x, m, y):
    assert sqrt_square_mod_4m(x, m) == y


@given(st.integers(-10**6, 10**6), st.integers(1, 10**4))
def test_sqrt_square_mod_4m_property(x, m):
    y = sqrt_square_mod_4m(x, m)
    assert 0 <= y <= m
    assert (y * y - x * x) % (4 * m) == 0


def test_class_numbers_match_naive_count():
    limit = 10**4
    counts = Counter()
    for a in range(1, isqrt(limit // 3) + 1):
        for b in range(-a, a + 1):
            c = a
            while 4 * a * c - b * b <= limit:
                if 4 * a * c - b * b > 0 and naive_reduced(a, b, c):
                    counts[4 * a * c - b * b] += 1
                c += 1
    for D in range(3, limit + 1):
        if D % 4 in (0, 3):
            assert class_number(-D) == counts[D], D


def test_forms_in_range_matches_enumeration():
    arr = forms_in_range(900, 1300)
    for D in range(900, 1301):
        if D % 4 in (0, 3):
            rows = [ReducedForm(*map(int, r[1:])) for r in arr[arr[:, 0] == D]]
            assert rows == enumerate_forms(-D)


def test_iter_discriminant_forms_blocks():
    seen = [(d, f.tolist()) for d, f in iter_discriminant_forms(500, block=37)]
    assert [d for d, _ in seen] == [-D for D in range(3, 501) if D % 4 in (0, 3)]
    for d, f in seen:
        assert [tuple(r) for r in f] == [tuple(x) for x in enumerate_forms(d)]


@pytest.fixture(scope="module")
def all_forms():
    return forms_in_range(3, 10**5)


def test_suitable_bound_3a2(all_forms):
    D, a = all_forms[:, 0], all_forms[:, 1]
    assert np.all(3 * a * a <= D)
    eq = 3 * a * a == D
    assert all_forms[eq, :2].tolist() == [[3, 1]]


def test_multiplicity_of_a(all_forms):
    # at most 2 forms share a prime first entry; a = 1 occurs exactly once
    key = all_forms[:, 0] * 1000 + all_forms[:, 1]
    u, counts = np.unique(key, return_counts=True)
    a = u % 1000
    primes = np.array([is_prime(int(x)) for x in range(1000)])
    assert counts[primes[a]].max() <= 2
    assert np.all(counts[a == 1] == 1)
    assert len(u[a == 1]) == len(np.unique(all_forms[:, 0]))


def test_composite_a_may_repeat():
    forms = [f for f in enumerate_forms(-143) if f.a == 6]
    assert forms == [(6, -5, 7), (6, 1, 6), (6, 5, 7)]


def test_divisor_closure(all_forms):
    D, a = all_forms[:, 0], all_forms[:, 1]
    table = np.zeros((int(D.max()) + 1, int(a.max()) + 1), dtype=bool)
    table[D, a] = True
    for value in range(4, int(a.max()) + 1):
        group = D[a == value]
        for d in range(2, value):
            if value % d == 0:
                keep = group[np.gcd(group, d) == 1]
                assert table[keep, d].all(), (value, d)


def test_recipe_examples():
    certs = recipe_suitable(-15)
    assert any(c.a == 2 and c.recipe == "coprime-split" and c.form == (2, 1, 2) for c in certs)
    certs = recipe_suitable(-23)
    assert any(c.a == 2 and c.recipe == "split-prime" for c in certs)
    assert {c.a for c in recipe_suitable(-4)} <= {1}


def test_recipe_soundness_small_range():
    for D in range(3, 3001):
        if D % 4 not in (0, 3):
            continue
        forms = set(enumerate_forms(-D))
        for cert in recipe_suitable(-D):
            assert cert.form in forms and cert.form.a == cert.a


@given(discriminants)
def test_recipe_soundness_random(delta):
    suitable = set(suitable_integers(delta))
    for cert in recipe_suitable(delta):
        assert cert.a in suitable
        assert is_reduced(*cert.form, delta)


@given(discriminants)
def test_enumeration_certificates(delta):
    certs = certify_by_enumeration(delta)
    assert [c.a for c in certs] == suitable_integers(delta)
    assert all(c.form.discriminant == delta for c in certs)


@given(discriminants)
def test_conjugate_forms_closed(delta):
    forms = set(enumerate_forms(delta))
    assert {f.conjugate() for f in forms} == forms
