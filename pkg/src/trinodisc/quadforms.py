"""Reduced binary quadratic forms and suitable integers.

A form (a, b, c) of discriminant b^2 - 4ac < 0 is *reduced* here when
gcd(a, b, c) = 1 and either -a < b <= a < c or 0 <= b <= a = c. These
triples are in bijection with the singular moduli of that discriminant.
An integer a is *suitable* for a discriminant when it is the first entry
of some reduced form.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt
from typing import Iterator, NamedTuple

import numpy as np

from .ntheory import factor, kronecker, primes_up_to, valuation

__all__ = [
    "InvalidDiscriminant",
    "RecipeError",
    "ReducedForm",
    "SuitabilityCertificate",
    "RECIPES",
    "as_discriminant",
    "class_number",
    "enumerate_forms",
    "forms_in_range",
    "is_reduced",
    "iter_discriminant_forms",
    "recipe_suitable",
    "certify_by_enumeration",
    "sqrt_square_mod_4m",
    "suitable_integers",
]


class InvalidDiscriminant(ValueError):
    pass


class RecipeError(AssertionError):
    """A recipe produced a triple outside the reduced set (should not happen)."""


def as_discriminant(value: int) -> int:
    """Validate an imaginary quadratic discriminant and return it as int."""
    try:
        delta = int(value)
    except (TypeError, ValueError):
        raise InvalidDiscriminant(f"not an integer: {value!r}") from None
    if delta != value:
        raise InvalidDiscriminant(f"not an integer: {value!r}")
    if delta >= 0:
        raise InvalidDiscriminant(f"discriminant must be negative, got {delta}")
    if delta % 4 not in (0, 1):
        raise InvalidDiscriminant(f"{delta} is not 0 or 1 mod 4")
    return delta


class ReducedForm(NamedTuple):
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def conjugate(self) -> "ReducedForm":
        """The form (a, -b, c) whose singular modulus is the complex conjugate."""
        a, b, c = self
        if b == 0 or b == a or a == c:
            return self
        return ReducedForm(a, -b, c)


def is_reduced(a: int, b: int, c: int, delta: int | None = None) -> bool:
    if delta is not None and b * b - 4 * a * c != delta:
        return False
    if b * b - 4 * a * c >= 0 or a <= 0:
        return False
    if gcd(gcd(a, b), c) != 1:
        return False
    return (-a < b <= a < c) or (0 <= b <= a == c)


def enumerate_forms(delta: int) -> list[ReducedForm]:
    """All reduced forms of discriminant ``delta``, sorted by (a, b)."""
    delta = as_discriminant(delta)
    D = -delta
    out = []
    for a in range(1, isqrt(D // 3) + 1):
        m = 4 * a
        # b has the parity of delta and lies in (-a, a]
        start = -a + 1
        if (start - delta) % 2:
            start += 1
        for b in range(start, a + 1, 2):
            t = b * b - delta
            if t % m:
                continue
            c = t // m
            if c < a or (c == a and b < 0):
                continue
            if gcd(gcd(a, b), c) == 1:
                out.append(ReducedForm(a, b, c))
    return out


def class_number(delta: int) -> int:
    return len(enumerate_forms(delta))


def suitable_integers(delta: int) -> list[int]:
    return sorted({f.a for f in enumerate_forms(delta)})


# --- bulk enumeration over ranges of |delta| --------------------------------

def forms_in_range(lo: int, hi: int) -> np.ndarray:
    """Reduced forms with lo <= |delta| <= hi as an (n, 4) int64 array.

    Columns are (|delta|, a, b, c); rows sorted by (|delta|, a, b).
    """
    lo = max(lo, 3)
    chunks = []
    for a in range(1, isqrt(hi // 3) + 1):
        b = np.arange(-a + 1, a + 1, dtype=np.int64)
        # |delta| = 4ac - b^2 in [lo, hi] and c >= a
        c_lo = np.maximum(-((-(b * b + lo)) // (4 * a)), a)
        c_hi = (b * b + hi) // (4 * a)
        counts = np.maximum(c_hi - c_lo + 1, 0)
        total = int(counts.sum())
        if total == 0:
            continue
        starts = np.cumsum(counts) - counts
        bb = np.repeat(b, counts)
        cc = np.repeat(c_lo, counts) + (np.arange(total) - np.repeat(starts, counts))
        keep = (cc > a) | (bb >= 0)
        bb, cc = bb[keep], cc[keep]
        aa = np.full(bb.shape, a, dtype=np.int64)
        keep = np.gcd(np.gcd(aa, bb), cc) == 1
        aa, bb, cc = aa[keep], bb[keep], cc[keep]
        chunks.append(np.stack([4 * aa * cc - bb * bb, aa, bb, cc], axis=1))
    if not chunks:
        return np.zeros((0, 4), dtype=np.int64)
    arr = np.concatenate(chunks)
    order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0]))
    return arr[order]


def iter_discriminant_forms(limit: int, start: int = 3,
                            block: int = 20000) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (delta, forms) for start <= |delta| <= limit, ascending |delta|.

    ``forms`` is an (h, 3) array of (a, b, c) sorted by (a, b).
    """
    lo = max(start, 3)
    while lo <= limit:
        hi = min(limit, lo + block - 1)
        arr = forms_in_range(lo, hi)
        if len(arr):
            D = arr[:, 0]
            cuts = np.flatnonzero(np.diff(D)) + 1
            bounds = np.concatenate(([0], cuts, [len(D)]))
            for i in range(len(bounds) - 1):
                s, e = bounds[i], bounds[i + 1]
                yield -int(D[s]), arr[s:e, 1:]
        lo = hi + 1


# --- suitable-integer recipes ---------------------------------------------

RECIPES = ("enumeration", "square-mod-4a", "divisor", "split-prime",
           "even-2-or-4", "hensel-2k", "coprime-split", "prime-power")


@dataclass(frozen=True)
class SuitabilityCertificate:
    a: int
    form: ReducedForm
    recipe: str


def sqrt_square_mod_4m(x: int, m: int) -> int:
    """Some y with 0 <= y <= m and y^2 = x^2 mod 4m."""
    if m <= 0:
        raise ValueError("m must be positive")
    y = x % (2 * m)
    if y > m:
        y -= 2 * m
    return abs(y)


def _square_root_mod_4a(delta: int, a: int) -> int | None:
    """Some b in [0, a] with b^2 = delta mod 4a, if one exists."""
    m = 4 * a
    for b in range(delta % 2, a + 1, 2):
        if (b * b - delta) % m == 0:
            return b
    return None


def _prime_divisors(n: int) -> list[int]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _square_mod_4a_coprime(delta: int, a: int) -> bool:
    """Whether delta is a square mod 4a, given gcd(a, delta) = 1."""
    for q in _prime_divisors(a):
        if q == 2:
            if delta % 8 != 1:
                return False
        elif kronecker(delta, q) != 1:
            return False
    return True


def _emit(out: list, delta: int, triple: tuple[int, int, int], recipe: str) -> None:
    a, b, c = (int(v) for v in triple)
    if not is_reduced(a, b, c, delta):
        raise RecipeError(f"{recipe}: {(a, b, c)} is not a reduced form of {delta}")
    out.append(SuitabilityCertificate(a, ReducedForm(a, b, c), recipe))


def _item1_triple(delta: int, a: int) -> tuple[int, int, int] | None:
    b = _square_root_mod_4a(delta, a)
    if b is None:
        return None
    return a, b, (b * b - delta) // (4 * a)


def _recipe_square_mod_4a(delta: int, out: list) -> None:
    D = -delta
    for a in range(1, isqrt(D // 4) + 1):
        if gcd(a, delta) != 1 or not _square_mod_4a_coprime(delta, a):
            continue
        t = _item1_triple(delta, a)
        assert t is not None
        _emit(out, delta, t, "square-mod-4a")


def _recipe_split_prime(delta: int, out: list) -> None:
    for p in primes_up_to(isqrt(-delta // 4)):
        if kronecker(delta, p) == 1:
            t = _item1_triple(delta, p)
            assert t is not None
            _emit(out, delta, t, "split-prime")


def _recipe_divisor(delta: int, known: list[SuitabilityCertificate], out: list) -> None:
    seen = {cert.a for cert in known}
    for a in sorted(seen):
        for d in range(2, a):
            if a % d or d in seen or gcd(d, delta) != 1:
                continue
            t = _item1_triple(delta, d)
            assert t is not None
            _emit(out, delta, t, "divisor")
            seen.add(d)


def _recipe_even(delta: int, out: list) -> None:
    D = -delta
    if delta % 2 or delta % 32 == 4 or D <= 48:
        return
    if delta % 16 == 0:
        b = next(b for b in (0, 4) if valuation(delta - b * b, 2) == 4)
        _emit(out, delta, (4, b, (b * b - delta) // 16), "even-2-or-4")
    elif delta % 16 == 8:
        _emit(out, delta, (2, 0, -delta // 8), "even-2-or-4")
    elif delta % 16 == 12:
        _emit(out, delta, (2, 2, (4 - delta) // 8), "even-2-or-4")
    elif delta % 32 == 20:
        _emit(out, delta, (4, 2, (4 - delta) // 16), "even-2-or-4")


def _recipe_hensel(delta: int, out: list) -> None:
    if delta % 32 != 4:
        return
    D = -delta
    target = delta // 4  # = 1 mod 8
    x = 1  # square root of target mod 8, lifted one bit at a time
    k = 3
    while 2 ** (2 * k + 2) <= D:
        while (x * x - target) % (1 << k):
            x += 1 << (k - 2)
        m = 1 << k
        b = sqrt_square_mod_4m(2 * x, m)
        if valuation(b * b - delta, 2) != k + 2:
            b = m - b
        _emit(out, delta, (m, b, (b * b - delta) // (1 << (k + 2))), "hensel-2k")
        k += 1


def _recipe_coprime_split(delta: int, out: list) -> None:
    D = -delta
    nu = valuation(D, 2)
    odd = D >> nu
    blocks = [p**e for p, e in factor(odd).factors]
    for mask in range(1 << len(blocks)):
        a = 1
        for i, q in enumerate(blocks):
            if mask >> i & 1:
                a *= q
        a2 = odd // a
        if a > a2:
            continue
        if nu == 0:
            if a2 >= 3 * a:
                t = (a, a, (a + a2) // 4)
            else:
                t = ((a + a2) // 4, (a2 - a) // 2, (a + a2) // 4)
        else:
            t = (a, 0, 2 ** (nu - 2) * a2)
        _emit(out, delta, t, "coprime-split")


def _recipe_prime_power(delta: int, out: list) -> None:
    D = -delta
    dl = 2 if delta % 2 else 1
    for p, e in factor(D).factors:
        if p == 2:
            continue
        k = 1
        while 2 * k + 1 <= e:
            pk = p**k
            p2k = pk * pk
            m = D // p2k
            if 9 * m >= 4 * p2k:
                A0 = Fraction(p2k + 2 * dl * pk - 3 * dl * dl, 3)
                A1 = 3 * p2k - 2 * dl * pk - dl * dl
                A2 = 3 * p2k + 2 * dl * pk - dl * dl
                lo = (m + (pk - dl) ** 2) // 4
                if m >= A2:
                    t = (p2k, p2k - dl * pk, lo)
                elif m >= A1:
                    t = (lo, p2k - dl * pk, p2k)
                elif m >= A0:
                    t = (lo, abs(m - p2k + dl * dl) // 2, (m + (pk + dl) ** 2) // 4)
                else:
                    raise RecipeError(f"prime-power: m={m} below A0={A0} for {delta}")
                _emit(out, delta, t, "prime-power")
            k += 1


def recipe_suitable(delta: int) -> list[SuitabilityCertificate]:
    """Suitable integers certified by the explicit constructions.

    Each recipe checks its own hypothesis and attaches the triple its
    construction yields. Duplicated ``a`` values across recipes are kept.
    """
    delta = as_discriminant(delta)
    out: list[SuitabilityCertificate] = []
    _recipe_square_mod_4a(delta, out)
    _recipe_split_prime(delta, out)
    _recipe_even(delta, out)
    _recipe_hensel(delta, out)
    _recipe_coprime_split(delta, out)
    _recipe_prime_power(delta, out)
    _recipe_divisor(delta, list(out), out)
    return out


def certify_by_enumeration(delta: int) -> list[SuitabilityCertificate]:
    """One certificate per suitable integer, taken from the full enumeration."""
    best: dict[int, ReducedForm] = {}
    for f in enumerate_forms(delta):
        best.setdefault(f.a, f)
    return [SuitabilityCertificate(a, f, "enumeration") for a, f in sorted(best.items())]
