"""Exact integer arithmetic shared by the rest of the package.

Everything here is a pure function of its arguments. The randomized
factorization fallback draws from a fixed seed sequence, so results are
reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd, isqrt
from typing import Iterator

import numpy as np

__all__ = [
    "IncompatibleCongruences",
    "Factorization",
    "PrimeList",
    "crt_combine",
    "factor",
    "is_prime",
    "iter_primes",
    "kronecker",
    "legendre_table",
    "next_prime",
    "primes_up_to",
    "valuation",
]


class IncompatibleCongruences(ValueError):
    """Raised when two congruences have no common solution."""


_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
# Bases 2..41 are a deterministic Miller-Rabin witness set below this bound.
_MR_DETERMINISTIC_BOUND = 3317044064679887385961981


def kronecker(delta: int, n: int) -> int:
    """Kronecker symbol (delta/n) for n >= 0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1 if delta in (1, -1) else 0
    result = 1
    if n % 2 == 0:
        if delta % 2 == 0:
            return 0
        # (delta/2) = +1 for delta = +-1 mod 8, -1 for delta = +-3 mod 8
        two = 1 if delta % 8 in (1, 7) else -1
        while n % 2 == 0:
            n //= 2
            result *= two
    # n is odd now; the Jacobi symbol only sees delta mod n
    a = delta % n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def legendre_table(p: int) -> np.ndarray:
    """Boolean array ``t`` with ``t[r]`` true iff r is a nonzero square mod p."""
    t = np.zeros(p, dtype=bool)
    r = np.arange(1, p, dtype=np.int64)
    t[(r * r) % p] = True
    t[0] = False
    return t


def valuation(n: int, p: int) -> int:
    """Largest e with p**e dividing n."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    if p < 2:
        raise ValueError(f"p must be a prime, got {p}")
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def crt_combine(r1: int, m1: int, r2: int, m2: int) -> tuple[int, int]:
    """Combine x = r1 mod m1 and x = r2 mod m2 into (r, lcm(m1, m2))."""
    if m1 <= 0 or m2 <= 0:
        raise ValueError("moduli must be positive")
    g = gcd(m1, m2)
    if (r2 - r1) % g:
        raise IncompatibleCongruences(
            f"{r1} mod {m1} and {r2} mod {m2} have no common solution")
    lcm = m1 // g * m2
    # x = r1 + m1 * t with m1 * t = r2 - r1 mod m2
    t = (r2 - r1) // g * pow(m1 // g, -1, m2 // g) % (m2 // g)
    return (r1 + m1 * t) % lcm, lcm


# --- primality ------------------------------------------------------------

def _miller_rabin(n: int, base: int) -> bool:
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    x = pow(base, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def _strong_lucas(n: int) -> bool:
    """Strong Lucas probable-prime test with Selfridge parameters."""
    r = isqrt(n)
    if r * r == n:
        return False
    D = 5
    while True:
        k = kronecker(D, n)
        if k == -1:
            break
        if k == 0 and abs(D) != n:
            return False
        D = -D - 2 if D > 0 else -D + 2
    P, Q = 1, (1 - D) // 4
    d, s = n + 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1

    def half(x: int) -> int:
        if x % 2:
            x += n
        return (x // 2) % n

    U, V, Qk = 1, P, Q % n
    for bit in bin(d)[3:]:
        U = U * V % n
        V = (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if bit == "1":
            U, V = half(P * U + V), half(D * U + P * V)
            Qk = Qk * Q % n
    if U == 0 or V == 0:
        return True
    for _ in range(s - 1):
        V = (V * V - 2 * Qk) % n
        if V == 0:
            return True
        Qk = Qk * Qk % n
    return False


def is_prime(n: int) -> bool:
    """Deterministic below ~3.3e24 (Miller-Rabin), BPSW above."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    if n < 43 * 43:
        return True
    if n < _MR_DETERMINISTIC_BOUND:
        return all(_miller_rabin(n, b) for b in _SMALL_PRIMES)
    return _miller_rabin(n, 2) and _strong_lucas(n)


# --- prime generation -----------------------------------------------------

@dataclass(frozen=True)
class PrimeList:
    bound: int
    primes: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.primes)

    def __iter__(self) -> Iterator[int]:
        return iter(self.primes)


def _sieve(bound: int) -> np.ndarray:
    if bound < 2:
        return np.zeros(0, dtype=np.int64)
    flags = np.ones(bound + 1, dtype=bool)
    flags[:2] = False
    flags[4::2] = False
    for p in range(3, isqrt(bound) + 1, 2):
        if flags[p]:
            flags[p * p::2 * p] = False
    return np.flatnonzero(flags)


_prime_cache: np.ndarray = _sieve(1 << 16)


def _primes_array(bound: int) -> np.ndarray:
    global _prime_cache
    cache = _prime_cache
    if bound > cache[-1]:
        cache = _sieve(max(bound, 2 * int(cache[-1])))
        if cache[-1] <= 10**8:
            _prime_cache = cache
    return cache[:np.searchsorted(cache, bound, side="right")]


def primes_up_to(bound: int) -> PrimeList:
    """All primes <= bound, ascending."""
    return PrimeList(bound, tuple(_primes_array(bound).tolist()))


def next_prime(n: int) -> int:
    """Smallest prime strictly greater than n."""
    m = max(n + 1, 2)
    while not is_prime(m):
        m += 1
    return m


def iter_primes(start: int = 2) -> Iterator[int]:
    """Primes >= start, ascending, without end."""
    p = start - 1
    while True:
        p = next_prime(p)
        yield p


# --- factorization --------------------------------------------------------

@dataclass
class Factorization:
    """n == prod(p**e for p, e in factors) * cofactor.

    ``cofactor`` is 1 unless the fallback failed to split a composite, in
    which case ``cofactor_status`` is ``"composite"``. Primes above the
    trial bound that are only BPSW-probable are listed in ``probable``.
    """

    n: int
    factors: list[tuple[int, int]]
    cofactor: int = 1
    cofactor_status: str = "unit"
    probable: list[int] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.cofactor == 1

    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]

    def value(self) -> int:
        v = self.cofactor
        for p, e in self.factors:
            v *= p**e
        return v


def pollard_brent(n: int, seed: int = 1, max_iterations: int = 1 << 20) -> int | None:
    """Find a nontrivial factor of composite n, or None within the budget."""
    if n % 2 == 0:
        return 2
    c = seed % (n - 1) + 1
    y = (seed * 7 + 2) % n
    m = 128
    g = r = q = 1
    x = ys = y
    steps = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = gcd(q, n)
            k += m
        r *= 2
        steps += r
        if steps > max_iterations:
            return None
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = gcd(abs(x - ys), n)
            if g > 1:
                break
    return g if g != n else None


def factor(n: int, trial_bound: int = 10**6, rho_attempts: int = 8,
           rho_iterations: int = 1 << 20) -> Factorization:
    """Trial division up to ``trial_bound``, then Pollard-Brent on the rest."""
    if n < 1:
        raise ValueError("factor expects a positive integer")
    found: dict[int, int] = {}
    m = n
    for p in _primes_array(min(trial_bound, isqrt(n))).tolist():
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            found[p] = e
    probable: list[int] = []
    leftover = 1
    stack = [m] if m > 1 else []
    while stack:
        x = stack.pop()
        if is_prime(x):
            found[x] = found.get(x, 0) + 1
            if x >= _MR_DETERMINISTIC_BOUND:
                probable.append(x)
            continue
        r = isqrt(x)
        if r * r == x:
            stack += [r, r]
            continue
        d = None
        for seed in range(1, rho_attempts + 1):
            d = pollard_brent(x, seed, rho_iterations)
            if d is not None:
                break
        if d is None:
            leftover *= x
        else:
            stack += [d, x // d]
    status = "unit" if leftover == 1 else "composite"
    return Factorization(n, sorted(found.items()), leftover, status, sorted(probable))
