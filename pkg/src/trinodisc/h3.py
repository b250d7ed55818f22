"""p-adic elimination of the discriminants of class number 3.

For each such delta, F(t) = d^-3 H(dt) = t^3 + a t^2 + b t + c is the
scaled Hilbert class polynomial. A prime p with p | c, p not dividing b
and (delta/p) = -1 forces m - n >= r0 p^(3n - nu0) for any trinomial
signature (m, n), while a Liouville estimate gives m - n below a linear
function of n. Together they read p^(3n) < lambda n + mu, which fails for
every n >= 1.

r0 and nu0 come from the discriminants D_k of F_k, the monic cubic whose
roots are the k-th powers of the roots of F.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .ntheory import factor, kronecker, valuation
from .quadforms import as_discriminant, forms_in_range
from .singular_moduli import IntPolynomial, hilbert_class_poly, singular_moduli

__all__ = [
    "TABLE1",
    "H3Error",
    "H3Row",
    "LiouvilleBound",
    "PadicCertificate",
    "PrimeChoice",
    "ScaledCubic",
    "TableRow",
    "compare_with_table",
    "cubic_discriminant",
    "display_bound",
    "extract_scaled_cubic",
    "find_r0_nu0",
    "fk_sequence",
    "fk_step",
    "liouville_bounds",
    "list_h3_discriminants",
    "run_h3_pipeline",
    "select_prime",
    "verify_impossible",
]


class H3Error(ArithmeticError):
    """A stage of the class-number-3 pipeline could not be completed."""


class TableRow(NamedTuple):
    p: int
    r0: int
    nu0: int
    lam: float
    mu: float


# Reference values: (p, r0, nu0, lambda, mu) per discriminant.
TABLE1: dict[int, TableRow] = {
    -23: TableRow(17, 1, 1, 35, 6.4),
    -31: TableRow(23, 1, 1, 57, 7.5),
    -44: TableRow(29, 1, 1, 56, 5.8),
    -59: TableRow(11, 1, 2, 157, 21),
    -76: TableRow(53, 18, 1, 4.6, 0.4),
    -83: TableRow(2, 1, 2, 4.3, 0.6),
    -92: TableRow(53, 1, 1, 101, 7.5),
    -107: TableRow(17, 1, 1, 21, 2.3),
    -108: TableRow(17, 1, 1, 25, 2),
    -124: TableRow(89, 1, 1, 149, 8.8),
    -139: TableRow(23, 1, 1, 28, 2.3),
    -172: TableRow(113, 38, 1, 4.4, 0.3),
    -211: TableRow(29, 1, 1, 39, 2.3),
    -243: TableRow(23, 1, 1, 28, 1.6),
    -268: TableRow(197, 11, 1, 29, 1.3),
    -283: TableRow(53, 18, 1, 3.4, 0.2),
    -307: TableRow(47, 1, 1, 55, 2.9),
    -331: TableRow(59, 1, 2, 4963, 215),
    -379: TableRow(71, 1, 1, 104, 4.1),
    -499: TableRow(83, 28, 1, 4.5, 0.2),
    -547: TableRow(101, 1, 1, 126, 4.3),
    -643: TableRow(113, 19, 1, 6.9, 0.3),
    -652: TableRow(389, 2, 1, 337, 9.2),
    -883: TableRow(113, 38, 1, 3.9, 0.1),
    -907: TableRow(167, 56, 1, 3.8, 0.1),
}


def list_h3_discriminants(limit: int = 1000) -> list[int]:
    """Discriminants with class number 3 and |delta| <= limit, by ascending |delta|."""
    D, counts = np.unique(forms_in_range(3, limit)[:, 0], return_counts=True)
    return [-int(d) for d, h in zip(D, counts) if h == 3]


# --- scaled cubic -----------------------------------------------------------

@dataclass(frozen=True)
class ScaledCubic:
    delta: int
    d: int
    H: IntPolynomial
    F: IntPolynomial

    @property
    def abc(self) -> tuple[int, int, int]:
        c, b, a, _ = self.F.coefficients
        return a, b, c


def _scale_exponent(c2: int, c1: int, c0: int, q: int) -> int:
    caps = []
    for coeff, w in ((c2, 1), (c1, 2), (c0, 3)):
        if coeff:
            caps.append(valuation(coeff, q) // w)
    return min(caps)


def extract_scaled_cubic(delta: int, precision_bits: int | None = None) -> ScaledCubic:
    """F = d^-3 H(dt) with d maximal such that F stays integral."""
    delta = as_discriminant(delta)
    H = hilbert_class_poly(delta, precision_bits)
    if H.degree != 3:
        raise ValueError(f"h({delta}) = {H.degree}, expected 3")
    c0, c1, c2, _ = H.coefficients
    if c0 == 0:
        raise H3Error(f"H has a zero root for {delta}")
    g = math.gcd(math.gcd(c2, c1), c0)
    d = 1
    if g > 1:
        fac = factor(g)
        if not fac.complete:
            raise H3Error(f"could not factor gcd {g} of the coefficients")
        for q in fac.primes():
            d *= q ** _scale_exponent(c2, c1, c0, q)
    F = IntPolynomial((c0 // d**3, c1 // d**2, c2 // d, 1))
    assert F(1) * d**3 == H(d)
    return ScaledCubic(delta, d, H, F)


@dataclass(frozen=True)
class PrimeChoice:
    p: int
    nu_p_c: int
    kronecker: int
    factorization_complete: bool


def select_prime(sc: ScaledCubic, trial_bound: int = 10**6) -> PrimeChoice:
    """Largest prime p with p | c and p not dividing b.

    If part of c stays unfactored the choice is among the primes found, and
    ``factorization_complete`` is False.
    """
    a, b, c = sc.abc
    fac = factor(abs(c), trial_bound=trial_bound)
    candidates = [p for p in fac.primes() if b % p]
    if not candidates:
        raise H3Error(f"no prime p | c with p not dividing b for {sc.delta}")
    p = max(candidates)
    return PrimeChoice(p, valuation(c, p), kronecker(sc.delta, p), fac.complete)


# --- F_k and D_k ----------------------------------------------------------

Triple = tuple[int, int, int]


def fk_step(F: Triple, history: Sequence[Triple], modulus: int | None = None) -> Triple:
    """(a, b, c) of F_{k+3} from those of F_k, F_{k+1}, F_{k+2}."""
    a, b, c = F
    (a0, b0, c0), (a1, b1, _), (a2, b2, _) = history[-3:]
    na = -a * a2 - b * a1 - c * a0
    nb = b * b2 - a * c * b1 + c * c * b0
    nc = -(c**3) * c0
    if modulus is not None:
        na, nb, nc = na % modulus, nb % modulus, nc % modulus
    return na, nb, nc


def _seeds(F: Triple, modulus: int | None = None) -> list[Triple]:
    a, b, c = F
    seeds = [(-3, 3, -1), (a, b, c), (-a * a + 2 * b, b * b - 2 * a * c, -c * c)]
    if modulus is not None:
        seeds = [tuple(v % modulus for v in s) for s in seeds]
    return seeds


def fk_sequence(F: Triple, count: int, modulus: int | None = None) -> list[Triple]:
    """F_0, ..., F_{count-1} as (a_k, b_k, c_k)."""
    out = _seeds(F, modulus)
    while len(out) < count:
        out.append(fk_step(F, out, modulus))
    return out[:count]


def cubic_discriminant(a: int, b: int, c: int) -> int:
    """Discriminant of t^3 + a t^2 + b t + c."""
    return 18 * a * b * c - 4 * a**3 * c + a * a * b * b - 4 * b**3 - 27 * c * c


@dataclass(frozen=True)
class PadicCertificate:
    p: int
    r0: int
    nu0: int
    nu_p_c: int


def find_r0_nu0(sc: ScaledCubic, p: int, max_k: int = 10**4) -> tuple[int, int]:
    """Smallest k >= 1 with p | D_k, and the valuation offset nu0."""
    F = sc.abc
    window = _seeds(F, p)
    r0 = None
    for k in range(1, max_k + 1):
        if k >= 3:
            window = window[1:] + [fk_step(F, window, p)]
        cur = window[min(k, 2)]
        if cubic_discriminant(*cur) % p == 0:
            r0 = k
            break
    if r0 is None:
        raise H3Error(f"no k <= {max_k} with {p} | D_k for {sc.delta}")
    target = r0 if p > 2 else 2 * r0
    exact = fk_sequence(F, target + 1)[target]
    Dk = cubic_discriminant(*exact)
    if Dk == 0:
        raise H3Error(f"D_{target} vanishes for {sc.delta}")
    v = valuation(Dk, p)
    if v % 2:
        raise H3Error(f"odd valuation {v} of D_{target} at {p}")
    nu0 = v // 2 if p > 2 else v // 2 - 1
    return r0, nu0


# --- Liouville bounds and the final check ---------------------------------

@dataclass(frozen=True)
class LiouvilleBound:
    lam: mpfr
    mu: mpfr
    ratio: mpfr  # upper bound on |x1/x0|


def liouville_bounds(sc: ScaledCubic, cert: PadicCertificate,
                     precision_bits: int = 256) -> LiouvilleBound:
    """Certified upper bounds on lambda and mu.

    x0 is the real root of F and x1 a complex one; both are the singular
    moduli divided by d, with enclosures from the certified evaluation.
    """
    moduli = singular_moduli(sc.delta, precision_bits)
    x0_lo, x0_hi = moduli[0].abs_bounds()
    x1_lo, x1_hi = moduli[1].abs_bounds()
    if x1_lo <= 0:
        raise H3Error(f"|x1| not separated from zero for {sc.delta}")
    scale = Fraction(cert.p**cert.nu0, cert.r0)
    up = gmpy2.context(precision=precision_bits, round=gmpy2.RoundUp)
    down = gmpy2.context(precision=precision_bits, round=gmpy2.RoundDown)
    with up:
        ratio = x1_hi / x0_lo
    if not ratio < mpfr("0.001"):
        raise H3Error(f"|x1/x0| < 0.001 fails for {sc.delta}")
    with down:
        gap = gmpy2.log(x0_lo) - gmpy2.log(x1_hi)  # lower bound on log|x0/x1|
        log_d = gmpy2.log(mpfr(sc.d)) if sc.d > 1 else mpfr(0)
    with up:
        log_x0 = gmpy2.log(x0_hi) - log_d
        if log_x0 <= 0:
            raise H3Error(f"|x0| <= 1 for {sc.delta}")
        s = mpfr(scale.numerator) / scale.denominator
        lam = mpfr(3) / 2 * log_x0 / gap * s
        mu = (3 * gmpy2.log(mpfr(2)) + gmpy2.log(mpfr("2.01"))) / gap * s
    return LiouvilleBound(lam, mu, ratio)


def _exact(x) -> Fraction:
    if isinstance(x, mpfr):
        return Fraction(*x.as_integer_ratio())
    return Fraction(x)


def verify_impossible(p: int, lam, mu) -> bool:
    """True iff p^(3n) < lam*n + mu has no solution in integers n >= 1."""
    lam, mu = _exact(lam), _exact(mu)
    if lam <= 0 or mu < 0:
        raise ValueError("lambda must be positive and mu non-negative")
    n = 1
    while True:
        pn = p ** (3 * n)
        if pn < lam * n + mu:
            return False
        # p^(3n) - lam*n is convex in n; once a step gains at least lam the
        # left side stays ahead for every later n
        if pn * (p**3 - 1) >= lam:
            return True
        n += 1


def display_bound(x) -> str:
    """Outward-rounded display: integer when >= 10, one decimal below."""
    x = _exact(x)
    if x >= 10:
        return str(math.ceil(x))
    return _one_decimal(x)


def _one_decimal(x: Fraction) -> str:
    tenths = math.ceil(x * 10)
    return f"{tenths // 10}.{tenths % 10}"


@dataclass
class H3Row:
    delta: int
    d: int | None = None
    p: int | None = None
    r0: int | None = None
    nu0: int | None = None
    nu_p_c: int | None = None
    kronecker: int | None = None
    lam: float | None = None
    mu: float | None = None
    impossible: bool | None = None
    factorization_complete: bool | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _row(delta: int, precision_bits: int, trial_bound: int) -> H3Row:
    row = H3Row(delta)
    try:
        sc = extract_scaled_cubic(delta)
        row.d = sc.d
        choice = select_prime(sc, trial_bound)
        row.p, row.nu_p_c, row.kronecker = choice.p, choice.nu_p_c, choice.kronecker
        row.factorization_complete = choice.factorization_complete
        r0, nu0 = find_r0_nu0(sc, choice.p)
        row.r0, row.nu0 = r0, nu0
        cert = PadicCertificate(choice.p, r0, nu0, choice.nu_p_c)
        lb = liouville_bounds(sc, cert, precision_bits)
        with gmpy2.context(precision=53, round=gmpy2.RoundUp):
            # rounding to 53 bits upward first makes the float conversion exact
            row.lam, row.mu = float(mpfr(lb.lam)), float(mpfr(lb.mu))
        row.impossible = verify_impossible(choice.p, lb.lam, lb.mu)
    except (H3Error, ValueError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_h3_pipeline(deltas: Iterable[int] | None = None, precision_bits: int = 256,
                    trial_bound: int = 10**6, threads: int = 1) -> list[H3Row]:
    """One row per discriminant; failures are recorded in ``row.error``."""
    if deltas is None:
        deltas = list_h3_discriminants()
    deltas = list(deltas)
    args = [(d, precision_bits, trial_bound) for d in deltas]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_row_star, args))
    return [_row(*a) for a in args]


def _row_star(args) -> H3Row:
    return _row(*args)


def compare_with_table(row: H3Row, slack: float = 0.05) -> list[str]:
    """Differences between a computed row and the reference table; empty if none."""
    if row.error:
        return [row.error]
    ref = TABLE1.get(row.delta)
    if ref is None:
        return [f"{row.delta} is not in the reference table"]
    out = []
    for name in ("p", "r0", "nu0"):
        got, want = getattr(row, name), getattr(ref, name)
        if got != want:
            out.append(f"{name}: computed {got}, table {want}")
    for name, want in (("lam", ref.lam), ("mu", ref.mu)):
        got = getattr(row, name)
        if got > want + slack:
            out.append(f"{name}: computed bound {got:.4g} exceeds table {want}")
    if row.nu_p_c != 3:
        out.append(f"nu_p(c) = {row.nu_p_c}, expected 3")
    if row.kronecker != -1:
        out.append(f"(delta/p) = {row.kronecker}, expected -1")
    if not row.impossible:
        out.append("p^(3n) < lambda n + mu is solvable")
    return out
