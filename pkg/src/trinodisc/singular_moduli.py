"""Certified evaluation of j, singular moduli and Hilbert class polynomials.

j is computed from the Eisenstein series,

    j = 1728 E4^3 / (E4^3 - E6^2),
    E4 = 1 + 240 sum sigma_3(n) q^n,   E6 = 1 - 504 sum sigma_5(n) q^n,

in MPFR/MPC arithmetic (gmpy2). For tau in the fundamental domain
|q| <= exp(-pi sqrt 3) < 0.0044, so the series converge quickly and the
truncation tail has a closed-form bound. Every value is returned together
with an absolute error bound that accounts for truncation, rounding and
the cancellation in E4^3 - E6^2 (which is of size |q|; the working
precision is raised by log2(1/|q|) bits to absorb it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .quadforms import ReducedForm, as_discriminant, enumerate_forms

__all__ = [
    "DomainError",
    "PrecisionError",
    "DeltaStats",
    "FundamentalPoint",
    "IntPolynomial",
    "RoundingCertificate",
    "SingularModulus",
    "auto_precision",
    "delta_stats",
    "eval_j",
    "eval_j_form",
    "format_mpfr",
    "hilbert_class_poly",
    "singular_moduli",
    "trinomial_bounds",
    "universal_bounds",
]

# Im(tau) >= sqrt(3)/2 - 1e-3 keeps |q| below this.
_Q_MAX = 0.0044
_MIN_IM = math.sqrt(3) / 2 - 1e-3
_ZETA = {3: 1.2021, 5: 1.0370}
_GUARD = 32


class DomainError(ValueError):
    """tau lies outside the (slightly relaxed) fundamental domain."""


class PrecisionError(ArithmeticError):
    """The requested accuracy could not be certified."""


def _ctx(precision: int) -> gmpy2.context:
    return gmpy2.context(precision=precision)


def _up() -> gmpy2.context:
    """Context for error-bound arithmetic (rounds toward +inf)."""
    return gmpy2.context(precision=64, round=gmpy2.RoundUp)


@lru_cache(maxsize=8)
def _sigma(k: int, n: int) -> tuple[int, ...]:
    """sigma_k(0..n), with sigma_k(0) = 0."""
    table = [0] * (n + 1)
    for d in range(1, n + 1):
        dk = d**k
        for m in range(d, n + 1, d):
            table[m] += dk
    return tuple(table)


def _sigma_upto(k: int, n: int) -> tuple[int, ...]:
    size = 64
    while size < n:
        size *= 2
    return _sigma(k, size)


def _terms_needed(log2_q: float, target_bits: float) -> int:
    """Smallest N whose sigma_5-weighted tail is below 2^-target_bits."""
    N = 1
    while True:
        tail = math.log2(1.5 * _ZETA[5]) + 5 * math.log2(N + 1) + (N + 1) * log2_q
        if tail <= -target_bits:
            return N
        N += 1


def _j_from_q(q: mpc, log2_q: float, rel_q: float, precision_bits: int,
              wp: int) -> tuple[mpc, mpfr]:
    """j from a nome q computed at precision ``wp`` with relative error rel_q."""
    N = _terms_needed(log2_q, wp + 12)
    s3t, s5t = _sigma_upto(3, N), _sigma_upto(5, N)
    with _ctx(wp):
        qn = mpc(1)
        S3 = mpc(0)
        S5 = mpc(0)
        for n in range(1, N + 1):
            qn = qn * q
            S3 += s3t[n] * qn
            S5 += s5t[n] * qn
        E4 = 1 + 240 * S3
        E6 = 1 - 504 * S5
        A = E4 * E4 * E4
        B = E6 * E6
        D = A - B
        j = 1728 * A / D
    with _up():
        u = gmpy2.exp2(mpfr(-wp))
        aq = mpfr(abs(q)) * (1 + mpfr(rel_q) + u)
        tail3 = mpfr(1.5 * _ZETA[3]) * mpfr(N + 1) ** 3 * aq ** (N + 1)
        tail5 = mpfr(1.5 * _ZETA[5]) * mpfr(N + 1) ** 5 * aq ** (N + 1)
        per = mpfr(rel_q) + (8 + N) * u
        eS3 = mpfr(1.5) * aq * per + tail3
        eS5 = mpfr(1.5) * aq * per + tail5
        e4 = 240 * (eS3 + 3 * u * aq) + 2 * u * (1 + 360 * aq)
        e6 = 504 * (eS5 + 3 * u * aq) + 2 * u * (1 + 756 * aq)
        aE4, aE6 = mpfr(abs(E4)), mpfr(abs(E6))
        M4, M6 = aE4 + e4, aE6 + e6
        eA = 3 * M4 * M4 * e4 + 6 * u * M4**3
        eB = 2 * M6 * e6 + 3 * u * M6 * M6
        aA, aB = mpfr(abs(A)), mpfr(abs(B))
        eD = eA + eB + 2 * u * (aA + aB)
        aD = mpfr(abs(D))
        Dlo = aD * (1 - gmpy2.exp2(mpfr(-60))) - eD
        if Dlo <= 0:
            raise PrecisionError("E4^3 - E6^2 not separated from 0; raise precision")
        err = 1728 * (eA * (aD + eD) + (aA + eA) * eD) / (aD * Dlo)
        err = (err + 6 * u * mpfr(abs(j))) * (1 + gmpy2.exp2(mpfr(-40)))
    return j, err


def _certified(eval_at, log2_q: float, precision_bits: int) -> tuple[mpc, mpfr]:
    wp = precision_bits + math.ceil(-log2_q) + 11 + _GUARD
    for _ in range(4):
        j, err = eval_at(wp)
        with _up():
            target = gmpy2.exp2(mpfr(-precision_bits / 2)) * max(mpfr(1), mpfr(abs(j)))
        if err <= target:
            return j, err
        wp += precision_bits + _GUARD
    raise PrecisionError(f"could not certify j to {precision_bits} bits")


def eval_j(tau, precision_bits: int = 128) -> tuple[mpc, mpfr]:
    """j(tau) with an absolute error bound; tau is taken as exact input.

    Accepts a Python complex, a gmpy2 ``mpc`` or a (real, imag) pair of
    strings/mpfr. Rejects points outside a relaxed fundamental-domain box.
    """
    if isinstance(tau, tuple):
        with _ctx(max(precision_bits * 2, 256)):
            tau = mpc(mpfr(tau[0]), mpfr(tau[1]))
    elif not isinstance(tau, mpc):
        tau = mpc(complex(tau))
    x, y = float(tau.real), float(tau.imag)
    if y < _MIN_IM or abs(x) > 0.5 + 1e-3 or x * x + y * y < 1 - 2e-3:
        raise DomainError(f"tau = {complex(x, y)} is outside the fundamental domain")
    log2_q = -2 * math.pi * y / math.log(2)
    absz = 2 * math.pi * abs(complex(x, y))

    def at(wp: int):
        with _ctx(wp):
            t = mpc(tau)
            q = gmpy2.exp(2 * gmpy2.const_pi() * mpc(0, 1) * t)
        rel_q = 8 * (absz + 1) * 2.0**-wp
        return _j_from_q(q, log2_q + 1e-9, rel_q, precision_bits, wp)

    return _certified(at, log2_q + 1e-9, precision_bits)


def _form_q(form: ReducedForm, wp: int) -> mpc:
    a, b, c = form
    D = 4 * a * c - b * b
    with _ctx(wp):
        pi = gmpy2.const_pi()
        r = gmpy2.exp(-pi * gmpy2.sqrt(mpfr(D)) / a)
        ang = pi * b / a
        return mpc(r * gmpy2.cos(ang), r * gmpy2.sin(ang))


def eval_j_form(form: ReducedForm, precision_bits: int = 128) -> tuple[mpc, mpfr]:
    """j((b + sqrt(delta)) / 2a) for a reduced form, built from exact data."""
    a, b, c = form
    D = 4 * a * c - b * b
    two_pi_y = math.pi * math.sqrt(D) / a
    log2_q = -two_pi_y / math.log(2) + 1e-9

    def at(wp: int):
        rel_q = 2 * (3 * two_pi_y + 3 * math.pi * abs(b) / a + 8) * 2.0**-wp
        return _j_from_q(_form_q(form, wp), log2_q, rel_q, precision_bits, wp)

    return _certified(at, log2_q, precision_bits)


def format_mpfr(x: mpfr, digits: int = 12) -> str:
    """Scientific notation for an mpfr, including values beyond double range."""
    x = mpfr(x)
    if not gmpy2.is_finite(x) or x == 0:
        return str(float(x))
    mant, exp, _ = x.digits(10, digits)
    sign = "-" if mant.startswith("-") else ""
    mant = mant.lstrip("-")
    return f"{sign}{mant[0]}.{mant[1:]}e{exp - 1:+d}"


# --- singular moduli ------------------------------------------------------

@dataclass(frozen=True)
class FundamentalPoint:
    form: ReducedForm
    tau: mpc

    @classmethod
    def from_form(cls, form: ReducedForm, precision_bits: int = 128) -> "FundamentalPoint":
        a, b, c = form
        D = 4 * a * c - b * b
        with _ctx(precision_bits):
            tau = mpc(mpfr(b) / (2 * a), gmpy2.sqrt(mpfr(D)) / (2 * a))
        return cls(form, tau)


@dataclass(frozen=True)
class SingularModulus:
    point: FundamentalPoint
    value: mpc
    abs_error_bound: mpfr

    @property
    def form(self) -> ReducedForm:
        return self.point.form

    @property
    def dominant(self) -> bool:
        return self.point.form.a == 1

    def abs_bounds(self) -> tuple[mpfr, mpfr]:
        """Certified lower and upper bounds on |value|."""
        with _up():
            hi = mpfr(abs(self.value)) + self.abs_error_bound
        with gmpy2.context(precision=64, round=gmpy2.RoundDown):
            lo = max(mpfr(abs(self.value)) - self.abs_error_bound, mpfr(0))
        return lo, hi


def singular_moduli(delta: int, precision_bits: int = 128) -> list[SingularModulus]:
    """All singular moduli of ``delta``: dominant first, then by descending |x|.

    Conjugate forms (a, -b, c) reuse the conjugate of (a, b, c), so paired
    values have identical absolute values; ties sort by (a, b).
    """
    delta = as_discriminant(delta)
    forms = enumerate_forms(delta)
    values: dict[ReducedForm, tuple[mpc, mpfr]] = {}
    for f in forms:
        if f.b >= 0:
            values[f] = eval_j_form(f, precision_bits)
    for f in forms:
        if f.b < 0:
            v, e = values[f.conjugate()]
            with _ctx(max(v.precision)):
                values[f] = (v.conjugate(), e)
    out = [SingularModulus(FundamentalPoint.from_form(f, precision_bits), *values[f])
           for f in forms]
    dom = out[0]
    rest = sorted(out[1:], key=lambda s: (-abs(s.value), s.form.a, s.form.b))
    return [dom] + rest


# --- Hilbert class polynomials --------------------------------------------

@dataclass(frozen=True)
class RoundingCertificate:
    precision_bits: int
    max_distance: float
    max_error: float

    @property
    def ok(self) -> bool:
        return self.max_distance <= 0.25 and self.max_error < 0.25


@dataclass(frozen=True)
class IntPolynomial:
    """Dense integer polynomial, constant term first."""

    coefficients: tuple[int, ...]
    certificate: RoundingCertificate | None = field(default=None, compare=False)

    def __post_init__(self):
        coeffs = list(self.coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(int(c) for c in coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def leading(self) -> int:
        return self.coefficients[-1]

    def __call__(self, t):
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * t + c
        return acc

    def __getitem__(self, k: int) -> int:
        return self.coefficients[k] if 0 <= k < len(self.coefficients) else 0

    def __str__(self) -> str:
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coefficients[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("t" if k == 1 else f"t^{k}")
            if mono and abs(c) == 1:
                coef = "-" if c < 0 else "+"
            else:
                coef = f"{'-' if c < 0 else '+'}{abs(c)}"
            terms.append(f"{coef}{mono}" if mono else coef)
        s = " ".join(t[0] + " " + t[1:] if t[1:] else t for t in terms)
        return s.lstrip("+ ").strip() or "0"


def auto_precision(delta: int, h: int | None = None) -> int:
    delta = as_discriminant(delta)
    if h is None:
        h = len(enumerate_forms(delta))
    return math.ceil(math.pi * math.sqrt(-delta) / math.log(2)) + 64 * h


def _polymul(p: Sequence, q: Sequence) -> list:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for k, b in enumerate(q):
            out[i + k] += a * b
    return out


def _real_factors(moduli: list[SingularModulus], wp: int):
    """Real linear/quadratic factors of prod (t - x) with coefficient errors."""
    by_form = {m.form: m for m in moduli}
    done = set()
    factors = []
    with _ctx(wp):
        for m in moduli:
            f = m.form
            if f in done:
                continue
            g = f.conjugate()
            x, e = m.value, m.abs_error_bound
            if g == f:
                factors.append(([-x.real, mpfr(1)], [e, 0]))
                done.add(f)
            else:
                ax = abs(x)
                sq = x.real * x.real + x.imag * x.imag
                factors.append(([sq, -2 * x.real, mpfr(1)], [2 * ax * e + e * e, 2 * e, 0]))
                done.update((f, g))
                assert g in by_form
    return factors


def _assemble(moduli: list[SingularModulus], wp: int) -> tuple[list, list]:
    factors = _real_factors(moduli, wp)
    with _ctx(wp):
        P = [mpfr(1)]
        M = [mpfr(1)]
        M0 = [mpfr(1)]
        for coeffs, errs in factors:
            P = _polymul(P, coeffs)
            absc = [abs(c) for c in coeffs]
            M = _polymul(M, [c + e for c, e in zip(absc, errs)])
            M0 = _polymul(M0, absc)
        h = len(moduli)
        slack = (3 * h + 8) * gmpy2.exp2(mpfr(-wp))
        errors = [(mk - m0k) + slack * mk for mk, m0k in zip(M, M0)]
    return P, errors


def hilbert_class_poly(delta: int, precision_bits: int | None = None,
                       max_retries: int = 3) -> IntPolynomial:
    """The Hilbert class polynomial of ``delta`` with a rounding certificate.

    Raises PrecisionError when some coefficient is more than 0.25 from the
    nearest integer (or its error bound reaches 0.25) after doubling the
    precision ``max_retries`` times.
    """
    delta = as_discriminant(delta)
    h = len(enumerate_forms(delta))
    bits = precision_bits or auto_precision(delta, h)
    for _ in range(max_retries + 1):
        moduli = singular_moduli(delta, bits)
        wp = bits + _GUARD + 4 * h.bit_length()
        P, errors = _assemble(moduli, wp)
        coeffs, dist, err = [], 0.0, 0.0
        with _ctx(wp):
            for c, e in zip(P, errors):
                n = gmpy2.rint(c)
                coeffs.append(int(n))
                dist = max(dist, float(abs(c - n)))
                err = max(err, float(e))
        cert = RoundingCertificate(bits, dist, err)
        if cert.ok:
            return IntPolynomial(tuple(coeffs), cert)
        bits *= 2
    raise PrecisionError(
        f"rounding certificate failed for {delta}: distance {dist:.3g}, error {err:.3g}")


# --- the quantities h, rho and N -------------------------------------------

@dataclass(frozen=True)
class DeltaStats:
    delta: int
    h: int
    rho: mpfr | None
    normN: int
    log_normN: mpfr
    log_norm_error: mpfr


def delta_stats(delta: int, precision_bits: int | None = None) -> DeltaStats:
    """h, rho (largest non-dominant |x|) and the norm N = |H(0)|.

    ``log_normN`` is the sum of log|x| over the moduli; it is checked against
    log|H(0)| from the exact polynomial within the accumulated error bound.
    """
    delta = as_discriminant(delta)
    H = hilbert_class_poly(delta, precision_bits)
    bits = H.certificate.precision_bits
    moduli = singular_moduli(delta, bits)
    normN = abs(H[0])
    with _ctx(bits + _GUARD):
        rho = max((abs(m.value) for m in moduli[1:]), default=None)
        if normN == 0:
            return DeltaStats(delta, len(moduli), rho, 0, mpfr("-inf"), mpfr(0))
        log_sum = mpfr(0)
        for m in moduli:
            log_sum += gmpy2.log(abs(m.value))
    with _up():
        bound = mpfr(0)
        for m in moduli:
            lo, _ = m.abs_bounds()
            if lo <= 0:
                raise PrecisionError(f"|x| not separated from 0 for {m.form}")
            bound += -gmpy2.log1p(-m.abs_error_bound / (lo + m.abs_error_bound))
        bound += gmpy2.exp2(mpfr(-bits))
    with _ctx(bits + _GUARD):
        exact = gmpy2.log(mpfr(normN))
        if abs(exact - log_sum) > bound:
            raise PrecisionError(f"log N disagreement for {delta}: {exact} vs {log_sum}")
    return DeltaStats(delta, len(moduli), rho, normN, log_sum, bound)


def universal_bounds(delta: int, stats: DeltaStats) -> dict[str, bool]:
    """Bounds valid for every discriminant, checked on computed statistics."""
    D = -delta
    checks = {
        "h_upper": stats.h <= math.sqrt(D) * (2 + math.log(D)) / math.pi,
        "norm_above_one": stats.normN > 1 if delta != -3 else True,
    }
    if stats.rho is not None:
        with _ctx(128):
            checks["rho_upper"] = bool(
                stats.rho <= gmpy2.exp(gmpy2.const_pi() * gmpy2.sqrt(mpfr(D)) / 2) + 2079)
            checks["rho_lower"] = bool(stats.rho >= mpfr(700) / mpfr(D) ** 3)
    return checks


def trinomial_bounds(delta: int) -> dict[str, float]:
    """Bounds that a trinomial discriminant would have to satisfy.

    Pure formula evaluation; no real discriminant is known to which they
    apply. ``log`` entries are values of log rho or log N bounds.
    """
    D = -delta
    s, L = math.sqrt(D), math.log(D)
    return {
        "h_min": 101,
        "h_max": 3 * s / L,
        "rho_min": 700 / D**3,
        "rho_max": D**0.8,
        "h_log_rho_min": -31 * s / L,
        "h_log_rho_max": 120 * s / L,
        "log_N_min": math.pi * s - 32 * s / L,
    }
