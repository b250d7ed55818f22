"""Trinomial-incompatibility witnesses and the principal-inequality evaluators.

If three singular moduli with |x0| >= |x1| >= |x2| were roots of a common
trinomial t^m + A t^n + B, then

    1 - |x2/x1| <= 2|x1/x0| + 2|x1/x0|^3.

The *margin* of a triple is the left side minus the right side; a margin
that stays positive after subtracting its error bound rules the
discriminant out.

Two evaluation paths exist. :func:`witness_margin` works from the
certified MPFR singular moduli. :func:`scan_small` evaluates log|j| for
every reduced form in a block at once in float64 through

    log|j| = 3 log|E4| - log|q| - 24 sum log|1 - q^n|,

which has no cancellation, and carries a worst-case rounding bound along.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .quadforms import ReducedForm, as_discriminant, iter_discriminant_forms
from .singular_moduli import singular_moduli

__all__ = [
    "PRINCIPAL_VARIANTS",
    "REFINED_VARIANTS",
    "TrinomialSignature",
    "WitnessReport",
    "best_triple",
    "log_abs_j",
    "margin_of",
    "principal_rhs",
    "refined_principal_rhs",
    "scan_small",
    "witness_margin",
]

_U = 2.0**-53
_TERMS = 14  # |q| <= 0.0044 so q^15 sits far below float64 resolution


@dataclass(frozen=True)
class TrinomialSignature:
    m: int
    n: int

    def __post_init__(self):
        if not (isinstance(self.m, int) and isinstance(self.n, int)):
            raise TypeError("signature entries must be integers")
        if not self.m > self.n > 0:
            raise ValueError(f"need m > n > 0, got ({self.m}, {self.n})")


@dataclass(frozen=True)
class WitnessReport:
    delta: int
    h: int
    margin: float | mpfr  # mpfr from the certified path
    error_bound: float
    triple: tuple[ReducedForm, ReducedForm, ReducedForm]

    @property
    def certified(self) -> bool:
        """True when margin - error_bound > 0, i.e. delta is not trinomial."""
        return self.margin - self.error_bound > 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["margin"] = float(self.margin)
        d["triple"] = [list(f) for f in self.triple]
        return d


def margin_of(log0: float, log1: float, log2: float) -> float:
    """Margin of a triple given log|x0| >= log|x1| >= log|x2|."""
    r10 = math.exp(log1 - log0)
    r21 = math.exp(log2 - log1)
    return (1 - r21) - (2 * r10 + 2 * r10**3)


def _margin_error(log0: float, log1: float, log2: float, eps: float, ulp: float) -> float:
    """Change of the margin when each log moves by at most eps.

    ``ulp`` is the unit roundoff of the arithmetic that evaluates the
    margin; the terms are at most 4 in size, so 16 ulp covers it.
    """
    grow = math.expm1(2 * eps)
    r10 = math.exp(log1 - log0 + 2 * eps)
    r21 = math.exp(log2 - log1)
    return r21 * grow + (2 * r10 + 6 * r10**3) * grow + 16 * ulp


def best_triple(logs: Sequence[float]) -> tuple[int, int, int, float]:
    """Indices (i0, i1, i2) maximizing the margin, for logs sorted descending.

    logs[0] must be the dominant modulus. With x0 fixed as the dominant,
    the margin grows as |x2| shrinks, so for each candidate x1 the best x2
    is the smallest modulus other than x1 itself. That makes the search
    linear in h; it agrees with the cubic brute force over all triples.
    """
    h = len(logs)
    if h < 3:
        raise ValueError("need at least three moduli")
    best = None
    last = h - 1
    for i in range(1, h):
        if i != last:
            k = last
        elif logs[last - 1] <= logs[last]:
            k = last - 1
        else:
            continue
        m = margin_of(logs[0], logs[i], logs[k])
        if best is None or m > best[3]:
            best = (0, i, k, m)
    assert best is not None
    return best


# --- certified path ---------------------------------------------------------

def witness_margin(delta: int, precision_bits: int = 128) -> WitnessReport:
    """Best margin over admissible triples, from certified MPFR moduli.

    The triple is chosen from float logs; the margin of that triple is then
    recomputed from the MPFR values, so the returned error bound covers
    only the error of the moduli and of the working precision.
    """
    delta = as_discriminant(delta)
    moduli = singular_moduli(delta, precision_bits)
    h = len(moduli)
    if h < 3:
        raise ValueError(f"h({delta}) = {h}; a witness needs h >= 3")
    wp = precision_bits + 16
    with gmpy2.context(precision=wp):
        logs = [float(gmpy2.log(abs(m.value))) for m in moduli]
        # relative error of each |x|, as an additive error on log|x|
        rel = max(float(m.abs_error_bound / abs(m.value)) for m in moduli)
    if rel >= 0.5:
        raise ArithmeticError(f"moduli of {delta} not resolved at {precision_bits} bits")
    eps = 2 * rel + 2.0 ** (-wp + 4)
    i0, i1, i2, _ = best_triple(logs)
    with gmpy2.context(precision=wp):
        a0, a1, a2 = (abs(moduli[i].value) for i in (i0, i1, i2))
        r10, r21 = a1 / a0, a2 / a1
        exact = (1 - r21) - (2 * r10 + 2 * r10**3)
    err = _margin_error(logs[i0], logs[i1], logs[i2], eps, 2.0**-wp)
    triple = tuple(moduli[i].form for i in (i0, i1, i2))
    return WitnessReport(delta, h, exact, err, triple)


# --- fast batch path --------------------------------------------------------

def _sigma3(n: int) -> np.ndarray:
    s = np.zeros(n + 1)
    for d in range(1, n + 1):
        s[d::d] += d**3
    return s


_S3 = _sigma3(_TERMS)


def log_abs_j(D: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|j((b + sqrt(-D)) / 2a)| for reduced forms, with absolute error bounds.

    Vectorized over forms; D, a, b are integer arrays of equal length.
    """
    D = np.asarray(D, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    y = np.pi * np.sqrt(D) / a
    ey = 4 * _U * y
    theta = np.pi * b / a
    with np.errstate(under="ignore"):
        r = np.exp(-y)
        q = r * np.exp(1j * theta)
        eq = ey + 8 * _U  # relative error of q
        qn = np.ones_like(q)
        S3 = np.zeros_like(q)
        A3 = np.zeros_like(y)
        eta = np.zeros_like(y)
        Aeta = np.zeros_like(y)
        rn = np.ones_like(y)
        for n in range(1, _TERMS + 1):
            qn = qn * q
            rn = rn * r
            S3 += _S3[n] * qn
            A3 += n * _S3[n] * rn
            # log|1 - w| = log1p(|w|^2 - 2 Re w) / 2
            w = qn
            eta += 0.5 * np.log1p(w.real * w.real + w.imag * w.imag - 2 * w.real)
            Aeta += n * rn
    tiny = 1e-290  # absorbs subnormal powers of q
    N = _TERMS
    # error of S3: power-by-power drift of q^n, summation, truncation tail
    eS3 = A3 * (eq + 4 * _U) + (N + 2) * _U * A3 + 1.21 * 1.6 * (N + 1) ** 3 * r ** (N + 1) + tiny
    E4 = 1 + 240 * S3
    eE4 = 240 * eS3 + 2 * _U * (1 + 240 * A3)
    aE4 = np.abs(E4)
    if np.any(aE4 <= 2 * eE4):
        raise ArithmeticError("E4 not separated from zero in float64")
    log_e4 = np.log(aE4)
    e_log_e4 = eE4 / (aE4 - eE4) + 2 * _U * np.abs(log_e4)
    # each log|1 - q^n| has absolute error about 3 |q|^n (n eq + 8u)
    e_eta = 3 * (Aeta * (eq + 4 * _U) + 8 * _U * Aeta) + N * _U * Aeta + 2 * r ** (N + 1) + tiny
    val = 3 * log_e4 + y - 24 * eta
    err = 3 * e_log_e4 + ey + 24 * e_eta + 4 * _U * (3 * np.abs(log_e4) + y + 24 * np.abs(eta))
    return val, err * 1.01


def _scan_block(args) -> list[dict]:
    lo, hi, threshold, keep_all = args
    out = []
    for delta, forms in iter_discriminant_forms(hi, start=lo, block=hi - lo + 1):
        h = len(forms)
        if h <= 3:
            continue
        D = np.full(h, -delta, dtype=np.int64)
        vals, errs = log_abs_j(D, forms[:, 0], forms[:, 1])
        order = np.lexsort((forms[:, 1], forms[:, 0], -vals))
        # (a, b, c) and (a, -b, c) use conjugate q, so their values agree exactly
        logs = vals[order].tolist()
        eps = float(errs.max())
        i0, i1, i2, m = best_triple(logs)
        err = _margin_error(logs[i0], logs[i1], logs[i2], eps, _U)
        if keep_all or m - err <= threshold:
            triple = [tuple(int(v) for v in forms[order[i]]) for i in (i0, i1, i2)]
            out.append({"delta": delta, "h": h, "margin": m, "error_bound": err,
                        "triple": triple})
    return out


def _blocks(limit: int, size: int) -> Iterable[tuple[int, int]]:
    lo = 3
    while lo <= limit:
        hi = min(limit, lo + size - 1)
        yield lo, hi
        lo = hi + 1


def scan_small(limit: int, margin_threshold: float = 0.15, threads: int = 1,
               keep_all: bool = False, block: int = 2000) -> list[WitnessReport]:
    """Discriminants with 3 < h and |delta| <= limit whose best margin is low.

    A discriminant is reported when its margin minus error bound does not
    exceed ``margin_threshold``. Results are ordered by ascending |delta|
    and do not depend on ``threads``.
    """
    if limit < 3:
        return []
    tasks = [(lo, hi, margin_threshold, keep_all) for lo, hi in _blocks(limit, block)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_scan_block, tasks))
    else:
        chunks = [_scan_block(t) for t in tasks]
    reports = []
    for chunk in chunks:
        for d in chunk:
            triple = tuple(ReducedForm(*f) for f in d["triple"])
            reports.append(WitnessReport(d["delta"], d["h"], d["margin"],
                                         d["error_bound"], triple))
    reports.sort(key=lambda r: -r.delta)
    return reports


# --- principal inequalities ------------------------------------------------

PRINCIPAL_VARIANTS = ("full", "mn", "single", "half")
REFINED_VARIANTS = (1, 2, 3, 4)


def principal_rhs(delta: int, signature: TrinomialSignature, log_x1: float,
                  variant: str = "full") -> mpfr:
    """Right-hand side of the principal inequality in one of its four forms.

    ``full`` bounds |1 - (x2/x1)^n| and ``mn`` bounds 1 - |x2/x1|; both are
    exp((m-n)(-pi sqrt|delta| + log|x1| + 1e-20) + log 2). ``single`` drops
    the factor m - n, and ``half`` also replaces log|x1| by pi sqrt|delta|/2.
    The result is an mpfr because it underflows a double for large |delta|.
    """
    delta = as_discriminant(delta)
    D = -delta
    if D < 1000:
        raise ValueError("the principal inequality needs |delta| >= 1000")
    if variant not in PRINCIPAL_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    k = signature.m - signature.n
    with gmpy2.context(precision=128):
        s = gmpy2.const_pi() * gmpy2.sqrt(mpfr(D))
        lx = mpfr(log_x1)
        if variant in ("full", "mn"):
            return gmpy2.exp(k * (-s + lx + mpfr("1e-20")) + gmpy2.log(mpfr(2)))
        if variant == "single":
            return gmpy2.exp(-s + lx + mpfr("0.7"))
        return gmpy2.exp(-s / 2 + mpfr("0.7"))


def refined_principal_rhs(delta: int, signature: TrinomialSignature,
                          rho: float | None = None, variant: int = 1) -> mpfr:
    """Right-hand sides of the refined principal inequality.

    Returned as an mpfr, since these underflow a double long before the
    discriminants of interest. Variants 2 and 3 need ``rho``.
    """
    delta = as_discriminant(delta)
    if variant not in REFINED_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant in (2, 3) and rho is None:
        raise ValueError("variants 2 and 3 need rho")
    k = signature.m - signature.n
    with gmpy2.context(precision=128):
        D = mpfr(-delta)
        base = -gmpy2.const_pi() * gmpy2.sqrt(D) + gmpy2.log(D)
        if variant == 1:
            return gmpy2.exp(k * base)
        if variant == 2:
            return mpfr(rho) * gmpy2.exp(k * base)
        if variant == 3:
            return mpfr(rho) * gmpy2.exp(base)
        return gmpy2.exp(base + gmpy2.log(D))
