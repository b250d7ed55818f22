"""On-disk cache of Hilbert class polynomials.

One JSON file per discriminant. Coefficients are stored as decimal strings
next to a SHA-256 of their canonical form; any entry that fails to parse,
carries another format version or does not match its checksum is ignored
and recomputed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .quadforms import as_discriminant, class_number
from .singular_moduli import IntPolynomial, hilbert_class_poly

__all__ = ["CACHE_ENV", "CacheEntry", "PolyCache", "default_cache_dir"]

log = logging.getLogger(__name__)

CACHE_ENV = "TRINODISC_CACHE_DIR"
FORMAT_VERSION = 1


def default_cache_dir() -> Path | None:
    value = os.environ.get(CACHE_ENV)
    return Path(value) if value else None


def _digest(delta: int, coefficients: list[str]) -> str:
    blob = json.dumps([delta, coefficients], separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    delta: int
    h: int
    coefficients: tuple[str, ...]  # constant term first
    precision_bits: int
    version: int = FORMAT_VERSION

    @classmethod
    def from_polynomial(cls, delta: int, poly: IntPolynomial) -> "CacheEntry":
        bits = poly.certificate.precision_bits if poly.certificate else 0
        return cls(delta, poly.degree, tuple(str(c) for c in poly.coefficients), bits)

    def polynomial(self) -> IntPolynomial:
        return IntPolynomial(tuple(int(c) for c in self.coefficients))

    def to_json(self) -> dict:
        coeffs = list(self.coefficients)
        return {"version": self.version, "delta": self.delta, "h": self.h,
                "precision_bits": self.precision_bits, "coefficients": coeffs,
                "sha256": _digest(self.delta, coeffs)}

    @classmethod
    def from_json(cls, data: dict) -> "CacheEntry":
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"cache format {data.get('version')!r}")
        coeffs = data["coefficients"]
        if not all(isinstance(c, str) for c in coeffs):
            raise ValueError("coefficients must be decimal strings")
        delta = int(data["delta"])
        if data.get("sha256") != _digest(delta, coeffs):
            raise ValueError("checksum mismatch")
        entry = cls(delta, int(data["h"]), tuple(coeffs), int(data["precision_bits"]))
        poly = entry.polynomial()
        if poly.degree != entry.h or poly.leading != 1:
            raise ValueError("polynomial is not monic of degree h")
        return entry


class PolyCache:
    """Single-writer cache; writes go through a temp file and a rename."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def path(self, delta: int) -> Path:
        return self.root / f"hilbert_{-delta}.json"

    def load(self, delta: int) -> CacheEntry | None:
        p = self.path(delta)
        if not p.exists():
            return None
        try:
            entry = CacheEntry.from_json(json.loads(p.read_text()))
            if entry.delta != delta or entry.h != class_number(delta):
                raise ValueError("entry does not belong to this discriminant")
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            log.warning("ignoring corrupt cache entry %s: %s", p, exc)
            return None
        return entry

    def store(self, entry: CacheEntry) -> None:
        p = self.path(entry.delta)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=p.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(entry.to_json(), fh)
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def hilbert(self, delta: int, precision_bits: int | None = None) -> IntPolynomial:
        delta = as_discriminant(delta)
        entry = self.load(delta)
        if entry is not None:
            self.hits += 1
            return entry.polynomial()
        self.misses += 1
        poly = hilbert_class_poly(delta, precision_bits)
        self.store(CacheEntry.from_polynomial(delta, poly))
        return poly
