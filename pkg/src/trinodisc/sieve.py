"""Residue/character sieve over odd negative discriminants.

A trinomial discriminant that is odd has no split prime below a modest
bound. The sieve makes this checkable up to X:

1. residues n mod N0 = 8 * prod(3 <= p <= p0) with n = 5 mod 8 and
   (n/p) != 1 for each odd p <= p0;
2. one discriminant per pair (residue, m mod p1 with (m/p1) != 1), the
   representative of the combined class in [-N0 p1, -1], kept if |delta| <= X;
3. deletion of every delta with (delta/p) = 1 for p = p2, next prime, ...
   until nothing is left.

Survivor lists live in numpy int64 arrays of |delta|.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ntheory import is_prime, kronecker, legendre_table, next_prime
from .quadforms import as_discriminant

__all__ = [
    "CheckpointError",
    "SieveConfig",
    "SieveState",
    "SplitPrimeReport",
    "build_discriminants",
    "build_residues",
    "least_split_prime",
    "load_checkpoint",
    "run_sieve",
    "save_checkpoint",
]


class CheckpointError(ValueError):
    """A checkpoint is unreadable or belongs to another configuration."""


@dataclass(frozen=True)
class SieveConfig:
    X: int
    p0: int
    p1: int
    p2: int
    N0: int

    @classmethod
    def from_bound(cls, X: int) -> "SieveConfig":
        """p0 is the largest prime with 8 * prod(3 <= p <= p0) < X."""
        if X < 100:
            raise ValueError("sieve bound must be at least 100")
        N0, p0, p = 8, None, 3
        while N0 * p < X:
            N0 *= p
            p0 = p
            p = next_prime(p)
        return cls.explicit(X, p0)

    @classmethod
    def explicit(cls, X: int, p0: int) -> "SieveConfig":
        if p0 < 3 or not is_prime(p0):
            raise ValueError(f"p0 must be an odd prime, got {p0}")
        N0 = 8
        p = 3
        while p <= p0:
            N0 *= p
            p = next_prime(p)
        p1 = next_prime(p0)
        return cls(X, p0, p1, next_prime(p1), N0)

    @property
    def odd_primes(self) -> list[int]:
        out, p = [], 3
        while p <= self.p0:
            out.append(p)
            p = next_prime(p)
        return out

    @property
    def expected_residues(self) -> int:
        return math.prod((p + 1) // 2 for p in self.odd_primes)

    @property
    def single_representative(self) -> bool:
        """Whether one representative per class already covers |delta| <= X."""
        return self.N0 * self.p1 >= self.X


def _allowed(p: int) -> np.ndarray:
    """Residues m mod p with (m/p) != 1."""
    return np.flatnonzero(~legendre_table(p)).astype(np.int64)


def _crt_lift(res: np.ndarray, M: int, allowed: np.ndarray, p: int) -> np.ndarray:
    """All x mod M*p with x = r mod M (r in res) and x mod p in ``allowed``."""
    inv = pow(M, -1, p)
    t = ((allowed[None, :] - res[:, None]) % p) * inv % p
    return (res[:, None] + M * t).ravel()


def build_residues(config: SieveConfig) -> np.ndarray:
    """Sorted residues mod N0; exactly prod (p + 1)/2 of them."""
    res = np.array([5], dtype=np.int64)
    M = 8
    for p in config.odd_primes:
        res = _crt_lift(res, M, _allowed(p), p)
        M *= p
    assert M == config.N0
    res.sort()
    return res


def build_discriminants(config: SieveConfig, residues: np.ndarray | None = None,
                        exhaustive: bool = False) -> np.ndarray:
    """Sorted |delta| values of the discriminant list.

    By default each (residue, m) pair contributes the single representative
    of its class mod N0*p1 in [-N0*p1, -1]. ``exhaustive`` keeps every
    member of the class down to -X instead.
    """
    if residues is None:
        residues = build_residues(config)
    N0, p1, X = config.N0, config.p1, config.X
    M = N0 * p1
    inv = pow(N0, -1, p1)
    parts = []
    for m in _allowed(p1).tolist():
        # x = r mod N0, x = m mod p1, 0 <= x < M; delta = x - M in [-M, -1]
        t = ((m - residues) % p1) * inv % p1
        absd = M - (residues + N0 * t)
        if exhaustive:
            k = 0
            while True:
                cur = absd + k * M
                keep = cur[cur <= X]
                if not len(keep):
                    break
                parts.append(keep)
                k += 1
        else:
            parts.append(absd[absd <= X])
    out = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    out.sort()
    return out


@dataclass
class SieveState:
    config: SieveConfig
    survivors: np.ndarray  # sorted |delta|
    cursor_prime: int  # every survivor has (delta/p) != 1 for p <= cursor_prime
    history: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def initial(cls, config: SieveConfig, residues: np.ndarray | None = None,
                exhaustive: bool = False) -> "SieveState":
        """The discriminant list, recorded as history entry (p1, size)."""
        survivors = build_discriminants(config, residues, exhaustive=exhaustive)
        return cls(config, survivors, config.p1, [(config.p1, int(len(survivors)))])


def _split_mask(absd: np.ndarray, p: int, table: np.ndarray) -> np.ndarray:
    return table[(-absd) % p]


def _sieve_prime(survivors: np.ndarray, p: int, threads: int) -> np.ndarray:
    table = legendre_table(p)
    if threads <= 1 or len(survivors) < 1 << 20:
        return survivors[~_split_mask(survivors, p, table)]
    chunks = np.array_split(survivors, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        kept = list(pool.map(lambda c: c[~_split_mask(c, p, table)], chunks))
    return np.concatenate(kept)


def run_sieve(state: SieveState, checkpoint: str | os.PathLike | None = None,
              threads: int = 1, stop_at: int | None = None) -> tuple[int | None, list[tuple[int, int]]]:
    """Sieve until the list is empty; return (emptying prime, history).

    ``history`` holds (p, survivors after p) for each prime processed,
    appended to what the state already carried. A state that is already
    empty reports the last prime in its history. With ``stop_at`` the run
    pauses after that prime and may return None as the emptying prime.
    """
    if not len(state.survivors):
        last = state.history[-1][0] if state.history else state.cursor_prime
        return last, list(state.history)
    p = next_prime(state.cursor_prime)
    emptied = None
    while len(state.survivors):
        state.survivors = _sieve_prime(state.survivors, p, threads)
        state.cursor_prime = p
        state.history.append((p, int(len(state.survivors))))
        if checkpoint is not None:
            save_checkpoint(state, checkpoint)
        if not len(state.survivors):
            emptied = p
            break
        if stop_at is not None and p >= stop_at:
            break
        p = next_prime(p)
    return emptied, list(state.history)


# --- checkpoints ----------------------------------------------------------

_MAGIC = b"TRSV"
_VERSION = 1
_HEADER = struct.Struct("<4sIQIIIQQ")


def save_checkpoint(state: SieveState, path: str | os.PathLike) -> None:
    """Write header and sorted little-endian u64 |delta| values, atomically."""
    path = Path(path)
    c = state.config
    hist = np.array(state.history, dtype="<u8").reshape(-1, 2)
    header = _HEADER.pack(_MAGIC, _VERSION, c.X, c.p0, c.p1, c.p2,
                          state.cursor_prime, len(state.survivors))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(state.survivors, dtype="<u8").tobytes())
            fh.write(struct.pack("<Q", len(hist)))
            fh.write(hist.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | os.PathLike, config: SieveConfig | None = None) -> SieveState:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, X, p0, p1, p2, cursor, count = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise CheckpointError(f"{path}: not a sieve checkpoint")
    if version != _VERSION:
        raise CheckpointError(f"{path}: version {version}, expected {_VERSION}")
    loaded = SieveConfig.explicit(X, p0)
    if (loaded.p1, loaded.p2) != (p1, p2):
        raise CheckpointError(f"{path}: inconsistent primes in header")
    if config is not None and config != loaded:
        raise CheckpointError(f"{path}: checkpoint is for {loaded}, not {config}")
    off = _HEADER.size
    end = off + 8 * count
    if len(data) < end + 8:
        raise CheckpointError(f"{path}: truncated body")
    survivors = np.frombuffer(data, dtype="<u8", count=count, offset=off).astype(np.int64)
    (nh,) = struct.unpack_from("<Q", data, end)
    if len(data) != end + 8 + 16 * nh:
        raise CheckpointError(f"{path}: bad history length")
    hist = np.frombuffer(data, dtype="<u8", count=2 * nh, offset=end + 8).reshape(-1, 2)
    history = [(int(p), int(n)) for p, n in hist]
    if np.any(np.diff(survivors) < 0):
        raise CheckpointError(f"{path}: survivors not sorted")
    return SieveState(loaded, survivors, cursor, history)


# --- least split prime ----------------------------------------------------

@dataclass(frozen=True)
class SplitPrimeReport:
    delta: int
    prime: int
    bound3: float
    bound4: float

    @property
    def below3(self) -> bool:
        return self.prime < self.bound3

    @property
    def below4(self) -> bool:
        return self.prime < self.bound4


def least_split_prime(delta: int) -> SplitPrimeReport:
    """Smallest prime p with (delta/p) = 1, against 3 and 4 sqrt|delta|/log|delta|."""
    delta = as_discriminant(delta)
    D = -delta
    p = 2
    while kronecker(delta, p) != 1:
        p = next_prime(p)
    s, L = math.sqrt(D), math.log(D)
    return SplitPrimeReport(delta, p, 3 * s / L, 4 * s / L)
