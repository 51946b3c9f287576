"""Sieved arithmetic tables up to a bound X_max.

Every array is indexed directly by n (entry 0 is a placeholder).  Tables that
depend only on X_max (smallest prime factor, squarefree indicator, omega) are
memoized, so building many (form, D) tables at one bound shares that work.

Binary dump layout (little-endian)::

    magic    4 bytes  b"HQFT"
    version  uint32   1
    X_max    uint64
    N        uint32
    k        uint32
    D        int32
    label    16 bytes ASCII, NUL padded
    mu_sq    uint8[X_max+1]
    omega    uint8[X_max+1]
    coprime  uint8[X_max+1]
    r_star   int32[X_max+1]
    a_sign   int8[X_max+1]
    lambda   float64[X_max+1]
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import qforms
from .eigenforms import EigenformEntry
from .errors import RangeError

_HEADER = struct.Struct("<4sIQIIi16s")
_MAGIC = b"HQFT"
_VERSION = 1


@lru_cache(maxsize=4)
def spf_sieve(X_max: int) -> np.ndarray:
    """Smallest prime factor of each n <= X_max (spf[0] = 0, spf[1] = 1)."""
    spf = np.zeros(X_max + 1, dtype=np.int32)
    for p in range(2, math.isqrt(X_max) + 1):
        if spf[p] == 0:
            block = spf[p * p::p]
            block[block == 0] = p
    n = np.arange(X_max + 1, dtype=np.int32)
    unset = spf == 0
    spf[unset] = n[unset]
    spf.flags.writeable = False
    return spf


@lru_cache(maxsize=4)
def primes(X_max: int) -> np.ndarray:
    spf = spf_sieve(X_max)
    n = np.arange(X_max + 1)
    out = np.flatnonzero((spf == n) & (n >= 2))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=4)
def moebius_squarefree_sieve(X_max: int) -> np.ndarray:
    """Boolean mu(n)^2 for n <= X_max (index 0 is False)."""
    sq = np.ones(X_max + 1, dtype=bool)
    sq[0] = False
    for p in range(2, math.isqrt(X_max) + 1):
        if sq[p] or p == 2:
            sq[p * p::p * p] = False
    sq.flags.writeable = False
    return sq


@lru_cache(maxsize=4)
def omega_sieve(X_max: int) -> np.ndarray:
    om = np.zeros(X_max + 1, dtype=np.uint8)
    for p in primes(X_max):
        om[p::p] += 1
    om.flags.writeable = False
    return om


def coprime_sieve(X_max: int, N: int) -> np.ndarray:
    cop = np.ones(X_max + 1, dtype=bool)
    cop[0] = False
    m = N
    p = 2
    while p * p <= m:
        if m % p == 0:
            cop[p::p] = False
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        cop[m::m] = False
    return cop


def multiplicative_fill(X_max: int, local) -> np.ndarray:
    """Multiplicative f(n) for n <= X_max from ``local(p, e) -> f(p^e)``."""
    out = np.ones(X_max + 1, dtype=np.float64)
    out[0] = 0.0
    for p in primes(X_max):
        p = int(p)
        pe, e = p, 1
        while pe <= X_max:
            val = local(p, e)
            if val != 1:
                idx = np.arange(pe, X_max + 1, pe)
                if pe * p <= X_max:
                    idx = idx[(idx // pe) % p != 0]
                out[idx] *= val
            pe *= p
            e += 1
    return out


@lru_cache(maxsize=16)
def r_star_sieve(D: int, X_max: int) -> np.ndarray:
    """r_star(n, D) for n <= X_max, multiplicatively from chi_D at prime powers."""
    chi = qforms.chi_table(D, X_max)
    out = np.ones(X_max + 1, dtype=np.int32)
    out[0] = 0
    for p in primes(X_max):
        c = int(chi[p])
        if c == 0:
            continue
        p = int(p)
        pe, e = p, 1
        while pe <= X_max:
            # sum_{j<=e} c^j
            val = e + 1 if c == 1 else (1 if e % 2 == 0 else 0)
            idx = np.arange(pe, X_max + 1, pe)
            if pe * p <= X_max:
                idx = idx[(idx // pe) % p != 0]
            out[idx] *= val
            pe *= p
            e += 1
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CoefficientTable:
    """Sieved symbols for one (form, D) pair up to X_max."""

    X_max: int
    mu_sq: np.ndarray
    omega: np.ndarray
    coprime_N: np.ndarray
    r_star: np.ndarray
    lam: np.ndarray
    a_sign: np.ndarray
    N: int
    k: int
    D: int
    label: str

    @property
    def w_D(self) -> int:
        return qforms.unit_count(self.D)

    @property
    def form(self) -> qforms.QuadForm:
        return qforms.principal_form(self.D)

    def check_bound(self, X: float) -> None:
        if X > self.X_max:
            raise RangeError(f"X={X} beyond table bound {self.X_max}")


def build_table(entry: EigenformEntry, D: int, X_max: int) -> CoefficientTable:
    """Sieve all symbols for (entry, D) through X_max."""
    if X_max > entry.depth:
        raise RangeError(f"cache depth {entry.depth} < X_max={X_max}")
    qforms.principal_form(D)
    lam = np.array(entry.lam[: X_max + 1], dtype=np.float64)
    lam.flags.writeable = False
    sign = np.fromiter((0 if v == 0 else (1 if v > 0 else -1) for v in entry.a[: X_max + 1]),
                       dtype=np.int8, count=X_max + 1)
    sign.flags.writeable = False
    cop = coprime_sieve(X_max, entry.N)
    cop.flags.writeable = False
    return CoefficientTable(
        X_max=X_max,
        mu_sq=moebius_squarefree_sieve(X_max),
        omega=omega_sieve(X_max),
        coprime_N=cop,
        r_star=r_star_sieve(D, X_max),
        lam=lam,
        a_sign=sign,
        N=entry.N,
        k=entry.k,
        D=D,
        label=entry.label,
    )


def dump_table(table: CoefficientTable, path: Path) -> None:
    label = table.label.encode("ascii")[:16]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, table.X_max, table.N, table.k, table.D, label))
        fh.write(table.mu_sq.astype("<u1").tobytes())
        fh.write(table.omega.astype("<u1").tobytes())
        fh.write(table.coprime_N.astype("<u1").tobytes())
        fh.write(table.r_star.astype("<i4").tobytes())
        fh.write(table.a_sign.astype("<i1").tobytes())
        fh.write(table.lam.astype("<f8").tobytes())


def load_table(path: Path) -> CoefficientTable:
    raw = Path(path).read_bytes()
    magic, version, X_max, N, k, D, label = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a version-{_VERSION} table dump")
    size = X_max + 1
    offset = _HEADER.size
    arrays = []
    for dtype in ("<u1", "<u1", "<u1", "<i4", "<i1", "<f8"):
        arr = np.frombuffer(raw, dtype=dtype, count=size, offset=offset)
        offset += arr.nbytes
        arrays.append(arr)
    mu, om, cop, rs, sign, lam = arrays
    return CoefficientTable(
        X_max=X_max,
        mu_sq=mu.astype(bool),
        omega=om.copy(),
        coprime_N=cop.astype(bool),
        r_star=rs.astype(np.int32),
        lam=lam.astype(np.float64),
        a_sign=sign.copy(),
        N=N,
        k=k,
        D=D,
        label=label.rstrip(b"\0").decode("ascii"),
    )
