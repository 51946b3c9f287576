"""Eta-quotient newforms: exact q-expansions, normalization, Hecke checks.

Coefficients are exact Python integers ``a[n]`` (index 0 unused, set to 0).
Normalized values ``lambda_f(n) = a_f(n) / n**((k-1)/2)`` are float64 arrays.
"""

from __future__ import annotations

import logging
import math
import os
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import series
from .errors import (
    CacheError,
    DeligneViolation,
    DomainError,
    IncompleteInputError,
    RangeError,
)

log = logging.getLogger(__name__)

# 2**20 covers the dyadic checkpoints used by the slope fit.
DEFAULT_DEPTH = 2 ** 20
DELIGNE_TOL = 1e-9


@dataclass(frozen=True)
class EtaQuotient:
    """prod eta(m*tau)**r over ``factors`` = [(m, r), ...]."""

    factors: tuple[tuple[int, int], ...]
    level: int
    weight: int

    def __post_init__(self):
        total = sum(r for _, r in self.factors)
        if total % 2 or total // 2 != self.weight or self.weight <= 0:
            raise DomainError(f"weight {self.weight} inconsistent with exponents {self.factors}")
        if self.q_offset_24 % 24:
            raise DomainError(f"sum m*r = {self.q_offset_24} is not divisible by 24")

    @property
    def q_offset_24(self) -> int:
        return sum(m * r for m, r in self.factors)


def eta_series(precision: int) -> list[int]:
    """Coefficients of prod_{n>=1} (1 - q^n) through q**precision."""
    if precision < 1:
        raise DomainError("precision must be >= 1")
    return series.pentagonal_eta(precision + 1)


def expand_eta_quotient(spec: EtaQuotient, precision: int) -> list[int]:
    """Exact a_f(n) for 0 <= n <= precision (a_f(0) = 0).

    Only quotients with leading term q**1 are accepted, i.e. normalized cusp
    forms with a_f(1) = 1.
    """
    if spec.q_offset_24 != 24:
        raise DomainError(
            f"q-offset {spec.q_offset_24}/24 != 1: not a normalized cusp form"
        )
    length = precision  # series terms q^0 .. q^(precision-1) shift to n = 1..precision
    prod = None
    for m, r in spec.factors:
        inner = series.eta_power(r, (length - 1) // m + 1)
        term = series.substitute(inner, m, length)
        prod = term if prod is None else series.mul(prod, term, length)
    return [0] + prod


def normalize(a, k: int) -> np.ndarray:
    """lambda(n) = a(n) / n**((k-1)/2) as float64, with lambda(0) = 0.

    Integer division is done exactly before the float square root, so the
    relative error stays within a few ulps.
    """
    if a[1] != 1:
        raise DomainError("a(1) must be 1")
    out = np.zeros(len(a), dtype=np.float64)
    if (k - 1) % 2 == 0:
        e = (k - 1) // 2
        for n in range(1, len(a)):
            out[n] = a[n] / n ** e
    else:
        e = (k - 2) // 2
        for n in range(1, len(a)):
            out[n] = a[n] / n ** e / math.sqrt(n)
    return out


@dataclass
class EigenformEntry:
    """A catalog newform with cached exact and normalized coefficients."""

    label: str
    N: int
    k: int
    a: list[int]
    lam: np.ndarray = field(repr=False)

    @property
    def depth(self) -> int:
        return len(self.a) - 1

    def coefficient(self, n: int) -> int:
        if not 1 <= n <= self.depth:
            raise RangeError(f"n={n} outside cache depth {self.depth}")
        return self.a[n]

    def lambda_(self, n: int) -> float:
        if not 1 <= n <= self.depth:
            raise RangeError(f"n={n} outside cache depth {self.depth}")
        return float(self.lam[n])


@dataclass(frozen=True)
class CatalogItem:
    label: str
    spec: EtaQuotient
    aliases: tuple[str, ...] = ()


CATALOG = (
    CatalogItem("delta", EtaQuotient(((1, 24),), 1, 12), ("d1k12",)),
    CatalogItem("d2k8", EtaQuotient(((1, 8), (2, 8)), 2, 8)),
    CatalogItem("d5k4", EtaQuotient(((1, 4), (5, 4)), 5, 4)),
    CatalogItem("d11k2", EtaQuotient(((1, 2), (11, 2)), 11, 2)),
)


def catalog_item(label: str) -> CatalogItem:
    for item in CATALOG:
        if label == item.label or label in item.aliases:
            return item
    raise KeyError(f"unknown form {label!r}; known: {[i.label for i in CATALOG]}")


def default_cache_dir() -> Path:
    env = os.environ.get("HECKEQF_CACHE")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "heckeqf"


def cache_path(cache_dir: Path, N: int, k: int) -> Path:
    return Path(cache_dir) / f"coeffs_N{N}_k{k}.csv"


def write_cache(path: Path, a: list[int]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write("".join(f"{n},{a[n]}\n" for n in range(1, len(a))))
    tmp.replace(path)


def read_cache(path: Path, depth: int | None = None) -> list[int]:
    a = [0]
    with open(path) as fh:
        for expected, line in enumerate(fh, start=1):
            if depth is not None and expected > depth:
                break
            n_str, val = line.rstrip("\n").split(",")
            if int(n_str) != expected:
                raise CacheError(f"{path}: record {expected} has index {n_str}")
            a.append(int(val))
    return a


def hecke_relation_holds(a: list[int], k: int, m: int, n: int) -> bool:
    """a(m)a(n) == sum_{d | gcd(m,n)} d**(k-1) a(mn/d^2), exactly."""
    g = math.gcd(m, n)
    rhs = 0
    for d in range(1, g + 1):
        if g % d == 0:
            rhs += d ** (k - 1) * a[m * n // (d * d)]
    return a[m] * a[n] == rhs


def validate_coefficients(a: list[int], N: int, k: int, fraction: float = 0.01,
                          seed: int = 0) -> None:
    """Check a(1)=1 and the Hecke relation on a random sample of pairs."""
    if len(a) < 2 or a[1] != 1:
        raise CacheError("a(1) != 1")
    depth = len(a) - 1
    rng = random.Random(seed)
    trials = max(1, int(depth * fraction))
    root = max(2, math.isqrt(depth))
    for _ in range(trials):
        m = rng.randint(1, root)
        n = rng.randint(1, depth // m)
        if math.gcd(m * n, N) != 1:
            continue
        if not hecke_relation_holds(a, k, m, n):
            raise CacheError(f"Hecke relation fails at (m, n) = ({m}, {n})")


def load_entry(label: str, depth: int = DEFAULT_DEPTH, cache_dir: Path | None = None,
               use_cache: bool = True) -> EigenformEntry:
    """Catalog entry with coefficients through ``depth``, cached on disk."""
    item = catalog_item(label)
    N, k = item.spec.level, item.spec.weight
    a = None
    path = None
    if use_cache:
        path = cache_path(cache_dir or default_cache_dir(), N, k)
        if path.exists():
            a = read_cache(path, depth)
            if len(a) - 1 < depth:
                log.info("cache %s shallower than %d; rebuilding", path, depth)
                a = None
            else:
                validate_coefficients(a, N, k)
    if a is None:
        log.info("expanding %s to depth %d", item.label, depth)
        a = expand_eta_quotient(item.spec, depth)
        if path is not None:
            write_cache(path, a)
    return EigenformEntry(item.label, N, k, a, normalize(a, k))


def catalog(depth: int = DEFAULT_DEPTH, cache_dir: Path | None = None,
            use_cache: bool = True) -> list[EigenformEntry]:
    return [load_entry(item.label, depth, cache_dir, use_cache) for item in CATALOG]


def hecke_check(entry: EigenformEntry, m: int, n: int) -> bool:
    """Exact Hecke relation for (m, n); needs gcd(m,n)=1 or gcd(mn,N)=1."""
    if m < 1 or n < 1:
        raise DomainError("m, n must be positive")
    if math.gcd(m, n) != 1 and math.gcd(m * n, entry.N) != 1:
        raise DomainError(f"relation not asserted for ({m},{n}) at level {entry.N}")
    if m * n > entry.depth:
        raise RangeError(f"mn={m * n} beyond cache depth {entry.depth}")
    return hecke_relation_holds(entry.a, entry.k, m, n)


def primes_upto(n: int) -> np.ndarray:
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.flatnonzero(sieve)


def prime_power_values(lam_p: float, p_divides_N: bool, e_max: int) -> list[float]:
    """lambda(p^j) for j = 0..e_max from lambda(p) alone."""
    vals = [1.0, lam_p]
    for _ in range(2, e_max + 1):
        if p_divides_N:
            vals.append(vals[-1] * lam_p)
        else:
            vals.append(lam_p * vals[-1] - vals[-2])
    return vals[: e_max + 1]


def extend_by_hecke(prime_lambdas: dict[int, float], N: int, X: int) -> np.ndarray:
    """Rebuild lambda(n), n <= X, from prime values via the Hecke recursion."""
    out = np.ones(X + 1, dtype=np.float64)
    out[0] = 0.0
    for p in primes_upto(X):
        p = int(p)
        if p not in prime_lambdas:
            raise IncompleteInputError(f"missing lambda({p})")
        e_max = int(math.log(X) / math.log(p)) + 1
        while p ** e_max > X:
            e_max -= 1
        vals = prime_power_values(prime_lambdas[p], N % p == 0, e_max)
        for e in range(1, e_max + 1):
            pe = p ** e
            idx = np.arange(pe, X + 1, pe)
            idx = idx[(idx // pe) % p != 0]
            out[idx] *= vals[e]
    return out


@dataclass(frozen=True)
class SatakeAngle:
    p: int | None
    theta: float


def satake(lambda_p: float, p: int | None = None) -> SatakeAngle:
    """theta in [0, pi] with lambda_p = 2 cos(theta)."""
    if abs(lambda_p) > 2 + DELIGNE_TOL:
        raise DeligneViolation(f"|lambda({p})| = {abs(lambda_p)} > 2")
    return SatakeAngle(p, math.acos(max(-1.0, min(1.0, lambda_p / 2))))


def lambda_power(theta: float, m: int) -> float:
    """sin((m+1)theta)/sin(theta), with its limits at theta = 0 and pi."""
    s = math.sin(theta)
    if abs(s) < 1e-12:
        if theta < 1.0:
            return float(m + 1)
        return float((-1) ** m * (m + 1))
    return math.sin((m + 1) * theta) / s


def deligne_check(entry: EigenformEntry, p_max: int) -> float:
    """Largest |lambda(p)| over primes p <= p_max, p not dividing N.

    Raises DeligneViolation if it exceeds 2 beyond tolerance.
    """
    if p_max > entry.depth:
        raise RangeError(f"p_max={p_max} beyond cache depth {entry.depth}")
    ps = primes_upto(p_max)
    ps = ps[entry.N % ps != 0]
    worst = float(np.max(np.abs(entry.lam[ps]))) if len(ps) else 0.0
    if worst > 2 + DELIGNE_TOL:
        raise DeligneViolation(f"max |lambda(p)| = {worst} for {entry.label}")
    return worst
