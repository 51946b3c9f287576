"""Euler products, local factors and coefficient-level factorization checks.

A local factor at p is a power series in x = p^{-s}.  Products of local
factors become Dirichlet series by expanding each prime to its largest
useful exponent and merging multiplicatively.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from . import qforms, sieves
from .eigenforms import EigenformEntry
from .errors import ConvergenceError, DomainError, UnsupportedDiscriminantError

DEFAULT_P_CUT = 10 ** 6
L1_DIRECT_TERMS = 10 ** 7


@dataclass(frozen=True)
class LocalFactor:
    """poly(x) or 1/poly(x), with poly(0) = 1."""

    p: int
    poly: tuple[float, ...]
    inverted: bool = False

    def __post_init__(self):
        if self.poly[0] != 1:
            raise DomainError("local factor must satisfy poly(0) = 1")

    def series(self, e_max: int) -> np.ndarray:
        coeffs = np.zeros(e_max + 1)
        m = min(len(self.poly), e_max + 1)
        coeffs[:m] = self.poly[:m]
        return series_inverse(coeffs) if self.inverted else coeffs

    def __call__(self, x: complex) -> complex:
        val = sum(c * x ** i for i, c in enumerate(self.poly))
        return 1 / val if self.inverted else val


def series_inverse(c: np.ndarray) -> np.ndarray:
    """Power series 1/c(x) to the same length, c[0] = 1."""
    out = np.zeros_like(c, dtype=float)
    out[0] = 1.0
    for n in range(1, len(c)):
        out[n] = -np.dot(c[1:n + 1], out[n - 1::-1][:n])
    return out


def series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[: len(a)]


def _check_s(s: complex) -> None:
    if complex(s).real <= 0.5:
        raise ConvergenceError(f"Re(s) = {complex(s).real} <= 1/2")


# Local factors of L(s, f), L(s, f x chi) and G(s)

def hecke_factor(p: int, lambda_p: float, in_level: bool) -> LocalFactor:
    poly = (1.0, -lambda_p) if in_level else (1.0, -lambda_p, 1.0)
    return LocalFactor(p, poly, inverted=True)


def twist_factor(p: int, chi_p: int, lambda_p: float, in_level: bool) -> LocalFactor:
    """Euler factor of the twist; identically 1 when chi(p) = 0."""
    if in_level:
        poly = (1.0, -lambda_p * chi_p)
    else:
        poly = (1.0, -lambda_p * chi_p, float(chi_p * chi_p))
    return LocalFactor(p, poly, inverted=True)


def G_local_poly(chi_p: int, lambda_p: float, in_level: bool) -> np.ndarray:
    """G_p as a polynomial in x, from the ratio (series) / L_p(f) / L_p(f x chi)."""
    lead = np.array([1.0, 0.0 if in_level else lambda_p * (1 + chi_p)])
    f_inv = np.array(hecke_factor(0, lambda_p, in_level).poly)
    t_inv = np.array(twist_factor(0, chi_p, lambda_p, in_level).poly)
    return np.convolve(np.convolve(lead, f_inv), t_inv)


def local_G(p: int, chi_p: int, lambda_p: float, in_level: bool, s: complex) -> complex:
    _check_s(s)
    x = complex(p) ** (-complex(s))
    poly = G_local_poly(chi_p, lambda_p, in_level)
    return complex(np.polyval(poly[::-1], x))


def displayed_G_factor(chi_p: int, lambda_p: float, in_level: bool, p_divides_D: bool,
                       x: complex) -> complex:
    """G_p(x) from the five-term closed form for p not dividing N.

    Kept only to be compared against :func:`G_local_poly`.
    """
    lam, chi = lambda_p, chi_p
    if in_level:
        return (1 - lam * x) * (1 - lam * chi * x)
    val = (1 + (2 - 2 * lam ** 2 - lam ** 2 * chi) * x ** 2
           + lam * (1 + chi) * (1 + lam ** 2 * chi) * x ** 3
           + (1 - 2 * lam ** 2 * (1 + chi)) * x ** 4
           + lam * (1 + chi) * x ** 5)
    if p_divides_D:
        val /= 1 - lam * chi * x + x ** 2
    return val


# Dirichlet-series merging

def _e_max(p: int, n_max: int) -> int:
    e, pe = 0, 1
    while pe * p <= n_max:
        pe *= p
        e += 1
    return e


def merge_local_series(n_max: int, local) -> np.ndarray:
    """Dirichlet coefficients c(n), n <= n_max, of prod_p sum_e local(p)[e] p^{-es}."""
    out = np.ones(n_max + 1, dtype=object if _is_exact(local) else float)
    out[0] = 0
    for p in sieves.primes(n_max):
        p = int(p)
        c = local(p, _e_max(p, n_max))
        pe = p
        for e in range(1, len(c)):
            idx = np.arange(pe, n_max + 1, pe)
            idx = idx[(idx // pe) % p != 0]
            out[idx] = out[idx] * c[e]
            pe *= p
        # n with v_p(n) beyond len(c) - 1 cannot occur: len(c) - 1 = e_max
    return out


def _is_exact(local) -> bool:
    return getattr(local, "exact", False)


def coefficient_identity_check(entry: EigenformEntry, D: int, n_max: int = 2000) -> float:
    """Max |coefficient difference| between prod L_p(f) L_p(f x chi) G_p and the
    direct series mu^2(n) lambda(n) r_star(n) [gcd(n, N) = 1], for n <= n_max."""
    if n_max > 10 ** 4:
        raise DomainError("n_max must be <= 10^4")
    if n_max > entry.depth:
        raise DomainError("n_max beyond coefficient depth")

    def local(p: int, e_max: int) -> np.ndarray:
        lam_p = float(entry.lam[p])
        chi_p = qforms.chi_D(D, p)
        in_level = entry.N % p == 0
        acc = hecke_factor(p, lam_p, in_level).series(e_max)
        acc = series_mul(acc, twist_factor(p, chi_p, lam_p, in_level).series(e_max))
        g = np.zeros(e_max + 1)
        poly = G_local_poly(chi_p, lam_p, in_level)
        g[: min(len(poly), e_max + 1)] = poly[: e_max + 1]
        return series_mul(acc, g)

    left = merge_local_series(n_max, local)
    right = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        if math.gcd(n, entry.N) == 1 and _squarefree(n):
            right[n] = entry.lam[n] * qforms.r_star(n, D)
    return float(np.max(np.abs(left[1:] - right[1:])))


def _squarefree(n: int) -> bool:
    return qforms._squarefree(n)


def _omega(n: int) -> int:
    count, p = 0, 2
    while p * p <= n:
        if n % p == 0:
            count += 1
            while n % p == 0:
                n //= p
        p += 1
    return count + (n > 1)


def _P_local_exact(p: int, chi_p: int, eta: int, in_level: bool, e_max: int) -> list[int]:
    """Coefficients of the P(s) local factor, a polynomial in x with integer coefficients."""
    a = [comb(eta, j) * (-1) ** j for j in range(eta + 1)]
    b = [comb(eta, j) * (-chi_p) ** j for j in range(eta + 1)]
    poly = _int_mul(a, b)
    if not in_level:
        poly = _int_mul(poly, [1, eta * (1 + chi_p)])
    return (poly + [0] * (e_max + 1))[: e_max + 1]


def _int_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def D_series_check(eta: int, D: int, N: int, n_max: int = 2000) -> int:
    """Max |coefficient difference| between zeta^eta L^eta P and
    mu^2(n) eta^omega(n) r_star(n) [gcd(n, N) = 1].  Exact integer arithmetic."""
    if n_max > 10 ** 4:
        raise DomainError("n_max must be <= 10^4")
    if eta < 1:
        raise DomainError("eta must be a positive integer")

    def local(p: int, e_max: int) -> list[int]:
        chi_p = qforms.chi_D(D, p)
        zeta = [comb(eta + e - 1, e) for e in range(e_max + 1)]
        lfun = [comb(eta + e - 1, e) * chi_p ** e for e in range(e_max + 1)]
        out = _int_mul(zeta, lfun)[: e_max + 1]
        return _int_mul(out, _P_local_exact(p, chi_p, eta, N % p == 0, e_max))[: e_max + 1]

    local.exact = True
    left = merge_local_series(n_max, local)
    worst = 0
    for n in range(1, n_max + 1):
        right = 0
        if math.gcd(n, N) == 1 and _squarefree(n):
            right = eta ** _omega(n) * qforms.r_star(n, D)
        worst = max(worst, abs(int(left[n]) - right))
    return worst


# Euler product for P(s)

@dataclass(frozen=True)
class EulerProductValue:
    """Truncated Euler product with a bound on |log(full / truncated)|."""

    s: complex
    value: complex
    p_cut: int
    tail_bound: float
    constant: float

    @property
    def lower(self) -> float:
        """Smallest real value consistent with the tail bound (real s only)."""
        return self.value.real * math.exp(-self.tail_bound)

    @property
    def upper(self) -> float:
        return self.value.real * math.exp(self.tail_bound)


def P_tail_constant(eta: int) -> float:
    """C with |log P_p(s)| <= C p^{-2 Re s} once 2 eta p^{-Re s} <= 1/2.

    The first-order terms of log P_p cancel; the quadratic remainders of the
    three logarithms give (eta + 2 eta^2) |x|^2 / (1 - 2 eta |x|) <= 2(eta + 2 eta^2)|x|^2.
    """
    return 2.0 * (eta + 2 * eta * eta)


def P_euler(s: complex, D: int, N: int, eta: int, p_cut: int = DEFAULT_P_CUT) -> EulerProductValue:
    """P(s) = prod_p P_p(s) truncated to p <= p_cut.

    The product is accumulated as a sum of logarithms in ascending prime
    order (deterministic).  tail_bound = C * p_cut^{1-2 sigma} / (2 sigma - 1)
    bounds the neglected log-tail, with C from :func:`P_tail_constant`.
    """
    _check_s(s)
    s = complex(s)
    sigma = s.real
    ps = sieves.primes(p_cut).astype(np.float64)
    chi = qforms.chi_table(D, p_cut)[sieves.primes(p_cut)].astype(np.float64)
    in_level = (N % sieves.primes(p_cut)) == 0
    x = np.exp(-s * np.log(ps))
    logs = eta * np.log1p(-x) + eta * np.log1p(-chi * x)
    logs = logs + np.where(in_level, 0.0, np.log1p(eta * (1 + chi) * x))
    value = cmath.exp(complex(math.fsum(logs.real), math.fsum(logs.imag)))
    C = P_tail_constant(eta)
    big_prime = max((p for p in _prime_factors(N)), default=1)
    if big_prime > p_cut or 2 * eta * p_cut ** (-sigma) > 0.5:
        tail = math.inf
    else:
        tail = C * p_cut ** (1 - 2 * sigma) / (2 * sigma - 1)
    if s.imag == 0:
        value = complex(value.real, 0.0)
    return EulerProductValue(s, value, p_cut, tail, C)


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


# L(1, chi_D)

@dataclass(frozen=True)
class L1Value:
    D: int
    method: str
    value: float
    tail_bound: float


@lru_cache(maxsize=64)
def L1_chi(D: int, method: str = "direct-sum", M: int = L1_DIRECT_TERMS) -> L1Value:
    """L(1, chi_D) by a truncated direct sum or by the class number formula."""
    if D not in qforms.CATALOG_DISCRIMINANTS:
        raise UnsupportedDiscriminantError(f"D={D} not in the catalog")
    if method == "class-number-formula":
        if not qforms.is_fundamental(D):
            raise UnsupportedDiscriminantError(f"class number formula needs fundamental D, got {D}")
        h = qforms.class_number(D)
        w = qforms.unit_count(D)
        return L1Value(D, method, 2 * math.pi * h / (w * math.sqrt(-D)), 0.0)
    if method != "direct-sum":
        raise DomainError(f"unknown method {method!r}")
    m = -D
    period = qforms.chi_table(D, m)
    parts = []
    for r in range(1, m + 1):
        c = int(period[r % m]) if r < m else 0
        if c == 0:
            continue
        n = np.arange(r, M + 1, m, dtype=np.float64)
        parts.append(c * math.fsum(1.0 / n))
    return L1Value(D, method, math.fsum(parts), m / M)


def jsonl_record(check: str, params: dict, **fields) -> str:
    """One JSON-lines report record with stable key order."""
    rec = {"check": check, "params": params}
    rec.update(fields)
    return json.dumps(rec, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")
