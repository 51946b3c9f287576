"""Positive-definite binary quadratic forms and their representation numbers.

Covers reduction, enumeration of reduced forms (class numbers), the Kronecker
character ``chi_D`` and two independent routes to ``r_Q(n)``: the divisor-sum
formula valid for class number one, and direct lattice enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, UnsupportedDiscriminantError

# Class-number-one discriminants used throughout.
FUNDAMENTAL_H1 = (-3, -4, -7, -8, -11, -19, -43, -67, -163)
NONFUNDAMENTAL_H1 = (-12, -16, -27, -28)
CATALOG_DISCRIMINANTS = tuple(sorted(FUNDAMENTAL_H1 + NONFUNDAMENTAL_H1, reverse=True))


@dataclass(frozen=True)
class QuadForm:
    """The form a*x^2 + b*x*y + c*y^2."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.D >= 0 or self.a <= 0:
            raise DomainError(f"{self} is not positive definite")
        if math.gcd(math.gcd(self.a, self.b), self.c) != 1:
            raise DomainError(f"{self} is not primitive")

    @property
    def D(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @property
    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True

    def __call__(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.a, self.b, self.c)

    def __str__(self) -> str:
        return f"({self.a},{self.b},{self.c})"


def _check_discriminant(D: int) -> None:
    if D >= 0 or D % 4 not in (0, 1):
        raise DomainError(f"D={D} is not a negative discriminant (need D<0, D = 0,1 mod 4)")


def reduce_form(f: QuadForm) -> QuadForm:
    """Return the unique reduced form properly equivalent to ``f``."""
    a, b, c = f.a, f.b, f.c
    while True:
        # b into (-a, a]
        if not (-a < b <= a):
            k = (a - b) // (2 * a)
            c = a * k * k + b * k + c
            b = b + 2 * a * k
        if a > c:
            a, b, c = c, -b, a
            continue
        break
    if a == c and b < 0:
        b = -b
    return QuadForm(a, b, c)


@lru_cache(maxsize=None)
def _reduced_forms(D: int) -> tuple[QuadForm, ...]:
    forms = []
    amax = math.isqrt(-D // 3)
    for a in range(1, amax + 1):
        for b in range(-a + 1, a + 1):
            if (b - D) % 2:
                continue
            num = b * b - D
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (a == c and b < 0):
                continue
            if math.gcd(math.gcd(a, b), c) != 1:
                continue
            forms.append(QuadForm(a, b, c))
    return tuple(forms)


def enumerate_reduced_forms(D: int) -> list[QuadForm]:
    """All primitive reduced forms of discriminant ``D``; ``len`` is h(D)."""
    _check_discriminant(D)
    return list(_reduced_forms(D))


def class_number(D: int) -> int:
    return len(enumerate_reduced_forms(D))


def unit_count(D: int) -> int:
    """w_D: 6 for D=-3, 4 for D=-4, 2 otherwise."""
    _check_discriminant(D)
    return {-3: 6, -4: 4}.get(D, 2)


def is_fundamental(D: int) -> bool:
    _check_discriminant(D)
    if D % 4 == 1:
        return _squarefree(-D)
    m = D // 4
    return m % 4 in (2, 3) and _squarefree(-m)


def _squarefree(n: int) -> bool:
    n = abs(n)
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        if n % p == 0:
            n //= p
        p += 1
    return True


@dataclass(frozen=True)
class ClassNumberRecord:
    D: int
    forms: tuple[QuadForm, ...]
    w_D: int

    @property
    def h(self) -> int:
        return len(self.forms)


def class_record(D: int) -> ClassNumberRecord:
    return ClassNumberRecord(D, tuple(enumerate_reduced_forms(D)), unit_count(D))


def principal_form(D: int) -> QuadForm:
    """The reduced form of a class-number-one discriminant."""
    forms = enumerate_reduced_forms(D)
    if len(forms) != 1:
        raise UnsupportedDiscriminantError(f"h({D}) = {len(forms)} != 1")
    return forms[0]


def kronecker(D: int, d: int) -> int:
    """Kronecker symbol (D/d) for d >= 1."""
    if d < 1:
        raise DomainError("kronecker symbol needs d >= 1")
    if d == 1:
        return 1
    if D % 2 == 0 and d % 2 == 0:
        return 0
    result = 1
    while d % 2 == 0:
        d //= 2
        if D % 8 in (3, 5):
            result = -result
    # Jacobi symbol (D/d) for odd d
    a = D % d
    while a:
        while a % 2 == 0:
            a //= 2
            if d % 8 in (3, 5):
                result = -result
        a, d = d, a
        if a % 4 == 3 and d % 4 == 3:
            result = -result
        a %= d
    return result if d == 1 else 0


def chi_D(D: int, d: int) -> int:
    """The character chi_D(d) = (D/d)."""
    return kronecker(D, d)


@lru_cache(maxsize=64)
def _chi_period(D: int) -> np.ndarray:
    m = abs(D)
    table = np.array([0] + [kronecker(D, d) for d in range(1, m)], dtype=np.int8)
    return table


def chi_table(D: int, n_max: int) -> np.ndarray:
    """``chi_D(n)`` for 0 <= n <= n_max (entry 0 is 0), using |D|-periodicity."""
    period = _chi_period(D)
    out = np.resize(period, n_max + 1)
    out[0] = 0
    return out


def divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def r_star(n: int, D: int) -> int:
    """Sum of chi_D(d) over divisors d of n."""
    if n < 1:
        raise DomainError("n must be positive")
    return sum(chi_D(D, d) for d in divisors(n))


def r_Q(n: int, D: int) -> int:
    """Representation number from the divisor formula ``w_D * r_star``.

    Only asserted for class number one; other discriminants are rejected.
    """
    principal_form(D)
    return unit_count(D) * r_star(n, D)


def r_star_table(D: int, n_max: int) -> np.ndarray:
    """``r_star(n, D)`` for all n <= n_max by divisor-sum convolution."""
    chi = chi_table(D, n_max)
    out = np.zeros(n_max + 1, dtype=np.int64)
    for d in np.flatnonzero(chi):
        out[d::d] += chi[d]
    return out


def r_Q_table(D: int, n_max: int) -> np.ndarray:
    principal_form(D)
    return unit_count(D) * r_star_table(D, n_max)


def lattice_count(f: QuadForm, n: int) -> int:
    """Number of (x, y) in Z^2 with f(x, y) = n, by exact enumeration over y."""
    if n < 1:
        raise DomainError("n must be positive")
    a, b, c, D = f.a, f.b, f.c, f.D
    # f(x,y)=n solvable in x only if D*y^2 + 4*a*n >= 0
    ymax = math.isqrt(4 * a * n // -D)
    count = 0
    for y in range(-ymax, ymax + 1):
        disc = D * y * y + 4 * a * n
        if disc < 0:
            continue
        s = math.isqrt(disc)
        if s * s != disc:
            continue
        for root in {s, -s}:
            num = -b * y + root
            if num % (2 * a) == 0:
                count += 1
    return count


def lattice_counts(f: QuadForm, n_max: int) -> np.ndarray:
    """Histogram of f over all lattice points with f(x, y) <= n_max."""
    a, b, c, D = f.a, f.b, f.c, f.D
    counts = np.zeros(n_max + 1, dtype=np.int64)
    ymax = math.isqrt(4 * a * n_max // -D)
    for y in range(-ymax, ymax + 1):
        disc = D * y * y + 4 * a * n_max
        if disc < 0:
            continue
        s = math.isqrt(disc)
        lo = (-b * y - s) // (2 * a) - 1
        hi = (-b * y + s) // (2 * a) + 1
        x = np.arange(lo, hi + 1, dtype=np.int64)
        vals = a * x * x + b * x * y + c * y * y
        vals = vals[vals <= n_max]
        counts += np.bincount(vals, minlength=n_max + 1)
    return counts
