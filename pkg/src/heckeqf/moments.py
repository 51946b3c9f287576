"""Checkpointed squarefree sums S*(X) and E_eta(X), main terms and slope fits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dirichlet, qforms
from .eigenforms import EigenformEntry
from .errors import DomainError, InsufficientDataError, RangeError
from .sieves import CoefficientTable

MIN_CHECKPOINTS = 8
MIN_USABLE = 4


def dyadic_checkpoints(X_max: int, start_exp: int = 10, per_octave: int = 1) -> list[int]:
    """2^(j/per_octave) rounded down, from 2^start_exp through X_max."""
    out = []
    j = start_exp * per_octave
    while True:
        X = int(math.floor(2.0 ** (j / per_octave) + 1e-9))
        if X > X_max:
            break
        if not out or X > out[-1]:
            out.append(X)
        j += 1
    return out


def _validate_checkpoints(checkpoints, X_max: int) -> list[int]:
    cps = [int(x) for x in checkpoints]
    if not cps:
        raise DomainError("no checkpoints")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise DomainError("checkpoints must be strictly increasing")
    if cps[0] < 1:
        raise DomainError("checkpoints must be >= 1")
    if cps[-1] > X_max:
        raise RangeError(f"checkpoint {cps[-1]} beyond table bound {X_max}")
    return cps


def checkpoint_sums(weights: np.ndarray, checkpoints: list[int]) -> list[float]:
    """Partial sums sum_{1<=n<=X} weights[n] at each checkpoint.

    Each segment between checkpoints is summed with math.fsum and kept as a
    (rounded sum, rounding residual) pair; the running total is the fsum of
    all pairs, so rounding of one segment cannot hide a cancellation in a
    later one.
    """
    out, segments, prev = [], [], 0
    for X in checkpoints:
        seg = weights[prev + 1:X + 1].tolist()
        hi = math.fsum(seg)
        seg.append(-hi)
        segments.extend((hi, math.fsum(seg)))
        out.append(math.fsum(segments))
        prev = X
    return out


@dataclass
class SumReport:
    label: str
    N: int
    k: int
    D: int
    kind: str
    checkpoints: list[tuple[int, float]]
    eta: int | None = None
    w_D: int = 2
    main_term: list[tuple[int, float]] | None = None
    fitted_slope: float | None = None
    bound_constant: list[tuple[int, float]] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = [x for x, _ in self.checkpoints]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise DomainError("checkpoints must be strictly increasing")
        if not all(math.isfinite(v) for _, v in self.checkpoints):
            raise DomainError("non-finite checkpoint value")

    @property
    def X(self) -> list[int]:
        return [x for x, _ in self.checkpoints]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.checkpoints]

    def value_at(self, X: int) -> float:
        for x, v in self.checkpoints:
            if x == X:
                return v
        raise KeyError(X)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        main = dict(self.main_term or [])
        if self.kind == "S":
            w.writerow(["X", "S_star", "w_D_S", "main_term", "ratio"])
            for X, v in self.checkpoints:
                env = main.get(X)
                ratio = abs(v) / env if env else ""
                w.writerow([X, repr(v), repr(self.w_D * v), repr(env) if env else "", repr(ratio) if ratio != "" else ""])
        else:
            w.writerow(["X", "E_eta", "main_term", "ratio"])
            for X, v in self.checkpoints:
                m = main.get(X)
                w.writerow([X, repr(v), repr(m) if m else "", repr(v / m) if m else ""])
        return buf.getvalue()

    def summary(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = [list(c) for c in self.checkpoints]
        if self.main_term is not None:
            d["main_term"] = [list(c) for c in self.main_term]
        if self.bound_constant is not None:
            d["bound_constant"] = [list(c) for c in self.bound_constant]
        return d

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def level_constant(N: int, k: int, D: int) -> float:
    return math.sqrt(N * k * k * abs(D))


def sum_S(table: CoefficientTable, checkpoints) -> SumReport:
    """S*(X) = sum over squarefree n <= X coprime to N of lambda(n) r_star(n).

    The envelope (N k^2 |D| X)^{1/2} is stored as ``main_term`` and the ratio
    |S*| / envelope as ``bound_constant``.
    """
    cps = _validate_checkpoints(checkpoints, table.X_max)
    mask = table.mu_sq & table.coprime_N
    weights = np.where(mask, table.lam * table.r_star, 0.0)
    values = checkpoint_sums(weights, cps)
    c = level_constant(table.N, table.k, table.D)
    envelope = [(X, c * math.sqrt(X)) for X in cps]
    return SumReport(
        label=table.label, N=table.N, k=table.k, D=table.D, kind="S",
        checkpoints=list(zip(cps, values)), w_D=table.w_D,
        main_term=envelope,
        bound_constant=[(X, abs(v) / e) for (X, v), (_, e) in zip(zip(cps, values), envelope)],
    )


def sum_E(table: CoefficientTable, eta: int, checkpoints, with_main_term: bool = False,
          p_cut: int = dirichlet.DEFAULT_P_CUT) -> SumReport:
    """E_eta(X) = sum over squarefree n <= X coprime to N of eta^omega(n) r_star(n).

    Every term is a nonnegative integer, so the running sum is exact.
    """
    if eta < 1:
        raise DomainError("eta must be a positive integer")
    cps = _validate_checkpoints(checkpoints, table.X_max)
    mask = table.mu_sq & table.coprime_N
    weights = np.where(mask, np.power(np.int64(eta), table.omega.astype(np.int64)) * table.r_star, 0)
    csum = np.cumsum(weights.astype(np.int64))
    values = [float(csum[X]) for X in cps]
    main = None
    if with_main_term:
        main = [(X, main_term_E(eta, table.D, table.N, X, p_cut)) for X in cps if X >= 3]
    return SumReport(
        label=table.label, N=table.N, k=table.k, D=table.D, kind="E", eta=eta,
        checkpoints=list(zip(cps, values)), w_D=table.w_D, main_term=main,
        params={"p_cut": p_cut, "L1_terms": dirichlet.L1_DIRECT_TERMS} if with_main_term else {},
    )


def main_term_E(eta: int, D: int, N: int, X: float, p_cut: int = dirichlet.DEFAULT_P_CUT) -> float:
    """P(1) L(1, chi_D)^eta / (eta-1)! * X (log X)^(eta-1)."""
    if X < 3 and not math.isclose(X, math.e):
        raise DomainError("main term needs X >= 3")
    P1 = dirichlet.P_euler(1, D, N, eta, p_cut).value.real
    L1 = dirichlet.L1_chi(D).value
    return P1 * L1 ** eta / math.factorial(eta - 1) * X * math.log(X) ** (eta - 1)


def fit_slope(report: SumReport, x_min: float | None = None, x_max: float | None = None) -> float:
    """Least-squares slope of log|value| against log X.

    The report must carry at least 8 checkpoints.  The fit uses those in
    [x_min, x_max] with |value| >= 1; fewer than 4 such points is an error.
    """
    if len(report.checkpoints) < MIN_CHECKPOINTS:
        raise InsufficientDataError(f"{len(report.checkpoints)} checkpoints < {MIN_CHECKPOINTS}")
    if all(v == 0 for v in report.values):
        raise InsufficientDataError("all values are zero")
    pts = [(X, v) for X, v in report.checkpoints
           if (x_min is None or X >= x_min) and (x_max is None or X <= x_max) and abs(v) >= 1]
    if len(pts) < MIN_USABLE:
        raise InsufficientDataError(f"only {len(pts)} usable checkpoints")
    lx = np.log([float(X) for X, _ in pts])
    ly = np.log([abs(v) for _, v in pts])
    slope = np.polyfit(lx, ly, 1)[0]
    report.fitted_slope = float(slope)
    return float(slope)


# Sieve-free reference evaluators, one term at a time.

def _factor(n: int) -> dict[int, int]:
    out, p = {}, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def brute_force_S(entry: EigenformEntry, D: int, X: int) -> float:
    total = []
    for n in range(1, X + 1):
        f = _factor(n)
        if any(e > 1 for e in f.values()) or math.gcd(n, entry.N) != 1:
            continue
        total.append(entry.lambda_(n) * qforms.r_star(n, D))
    return math.fsum(total)


def brute_force_E(eta: int, D: int, N: int, X: int) -> int:
    total = 0
    for n in range(1, X + 1):
        f = _factor(n)
        if any(e > 1 for e in f.values()) or math.gcd(n, N) != 1:
            continue
        total += eta ** len(f) * qforms.r_star(n, D)
    return total
