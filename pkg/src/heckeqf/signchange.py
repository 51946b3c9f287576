"""Step kernel alpha, minorant h_Y, the sigma(u) delay equation, and first sign changes.

sigma solves u sigma(u) = int_0^u sigma(t) alpha(u - t) dt with sigma(u) ~ u as
u -> 0+.  Two independent solvers are provided:

* :func:`sigma_march` integrates the equation by parts against the jumps of
  alpha and marches a piecewise-linear sigma on a uniform grid;
* :func:`sigma_series` sums (-1)^j / j! I_j(u), each I_j obtained by repeated
  convolution of g(t) = (2 - alpha(t)) / t with product-integration weights.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qforms, sieves
from .errors import DomainError, RangeError, ResolutionError
from .sieves import CoefficientTable

NEG_THRESHOLD = -1e-12
# Neighbouring march values differ by at most SIGMA_LIPSCHITZ * step: from
# sigma + u sigma' = 2 sigma + sum_m J_m sigma(u - 1/m), sum |J_m| = 4 and
# |sigma(t)| <= t one gets |sigma'| <= 5.
SIGMA_LIPSCHITZ = 5.0
_TAIL_M = 10 ** 6


@dataclass(frozen=True)
class StepKernel:
    """alpha(0) = alpha0, alpha = 2cos(pi/(m+1)) on (1/(m+1), 1/m], extension beyond 1."""

    alpha0: float = 2.0
    extension: float = -2.0

    def value(self, m: int) -> float:
        return 2.0 * math.cos(math.pi / (m + 1))

    def jump(self, m: int) -> float:
        """alpha(1/m+) - alpha(1/m) for the breakpoint 1/m."""
        right = self.extension if m == 1 else self.value(m - 1)
        return right - self.value(m)


def _interval_index(t: float) -> int:
    """m with t in (1/(m+1), 1/m], for 0 < t <= 1."""
    m = math.floor(1.0 / t)
    if t <= 1.0 / (m + 1):
        m += 1
    while m > 1 and t > 1.0 / m:
        m -= 1
    return m


def alpha_eval(kernel: StepKernel, t: float) -> float:
    if t < 0:
        raise DomainError(f"alpha undefined at t={t} < 0")
    if t == 0:
        return kernel.alpha0
    if t > 1:
        return kernel.extension
    return kernel.value(_interval_index(t))


def alpha_array(kernel: StepKernel, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("alpha undefined for t < 0")
    out = np.full(t.shape, kernel.extension)
    small = (t > 0) & (t <= 1)
    ts = t[small]
    m = np.floor(1.0 / ts)
    m = np.where(ts <= 1.0 / (m + 1), m + 1, m)
    m = np.where((m > 1) & (ts > 1.0 / m), m - 1, m)
    out[small] = 2.0 * np.cos(np.pi / (m + 1))
    out[t == 0] = kernel.alpha0
    return out


def h_Y(n: int, Y: float, N: int, kernel: StepKernel = StepKernel()) -> float:
    """Multiplicative minorant on squarefree n."""
    if n < 1:
        raise DomainError("n must be positive")
    if Y <= 1:
        raise DomainError("Y must exceed 1")
    out, p, m = 1.0, 2, n
    primes = []
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                raise DomainError(f"{n} is not squarefree")
            primes.append(p)
        p += 1
    if m > 1:
        primes.append(m)
    logY = math.log(Y)
    for p in primes:
        if N % p == 0:
            return 0.0
        out *= alpha_eval(kernel, math.log(p) / logY) if p <= Y else kernel.extension
    return out


def _prime_alphas(table: CoefficientTable, Y: float, limit: int, kernel: StepKernel):
    ps = sieves.primes(limit)
    vals = np.where(ps <= Y, alpha_array(kernel, np.log(ps) / math.log(Y)), kernel.extension)
    vals = np.where(table.N % ps == 0, 0.0, vals)
    return ps, vals


def _h_table(table: CoefficientTable, Y: float, limit: int, kernel: StepKernel) -> np.ndarray:
    """h_Y(n) for squarefree n <= limit (other entries unspecified)."""
    h = np.ones(limit + 1)
    ps, vals = _prime_alphas(table, Y, limit, kernel)
    rs = table.r_star
    for p, v in zip(ps.tolist(), vals.tolist()):
        if rs[p] == 0 and table.N % p:
            continue  # r_star vanishes on every multiple of p anyway
        if v != 1.0:
            h[p::p] *= v
    return h


def power_floor(Y: float, u: float) -> int:
    val = Y ** u
    return int(math.floor(val * (1 + 1e-12)))


def minorant_sum(table: CoefficientTable, Y: float, u: float, kernel: StepKernel = StepKernel()) -> float:
    """sum over squarefree n <= Y^u coprime to N of h_Y(n) r_star(n)."""
    limit = power_floor(Y, u)
    if limit > table.X_max:
        raise RangeError(f"Y^u = {limit} beyond table bound {table.X_max}")
    if limit < 2:
        return 1.0
    h = _h_table(table, Y, limit, kernel)
    mask = table.mu_sq[: limit + 1] & table.coprime_N[: limit + 1]
    terms = np.where(mask, h * table.r_star[: limit + 1], 0.0)
    return math.fsum(terms[1:].tolist())


# sigma(u)

@dataclass
class SigmaSolution:
    grid: np.ndarray
    values: np.ndarray
    method: str
    step: float
    params: dict = field(default_factory=dict)

    def at(self, u: float) -> float:
        """Linear interpolation on the grid."""
        if u < 0 or u > self.grid[-1] + 1e-12:
            raise RangeError(f"u={u} outside grid")
        return float(np.interp(u, self.grid, self.values))


def _jump_moments(kernel: StepKernel, m_lo: int, step: float) -> tuple[float, float, float]:
    """sum_{m >= m_lo} J_m theta_m^i for i = 0, 1, 2 where theta_m = 1 - 1/(m step)."""
    m = np.arange(m_lo, _TAIL_M + 1, dtype=float)
    right = np.where(m == 1, kernel.extension, 2 * np.cos(np.pi / m))
    J = right - 2 * np.cos(np.pi / (m + 1))
    theta = 1 - 1 / (m * step)
    # beyond _TAIL_M: J_m ~ 2 pi^2 / m^3 and theta_m ~ 1
    tail = math.pi ** 2 / _TAIL_M ** 2
    return (math.fsum(J) + tail, math.fsum(J * theta) + tail, math.fsum(J * theta ** 2) + tail)


def sigma_march(kernel: StepKernel = StepKernel(), u_max: float = 4 / 3, step: float = 1e-3,
                initial_segment: float | None = None) -> SigmaSolution:
    """March sigma on a uniform grid.

    Integrating by parts against the jumps J_m of alpha at 1/m gives
    u sigma(u) = alpha0 Sigma(u) + sum_m J_m Sigma(u - 1/m), Sigma the integral
    of sigma.  With sigma piecewise linear Sigma is exact on every cell; the
    infinitely many jumps that fall inside the newest cell enter through the
    moments from :func:`_jump_moments`.

    sigma(u) = u is imposed on [0, initial_segment]; the default is one grid
    step, which reproduces the small-u behaviour sigma(u) = u + O(u^3).
    """
    if step > 1e-3:
        raise ResolutionError(f"step {step} > 1e-3 cannot resolve the breakpoints near u")
    if u_max > 2:
        raise DomainError("u_max must be <= 2")
    n = int(math.ceil(u_max / step - 1e-9))
    if initial_segment is not None:
        # refine until the end of the imposed segment is a grid point
        for cand in range(n, n + 1000):
            x = initial_segment * cand / u_max
            if abs(x - round(x)) < 1e-9:
                n = cand
                break
    h = u_max / n
    u = np.arange(n + 1) * h
    seed = h if initial_segment is None else initial_segment
    sigma = np.zeros(n + 1)
    S = np.zeros(n + 1)  # exact integral of the piecewise-linear sigma
    a0 = kernel.alpha0
    m_h = math.ceil(1 / h - 1e-12)  # smallest m with 1/m <= h
    T0, T1, T2 = _jump_moments(kernel, m_h, h)
    ms = np.arange(1, m_h, dtype=float)
    right = np.where(ms == 1, kernel.extension, 2 * np.cos(np.pi / ms))
    J = right - 2 * np.cos(np.pi / (ms + 1))
    for i in range(1, n + 1):
        if u[i] <= seed + 1e-12:
            sigma[i] = u[i]
            S[i] = S[i - 1] + h * (sigma[i - 1] + sigma[i]) / 2
            continue
        # known part: breakpoints 1/m with h < 1/m < u_i
        sel = 1 / ms < u[i] - 1e-15
        x = u[i] - 1 / ms[sel]
        j = np.minimum((x / h).astype(int), i - 1)
        th = x / h - j
        Sig = S[j] + h * (sigma[j] * th + (sigma[j + 1] - sigma[j]) * th * th / 2)
        K = float(np.dot(J[sel], Sig))
        rhs = a0 * (S[i - 1] + h * sigma[i - 1] / 2) + K + T0 * S[i - 1] + h * sigma[i - 1] * (T1 - T2 / 2)
        sigma[i] = rhs / (u[i] - a0 * h / 2 - h * T2 / 2)
        S[i] = S[i - 1] + h * (sigma[i - 1] + sigma[i]) / 2
    return SigmaSolution(u, sigma, "march", h, {"initial_segment": seed, "u_max": u_max})


def _g_cumulative(kernel: StepKernel, t: np.ndarray):
    """G0(t) = int_0^t g and G1(t) = int_0^t g(s) s ds for g(s) = (alpha0 - alpha(s))/s."""
    t = np.asarray(t, dtype=float)
    m_all = np.arange(1, _TAIL_M + 1, dtype=float)
    c = kernel.alpha0 - 2 * np.cos(np.pi / (m_all + 1))
    # piece m spans (1/(m+1), 1/m]
    piece0 = c * np.log((m_all + 1) / m_all)
    piece1 = c * (1 / m_all - 1 / (m_all + 1))
    # B0[m-1] = int_0^{1/m} g  (sum over pieces m' >= m)
    B0 = np.cumsum(piece0[::-1])[::-1]
    B1 = np.cumsum(piece1[::-1])[::-1]
    G0 = np.zeros_like(t)
    G1 = np.zeros_like(t)
    big = t > 1
    G0[big] = B0[0] + (kernel.alpha0 - kernel.extension) * np.log(t[big])
    G1[big] = B1[0] + (kernel.alpha0 - kernel.extension) * (t[big] - 1)
    small = (t > 0) & ~big
    ts = t[small]
    m = np.floor(1.0 / ts)
    m = np.where(ts <= 1.0 / (m + 1), m + 1, m)
    m = np.where((m > 1) & (ts > 1.0 / m), m - 1, m).astype(int)
    if np.any(m >= _TAIL_M):
        raise ResolutionError("grid finer than the tabulated breakpoints")
    cm = c[m - 1]
    base0 = B0[m]  # int_0^{1/(m+1)} g
    base1 = B1[m]
    G0[small] = base0 + cm * np.log(ts * (m + 1))
    G1[small] = base1 + cm * (ts - 1 / (m + 1))
    return G0, G1


def simplex_integrals(kernel: StepKernel, u: float, j_max: int, step: float = 1e-4) -> tuple[np.ndarray, list[np.ndarray]]:
    """Grid v and K_j(v) = I_j(v) for j = 0..j_max, with K_0(v) = v^(alpha0 - 1).

    K_j(v) = int_0^v g(t) K_{j-1}(v - t) dt, with K_{j-1} taken piecewise linear
    on the grid and g integrated exactly against each hat function.
    """
    n = int(math.ceil(u / step - 1e-9))
    h = u / n
    v = np.arange(n + 1) * h
    G0, G1 = _g_cumulative(kernel, v)
    d0 = np.diff(G0)
    d1 = np.diff(G1)
    # left part of hat l on [v_{l-1}, v_l]; right part on [v_l, v_{l+1}]
    left = (d1 - v[:-1] * d0) / h      # indexed by l-1
    right = (v[1:] * d0 - d1) / h      # indexed by l
    W = np.zeros(n + 1)
    W[0] = right[0]
    W[1:n] = left[: n - 1] + right[1:n]
    W[n] = left[n - 1]
    K = [v ** (kernel.alpha0 - 1)]
    for _ in range(j_max):
        K.append(np.convolve(W, K[-1])[: n + 1])
    return v, K


def sigma_series(kernel: StepKernel = StepKernel(), u: float = 4 / 3, j_max: int = 4,
                 step: float = 1e-4) -> float:
    """u^(alpha0-1) + sum_{j=1}^{j_max} (-1)^j / j! I_j(u)."""
    if u > 4 / 3 + 1e-12:
        raise DomainError("series evaluation supported for u <= 4/3")
    if not 0 <= j_max <= 4:
        raise DomainError("j_max must be in 0..4")
    if u <= 0:
        return 0.0
    _, K = simplex_integrals(kernel, u, j_max, step)
    return float(sum((-1) ** j / math.factorial(j) * K[j][-1] for j in range(j_max + 1)))


def sigma_series_grid(kernel: StepKernel, u_max: float, j_max: int = 4, step: float = 1e-4):
    v, K = simplex_integrals(kernel, u_max, j_max, step)
    return v, sum((-1) ** j / math.factorial(j) * K[j] for j in range(j_max + 1))


def sigma_csv(march: SigmaSolution, j_max: int = 4, series_step: float = 1e-4) -> str:
    """Rows (u, sigma_march, sigma_series) on the march grid."""
    v, ser = sigma_series_grid(StepKernel(), min(float(march.grid[-1]), 4 / 3), j_max, series_step)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "sigma_march", "sigma_series"])
    for u, s in zip(march.grid.tolist(), march.values.tolist()):
        sv = repr(float(np.interp(u, v, ser))) if u <= v[-1] + 1e-12 else ""
        w.writerow([f"{u:.6f}", repr(s), sv])
    return buf.getvalue()


# Satake step property and the g convolution

def satake_step_counterexamples(m: int, resolution: float = 1e-5) -> np.ndarray:
    """theta on (0, pi) where lambda(p^j) >= 0 for j <= m but 2cos(theta) is below
    2cos(pi/(m+1)) by more than the grid tolerance."""
    if not 1 <= m <= 20:
        raise DomainError("m must be in 1..20")
    theta = np.arange(resolution, math.pi, resolution)
    s = np.sin(theta)
    ok = np.ones_like(theta, dtype=bool)
    for j in range(1, m + 1):
        ok &= np.sin((j + 1) * theta) / s >= 0
    tol = 2 * resolution
    bad = ok & (2 * np.cos(theta) < 2 * math.cos(math.pi / (m + 1)) - tol)
    return theta[bad]


def satake_step_property(m: int, resolution: float = 1e-5) -> bool:
    return satake_step_counterexamples(m, resolution).size == 0


@dataclass
class ConvolutionCheck:
    Y: float
    hypothesis_holds: bool
    synthetic: bool
    theta: float | None
    primes_ok: bool
    worst_prime: int | None
    worst_g: float
    sum_lambda: float
    sum_h: float
    identity_deviation: float

    @property
    def passed(self) -> bool:
        return self.primes_ok and self.sum_lambda >= self.sum_h


def prime_power_lambda(theta: float, j: int) -> float:
    s = math.sin(theta)
    if abs(s) < 1e-15:
        return float(j + 1)
    return math.sin((j + 1) * theta) / s


def hypothesis_holds(lam: np.ndarray, table: CoefficientTable, Y: float) -> bool:
    """lambda(p^j) >= 0 for every represented prime power p^j <= Y coprime to N."""
    limit = min(int(Y), table.X_max)
    for p in sieves.primes(limit).tolist():
        if table.N % p == 0 or table.r_star[p] == 0:
            continue
        pe = p
        while pe <= limit:
            if lam[pe] < 0:
                return False
            pe *= p
    return True


def synthetic_lambda(X: int, theta: float, N: int = 1) -> np.ndarray:
    """Multiplicative lambda with Satake angle theta at every prime p not dividing N."""
    out = np.ones(X + 1)
    out[0] = 0.0
    for p in sieves.primes(X).tolist():
        pe, e = p, 1
        while pe <= X:
            val = (math.cos(theta) * 2) ** e if N % p == 0 else prime_power_lambda(theta, e)
            idx = np.arange(pe, X + 1, pe)
            idx = idx[(idx // pe) % p != 0]
            out[idx] *= val
            pe *= p
            e += 1
    return out


def g_convolution_check(table: CoefficientTable, Y: float, kernel: StepKernel = StepKernel(),
                        theta: float = math.pi / 4, X: int | None = None,
                        identity_bound: int = 2000) -> ConvolutionCheck:
    """g_Q(p) >= 0 at primes and sum lambda* >= sum h* over n <= X.

    The hypothesis lambda(p^j) >= 0 is tested on the table's lambda first;
    if it fails, a synthetic multiplicative lambda with Satake angle
    ``theta`` is used instead.  The convolution identity
    lambda*(n) = sum_{d | n} g(d) h*(n/d) is also checked directly for
    squarefree n <= identity_bound.
    """
    X = table.X_max if X is None else min(X, table.X_max)
    lam = table.lam[: X + 1]
    synthetic = False
    ok = hypothesis_holds(table.lam, table, Y)
    if not ok:
        lam = synthetic_lambda(X, theta, table.N)
        synthetic = True
    rs = table.r_star[: X + 1].astype(float)
    ps = sieves.primes(X)
    hp = np.where(ps <= Y, alpha_array(kernel, np.log(ps) / math.log(Y)), kernel.extension)
    hp = np.where(table.N % ps == 0, 0.0, hp)
    cop = table.N % ps != 0
    g = (lam[ps] - hp) * rs[ps]
    g = np.where(cop, g, 0.0)
    worst_idx = int(np.argmin(g)) if len(g) else -1
    worst_g = float(g[worst_idx]) if len(g) else 0.0
    primes_ok = worst_g >= -1e-12
    mask = table.mu_sq[: X + 1] & table.coprime_N[: X + 1]
    h = _h_table(table, Y, X, kernel)
    sum_lam = math.fsum(np.where(mask, lam * rs, 0.0).tolist())
    sum_h = math.fsum(np.where(mask, h * rs, 0.0).tolist())
    dev = _convolution_identity_deviation(lam, h, rs, mask, min(identity_bound, X))
    return ConvolutionCheck(Y, ok, synthetic, theta if synthetic else None, bool(primes_ok),
                            int(ps[worst_idx]) if len(g) else None, worst_g,
                            sum_lam, sum_h, dev)


def _convolution_identity_deviation(lam, h, rs, mask, bound: int) -> float:
    """max over squarefree n <= bound of |lambda*(n) - sum_{d|n} g(d) h*(n/d)|,
    with g built from its prime values and extended multiplicatively."""
    g = np.zeros(bound + 1)
    hstar = np.where(mask[: bound + 1], h[: bound + 1] * rs[: bound + 1], 0.0)
    lstar = np.where(mask[: bound + 1], lam[: bound + 1] * rs[: bound + 1], 0.0)
    g[1] = 1.0
    for n in range(2, bound + 1):
        if not mask[n]:
            continue
        f = qforms.divisors(n)
        prime_factors = [p for p in f[1:] if all(p % q for q in range(2, math.isqrt(p) + 1))]
        g[n] = math.prod(lstar[p] - hstar[p] for p in prime_factors)
    worst = 0.0
    for n in range(1, bound + 1):
        if not mask[n]:
            continue
        conv = sum(g[d] * hstar[n // d] for d in qforms.divisors(n))
        worst = max(worst, abs(conv - lstar[n]))
    return worst


# First sign change

@dataclass
class SignChangeRecord:
    label: str
    N: int
    k: int
    D: int
    scan_bound: int
    squarefree_only: bool
    n_first: int | None = None
    witness: tuple[int, int] | None = None
    lambda_value: float | None = None
    coefficient_sign: int | None = None
    bound: float = 0.0
    ratio: float | None = None

    @property
    def found(self) -> bool:
        return self.n_first is not None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def find_witness(form: qforms.QuadForm, n: int) -> tuple[int, int] | None:
    """Some (x, y) with form(x, y) = n, preferring x >= 0, y >= 0."""
    a, b, c, D = form.a, form.b, form.c, form.D
    ymax = math.isqrt(4 * a * n // -D)
    found = None
    for y in sorted(range(-ymax, ymax + 1), key=lambda t: (abs(t), t < 0)):
        disc = D * y * y + 4 * a * n
        s = math.isqrt(disc) if disc >= 0 else -1
        if s < 0 or s * s != disc:
            continue
        for root in (s, -s):
            num = -b * y + root
            if num % (2 * a) == 0:
                x = num // (2 * a)
                if form(x, y) == n:
                    if x >= 0 and y >= 0:
                        return (x, y)
                    found = found or (x, y)
    return found


def first_sign_change(table: CoefficientTable, squarefree: bool = True) -> SignChangeRecord:
    """Least n <= X_max coprime to N and represented by the principal form with lambda(n) < 0.

    ``squarefree`` restricts the scan to squarefree n, the index set of every
    sum in this package.  lambda(n) < -1e-12 counts as negative; closer to
    zero the exact sign of a(n) decides.  Representation is decided by the
    lattice count, never by the divisor formula.
    """
    form = table.form
    bound = (table.N * table.k ** 2 * table.D ** 2) ** 0.75
    rec = SignChangeRecord(table.label, table.N, table.k, table.D, table.X_max, squarefree, bound=bound)
    lam = table.lam
    neg = (lam < NEG_THRESHOLD) | ((np.abs(lam) <= -NEG_THRESHOLD) & (table.a_sign < 0))
    cand = neg & table.coprime_N
    if squarefree:
        cand &= table.mu_sq
    for n in np.flatnonzero(cand).tolist():
        if qforms.lattice_count(form, n) > 0:
            rec.n_first = n
            rec.witness = find_witness(form, n)
            rec.lambda_value = float(lam[n])
            rec.coefficient_sign = int(table.a_sign[n])
            rec.ratio = n / bound
            break
    return rec
