import cmath
import math

import numpy as np
import pytest

from heckeqf import dirichlet, qforms
from heckeqf.errors import ConvergenceError, DomainError, UnsupportedDiscriminantError


def direct_product(s, D, N, eta, p_cut):
    """Plain running product over primes, as an oracle for the log-sum."""
    val = 1.0
    for p in range(2, p_cut + 1):
        if all(p % q for q in range(2, math.isqrt(p) + 1)):
            x = p ** -s
            chi = qforms.chi_D(D, p)
            f = (1 - x) ** eta * (1 - chi * x) ** eta
            if N % p:
                f *= 1 + eta * (1 + chi) * x
            val *= f
    return val


class TestLocalFactors:
    def test_display_matches_ratio_when_chi_nonzero(self):
        rng = np.random.default_rng(3)
        for chi in (1, -1):
            for _ in range(50):
                lam = rng.uniform(-2, 2)
                x = rng.uniform(-0.7, 0.7)
                poly = dirichlet.G_local_poly(chi, lam, False)
                ratio = np.polyval(poly[::-1], x)
                shown = dirichlet.displayed_G_factor(chi, lam, False, False, x)
                assert ratio == pytest.approx(shown, abs=1e-12)

    def test_display_differs_at_ramified_prime(self):
        lam, x = 0.7, 0.3
        ratio = np.polyval(dirichlet.G_local_poly(0, lam, False)[::-1], x)
        shown = dirichlet.displayed_G_factor(0, lam, False, True, x)
        assert abs(ratio - shown) > 1e-3

    def test_ratio_form_expansion(self):
        # (1 + lam(1+chi)x)(1 - lam x + x^2)(1 - lam chi x + chi^2 x^2), expanded by hand for chi = 1
        lam = 0.4
        expect = np.array([1, 0, 2 - 3 * lam ** 2, 2 * lam * (1 + lam ** 2), 1 - 4 * lam ** 2, 2 * lam])
        assert np.allclose(dirichlet.G_local_poly(1, lam, False), expect)

    def test_local_G_examples(self):
        assert dirichlet.local_G(3, 0, 0.5, False, 2.0) == pytest.approx(1 + 0.75 / 81 + 0.5 / 729)
        # chi(p) = 0: G_p = (1 + lam x)(1 - lam x + x^2)
        with pytest.raises(ConvergenceError):
            dirichlet.local_G(3, 1, 0.5, False, 0.5)

    def test_hecke_factor_series(self):
        f = dirichlet.hecke_factor(2, 0.3, False).series(6)
        # 1/(1 - lam x + x^2) = sum U_e(lam/2) x^e
        th = math.acos(0.15)
        assert np.allclose(f, [math.sin((e + 1) * th) / math.sin(th) for e in range(7)])


class TestIdentities:
    def test_coefficient_identity(self, small_forms):
        for ent in small_forms.values():
            for D in (-3, -4, -7, -8, -163):
                assert dirichlet.coefficient_identity_check(ent, D, 2000) < 1e-10

    def test_coefficient_identity_limits(self, small_forms):
        with pytest.raises(DomainError):
            dirichlet.coefficient_identity_check(small_forms["delta"], -4, 10 ** 4 + 1)

    def test_D_series_identity(self):
        for eta in (1, 2, 3):
            for D in qforms.CATALOG_DISCRIMINANTS:
                for N in (1, 2, 5, 11):
                    assert dirichlet.D_series_check(eta, D, N, 1000) == 0

    def test_D_series_coefficient_example(self):
        local = lambda p, e: dirichlet._P_local_exact(p, -1, 2, False, e)
        assert local(3, 2)[0] == 1
        coeffs = dirichlet.merge_local_series(10, _d_series_local(2, -4, 1))
        assert coeffs[5] == 4
        assert coeffs[9] == 0 and coeffs[4] == 0 and coeffs[3] == 0


def _d_series_local(eta, D, N):
    from math import comb

    def local(p, e_max):
        chi = qforms.chi_D(D, p)
        z = [comb(eta + e - 1, e) for e in range(e_max + 1)]
        l = [comb(eta + e - 1, e) * chi ** e for e in range(e_max + 1)]
        out = dirichlet._int_mul(z, l)[: e_max + 1]
        return dirichlet._int_mul(out, dirichlet._P_local_exact(p, chi, eta, N % p == 0, e_max))[: e_max + 1]

    local.exact = True
    return local


class TestEulerProduct:
    def test_inert_prime_factor(self):
        # eta = 1, chi(3) = -1 for D = -4: P_3(1) = 1 - 1/9
        v = dirichlet.P_euler(1.0, -4, 1, 1, p_cut=3).value.real
        v2 = dirichlet.P_euler(1.0, -4, 1, 1, p_cut=2).value.real
        assert v / v2 == pytest.approx(1 - 1 / 9, rel=1e-14)

    def test_matches_direct_product(self):
        for D, N, eta in ((-4, 1, 1), (-3, 11, 2), (-163, 5, 1)):
            got = dirichlet.P_euler(1.0, D, N, eta, p_cut=2000).value.real
            assert got == pytest.approx(direct_product(1.0, D, N, eta, 2000), rel=1e-12)

    def test_tail_bound_ladder(self):
        vals = {pc: dirichlet.P_euler(1.0, -4, 1, 1, p_cut=pc) for pc in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6)}
        for lo, hi in ((10 ** 3, 10 ** 4), (10 ** 4, 10 ** 5), (10 ** 5, 10 ** 6)):
            gap = abs(math.log(vals[hi].value.real / vals[lo].value.real))
            assert gap <= vals[lo].tail_bound
            assert vals[hi].lower <= vals[hi].value.real <= vals[hi].upper
        assert abs(vals[10 ** 6].value.real - vals[10 ** 5].value.real) < 1e-6

    def test_complex_s(self):
        s = 1.5 + 2j
        got = dirichlet.P_euler(s, -7, 1, 1, p_cut=500).value
        assert got == pytest.approx(complex(direct_product(s, -7, 1, 1, 500)), rel=1e-12)

    def test_convergence_error(self):
        with pytest.raises(ConvergenceError):
            dirichlet.P_euler(0.5, -4, 1, 1)

    def test_tail_infinite_when_condition_fails(self):
        assert dirichlet.P_euler(0.6, -4, 1, 3, p_cut=10).tail_bound == math.inf

    def test_tail_constant(self):
        assert dirichlet.P_tail_constant(1) == 6.0


class TestL1:
    def test_known_values(self):
        assert dirichlet.L1_chi(-4, M=10 ** 6).value == pytest.approx(math.pi / 4, abs=1e-5)
        assert dirichlet.L1_chi(-3, M=10 ** 6).value == pytest.approx(math.pi / (3 * math.sqrt(3)), abs=1e-5)
        assert dirichlet.L1_chi(-163, M=10 ** 6).value == pytest.approx(math.pi / math.sqrt(163), abs=2e-4)

    def test_methods_agree(self):
        for D in qforms.FUNDAMENTAL_H1:
            direct = dirichlet.L1_chi(D, M=10 ** 6)
            formula = dirichlet.L1_chi(D, "class-number-formula")
            assert abs(direct.value - formula.value) <= direct.tail_bound

    def test_unsupported(self):
        with pytest.raises(UnsupportedDiscriminantError):
            dirichlet.L1_chi(-12, "class-number-formula")
        with pytest.raises(UnsupportedDiscriminantError):
            dirichlet.L1_chi(-23)
        assert dirichlet.L1_chi(-12, M=10 ** 5).value > 0


class TestJsonl:
    def test_stable(self):
        rec = dirichlet.jsonl_record("x", {"b": 1, "a": 2}, value=1 + 2j, n=np.int64(3))
        assert rec == '{"check": "x", "n": 3, "params": {"a": 2, "b": 1}, "value": [1.0, 2.0]}'
