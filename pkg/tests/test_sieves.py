import math
import random

import numpy as np
import pytest

from heckeqf import qforms, sieves
from heckeqf.errors import RangeError

X = 10 ** 5


def factor(n):
    out, p = {}, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@pytest.fixture(scope="module")
def delta_table(small_forms):
    return sieves.build_table(small_forms["delta"], -4, 10 ** 4)


class TestBasicSieves:
    def test_trial_division_oracle(self):
        rng = random.Random(7)
        spf = sieves.spf_sieve(X)
        sq = sieves.moebius_squarefree_sieve(X)
        om = sieves.omega_sieve(X)
        for n in [1, 2, 3, 4, 12, 97, 99991, X] + [rng.randint(2, X) for _ in range(2000)]:
            f = factor(n)
            assert sq[n] == all(e == 1 for e in f.values()), n
            assert om[n] == len(f), n
            if n > 1:
                assert spf[n] == min(f), n

    def test_prime_list(self):
        ps = sieves.primes(1000)
        assert len(ps) == 168
        assert list(ps[:5]) == [2, 3, 5, 7, 11]

    def test_squarefree_density(self):
        dens = sieves.moebius_squarefree_sieve(10 ** 6)[1:].mean()
        assert 0.6076 <= dens <= 0.6082
        assert abs(dens - 6 / math.pi ** 2) < 1e-3

    def test_coprime(self):
        cop = sieves.coprime_sieve(1000, 10)
        assert all(cop[n] == (math.gcd(n, 10) == 1) for n in range(1, 1001))

    def test_multiplicative_fill(self):
        # divisor count tau(p^e) = e + 1
        tau = sieves.multiplicative_fill(2000, lambda p, e: e + 1)
        assert all(tau[n] == sum(1 for d in range(1, n + 1) if n % d == 0) for n in range(1, 2001))


class TestRStar:
    def test_examples(self):
        assert sieves.r_star_sieve(-4, 100)[25] == 3
        assert sieves.r_star_sieve(-4, 100)[3] == 0

    def test_matches_divisor_sum(self):
        for D in qforms.CATALOG_DISCRIMINANTS:
            tab = sieves.r_star_sieve(D, 3000)
            assert all(tab[n] == qforms.r_star(n, D) for n in range(1, 3001)), D


class TestCoefficientTable:
    def test_fields(self, delta_table, small_forms):
        t = delta_table
        assert t.w_D == 4
        assert t.form == qforms.QuadForm(1, 0, 1)
        assert t.lam[6] == pytest.approx(t.lam[2] * t.lam[3], rel=1e-14)
        assert t.a_sign[2] == -1 and t.a_sign[3] == 1
        a = small_forms["delta"].a
        assert all(t.a_sign[n] == np.sign(a[n]) for n in range(1, 2000))

    def test_out_of_range(self, small_forms, delta_table):
        with pytest.raises(RangeError):
            sieves.build_table(small_forms["delta"], -4, 10 ** 4 + 1)
        with pytest.raises(RangeError):
            delta_table.check_bound(10 ** 4 + 1)

    def test_deterministic(self, small_forms, delta_table):
        again = sieves.build_table(small_forms["delta"], -4, 10 ** 4)
        for name in ("mu_sq", "omega", "coprime_N", "r_star", "lam", "a_sign"):
            assert np.array_equal(getattr(again, name), getattr(delta_table, name))

    def test_dump_roundtrip(self, small_forms, tmp_path):
        t = sieves.build_table(small_forms["d11k2"], -163, 5000)
        path = tmp_path / "t.bin"
        sieves.dump_table(t, path)
        assert path.read_bytes()[:4] == b"HQFT"
        back = sieves.load_table(path)
        assert (back.X_max, back.N, back.k, back.D, back.label) == (5000, 11, 2, -163, "d11k2")
        for name in ("mu_sq", "omega", "coprime_N", "r_star", "lam", "a_sign"):
            assert np.array_equal(getattr(back, name), getattr(t, name)), name

    def test_bad_dump(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXX" + bytes(60))
        with pytest.raises(ValueError):
            sieves.load_table(path)
