"""Exact integer power series arithmetic.

Series are plain Python lists of ints, index = exponent of q.  Products go
through Kronecker substitution: both operands are packed into one big integer
at 2**bits and multiplied with GMP, which is far faster than a Python
convolution once the length reaches 10**5 or so.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpz


def _slot_bits(a: list[int], b: list[int]) -> int:
    ma = max((abs(x) for x in a), default=0) or 1
    mb = max((abs(x) for x in b), default=0) or 1
    bits = ma.bit_length() + mb.bit_length() + min(len(a), len(b)).bit_length() + 2
    return (bits + 7) // 8 * 8


def _pack(coeffs: list[int], bits: int) -> mpz:
    width = bits // 8
    pos = bytearray(len(coeffs) * width)
    neg = bytearray(len(coeffs) * width)
    for i, c in enumerate(coeffs):
        if c > 0:
            pos[i * width:(i + 1) * width] = c.to_bytes(width, "little")
        elif c < 0:
            neg[i * width:(i + 1) * width] = (-c).to_bytes(width, "little")
    return mpz(int.from_bytes(pos, "little")) - mpz(int.from_bytes(neg, "little"))


def _unpack(value: mpz, count: int, bits: int) -> list[int]:
    width = bits // 8
    half = 1 << (bits - 1)
    full = 1 << bits
    negative = value < 0
    if negative:
        value = -value
    nbytes = max(count * width, (int(gmpy2.bit_length(value)) + 7) // 8)
    raw = int(value).to_bytes(nbytes, "little")
    out = [0] * count
    carry = 0
    for i in range(count):
        v = int.from_bytes(raw[i * width:(i + 1) * width], "little") + carry
        if v >= half:
            v -= full
            carry = 1
        else:
            carry = 0
        out[i] = -v if negative else v
    return out


def mul(a: list[int], b: list[int], length: int) -> list[int]:
    """First ``length`` coefficients of the product a*b."""
    a = a[:length]
    b = b[:length]
    if not a or not b:
        return [0] * length
    bits = _slot_bits(a, b)
    return _unpack(_pack(a, bits) * _pack(b, bits), length, bits)


def power(base: list[int], exponent: int, length: int) -> list[int]:
    """base**exponent truncated to ``length`` terms (exponent >= 0)."""
    result = [1] + [0] * (length - 1)
    base = base[:length]
    while exponent:
        if exponent & 1:
            result = mul(result, base, length)
        exponent >>= 1
        if exponent:
            base = mul(base, base, length)
    return result


def substitute(series: list[int], m: int, length: int) -> list[int]:
    """series(q**m) truncated to ``length`` terms."""
    out = [0] * length
    for i in range(0, (length - 1) // m + 1):
        if i < len(series):
            out[i * m] = series[i]
    return out


def pentagonal_eta(length: int) -> list[int]:
    """prod (1 - q^n), first ``length`` coefficients, by the pentagonal number theorem."""
    out = [0] * length
    out[0] = 1
    k = 1
    while True:
        g1 = k * (3 * k - 1) // 2
        if g1 >= length:
            break
        sign = -1 if k % 2 else 1
        out[g1] += sign
        g2 = k * (3 * k + 1) // 2
        if g2 < length:
            out[g2] += sign
        k += 1
    return out


def jacobi_eta_cubed(length: int) -> list[int]:
    """prod (1 - q^n)^3 = sum (-1)^k (2k+1) q^(k(k+1)/2)."""
    out = [0] * length
    k = 0
    while k * (k + 1) // 2 < length:
        out[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return out


def partition_series(length: int) -> list[int]:
    """1 / prod (1 - q^n) via Euler's recurrence."""
    p = [0] * length
    p[0] = 1
    for n in range(1, length):
        total = 0
        k = 1
        while True:
            g1 = k * (3 * k - 1) // 2
            if g1 > n:
                break
            sign = 1 if k % 2 else -1
            total += sign * p[n - g1]
            g2 = k * (3 * k + 1) // 2
            if g2 <= n:
                total += sign * p[n - g2]
            k += 1
        p[n] = total
    return p


def eta_power(r: int, length: int) -> list[int]:
    """prod (1 - q^n)^r for any integer r."""
    if r < 0:
        return power(partition_series(length), -r, length)
    q, s = divmod(r, 3)
    out = power(jacobi_eta_cubed(length), q, length)
    if s:
        out = mul(out, power(pentagonal_eta(length), s, length), length)
    return out
