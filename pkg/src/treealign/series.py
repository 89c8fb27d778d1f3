"""Counting rooted unlabeled trees by depth, and the generating function
Phi_d(x) = sum_n A_{d,n} x^(n-1) where A_{d,n} counts trees of size n and
depth <= d.

The depth recursion Phi_{d+1} = exp(sum_j x^j/j * Phi_d(x^j)) is evaluated
with exact integers: writing S(x) for the inner sum, m*[x^m]S equals
sum_{i|m} i*A_{d,i}, so the exp can be unrolled through B' = S'B without
ever leaving the integers. The depth-free counts use the classical Euler
transform recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

__all__ = [
    "PowerSeries",
    "tree_counts",
    "phi_eval",
    "log_phi_value",
    "estimate_otter",
    "OtterEstimate",
    "OTTER_ALPHA",
]

# reference value of the Otter constant (radius of convergence of Phi)
OTTER_ALPHA = 0.3383219


@dataclass(frozen=True)
class PowerSeries:
    """Truncated power series sum_k c_k x^k, exact coefficients allowed."""

    coeffs: tuple

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = max(self.order, other.order)
        return PowerSeries(tuple(self[k] + other[k] for k in range(n)))

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        # product truncated at the shorter reliable order
        n = min(self.order, other.order)
        out = [0] * n
        for i, a in enumerate(self.coeffs[:n]):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs[: n - i]):
                if b:
                    out[i + j] += a * b
        return PowerSeries(tuple(out))

    def scale(self, c) -> "PowerSeries":
        return PowerSeries(tuple(c * a for a in self.coeffs))

    def substitute_power(self, j: int) -> "PowerSeries":
        """x -> x^j, same truncation order."""
        if j < 1:
            raise ValueError("j must be >= 1")
        out = [0] * self.order
        for k, a in enumerate(self.coeffs):
            if k * j < self.order:
                out[k * j] = a
        return PowerSeries(tuple(out))

    def exp(self) -> "PowerSeries":
        """exp of a series with zero constant term."""
        if self.order == 0:
            return self
        if self.coeffs[0] != 0:
            raise ValueError("exp requires zero constant term")
        n = self.order
        b: list = [1] + [0] * (n - 1)
        exact = all(isinstance(c, int) for c in self.coeffs)
        for m in range(1, n):
            acc = 0
            for k in range(1, m + 1):
                sk = self.coeffs[k] if k < n else 0
                if sk:
                    acc += k * sk * b[m - k]
            if exact and isinstance(acc, int) and acc % m == 0:
                b[m] = acc // m
            else:
                b[m] = Fraction(acc, m) if not isinstance(acc, float) else acc / m
        return PowerSeries(tuple(b))

    def eval(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + float(c)
        return acc


def _counts_infinite(n_max: int) -> list:
    """A_n for n = 1..n_max (depth-unrestricted), exact, via the Euler
    transform recurrence a_{n+1} = (1/n) sum_k c_k a_{n+1-k},
    c_k = sum_{j|k} j a_j."""
    a = [0] * (n_max + 1)
    a[1] = 1
    c = [0] * (n_max + 1)
    for n in range(1, n_max):
        cn = 0
        for j in range(1, n + 1):
            if n % j == 0:
                cn += j * a[j]
        c[n] = cn
        total = 0
        for k in range(1, n + 1):
            total += c[k] * a[n + 1 - k]
        assert total % n == 0
        a[n + 1] = total // n
    return a[1:]


def _counts_step(prev: Sequence[int], n_max: int) -> list:
    """Given A_{d,n} for n=1..n_max, return A_{d+1,n} for n=1..n_max."""
    # m * s_m = sum_{i|m} i * A_{d,i}
    ms = [0] * (n_max)  # index m-1 holds m*s_m, m = 1..n_max-1 used
    for i in range(1, n_max):
        ai = prev[i - 1]
        if ai:
            for m in range(i, n_max):
                if m % i == 0:
                    ms[m - 1] += i * ai
    b = [0] * n_max  # b[k] = A_{d+1,k+1}
    b[0] = 1
    for n in range(1, n_max):
        total = 0
        for m in range(1, n + 1):
            if ms[m - 1]:
                total += ms[m - 1] * b[n - m]
        assert total % n == 0
        b[n] = total // n
    return b


def tree_counts(d: Optional[Union[int, float]], n_max: int) -> list:
    """Exact counts [A_{d,1}, ..., A_{d,n_max}] of rooted unlabeled trees of
    each size with depth <= d. Pass d=None (or math.inf) for the
    unrestricted counts."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if d is None or d == math.inf:
        return _counts_infinite(n_max)
    if d < 0 or int(d) != d:
        raise ValueError("d must be a non-negative integer, None, or inf")
    d = int(d)
    if d == 0:
        return [1] + [0] * (n_max - 1)
    # counts of size n stabilize once d >= n-1
    steps = min(d, n_max - 1) if n_max > 1 else min(d, 1)
    cur = [1] + [0] * (n_max - 1)  # depth 0
    for _ in range(max(steps, 1)):
        cur = _counts_step(cur, n_max)
    return cur


# safe upper bound on the ratio A_{n+1}/A_n (it increases to 1/alpha)
_RATIO_CAP = 1.0 / OTTER_ALPHA


def phi_eval(d, x: float, n_terms: int = 80) -> tuple:
    """Evaluate Phi_d(x) = sum_n A_{d,n} x^(n-1) by truncated series.

    Returns (value, tail_bound). For d=None/inf the argument must satisfy
    x < alpha and the tail bound uses A_{n+k} <= A_n / alpha^k. For finite d
    the series is extended adaptively and the tail is a geometric estimate
    from the observed term decay.
    """
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0:
        return 1.0, 0.0
    infinite = d is None or d == math.inf
    if infinite and x >= OTTER_ALPHA:
        raise ValueError("phi_eval at unrestricted depth needs x < alpha")
    if not infinite and x >= 1.0:
        raise ValueError("phi_eval needs x < 1")

    n = n_terms
    while True:
        counts = tree_counts(d, n)
        terms = [float(a) * x ** (k) for k, a in enumerate(counts)]  # x^(n-1)
        value = math.fsum(terms)
        last = terms[-1]
        if infinite:
            r = _RATIO_CAP * x
            tail = float(counts[-1]) * x ** n / (1.0 - r) if r < 1 else math.inf
            return value, tail
        # finite depth: extend until terms are negligible
        if last <= 1e-16 * max(value, 1.0) and n >= 8:
            ratios = [terms[k + 1] / terms[k] for k in range(n - 6, n - 1)
                      if terms[k] > 0]
            q = min(max(ratios, default=x) * 1.2, 0.95)
            tail = last * q / (1.0 - q)
            return value, tail
        if n > 4000:
            return value, math.inf
        n *= 2


def log_phi_value(d: int, x: float, tol: float = 1e-15) -> float:
    """log Phi_d(x) through the functional recursion
    log Phi_{d+1}(x) = sum_j x^j/j * Phi_d(x^j). Handles values far beyond
    float range (only the logarithm is returned). Requires 0 <= x < 1."""
    if not (0.0 <= x < 1.0):
        raise ValueError("need 0 <= x < 1")
    if d < 0 or int(d) != d:
        raise ValueError("d must be a non-negative integer")
    memo: dict = {}

    def lp(dd: int, xx: float) -> float:
        if dd == 0 or xx == 0.0:
            return 0.0
        key = (dd, xx)
        if key in memo:
            return memo[key]
        total = 0.0
        xj = xx
        j = 1
        while True:
            inner = lp(dd - 1, xj)
            if inner > 700.0:
                raise OverflowError(
                    "inner Phi value exceeds float range; x too close to 1")
            term = xj / j * math.exp(inner)
            total += term
            if term < tol * max(total, 1.0) and j >= 4:
                break
            j += 1
            xj *= xx
            if xj == 0.0:
                break
        memo[key] = total
        return total

    return lp(d, x)


@dataclass
class OtterEstimate:
    value: float
    n_used: int
    raw_ratio: float
    ratios_decreasing: bool


def estimate_otter(n_max: int) -> OtterEstimate:
    """Estimate the radius of convergence alpha from the count ratios
    A_n / A_{n+1} -> alpha, with the first-order (1 + 3/(2n)) polynomial
    correction removed."""
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    a = _counts_infinite(n_max)
    ratios = []
    for n in range(1, n_max):
        ratios.append(a[n - 1] / a[n])  # A_n / A_{n+1}
    decreasing = all(ratios[i + 1] <= ratios[i] + 1e-15
                     for i in range(len(ratios) - 1))
    n = n_max - 1
    raw = ratios[-1]
    corrected = raw * (n / (n + 1.0)) ** 1.5
    return OtterEstimate(value=corrected, n_used=n, raw_ratio=raw,
                         ratios_decreasing=decreasing)
