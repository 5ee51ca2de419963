"""Small exact linear algebra over ZZ / QQ.

Dimensions here are tiny (single digits), so plain fraction-free and
Fraction-based eliminations are plenty fast and keep every decision exact.
Arbitrary-precision Python ints make overflow a non-issue.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd


def det_int(rows: list[list[int]]) -> int:
    """Bareiss fraction-free determinant of an integer matrix."""
    a = [list(map(int, r)) for r in rows]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = a[k][k]
    return sign * a[-1][-1]


def solve_fractions(rows, rhs) -> list[Fraction]:
    """Solve A x = b exactly (A square, nonsingular)."""
    n = len(rows)
    a = [[Fraction(x) for x in r] + [Fraction(b)] for r, b in zip(rows, rhs)]
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[k], a[piv] = a[piv], a[k]
        pk = a[k][k]
        for i in range(n):
            if i != k and a[i][k] != 0:
                f = a[i][k] / pk
                for j in range(k, n + 1):
                    a[i][j] -= f * a[k][j]
    return [a[i][n] / a[i][i] for i in range(n)]


def inv_unimodular(rows) -> list[list[int]]:
    """Inverse of an integer matrix with determinant +-1 (integer output)."""
    n = len(rows)
    inv = []
    for col in range(n):
        e = [1 if i == col else 0 for i in range(n)]
        x = solve_fractions(rows, e)
        if any(v.denominator != 1 for v in x):
            raise ValueError("matrix is not unimodular")
        inv.append([int(v) for v in x])
    # columns solved above are columns of the inverse
    return [[inv[j][i] for j in range(n)] for i in range(n)]


def gcd_vec(v) -> int:
    g = 0
    for x in v:
        g = gcd(g, abs(int(x)))
    return g


def mat_vec_int(rows, v) -> list[int]:
    return [sum(r[j] * v[j] for j in range(len(v))) for r in rows]
