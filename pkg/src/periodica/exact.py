"""Small exact-arithmetic helpers over ``fractions.Fraction``."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Integral, Rational
from typing import Iterable, Sequence

import numpy as np


def to_fraction(x) -> Fraction:
    """Convert ints, Fractions, numpy ints and strings like ``"3/4"`` exactly.

    Floats are rejected: silently turning 0.1 into a 53-bit dyadic would give
    a lattice nobody asked for.
    """
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("boolean is not a number")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (Integral, np.integer)):
        return Fraction(int(x))
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact rational: {x!r}")


def is_exact_number(x) -> bool:
    try:
        to_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        return False
    return True


def lcm_of_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v.denominator)
    return out


def frac_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(to_fraction(x) for x in row) for row in rows)


def frac_vector(v) -> tuple[Fraction, ...]:
    return tuple(to_fraction(x) for x in v)


def frac_str(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def int_matrix(rows: Sequence[Sequence[int]]) -> np.ndarray:
    """int64 array, or object array if any entry does not fit."""
    flat = [int(x) for row in rows for x in row]
    big = any(abs(x) >= 2**62 for x in flat)
    arr = np.array([[int(x) for x in row] for row in rows], dtype=object if big else np.int64)
    return arr


def det_and_adjugate(m: Sequence[Sequence[int]]) -> tuple[int, list[list[int]]]:
    """Exact determinant and adjugate of an integer matrix (Bareiss elimination)."""
    n = len(m)
    a = [[Fraction(int(x)) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return 0, [[0] * n for _ in range(n)]
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        p = a[col][col]
        det *= p
        inv = 1 / p
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    d = int(det)
    adj = [[a[i][n + j] * det for j in range(n)] for i in range(n)]
    return d, [[int(x) for x in row] for row in adj]


def solve_exact(m: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> list[Fraction]:
    n = len(m)
    a = [list(map(Fraction, row)) + [Fraction(b[i])] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def mat_vec(m, v):
    return tuple(sum((x * y for x, y in zip(row, v)), Fraction(0)) for row in m)


def mat_mul(a, b):
    cols = list(zip(*b))
    return tuple(tuple(sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in cols)
                 for row in a)
