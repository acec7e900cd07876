"""Shared fixtures and brute-force oracles.

The oracles deliberately avoid the package's enumeration code: they scan an
integer box that provably contains the ball and filter by membership.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from periodica.periodic import build_dn_plus

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def dn_box_shell(n: int, r2: Fraction, half: bool = False) -> np.ndarray:
    """All ``x`` in ``D_n`` (or ``1/2 + D_n``) with ``|x|^2 = r2``, times 2 when ``half``.

    Brute force over the box ``|x_i| <= sqrt(r2)``; returns integer rows of ``2x`` for the
    half coset and of ``x`` otherwise.
    """
    if half:
        # 2x has odd entries with |2x_i| <= 2 sqrt(r2); x - 1/2 in D_n means sum (2x_i - 1)/2 even
        k = int(math.isqrt(int(4 * r2)))
        vals = np.arange(-k, k + 1)
        vals = vals[vals % 2 == 1]
        grid = np.array(list(itertools.product(vals, repeat=n)), dtype=np.int64)
        keep = ((grid * grid).sum(1) == 4 * r2) & (((grid - 1) // 2).sum(1) % 2 == 0)
        return grid[keep]
    k = int(math.isqrt(int(r2)))
    vals = np.arange(-k, k + 1)
    grid = np.array(list(itertools.product(vals, repeat=n)), dtype=np.int64)
    keep = ((grid * grid).sum(1) == r2) & (grid.sum(1) % 2 == 0)
    return grid[keep]


def box_ball(basis_rows, offset, R2, pad: int = 0) -> np.ndarray:
    """Float vectors of ``offset + L`` with norm <= R2 by scanning a coefficient box."""
    B = np.asarray(basis_rows, dtype=float)
    c0 = np.linalg.solve(B, np.asarray(offset, dtype=float))
    Binv = np.linalg.inv(B)
    R = math.sqrt(R2)
    ranges = []
    for i in range(B.shape[0]):
        span = R * np.linalg.norm(Binv[i]) + 1
        lo = math.floor(-c0[i] - span) - pad
        hi = math.ceil(-c0[i] + span) + pad
        ranges.append(range(lo, hi + 1))
    Zs = np.array(list(itertools.product(*ranges)), dtype=float)
    V = (Zs + c0) @ B.T
    return V[(V * V).sum(1) <= R2 * (1 + 1e-12)]


@pytest.fixture(scope="session")
def d9p():
    return build_dn_plus(9)
