"""Shell-by-shell Hessian blocks of ``D_n^+`` and related diagnostics.

The second-order term of the energy at a 2-periodic set is written as
``(c/m) sum_r [I(r) + II(r) + III(r)] exp(-c r^2)`` with ``I`` the translation
block, ``II`` the mixed block and ``III`` the lattice-change block. Everything
c-independent is kept as exact rationals; sign decisions at a given ``c`` use
the exact binary value of ``c``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    InexactError,
    InputError,
    InsufficientDataError,
    InvariantTheoryError,
    PreconditionError,
)
from .exact import frac_str, to_fraction
from .lattice import Lattice, as_offset
from .moments import _pair_index, shell_table, sym_pairs
from .periodic import PeriodicSetRep, build_dn_plus, difference_classes, two_periodic_structure


def _num(x) -> dict:
    if isinstance(x, Fraction):
        return {"value": format(float(x), ".17g"), "exact": frac_str(x)}
    return {"value": format(float(x), ".17g")}


# invariant quadratic polynomials on symmetric matrices -----------------------------------------


def invariant_basis_eval(H) -> tuple:
    """``((Tr H)^2, Tr H^2, sum_{i<j} h_ij^2)``; exact for rational entries."""
    A = np.asarray(H, dtype=object)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("H must be square")
    n = A.shape[0]
    if any(A[i, j] != A[j, i] for i in range(n) for j in range(i)):
        raise InputError("H must be symmetric")
    tr = sum(A[i, i] for i in range(n))
    off = sum(A[i, j] * A[i, j] for i in range(n) for j in range(i + 1, n))
    diag = sum(A[i, i] * A[i, i] for i in range(n))
    return tr * tr, diag + 2 * off, off


def coordinate_pairs(n: int) -> list[tuple[int, int]]:
    """Coordinates ``h_ij`` (``i <= j``) of symmetric matrices, in row-major order."""
    i, j = sym_pairs(n)
    return list(zip(i.tolist(), j.tolist()))


def invariant_form_matrices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gram matrices ``G`` (``q(h) = h^T G h`` in the coordinates ``h_ij``) of F1, F2, F3."""
    P = coordinate_pairs(n)
    D = len(P)
    G1 = np.zeros((D, D), dtype=np.int64)
    G2 = np.zeros((D, D), dtype=np.int64)
    G3 = np.zeros((D, D), dtype=np.int64)
    diag = [p for p, (i, j) in enumerate(P) if i == j]
    for p in diag:
        for q in diag:
            G1[p, q] = 1
        G2[p, p] = 1
    for p, (i, j) in enumerate(P):
        if i != j:
            G2[p, p] = 2
            G3[p, p] = 1
    return G1, G2, G3


def delta(k: int, G, n: int) -> Fraction:
    """Apply the invariant second-order operator ``delta_k`` to ``h^T G h``.

    ``d_p d_q (h^T G h) = 2 G_pq``; the operators are
    ``delta_1 = S_x / (n(n-1))``,
    ``delta_2 = S_d / (2n) - S_x / (n(n-1))`` and
    ``delta_3 = -S_d / n + 2 S_x / (n(n-1)) + S_o / (n(n-1))`` with
    ``S_d = sum_i d_ii^2``, ``S_x = sum_{i<j} d_ii d_jj``, ``S_o = sum_{i<j} d_ij^2``.
    """
    P = coordinate_pairs(n)
    pos = {p: a for a, p in enumerate(P)}
    G = np.asarray(G, dtype=object)
    Sd = sum(2 * Fraction(G[pos[(i, i)], pos[(i, i)]]) for i in range(n))
    Sx = sum(2 * Fraction(G[pos[(i, i)], pos[(j, j)]]) for i in range(n) for j in range(i + 1, n))
    So = sum(2 * Fraction(G[pos[(i, j)], pos[(i, j)]]) for i in range(n) for j in range(i + 1, n))
    nn = n * (n - 1)
    if k == 1:
        return Sx / nn
    if k == 2:
        return Sd / (2 * n) - Sx / nn
    if k == 3:
        return -Sd / n + 2 * Sx / nn + So / nn
    raise InputError("delta index must be 1, 2 or 3")


def _moment_gram(M4: np.ndarray, n: int) -> np.ndarray:
    """Integer Gram matrix of ``sum_w H[w]^2`` from ``sum_w w^(x)4``."""
    P = coordinate_pairs(n)
    f = np.array([1 if i == j else 2 for i, j in P], dtype=object)
    a = np.array([i for i, _ in P])
    b = np.array([j for _, j in P])
    M = np.asarray(M4, dtype=object)[a[:, None], b[:, None], a[None, :], b[None, :]]
    return M * f[:, None] * f[None, :]


# shell moments --------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShellMoments:
    """Unweighted power sums of ``W = scale * w`` over one shell (set, not multiset)."""

    n: int
    r2: Fraction
    scale: int
    size: int
    M2: np.ndarray
    M4: np.ndarray

    @classmethod
    def from_shell(cls, shell) -> "ShellMoments":
        from .designs import _power_sums

        V = np.asarray(shell.vectors).astype(object)
        ones = np.ones(len(V), dtype=object)
        ps = _power_sums(V, ones, 4)
        return cls(shell.n, shell.r2, shell.scale, len(V), ps[2], ps[4])

    @property
    def Z(self) -> Fraction:
        return Fraction(int(sum(int(self.M4[i, i, i, i]) for i in range(self.n))), self.scale ** 4)

    @property
    def a_r(self) -> Fraction:
        return self.Z - Fraction(3, self.n + 2) * self.r2 * self.r2 * self.size


def _check_dn_invariant(M4: np.ndarray, n: int) -> None:
    if n < 5:
        raise InvariantTheoryError("invariant theory inapplicable: needs n >= 5")
    M = np.asarray(M4, dtype=object)
    for k in range(n - 1):
        p = np.arange(n)
        p[k], p[k + 1] = k + 1, k
        if not np.array_equal(M[np.ix_(p, p, p, p)], M):
            raise InvariantTheoryError(f"invariant theory inapplicable: not symmetric under swapping {k}, {k + 1}")
    s = np.ones(n, dtype=object)
    s[:2] = -1
    S = np.einsum("i,j,k,l->ijkl", s, s, s, s)
    if not np.array_equal(M * S, M):
        raise InvariantTheoryError("invariant theory inapplicable: not symmetric under a double sign change")


@dataclass(frozen=True)
class InvariantCoefficients:
    """``sum_{w in shell} H[w]^2 = alpha F1(H) + beta F2(H) + gamma F3(H)``."""

    alpha: Fraction
    beta: Fraction
    gamma: Fraction
    Z: Fraction
    size: int
    r2: Fraction
    n: int

    def evaluate(self, H) -> Fraction | float:
        F1, F2, F3 = invariant_basis_eval(H)
        return self.alpha * F1 + self.beta * F2 + self.gamma * F3

    def to_json(self) -> dict:
        return {"alpha": _num(self.alpha), "beta": _num(self.beta), "gamma": _num(self.gamma),
                "Z": _num(self.Z)}


def abc_coefficients(shell) -> InvariantCoefficients:
    """Coefficients of the invariant decomposition of ``sum_w H[w]^2`` over a shell.

    Accepts a :class:`ShellMoments` or a ``designs.Shell`` (weights ignored).
    The fourth-moment tensor must be ``W(D_n)``-invariant; the closed forms are
    then checked against the full Gram matrix.
    """
    sm = shell if isinstance(shell, ShellMoments) else ShellMoments.from_shell(shell)
    n = sm.n
    _check_dn_invariant(sm.M4, n)
    Z, N, r4 = sm.Z, sm.size, sm.r2 * sm.r2
    nn = n * (n - 1)
    alpha = (r4 * N - Z) / nn
    beta = Z / (n - 1) - r4 * N / nn
    gamma = -2 * Fraction(n + 2, nn) * Z + Fraction(6, nn) * r4 * N
    G = _moment_gram(sm.M4, n)
    G1, G2, G3 = invariant_form_matrices(n)
    s4 = sm.scale ** 4
    rhs = (alpha * s4) * G1.astype(object) + (beta * s4) * G2.astype(object) + (gamma * s4) * G3.astype(object)
    if not np.array_equal(G, rhs):
        raise InvariantTheoryError("invariant theory inapplicable: decomposition fails")
    return InvariantCoefficients(alpha, beta, gamma, Z, N, sm.r2, n)


# per-shell exact data ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShellSummary:
    """Exact c-independent data of one nonzero shell of ``Lambda - Lambda``."""

    r2: Fraction
    key: int
    size: int
    nu: Fraction
    moments: ShellMoments
    parts: tuple  # (class index, row in that class table)

    @property
    def Z(self) -> Fraction:
        return self.moments.Z

    @property
    def a_r(self) -> Fraction:
        return self.moments.a_r

    @property
    def ratio(self) -> Fraction:
        return self.a_r / (self.r2 * self.r2 * self.size)

    @property
    def integral(self) -> bool:
        return self.r2.denominator == 1


def _tables(rep: PeriodicSetRep, R2max):
    if not rep.is_exact:
        raise InexactError("block decomposition needs exact input")
    from .energy import class_tables

    return difference_classes(rep), class_tables(rep, to_fraction(R2max), 4)


def shell_summaries(rep: PeriodicSetRep, R2max) -> list[ShellSummary]:
    """Exact per-shell data up to ``R2max``; asserts a constant weight on each shell."""
    classes, tabs = _tables(rep, R2max)
    s, n, m = rep.scale, rep.n, rep.m
    rows = [{int(k): r for r, k in enumerate(t.keys)} for t in tabs]
    keys = sorted(set().union(*[set(rw) for rw in rows]) - {0})
    out = []
    for key in keys:
        parts = [(ci, rows[ci][key]) for ci in range(len(classes)) if key in rows[ci]]
        nus = {Fraction(classes[ci].multiplicity, m) for ci, _ in parts}
        if len(nus) != 1:
            raise InvariantTheoryError(f"weight is not constant on the shell r^2 = {Fraction(key, s * s)}")
        size = sum(int(tabs[ci].count[r]) for ci, r in parts)
        M2 = sum(np.asarray(tabs[ci].moments[2][r], dtype=object) for ci, r in parts)
        M4 = sum(np.asarray(tabs[ci].moments[4][r], dtype=object) for ci, r in parts)
        r2 = Fraction(key, s * s)
        out.append(ShellSummary(r2, key, size, nus.pop(), ShellMoments(n, r2, s, size, M2, M4), tuple(parts)))
    return out


# block reports ---------------------------------------------------------------------------------


def _frac_matrix(A: np.ndarray, den: int) -> np.ndarray:
    return np.array([[Fraction(int(x), den) for x in row] for row in A], dtype=object)


def _add_pair_block(T: np.ndarray, M, i: int, j: int, n: int) -> None:
    si = slice(i * n, (i + 1) * n)
    sj = slice(j * n, (j + 1) * n)
    T[si, si] += M
    T[sj, sj] += M
    T[si, sj] -= M
    T[sj, si] -= M


@dataclass(frozen=True, eq=False)
class BlockReport:
    """Blocks of one shell at one ``c``.

    ``I(r)(t) = 2c t^T I_A t - t^T I_B t`` (exact ``I_A``, ``I_B`` from the
    definition); ``II(r)(H, t) = h^T II t`` with ``h`` the trace-zero coordinates;
    ``III(r)(H) = m nu (coeff1 sum_{i<j} h_ij^2 + coeff2 sum_i h_ii^2)``.
    """

    r2: Fraction
    shell_type: str
    size: int
    nu: Fraction
    Z: Fraction
    a_r: Fraction
    ratio: Fraction
    abc: InvariantCoefficients
    c: float
    m: int
    n: int
    I_A: np.ndarray
    I_B: np.ndarray
    I_closed_form: bool
    II: np.ndarray
    II_zero: bool
    coeff1: Fraction
    coeff2: Fraction
    bracket1: Fraction
    bracket2: Fraction
    translational_threshold: Fraction
    translational_factor: Fraction
    scale: int
    M2: np.ndarray = field(repr=False)
    M4: np.ndarray = field(repr=False)

    def I_value(self, t) -> float:
        t = np.asarray(t, dtype=float).ravel()
        A = self.I_A.astype(float)
        B = self.I_B.astype(float)
        return float(2 * self.c * t @ A @ t - t @ B @ t)

    def II_value(self, H, t) -> float:
        from .energy import trace_zero_basis

        h = np.tensordot(trace_zero_basis(self.n), np.asarray(H, float), axes=([1, 2], [0, 1]))
        return float(h @ self.II @ np.asarray(t, dtype=float).ravel())

    def III_value(self, H) -> float:
        """From the two coefficients; ``H`` must have zero trace."""
        H = np.asarray(H, dtype=float)
        d = float((np.diag(H) ** 2).sum())
        off = float((np.triu(H, 1) ** 2).sum())
        return float(self.m * self.nu) * (float(self.coeff1) * off + float(self.coeff2) * d)

    def III_direct(self, H) -> float:
        """``m nu sum_w ((c/2) H[w]^2 - H^2[w] / 2)`` from the shell moments."""
        H = np.asarray(H, dtype=float)
        s = float(self.scale)
        q4 = np.einsum("ij,ijkl,kl->", H, self.M4, H) / s ** 4
        q2 = float(np.einsum("ij,ji->", H @ H, self.M2)) / s ** 2
        return float(self.m * self.nu) * (0.5 * self.c * q4 - 0.5 * q2)

    def total(self, H, t) -> float:
        return self.I_value(t) + self.II_value(H, t) + self.III_value(H)

    def row(self) -> dict:
        return {"c": format(self.c, ".17g"), "r2": frac_str(self.r2), "size": self.size,
                "Z": frac_str(self.Z), "a_r": frac_str(self.a_r),
                "coeff1": format(float(self.coeff1), ".17g"), "coeff2": format(float(self.coeff2), ".17g"),
                "translational_factor": format(float(self.translational_factor), ".17g")}

    def to_json(self) -> dict:
        return {"r2": _num(self.r2), "shell_type": self.shell_type, "size": self.size, "nu": _num(self.nu),
                "Z": _num(self.Z), "a_r": _num(self.a_r), "ratio": _num(self.ratio), "abc": self.abc.to_json(),
                "I_closed_form": self.I_closed_form, "II_zero": self.II_zero,
                "coeff1": _num(self.coeff1), "coeff2": _num(self.coeff2),
                "bracket1": _num(self.bracket1), "bracket2": _num(self.bracket2),
                "translational_threshold": _num(self.translational_threshold),
                "translational_factor": _num(self.translational_factor)}


def lattice_coefficients(sm: ShellSummary, n: int, c: Fraction) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """``coeff1``, ``coeff2`` (of ``sum_{i<j} h_ij^2`` and ``sum_i h_ii^2`` in ``III / (m nu)``)
    and their normalised brackets."""
    abc = abc_coefficients(sm.moments)
    N, r2 = sm.size, sm.r2
    base = r2 * N / n
    c1 = c * abc.beta + c * abc.gamma / 2 - base
    c2 = (c * abc.beta - base) / 2
    mono = 1 - Fraction(n + 2) / (2 * c * r2)
    b1 = mono - Fraction(n + 2, n - 1) * sm.ratio
    b2 = mono + Fraction(n * (n + 2), 2 * (n - 1)) * sm.ratio
    return c1, c2, b1, b2


def hessian_blocks(rep: PeriodicSetRep, c, R2max) -> list[BlockReport]:
    """Per-shell blocks ``I(r)``, ``II(r)``, ``III(r)`` of a 2-periodic set up to ``R2max``."""
    from .energy import _check_c, trace_zero_basis

    cf = _check_c(c)
    cq = Fraction(cf)
    st = two_periodic_structure(rep)
    n, m, s = rep.n, rep.m, rep.scale
    classes, tabs = _tables(rep, R2max)
    summaries = shell_summaries(rep, R2max)
    cls_of = {p: ci for ci, cl in enumerate(classes) for p in cl.pairs}
    Bz = trace_zero_basis(n)
    k = len(Bz)
    eye = np.eye(n, dtype=np.int64)
    # closed-form k-ranges
    S = {}
    for name, K in (("integral", st.J), ("half-integral", st.J_prime)):
        T = np.zeros((m * n, m * n), dtype=np.int64)
        for i in range(m):
            for kk in K:
                l = st.sigma[i][kk]
                if l != i:
                    _add_pair_block(T, eye, i, l, n)
        S[name] = T.astype(object)
    out = []
    for sm in summaries:
        key = sm.key
        rowmap = dict(sm.parts)
        A = np.zeros((m * n, m * n), dtype=object)
        Bm = np.zeros((m * n, m * n), dtype=object)
        C = np.zeros((k, m * n))
        for ci, r in sm.parts:
            t = tabs[ci]
            M2 = np.asarray(t.moments[2][r], dtype=object)
            cnt = int(t.count[r])
            M1f = np.asarray(t.moments[1][r], dtype=float) / s
            M3f = np.asarray(t.moments[3][r], dtype=float) / s ** 3
            V = -2 * np.einsum("apq,q->ap", Bz, M1f) + 2 * cf * np.einsum("apq,pqr->ar", Bz, M3f)
            for (i, j) in classes[ci].pairs:
                if i == j:
                    continue
                _add_pair_block(A, M2, i, j, n)
                _add_pair_block(Bm, cnt * eye.astype(object), i, j, n)
                C[:, i * n:(i + 1) * n] += V
                C[:, j * n:(j + 1) * n] -= V
        A = A * Fraction(1, s * s)
        # mixed terms vanish when every coset shell has zero first and third moments
        II_zero = True
        for kk in range(m):
            M1 = np.zeros(n, dtype=object)
            M3 = np.zeros((n, n, n), dtype=object)
            for i in range(m):
                ci = cls_of[(i, kk)]
                if ci in rowmap:
                    M1 = M1 + np.asarray(tabs[ci].moments[1][rowmap[ci]], dtype=object)
                    M3 = M3 + np.asarray(tabs[ci].moments[3][rowmap[ci]], dtype=object)
            if np.any(M1 != 0) or np.any(M3 != 0):
                II_zero = False
        # the lattice block needs Lambda(r) to be a 2-design
        if not np.all(sm.moments.M2 * n == sm.size * sm.key * eye.astype(object)):
            raise InvariantTheoryError(f"shell r^2 = {sm.r2} is not a 2-design")
        shell_type = "integral" if sm.integral else "half-integral"
        NI = sm.nu * sm.size
        A_cf = S[shell_type] * (Fraction(2, m) * NI * sm.r2 / n)
        B_cf = S[shell_type] * (Fraction(2, m) * NI)
        closed = bool(np.array_equal(A, A_cf) and np.array_equal(Bm, B_cf))
        c1, c2, b1, b2 = lattice_coefficients(sm, n, cq)
        out.append(BlockReport(
            sm.r2, shell_type, sm.size, sm.nu, sm.Z, sm.a_r, sm.ratio, abc_coefficients(sm.moments), cf, m, n,
            A, Bm, closed, np.zeros_like(C) if II_zero else C, II_zero, c1, c2, b1, b2,
            Fraction(n) / (2 * sm.r2), 2 * cq * sm.r2 / n - 1, s,
            np.asarray(sm.moments.M2, dtype=float), np.asarray(sm.moments.M4, dtype=float)))
    return out


def block_sum(blocks: Sequence[BlockReport], H, t) -> float:
    """``(c/m) sum_r exp(-c r^2) [I(r) + II(r) + III(r)]`` over the given shells."""
    if not blocks:
        return 0.0
    c, m = blocks[0].c, blocks[0].m
    terms = [math.exp(-c * float(b.r2)) * b.total(H, t) for b in blocks]
    return (c / m) * math.fsum(terms)


# theta series ----------------------------------------------------------------------------------


_POLYS = ("1", "P4")


def _theta_from_table(tab, n: int, P: str) -> dict[int, Fraction]:
    s = tab.scale
    out = {}
    for r, key in enumerate(tab.keys):
        N = int(tab.count[r])
        if P == "1":
            out[int(key)] = Fraction(N)
        else:
            m4 = tab.moments[4][r]
            Z = Fraction(int(sum(int(m4[i, i, i, i]) for i in range(n))), s ** 4)
            r2 = Fraction(int(key), s * s)
            out[int(key)] = Z - Fraction(3, n + 2) * r2 * r2 * N
    return out


def _dense(coef: dict[int, Fraction], s: int, R2max: Fraction, dense: bool) -> list[tuple[Fraction, Fraction]]:
    K = R2max * s * s
    top = K.numerator // K.denominator
    keys = range(top + 1) if dense else sorted(coef)
    return [(Fraction(k, s * s), coef.get(k, Fraction(0))) for k in keys if k <= top]


def theta_coefficients(lattice: Lattice, offset, P: str = "1", R2max=10, dense: bool = True):
    """Coefficients ``sum_{x in offset + L, |x|^2 = r^2} P(x)`` for ``r^2 <= R2max``.

    ``P`` is ``"1"`` or ``"P4"``, the harmonic quartic
    ``sum x_i^4 - 3/(n+2) |x|^4``. With ``dense`` every ``r^2`` on the grid
    ``1/s^2`` is listed, zeros included.
    """
    if P not in _POLYS:
        raise InputError(f"unsupported polynomial {P!r}; choose from {_POLYS}")
    ex, _ = as_offset(lattice, offset)
    if ex is None:
        raise InexactError("theta coefficients need an exact lattice and offset")
    R2q = to_fraction(R2max)
    tab = shell_table(lattice, ex, R2q, 4 if P == "P4" else 0)
    return _dense(_theta_from_table(tab, lattice.dim, P), tab.scale, R2q, dense)


def average_theta_coefficients(rep: PeriodicSetRep, P: str = "1", R2max=10, dense: bool = True):
    """Coefficients of ``(1/m) sum_{i,j} theta_{t_i - t_j + L, P}``."""
    if P not in _POLYS:
        raise InputError(f"unsupported polynomial {P!r}; choose from {_POLYS}")
    if not rep.is_exact:
        raise InexactError("theta coefficients need exact input")
    R2q = to_fraction(R2max)
    s = rep.scale
    acc: dict[int, Fraction] = {}
    for cl in difference_classes(rep):
        tab = shell_table(rep.lattice, cl.offset, R2q, 4 if P == "P4" else 0, scale=s)
        w = Fraction(cl.multiplicity, rep.m)
        for key, v in _theta_from_table(tab, rep.n, P).items():
            acc[key] = acc.get(key, Fraction(0)) + w * v
    return _dense(acc, s, R2q, dense)


# cusp ratio decay --------------------------------------------------------------------------------


@dataclass(frozen=True)
class CuspDecay:
    samples: tuple[tuple[Fraction, Fraction], ...]
    fitted_exponent: float | None
    envelope_exponent: float | None
    envelope_at_R: float
    status: str

    def to_json(self) -> dict:
        return {"status": self.status,
                "fitted_exponent": None if self.fitted_exponent is None else format(self.fitted_exponent, ".17g"),
                "envelope_exponent": None if self.envelope_exponent is None
                else format(self.envelope_exponent, ".17g"),
                "envelope_at_R": format(self.envelope_at_R, ".17g"),
                "samples": [{"r2": frac_str(r2), "ratio": _num(q)} for r2, q in self.samples]}


def _decay_from(summaries: Sequence[ShellSummary]) -> CuspDecay:
    if len(summaries) < 5:
        raise InsufficientDataError(f"insufficient data: {len(summaries)} non-empty shells, need 5")
    samples = tuple((s.r2, s.ratio) for s in summaries)
    y = np.array([abs(float(q)) for _, q in samples])
    x = 0.5 * np.log([float(r2) for r2, _ in samples])
    R2 = float(samples[-1][0])
    near = [abs(float(q)) for r2, q in samples if float(r2) >= R2 / 2]
    env_R = max(near)
    if not np.any(y > 0):
        return CuspDecay(samples, None, None, 0.0, "identically zero")
    nz = y > 0
    fitted = float(np.polyfit(x[nz], np.log(y[nz]), 1)[0]) if nz.sum() >= 2 else None
    suffix = np.maximum.accumulate(y[::-1])[::-1]
    pos = suffix > 0
    env = float(np.polyfit(x[pos], np.log(suffix[pos]), 1)[0]) if pos.sum() >= 2 else None
    return CuspDecay(samples, fitted, env, env_R, "ok")


def cusp_decay_estimate(n: int, R2max=40, rep: PeriodicSetRep | None = None) -> CuspDecay:
    """Ratios ``|a_r| / (r^4 |Lambda(r)|)`` on every non-empty shell and their log-log slopes in ``r``.

    ``fitted_exponent`` is the least-squares slope; ``envelope_exponent`` the
    slope through the suffix maxima ``max_{r' >= r}`` of the ratio.
    """
    if rep is None:
        if n % 2 == 0 or n < 5:
            raise PreconditionError("cusp decay of D_n^+ needs odd n >= 5")
        rep = build_dn_plus(n)
    elif rep.n != n:
        raise InputError("dimension mismatch")
    return _decay_from(shell_summaries(rep, R2max))


# threshold scan ------------------------------------------------------------------------------------


def default_c_grid(n: int, points: int = 33) -> list[float]:
    """Geometric grid from ``n/8`` to ``4n``."""
    return [float(x) for x in np.geomspace(n / 8, 4 * n, points)]


@dataclass(frozen=True)
class ScanPoint:
    c: float
    translational_positive: bool
    shellwise_positive: bool
    obstructions: tuple[tuple[Fraction, str], ...]
    A1: float
    A2: float
    aggregate_positive: bool
    limiting_shell: Fraction | None
    tail_heuristic: str
    rigorous_tail: float
    rigorous_positive: bool
    verdict: str
    failed: tuple[tuple[str, Fraction | None], ...] = ()
    rows: tuple[dict, ...] = field(repr=False, default=())

    def to_json(self) -> dict:
        return {"c": format(self.c, ".17g"), "verdict": self.verdict,
                "translational_positive": self.translational_positive,
                "shellwise_positive": self.shellwise_positive,
                "obstructions": [{"r2": frac_str(r), "coefficient": w} for r, w in self.obstructions],
                "A1": format(self.A1, ".17g"), "A2": format(self.A2, ".17g"),
                "aggregate_positive": self.aggregate_positive,
                "limiting_shell": None if self.limiting_shell is None else frac_str(self.limiting_shell),
                "shells": "CERTIFIED-UP-TO-R2max", "tail": self.tail_heuristic,
                "rigorous_tail_bound": format(self.rigorous_tail, ".17g"),
                "rigorous_positive": self.rigorous_positive,
                "failed": [{"check": k, "r2": None if r is None else frac_str(r)} for k, r in self.failed]}


@dataclass(frozen=True)
class ThresholdScan:
    n: int
    R2max: Fraction
    r2_min: Fraction
    translational_threshold: Fraction
    decay: CuspDecay
    points: tuple[ScanPoint, ...]
    c_n_estimate: float | None
    c_n_rigorous: float | None
    shellwise_c_estimate: float | None
    last_obstruction: tuple[tuple[str, Fraction | None], ...]

    def to_json(self) -> dict:
        def f(x):
            return None if x is None else format(x, ".17g")

        return {"n": self.n, "R2max": frac_str(self.R2max), "r2_min": frac_str(self.r2_min),
                "translational_threshold": _num(self.translational_threshold),
                "c_n_estimate": f(self.c_n_estimate), "c_n_rigorous": f(self.c_n_rigorous),
                "shellwise_c_estimate": f(self.shellwise_c_estimate),
                "last_obstruction": [{"check": k, "r2": None if r is None else frac_str(r)}
                                     for k, r in self.last_obstruction],
                "method_flags": {"shells": "CERTIFIED-UP-TO-R2max", "tail": "HEURISTIC-TAIL",
                                 "rigorous_tail": "reported per point"},
                "cusp_decay": {k: v for k, v in self.decay.to_json().items() if k != "samples"},
                "points": [p.to_json() for p in self.points]}

    def csv_rows(self) -> list[dict]:
        return [r for p in self.points for r in p.rows]


def _scan_point(c: float, n: int, m: int, summaries, coefs, r2_min, R2max, decay, tail_fn, tol) -> ScanPoint:
    cq = Fraction(c)
    trans = cq > Fraction(n) / (2 * r2_min)
    obst = []
    t1, t2, rows = [], [], []
    for sm, abc in zip(summaries, coefs):
        N, r2 = sm.size, sm.r2
        base = r2 * N / n
        c1 = cq * abc.beta + cq * abc.gamma / 2 - base
        c2 = (cq * abc.beta - base) / 2
        if c1 <= 0:
            obst.append((r2, "coeff1"))
        if c2 <= 0:
            obst.append((r2, "coeff2"))
        w = float(m * sm.nu) * math.exp(-c * float(r2))
        t1.append(w * float(c1))
        t2.append(w * float(c2))
        rows.append({"c": format(c, ".17g"), "r2": frac_str(r2), "size": N, "Z": frac_str(sm.Z),
                     "a_r": frac_str(sm.a_r), "coeff1": format(float(c1), ".17g"),
                     "coeff2": format(float(c2), ".17g"),
                     "translational_factor": format(float(2 * cq * r2 / n - 1), ".17g")})
    A1, A2 = math.fsum(t1), math.fsum(t2)
    margin1 = tol * math.fsum(abs(x) for x in t1)
    margin2 = tol * math.fsum(abs(x) for x in t2)
    agg = A1 > margin1 and A2 > margin2
    worst = int(np.argmin(np.minimum(t1, t2))) if t1 else None
    limiting = summaries[worst].r2 if worst is not None and min(t1[worst], t2[worst]) < 0 else None
    # heuristic tail: brackets beyond R2max stay positive if they do at R2max
    if decay.envelope_exponent is None or decay.status == "identically zero":
        tail = "HEURISTIC-TAIL" if decay.status == "identically zero" else "INCONCLUSIVE"
        tail_ok = decay.status == "identically zero"
    elif decay.envelope_exponent >= 0:
        tail, tail_ok = "INCONCLUSIVE", False
    else:
        mono = 1 - (n + 2) / (2 * c * float(R2max))
        K = max((n + 2) / (n - 1), n * (n + 2) / (2 * (n - 1)))
        tail_ok = mono - K * decay.envelope_at_R > 0
        tail = "HEURISTIC-TAIL"
    rt1, rt2 = tail_fn(c)
    rig = (A1 - rt1 > margin1) and (A2 - rt2 > margin2)
    failed = []
    if not trans:
        failed.append(("translational", r2_min))
    if not A1 > margin1:
        failed.append(("lattice coeff1 total", limiting))
    if not A2 > margin2:
        failed.append(("lattice coeff2 total", limiting))
    if not tail_ok:
        failed.append(("tail", None))
    if trans and agg and tail_ok:
        verdict = "POSITIVE"
    elif trans and agg and tail == "INCONCLUSIVE":
        verdict = "INCONCLUSIVE"
    else:
        verdict = "NOT-POSITIVE"
    return ScanPoint(c, bool(trans), not obst, tuple(obst), A1, A2, agg, limiting, tail, max(rt1, rt2),
                     bool(trans and rig), verdict, tuple(failed), tuple(rows))


def _settled(points, ok) -> float | None:
    """Smallest grid ``c`` from which every larger grid point passes."""
    best = None
    for p in reversed(points):
        if not ok(p):
            break
        best = p.c
    return best


def threshold_scan(n: int, c_grid: Sequence[float] | None = None, R2max=40, tol: float = 1e-12,
                   workers: int = 1) -> ThresholdScan:
    """Scan ``c`` for positivity of the Hessian blocks of ``D_n^+``.

    At each ``c``: translations are positive iff ``c > n / (2 r_min^2)``; the
    lattice block is judged on the totals ``A_k(c) = sum_r m nu_r coeff_k(r, c)
    exp(-c r^2)`` over the certified shells, the tail beyond ``R2max`` by the
    decaying cusp-ratio envelope (heuristic). A rigorous tail bound is
    reported alongside. Per-shell signs are listed as obstructions.
    """
    from .energy import tail_sum_bound

    if n % 2 == 0 or n < 9:
        raise PreconditionError("threshold scan needs odd n >= 9")
    grid = default_c_grid(n) if c_grid is None else [float(c) for c in c_grid]
    if not grid or any(not (c > 0) for c in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("c grid must be positive and increasing")
    R2q = to_fraction(R2max)
    rep = build_dn_plus(n)
    m = rep.m
    summaries = shell_summaries(rep, R2q)
    coefs = [abc_coefficients(s.moments) for s in summaries]
    decay = _decay_from(summaries)
    r2_min = summaries[0].r2
    L = rep.lattice

    def tail_fn(c):
        t2 = tail_sum_bound(L, c, float(R2q), 2.0)
        t1 = tail_sum_bound(L, c, float(R2q), 1.0)
        return m * m * (2 * c / n * t2 + t1 / n), m * m * 0.5 * (c / n * t2 + t1 / n)

    def run(c):
        return _scan_point(c, n, m, summaries, coefs, r2_min, R2q, decay, tail_fn, tol)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            points = tuple(ex.map(run, grid))
    else:
        points = tuple(run(c) for c in grid)
    est = _settled(points, lambda p: p.verdict == "POSITIVE")
    rig = _settled(points, lambda p: p.rigorous_positive and p.tail_heuristic != "INCONCLUSIVE")
    shellwise = _settled(points, lambda p: p.translational_positive and p.shellwise_positive)
    last = ()
    if est is not None:
        below = [p for p in points if p.c < est]
        if below:
            last = below[-1].failed
    return ThresholdScan(n, R2q, r2_min, Fraction(n) / (2 * r2_min), decay, points, est, rig, shellwise, last)
