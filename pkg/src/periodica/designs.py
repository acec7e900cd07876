"""Exact spherical design tests on (weighted) shells and the criticality certificate.

All tests compare integer power sums of ``W = scale * w`` with the invariant
tensors a design of the given strength must have:

* odd degree: the zero tensor;
* degree 2: ``T * key / n * Id``;
* degree 4: ``T * key^2 / (n (n+2)) * (d_ij d_kl + d_ik d_jl + d_il d_jk)``,

where ``key = scale^2 r^2`` and ``T`` is the total (integer) weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InputError
from .exact import frac_str, lcm_of_denominators, to_fraction
from .moments import PointCloud, _pair_index, point_cloud, shell_table, sym_pairs
from .periodic import PeriodicSetRep, difference_classes


@dataclass(frozen=True, eq=False)
class Shell:
    """Vectors ``vectors / scale`` of common squared norm ``r2``, optionally weighted."""

    r2: Fraction
    vectors: np.ndarray
    scale: int
    weights: tuple[Fraction, ...] | None = None

    def __post_init__(self):
        V = np.asarray(self.vectors)
        if V.ndim != 2:
            raise InputError("shell vectors must be a 2-d array")
        key = self.r2 * self.scale * self.scale
        if key.denominator != 1 or (len(V) and np.any((V.astype(object) ** 2).sum(axis=1) != int(key))):
            raise InputError("shell vectors do not all have the stated norm")
        if self.weights is not None and len(self.weights) != len(V):
            raise InputError("one weight per vector required")
        object.__setattr__(self, "vectors", V)

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence], weights=None) -> "Shell":
        ex = [[to_fraction(x) for x in v] for v in vectors]
        if not ex:
            raise InputError("empty shell")
        s = lcm_of_denominators(x for v in ex for x in v)
        W = np.array([[int(x * s) for x in v] for v in ex], dtype=object)
        W = W.astype(np.int64) if np.abs(W).max() < 2**31 else W
        r2 = sum((x * x for x in ex[0]), Fraction(0))
        wts = None if weights is None else tuple(to_fraction(w) for w in weights)
        return cls(r2, W, s, wts)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def key(self) -> int:
        return int(self.r2 * self.scale * self.scale)

    def integer_weights(self) -> tuple[np.ndarray, int]:
        """Weights times their common denominator, and that denominator."""
        if self.weights is None:
            return np.ones(len(self.vectors), np.int64), 1
        d = lcm_of_denominators(self.weights)
        return np.array([int(w * d) for w in self.weights], dtype=np.int64), d

    def power_sums(self, degree: int = 4) -> dict[int, np.ndarray]:
        """Weighted integer power sums ``sum w_int W^(x)d``, d = 0..degree."""
        wi, _ = self.integer_weights()
        V = self.vectors
        safe = (len(V) * max(1, self.key) ** (degree / 2) * int(wi.max() if len(wi) else 1)) < 2**62
        if not safe:
            V = V.astype(object)
            wi = wi.astype(object)
        return _power_sums(V, wi, degree)


def _power_sums(V, wi, degree):
    n = V.shape[1]
    idx = _pair_index(n)
    pi, pj = sym_pairs(n)
    out = {0: np.array(wi.sum())}
    if degree >= 1:
        out[1] = wi @ V
    if degree >= 2:
        P = V[:, pi] * V[:, pj]
        out[2] = (wi @ P)[idx]
    if degree >= 3:
        out[3] = ((P * wi[:, None]).T @ V)[idx]
    if degree >= 4:
        PP = (P * wi[:, None]).T @ P
        out[4] = PP[idx[:, :, None, None], idx[None, None, :, :]]
    return out


def _delta4(n: int) -> np.ndarray:
    d = np.eye(n, dtype=np.int64)
    return (np.einsum("ij,kl->ijkl", d, d) + np.einsum("ik,jl->ijkl", d, d)
            + np.einsum("il,jk->ijkl", d, d))


def _degree_ok(d: int, M: np.ndarray, total: int, key: int, n: int) -> tuple[bool, str | None]:
    """Compare an integer power sum with the invariant tensor; return (ok, witness)."""
    M = np.asarray(M, dtype=object)
    if d % 2 == 1:
        nz = np.argwhere(M != 0)
        if len(nz):
            i = tuple(int(x) for x in nz[0])
            return False, f"degree-{d} sum entry {i} = {M[i]} (expected 0)"
        return True, None
    if d == 2:
        lhs = M * n
        rhs = np.eye(n, dtype=object) * (total * key)
    elif d == 4:
        lhs = M * (n * (n + 2))
        rhs = _delta4(n).astype(object) * (total * key * key)
    else:
        raise ValueError(d)
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        i = tuple(int(x) for x in bad[0])
        exp = Fraction(int(rhs[i]), n if d == 2 else n * (n + 2))
        return False, f"degree-{d} sum entry {i} = {M[i]}, invariant value {frac_str(exp)}"
    return True, None


def _strength(sums: dict[int, np.ndarray], key: int, n: int, tmax: int = 4) -> tuple[int, str | None]:
    total = int(sums[0])
    for d in range(1, tmax + 1):
        ok, wit = _degree_ok(d, sums[d], total, key, n)
        if not ok:
            return d - 1, wit
    return tmax, None


def is_balanced(shell: Shell) -> bool:
    """True iff the (unweighted) vectors sum to zero."""
    return not np.any(np.asarray(shell.vectors.sum(axis=0), dtype=object) != 0)


def is_weighted_2design(shell: Shell) -> tuple[bool, Fraction | None]:
    """(True, c_r) iff sum nu w = 0 and sum nu w w^T = c_r Id; c_r = r^2 sum(nu) / n."""
    sums = shell.power_sums(2)
    total, key, n = int(sums[0]), shell.key, shell.n
    ok1, _ = _degree_ok(1, sums[1], total, key, n)
    ok2, _ = _degree_ok(2, sums[2], total, key, n)
    if not (ok1 and ok2):
        return False, None
    _, den = shell.integer_weights()
    return True, Fraction(int(sums[2][0, 0]), den * shell.scale ** 2)


def design_strength(shell: Shell, tmax: int = 4) -> int:
    """Largest t <= tmax such that the weighted shell is a spherical t-design."""
    if not 1 <= tmax <= 4:
        raise InputError("design strength is tested up to degree 4")
    sums = shell.power_sums(tmax)
    return _strength(sums, shell.key, shell.n, tmax)[0]


def fourth_moment_deviation(shell: Shell) -> Fraction:
    """``sum_w P(w)`` over the (unweighted) shell, ``P(x) = sum x_i^4 - 3/(n+2) |x|^4``."""
    V = shell.vectors.astype(object)
    n = shell.n
    Z = Fraction(int((V ** 4).sum()), shell.scale ** 4)
    return Z - Fraction(3, n + 2) * shell.r2 ** 2 * len(V)


# criticality certificate ------------------------------------------------------------------


@dataclass(frozen=True)
class DesignCertificate:
    r2: Fraction | float
    balanced: bool
    design2: bool
    c_r: Fraction | float | None
    strength: int
    a_r: Fraction | float
    size: int
    witness: str | None = None

    def to_json(self) -> dict:
        def num(x):
            if x is None:
                return None
            if isinstance(x, Fraction):
                return {"value": format(float(x), ".17g"), "exact": frac_str(x)}
            return {"value": format(float(x), ".17g")}

        out = {"r2": num(self.r2), "balanced": self.balanced, "design2": self.design2,
               "c_r": num(self.c_r), "strength": self.strength, "a_r": num(self.a_r),
               "size": self.size}
        if self.witness:
            out["witness"] = self.witness
        return out


@dataclass(frozen=True)
class CriticalityCertificate:
    R2max: Fraction | float
    rigorous: bool
    shells: tuple[DesignCertificate, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(s.balanced and s.design2 for s in self.shells)

    @property
    def status(self) -> str:
        if not self.passed:
            return "FAIL"
        return "PASS" if self.rigorous else "NUMERICAL"

    def failures(self) -> list[DesignCertificate]:
        return [s for s in self.shells if not (s.balanced and s.design2)]

    def to_json(self) -> dict:
        r2 = self.R2max
        return {"status": self.status, "rigorous": self.rigorous,
                "R2max": frac_str(r2) if isinstance(r2, Fraction) else format(float(r2), ".17g"),
                "shells": [s.to_json() for s in self.shells]}


def certify_critical(rep: PeriodicSetRep, R2max, degree: int = 4) -> CriticalityCertificate:
    """Check every shell up to ``R2max``: each ``Lambda_x(r)`` balanced and ``Lambda(r)`` a weighted 2-design.

    Exact input gives a rigorous certificate; float input a numerical one.
    """
    if not rep.is_exact:
        return _certify_float(rep, float(R2max))
    R2q = to_fraction(R2max)
    classes = difference_classes(rep)
    s = rep.scale
    n, m = rep.n, rep.m
    tables = [shell_table(rep.lattice, cl.offset, R2q, degree, scale=s) for cl in classes]
    cls_of = {}
    for ci, cl in enumerate(classes):
        for p in cl.pairs:
            cls_of[p] = ci
    keys = sorted(set().union(*[set(int(k) for k in t.keys) for t in tables]) - {0})
    rows = [{int(k): r for r, k in enumerate(t.keys)} for t in tables]
    zero_n = np.zeros(n, dtype=object)
    out = []
    for key in keys:
        # balanced: Lambda_{t_k}(r) for every k
        bal, wit = True, None
        for k in range(m):
            tot = zero_n.copy()
            for i in range(m):
                ci = cls_of[(i, k)]
                r = rows[ci].get(key)
                if r is not None:
                    tot = tot + np.asarray(tables[ci].moments[1][r], dtype=object)
            if np.any(tot != 0):
                bal = False
                wit = wit or f"coset {k}: vector sum ({', '.join(frac_str(Fraction(int(x), s)) for x in tot)})"
        # weighted moments over Lambda(r): each pair counts once, total weight m * sum(nu)
        sums = {d: 0 for d in range(degree + 1)}
        size = 0
        Z = 0
        for ci, cl in enumerate(classes):
            r = rows[ci].get(key)
            if r is None:
                continue
            t = tables[ci]
            size += int(t.count[r])
            if degree >= 4:
                m4 = t.moments[4][r]
                Z += sum(int(m4[i, i, i, i]) for i in range(n))
            for d in range(degree + 1):
                sums[d] = sums[d] + cl.multiplicity * np.asarray(t.moment(d)[r], dtype=object)
        total = int(sums[0])
        ok1, w1 = _degree_ok(1, sums[1], total, key, n)
        ok2, w2 = _degree_ok(2, sums[2], total, key, n) if degree >= 2 else (False, "degree < 2")
        design2 = ok1 and ok2
        strength, wst = _strength(sums, key, n, degree)
        r2 = Fraction(key, s * s)
        c_r = Fraction(int(sums[2][0, 0]), m * s * s) if design2 else None
        if degree >= 4:
            a_r = Fraction(Z, s ** 4) - Fraction(3, n + 2) * r2 * r2 * size
        else:
            a_r = Fraction(0)
        witness = wit or (w1 if not ok1 else None) or (w2 if not ok2 else None)
        out.append(DesignCertificate(r2, bal, design2, c_r, strength, a_r, size, witness))
    return CriticalityCertificate(R2q, True, tuple(out))


def _certify_float(rep: PeriodicSetRep, R2max: float, tol: float = 1e-9) -> CriticalityCertificate:
    from .lattice import float_shell_breaks

    classes = difference_classes(rep)
    clouds = [point_cloud(rep.lattice, cl.offset, R2max) for cl in classes]
    allnorm = np.sort(np.concatenate([c.norms for c in clouds]))
    allnorm = allnorm[allnorm > 1e-12]
    starts = list(float_shell_breaks(allnorm)) + [len(allnorm)]
    levels = [allnorm[a:b].mean() for a, b in zip(starts[:-1], starts[1:])]
    n, m = rep.n, rep.m
    cls_of = {p: ci for ci, cl in enumerate(classes) for p in cl.pairs}
    out = []
    for r2 in levels:
        sel = [np.abs(c.norms - r2) <= 1e-9 * max(1.0, r2) for c in clouds]
        scale = max(1.0, r2)
        bal, wit = True, None
        for k in range(m):
            tot = sum(clouds[cls_of[(i, k)]].vectors[sel[cls_of[(i, k)]]].sum(axis=0) for i in range(m))
            if np.max(np.abs(tot)) > tol * scale * 10:
                bal, wit = False, f"coset {k}: vector sum {tot.tolist()}"
        S0 = sum(cl.multiplicity * sel[ci].sum() for ci, cl in enumerate(classes))
        S2 = sum(cl.multiplicity * np.einsum("ki,kj->ij", clouds[ci].vectors[sel[ci]], clouds[ci].vectors[sel[ci]])
                 for ci, cl in enumerate(classes))
        want = S0 * r2 / n
        d2 = bool(np.max(np.abs(S2 - want * np.eye(n))) <= tol * max(1.0, want))
        size = int(sum(s.sum() for s in sel))
        V = np.concatenate([c.vectors[s] for c, s in zip(clouds, sel)])
        a_r = float((V ** 4).sum() - 3.0 / (n + 2) * r2 * r2 * len(V))
        wts = np.concatenate([np.full(s.sum(), cl.multiplicity / m) for cl, s in zip(classes, sel)])
        strength = _float_strength(V, wts, r2, tol)
        out.append(DesignCertificate(float(r2), bal, d2, want / m if d2 else None,
                                     strength, a_r, size, wit))
    return CriticalityCertificate(R2max, False, tuple(out))


def _float_strength(V: np.ndarray, wts: np.ndarray, r2: float, tol: float) -> int:
    n = V.shape[1]
    T = wts.sum()
    for d in range(1, 5):
        if d % 2:
            M = np.einsum("k,k...->...", wts, _outer_power(V, d))
            ok = np.max(np.abs(M)) <= tol * max(1.0, T * r2 ** (d / 2))
        elif d == 2:
            M = np.einsum("k,ki,kj->ij", wts, V, V)
            ok = np.max(np.abs(M - T * r2 / n * np.eye(n))) <= tol * max(1.0, T * r2)
        else:
            M = np.einsum("k,k...->...", wts, _outer_power(V, 4))
            want = _delta4(n) * (T * r2 * r2 / (n * (n + 2)))
            ok = np.max(np.abs(M - want)) <= tol * max(1.0, T * r2 * r2)
        if not ok:
            return d - 1
    return 4


def _outer_power(V: np.ndarray, d: int) -> np.ndarray:
    out = V
    for _ in range(d - 1):
        out = out[..., None] * V.reshape((V.shape[0],) + (1,) * (out.ndim - 1) + (V.shape[1],))
    return out
