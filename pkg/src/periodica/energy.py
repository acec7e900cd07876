"""Gaussian energy of periodic sets, its deformations, gradient and Hessian.

For ``f_c(r^2) = exp(-c r^2)`` the energy of ``Lambda = union_i (t_i + L)`` is

    E = (1/m) sum_{i,j} sum_{0 != w in t_i - t_j + L} exp(-c |w|^2),

and the deformed energy at ``(H, t)`` (``H`` symmetric, trace zero) replaces
``|w|^2`` by ``exp(H)[w + t_i - t_j]``. Parameters are coordinates in an
orthonormal basis of trace-zero symmetric matrices followed by the ``m``
translation vectors, so the Hessian is an honest second-derivative matrix
``Q`` and the second-order Taylor term of ``E`` is ``x^T Q x / 2``.

Sums are truncated at a squared radius ``R2`` picked from a rigorous tail
bound: every coset of ``L`` has at most ``kappa (rho + delta)^n`` points in
the ball of radius ``rho``, with ``kappa = vol(B^n) / covol`` and ``delta``
the circumradius of the centred fundamental cell. Summation by parts turns
that count into incomplete gamma integrals.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np
from scipy.linalg import expm
from scipy.special import gamma, gammaincc

from .errors import InputError, PreconditionError, ToleranceError
from .lattice import Lattice, iter_coset_ball
from .moments import (
    DP_LIMIT,
    PointCloud,
    ShellTable,
    ball_count_bound,
    coordinate_table_size,
    point_cloud,
    shell_table,
)
from .periodic import PeriodicSetRep, difference_classes, two_periodic_structure

ENUM_LIMIT = 2e7
CLOUD_CACHE_LIMIT = 2e6
SQ2 = math.sqrt(2.0)


def _check_c(c) -> float:
    c = float(c)
    if not (c > 0 and math.isfinite(c)):
        raise InputError("c must be a positive finite number")
    return c


# parameters --------------------------------------------------------------------------------


def trace_zero_basis(n: int) -> np.ndarray:
    """Orthonormal (Frobenius) basis of symmetric trace-zero n x n matrices.

    Diagonal elements come first, as normalised ``diag(1, ..., 1, -k, 0, ...)``,
    then ``(E_ij + E_ji) / sqrt(2)`` for ``i < j``.
    """
    out = []
    for k in range(1, n):
        d = np.zeros(n)
        d[:k] = 1.0
        d[k] = -float(k)
        out.append(np.diag(d / math.sqrt(k * (k + 1))))
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1 / SQ2
            out.append(e)
    return np.array(out).reshape(len(out), n, n)


def n_params(n: int, m: int) -> int:
    return n * (n + 1) // 2 - 1 + m * n


@dataclass(frozen=True, eq=False)
class DeformationParams:
    H: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise InputError("H must be square")
        if t.ndim != 2 or t.shape[1] != H.shape[0]:
            raise InputError("t must be an m x n array")
        scale = max(1.0, float(np.abs(H).max()))
        if np.abs(H - H.T).max() > 1e-12 * scale or abs(np.trace(H)) > 1e-12 * scale * len(H):
            raise InputError("H must be symmetric with zero trace")
        object.__setattr__(self, "H", (H + H.T) / 2)
        object.__setattr__(self, "t", t)

    @classmethod
    def zeros(cls, n: int, m: int) -> "DeformationParams":
        return cls(np.zeros((n, n)), np.zeros((m, n)))

    @classmethod
    def from_vector(cls, x, n: int, m: int) -> "DeformationParams":
        x = np.asarray(x, dtype=float)
        B = trace_zero_basis(n)
        k = len(B)
        if x.shape != (k + m * n,):
            raise InputError("parameter vector has wrong length")
        return cls(np.tensordot(x[:k], B, axes=(0, 0)), x[k:].reshape(m, n))

    def to_vector(self) -> np.ndarray:
        B = trace_zero_basis(self.H.shape[0])
        h = np.tensordot(B, self.H, axes=([1, 2], [0, 1]))
        return np.concatenate([h, self.t.ravel()])


# tail bounds ----------------------------------------------------------------------------------


def _tail_integral(kappa: float, delta: float, n: int, c: float, rho0: float, p: float) -> float:
    """Bound for ``sum_{|x| > rho0} |x|^(2p) exp(-c |x|^2)`` over a set with
    at most ``kappa (rho + delta)^n`` points in every ball of radius rho."""
    rho0 = max(rho0, 0.0)
    extra = 0.0
    if p > 0 and rho0 * rho0 < p / c:
        r1 = math.sqrt(p / c)
        extra = kappa * (r1 + delta) ** n * (p / c) ** p * math.exp(-p)
        rho0 = r1
    total = 0.0
    x = c * rho0 * rho0
    for k in range(n + 1):
        a = (k + 2 * p + 2) / 2
        total += math.comb(n, k) * delta ** (n - k) * 0.5 * c ** (-a) * float(gammaincc(a, x) * gamma(a))
    return extra + 2 * c * kappa * total


def _kappa(lattice: Lattice) -> float:
    n = lattice.dim
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) / lattice.covolume


def tail_sum_bound(lattice: Lattice, c: float, R2: float, p: float = 0.0, extra_radius: float = 0.0) -> float:
    """Bound on ``sum |x|^(2p) exp(-c |x|^2)`` over ``|x|^2 > R2`` in any coset of ``lattice``."""
    return _tail_integral(_kappa(lattice), lattice.cell_radius + extra_radius, lattice.dim, c,
                          math.sqrt(max(R2, 0.0)), p)


def _poly_tail(lattice: Lattice, c: float, R2: float, poly: dict[float, float]) -> float:
    return sum(coef * tail_sum_bound(lattice, c, R2, p) for p, coef in poly.items())


def energy_tail(rep: PeriodicSetRep, c: float, R2: float) -> float:
    return rep.m * tail_sum_bound(rep.lattice, c, R2)


def gradient_tail(rep: PeriodicSetRep, c: float, R2: float) -> float:
    m = rep.m
    gh = c * m * tail_sum_bound(rep.lattice, c, R2, 1.0)
    gt = 4 * c * math.sqrt(m) * tail_sum_bound(rep.lattice, c, R2, 0.5)
    return math.hypot(gh, gt)


def hessian_tail(rep: PeriodicSetRep, c: float, R2: float) -> float:
    """Bound on the spectral norm of the neglected part of the Hessian."""
    poly = {2.0: c, 1.5: 4 * SQ2 * c, 1.0: 8 * c + 1, 0.5: 4 * SQ2, 0.0: 4.0}
    return c * rep.m * _poly_tail(rep.lattice, c, R2, poly)


def choose_R2(bound: Callable[[float], float], tol: float, start: float = 1.0) -> Fraction:
    """Smallest (up to 1/16) squared radius whose tail bound is at most ``tol``."""
    if not tol > 0:
        raise InputError("tol must be positive")
    hi = start
    while bound(hi) > tol:
        hi *= 2
        if hi > 1e6:
            raise ToleranceError("tol unreachable (R2 overflow)")
    lo = hi / 2 if hi > start else 0.0
    for _ in range(40):
        mid = (lo + hi) / 2
        if bound(mid) > tol:
            lo = mid
        else:
            hi = mid
    return Fraction(math.ceil(hi * 16), 16)


# cached per-class data ----------------------------------------------------------------------

_CACHE: "weakref.WeakKeyDictionary[PeriodicSetRep, dict]" = weakref.WeakKeyDictionary()


def _feasible(rep: PeriodicSetRep, R2: Fraction, exact: bool) -> None:
    if exact and coordinate_table_size(rep.lattice, (0,) * rep.n, R2, rep.scale) <= DP_LIMIT:
        return
    n = rep.n
    est = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * float(R2) ** (n / 2) / rep.lattice.covolume
    if est > ENUM_LIMIT:
        raise ToleranceError(f"tol unreachable (R2 overflow): R2 = {float(R2):.6g} needs too many points")


def class_tables(rep: PeriodicSetRep, R2, degree: int) -> list:
    """Per difference class: a ShellTable (exact input) or a PointCloud."""
    R2q = Fraction(R2)
    store = _CACHE.setdefault(rep, {}).setdefault("tables", {})
    for (r2c, dc), tabs in store.items():
        if r2c >= R2q and dc >= degree:
            if isinstance(tabs[0], ShellTable):
                return [t.restrict(R2q) for t in tabs]
            return [_restrict_cloud(t, float(R2q)) for t in tabs]
    _feasible(rep, R2q, rep.is_exact)
    classes = difference_classes(rep)
    if rep.is_exact:
        tabs = [shell_table(rep.lattice, cl.offset, R2q, degree, scale=rep.scale) for cl in classes]
    else:
        tabs = [point_cloud(rep.lattice, np.array(cl.offset, dtype=float), float(R2q)) for cl in classes]
    store[(R2q, degree)] = tabs
    return tabs


def _ball_estimate(lattice: Lattice, R2: float) -> float:
    n = lattice.dim
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * float(R2) ** (n / 2) / lattice.covolume


def _offset_blocks(lattice: Lattice, offset, R2: Fraction, exact: bool, store: dict, key) -> Iterator:
    """Float vector blocks of ``offset + L`` with norm at most ``R2``; cached when small."""
    if key in store:
        pc = store[key]
        yield pc.vectors, pc.norms
        return
    off = offset if exact else np.array(offset, dtype=float)
    r2 = R2 if exact else float(R2)
    if _ball_estimate(lattice, float(R2)) <= CLOUD_CACHE_LIMIT:
        pc = point_cloud(lattice, off, r2)
        store[key] = pc
        yield pc.vectors, pc.norms
        return
    for blk in iter_coset_ball(lattice, off, r2):
        yield blk.vectors, blk.norms


def class_blocks(rep: PeriodicSetRep, R2) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """``(class index, vectors, norms)`` blocks of every difference class ball (unperturbed norm <= R2)."""
    R2q = Fraction(R2)
    _feasible(rep, R2q, False)
    store = _CACHE.setdefault(rep, {}).setdefault("points", {})
    for ci, cl in enumerate(difference_classes(rep)):
        for V, N in _offset_blocks(rep.lattice, cl.offset, R2q, rep.is_exact, store, (R2q, ci)):
            yield ci, V, N


class _LogSum:
    """Running ``log sum exp(-c q)`` over blocks of ``q``."""

    def __init__(self, c: float):
        self.c = c
        self.q0 = math.inf
        self.s = 0.0
        self.count = 0

    def add(self, q: np.ndarray) -> None:
        if not len(q):
            return
        qm = float(q.min())
        if qm < self.q0:
            self.s *= math.exp(-self.c * (self.q0 - qm)) if self.q0 < math.inf else 0.0
            self.q0 = qm
        self.s += float(np.sum(np.exp(-self.c * (q - self.q0))))
        self.count += len(q)

    def log(self, factor: float) -> float:
        if self.count == 0:
            raise PreconditionError("no vectors inside the truncation radius")
        return math.log(factor * self.s) - self.c * self.q0


def _restrict_cloud(pc: PointCloud, R2: float) -> PointCloud:
    keep = pc.norms <= R2 * (1 + 1e-12)
    return PointCloud(pc.n, R2, pc.vectors[keep], pc.norms[keep])


# energy -------------------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    value: float
    log_value: float
    tail_bound: float
    R2: Fraction
    rigorous: bool
    shells: int = 0

    def to_json(self) -> dict:
        return {"value": format(self.value, ".17g"), "log_value": format(self.log_value, ".17g"),
                "tail_bound": format(self.tail_bound, ".17g"), "R2": str(self.R2),
                "rigorous": self.rigorous, "shells": self.shells}


def _resolve_R2(rep, c, tol, R2, tail_fn) -> Fraction:
    if R2 is not None:
        return Fraction(R2)
    return choose_R2(lambda r: tail_fn(rep, c, r), tol)


def _energy_terms(rep: PeriodicSetRep, R2q: Fraction) -> tuple[np.ndarray, np.ndarray, int]:
    """Squared norms, weights per point and shell count of the nonzero vectors up to ``R2q``."""
    tabs = class_tables(rep, R2q, 0)
    classes = difference_classes(rep)
    terms_r2, terms_w = [], []
    nshell = set()
    for cl, tab in zip(classes, tabs):
        if isinstance(tab, ShellTable):
            mask = tab.nonzero()
            terms_r2.append(tab.r2_float()[mask])
            terms_w.append(cl.multiplicity * np.asarray(tab.count[mask], dtype=float))
            nshell.update(int(k) for k in tab.keys[mask])
        else:
            mask = tab.norms > 0
            terms_r2.append(tab.norms[mask])
            terms_w.append(np.full(mask.sum(), float(cl.multiplicity)))
    r2 = np.concatenate(terms_r2)
    return r2, np.concatenate(terms_w) / rep.m, len(nshell) if rep.is_exact else len(r2)


def energy(rep: PeriodicSetRep, c: float, tol: float = 1e-12, R2=None) -> EnergyReport:
    """``E(f_c, Lambda)`` truncated so that the neglected tail is at most ``tol``."""
    c = _check_c(c)
    R2q = _resolve_R2(rep, c, tol, R2, energy_tail)
    r2, w, nshell = _energy_terms(rep, R2q)
    # keep the first shell so that log_value stays meaningful when the value underflows
    while len(r2) == 0 and R2 is None:
        R2q = max(2 * R2q, Fraction(1, rep.scale ** 2) if rep.is_exact else Fraction(1, 64))
        r2, w, nshell = _energy_terms(rep, R2q)
    if len(r2) == 0:
        raise PreconditionError("no vectors inside the truncation radius")
    r0 = r2.min()
    scaled = w * np.exp(-c * (r2 - r0))
    order = np.argsort(-r2, kind="stable")
    s = float(np.sum(scaled[order]))
    log_value = math.log(s) - c * r0
    value = math.exp(log_value) if log_value > -745 else 0.0
    return EnergyReport(value, log_value, energy_tail(rep, c, float(R2q)), R2q, rep.is_exact, nshell)


def deformed_energy(rep: PeriodicSetRep, params: DeformationParams, c: float, tol: float = 1e-12,
                    R2=None) -> EnergyReport:
    """``E_f(H, t)``; the summation set is fixed by the unperturbed norms, so it is smooth in (H, t)."""
    c = _check_c(c)
    n, m = rep.n, rep.m
    if params.H.shape != (n, n) or params.t.shape != (m, n):
        raise InputError("parameters do not match the representation")
    T = params.t
    dmax = max((float(np.linalg.norm(T[i] - T[j])) for i in range(m) for j in range(m)), default=0.0)
    lam = math.exp(float(np.linalg.eigvalsh(params.H).min()))

    def tail(rep_, c_, r2):
        rho = math.sqrt(max(r2, 0.0)) - dmax
        return m * _tail_integral(_kappa(rep.lattice), rep.lattice.cell_radius + dmax, n, c * lam,
                                  max(rho, 0.0), 0.0)

    R2q = _resolve_R2(rep, c, tol, R2, tail) if R2 is None else Fraction(R2)
    G = expm(params.H)
    classes = difference_classes(rep)
    acc = _LogSum(c)
    for ci, V, N in class_blocks(rep, R2q):
        for (i, j) in classes[ci].pairs:
            Y = V[N > 0] if i == j else V + (T[i] - T[j])
            acc.add(np.einsum("ki,ij,kj->k", Y, G, Y))
    log_value = acc.log(1.0 / m)
    value = math.exp(log_value) if log_value > -745 else 0.0
    return EnergyReport(value, log_value, tail(rep, c, float(R2q)), R2q, False, acc.count)


# gradient -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class Gradient:
    G_H: np.ndarray
    g_t: np.ndarray
    vector: np.ndarray
    tail_bound: float
    R2: Fraction
    exact_zero: bool | None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def gradient(rep: PeriodicSetRep, c: float, tol: float = 1e-12, R2=None) -> Gradient:
    """Gradient at ``(H, t) = 0``.

    For exact input the trace-zero part of ``sum w w^T`` and the vector sums
    are formed shell by shell in integers before any exponential weight is
    applied, so a critical configuration gives an exactly zero gradient and
    ``exact_zero`` records that.
    """
    c = _check_c(c)
    n, m = rep.n, rep.m
    R2q = _resolve_R2(rep, c, tol, R2, gradient_tail)
    tabs = class_tables(rep, R2q, 2)
    classes = difference_classes(rep)
    cls_of = {p: ci for ci, cl in enumerate(classes) for p in cl.pairs}
    B = trace_zero_basis(n)
    if rep.is_exact:
        s = rep.scale
        keys = sorted(set().union(*[set(int(k) for k in t.keys) for t in tabs]) - {0})
        rows = [{int(k): r for r, k in enumerate(t.keys)} for t in tabs]
        GH = np.zeros((n, n))
        gt = np.zeros((m, n))
        exact_zero = True
        for key in keys:
            wgt = math.exp(-c * key / (s * s))
            S2 = np.zeros((n, n), dtype=object)
            for ci, cl in enumerate(classes):
                r = rows[ci].get(key)
                if r is not None:
                    S2 = S2 + cl.multiplicity * np.asarray(tabs[ci].moments[2][r], dtype=object)
            P = S2 * n - np.eye(n, dtype=object) * int(np.trace(S2))
            if np.any(P != 0):
                exact_zero = False
                GH += np.array(P.tolist(), dtype=float) * (wgt / (n * s * s))
            for k in range(m):
                S1 = np.zeros(n, dtype=object)
                for j in range(m):
                    ci = cls_of[(k, j)]
                    r = rows[ci].get(key)
                    if r is not None:
                        S1 = S1 + np.asarray(tabs[ci].moments[1][r], dtype=object)
                if np.any(S1 != 0):
                    exact_zero = False
                    gt[k] += np.array(S1.tolist(), dtype=float) * (wgt / s)
        GH *= -c / m
        gt *= -4 * c / m
    else:
        wm = [t.weighted(c, 2) for t in tabs]
        S2 = sum(cl.multiplicity * w[2] for cl, w in zip(classes, wm))
        GH = -(c / m) * (S2 - np.trace(S2) / n * np.eye(n))
        gt = np.zeros((m, n))
        for k in range(m):
            for j in range(m):
                gt[k] += wm[cls_of[(k, j)]][1]
        gt *= -4 * c / m
        exact_zero = None
    h = np.tensordot(B, GH, axes=([1, 2], [0, 1]))
    vec = np.concatenate([h, gt.ravel()])
    return Gradient(GH, gt, vec, gradient_tail(rep, c, float(R2q)), R2q, exact_zero)


# Hessian ------------------------------------------------------------------------------------


def gauge_basis(n: int, m: int) -> np.ndarray:
    """Orthonormal columns spanning common translations of all cosets."""
    k = n_params(n, m) - m * n
    G = np.zeros((n_params(n, m), n))
    for a in range(n):
        for i in range(m):
            G[k + i * n + a, a] = 1 / math.sqrt(m)
    return G


def gauge_complement(n: int, m: int) -> np.ndarray:
    """Orthonormal columns spanning the complement of :func:`gauge_basis`."""
    k = n_params(n, m) - m * n
    D = n_params(n, m)
    cols = [np.eye(D)[:, a] for a in range(k)]
    for j in range(1, m):
        h = np.zeros(m)
        h[:j] = 1.0
        h[j] = -float(j)
        h /= math.sqrt(j * (j + 1))
        for a in range(n):
            v = np.zeros(D)
            v[k + np.arange(m) * n + a] = h
            cols.append(v)
    return np.array(cols).T.reshape(D, len(cols))


@dataclass(frozen=True, eq=False)
class HessianForm:
    """Second-derivative matrix ``Q`` of ``E_f`` at ``(H, t) = 0``."""

    Q: np.ndarray
    n: int
    m: int
    c: float
    R2: Fraction
    tail_bound: float

    def form(self, params: DeformationParams) -> float:
        """The second-order Taylor term ``x^T Q x / 2``."""
        x = params.to_vector()
        return 0.5 * float(x @ self.Q @ x)

    def restricted(self) -> np.ndarray:
        C = gauge_complement(self.n, self.m)
        return C.T @ self.Q @ C

    def rounding_bound(self) -> float:
        D = self.Q.shape[0]
        return 64 * D * np.finfo(float).eps * float(np.abs(self.Q).max() if self.Q.size else 0.0) * D


def _assemble_hessian(rep: PeriodicSetRep, c: float, classes, wm) -> np.ndarray:
    n, m = rep.n, rep.m
    B = trace_zero_basis(n)
    k = len(B)
    D = k + m * n
    Q = np.zeros((D, D))
    S2 = sum(cl.multiplicity * w[2] for cl, w in zip(classes, wm))
    S4 = sum(cl.multiplicity * w[4] for cl, w in zip(classes, wm))
    K4 = np.einsum("apq,pqrs,brs->ab", B, S4, B)
    BB = np.einsum("apq,bqr->abpr", B, B)
    K2 = np.einsum("abpr,rp->ab", BB, S2)
    K2 = (K2 + K2.T) / 2
    Q[:k, :k] = (c / m) * (c * K4 - K2)
    eye = np.eye(n)
    for cl, w in zip(classes, wm):
        S0, S1, S2c, S3 = w[0], w[1], w[2], w[3]
        Kt = 2 * (c / m) * (2 * c * S2c - S0 * eye)
        Ta = np.einsum("apq,pqr->ar", B, S3)
        V = (c / m) * (-2 * np.einsum("apq,q->ap", B, S1) + 2 * c * Ta)
        for (i, j) in cl.pairs:
            if i == j:
                continue
            si = slice(k + i * n, k + (i + 1) * n)
            sj = slice(k + j * n, k + (j + 1) * n)
            Q[si, si] += Kt
            Q[sj, sj] += Kt
            Q[si, sj] -= Kt
            Q[sj, si] -= Kt
            Q[:k, si] += V
            Q[:k, sj] -= V
    Q[k:, :k] = Q[:k, k:].T
    return (Q + Q.T) / 2


def hessian(rep: PeriodicSetRep, c: float, tol: float = 1e-10, R2=None) -> HessianForm:
    c = _check_c(c)
    R2q = _resolve_R2(rep, c, tol, R2, hessian_tail)
    tabs = class_tables(rep, R2q, 4)
    classes = difference_classes(rep)
    wm = [t.weighted(c, 4) for t in tabs]
    Q = _assemble_hessian(rep, c, classes, wm)
    return HessianForm(Q, rep.n, rep.m, c, R2q, hessian_tail(rep, c, float(R2q)))


@dataclass(frozen=True)
class LocalMinCertificate:
    verdict: str
    lambda_min: float
    error_bound: float
    gap: float
    zero_modes: int
    eigenvalues: tuple[float, ...]
    R2: Fraction
    criticality: str

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "lambda_min": format(self.lambda_min, ".17g"),
                "error_bound": format(self.error_bound, ".17g"), "gap": format(self.gap, ".17g"),
                "zero_modes": self.zero_modes, "criticality": self.criticality, "R2": str(self.R2),
                "eigenvalues": [format(x, ".17g") for x in self.eigenvalues]}


def certify_local_min(rep: PeriodicSetRep, c: float, gap: float | None = None, tol: float = 1e-10,
                      require_critical: bool = True, R2=None) -> LocalMinCertificate:
    """Sign of the Hessian on the complement of the translation gauge.

    POSITIVE if ``lambda_min > gap + err``, NEGATIVE if some eigenvalue is
    below ``-(gap + err)``, INCONCLUSIVE otherwise. ``err`` adds the tail
    bound and a rounding allowance.
    """
    c = _check_c(c)
    hf = hessian(rep, c, tol, R2)
    crit = "unchecked"
    if require_critical:
        crit = _criticality(rep, c, hf.R2)
        if crit == "FAIL":
            raise PreconditionError("configuration is not critical; the Hessian test does not apply")
    Qr = hf.restricted()
    ev = np.linalg.eigvalsh(Qr)
    qmax = float(np.abs(hf.Q).max())
    g = 1e-8 * qmax if gap is None else float(gap)
    err = hf.tail_bound + hf.rounding_bound()
    lam = float(ev[0])
    if lam > g + err:
        verdict = "POSITIVE"
    elif lam < -(g + err):
        verdict = "NEGATIVE"
    else:
        verdict = "INCONCLUSIVE"
    zero = int(np.sum(np.abs(ev) <= g + err))
    return LocalMinCertificate(verdict, lam, err, g, zero, tuple(float(x) for x in ev), hf.R2, crit)


def _criticality(rep: PeriodicSetRep, c: float, R2: Fraction) -> str:
    if rep.is_exact:
        from .designs import certify_critical

        cert = certify_critical(rep, R2, degree=2)
        return "PASS" if cert.passed else "FAIL"
    g = gradient(rep, c, R2=R2)
    e = energy(rep, c, R2=R2)
    ok = g.norm <= 1e-9 * max(1.0, c * e.value) + g.tail_bound
    return "NUMERICAL" if ok else "FAIL"


# reordered energy of 2-periodic sets -------------------------------------------------------------


def reordered_energy_2periodic(rep: PeriodicSetRep, params: DeformationParams, c: float,
                               tol: float = 1e-12, R2=None) -> EnergyReport:
    """Deformed energy written as three sums over the cosets of ``L_max``.

    With ``J`` the translations in ``L_max``, ``J'`` the others and ``v`` one of
    the latter,

        E = (2/m^2) [ sum_{w in L_max} sum_i sum_{k in J} F(w + t_i - t_sigma(i,k))
                      + sum_{w in -(v+L_max)} sum_{i in J} sum_{k in J'} F(...)
                      + sum_{w in v+L_max} sum_{i in J'} sum_{k in J'} F(...) ],

    zero vectors omitted; ``F(x) = f(exp(H)[x])``.
    """
    c = _check_c(c)
    st = two_periodic_structure(rep)
    n, m = rep.n, rep.m
    T = params.t
    Lmax = st.L_max
    v = rep.translations[st.J_prime[0]]
    dmax = max((float(np.linalg.norm(T[i] - T[j])) for i in range(m) for j in range(m)), default=0.0)
    lam = math.exp(float(np.linalg.eigvalsh(params.H).min()))

    def tail(rep_, c_, r2):
        rho = math.sqrt(max(r2, 0.0)) - dmax
        return 2 * m * _tail_integral(_kappa(Lmax), Lmax.cell_radius + dmax, n, c * lam, max(rho, 0.0), 0.0)

    R2q = _resolve_R2(rep, c, tol, R2, tail) if R2 is None else Fraction(R2)
    G = expm(params.H)
    zero = (Fraction(0),) * n
    negv = tuple(-x for x in v)
    parts = [
        ("L", zero, range(m), st.J),
        ("-v", negv, st.J, st.J_prime),
        ("v", v, st.J_prime, st.J_prime),
    ]
    store = _CACHE.setdefault(rep, {}).setdefault("reordered", {})
    acc = _LogSum(c)
    for name, off, I, K in parts:
        for V, N in _offset_blocks(Lmax, off, R2q, True, store, (R2q, name)):
            V = V[N > 0]
            for i in I:
                for k in K:
                    Y = V + (T[i] - T[st.sigma[i][k]])
                    acc.add(np.einsum("ki,ij,kj->k", Y, G, Y))
    log_value = acc.log(2.0 / (m * m))
    value = math.exp(log_value) if log_value > -745 else 0.0
    return EnergyReport(value, log_value, tail(rep, c, float(R2q)), R2q, False, acc.count)
