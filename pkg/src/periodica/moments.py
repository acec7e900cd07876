"""Per-shell power sums of a coset ball, and Gaussian-weighted versions of them.

For an exact coset ``t + L`` every vector is stored as the integer vector
``W = s * w`` for a common scale ``s``. A :class:`ShellTable` holds, for each
occurring integer key ``|W|^2``, the count and the tensors ``sum W^(x)d`` for
``d <= degree``, all as exact integers. Two independent backends fill it:

* ``enumerate``: Fincke-Pohst over the ball, then integer reductions;
* ``coordinate``: a dynamic programme over coordinates. A point of ``t + L`` is
  ``t + u / s_B`` with ``u`` integral and in the sublattice ``s_B * L`` of Z^n;
  membership of ``u`` is a class in the finite group ``Z^n / s_B L`` (via
  Smith normal form), and the squared norm is additive over coordinates. So
  moment generating functions convolve coordinate by coordinate.

Inexact lattices fall back to :class:`PointCloud`, which keeps the float
vectors and applies the Gaussian weight point by point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import InputError
from .exact import lcm_of_denominators, to_fraction
from .lattice import Lattice, _checked_r2, as_offset, iter_coset_ball

_PAIRS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def sym_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j), i <= j, in row-major order."""
    if n not in _PAIRS_CACHE:
        iu = np.triu_indices(n)
        _PAIRS_CACHE[n] = (iu[0], iu[1])
    return _PAIRS_CACHE[n]


def _pair_index(n: int) -> np.ndarray:
    i, j = sym_pairs(n)
    idx = np.empty((n, n), np.int64)
    idx[i, j] = np.arange(len(i))
    idx[j, i] = np.arange(len(i))
    return idx


def _as_float(a):
    if a is None:
        return None
    return np.asarray(a, dtype=float) if a.dtype != object else np.array(a.tolist(), dtype=float)


@dataclass
class ShellTable:
    """Exact per-shell power sums of ``W = scale * w`` over a coset ball."""

    n: int
    scale: int
    R2: Fraction
    keys: np.ndarray
    count: np.ndarray
    moments: dict[int, np.ndarray]

    @property
    def degree(self) -> int:
        return max(self.moments, default=0)

    def r2(self) -> list[Fraction]:
        s2 = self.scale * self.scale
        return [Fraction(int(k), s2) for k in self.keys]

    def r2_float(self) -> np.ndarray:
        return np.asarray(self.keys, dtype=float) / float(self.scale) ** 2

    def moment(self, d: int) -> np.ndarray:
        if d == 0:
            return self.count
        if d not in self.moments:
            raise KeyError(f"degree {d} moments were not computed")
        return self.moments[d]

    def nonzero(self) -> np.ndarray:
        return np.asarray(self.keys) > 0

    def weighted(self, c: float, degree: int) -> list[np.ndarray]:
        """``sum_{w != 0} exp(-c |w|^2) w^(x)d`` for d = 0..degree, as floats."""
        mask = self.nonzero()
        wts = np.exp(-c * self.r2_float()[mask])
        out = []
        for d in range(degree + 1):
            m = _as_float(self.moment(d))[mask]
            out.append(np.tensordot(wts, m, axes=(0, 0)) / float(self.scale) ** d)
        return out

    def restrict(self, R2) -> "ShellTable":
        q = to_fraction(R2)
        k = q * self.scale * self.scale
        keep = np.asarray(self.keys) <= k.numerator // k.denominator
        return ShellTable(self.n, self.scale, min(q, self.R2), self.keys[keep], self.count[keep],
                          {d: m[keep] for d, m in self.moments.items()})


@dataclass
class PointCloud:
    """Float vectors of a coset ball, for lattices without an exact basis."""

    n: int
    R2: float
    vectors: np.ndarray
    norms: np.ndarray

    def weighted(self, c: float, degree: int) -> list[np.ndarray]:
        mask = self.norms > 0
        V = self.vectors[mask]
        wts = np.exp(-c * self.norms[mask])
        return weighted_point_moments(V, wts, degree)


def weighted_point_moments(V: np.ndarray, wts: np.ndarray, degree: int) -> list[np.ndarray]:
    n = V.shape[1]
    out = [wts.sum()]
    if degree >= 1:
        out.append(wts @ V)
    if degree >= 2:
        out.append(np.einsum("k,ki,kj->ij", wts, V, V))
    if degree >= 3:
        pi, pj = sym_pairs(n)
        P = V[:, pi] * V[:, pj]
        T = (P * wts[:, None]).T @ V
        out.append(T[_pair_index(n)])
    if degree >= 4:
        PP = (P * wts[:, None]).T @ P
        idx = _pair_index(n)
        out.append(PP[idx[:, :, None, None], idx[None, None, :, :]])
    return out


# enumeration backend ---------------------------------------------------------


def _common_scale(lattice: Lattice, offset_exact, scale: int | None) -> int:
    base = math.lcm(lattice.scale, lcm_of_denominators(offset_exact))
    if scale is None:
        return base
    if scale % base:
        raise InputError("scale must be a multiple of the lattice and offset denominators")
    return int(scale)


def _sum_by_key(keys: np.ndarray, rows: np.ndarray):
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(k)) + 1])
    return k[starts], np.add.reduceat(rows[order], starts, axis=0), order, starts


def enumerate_table(lattice: Lattice, offset, R2, degree: int = 2, scale: int | None = None) -> ShellTable:
    ex, _ = as_offset(lattice, offset)
    if ex is None:
        raise InputError("exact shell tables need an exact lattice and offset")
    s = _common_scale(lattice, ex, scale)
    n = lattice.dim
    R2q = to_fraction(R2) if not isinstance(R2, float) else Fraction(R2)
    acc: dict[int, list] = {}
    idx = _pair_index(n)
    pi, pj = sym_pairs(n)
    Kq = R2q * s * s
    risk = ball_count_bound(lattice, float(R2q)) * max(1.0, float(Kq)) ** (degree / 2)
    dtype = np.int64 if risk < 2**62 else object
    for blk in iter_coset_ball(lattice, ex, R2q):
        W = blk.scaled
        f = s // blk.scale
        if f != 1:
            W = W * f
        W = W.astype(dtype)
        keys = (W * W).sum(axis=1)
        uk, _, order, starts = _sum_by_key(keys, np.ones(len(keys), np.int64))
        Ws = W[order]
        ends = list(starts[1:]) + [len(keys)]
        for key, a, b in zip(uk.tolist(), starts.tolist(), ends):
            seg = Ws[a:b]
            parts = [np.array(b - a, dtype=np.int64)]
            if degree >= 1:
                parts.append(seg.sum(axis=0))
            if degree >= 2:
                P = seg[:, pi] * seg[:, pj]
                parts.append(P.sum(axis=0)[idx])
            if degree >= 3:
                parts.append((P.T @ seg)[idx])
            if degree >= 4:
                PP = P.T @ P
                parts.append(PP[idx[:, :, None, None], idx[None, None, :, :]])
            if key in acc:
                acc[key] = [x + y for x, y in zip(acc[key], parts)]
            else:
                acc[key] = parts
    keys = sorted(acc)
    return _pack(n, s, R2q, keys, [acc[k] for k in keys], degree)


def _pack(n, s, R2q, keys, rows, degree) -> ShellTable:
    karr = np.array(keys, dtype=np.int64)
    cnt = np.array([r[0] for r in rows], dtype=np.int64).reshape(len(keys))
    mom = {}
    for d in range(1, degree + 1):
        shape = (len(keys),) + (n,) * d
        if rows:
            vals = [np.asarray(r[d]) for r in rows]
            dt = object if any(v.dtype == object for v in vals) else np.int64
            mom[d] = np.stack(vals).astype(dt)
        else:
            mom[d] = np.zeros(shape, np.int64)
    return ShellTable(n, s, R2q, karr, cnt, mom)


# coordinate dynamic programme --------------------------------------------


@dataclass(frozen=True)
class _ClassGroup:
    U: list[list[int]]
    mods: tuple[int, ...]

    @cached_property
    def size(self) -> int:
        return math.prod(self.mods) if self.mods else 1

    def index(self, vec) -> int:
        i = 0
        for v, m in zip(vec, self.mods):
            i = i * m + (v % m)
        return i

    @cached_property
    def elements(self) -> np.ndarray:
        if not self.mods:
            return np.zeros((1, 0), np.int64)
        grids = np.meshgrid(*[np.arange(m) for m in self.mods], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def shift_perm(self, delta) -> np.ndarray:
        if not self.mods:
            return np.zeros(1, np.int64)
        e = (self.elements + np.asarray(delta, np.int64)) % np.asarray(self.mods)
        out = np.zeros(len(e), np.int64)
        for m, col in zip(self.mods, e.T):
            out = out * m + col
        return out


def _class_group(int_basis: list[list[int]]) -> _ClassGroup:
    from sympy import Matrix
    from sympy.matrices.normalforms import smith_normal_decomp

    D, U, _ = smith_normal_decomp(Matrix(int_basis))
    n = len(int_basis)
    rows, mods = [], []
    for i in range(n):
        d = abs(int(D[i, i]))
        if d > 1:
            rows.append([int(U[i, j]) for j in range(n)])
            mods.append(d)
    return _ClassGroup(rows, tuple(mods))


def coordinate_table_size(lattice: Lattice, offset_exact, R2, scale: int | None = None) -> int:
    """Work estimate (class group size times key range) for the coordinate programme."""
    s = _common_scale(lattice, offset_exact, scale)
    G = abs(lattice.det_int)
    K = to_fraction(R2) * s * s
    return G * (K.numerator // K.denominator + 1)


def coordinate_table(lattice: Lattice, offset, R2, degree: int = 2, scale: int | None = None) -> ShellTable:
    ex, _ = as_offset(lattice, offset)
    if ex is None:
        raise InputError("exact shell tables need an exact lattice and offset")
    s = _common_scale(lattice, ex, scale)
    n = lattice.dim
    sB = lattice.scale
    step = s // sB
    R2q = to_fraction(R2) if not isinstance(R2, float) else Fraction(R2)
    Kq = R2q * s * s
    K = Kq.numerator // Kq.denominator
    grp = _class_group(lattice.int_basis)
    G = grp.size
    st = [int(x * s) for x in ex]
    rK = math.isqrt(K)

    # allowed (X, class shift) per coordinate
    moves = []
    for i in range(n):
        lo = -rK
        first = lo + ((st[i] - lo) % step)
        col = [grp.U[r][i] for r in range(len(grp.mods))]
        mv = []
        for X in range(first, rK + 1, step):
            u = (X - st[i]) // step
            mv.append((X, X * X, grp.shift_perm([c * u for c in col])))
        moves.append(mv)

    bound = max(
        _grid_ball_bound(i, math.sqrt(K) / step) for i in range(1, n + 1)
    ) * max(1, K) ** (degree / 2)
    dtype = np.int64 if bound < 2**62 else object

    memo: dict[tuple[int, ...], np.ndarray] = {}
    start = np.zeros((G, K + 1), dtype=dtype)
    start[0, 0] = 1
    memo[()] = start

    def state(prefix: tuple[int, ...]) -> np.ndarray:
        if prefix in memo:
            return memo[prefix]
        prev = state(prefix[:-1])
        i = len(prefix) - 1
        p = prefix[-1]
        new = np.zeros_like(prev)
        for X, X2, perm in moves[i]:
            if X2 > K:
                continue
            w = X ** p
            if w == 0:
                continue
            new[perm, X2:] += prev[:, : K + 1 - X2] * w
        memo[prefix] = new
        return new

    def final(expo: tuple[int, ...]) -> np.ndarray:
        return state(expo)[0]

    counts = final((0,) * n)
    keys = np.flatnonzero(counts != 0)
    mom = {}
    for d in range(1, degree + 1):
        arr = np.zeros((len(keys),) + (n,) * d, dtype=dtype)
        for idx in _sorted_indices(n, d):
            ex_vec = [0] * n
            for j in idx:
                ex_vec[j] += 1
            vals = final(tuple(ex_vec))[keys]
            for perm in set(_perms(idx)):
                arr[(slice(None),) + perm] = vals
        mom[d] = arr
    return ShellTable(n, s, R2q, keys.astype(np.int64), counts[keys], mom)


def ball_count_bound(lattice: Lattice, R2: float) -> float:
    """Upper bound for the number of points of any coset of ``L`` in the ball of squared radius R2."""
    n = lattice.dim
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return vol * (math.sqrt(max(R2, 0.0)) + lattice.cell_radius) ** n / lattice.covolume


def _grid_ball_bound(dim: int, radius: float) -> float:
    """Upper bound for the number of integer points in a ball of ``radius`` in ``dim`` dimensions."""
    vol = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    return vol * (radius + math.sqrt(dim) / 2) ** dim + 1


def _sorted_indices(n: int, d: int):
    if d == 0:
        yield ()
        return
    for rest in _sorted_indices(n, d - 1):
        lo = rest[-1] if rest else 0
        for j in range(lo, n):
            yield rest + (j,)


def _perms(idx):
    import itertools

    return itertools.permutations(idx)


# dispatch ----------------------------------------------------------------------------------

DP_LIMIT = 2_000_000


def shell_table(lattice: Lattice, offset, R2, degree: int = 2, scale: int | None = None,
                method: str = "auto") -> ShellTable:
    """Exact per-shell power sums of ``offset + L`` up to squared radius ``R2``."""
    ex, _ = as_offset(lattice, offset)
    if ex is None:
        raise InputError("exact shell tables need an exact lattice and offset")
    if method == "auto":
        method = "coordinate" if coordinate_table_size(lattice, ex, R2, scale) <= DP_LIMIT else "enumerate"
    if method == "coordinate":
        return coordinate_table(lattice, ex, R2, degree, scale)
    if method == "enumerate":
        return enumerate_table(lattice, ex, R2, degree, scale)
    raise InputError(f"unknown method {method!r}")


def point_cloud(lattice: Lattice, offset, R2) -> PointCloud:
    """Float vectors of the coset ball; exact offsets and radii are honoured exactly."""
    vs, ns = [], []
    for blk in iter_coset_ball(lattice, offset, R2):
        vs.append(blk.vectors)
        ns.append(blk.norms)
    n = lattice.dim
    V = np.concatenate(vs) if vs else np.zeros((0, n))
    N = np.concatenate(ns) if ns else np.zeros(0)
    return PointCloud(n, float(R2), V, N)
