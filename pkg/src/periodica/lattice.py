"""Full-rank lattices in R^n and enumeration of short vectors in a coset.

A lattice is stored by a basis matrix whose *columns* are the generators.
When every entry is rational the lattice is *exact*: it keeps a Fraction copy
of the basis and all membership and norm questions are answered in integers.
Otherwise only the float basis is kept and results are numerical.

Enumeration is Fincke-Pohst, vectorised breadth-first over the coordinates
so that large balls are produced as numpy blocks rather than Python tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import AmbiguousShellError, DegenerateLatticeError, InexactError, InputError
from .exact import (
    det_and_adjugate,
    frac_str,
    is_exact_number,
    lcm_of_denominators,
    solve_exact,
    to_fraction,
)

EPS_SHELL = 1e-9
_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class Lattice:
    basis: np.ndarray
    exact_basis: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
            raise InputError("basis must be a non-empty square matrix")
        if not np.all(np.isfinite(b)):
            raise InputError("basis has non-finite entries")
        object.__setattr__(self, "basis", b)
        if self.exact_basis is not None:
            if self.det_int == 0:
                raise DegenerateLatticeError("degenerate lattice: basis is singular")
        else:
            try:
                np.linalg.cholesky(self.gram)
            except np.linalg.LinAlgError:
                raise DegenerateLatticeError("degenerate lattice: Gram matrix not positive definite")
            if abs(np.linalg.det(b)) < 1e-12 * max(1.0, np.abs(b).max()) ** b.shape[0]:
                raise DegenerateLatticeError("degenerate lattice: basis is numerically singular")

    # construction -----------------------------------------------------

    @classmethod
    def from_basis(cls, rows, denominator: int | None = None) -> "Lattice":
        """Build from a row-major matrix whose columns are the generators.

        Entries that are ints, Fractions or strings like ``"1/2"`` give an exact
        lattice. Floats give a float-only lattice unless ``denominator`` is
        supplied, in which case ``denominator * rows`` must be integral.
        """
        rows = [list(r) for r in rows]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise InputError("basis must be square")
        if denominator is not None:
            d = int(denominator)
            if d <= 0:
                raise InputError("denominator must be positive")
            ex = []
            for r in rows:
                er = []
                for x in r:
                    if is_exact_number(x):
                        q = to_fraction(x)
                    else:
                        y = float(x) * d
                        k = round(y)
                        if abs(y - k) > 1e-9 * max(1.0, abs(y)):
                            raise InputError(f"entry {x!r} times denominator {d} is not integral")
                        q = Fraction(k, d)
                    if (q * d).denominator != 1:
                        raise InputError(f"entry {x!r} times denominator {d} is not integral")
                    er.append(q)
                ex.append(tuple(er))
            exact = tuple(ex)
        elif all(is_exact_number(x) for r in rows for x in r):
            exact = tuple(tuple(to_fraction(x) for x in r) for r in rows)
        else:
            exact = None
        if exact is not None:
            fl = np.array([[float(x) for x in r] for r in exact])
        else:
            fl = np.array([[float(x) for x in r] for r in rows])
        return cls(fl, exact)

    @classmethod
    def from_json(cls, obj: dict) -> "Lattice":
        try:
            dim = int(obj["dimension"])
            basis = obj["basis"]
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed lattice JSON: {e}")
        lat = cls.from_basis(basis, obj.get("denominator"))
        if lat.dim != dim:
            raise InputError("dimension does not match basis")
        return lat

    def to_json(self) -> dict:
        if self.exact_basis is not None:
            return {
                "dimension": self.dim,
                "basis": [[frac_str(x) for x in r] for r in self.exact_basis],
                "denominator": self.scale,
            }
        return {"dimension": self.dim, "basis": self.basis.tolist()}

    # basic data ----------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def is_exact(self) -> bool:
        return self.exact_basis is not None

    @cached_property
    def gram(self) -> np.ndarray:
        return self.basis.T @ self.basis

    @cached_property
    def scale(self) -> int:
        """Smallest d > 0 with d * basis integral (exact lattices only)."""
        self._need_exact()
        return lcm_of_denominators(x for r in self.exact_basis for x in r)

    @cached_property
    def int_basis(self) -> list[list[int]]:
        s = self.scale
        return [[int(x * s) for x in r] for r in self.exact_basis]

    @cached_property
    def _det_adj(self) -> tuple[int, list[list[int]]]:
        return det_and_adjugate(self.int_basis)

    @property
    def det_int(self) -> int:
        return self._det_adj[0]

    @property
    def covolume(self) -> float:
        if self.is_exact:
            return float(abs(self.exact_covolume))
        return float(abs(np.linalg.det(self.basis)))

    @cached_property
    def exact_covolume(self) -> Fraction:
        self._need_exact()
        return Fraction(abs(self.det_int), self.scale ** self.dim)

    @cached_property
    def cell_radius(self) -> float:
        """Radius of a ball about 0 containing some fundamental domain.

        The smaller of the centred parallelepiped's circumradius and that of the
        Gram-Schmidt box ``{sum x_i b*_i : |x_i| <= 1/2}`` over a few column orders.
        """
        n = self.dim
        B = self.basis
        if n <= 14:
            best = 0.0
            for signs in itertools.product((-1.0, 1.0), repeat=n - 1):
                s = np.array((1.0,) + signs)
                best = max(best, float(np.linalg.norm(B @ s)))
            par = 0.5 * best
        else:
            par = 0.5 * float(np.linalg.norm(B, axis=0).sum())
        orders = [np.arange(n), np.arange(n)[::-1], np.argsort(np.linalg.norm(B, axis=0))]
        gs = min(0.5 * float(np.sqrt((np.diag(np.linalg.qr(B[:, o])[1]) ** 2).sum())) for o in orders)
        return min(par, gs) * (1 + 1e-12)

    def _need_exact(self):
        if self.exact_basis is None:
            raise InexactError("operation needs an exact rational lattice")

    # exact membership and reduction --------------------------------------

    def coords(self, v) -> tuple[Fraction, ...]:
        """Exact coordinates of ``v`` in the basis."""
        self._need_exact()
        return tuple(solve_exact(self.exact_basis, [to_fraction(x) for x in v]))

    def contains(self, v) -> bool:
        return all(c.denominator == 1 for c in self.coords(v))

    def contains_scaled(self, w: np.ndarray, wscale: int) -> np.ndarray:
        """Vectorised membership of the rows of ``w / wscale`` (``w`` integer)."""
        self._need_exact()
        w = np.asarray(w)
        det, adj = self._det_adj
        mod = abs(det) * int(wscale)
        a = _int_matmul(w, np.array(adj, dtype=object).T) * self.scale
        if a.dtype != object:
            return np.all(a % mod == 0, axis=1)
        return np.array([all(int(x) % mod == 0 for x in row) for row in a], dtype=bool)

    def reduce(self, v) -> tuple[Fraction, ...]:
        """Representative of ``v + L`` in the half-open fundamental parallelepiped."""
        c = self.coords(v)
        frac = [x - math.floor(x) for x in c]
        return tuple(
            sum((self.exact_basis[i][j] * frac[j] for j in range(self.dim)), Fraction(0))
            for i in range(self.dim)
        )

    def vector(self, z) -> tuple[Fraction, ...]:
        self._need_exact()
        return tuple(
            sum((self.exact_basis[i][j] * int(z[j]) for j in range(self.dim)), Fraction(0))
            for i in range(self.dim)
        )

    def same_lattice(self, other: "Lattice") -> bool:
        if self.dim != other.dim:
            return False
        cols = lambda lat: [tuple(r[j] for r in lat.exact_basis) for j in range(lat.dim)]
        return all(other.contains(c) for c in cols(self)) and all(self.contains(c) for c in cols(other))

    def columns(self) -> list[tuple[Fraction, ...]]:
        self._need_exact()
        return [tuple(r[j] for r in self.exact_basis) for j in range(self.dim)]


def _int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Integer matrix product, exact, int64 when provably safe."""
    a = np.asarray(a)
    b = np.asarray(b)
    amax = int(np.abs(a).max()) if a.size else 0
    bmax = max((abs(int(x)) for x in b.flat), default=0)
    if amax * bmax * max(a.shape[-1], 1) < 2**62:
        return a.astype(np.int64) @ b.astype(np.int64)
    return a.astype(object) @ b.astype(object)


# offsets --------------------------------------------------------------------


def as_offset(lattice: Lattice, offset) -> tuple[tuple[Fraction, ...] | None, np.ndarray]:
    """Split an offset into (exact or None, float) parts, matching lattice exactness."""
    n = lattice.dim
    if offset is None:
        offset = [0] * n
    if isinstance(offset, np.ndarray) and offset.dtype.kind == "f":
        ex = None
    else:
        off = list(offset)
        ex = tuple(to_fraction(x) for x in off) if all(is_exact_number(x) for x in off) else None
    fl = np.array([float(x) for x in (ex if ex is not None else offset)], dtype=float)
    if fl.shape != (n,):
        raise InputError("offset has wrong dimension")
    if not lattice.is_exact:
        ex = None
    return ex, fl


# enumeration ------------------------------------------------------------------


@dataclass
class PointBlock:
    """Points ``Bz + t`` of a coset ball, as parallel arrays.

    ``scaled`` holds the integer vectors ``scale * (Bz + t)`` for exact input, and
    ``keys`` their integer squared norms, so that ``norm^2 = keys / scale^2``.
    """

    coords: np.ndarray
    vectors: np.ndarray
    norms: np.ndarray
    scaled: np.ndarray | None = None
    keys: np.ndarray | None = None
    scale: int | None = None

    def __len__(self):
        return len(self.norms)


def _fp_blocks(R: np.ndarray, c: np.ndarray, r2: float, chunk: int) -> Iterator[np.ndarray]:
    n = len(c)
    diag = np.diag(R)

    def descend(i, Z, P, Q):
        rho = np.sqrt(np.maximum(r2 - Q, 0.0))
        lo = np.ceil((-P[:, i] - rho) / diag[i] - c[i]).astype(np.int64)
        hi = np.floor((-P[:, i] + rho) / diag[i] - c[i]).astype(np.int64)
        cnt = np.maximum(hi - lo + 1, 0)
        total = int(cnt.sum())
        if total == 0:
            return
        if total > chunk and len(Q) > 1:
            cum = np.cumsum(cnt)
            part = (cum - 1) // chunk
            cuts = np.flatnonzero(np.diff(part)) + 1
            for sl in np.split(np.arange(len(Q)), cuts):
                yield from descend(i, Z[sl], P[sl], Q[sl])
            return
        rows = np.repeat(np.arange(len(Q)), cnt)
        starts = np.cumsum(cnt) - cnt
        zi = np.repeat(lo, cnt) + (np.arange(total) - np.repeat(starts, cnt))
        Z2 = Z[rows]
        Z2[:, i] = zi
        yi = zi + c[i]
        P2 = P[rows]
        term = diag[i] * yi + P2[:, i]
        Q2 = Q[rows] + term * term
        if i == 0:
            yield Z2
            return
        P2[:, :i] += yi[:, None] * R[:i, i][None, :]
        yield from descend(i - 1, Z2, P2, Q2)

    yield from descend(n - 1, np.zeros((1, n), np.int64), np.zeros((1, n)), np.zeros(1))


def _checked_r2(R2) -> tuple[Fraction | None, float]:
    if isinstance(R2, float):
        if not math.isfinite(R2):
            raise InputError("R2 must be finite")
        return None, R2
    q = to_fraction(R2)
    return q, float(q)


def iter_coset_ball(lattice: Lattice, offset, R2, chunk: int = _CHUNK) -> Iterator[PointBlock]:
    """Yield every point of ``offset + L`` with squared norm <= R2, in blocks (unsorted)."""
    r2q, r2f = _checked_r2(R2)
    if r2f < 0:
        return
    ex_off, fl_off = as_offset(lattice, offset)
    exact = lattice.is_exact and ex_off is not None
    if exact and r2q is None:
        r2q = Fraction(r2f)
    try:
        R = np.linalg.cholesky(lattice.gram).T
    except np.linalg.LinAlgError:
        raise DegenerateLatticeError("degenerate lattice: Gram matrix not positive definite")
    c = np.linalg.solve(lattice.basis, fl_off)
    margin = r2f * (1 + 1e-9) + 1e-9
    if exact:
        s = math.lcm(lattice.scale, lcm_of_denominators(ex_off))
        Mi = [[int(x * s) for x in r] for r in lattice.exact_basis]
        big = max(abs(x) for r in Mi for x in r) >= 2**40
        M = np.array(Mi, dtype=object if big else np.int64)
        toff = np.array([int(x * s) for x in ex_off], dtype=np.int64)
        kmax = r2q * s * s
        kmax = kmax.numerator // kmax.denominator
    for Z in _fp_blocks(R, c, margin, chunk):
        if exact:
            W = _int_matmul(Z, M.T) + toff
            keys = (W * W).sum(axis=1)
            keep = keys <= kmax
            W, keys, Z = W[keep], keys[keep], Z[keep]
            V = W.astype(float) / s
            yield PointBlock(Z, V, keys.astype(float) / (s * s), W, keys, s)
        else:
            V = Z @ lattice.basis.T + fl_off
            nr = np.einsum("ij,ij->i", V, V)
            keep = nr <= r2f * (1 + 1e-12)
            yield PointBlock(Z[keep], V[keep], nr[keep])


def coset_ball(lattice: Lattice, offset, R2) -> PointBlock:
    """All points of the ball, sorted by (norm, lexicographic coordinates)."""
    blocks = list(iter_coset_ball(lattice, offset, R2))
    n = lattice.dim
    if not blocks:
        empty = np.zeros((0, n), np.int64)
        ex, _ = as_offset(lattice, offset)
        ex_path = lattice.is_exact and ex is not None
        return PointBlock(empty, np.zeros((0, n)), np.zeros(0),
                          empty if ex_path else None, np.zeros(0, np.int64) if ex_path else None,
                          math.lcm(lattice.scale, lcm_of_denominators(ex)) if ex_path else None)
    cat = lambda name: None if getattr(blocks[0], name) is None else np.concatenate(
        [getattr(b, name) for b in blocks])
    out = PointBlock(cat("coords"), cat("vectors"), cat("norms"), cat("scaled"), cat("keys"),
                     blocks[0].scale)
    primary = out.keys if out.keys is not None else out.norms
    order = np.lexsort(tuple(out.coords[:, j] for j in range(n - 1, -1, -1)) + (primary,))
    return PointBlock(out.coords[order], out.vectors[order], out.norms[order],
                      None if out.scaled is None else out.scaled[order],
                      None if out.keys is None else out.keys[order], out.scale)


@dataclass(frozen=True)
class CosetVector:
    coords: tuple[int, ...]
    vector: tuple[float, ...]
    norm2: float
    exact_norm2: Fraction | None = None
    exact_vector: tuple[Fraction, ...] | None = field(default=None, compare=False)


def enumerate_coset_ball(lattice: Lattice, offset, R2) -> list[CosetVector]:
    """List every vector of ``offset + L`` with squared norm at most ``R2``."""
    pb = coset_ball(lattice, offset, R2)
    out = []
    for i in range(len(pb)):
        if pb.keys is not None:
            q = Fraction(int(pb.keys[i]), pb.scale ** 2)
            ev = tuple(Fraction(int(x), pb.scale) for x in pb.scaled[i])
        else:
            q = ev = None
        out.append(CosetVector(tuple(int(x) for x in pb.coords[i]), tuple(pb.vectors[i].tolist()),
                               float(pb.norms[i]), q, ev))
    return out


def float_shell_breaks(norms: np.ndarray, eps: float = EPS_SHELL) -> np.ndarray:
    """Start indices of shells in an increasing array of float norms.

    Gaps below ``eps`` (relative) merge, gaps above ``1e3 * eps`` split, and
    anything in between is refused rather than guessed.
    """
    if len(norms) == 0:
        return np.zeros(0, np.int64)
    scale = np.maximum(np.abs(norms[1:]), 1.0)
    rel = np.diff(norms) / scale
    bad = (rel > eps) & (rel <= 1e3 * eps)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise AmbiguousShellError(
            f"ambiguous shell binning between norms {norms[k]!r} and {norms[k + 1]!r}")
    return np.concatenate([[0], np.flatnonzero(rel > eps) + 1])


def shells(lattice: Lattice, offset, R2) -> list[tuple[Fraction | float, list[CosetVector]]]:
    """Group the coset ball into shells of equal norm, in increasing order."""
    vecs = enumerate_coset_ball(lattice, offset, R2)
    if not vecs:
        return []
    if vecs[0].exact_norm2 is not None:
        out: list = []
        for v in vecs:
            if out and out[-1][0] == v.exact_norm2:
                out[-1][1].append(v)
            else:
                out.append((v.exact_norm2, [v]))
        return out
    norms = np.array([v.norm2 for v in vecs])
    starts = list(float_shell_breaks(norms)) + [len(vecs)]
    return [(float(np.mean(norms[a:b])), vecs[a:b]) for a, b in zip(starts[:-1], starts[1:])]


def minimal_norm(lattice: Lattice) -> Fraction | float:
    """Squared length of a shortest non-zero lattice vector."""
    if lattice.is_exact:
        cols = lattice.columns()
        bound = min(sum((x * x for x in c), Fraction(0)) for c in cols)
    else:
        bound = float(np.min(np.einsum("ij,ij->j", lattice.basis, lattice.basis)))
    pb = coset_ball(lattice, None, bound)
    nz = pb.norms > 0 if pb.keys is None else pb.keys > 0
    if pb.keys is not None:
        return Fraction(int(pb.keys[nz].min()), pb.scale ** 2)
    return float(pb.norms[nz].min())


def lattice_from_columns(cols: Sequence[Sequence]) -> Lattice:
    n = len(cols)
    return Lattice.from_basis([[cols[j][i] for j in range(n)] for i in range(n)])
