"""Periodic sets ``Lambda = union_i (t_i + L)`` and their structure.

Indices of translations are 0-based throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    InexactError,
    InputError,
    NotDifferenceVectorError,
    NotTwoPeriodicError,
    PreconditionError,
)
from .exact import frac_str, is_exact_number, lcm_of_denominators, to_fraction
from .lattice import Lattice

Vec = tuple


def _rationalize(x) -> Fraction:
    if is_exact_number(x):
        return to_fraction(x)
    xf = float(x)
    q = Fraction(xf).limit_denominator(10**9)
    if float(q) != xf:
        raise InexactError(f"translation entry {x!r} has no short rational form")
    return q


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _neg(a):
    return tuple(-x for x in a)


@dataclass(frozen=True, eq=False)
class PeriodicSetRep:
    lattice: Lattice
    translations: tuple[Vec, ...]

    def __post_init__(self):
        n = self.lattice.dim
        ts = list(self.translations)
        if not ts:
            raise InputError("a periodic set needs at least one translation")
        if any(len(t) != n for t in ts):
            raise InputError("translation has wrong dimension")
        if self.lattice.is_exact:
            ts = [tuple(_rationalize(x) for x in t) for t in ts]
            keys = [self.lattice.reduce(t) for t in ts]
            if len(set(keys)) != len(keys):
                raise InputError("translations are not pairwise incongruent modulo the lattice")
        else:
            ts = [tuple(float(x) for x in t) for t in ts]
            B = self.lattice.basis
            for a, b in itertools.combinations(range(len(ts)), 2):
                c = np.linalg.solve(B, np.subtract(ts[a], ts[b]))
                if np.all(np.abs(c - np.round(c)) < 1e-9):
                    raise InputError("translations are not pairwise incongruent modulo the lattice")
        object.__setattr__(self, "translations", tuple(ts))

    @property
    def m(self) -> int:
        return len(self.translations)

    @property
    def n(self) -> int:
        return self.lattice.dim

    @property
    def is_exact(self) -> bool:
        return self.lattice.is_exact

    @property
    def float_translations(self) -> np.ndarray:
        return np.array([[float(x) for x in t] for t in self.translations])

    @property
    def scale(self) -> int:
        """Common denominator of the basis and all translations."""
        return math.lcm(self.lattice.scale, lcm_of_denominators(x for t in self.translations for x in t))

    def class_key(self, v) -> Vec:
        return self.lattice.reduce(v)

    def index_of(self, v) -> int | None:
        """Index ``l`` with ``v = t_l (mod L)``, or None."""
        key = self.class_key(v)
        for l, t in enumerate(self.translations):
            if self.class_key(t) == key:
                return l
        return None

    def contains(self, v) -> bool:
        return self.index_of(v) is not None

    @classmethod
    def from_json(cls, obj: dict) -> "PeriodicSetRep":
        try:
            lat = Lattice.from_json(obj["lattice"])
            ts = [tuple(t) for t in obj["translations"]]
        except (KeyError, TypeError) as e:
            raise InputError(f"malformed periodic set JSON: {e}")
        return cls(lat, tuple(ts))

    def to_json(self) -> dict:
        if self.is_exact:
            ts = [[frac_str(x) for x in t] for t in self.translations]
        else:
            ts = [list(t) for t in self.translations]
        return {"lattice": self.lattice.to_json(), "translations": ts}


# difference classes -----------------------------------------------------------------


@dataclass(frozen=True)
class DifferenceClass:
    """A coset ``t_i - t_j + L`` together with every ordered pair producing it."""

    offset: Vec
    pairs: tuple[tuple[int, int], ...]

    @property
    def multiplicity(self) -> int:
        return len(self.pairs)

    @property
    def is_zero(self) -> bool:
        return all(x == 0 for x in self.offset)


def difference_classes(rep: PeriodicSetRep) -> list[DifferenceClass]:
    """Distinct cosets among ``t_i - t_j + L``. Their union is ``Lambda - Lambda``."""
    m = rep.m
    if rep.is_exact:
        groups: dict[Vec, list] = {}
        for i in range(m):
            for j in range(m):
                key = rep.class_key(_sub(rep.translations[i], rep.translations[j]))
                groups.setdefault(key, []).append((i, j))
        zero = tuple(Fraction(0) for _ in range(rep.n))
        out = [DifferenceClass(k, tuple(v)) for k, v in groups.items()]
        out.sort(key=lambda c: (c.offset != zero, c.pairs[0]))
        return out
    T = rep.float_translations
    zero = tuple(0.0 for _ in range(rep.n))
    out = [DifferenceClass(zero, tuple((i, i) for i in range(m)))]
    for i in range(m):
        for j in range(m):
            if i != j:
                out.append(DifferenceClass(tuple((T[i] - T[j]).tolist()), ((i, j),)))
    return out


# maximal period lattice ------------------------------------------------------------------


def _hnf_sum(lattice: Lattice, extra: Sequence[Vec]) -> Lattice:
    """The lattice generated by ``L`` and the vectors ``extra``."""
    from sympy import Matrix
    from sympy.matrices.normalforms import hermite_normal_form

    s = math.lcm(lattice.scale, lcm_of_denominators(x for v in extra for x in v))
    n = lattice.dim
    cols = [[int(x * s) for x in c] for c in lattice.columns()]
    cols += [[int(x * s) for x in v] for v in extra]
    A = Matrix(n, len(cols), lambda i, j: cols[j][i])
    H = hermite_normal_form(A)
    if H.shape != (n, n):
        raise PreconditionError("lattice sum is not full rank")
    return Lattice.from_basis([[Fraction(int(H[i, j]), s) for j in range(n)] for i in range(n)])


@dataclass(frozen=True, eq=False)
class MaximalPeriod:
    lattice: Lattice
    rep: PeriodicSetRep
    m_min: int


def _is_period(rep: PeriodicSetRep, d: Vec) -> bool:
    keys = {rep.class_key(t) for t in rep.translations}
    return all(rep.class_key(_add(t, d)) in keys for t in rep.translations)


def maximal_period_lattice(rep: PeriodicSetRep) -> MaximalPeriod:
    """Enlarge the lattice by every period of ``Lambda`` and return the minimal representation."""
    if not rep.is_exact:
        raise InexactError("maximal period lattice needs exact input")
    cur = rep
    while True:
        t0 = cur.translations[0]
        period = next(
            (_sub(t, t0) for t in cur.translations[1:] if _is_period(cur, _sub(t, t0))), None)
        if period is None:
            break
        bigger = _hnf_sum(cur.lattice, [period])
        reps: list[Vec] = []
        seen = set()
        for t in cur.translations:
            key = bigger.reduce(t)
            if key not in seen:
                seen.add(key)
                reps.append(key)
        cur = PeriodicSetRep(bigger, tuple(reps))
    if cur is not rep:
        cur = PeriodicSetRep(cur.lattice, tuple(cur.lattice.reduce(t) for t in cur.translations))
    return MaximalPeriod(cur.lattice, cur, cur.m)


# 2-periodic structure ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TwoPeriodicStructure:
    """Index data of a 2-periodic set given by a (possibly refined) representation.

    ``J`` lists translations lying in ``L_max``, ``J_prime`` the others, and
    ``sigma[i][k]`` is the index with ``t_i - t_k = +-t_sigma (mod L0)``, the
    sign being ``+`` for ``k`` in ``J`` and ``-`` for ``k`` in ``J_prime``.
    """

    rep: PeriodicSetRep
    L_max: Lattice
    J: tuple[int, ...]
    J_prime: tuple[int, ...]
    sigma: tuple[tuple[int, ...], ...]

    def check(self) -> None:
        m = self.rep.m
        if len(self.J) != m // 2 or len(self.J_prime) != m // 2:
            raise AssertionError("J and J' must split the translations in half")
        inJ = set(self.J)
        for i in range(m):
            if sorted(self.sigma[i]) != list(range(m)):
                raise AssertionError("sigma(i, .) is not a bijection")
            if sorted(self.sigma[k][i] for k in range(m)) != list(range(m)):
                raise AssertionError("sigma(., k) is not a bijection")
            for k in range(m):
                if (self.sigma[i][k] in inJ) != ((i in inJ) == (k in inJ)):
                    raise AssertionError("sigma does not respect the J / J' split")
        for i in range(m):
            for k in range(m):
                sgn = 1 if k in self.J else -1
                d = _sub(self.rep.translations[i], self.rep.translations[k])
                l = self.sigma[i][k]
                tl = self.rep.translations[l] if sgn > 0 else _neg(self.rep.translations[l])
                if not self.rep.lattice.contains(_sub(d, tl)):
                    raise AssertionError("sigma congruence violated")


def two_periodic_structure(rep: PeriodicSetRep) -> TwoPeriodicStructure:
    mp = maximal_period_lattice(rep)
    if mp.m_min != 2:
        raise NotTwoPeriodicError(f"not 2-periodic: minimal representation has m = {mp.m_min}")
    Lmax = mp.lattice
    J = tuple(i for i, t in enumerate(rep.translations) if Lmax.contains(t))
    if not J:
        raise PreconditionError("0 is not a point of the set; translate it first")
    Jp = tuple(i for i in range(rep.m) if i not in J)
    sigma = []
    for i in range(rep.m):
        row = []
        for k in range(rep.m):
            d = _sub(rep.translations[i], rep.translations[k])
            l = rep.index_of(d if k in J else _neg(d))
            if l is None:
                raise PreconditionError("difference not congruent to a translation")
            row.append(l)
        sigma.append(tuple(row))
    st = TwoPeriodicStructure(rep, Lmax, J, Jp, tuple(sigma))
    st.check()
    return st


# automorphisms --------------------------------------------------------------------------


def _exact_matrix(phi) -> tuple[tuple[Fraction, ...], ...]:
    rows = [list(r) for r in phi]
    try:
        return tuple(tuple(_rationalize(x) for x in r) for r in rows)
    except InexactError:
        raise InexactError("the map must have rational entries")


def automorphism_permutations(rep: PeriodicSetRep, phi) -> list[tuple[int, ...]]:
    """All permutations sigma of the minimal representation realising ``phi``.

    ``phi`` must be orthogonal and stabilize ``L_max``; the result is empty if it
    is still not an automorphism of ``Lambda``.
    """
    mp = maximal_period_lattice(rep)
    L, ts = mp.lattice, mp.rep.translations
    P = _exact_matrix(phi)
    n = L.dim
    if len(P) != n or any(len(r) != n for r in P):
        raise InputError("map has wrong shape")
    for i in range(n):
        for j in range(n):
            dot = sum((P[k][i] * P[k][j] for k in range(n)), Fraction(0))
            if dot != (1 if i == j else 0):
                raise InputError("map is not orthogonal")
    apply = lambda v: tuple(sum((P[i][j] * v[j] for j in range(n)), Fraction(0)) for i in range(n))
    if not all(L.contains(apply(c)) for c in L.columns()):
        raise PreconditionError("map does not stabilize the maximal period lattice")
    m = len(ts)
    keys = [L.reduce(t) for t in ts]
    out = []
    for s in range(m):
        sig = []
        for i in range(m):
            target = L.reduce(_add(apply(_sub(ts[i], ts[0])), ts[s]))
            sig.append(keys.index(target) if target in keys else None)
        if None not in sig and sorted(sig) == list(range(m)):
            out.append(tuple(sig))
    return out


def is_orthogonal_automorphism(rep: PeriodicSetRep, phi) -> tuple[int, ...] | bool:
    """The permutation of the minimal representation if ``phi`` preserves ``Lambda``, else False."""
    sols = automorphism_permutations(rep, phi)
    if len(sols) > 1:
        raise AssertionError("automorphism permutation is not unique")
    return sols[0] if sols else False


# weights ---------------------------------------------------------------------------------


def weight(rep: PeriodicSetRep, w) -> Fraction:
    """``nu(w) = |{i : w in Lambda - t_i}| / m``; independent of the representation."""
    if not rep.is_exact:
        raise InexactError("weights need exact input")
    w = tuple(to_fraction(x) for x in w)
    cnt = sum(1 for t in rep.translations if rep.contains(_add(w, t)))
    if cnt == 0:
        raise NotDifferenceVectorError("not a difference vector")
    return Fraction(cnt, rep.m)


def class_weights(rep: PeriodicSetRep, classes: Sequence[DifferenceClass]) -> list[Fraction]:
    """Weight of each difference class: the number of pairs producing it over ``m``."""
    return [Fraction(c.multiplicity, rep.m) for c in classes]


def weighted_difference_shells(rep: PeriodicSetRep, R2max):
    """Shells of ``Lambda - Lambda`` up to ``R2max`` with weights ``nu``, zero shell excluded."""
    from .designs import Shell
    from .lattice import coset_ball

    if not rep.is_exact:
        raise InexactError("weighted shells need exact input")
    classes = difference_classes(rep)
    s = rep.scale
    wts = class_weights(rep, classes)
    per_key: dict[int, list] = {}
    for cl, nu in zip(classes, wts):
        pb = coset_ball(rep.lattice, cl.offset, R2max)
        W = pb.scaled * (s // pb.scale)
        keys = (W * W).sum(axis=1)
        for key in np.unique(keys):
            if key == 0:
                continue
            sel = W[keys == key]
            per_key.setdefault(int(key), []).append((sel, nu))
    out = []
    for key in sorted(per_key):
        parts = per_key[key]
        V = np.concatenate([p[0] for p in parts])
        weights = tuple(nu for p in parts for nu in [p[1]] * len(p[0]))
        out.append(Shell(Fraction(key, s * s), V, s, weights))
    return out


# builders ----------------------------------------------------------------------------------


def dn_basis_rows(n: int) -> list[list[int]]:
    """Columns e_i - e_{i+1} (i < n) and e_{n-1} + e_n."""
    if n < 2:
        raise InputError("D_n needs n >= 2")
    rows = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i][i] = 1
        rows[i + 1][i] = -1
    rows[n - 2][n - 1] = 1
    rows[n - 1][n - 1] = 1
    return rows


def build_zn(n: int) -> PeriodicSetRep:
    lat = Lattice.from_basis([[int(i == j) for j in range(n)] for i in range(n)])
    return PeriodicSetRep(lat, ((Fraction(0),) * n,))


def build_dn(n: int) -> PeriodicSetRep:
    lat = Lattice.from_basis(dn_basis_rows(n))
    return PeriodicSetRep(lat, ((Fraction(0),) * n,))


def build_dn_plus(n: int) -> PeriodicSetRep:
    """``D_n`` together with its translate by the all-halves vector."""
    lat = Lattice.from_basis(dn_basis_rows(n))
    return PeriodicSetRep(lat, ((Fraction(0),) * n, (Fraction(1, 2),) * n))


def refine(rep: PeriodicSetRep, sub) -> PeriodicSetRep:
    """Same set, written over the sublattice with basis ``B @ sub`` (``sub`` integral)."""
    from sympy import Matrix
    from sympy.matrices.normalforms import hermite_normal_form

    n = rep.n
    U = [[int(x) for x in r] for r in sub]
    if len(U) != n or any(len(r) != n for r in U):
        raise InputError("sublattice matrix has wrong shape")
    H = hermite_normal_form(Matrix(U))
    if H.shape != (n, n) or H.det() == 0:
        raise InputError("sublattice matrix must be non-singular")
    B = rep.lattice.exact_basis
    newB = [[sum((B[i][k] * U[k][j] for k in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]
    lat = Lattice.from_basis(newB)
    # H is triangular with the same column lattice as U, so boxes give coset representatives
    diag = [abs(int(H[i, i])) for i in range(n)]
    ts = []
    for t in rep.translations:
        for z in itertools.product(*[range(d) for d in diag]):
            ts.append(_add(t, rep.lattice.vector(z)))
    return PeriodicSetRep(lat, tuple(ts))
