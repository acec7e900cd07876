import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from periodica.errors import InputError, NotDifferenceVectorError, NotTwoPeriodicError, PreconditionError
from periodica.lattice import Lattice, coset_ball, minimal_norm
from periodica.periodic import (
    PeriodicSetRep,
    build_dn,
    build_dn_plus,
    build_zn,
    difference_classes,
    is_orthogonal_automorphism,
    maximal_period_lattice,
    refine,
    two_periodic_structure,
    weight,
    weighted_difference_shells,
)

HALF = Fraction(1, 2)


def _points(rep, R2):
    """Set points of norm <= R2, as exact tuples."""
    out = []
    for t in rep.translations:
        pb = coset_ball(rep.lattice, t, R2)
        out += [tuple(Fraction(int(x), pb.scale) for x in row) for row in pb.scaled]
    return out


def _in_dn_plus(v):
    if all(x.denominator == 1 for x in v):
        return sum(v) % 2 == 0
    w = [x - HALF for x in v]
    return all(x.denominator == 1 for x in w) and sum(w) % 2 == 0


@pytest.mark.parametrize("n", [5, 6, 7, 8, 9, 10, 11])
def test_m_min_parity(n):
    assert maximal_period_lattice(build_dn_plus(n)).m_min == (1 if n % 2 == 0 else 2)


def test_e8_signature():
    mp = maximal_period_lattice(build_dn_plus(8))
    assert abs(mp.lattice.det_int) == mp.lattice.scale ** 8
    assert mp.lattice.exact_covolume == 1
    assert minimal_norm(mp.lattice) == 2
    pb = coset_ball(mp.lattice, None, 2)
    assert int((pb.keys > 0).sum()) == 240


def test_translations_must_be_incongruent():
    with pytest.raises(InputError):
        PeriodicSetRep(build_zn(2).lattice, ((0, 0), (1, 0)))


def test_difference_classes_of_dn_plus(d9p):
    cls = difference_classes(d9p)
    # 1/2 and -1/2 differ by the all-ones vector, which is not in D_9
    assert sorted(c.multiplicity for c in cls) == [1, 1, 2]
    assert [c.multiplicity for c in cls if c.is_zero] == [2]


def test_weight(d9p):
    assert weight(d9p, [1, 1] + [0] * 7) == 1
    assert weight(d9p, [HALF] * 9) == Fraction(1, 2)
    with pytest.raises(NotDifferenceVectorError):
        weight(d9p, [1] + [0] * 8)


def test_weight_constant_under_refinement(d9p):
    ref = refine(d9p, np.diag([2] + [1] * 8))
    assert ref.m == 4
    for v in ([1, 1] + [0] * 7, [HALF] * 9, [2] + [0] * 8, [-HALF] + [HALF] * 8):
        assert weight(ref, v) == weight(d9p, v)


def test_refine_preserves_set(d9p):
    ref = refine(d9p, [[1, 1] + [0] * 7, [0, 2] + [0] * 7] + [[0] * i + [1] + [0] * (8 - i) for i in range(2, 9)])
    pts = set(_points(d9p, 3))
    assert set(_points(ref, 3)) == pts
    assert all(_in_dn_plus(v) for v in pts)


def test_maximal_period_recovers_dn_plus(d9p):
    ref = refine(d9p, np.diag([3, 1, 1, 1, 1, 1, 1, 1, 2]))
    mp = maximal_period_lattice(ref)
    assert mp.m_min == 2
    assert mp.lattice.same_lattice(d9p.lattice)


def test_two_periodic_structure(d9p):
    st = two_periodic_structure(d9p)
    assert st.J == (0,) and st.J_prime == (1,)
    assert st.sigma == ((0, 1), (1, 0))
    st4 = two_periodic_structure(refine(d9p, np.diag([2] + [1] * 8)))
    assert len(st4.J) == len(st4.J_prime) == 2
    st4.check()


def test_not_two_periodic():
    with pytest.raises(NotTwoPeriodicError):
        two_periodic_structure(build_dn_plus(8))
    with pytest.raises(NotTwoPeriodicError):
        two_periodic_structure(build_dn(9))


def _affine_preserves(rep, phi, shift, R2=3):
    P = [[Fraction(x) for x in r] for r in phi]
    n = rep.n
    for v in _points(rep, R2):
        img = tuple(sum(P[i][j] * v[j] for j in range(n)) + shift[i] for i in range(n))
        if not _in_dn_plus(img):
            return False
    return True


@pytest.mark.parametrize("signs,expected", [
    ([-1] * 9, (1, 0)),
    ([-1] + [1] * 8, (1, 0)),
    ([-1, -1] + [1] * 7, (0, 1)),
])
def test_sign_change_automorphisms(d9p, signs, expected):
    phi = np.diag(signs).tolist()
    sig = is_orthogonal_automorphism(d9p, phi)
    assert sig == expected
    shift = [HALF] * 9 if expected == (1, 0) else [Fraction(0)] * 9
    assert _affine_preserves(d9p, phi, shift)


def test_coordinate_permutation_is_automorphism(d9p):
    perm = [1, 0] + list(range(2, 9))
    phi = np.eye(9, dtype=int)[perm].tolist()
    assert is_orthogonal_automorphism(d9p, phi) == (0, 1)


def test_automorphism_preconditions(d9p):
    phi = np.eye(9, dtype=int).tolist()
    phi[0][0], phi[0][1] = 0, 1
    with pytest.raises(InputError, match="orthogonal"):
        is_orthogonal_automorphism(d9p, phi)
    # a rational rotation in a coordinate plane is orthogonal but leaves D_9
    rot = np.eye(9, dtype=object)
    rot[0, 0], rot[0, 1], rot[1, 0], rot[1, 1] = Fraction(3, 5), Fraction(-4, 5), Fraction(4, 5), Fraction(3, 5)
    with pytest.raises(PreconditionError, match="stabilize"):
        is_orthogonal_automorphism(d9p, rot.tolist())


def test_reflection_of_two_point_set():
    # x -> -x composed with a translation by 1/4 preserves {0, 1/4} + Z
    rep = PeriodicSetRep(build_zn(1).lattice, ((Fraction(0),), (Fraction(1, 4),)))
    assert is_orthogonal_automorphism(rep, [[-1]]) == (1, 0)
    rep3 = PeriodicSetRep(build_zn(1).lattice, ((Fraction(0),), (Fraction(1, 4),), (Fraction(1, 2),)))
    assert is_orthogonal_automorphism(rep3, [[-1]]) == (2, 1, 0)


def test_dn_det():
    lat = build_dn(9).lattice
    assert lat.exact_covolume == 2
    assert round(np.linalg.det(lat.gram)) == 4  # Gram determinant
    assert minimal_norm(build_dn(9).lattice) == 2


def test_json_round_trip(d9p):
    obj = json.loads(json.dumps(d9p.to_json()))
    back = PeriodicSetRep.from_json(obj)
    assert back.lattice.same_lattice(d9p.lattice)
    assert back.translations == d9p.translations
    with pytest.raises(InputError):
        PeriodicSetRep.from_json({"lattice": {"basis": [[1]]}})


def test_weighted_shells_match_box_oracle(d9p):
    shells = weighted_difference_shells(d9p, Fraction(9, 4))
    assert [s.r2 for s in shells] == [2, Fraction(9, 4)]
    assert [len(s.vectors) for s in shells] == [144, 512]
    assert set(shells[1].weights) == {HALF}
    # box oracle: differences of points in a small ball
    diffs = set()
    for v in itertools.product([-1, 0, 1], repeat=9):
        if sum(x * x for x in v) == 2 and sum(v) % 2 == 0:
            diffs.add(v)
    assert len(diffs) == 144


def test_float_rep():
    lat = Lattice.from_basis([[1.0, 0.5], [0.0, 0.8660254037844386]])
    rep = PeriodicSetRep(lat, ((0.0, 0.0), (0.5, 0.2886751345948129)))
    assert not rep.is_exact
    with pytest.raises(InputError):
        PeriodicSetRep(lat, ((0.0, 0.0), (1.0, 0.0)))
