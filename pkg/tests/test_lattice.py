import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import box_ball, dn_box_shell
from periodica.errors import AmbiguousShellError, DegenerateLatticeError, InputError
from periodica.lattice import (
    Lattice,
    coset_ball,
    enumerate_coset_ball,
    float_shell_breaks,
    minimal_norm,
    shells,
)
from periodica.moments import ball_count_bound
from periodica.periodic import dn_basis_rows

int_bases = st.integers(2, 3).flatmap(
    lambda n: st.lists(st.lists(st.integers(-3, 3), min_size=n, max_size=n), min_size=n, max_size=n)
).filter(lambda rows: round(abs(np.linalg.det(np.array(rows, float)))) != 0)


def test_z2_ball():
    lat = Lattice.from_basis([[1, 0], [0, 1]])
    assert len(enumerate_coset_ball(lat, None, 1)) == 5
    assert len(enumerate_coset_ball(lat, None, 2)) == 9


def test_exact_norms_are_rationals():
    lat = Lattice.from_basis([["1/2", 0], [0, 1]])
    vs = enumerate_coset_ball(lat, ["1/4", 0], Fraction(1, 4))
    assert sorted(v.exact_norm2 for v in vs) == [Fraction(1, 16), Fraction(1, 16)]


@settings(max_examples=40, deadline=None)
@given(int_bases, st.integers(0, 7), st.integers(1, 12))
def test_ball_matches_box_oracle(rows, off_seed, R2):
    lat = Lattice.from_basis(rows)
    n = len(rows)
    offset = [Fraction((off_seed * (i + 3)) % 5, 5) for i in range(n)]
    got = np.array(sorted((v.norm2 for v in enumerate_coset_ball(lat, offset, R2))))
    want = np.sort((box_ball(rows, [float(x) for x in offset], R2) ** 2).sum(1))
    assert len(got) == len(want)
    assert np.allclose(got, want)
    assert len(got) <= ball_count_bound(lat, R2)


@settings(max_examples=25, deadline=None)
@given(int_bases)
def test_cell_radius_covers(rows):
    # every point lies within cell_radius of the lattice
    lat = Lattice.from_basis(rows)
    rng = np.random.default_rng(len(rows))
    B = np.array(rows, float)
    n = len(rows)
    reach = np.linalg.norm(B, axis=0).sum() + lat.cell_radius + 1
    V = box_ball(rows, np.zeros(n), reach ** 2)
    for x in rng.uniform(0, 1, size=(20, n)) @ B.T:
        d = np.sqrt(((V - x) ** 2).sum(1)).min()
        assert d <= lat.cell_radius * (1 + 1e-9)


def test_d9_shells_match_box_oracle():
    lat = Lattice.from_basis(dn_basis_rows(9))
    got = {r2: len(v) for r2, v in shells(lat, None, 4)}
    for r2 in (2, 4):
        assert got[Fraction(r2)] == len(dn_box_shell(9, Fraction(r2)))
    assert got[Fraction(2)] == 144


def test_d9_half_coset_shell():
    lat = Lattice.from_basis(dn_basis_rows(9))
    sh = dict(shells(lat, [Fraction(1, 2)] * 9, Fraction(17, 4)))
    assert len(sh[Fraction(9, 4)]) == len(dn_box_shell(9, Fraction(9, 4), half=True)) == 256
    assert len(sh[Fraction(17, 4)]) == len(dn_box_shell(9, Fraction(17, 4), half=True))


def test_minimal_norm():
    assert minimal_norm(Lattice.from_basis(dn_basis_rows(9))) == 2
    assert math.isclose(minimal_norm(Lattice.from_basis([[1.0, 0.5], [0.0, math.sqrt(3) / 2]])), 1.0)


def test_float_lattice():
    b = [[1.0, 0.5], [0.0, math.sqrt(3) / 2]]
    lat = Lattice.from_basis(b)
    assert not lat.is_exact
    got = sorted(enumerate_coset_ball(lat, None, 1.000001), key=lambda v: v.norm2)
    assert len(got) == 7
    assert len(dict(shells(lat, None, 3.5))) == 3


def test_degenerate_rejected():
    with pytest.raises(DegenerateLatticeError):
        Lattice.from_basis([[1, 2], [2, 4]])
    with pytest.raises(DegenerateLatticeError):
        Lattice.from_basis([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(InputError):
        Lattice.from_basis([[1, 0, 0], [0, 1, 0]])


def test_ambiguous_shells_refused():
    with pytest.raises(AmbiguousShellError):
        float_shell_breaks(np.array([1.0, 1.0 + 1e-7]))
    assert list(float_shell_breaks(np.array([1.0, 1.0 + 1e-12, 2.0]))) == [0, 2]


def test_coset_ball_keys_exact():
    lat = Lattice.from_basis(dn_basis_rows(5))
    pb = coset_ball(lat, [Fraction(1, 2)] * 5, 5)
    assert pb.scale == 2
    assert np.array_equal((pb.scaled ** 2).sum(1), pb.keys)
    assert np.all(pb.keys % 4 == 1)  # squared norms 5/4 + even multiples
