import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import dn_box_shell
from periodica.designs import (
    Shell,
    certify_critical,
    design_strength,
    fourth_moment_deviation,
    is_balanced,
    is_weighted_2design,
)
from periodica.errors import InputError
from periodica.lattice import Lattice
from periodica.periodic import PeriodicSetRep, build_dn_plus, build_zn

HALF = Fraction(1, 2)


def _moment(V, d):
    V = np.asarray(V, dtype=float)
    T = V
    for _ in range(d - 1):
        T = T[..., None] * V.reshape(V.shape[:1] + (1,) * (T.ndim - 1) + V.shape[1:])
    return T.sum(0)


def _is_design_oracle(V, t):
    """Compare moments with the uniform sphere up to degree t (even degrees via Gaussian moments)."""
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    r2 = float((V[0] ** 2).sum())
    N = len(V)
    for d in range(1, t + 1):
        M = _moment(V, d) / N
        if d % 2:
            if not np.allclose(M, 0):
                return False
        elif d == 2:
            if not np.allclose(M, r2 / n * np.eye(n)):
                return False
        elif d == 4:
            I = np.eye(n)
            sym = (np.einsum("ij,kl->ijkl", I, I) + np.einsum("ik,jl->ijkl", I, I)
                   + np.einsum("il,jk->ijkl", I, I))
            if not np.allclose(M, r2 * r2 / (n * (n + 2)) * sym):
                return False
    return True


@pytest.mark.parametrize("vecs,expected", [
    ([[1, 0], [-1, 0], [0, 1], [0, -1]], 3),
    (list(itertools.product([-1, 1], repeat=3)), 3),
    ([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], 3),
    ([[1, 0], [0, 1]], 0),
    ([[1, 0], [-1, 0]], 1),
])
def test_design_strength_known(vecs, expected):
    sh = Shell.from_vectors(vecs)
    assert design_strength(sh) == expected
    assert _is_design_oracle(vecs, expected)
    if expected < 4:
        assert not _is_design_oracle(vecs, expected + 1)


def test_e8_roots_are_4_design():
    roots = [v for v in itertools.product([-1, 0, 1], repeat=8) if sum(x * x for x in v) == 2]
    halves = [v for v in itertools.product([-HALF, HALF], repeat=8) if sum(v) % 2 == 0]
    sh = Shell.from_vectors(roots + halves)
    assert len(sh.vectors) == 240
    assert design_strength(sh) == 4
    assert fourth_moment_deviation(sh) == 0


def test_d9_root_shell():
    V = dn_box_shell(9, Fraction(2))
    sh = Shell.from_vectors(V.tolist())
    assert is_balanced(sh)
    ok, c_r = is_weighted_2design(sh)
    assert ok and c_r == Fraction(2 * 144, 9)
    assert design_strength(sh) == 3
    Z = int((V.astype(object) ** 4).sum())
    assert fourth_moment_deviation(sh) == Z - Fraction(3, 11) * 4 * 144 == Fraction(1440, 11)


def test_weighted_shell():
    sh = Shell.from_vectors([[1, 0], [-1, 0], [0, 1], [0, -1]], weights=[1, 1, 2, 2])
    assert is_balanced(sh)
    assert is_weighted_2design(sh) == (False, None)


def test_shell_norm_checked():
    with pytest.raises(InputError):
        Shell.from_vectors([[1, 0], [1, 1]])


def test_certify_dn_plus(d9p):
    cert = certify_critical(d9p, 6)
    assert cert.status == "PASS"
    by_r2 = {s.r2: s for s in cert.shells}
    assert set(by_r2) == {2, Fraction(9, 4), 4, Fraction(17, 4), 6}
    assert by_r2[2].size == 144 and by_r2[Fraction(9, 4)].size == 512
    assert by_r2[2].a_r == Fraction(1440, 11)
    # c_r = r^2 * (weighted count) / n, weight 1/2 on the half-integral shell
    assert by_r2[Fraction(9, 4)].c_r == Fraction(9, 4) * 256 / 9
    assert all(s.strength >= 3 for s in cert.shells)


def test_certify_e8_is_4_design():
    cert = certify_critical(build_dn_plus(8), 4)
    assert cert.passed
    assert all(s.strength == 4 and s.a_r == 0 for s in cert.shells)


def test_certify_failure_has_witness():
    lat = Lattice.from_basis([[1, 0], [0, 2]])
    cert = certify_critical(PeriodicSetRep(lat, ((0, 0),)), 4)
    assert cert.status == "FAIL"
    assert cert.failures()[0].witness


def test_float_certificate_is_numerical():
    rep = PeriodicSetRep(Lattice.from_basis([[1.0, 0.0], [0.0, 1.0]]), ((0.0, 0.0),))
    assert certify_critical(rep, 5).status == "NUMERICAL"
    assert certify_critical(build_zn(2), 5).status == "PASS"
