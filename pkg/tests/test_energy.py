import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from periodica import energy as E
from periodica.errors import InputError, PreconditionError
from periodica.lattice import Lattice
from periodica.periodic import PeriodicSetRep, build_dn_plus, build_zn, refine

K = np.arange(-60, 61)


def _S(c, shift=0.0, sign=False):
    """One-dimensional theta sums: sum_k (+-1)^k exp(-c (k + shift)^2)."""
    w = np.exp(-c * (K + shift) ** 2)
    if sign:
        w = w * (-1.0) ** K
    return math.fsum(w)


def _dn_plus_energy(n, c):
    # theta_{D_n} = (th3^n + th4^n) / 2, theta_{1/2 + D_n} = th2^n / 2
    th3, th4, th2 = _S(c), _S(c, sign=True), _S(c, 0.5)
    return (th3 ** n + th4 ** n) / 2 - 1 + th2 ** n / 2


def test_z1_energy_direct_sum():
    want = _S(1.0) - 1
    rep = E.energy(build_zn(1), 1.0)
    assert abs(rep.value - want) <= 1e-15 + rep.tail_bound
    assert rep.value == pytest.approx(0.7726372048266518, rel=1e-15)


@pytest.mark.parametrize("c", [0.3, 1.0, 2.5])
def test_z2_energy(c):
    rep = E.energy(build_zn(2), c, tol=1e-13)
    assert rep.value == pytest.approx(_S(c) ** 2 - 1, rel=1e-12)


@pytest.mark.parametrize("c", [0.5, 1.0, 4.0])
def test_dn_plus_energy_theta_oracle(c):
    rep = E.energy(build_dn_plus(9), c, tol=1e-11)
    want = _dn_plus_energy(9, c)
    assert abs(rep.value - want) <= rep.tail_bound + 1e-13 * want


@pytest.mark.parametrize("R2", [1, 3, 6])
def test_tail_bound_is_an_upper_bound(R2):
    rep = E.energy(build_zn(2), 0.4, R2=R2)
    true_tail = (_S(0.4) ** 2 - 1) - rep.value
    assert 0 <= true_tail <= rep.tail_bound


def test_log_energy_underflow():
    rep = E.energy(build_zn(1), 800.0)
    assert rep.value == 0.0
    assert rep.log_value == pytest.approx(math.log(2) - 800, rel=1e-14)


def test_params_round_trip():
    rng = np.random.default_rng(1)
    x = rng.normal(size=E.n_params(3, 2))
    p = E.DeformationParams.from_vector(x, 3, 2)
    assert abs(np.trace(p.H)) < 1e-14
    assert np.allclose(p.to_vector(), x)
    with pytest.raises(InputError):
        E.DeformationParams(np.eye(2), np.zeros((1, 2)))


def test_deformed_energy_at_zero():
    rep = build_dn_plus(5)
    a = E.energy(rep, 1.5, tol=1e-12).value
    b = E.deformed_energy(rep, E.DeformationParams.zeros(5, 2), 1.5, tol=1e-12).value
    assert b == pytest.approx(a, rel=1e-13)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0, 4.0])
def test_dn_plus_gradient_vanishes(c):
    g = E.gradient(build_dn_plus(9), c, tol=1e-12)
    assert g.exact_zero is True
    assert g.norm <= g.tail_bound


def test_gradient_of_rectangle_matches_oracle():
    # E(x) = S(a e^{s}) S(b e^{-s}) - 1 along diag(1, -1)/sqrt2, s = x / sqrt2
    lat = Lattice.from_basis([[1, 0], [0, 2]])
    rep = PeriodicSetRep(lat, ((0, 0),))
    c = 0.7
    g = E.gradient(rep, c, tol=1e-13)

    def f(x):
        s = x / math.sqrt(2)
        return _S(c * math.exp(s)) * _S(4 * c * math.exp(-s))

    h = 1e-5
    want = (f(h) - f(-h)) / (2 * h)
    assert g.vector[0] == pytest.approx(want, rel=1e-7)
    assert g.exact_zero is False


def test_z2_hessian_theta_oracle():
    c = 0.5
    S0 = _S(c)
    S1 = -math.fsum(K ** 2 * np.exp(-c * K ** 2))
    S2 = math.fsum(K ** 4 * np.exp(-c * K ** 2))
    hf = E.hessian(build_zn(2), c, tol=1e-13)
    assert hf.Q[0, 0] == pytest.approx((c * S1 + c * c * S2) * S0 - c * c * S1 * S1, rel=1e-9)
    # shear direction from a direct sum with the matrix exponential
    B1 = E.trace_zero_basis(2)[1]
    pts = np.array([(i, j) for i in range(-30, 31) for j in range(-30, 31) if i or j], float)

    def f(x):
        G = expm(x * B1)
        return math.fsum(np.exp(-c * np.einsum("ki,ij,kj->k", pts, G, pts)))

    h = 1e-2
    want = (f(h) + f(-h) - 2 * f(0)) / h ** 2
    assert hf.Q[1, 1] == pytest.approx(want, rel=1e-3)
    assert hf.Q[1, 1] < 0


def test_z2_not_local_min_low_c():
    cert = E.certify_local_min(build_zn(2), 0.5)
    assert cert.verdict == "NEGATIVE"
    assert cert.lambda_min < -cert.error_bound


def test_local_min_needs_criticality():
    rep = PeriodicSetRep(Lattice.from_basis([[1, 0], [0, 2]]), ((0, 0),))
    with pytest.raises(PreconditionError):
        E.certify_local_min(rep, 1.0)


def test_gauge_complement():
    C = E.gauge_complement(3, 2)
    G = E.gauge_basis(3, 2)
    assert C.shape == (E.n_params(3, 2), E.n_params(3, 2) - 3)
    assert np.allclose(C.T @ C, np.eye(C.shape[1]))
    assert np.allclose(C.T @ G, 0)


def test_gauge_directions_are_flat():
    rep = build_dn_plus(5)
    hf = E.hessian(rep, 2.0)
    G = E.gauge_basis(5, 2)
    assert np.abs(hf.Q @ G).max() <= 1e-10 * np.abs(hf.Q).max()


def test_reordered_matches_for_constant_parent_params():
    # a refinement with translations constant on parent cosets is the same deformation
    rep = build_dn_plus(5)
    ref = refine(rep, np.diag([2, 1, 1, 1, 1]))
    rng = np.random.default_rng(3)
    H = rng.normal(size=(5, 5)) * 0.02
    H = H + H.T
    H -= np.trace(H) / 5 * np.eye(5)
    t = rng.normal(size=(2, 5)) * 0.02
    parent = [0 if all(x.denominator == 1 for x in tr) else 1 for tr in ref.translations]
    tref = np.array([t[p] for p in parent])
    a = E.deformed_energy(rep, E.DeformationParams(H, t), 3.0, tol=1e-10)
    b = E.reordered_energy_2periodic(ref, E.DeformationParams(H, tref), 3.0, tol=1e-10)
    assert abs(a.value - b.value) <= 2 * (a.tail_bound + b.tail_bound) + 1e-12 * a.value


def test_float_rep_energy():
    b = [[1.0, 0.5], [0.0, math.sqrt(3) / 2]]
    rep = PeriodicSetRep(Lattice.from_basis(b), ((0.0, 0.0),))
    c = 1.3
    pts = np.array([(i, j) for i in range(-20, 21) for j in range(-20, 21) if i or j], float) @ np.array(b).T
    want = math.fsum(np.exp(-c * (pts ** 2).sum(1)))
    assert E.energy(rep, c, tol=1e-13).value == pytest.approx(want, rel=1e-12)
    assert E.certify_local_min(rep, c).criticality == "NUMERICAL"


def test_bad_c():
    with pytest.raises(InputError):
        E.energy(build_zn(1), -1.0)
