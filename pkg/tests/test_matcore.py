import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from macflow import matcore
from macflow.orbit import pair_from_plus, quasi_orbit, make_zgrid, transition

from conftest import random_orthogonal, unit_vector

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


def square(n):
    return arrays(float, (n, n), elements=finite)


def test_frobenius_identity_cases():
    assert matcore.frobenius(np.eye(3), np.eye(3)) == 3.0
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    assert matcore.frobenius(np.outer(e1, e2), np.outer(e2, e1)) == 0.0


def test_frobenius_matches_entry_sum(rng):
    a = rng.standard_normal((4, 4))
    assert matcore.frobenius(a, a) == pytest.approx(np.sum(a**2), rel=1e-14)


def test_frobenius_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        matcore.frobenius(np.eye(2), np.eye(3))


@settings(max_examples=50, derandomize=True)
@given(a=square(3), b=square(3))
def test_frobenius_symmetric(a, b):
    assert matcore.frobenius(a, b) == pytest.approx(matcore.frobenius(b, a), abs=1e-12)


def test_nonlinearity_zeros():
    assert np.allclose(matcore.nonlinearity(np.eye(3)), 0.0)
    c = 1.7
    got = matcore.nonlinearity(c * np.eye(4))
    assert np.allclose(got, (c**3 - c) * np.eye(4))


def test_nonlinearity_vanishes_on_orthogonal(rng):
    for n in (2, 3, 4):
        for _ in range(20):
            q = random_orthogonal(n, rng, det=rng.choice([-1, 1]))
            assert np.max(np.abs(matcore.nonlinearity(q))) <= 1e-12


def test_nonlinearity_on_quasi_orbit(rng):
    # f(Phi (I - 2 s nn)) = 4 s (s-1)(1-2s) Phi nn^T
    n = 3
    a_plus = random_orthogonal(n, rng, +1)
    d = unit_vector(n, rng)
    a_minus = pair_from_plus(a_plus, d).a_minus @ random_orthogonal(n, rng, +1) @ np.eye(n)
    # use a clean geodesic-carried profile
    q = quasi_orbit(pair_from_plus(a_plus, d).a_minus, a_plus, d, make_zgrid(5.0, 11))
    s = transition(q.theta.zgrid)
    expected = (4 * s * (s - 1) * (1 - 2 * s))[:, None, None] * (q.phi.samples @ np.outer(d, d))
    got = matcore.nonlinearity(q.theta.samples)
    assert np.max(np.abs(got - expected)) < 1e-12


def test_double_well_values(rng):
    assert matcore.double_well(np.eye(5)) == 0.0
    n = 3
    assert matcore.double_well(np.zeros((n, n))) == pytest.approx(n / 4)
    # on the minimal orbit: Theta^T Theta = I - 4 s (1-s) nn, so F = 4 s^2 (1-s)^2
    d = unit_vector(n, rng)
    pair = pair_from_plus(random_orthogonal(n, rng, +1), d)
    z = np.linspace(-3, 3, 13)
    s = transition(z)
    theta = s[:, None, None] * pair.a_plus + (1 - s)[:, None, None] * pair.a_minus
    vals = matcore.double_well(theta)
    assert np.allclose(vals, 4 * s**2 * (1 - s) ** 2, atol=1e-13)


def test_linearization_on_orthogonal(rng):
    b = random_orthogonal(3, rng)
    assert np.allclose(matcore.linearization(b, b), 2 * b)


def test_linearization_of_reflector_direction(rng):
    # H at I - 2 s nn applied to nn^T scales by kappa_1(s) = 2 (1 - 6 s + 6 s^2)
    d = unit_vector(4, rng)
    nn = np.outer(d, d)
    for s in (0.0, 0.3, 0.5, 1.0):
        p0 = np.eye(4) - 2 * s * nn
        got = matcore.linearization(p0, nn)
        assert np.allclose(got, 2 * (1 - 6 * s + 6 * s * s) * nn, atol=1e-13)


def test_linearization_is_derivative_of_nonlinearity(rng):
    b = rng.standard_normal((3, 3))
    a = rng.standard_normal((3, 3))
    hs = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    errs = []
    for h in hs:
        fd = (matcore.nonlinearity(b + h * a) - matcore.nonlinearity(b)) / h
        errs.append(np.linalg.norm(fd - matcore.linearization(b, a)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)


@settings(max_examples=30, derandomize=True)
@given(b=square(3), a=square(3), c=square(3))
def test_linearization_self_adjoint(b, a, c):
    lhs = matcore.frobenius(matcore.linearization(b, a), c)
    rhs = matcore.frobenius(a, matcore.linearization(b, c))
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_trilinear_identity_slot():
    # direct expansion: T(I, I, A) = 2A + 2A + 2A^T = 4A + 2A^T; symmetric A gives 6A
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 3))
    assert np.allclose(matcore.trilinear(np.eye(3), np.eye(3), a), 4 * a + 2 * a.T)
    sym = a + a.T
    assert np.allclose(matcore.trilinear(np.eye(3), np.eye(3), sym), 6 * sym)


def test_trilinear_multilinear_zero(rng):
    a, b = rng.standard_normal((2, 3, 3))
    assert np.allclose(matcore.trilinear(a, np.zeros((3, 3)), b), 0.0)


def test_trilinear_four_argument_symmetry(rng):
    a1, a2, a3, a4 = rng.standard_normal((4, 3, 3))
    base = matcore.frobenius(matcore.trilinear(a1, a2, a3), a4)
    perms = [
        matcore.frobenius(matcore.trilinear(a2, a1, a3), a4),
        matcore.frobenius(matcore.trilinear(a3, a2, a1), a4),
        matcore.frobenius(matcore.trilinear(a4, a2, a3), a1),
        matcore.frobenius(matcore.trilinear(a1, a3, a2), a4),
        matcore.frobenius(matcore.trilinear(a1, a2, a4), a3),
        matcore.frobenius(matcore.trilinear(a1, a4, a3), a2),
    ]
    for p in perms:
        assert p == pytest.approx(base, rel=1e-12, abs=1e-12)


@settings(max_examples=40, derandomize=True)
@given(a=square(3))
def test_split_reconstructs_and_orthogonal(a):
    sym, asym = matcore.sym_asym_split(a)
    assert np.array_equal(sym + asym, a) or np.allclose(sym + asym, a, atol=1e-15)
    assert np.allclose(sym, sym.T)
    assert np.allclose(asym, -asym.T)
    assert matcore.frobenius(sym, asym) == pytest.approx(0.0, abs=1e-12)


def test_split_examples():
    sym, asym = matcore.sym_asym_split(np.eye(3))
    assert np.allclose(sym, np.eye(3)) and np.allclose(asym, 0.0)
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    sym, asym = matcore.sym_asym_split(np.outer(e1, e2))
    assert np.allclose(sym, (np.outer(e1, e2) + np.outer(e2, e1)) / 2)
    assert np.allclose(asym, (np.outer(e1, e2) - np.outer(e2, e1)) / 2)


def test_orthogonality_defect():
    assert matcore.orthogonality_defect(np.eye(3)) == 0.0
    assert matcore.orthogonality_defect(2 * np.eye(2)) == pytest.approx(3 * np.sqrt(2))
    d = np.array([0.6, 0.8])
    householder = np.eye(2) - 2 * np.outer(d, d)
    assert matcore.orthogonality_defect(householder) <= 1e-15


def test_defect_zero_iff_potential_zero(rng):
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        f = matcore.double_well(a)
        d = matcore.orthogonality_defect(a)
        assert f == pytest.approx(0.25 * d * d, rel=1e-12)
        assert f >= 0.0


def test_det_sign():
    assert matcore.det_sign(np.eye(4)) == 1
    d = np.array([1.0, 0, 0])
    assert matcore.det_sign(np.eye(3) - 2 * np.outer(d, d)) == -1
    assert matcore.det_sign(np.diag([1.0, 1.0, 0.0])) == 0


def test_validation_rejects_bad_input():
    with pytest.raises(ValueError):
        matcore.nonlinearity(np.ones((2, 3)))
    with pytest.raises(ValueError):
        matcore.nonlinearity(np.array([[1.0]]))
    with pytest.raises(ValueError):
        matcore.nonlinearity(np.array([[np.nan, 0], [0, 1.0]]))
