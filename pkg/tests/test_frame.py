import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from macflow import frame, matcore
from macflow.orbit import make_zgrid, transition_derivs

from conftest import unit_vector

finite = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)


@pytest.fixture(params=[2, 3, 4])
def direction(request, rng):
    return unit_vector(request.param, rng)


def test_project_identity_cases(direction):
    n = direction.size
    nn = np.outer(direction, direction)
    assert np.allclose(frame.project(1, np.eye(n), direction), nn, atol=1e-14)
    assert np.allclose(frame.project(5, np.eye(n), direction), np.eye(n) - nn, atol=1e-14)
    for i in (2, 3, 4):
        assert np.max(np.abs(frame.project(i, np.eye(n), direction))) <= 1e-14


def test_project_antisymmetric_leg(direction):
    n = direction.size
    l = frame.complement_basis(direction)[:, 0]
    a = np.outer(direction, l) - np.outer(l, direction)
    assert np.allclose(frame.project(3, a, direction), a, atol=1e-14)
    for i in (1, 2, 4, 5):
        assert np.max(np.abs(frame.project(i, a, direction))) <= 1e-14


def test_project_rejects_non_unit():
    with pytest.raises(ValueError, match="unit"):
        frame.project(1, np.eye(3), np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError, match="1..5"):
        frame.project(6, np.eye(3), np.eye(3)[0])


@settings(max_examples=40, derandomize=True)
@given(a=arrays(float, (3, 3), elements=finite), seed=st.integers(0, 10))
def test_projection_family_properties(a, seed):
    d = unit_vector(3, np.random.default_rng(seed))
    parts = [frame.project(i, a, d) for i in (1, 2, 3, 4, 5)]
    assert np.allclose(sum(parts), a, atol=1e-12)
    for i in range(5):
        assert np.allclose(frame.project(i + 1, parts[i], d), parts[i], atol=1e-12)
        for j in range(5):
            if i != j:
                assert abs(matcore.frobenius(parts[i], parts[j])) <= 1e-12


def test_decompose_sorts_symmetry(rng, direction):
    n = direction.size
    a = rng.standard_normal((n, n))
    dec = frame.decompose(a, direction)
    sym, asym = matcore.sym_asym_split(a)
    assert np.allclose(dec[3] + dec[4], asym, atol=1e-13)
    assert np.allclose(dec[1] + dec[2] + dec[5], sym, atol=1e-13)
    nn = np.outer(direction, direction)
    dec_nn = frame.decompose(nn, direction)
    assert np.allclose(dec_nn[1], nn, atol=1e-14)
    for i in (2, 3, 4, 5):
        assert np.max(np.abs(dec_nn[i])) <= 1e-14


def test_subspace_dimensions(direction):
    n = direction.size
    dims = frame.subspace_dims(n)
    assert dims == (1, n - 1, n - 1, (n - 1) * (n - 2) // 2, n * (n - 1) // 2)
    assert sum(dims) == n * n
    # the bases really are orthonormal and live in their own slots
    for i in (1, 2, 3, 4, 5):
        basis = frame.subspace_basis(i, direction)
        assert len(basis) == dims[i - 1]
        for a, ea in enumerate(basis):
            assert np.allclose(frame.project(i, ea, direction), ea, atol=1e-12)
            for b, eb in enumerate(basis):
                want = 1.0 if a == b else 0.0
                assert matcore.frobenius(ea, eb) == pytest.approx(want, abs=1e-12)


def test_kappa_values():
    assert frame.kappa(1, 0.0) == 2.0
    assert frame.kappa(2, 0.0) == 2.0
    assert frame.kappa(3, 0.0) == 0.0
    assert frame.kappa(1, 0.5) == pytest.approx(-1.0)
    assert frame.kappa(2, 0.5) == 0.0
    assert frame.kappa(3, 0.5) == 0.0
    assert frame.kappa(4, 0.77) == 0.0
    assert frame.kappa(5, 0.12) == 2.0


def test_kappa_profile_identities():
    z = make_zgrid(10.0, 501)
    s, sp, spp, sppp = transition_derivs(z)
    assert np.max(np.abs(frame.kappa(1, s) * sp - sppp)) <= 1e-12
    assert np.max(np.abs(frame.kappa(2, s) * s - spp)) <= 1e-12
    assert np.max(np.abs(frame.kappa(3, s) * (1 - s) + spp)) <= 1e-12


def test_reflection_conjugation(rng, direction):
    n = direction.size
    assert frame.reflection_conjugation_residuals(np.zeros((n, n)), direction) == (0.0, 0.0, 0.0)
    l = frame.complement_basis(direction)[:, 0]
    sym_case = np.outer(direction, l) + np.outer(l, direction)
    assert max(frame.reflection_conjugation_residuals(sym_case, direction)) <= 1e-12
    for _ in range(10):
        a = rng.standard_normal((n, n))
        assert max(frame.reflection_conjugation_residuals(a, direction)) <= 1e-12


def test_bulk_quadratic_form(rng, direction):
    n = direction.size
    nn = np.outer(direction, direction)
    assert frame.bulk_quadratic_form(0.0, nn, direction) == pytest.approx(2.0, abs=1e-12)
    basis4 = frame.subspace_basis(4, direction)
    if basis4:
        for s in (0.0, 0.4, 1.0):
            assert frame.bulk_quadratic_form(s, basis4[0], direction) == pytest.approx(0.0, abs=1e-12)
    for s in (0.0, 0.3, 0.5, 0.9, 1.0):
        b = rng.standard_normal((n, n))
        value = frame.bulk_quadratic_form(s, b, direction)
        decomposed = sum(
            frame.kappa(i, s) * matcore.frobenius(frame.project(i, b, direction), frame.project(i, b, direction))
            for i in (1, 2, 3, 4, 5)
        )
        assert value == pytest.approx(decomposed, abs=1e-10)


def test_bulk_quadratic_form_rejects_bad_s():
    with pytest.raises(ValueError, match="\\[0, 1\\]"):
        frame.bulk_quadratic_form(1.5, np.eye(3), np.eye(3)[0])


def test_direction_sign_only_enters_through_outer_product(rng):
    d = unit_vector(3, rng)
    a = rng.standard_normal((3, 3))
    for i in (1, 2, 3, 4, 5):
        assert np.allclose(frame.project(i, a, d), frame.project(i, a, -d), atol=1e-13)
