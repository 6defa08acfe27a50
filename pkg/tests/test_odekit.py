import numpy as np
import pytest

from macflow import frame, matcore, odekit, orbit

from conftest import unit_vector

Z = orbit.make_zgrid()
S, SP, SPP, SPPP = orbit.transition_derivs(Z)


def kappa_arr(i):
    return np.asarray(frame.kappa(i, S))


def manufactured(i):
    """(u, f = L_i u) pairs from closed-form derivatives of the kink."""
    if i == 1:
        u = SPP
        upp = 2 * (-6 + 12 * S) * SP * SP + kappa_arr(1) * SPP
    elif i in (2, 3, 5):
        u = S * (1 - S)
        upp = SPP * (1 - 2 * S) - 2 * SP**2
    else:
        u = S
        upp = SPP
    return u, -upp + kappa_arr(i) * u


def test_zero_forcing_closed_forms():
    zero = odekit.ScalarRhs(Z, np.zeros_like(Z))
    assert np.max(np.abs(odekit.solve_scalar(1, zero, 1.0) - SP / (np.sqrt(2) / 4))) <= 1e-8
    assert np.max(np.abs(odekit.solve_scalar(2, zero, 0.7) - 0.7 * S)) <= 1e-8
    assert np.max(np.abs(odekit.solve_scalar(3, zero, -0.4) + 0.4 * (1 - S))) <= 1e-8
    assert np.max(np.abs(odekit.solve_scalar(4, zero, 2.0) - 2.0)) <= 1e-8
    const = odekit.ScalarRhs(Z, np.full_like(Z, 3.0), 3.0, 3.0)
    assert np.max(np.abs(odekit.solve_scalar(5, const) - 1.5)) <= 1e-8


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_manufactured_solutions(i):
    u, f = manufactured(i)
    rhs = odekit.ScalarRhs(Z, f)
    datum = {1: float(u[np.argmin(np.abs(Z))]), 2: 0.0, 3: 0.0, 4: 1.0, 5: 0.0}[i]
    got = odekit.solve_scalar(i, rhs, datum)
    assert np.max(np.abs(got - u)) <= 1e-8


@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_operator_residual_of_solutions(i):
    u, f = manufactured(i)
    h = Z[1] - Z[0]
    upp = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    resid = -upp + kappa_arr(i)[1:-1] * u[1:-1] - f[1:-1]
    assert np.max(np.abs(resid)) <= 5e-4  # discrete second-difference error


def test_limits_match_half_forcing():
    # compatible forcing with nonzero limits: f = c (1 - 2s) has limits +-c
    c = 1.4
    f = c * (1 - 2 * S)
    rhs = odekit.ScalarRhs(Z, f, limit_minus=c, limit_plus=-c)
    assert abs(odekit.compatibility_integral(1, rhs)) <= 1e-10
    u = odekit.solve_scalar(1, rhs, 0.0)
    assert u[0] == pytest.approx(c / 2, abs=1e-6)
    assert u[-1] == pytest.approx(-c / 2, abs=1e-6)
    u5 = odekit.solve_scalar(5, rhs)
    assert u5[0] == pytest.approx(c / 2, abs=1e-6)
    assert u5[-1] == pytest.approx(-c / 2, abs=1e-6)


def test_compatibility_integral_examples():
    assert odekit.compatibility_integral(1, odekit.ScalarRhs(Z, SP)) == pytest.approx(orbit.KINK_MASS, abs=1e-10)
    odd = Z * np.exp(-(Z**2))
    assert odekit.compatibility_integral(4, odekit.ScalarRhs(Z, odd)) == pytest.approx(0.0, abs=1e-12)
    assert odekit.compatibility_integral(1, odekit.ScalarRhs(Z, (1 - 2 * S) * SP)) == pytest.approx(0.0, abs=1e-12)


def test_compatibility_divergence_flagged():
    rhs = odekit.ScalarRhs(Z, np.full_like(Z, 1.0), 1.0, 1.0)
    assert not np.isfinite(odekit.compatibility_integral(4, rhs))


def test_compat_guard_raises():
    with pytest.raises(odekit.CompatibilityError, match="O1"):
        odekit.solve_scalar(1, odekit.ScalarRhs(Z, SP), 0.0)
    err = None
    try:
        odekit.solve_scalar(2, odekit.ScalarRhs(Z, S * (1 - S)), 0.0)
    except odekit.CompatibilityError as exc:
        err = exc
    assert err is not None and err.condition == "(O2)"


@pytest.mark.parametrize("n", [2, 3, 4])
def test_null_basis_counts_and_annihilation(n, rng):
    d = unit_vector(n, rng)
    basis = odekit.null_basis(d, Z)
    assert len(basis) == 1 + (n - 1) + (n - 1) + (n - 1) * (n - 2) // 2

    def worst(points):
        zg = orbit.make_zgrid(20.0, points)
        w = 0.0
        for prof in odekit.null_basis(d, zg):
            lp = odekit.apply_operator(prof, d)
            w = max(w, np.max(np.linalg.norm(lp[2:-2], axis=(-2, -1))))
        return w

    w1, w2 = worst(1001), worst(2001)
    assert np.log2(w1 / w2) >= 1.8


def test_apply_operator_constant_v5(rng):
    d = unit_vector(3, rng)
    e5 = frame.subspace_basis(5, d)[0]
    prof = np.broadcast_to(e5, (Z.size, 3, 3)).copy()
    lp = odekit.apply_operator(prof, d, Z)
    assert np.max(np.linalg.norm(lp - 2.0 * e5, axis=(-2, -1))) <= 1e-10


def test_apply_operator_discrete_self_adjoint(rng):
    d = unit_vector(3, rng)
    env1 = np.exp(-(Z**2) / 5)[:, None, None]
    env2 = np.exp(-((Z - 1) ** 2) / 7)[:, None, None]
    p = env1 * rng.standard_normal((3, 3))
    q = env2 * rng.standard_normal((3, 3))
    lp = odekit.apply_operator(p, d, Z)
    lq = odekit.apply_operator(q, d, Z)
    h = Z[1] - Z[0]
    lhs = np.sum(lp * q) * h
    rhs = np.sum(p * lq) * h
    assert lhs == pytest.approx(rhs, abs=1e-8)


def test_diagonalization_identity(rng):
    d = unit_vector(3, rng)
    bases = {i: frame.subspace_basis(i, d) for i in (1, 2, 3, 4, 5)}
    g = np.exp(-(Z**2) / 6)
    for _ in range(5):
        p = np.zeros((Z.size, 3, 3))
        for i in (1, 2, 3, 4, 5):
            for e in bases[i]:
                p += (rng.standard_normal() * g + rng.standard_normal() * S * (1 - S))[:, None, None] * e
        lp = odekit.apply_operator(p, d, Z)
        for i in (1, 2, 3, 4, 5):
            lhs = frame.project(i, lp, d)
            rhs = odekit.apply_operator(frame.project(i, p, d), d, Z)
            assert np.max(np.linalg.norm(lhs - rhs, axis=(-2, -1))) <= 1e-10


def _assembled_rhs(n, d, scale=1.0):
    bases = {i: frame.subspace_basis(i, d) for i in (1, 2, 3, 4, 5)}
    p_in = np.zeros((Z.size, n, n))
    fv = np.zeros_like(p_in)
    f_minus = np.zeros((n, n))
    f_plus = np.zeros((n, n))
    for i in (1, 2, 3, 4, 5):
        u, f = manufactured(i)
        u, f = scale * u, scale * f
        if i == 5:
            u = u + 0.2 * scale
            f = f + 2 * 0.2 * scale
        for e in bases[i]:
            p_in += u[:, None, None] * e
            fv += f[:, None, None] * e
            if i == 5:
                f_minus += 0.4 * scale * e
                f_plus += 0.4 * scale * e
    prof = orbit.make_profile(Z, fv, f_minus, f_plus)
    return odekit.MatrixRhs(prof, d), p_in, bases


def test_solve_matrix_zero_rhs(rng):
    d = unit_vector(3, rng)
    zeros = orbit.make_profile(Z, np.zeros((Z.size, 3, 3)), np.zeros((3, 3)), np.zeros((3, 3)))
    sol = odekit.solve_matrix(odekit.MatrixRhs(zeros, d))
    assert np.max(np.abs(sol.profile.samples)) <= 1e-12
    assert np.max(np.abs(sol.q_bar)) <= 1e-12


def test_solve_matrix_roundtrip(rng):
    d = unit_vector(3, rng)
    rhs, p_in, bases = _assembled_rhs(3, d)
    sol = odekit.solve_matrix(rhs)
    err = np.max(np.linalg.norm(sol.profile.samples - p_in, axis=(-2, -1)))
    assert err <= 1e-6
    # the V4 components were s(z)-shaped with jump coefficient 1 each
    assert np.linalg.norm(sol.q_bar - sum(bases[4])) <= 1e-8
    assert sol.residual_norm <= 1e-3
    # normalization conditions at the ends
    assert np.linalg.norm(frame.project(2, sol.profile.limit_plus, d)) <= 1e-10
    assert np.linalg.norm(frame.project(3, sol.profile.limit_minus, d)) <= 1e-10
    assert np.linalg.norm(frame.project(4, sol.profile.limit_minus, d)) <= 1e-10
    assert np.linalg.norm(frame.project(4, sol.profile.limit_plus, d) - sol.q_bar) <= 1e-10


def test_solve_matrix_is_linear(rng):
    d = unit_vector(3, rng)
    rhs1, _, _ = _assembled_rhs(3, d, scale=1.0)
    rhs2, _, _ = _assembled_rhs(3, d, scale=-0.3)
    sol1 = odekit.solve_matrix(rhs1)
    sol2 = odekit.solve_matrix(rhs2)
    combo = orbit.make_profile(
        Z,
        rhs1.profile.samples + rhs2.profile.samples,
        rhs1.profile.limit_minus + rhs2.profile.limit_minus,
        rhs1.profile.limit_plus + rhs2.profile.limit_plus,
    )
    sol = odekit.solve_matrix(odekit.MatrixRhs(combo, d))
    diff = sol.profile.samples - (sol1.profile.samples + sol2.profile.samples)
    assert np.max(np.linalg.norm(diff, axis=(-2, -1))) <= 1e-9


def test_solve_matrix_boundary_guard(rng):
    d = unit_vector(3, rng)
    e2 = frame.subspace_basis(2, d)[0]
    vals = S[:, None, None] * e2  # tends to e2 in V2 at +inf
    prof = orbit.make_profile(Z, vals, np.zeros((3, 3)), e2)
    with pytest.raises(odekit.CompatibilityError, match=r"\(B2\)"):
        odekit.solve_matrix(odekit.MatrixRhs(prof, d))


def test_solve_matrix_compat_guard(rng):
    d = unit_vector(3, rng)
    nn = np.outer(d, d)
    vals = SP[:, None, None] * nn  # decays, but integral against s' E1 is not 0
    prof = orbit.make_profile(Z, vals, np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(odekit.CompatibilityError, match=r"\(O1\)"):
        odekit.solve_matrix(odekit.MatrixRhs(prof, d))


def test_scalar_rhs_validation():
    with pytest.raises(ValueError, match="increasing"):
        odekit.ScalarRhs(Z[::-1], np.zeros_like(Z))
    with pytest.raises(ValueError, match="equal length"):
        odekit.ScalarRhs(Z, np.zeros(5))


def test_richardson_error_estimate():
    u, f = manufactured(2)
    _, err = odekit.solve_scalar_with_error(2, odekit.ScalarRhs(Z, f), 0.0)
    assert np.isfinite(err) and err <= 1e-6
