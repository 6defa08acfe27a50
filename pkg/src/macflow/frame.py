"""Direction-anchored orthogonal splitting of n x n matrices.

A unit vector ``d`` splits the matrix space into five mutually orthogonal
pieces:

    V1 = span{ d d^T }
    V2 = { d l^T + l d^T : l . d = 0 }          (symmetric, one leg on d)
    V3 = { d l^T - l d^T : l . d = 0 }          (antisymmetric, one leg on d)
    V4 = span{ l m^T - m l^T : l, m _|_ d }     (antisymmetric, no leg on d)
    V5 = span{ l l^T, l m^T + m l^T : l, m _|_ d }

V3 + V4 is the antisymmetric part, V1 + V2 + V5 the symmetric part.
In this frame the layer-linearized operator diagonalizes into five scalar
operators -u'' + kappa_i(s) u; the kappa_i are provided here.

The frame is always anchored to a caller-supplied direction; there is no
global frame state (the direction varies along an interface). Every output
depends on the direction only through d d^T, so d and -d are equivalent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import frobenius, linearization, validate_square

DIRECTION_TOL = 1e-12


class FrameIdentityError(AssertionError):
    """A structural identity that must hold exactly was violated."""


def validate_direction(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size < 2:
        raise ValueError(f"direction must be a vector of length >= 2, got shape {d.shape}")
    if abs(np.linalg.norm(d) - 1.0) > DIRECTION_TOL:
        raise ValueError(f"direction must be a unit vector, |norm - 1| = {abs(np.linalg.norm(d) - 1.0):.3e}")
    return d


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip sign so the first component of magnitude > 1e-12 is positive."""
    for x in v:
        if abs(x) > 1e-12:
            return v if x > 0 else -v
    return v


def project(i: int, a, d) -> np.ndarray:
    """Orthogonal projection of A onto V_i (i = 1..5) for direction d.

    Batched over leading axes of ``a``.
    """
    if i not in (1, 2, 3, 4, 5):
        raise ValueError(f"subspace index must be in 1..5, got {i}")
    a = validate_square(a)
    d = validate_direction(d)
    if a.shape[-1] != d.size:
        raise ValueError(f"dimension mismatch: matrix n={a.shape[-1]}, direction n={d.size}")
    nn = np.outer(d, d)
    comp = np.eye(d.size) - nn
    at = np.swapaxes(a, -2, -1)
    if i == 1:
        w = np.sum(a * nn, axis=(-2, -1))
        return w[..., None, None] * nn
    if i == 2:
        s = a + at
        return 0.5 * (nn @ s @ comp + comp @ s @ nn)
    if i == 3:
        w = a - at
        return 0.5 * (nn @ w @ comp + comp @ w @ nn)
    if i == 4:
        return 0.5 * (comp @ (a - at) @ comp)
    return 0.5 * (comp @ (a + at) @ comp)


@dataclass(frozen=True)
class FrameDecomposition:
    """The five projections of a matrix, summing back to it exactly."""

    parts: tuple
    direction: np.ndarray

    def total(self) -> np.ndarray:
        return sum(self.parts)

    def __getitem__(self, i: int) -> np.ndarray:
        if i not in (1, 2, 3, 4, 5):
            raise IndexError("subspace index must be in 1..5")
        return self.parts[i - 1]


def decompose(a, d) -> FrameDecomposition:
    a = validate_square(a)
    d = validate_direction(d)
    parts = tuple(project(i, a, d) for i in (1, 2, 3, 4, 5))
    return FrameDecomposition(parts=parts, direction=d)


def kappa(i: int, s):
    """Scalar potential of the i-th diagonalized layer operator -d_zz + kappa_i(s)."""
    s = np.asarray(s, dtype=float)
    if i == 1:
        out = 2.0 * (1.0 - 6.0 * s + 6.0 * s * s)
    elif i == 2:
        out = 2.0 * (1.0 - s) * (1.0 - 2.0 * s)
    elif i == 3:
        out = 2.0 * s * (2.0 * s - 1.0)
    elif i == 4:
        out = np.zeros_like(s)
    elif i == 5:
        out = np.full_like(s, 2.0)
    else:
        raise ValueError(f"subspace index must be in 1..5, got {i}")
    return float(out) if out.ndim == 0 else out


def subspace_dims(n: int) -> tuple:
    return (1, n - 1, n - 1, (n - 1) * (n - 2) // 2, n * (n - 1) // 2)


def complement_basis(d) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane orthogonal to d.

    Columns of the returned (n, n-1) array. Built from the Householder
    reflection exchanging e_1 and d, so the output is reproducible.
    """
    d = validate_direction(d)
    n = d.size
    e1 = np.zeros(n)
    e1[0] = 1.0
    v = e1 - d
    if np.linalg.norm(v) < 1e-14:
        q = np.eye(n)
    else:
        q = np.eye(n) - 2.0 * np.outer(v, v) / np.dot(v, v)
    return q[:, 1:]


def subspace_basis(i: int, d) -> list:
    """Orthonormal (Frobenius) basis of V_i for direction d, as a list of matrices."""
    d = validate_direction(d)
    ls = complement_basis(d).T
    r2 = np.sqrt(2.0)
    if i == 1:
        return [np.outer(d, d)]
    if i == 2:
        return [(np.outer(d, l) + np.outer(l, d)) / r2 for l in ls]
    if i == 3:
        return [(np.outer(d, l) - np.outer(l, d)) / r2 for l in ls]
    if i == 4:
        return [
            (np.outer(ls[a], ls[b]) - np.outer(ls[b], ls[a])) / r2
            for a in range(len(ls))
            for b in range(a + 1, len(ls))
        ]
    if i == 5:
        basis = [np.outer(l, l) for l in ls]
        basis += [
            (np.outer(ls[a], ls[b]) + np.outer(ls[b], ls[a])) / r2
            for a in range(len(ls))
            for b in range(a + 1, len(ls))
        ]
        return basis
    raise ValueError(f"subspace index must be in 1..5, got {i}")


def reflection_conjugation_residuals(a, d) -> tuple:
    """Residual norms of the three reflection/projection commutation identities.

    With R = I - 2 d d^T:
        R P2(A) = -P3(A R),   R P3(A) = -P2(A R),
        P4(R A) = R P4(A) = P4(A).
    Equivalently, with the reflection applied on the left inside the
    projector the signs turn positive: R P2(A) = +P3(R A). All three
    identities vanish exactly; the returned norms measure floating-point
    noise only (batched input reduces to the worst sample).
    """
    a = validate_square(a)
    d = validate_direction(d)
    refl = np.eye(d.size) - 2.0 * np.outer(d, d)
    ar = a @ refl
    r1 = np.max(np.linalg.norm(refl @ project(2, a, d) + project(3, ar, d), axis=(-2, -1)))
    r2 = np.max(np.linalg.norm(refl @ project(3, a, d) + project(2, ar, d), axis=(-2, -1)))
    p4 = project(4, a, d)
    r3 = max(
        np.max(np.linalg.norm(project(4, refl @ a, d) - p4, axis=(-2, -1))),
        np.max(np.linalg.norm(refl @ p4 - p4, axis=(-2, -1))),
    )
    return (float(r1), float(r2), float(r3))


def bulk_quadratic_form(s: float, b, d, tol: float = 1e-10) -> float:
    """Quadratic form of the linearization at I - 2 s d d^T, evaluated two ways.

    Returns (H_{P0} B) : B and checks it against the diagonalized expression
    sum_i kappa_i(s) ||P_i B||^2; disagreement beyond tol raises, since the
    two are equal as an exact identity.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"profile value s must lie in [0, 1], got {s}")
    b = validate_square(b)
    d = validate_direction(d)
    p0 = np.eye(d.size) - 2.0 * s * np.outer(d, d)
    value = frobenius(linearization(p0, b), b)
    diag = sum(kappa(i, s) * frobenius(project(i, b, d), project(i, b, d)) for i in (1, 2, 3, 4, 5))
    scale = max(1.0, float(np.sum(b * b)))
    if abs(value - diag) > tol * scale:
        raise FrameIdentityError(
            f"quadratic-form diagonalization violated: direct={value!r} decomposed={diag!r}"
        )
    return float(value)
