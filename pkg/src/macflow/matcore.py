"""Exact algebra for the matrix-valued Allen-Cahn nonlinearity.

The order parameter is a dense real n x n matrix A. The potential
F(A) = (1/4)||A^T A - I||^2 vanishes exactly on the orthogonal group,
whose two components (det = +1 / det = -1) act as the two phases.
Everything here is a pure function of its arguments; inputs are never
mutated.

All operations accept plain numpy arrays. Batched inputs with shape
(..., n, n) are supported wherever the formula is pointwise.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

#: default tolerance for algebraic identity checks
DEFAULT_TOL = 1e-10

#: |det| below this reports sign 0
DET_ZERO_TOL = 1e-12


class SymAsymSplit(NamedTuple):
    sym: np.ndarray
    asym: np.ndarray


def validate_square(a, name: str = "matrix") -> np.ndarray:
    """Coerce to float array, require shape (..., n, n) with n >= 2 and finite entries."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[-1] < 2:
        raise ValueError(f"{name} must be at least 2x2, got n={a.shape[-1]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def frobenius(a, b) -> float | np.ndarray:
    """Frobenius pairing A : B = sum_ij A_ij B_ij (batched over leading axes)."""
    a = validate_square(a, "a")
    b = validate_square(b, "b")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    out = np.sum(a * b, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def nonlinearity(a) -> np.ndarray:
    """f(A) = A A^T A - A; vanishes exactly on the orthogonal group."""
    a = validate_square(a)
    return a @ np.swapaxes(a, -2, -1) @ a - a


def double_well(a) -> float | np.ndarray:
    """F(A) = (1/4)||A^T A - I||^2, the potential whose gradient is f."""
    a = validate_square(a)
    g = np.swapaxes(a, -2, -1) @ a - np.eye(a.shape[-1])
    out = 0.25 * np.sum(g * g, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def linearization(b, a) -> np.ndarray:
    """Derivative of f at B applied to A: B B^T A + A B^T B + B A^T B - A.

    Self-adjoint in the Frobenius pairing: (H_B A) : C = A : (H_B C).
    """
    b = validate_square(b, "b")
    a = validate_square(a, "a")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {b.shape[-1]} vs {a.shape[-1]}")
    bt = np.swapaxes(b, -2, -1)
    at = np.swapaxes(a, -2, -1)
    return b @ bt @ a + a @ bt @ b + b @ at @ b - a


def trilinear(a1, a2, a3) -> np.ndarray:
    """Symmetric trilinear form behind the cubic term:

        T(A1,A2,A3) = (A1 A2^T + A2 A1^T) A3 + A3 (A1^T A2 + A2^T A1)
                      + A1 A3^T A2 + A2 A3^T A1.

    T(A1,A2,A3) : A4 is invariant under any transposition of the four
    arguments.
    """
    a1 = validate_square(a1, "a1")
    a2 = validate_square(a2, "a2")
    a3 = validate_square(a3, "a3")
    t1 = np.swapaxes(a1, -2, -1)
    t2 = np.swapaxes(a2, -2, -1)
    t3 = np.swapaxes(a3, -2, -1)
    return (
        (a1 @ t2 + a2 @ t1) @ a3
        + a3 @ (t1 @ a2 + t2 @ a1)
        + a1 @ t3 @ a2
        + a2 @ t3 @ a1
    )


def sym_asym_split(a) -> SymAsymSplit:
    """Orthogonal split A = sym + asym with sym = (A + A^T)/2."""
    a = validate_square(a)
    at = np.swapaxes(a, -2, -1)
    return SymAsymSplit(sym=0.5 * (a + at), asym=0.5 * (a - at))


def orthogonality_defect(a) -> float | np.ndarray:
    """Frobenius distance of A^T A from the identity; 0 iff A is orthogonal."""
    a = validate_square(a)
    g = np.swapaxes(a, -2, -1) @ a - np.eye(a.shape[-1])
    out = np.sqrt(np.sum(g * g, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def det_sign(a, zero_tol: float = DET_ZERO_TOL) -> int:
    """Sign of det(A) via partially pivoted LU elimination.

    Only the sign is meaningful to callers (it labels the phase), so
    |det| < zero_tol reports 0.
    """
    a = validate_square(a)
    if a.ndim != 2:
        raise ValueError("det_sign expects a single matrix")
    u = a.copy()
    n = a.shape[0]
    sign = 1.0
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(u[k:, k])))
        if p != k:
            u[[k, p]] = u[[p, k]]
            sign = -sign
        piv = u[k, k]
        if piv == 0.0:
            return 0
        u[k + 1 :] -= np.outer(u[k + 1 :, k] / piv, u[k])
    # |det| in log space to dodge overflow for larger n
    diag = np.diag(u)
    if np.any(diag == 0.0):
        return 0
    logabs = np.sum(np.log(np.abs(diag)))
    sign *= np.prod(np.sign(diag))
    if logabs < np.log(zero_tol):
        return 0
    return int(sign)
