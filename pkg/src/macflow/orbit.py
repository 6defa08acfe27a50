"""Transition profiles and connecting orbits between the two phases.

The scalar kink s(z) = 1 - (1 + exp(sqrt(2) z))^{-1} solves
s'' = 2 s (1-s)(1-2s) and carries every layer construction here:

* a *minimal pair* (A-, A+) in O^-(n) x O^+(n) sits at the minimal
  Frobenius distance 2, equivalently A- = A+ (I - 2 d d^T) for a unit
  direction d;
* the *minimal connecting orbit* through a minimal pair is the straight
  segment s(z) A+ + (1-s(z)) A-, a standing-wave solution of the layer
  ODE  d_zz A = f(A);
* for endpoints that are NOT minimally paired, the *quasi-minimal orbit*
  Theta(z) = Phi(z) (I - 2 s(z) d d^T) rides a constant-speed geodesic
  Phi inside O^-(n) and solves the layer ODE up to exponentially decaying
  remainders.

Directions returned by pair detection follow one sign convention: first
component of magnitude > 1e-12 is positive (only d d^T is meaningful).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import schur
from scipy.special import expit

from .frame import canonical_sign, validate_direction
from .matcore import det_sign, orthogonality_defect, validate_square

SQRT2 = np.sqrt(2.0)

#: 1-D energy of one minimal connecting orbit, integral of 4 (s')^2
SURFACE_TENSION = 2.0 * SQRT2 / 3.0

#: integral of (s')^2 over the line
KINK_MASS = SQRT2 / 6.0

ORTHO_TOL = 1e-8
PAIR_TOL = 1e-10
CUT_LOCUS_TOL = 1e-6


class CutLocusError(ValueError):
    """Geodesic endpoints are (numerically) antipodal; the geodesic is not unique."""


def transition(z):
    """The increasing kink s(z) in (0, 1) with s(0) = 1/2."""
    return expit(SQRT2 * np.asarray(z, dtype=float))


def transition_complement(z):
    """1 - s(z) evaluated without cancellation (relative accuracy in both tails)."""
    return expit(-SQRT2 * np.asarray(z, dtype=float))


def transition_derivs(z):
    """(s, s', s'', s''') evaluated from closed forms.

    s'   = sqrt(2) s (1-s)
    s''  = 2 s (1-s) (1-2s)
    s''' = 2 (1 - 6 s (1-s)) s'

    The complement 1-s is evaluated as its own sigmoid so every value keeps
    ulp-level relative accuracy into the tails; forming 1.0 - s directly
    would cost ~4 digits at |z| = 20 and bias the weighted layer integrals.
    """
    s = transition(z)
    sm = transition_complement(z)
    sp = SQRT2 * s * sm
    spp = 2.0 * s * sm * (sm - s)
    sppp = 2.0 * (1.0 - 6.0 * s * sm) * sp
    return s, sp, spp, sppp


def make_zgrid(z_max: float = 20.0, points: int = 2001) -> np.ndarray:
    """Default truncated line: exp(-sqrt(2)*20) ~ 5e-13 sits below the algebra tolerances."""
    if z_max <= 0 or points < 3:
        raise ValueError("need z_max > 0 and at least 3 points")
    return np.linspace(-z_max, z_max, points)


@dataclass(frozen=True)
class Profile:
    """A sampled matrix path on a truncated z-grid with recorded limits.

    decay_const is the smallest C with ||samples(end) - limit|| <= C exp(-decay_rate |z_end|)
    at both truncation ends, measured at construction.
    """

    zgrid: np.ndarray
    samples: np.ndarray
    limit_minus: np.ndarray
    limit_plus: np.ndarray
    decay_rate: float = SQRT2
    decay_const: float = 0.0

    @property
    def n(self) -> int:
        return self.samples.shape[-1]

    def spacing(self) -> float:
        h = np.diff(self.zgrid)
        if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
            raise ValueError("profile grid is not uniform")
        return float(h[0])

    def to_csv(self, path) -> None:
        """Columns: z, then row-major matrix entries m00, m01, ..."""
        n = self.n
        header = "z," + ",".join(f"m{i}{j}" for i in range(n) for j in range(n))
        flat = self.samples.reshape(len(self.zgrid), n * n)
        data = np.column_stack([self.zgrid, flat])
        if hasattr(path, "write"):
            np.savetxt(path, data, delimiter=",", header=header, comments="")
        else:
            with open(path, "w") as fh:
                np.savetxt(fh, data, delimiter=",", header=header, comments="")

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def make_profile(zgrid, samples, limit_minus, limit_plus, decay_rate: float = SQRT2) -> Profile:
    zgrid = np.asarray(zgrid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    limit_minus = np.asarray(limit_minus, dtype=float)
    limit_plus = np.asarray(limit_plus, dtype=float)
    if samples.shape[0] != zgrid.size:
        raise ValueError("samples and zgrid length mismatch")
    if np.any(np.diff(zgrid) <= 0):
        raise ValueError("zgrid must be strictly increasing")
    c_minus = np.linalg.norm(samples[0] - limit_minus) * np.exp(decay_rate * abs(zgrid[0]))
    c_plus = np.linalg.norm(samples[-1] - limit_plus) * np.exp(decay_rate * abs(zgrid[-1]))
    return Profile(
        zgrid=zgrid,
        samples=samples,
        limit_minus=limit_minus,
        limit_plus=limit_plus,
        decay_rate=decay_rate,
        decay_const=float(max(c_minus, c_plus)),
    )


def _check_phase(a, want_sign: int, name: str, tol: float = ORTHO_TOL) -> np.ndarray:
    a = validate_square(a, name)
    defect = orthogonality_defect(a)
    if defect > tol:
        raise ValueError(f"{name} is not orthogonal (defect {defect:.3e} > {tol:g})")
    sign = det_sign(a)
    if sign != want_sign:
        raise ValueError(f"{name} must have det sign {want_sign:+d}, got {sign:+d}")
    return a


@dataclass(frozen=True)
class MinimalPair:
    """Endpoints at minimal distance: a_minus = a_plus (I - 2 d d^T), ||a_minus - a_plus|| = 2."""

    a_minus: np.ndarray
    a_plus: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        _check_phase(self.a_minus, -1, "a_minus")
        _check_phase(self.a_plus, +1, "a_plus")
        d = validate_direction(self.direction)
        refl = np.eye(d.size) - 2.0 * np.outer(d, d)
        if np.linalg.norm(self.a_minus - self.a_plus @ refl) > PAIR_TOL:
            raise ValueError("pair violates the reflection relation a_minus = a_plus (I - 2 d d^T)")
        dist = np.linalg.norm(self.a_minus - self.a_plus)
        if abs(dist - 2.0) > PAIR_TOL:
            raise ValueError(f"pair distance {dist!r} is not 2")

    @property
    def n(self) -> int:
        return self.a_plus.shape[0]


def pair_from_plus(a_plus, direction) -> MinimalPair:
    """Build the minimal pair below a_plus in direction d."""
    a_plus = np.asarray(a_plus, dtype=float)
    d = validate_direction(direction)
    refl = np.eye(d.size) - 2.0 * np.outer(d, d)
    return MinimalPair(a_minus=a_plus @ refl, a_plus=a_plus, direction=canonical_sign(d.copy()))


def is_minimal_pair(a_minus, a_plus, tol: float = 1e-8) -> Optional[np.ndarray]:
    """Return the pairing direction if (a_minus, a_plus) is a minimal pair, else None.

    The test: a_plus^T a_minus is symmetric with eigenvalues
    {1 (n-1 times), -1}; the -1 eigenvector is the direction.
    Inputs must be orthogonal with det signs (-1, +1); anything else is an
    error, not a None.
    """
    a_minus = _check_phase(a_minus, -1, "a_minus", tol=max(tol, ORTHO_TOL))
    a_plus = _check_phase(a_plus, +1, "a_plus", tol=max(tol, ORTHO_TOL))
    m = a_plus.T @ a_minus
    if np.linalg.norm(m - m.T) > tol:
        return None
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    if abs(w[0] + 1.0) > tol or np.max(np.abs(w[1:] - 1.0)) > tol:
        return None
    return canonical_sign(v[:, 0].copy())


class PartnerResult(NamedTuple):
    pair: MinimalPair
    degenerate: bool


def nearest_minimal_partner(a_plus, b) -> PartnerResult:
    """Minimal pair under a_plus whose det-minus member is Frobenius-closest to hint b.

    Minimizing ||a_plus (I - 2 d d^T) - b|| over unit d is maximizing
    d^T sym(a_plus^T (a_plus - b)) d, so d is the top eigenvector of that
    symmetric matrix. A tie within 1e-12 between the top two eigenvalues
    (e.g. b = a_plus) leaves the maximizer arbitrary; the result is then
    flagged degenerate.
    """
    a_plus = _check_phase(a_plus, +1, "a_plus")
    b = validate_square(b, "b")
    if b.shape != a_plus.shape:
        raise ValueError("hint matrix has mismatched shape")
    c = a_plus.T @ (a_plus - b)
    w, v = np.linalg.eigh(0.5 * (c + c.T))
    degenerate = bool(w[-1] - w[-2] < 1e-12)
    d = canonical_sign(v[:, -1].copy())
    return PartnerResult(pair=pair_from_plus(a_plus, d), degenerate=degenerate)


def minimal_orbit(pair: MinimalPair, z) -> np.ndarray:
    """The minimal connecting orbit s(z) a_plus + (1 - s(z)) a_minus.

    Solves d_zz A = f(A) exactly, with limits a_minus / a_plus at -/+ infinity.
    Batched over z.
    """
    s = transition(z)
    s = np.asarray(s)[..., None, None]
    return s * pair.a_plus + (1.0 - s) * pair.a_minus


def minimal_orbit_profile(pair: MinimalPair, zgrid) -> Profile:
    zgrid = np.asarray(zgrid, dtype=float)
    return make_profile(zgrid, minimal_orbit(pair, zgrid), pair.a_minus, pair.a_plus)


def _principal_skew_log(m: np.ndarray) -> np.ndarray:
    """Principal logarithm of a special-orthogonal matrix, as a skew matrix.

    Uses the real Schur form, which for an orthogonal matrix is block
    diagonal with 2x2 rotation blocks and 1x1 entries +-1. Eigenvalues
    within CUT_LOCUS_TOL of -1 raise CutLocusError: the principal branch
    is not defined there, and callers are expected to stay away from the
    cut locus (geodesic endpoints close to each other).
    """
    m = validate_square(m, "rotation")
    t, q = schur(m, output="real")
    n = m.shape[0]
    log_t = np.zeros_like(t)
    j = 0
    while j < n:
        if j + 1 < n and abs(t[j + 1, j]) > 1e-12:
            c = 0.5 * (t[j, j] + t[j + 1, j + 1])
            sn = 0.5 * (t[j + 1, j] - t[j, j + 1])
            # eigenvalues c +- i sn; distance^2 to -1 is (1+c)^2 + sn^2
            if (1.0 + c) ** 2 + sn**2 < CUT_LOCUS_TOL**2:
                raise CutLocusError("cut locus: rotation angle at pi")
            theta = np.arctan2(sn, c)
            log_t[j, j + 1] = -theta
            log_t[j + 1, j] = theta
            j += 2
        else:
            if t[j, j] < -1.0 + CUT_LOCUS_TOL:
                raise CutLocusError("cut locus: eigenvalue at -1")
            j += 1
    gen = q @ log_t @ q.T
    return 0.5 * (gen - gen.T)


def _rotation_family(gen: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """exp(tau * gen) for every tau, via the spectral form of the skew generator."""
    w, u = np.linalg.eigh(1j * gen)
    phases = np.exp(-1j * np.outer(taus, w))
    return np.real(np.einsum("ij,tj,kj->tik", u, phases, u.conj()))


def geodesic_det_minus(phi_minus, phi_plus, tau):
    """Constant-speed geodesic in O^-(n) from phi_minus (tau=0) to phi_plus (tau=1).

    Phi(tau) = phi_minus exp(tau log(phi_minus^T phi_plus)). Accepts scalar
    or array tau.
    """
    phi_minus = _check_phase(phi_minus, -1, "phi_minus")
    phi_plus = _check_phase(phi_plus, -1, "phi_plus")
    gen = _principal_skew_log(phi_minus.T @ phi_plus)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = phi_minus @ _rotation_family(gen, taus)
    return out[0] if np.isscalar(tau) or np.asarray(tau).ndim == 0 else out


@dataclass(frozen=True)
class QuasiOrbit:
    """Geodesic-carried layer profile between endpoints that need not pair minimally.

    phi samples the s(z)-reparameterized geodesic in O^-(n) from
    phi_minus = a_minus to phi_plus = a_plus (I - 2 d d^T); theta carries
    Theta(z) = phi(z)(I - 2 s(z) d d^T), which runs from a_minus to a_plus.
    generator is the constant skew matrix log(phi_minus^T phi_plus); its
    norm is the geodesic speed.
    """

    phi: Profile
    theta: Profile
    direction: np.ndarray
    phi_minus: np.ndarray
    phi_plus: np.ndarray
    generator: np.ndarray

    def p0(self, z=None) -> np.ndarray:
        """I - 2 s(z) d d^T on the stored grid (or at given z)."""
        zv = self.phi.zgrid if z is None else np.asarray(z, dtype=float)
        s = transition(zv)[..., None, None]
        nn = np.outer(self.direction, self.direction)
        return np.eye(self.direction.size) - 2.0 * s * nn


def quasi_orbit(a_minus, a_plus, direction, zgrid) -> QuasiOrbit:
    """Build the quasi-minimal orbit for endpoints a_minus in O^-(n), a_plus in O^+(n).

    When (a_minus, a_plus) is a minimal pair with the same direction, the
    geodesic is constant and theta degenerates to the minimal orbit.
    """
    a_minus = _check_phase(a_minus, -1, "a_minus")
    a_plus = _check_phase(a_plus, +1, "a_plus")
    d = validate_direction(direction)
    zgrid = np.asarray(zgrid, dtype=float)
    refl = np.eye(d.size) - 2.0 * np.outer(d, d)
    phi_minus = a_minus
    phi_plus = a_plus @ refl
    gen = _principal_skew_log(phi_minus.T @ phi_plus)
    s = transition(zgrid)
    phi_samples = phi_minus @ _rotation_family(gen, s)
    p0 = np.eye(d.size) - 2.0 * s[:, None, None] * np.outer(d, d)
    theta_samples = phi_samples @ p0
    phi_prof = make_profile(zgrid, phi_samples, phi_minus, phi_plus)
    theta_prof = make_profile(zgrid, theta_samples, a_minus, a_plus)
    return QuasiOrbit(
        phi=phi_prof,
        theta=theta_prof,
        direction=d,
        phi_minus=phi_minus,
        phi_plus=phi_plus,
        generator=gen,
    )
