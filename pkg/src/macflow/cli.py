"""Command line entry point: orbit / odekit / spectra / simulate / verify-all.

Every verification row is self-describing: an id, the measured value, the
threshold it is compared against, and the verdict. Randomized sweeps take
an explicit seed (default 0) so reports are byte-identical across runs.

Exit codes: 0 all checks pass, 1 check failures or simulation blow-up,
2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.metadata import version as _pkg_version

import numpy as np

from . import frame, matcore, odekit, orbit, sim, spectra

CHECK_REGISTRY = [
    ("pair-distance", "random minimal pairs sit at Frobenius distance 2 (tol 1e-10)"),
    ("pair-direction", "pair detection recovers the pairing direction (tol 1e-10)"),
    ("transition-reflection", "s(z) + s(-z) = 1 on the sampled grid (tol 1e-12)"),
    ("orbit-ode-order", "minimal-orbit ODE residual decays at order >= 1.9 under refinement"),
    ("orbit-energy", "1-D layer energy equals 2 sqrt(2)/3 (tol 1e-6)"),
    ("quasi-residual-order", "quasi-orbit residual identity holds at order >= 1.9"),
    ("conjugation-order", "geodesic-conjugated linearization identity at order >= 1.9"),
    ("ode-closed-form-*", "kernel-datum solutions of the five scalar operators (tol 1e-8)"),
    ("ode-compat-guard", "incompatible forcing is rejected with the weighted integral named"),
    ("ode-roundtrip", "matrix solve recovers manufactured solutions modulo the kernel (tol 1e-6)"),
    ("ode-diagonalization", "projections commute with the discrete layer operator (tol 1e-10)"),
    ("ode-null-annihilation", "kernel profiles are annihilated to discretization error (tol 1e-3)"),
    ("eig-ground-L1", "lowest eigenvalue of the first interval operator is below exp(-1/eps)"),
    ("eig-floor-L2/L3", "lowest eigenvalues of operators 2 and 3 stay above -1e-3"),
    ("eig-gap-stability-L1", "second eigenvalue of operator 1 times eps^2, stable within 1.25x"),
    ("coercivity-L1/L2/L3", "layer coercivity with nu0 = 0.25, measured constant capped"),
    ("gap-L1out", "orthogonal-complement gap of operator 1, measured constant above floor"),
    ("sup-control-L2..L5", "sup-norm control by the quadratic form plus mass"),
    ("endpoint-L1", "endpoint values controlled by eps times form plus mass"),
    ("product-P23/P34/P24/P12/P13", "singular-weight product estimates, measured constant capped"),
    ("cancellation", "kernel-span trilinear integrals vanish (tol 1e-8)"),
    ("bilinear-identity", "closed form of the frame-split trilinear quadratic form (tol 1e-10)"),
    ("sim-*", "simulation diagnostics (run via the simulate subcommand)"),
]


def _row(check_id: str, value: float, threshold: float, passed: bool) -> dict:
    return {"id": check_id, "value": float(value), "threshold": float(threshold), "pass": bool(passed)}


def _print_rows(rows, stream=None) -> bool:
    stream = stream if stream is not None else sys.stdout
    ok = True
    for r in rows:
        ok &= r["pass"]
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['id']:<28} value={r['value']:.6e} threshold={r['threshold']:.6e}", file=stream)
    return ok


def random_orthogonal(n: int, rng, det_sign_wanted: int = +1) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if matcore.det_sign(q) != det_sign_wanted:
        q[:, 0] = -q[:, 0]
    return q


def _fd_order(residual_fn, grids) -> float:
    """Least-squares convergence order of a residual over a grid family."""
    res = np.array([residual_fn(g) for g in grids])
    hs = 1.0 / (np.asarray(grids, dtype=float) - 1.0)
    return float(np.polyfit(np.log(hs), np.log(res), 1)[0])


def _d2(samples: np.ndarray, h: float) -> np.ndarray:
    return (samples[2:] - 2 * samples[1:-1] + samples[:-2]) / h**2


def orbit_checks(n: int, seed: int, z_max: float = 20.0, points: int = 2001) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    zgrid = orbit.make_zgrid(z_max, points)

    s = orbit.transition(zgrid)
    rows.append(_row("transition-reflection", float(np.max(np.abs(s + s[::-1] - 1.0))), 1e-12, np.max(np.abs(s + s[::-1] - 1.0)) <= 1e-12))

    worst_d = 0.0
    worst_dir = 0.0
    for _ in range(10):
        a_plus = random_orthogonal(n, rng, +1)
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        pair = orbit.pair_from_plus(a_plus, d)
        worst_d = max(worst_d, abs(np.linalg.norm(pair.a_minus - pair.a_plus) - 2.0))
        found = orbit.is_minimal_pair(pair.a_minus, pair.a_plus)
        worst_dir = max(worst_dir, float(np.linalg.norm(np.outer(found, found) - np.outer(d, d))))
    rows.append(_row("pair-distance", worst_d, 1e-10, worst_d <= 1e-10))
    rows.append(_row("pair-direction", worst_dir, 1e-10, worst_dir <= 1e-10))

    pair = orbit.pair_from_plus(random_orthogonal(n, rng, +1), _unit(rng, n))

    def ode_residual(points_):
        zg = orbit.make_zgrid(12.0, points_)
        th = orbit.minimal_orbit(pair, zg)
        h = zg[1] - zg[0]
        res = _d2(th, h) - matcore.nonlinearity(th[1:-1])
        return float(np.max(np.linalg.norm(res, axis=(-2, -1))))

    order = _fd_order(ode_residual, [501, 1001, 2001])
    rows.append(_row("orbit-ode-order", order, 1.9, order >= 1.9))

    dtheta = orbit.transition_derivs(zgrid)[1][:, None, None] * (pair.a_plus - pair.a_minus)
    th = orbit.minimal_orbit(pair, zgrid)
    dens = 0.5 * np.sum(dtheta * dtheta, axis=(-2, -1)) + np.asarray(matcore.double_well(th))
    energy = float(np.trapezoid(dens, zgrid))
    rows.append(_row("orbit-energy", abs(energy - orbit.SURFACE_TENSION), 1e-6, abs(energy - orbit.SURFACE_TENSION) <= 1e-6))

    # quasi-orbit with genuinely non-minimal endpoints
    a_plus = random_orthogonal(n, rng, +1)
    d = _unit(rng, n)
    a_minus = orbit.pair_from_plus(a_plus, d).a_minus @ _small_rotation(n, rng, 0.4)

    def quasi_residual(points_):
        zg = orbit.make_zgrid(12.0, points_)
        q = orbit.quasi_orbit(a_minus, a_plus, d, zg)
        h = zg[1] - zg[0]
        p0 = q.p0()
        lhs = _d2(q.theta.samples, h) - matcore.nonlinearity(q.theta.samples[1:-1])
        rhs = _d2(q.phi.samples, h) @ p0[1:-1] + 2.0 * _center_d1(q.phi.samples, h) @ _center_d1(p0, h)
        return float(np.max(np.linalg.norm(lhs - rhs, axis=(-2, -1))))

    order = _fd_order(quasi_residual, [501, 1001, 2001])
    rows.append(_row("quasi-residual-order", order, 1.9, order >= 1.9))

    const_a = _random_const_matrix(n, rng)
    const_b = _random_const_matrix(n, rng)

    def conj_residual(points_):
        zg = orbit.make_zgrid(12.0, points_)
        q = orbit.quasi_orbit(a_minus, a_plus, d, zg)
        h = zg[1] - zg[0]
        s_ = orbit.transition(zg)
        env = (s_ * (1 - s_))[:, None, None]
        p = env * const_a + np.exp(-(zg**2) / 8.0)[:, None, None] * const_b
        a = q.phi.samples @ p
        la = _apply_linearized(a, q.theta.samples, h)
        lp = _apply_linearized(p, q.p0(), h)
        rhs = q.phi.samples[1:-1] @ lp - _d2(q.phi.samples, h) @ p[1:-1] - 2.0 * _center_d1(q.phi.samples, h) @ _center_d1(p, h)
        return float(np.max(np.linalg.norm(la - rhs, axis=(-2, -1))))

    order = _fd_order(conj_residual, [501, 1001, 2001])
    rows.append(_row("conjugation-order", order, 1.9, order >= 1.9))
    return rows


def _unit(rng, n):
    d = rng.standard_normal(n)
    return d / np.linalg.norm(d)


def _random_const_matrix(n, rng):
    return rng.standard_normal((n, n))


def _small_rotation(n: int, rng, angle: float) -> np.ndarray:
    from scipy.linalg import expm

    w = rng.standard_normal((n, n))
    w = (w - w.T) / 2.0
    w *= angle / max(np.linalg.norm(w), 1e-12)
    return expm(w)


def _center_d1(samples: np.ndarray, h: float) -> np.ndarray:
    return (samples[2:] - samples[:-2]) / (2.0 * h)


def _apply_linearized(a: np.ndarray, around: np.ndarray, h: float) -> np.ndarray:
    interior = slice(1, -1)
    return -_d2(a, h) + matcore.linearization(around[interior], a[interior])


def odekit_checks(n: int, seed: int, z_max: float = 20.0, points: int = 2001) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    zgrid = orbit.make_zgrid(z_max, points)
    s, sp, spp, _ = orbit.transition_derivs(zgrid)
    zero = odekit.ScalarRhs(zgrid, np.zeros_like(zgrid))

    cases = [
        ("ode-closed-form-1", odekit.solve_scalar(1, zero, 1.0), sp / (np.sqrt(2) / 4.0)),
        ("ode-closed-form-2", odekit.solve_scalar(2, zero, 0.7), 0.7 * s),
        ("ode-closed-form-3", odekit.solve_scalar(3, zero, -0.4), -0.4 * (1.0 - s)),
        ("ode-closed-form-4", odekit.solve_scalar(4, zero, 2.0), np.full_like(zgrid, 2.0)),
        ("ode-closed-form-5", odekit.solve_scalar(5, odekit.ScalarRhs(zgrid, np.full_like(zgrid, 3.0), 3.0, 3.0)), np.full_like(zgrid, 1.5)),
    ]
    for cid, got, want in cases:
        err = float(np.max(np.abs(got - want)))
        rows.append(_row(cid, err, 1e-8, err <= 1e-8))

    try:
        odekit.solve_scalar(1, odekit.ScalarRhs(zgrid, sp), 0.0)
        rows.append(_row("ode-compat-guard", 0.0, 1.0, False))
    except odekit.CompatibilityError as exc:
        ok = "(O1)" in str(exc) and abs(exc.value - orbit.KINK_MASS) < 1e-6
        rows.append(_row("ode-compat-guard", exc.value, 1e-8, ok))

    d = _unit(rng, n)
    bases = {i: frame.subspace_basis(i, d) for i in (1, 2, 3, 4, 5)}
    kap = {i: np.asarray(frame.kappa(i, s)) for i in (1, 2, 3, 4, 5)}
    u23 = s * (1 - s)
    u23pp = spp * (1 - 2 * s) - 2 * sp**2
    comps = {
        1: (spp, 2 * (-6 + 12 * s) * sp * sp + kap[1] * spp),
        2: (u23, u23pp),
        3: (u23, u23pp),
        4: (s, spp),
        5: (u23 + 0.2, u23pp),
    }
    p_in = np.zeros((zgrid.size, n, n))
    fvals = np.zeros_like(p_in)
    f_minus = np.zeros((n, n))
    f_plus = np.zeros((n, n))
    for i, (u, upp) in comps.items():
        f = -upp + kap[i] * u
        for e in bases[i]:
            p_in += u[:, None, None] * e
            fvals += f[:, None, None] * e
            if i == 5:
                f_minus += 0.4 * e
                f_plus += 0.4 * e
    sol = odekit.solve_matrix(odekit.MatrixRhs(orbit.make_profile(zgrid, fvals, f_minus, f_plus), d))
    err = float(np.max(np.linalg.norm(sol.profile.samples - p_in, axis=(-2, -1))))
    qerr = float(np.linalg.norm(sol.q_bar - sum(bases[4])))
    rows.append(_row("ode-roundtrip", max(err, qerr), 1e-6, max(err, qerr) <= 1e-6))
    for cond in ("B1", "B2", "B3", "B4"):
        rows.append(_row(f"ode-boundary-{cond}", sol.checks[cond], 1e-6, sol.checks[cond] <= 1e-6))
    for cond in ("O1", "O2", "O3", "O4"):
        rows.append(_row(f"ode-orthogonality-{cond}", sol.checks[cond], odekit.COMPAT_TOL, sol.checks[cond] <= odekit.COMPAT_TOL))

    g = np.exp(-(zgrid**2) / 6.0)
    p = np.zeros((zgrid.size, n, n))
    for i in (1, 2, 3, 4, 5):
        for e in bases[i]:
            p += (rng.standard_normal() * g + rng.standard_normal() * u23)[:, None, None] * e
    lp = odekit.apply_operator(p, d, zgrid)
    worst = 0.0
    for i in (1, 2, 3, 4, 5):
        lhs = frame.project(i, lp, d)
        rhs = odekit.apply_operator(frame.project(i, p, d), d, zgrid)
        worst = max(worst, float(np.max(np.linalg.norm(lhs - rhs, axis=(-2, -1)))))
    rows.append(_row("ode-diagonalization", worst, 1e-10, worst <= 1e-10))

    worst = 0.0
    for prof in odekit.null_basis(d, zgrid):
        lp = odekit.apply_operator(prof, d)
        worst = max(worst, float(np.max(np.linalg.norm(lp[2:-2], axis=(-2, -1)))))
    rows.append(_row("ode-null-annihilation", worst, 1e-3, worst <= 1e-3))
    return rows


def cancellation_checks(n: int, seed: int, trials: int = 20, z_max: float = 20.0, points: int = 2001) -> list:
    rng = np.random.default_rng(seed)
    zgrid = orbit.make_zgrid(z_max, points)
    rows = []
    worst = 0.0
    d = _unit(rng, n)
    dims = frame.subspace_dims(n)
    try:
        for _ in range(trials):
            qs = [
                spectra.null_span_element(d, zgrid, {i: rng.standard_normal(dims[i - 1]) for i in (1, 2, 3, 4)})
                for _ in range(3)
            ]
            worst = max(worst, abs(spectra.cubic_null_cancellation(d, *qs, zgrid)))
        rows.append(_row(f"cancellation-n{n}", worst, 1e-8, True))
    except spectra.CancellationError:
        rows.append(_row(f"cancellation-n{n}", worst, 1e-8, False))

    worst = 0.0
    for _ in range(trials):
        es = {i: _rand_in_subspace(i, d, rng) for i in (2, 3, 4)}
        bs = {i: _rand_in_subspace(i, d, rng) for i in (1, 2, 3, 4)}
        res = spectra.bilinear_identity_residual(d, es[2], es[3], es[4], bs[1], bs[2], bs[3], bs[4], rng.uniform())
        worst = max(worst, res)
    rows.append(_row(f"bilinear-identity-n{n}", worst, 1e-10, worst <= 1e-10))
    return rows


def _rand_in_subspace(i: int, d, rng):
    basis = frame.subspace_basis(i, d)
    if not basis:
        return np.zeros((d.size, d.size))
    return sum(c * e for c, e in zip(rng.standard_normal(len(basis)), basis))


def spectra_report(op_index: int, eps: float, grid_n: int | None, seed: int) -> spectra.SpectralReport:
    return spectra.run_operator_suite(op_index, eps, grid_n, seed=seed)


def verify_all(n: int, eps: float, seed: int) -> dict:
    rows = []
    rows += orbit_checks(n, seed)
    rows += odekit_checks(n, seed)
    rows += cancellation_checks(n, seed)
    spec_checks = []
    eigenvalues = {}
    for idx in (1, 2, 3, 4, 5):
        rep = spectra.run_operator_suite(idx, eps, seed=seed)
        eigenvalues[str(idx)] = rep.eigenvalues
        spec_checks.extend(rep.checks)
    sweep = sorted({min(2 * eps, 0.1), eps, max(eps / 2, 0.02)}, reverse=True)
    gap_rows, gap_vals = spectra.gap_stability_rows(sweep)
    spec_checks.extend(gap_rows)
    rows += [
        _row(c.lemma, c.measured, c.threshold, c.passed) for c in spec_checks
    ]
    return {
        "n": n,
        "eps": eps,
        "seed": seed,
        "eigenvalues": eigenvalues,
        "gap_values": [float(v) for v in gap_vals],
        "checks": rows,
    }


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macflow", description=__doc__)
    parser.add_argument("--version", action="version", version=_version_string())
    parser.add_argument("--list-checks", action="store_true", help="print the check registry and exit")
    sub = parser.add_subparsers(dest="verb")

    p_orbit = sub.add_parser("orbit", help="connecting-orbit verification suite")
    p_orbit.add_argument("--n", type=int, default=3)
    p_orbit.add_argument("--seed", type=int, default=0)
    p_orbit.add_argument("--z-max", type=float, default=20.0)
    p_orbit.add_argument("--points", type=int, default=2001)
    p_orbit.add_argument("--csv", help="export the sampled minimal orbit as CSV")
    p_orbit.add_argument("--report", help="write the check rows as JSON")

    p_ode = sub.add_parser("odekit", help="layer ODE solver verification suite")
    p_ode.add_argument("--n", type=int, default=3)
    p_ode.add_argument("--seed", type=int, default=0)
    p_ode.add_argument("--z-max", type=float, default=20.0)
    p_ode.add_argument("--points", type=int, default=2001)
    p_ode.add_argument("--report")

    p_spec = sub.add_parser("spectra", help="interval-operator spectral checks")
    p_spec.add_argument("--op", type=int, required=True, choices=(1, 2, 3, 4, 5))
    p_spec.add_argument("--eps", type=float, required=True)
    p_spec.add_argument("--grid", type=int, help="number of grid points on [-1, 1]")
    p_spec.add_argument("--seed", type=int, default=0)
    p_spec.add_argument("--report", help="write {eigenvalues, checks} JSON")

    p_sim = sub.add_parser("simulate", help="run the periodic-grid evolution")
    p_sim.add_argument("--config", required=True)

    p_all = sub.add_parser("verify-all", help="run orbit, odekit, cancellation and spectra suites")
    p_all.add_argument("--n", type=int, default=3)
    p_all.add_argument("--eps", type=float, default=0.05)
    p_all.add_argument("--seed", type=int, default=0)
    p_all.add_argument("--report")
    return parser


def _version_string() -> str:
    try:
        return f"macflow {_pkg_version('macflow')}"
    except Exception:
        return "macflow (unpackaged)"


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_checks:
        for cid, desc in CHECK_REGISTRY:
            print(f"{cid:<32} {desc}")
        return 0
    if args.verb is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.verb == "orbit":
            rows = orbit_checks(args.n, args.seed, args.z_max, args.points)
            if args.csv:
                rng = np.random.default_rng(args.seed)
                pair = orbit.pair_from_plus(random_orthogonal(args.n, rng, +1), _unit(rng, args.n))
                orbit.minimal_orbit_profile(pair, orbit.make_zgrid(args.z_max, args.points)).to_csv(args.csv)
            if args.report:
                _write_json({"checks": rows, "seed": args.seed, "n": args.n}, args.report)
            return 0 if _print_rows(rows) else 1

        if args.verb == "odekit":
            rows = odekit_checks(args.n, args.seed, args.z_max, args.points)
            if args.report:
                _write_json({"checks": rows, "seed": args.seed, "n": args.n}, args.report)
            return 0 if _print_rows(rows) else 1

        if args.verb == "spectra":
            rep = spectra_report(args.op, args.eps, args.grid, args.seed)
            if args.report:
                _write_json(rep.to_dict(), args.report)
            rows = [_row(c.lemma, c.measured, c.threshold, c.passed) for c in rep.checks]
            print("eigenvalues:", " ".join(f"{w:.6e}" for w in rep.eigenvalues))
            return 0 if _print_rows(rows) else 1

        if args.verb == "simulate":
            cfg = sim.parse_config(args.config)
            try:
                records, _ = sim.run(cfg)
            except sim.SimulationError as exc:
                print(f"simulation failed: {exc}", file=sys.stderr)
                return 1
            last = records[-1]
            print(f"steps recorded: {len(records)}, final t = {last.time:g}, energy = {last.energy:.6g}")
            if np.isfinite(last.radius_estimate):
                print(f"radius estimate: {last.radius_estimate:.6g}")
            slack = sim.energy_monotonicity_slack(records)
            print(f"energy monotonicity slack: {slack:.3e}")
            return 0

        if args.verb == "verify-all":
            payload = verify_all(args.n, args.eps, args.seed)
            if args.report:
                _write_json(payload, args.report)
            return 0 if _print_rows(payload["checks"]) else 1
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.print_usage(sys.stderr)
    return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
