"""Minimax solver for the source-sign problem.

The regularized action has two low points separated by an energy rim: one
near zero (once the singular term is smoothed by eps) and one far out along
any ray (the power term wins).  A discretized path between them is deformed
by descending its highest node; the surviving max localizes a critical point,
which Newton then sharpens while the regularization is driven to zero.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    CertificateError,
    ConvergenceError,
    MountainPassGeometryError,
    SolverError,
)
from .conditions import check_existence_cond, lebesgue_norm, power_norm_order
from .geometry import ScalarField
from .monotone import ORDER_SLACK, _monotone_iterate, find_sub_super
from .operator import PaneitzOperator
from .problems import (
    ABSORPTION,
    SOURCE,
    ProblemSpec,
    SolverReport,
    energy,
    residual_sup,
    smoothed_reaction,
    smoothed_reaction_derivative,
)
from .spectral_analysis import energy_norm, sobolev_constant

__all__ = ["mountain_pass_solve", "second_solution_attempt"]

PATH_NODES = 32
REPARAM_EVERY = 10


def _energy_values(op, prob, eps, values):
    grid = op.grid
    up = np.maximum(values, 0.0)
    quad = 0.5 * grid.inner(values, op.apply_values(values))
    sing = grid.integrate(prob.A.values * (eps + up**2) ** (-(prob.p - 1) / 2.0))
    power = grid.integrate(prob.B.values * up ** (prob.q + 1.0))
    return quad + sing / (prob.p - 1.0) - power / (prob.q + 1.0)


def _newton_polish(op, prob, eps, u0, tol, accept_tol=None, maxiter=80,
                   positivity=False):
    """Newton iteration on P u = smoothed RHS, dense Jacobian on small grids.

    Targets residual ``tol``; if the iteration stalls above it but at or
    below ``accept_tol`` the iterate is still accepted (Newton bottoms out at
    the roundoff floor of the operator application).  ``positivity`` forces
    line-search candidates to stay positive (used for the exact eps = 0
    equation where the reaction is singular at zero).
    """
    import scipy.sparse.linalg as spla

    grid = op.grid
    u = u0.copy()
    npts = grid.npoints
    dense = npts <= op.MAX_DENSE
    if dense:
        P = op.dense_matrix()
    accept_tol = tol if accept_tol is None else max(accept_tol, tol)
    resid = np.inf

    def give_up(msg):
        if resid <= accept_tol:
            return u, resid, it
        raise ConvergenceError(msg, residual=resid)

    for it in range(1, maxiter + 1):
        F = op.apply_values(u) - smoothed_reaction(prob, u, eps)
        resid = float(np.abs(F).max())
        if resid <= tol:
            return u, resid, it
        fp = smoothed_reaction_derivative(prob, u, eps)
        if dense:
            J = P - np.diag(fp.ravel())
            try:
                step = np.linalg.solve(J, -F.ravel()).reshape(grid.shape)
            except np.linalg.LinAlgError:
                return give_up(f"singular Jacobian at residual {resid:.3e}")
        else:
            mv = lambda x: (
                op.apply_values(x.reshape(grid.shape)) - fp * x.reshape(grid.shape)
            ).ravel()
            lin = spla.LinearOperator((npts, npts), matvec=mv)
            pre_sym = op._precond_symbol(0.0)
            minv = lambda r: np.fft.ifftn(
                np.fft.fftn(r.reshape(grid.shape)) / pre_sym
            ).real.ravel()
            M = spla.LinearOperator((npts, npts), matvec=minv)
            step, info = spla.minres(lin, -F.ravel(), rtol=1e-10, maxiter=4 * npts, M=M)
            if info != 0:
                return give_up(f"indefinite solve stalled at residual {resid:.3e}")
            step = step.reshape(grid.shape)
        s = 1.0
        accepted = False
        for _ in range(50):
            cand = u + s * step
            if positivity and float(cand.min()) <= 0.0:
                s *= 0.5
                continue
            Fc = op.apply_values(cand) - smoothed_reaction(prob, cand, eps)
            if float(np.abs(Fc).max()) < resid * (1.0 - 1e-4 * s) + 1e-300:
                u = cand
                accepted = True
                break
            s *= 0.5
        if not accepted:
            return give_up(f"polish stagnated at residual {resid:.3e}")
    return give_up(f"polish exceeded {maxiter} iterations")


def _path_max(op, prob, eps, nodes, refine=8):
    """Highest energy along the polyline trace, sampling segment interiors.

    Node-only maxima can cut the corner of a stiff ridge once descent has
    pulled the nodes down both slopes; interior samples recover the crossing
    (exactly so on a one-parameter family, where every path must pass
    through every intermediate field).
    """
    best_val = -np.inf
    best = nodes[0]
    for a, b in zip(nodes[:-1], nodes[1:]):
        for k in range(refine):
            w = k / refine
            v = (1.0 - w) * a + w * b
            val = _energy_values(op, prob, eps, v)
            if val > best_val:
                best_val, best = val, v
    val = _energy_values(op, prob, eps, nodes[-1])
    if val > best_val:
        best_val, best = val, nodes[-1]
    return float(best_val), best.copy()


def _reparametrize(op, nodes):
    """Resample the polyline at uniform energy-norm arc length."""
    segs = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        d = b - a
        segs.append(max(np.sqrt(max(op.grid.inner(d, op.apply_values(d)), 0.0)), 1e-300))
    cum = np.concatenate([[0.0], np.cumsum(segs)])
    total = cum[-1]
    targets = np.linspace(0.0, total, len(nodes))
    out = [nodes[0]]
    j = 0
    for t in targets[1:-1]:
        while cum[j + 1] < t and j < len(segs) - 1:
            j += 1
        w = (t - cum[j]) / (cum[j + 1] - cum[j])
        out.append((1.0 - w) * nodes[j] + w * nodes[j + 1])
    out.append(nodes[-1])
    return out


def _auto_eps0(op, prob, rim):
    """Regularization making the smoothed singular term at zero half the rim."""
    intA = op.grid.integrate(prob.A.values)
    floor_target = 0.5 * rim
    return (intA / ((prob.p - 1.0) * floor_target)) ** (2.0 / (prob.p - 1.0))


def mountain_pass_solve(op: PaneitzOperator, prob: ProblemSpec,
                        phi: ScalarField | None = None,
                        eps0: float | None = None,
                        eps_schedule=None,
                        require_cond: bool = True,
                        S_psi: float | None = None,
                        n_nodes: int = PATH_NODES,
                        tol_residual: float = 1e-6,
                        max_sweeps: int = 600,
                        seed: int = 0) -> SolverReport:
    """Minimax search for the source-sign problem, then Newton sharpening.

    The trial direction ``phi`` (default: constant) is normalized to unit
    energy norm.  The rim radius is
    ``r0 = ||B||_{L^s}^{-1/(q-1)} S^{-(q+1)/(2(q-1))}`` and the rim value is
    the measured-constant lower bound
    ``r0^2/2 - ||B||_{L^s} S^{-(q+1)/2} r0^{q+1}/(q+1)`` for the smooth part
    of the action on the sphere of radius r0: every path between the
    endpoints crosses that sphere, so the reported pass level provably sits
    above the rim value.  Endpoints t0 < r0 < t2 are located by scanning the
    ray for energies below the rim (they exist since the regularized energy
    at zero is finite and the ray energy eventually sinks to -inf).

    The regularization is then driven to zero along ``eps_schedule`` (default
    geometric decades from eps0 down, finishing at exactly zero) with Newton
    warm starts, while two a-priori bounds are monitored: the smoothed
    singular integral stays bounded, and the field dominates the inverse
    image of its own power term (inverse positivity keeps it from collapsing
    at the bottom).  A vanishing minimum aborts with diagnostics.

    ``require_cond=False`` lifts the certificate gate (used by threshold
    bisection, which probes couplings beyond the certified region).
    ``eps0=None`` picks the regularization so the smoothed singular term at
    zero sits at half the rim value.
    """
    if prob.mode != SOURCE:
        raise ValueError("minimax solver addresses the source mode")
    prob.validate_exponents(op.params)
    grid = op.grid
    p, q = prob.p, prob.q

    # degenerate power coefficient: the two sign modes coincide
    if float(np.abs(prob.B.values).max()) == 0.0:
        from .monotone import monotone_solve

        probA = ProblemSpec(prob.A, prob.B, p, q, mode=ABSORPTION)
        rep = monotone_solve(op, probA, find_sub_super(op, probA))
        rep.method = "mountain-pass-degenerate-absorption"
        return rep

    if phi is None:
        phi = ScalarField.constant(grid, 1.0)
    if phi.min() <= 0.0:
        raise ValueError("trial direction must be positive")
    nphi = energy_norm(op, phi)
    if nphi == 0.0:
        raise ValueError("trial direction has zero energy norm")
    phi_hat = phi.values / nphi

    if S_psi is None:
        S_psi = sobolev_constant(op, seed=seed)
    cond = check_existence_cond(op, prob, phi=phi, S_psi=S_psi)
    if require_cond and not cond.satisfied:
        raise CertificateError(
            f"existence condition fails (margin {cond.margin:.3e}); "
            "pass require_cond=False to attempt the search anyway"
        )

    s = power_norm_order(op.params, q, strict=False)
    normB = lebesgue_norm(grid, prob.B.values, s)
    r0 = normB ** (-1.0 / (q - 1.0)) * S_psi ** (-(q + 1.0) / (2.0 * (q - 1.0)))
    rim = 0.5 * r0**2 - normB * S_psi ** (-(q + 1.0) / 2.0) * r0 ** (q + 1.0) / (q + 1.0)
    if not (rim > 0.0):
        raise MountainPassGeometryError(
            f"rim value {rim:.3e} is not positive; no certified energy barrier"
        )
    if eps0 is None:
        eps0 = _auto_eps0(op, prob, rim)
    eps0 = float(eps0)

    def E(vals, eps=eps0):
        return _energy_values(op, prob, eps, vals)

    # endpoints below the rim on the ray through phi
    t0 = None
    for j in range(1, 61):
        t = r0 * 0.5**j
        if E(t * phi_hat) < rim:
            t0 = t
            break
    if t0 is None:
        raise MountainPassGeometryError(
            "no inner endpoint below the rim; smoothed singular floor "
            f"{E(0.0 * phi_hat):.3e} vs rim {rim:.3e}"
        )
    t2 = None
    for j in range(1, 61):
        t = r0 * 2.0**j
        if E(t * phi_hat) < rim:
            t2 = t
            break
    if t2 is None:
        raise MountainPassGeometryError("ray energy never sank below the rim")

    e_t0 = E(t0 * phi_hat)
    e_t2 = E(t2 * phi_hat)
    energy_at_r0 = None
    if float((r0 * phi_hat).min()) > 0.0:
        energy_at_r0 = energy(op, prob, 0.0, ScalarField(grid, r0 * phi_hat))

    # path deformation: descend the highest interior node, with the step
    # capped by half the local node spacing (uncapped descent runs away down
    # the unbounded tail for stiff exponents and shreds the path)
    nodes = [((1.0 - w) * t0 + w * t2) * phi_hat for w in np.linspace(0.0, 1.0, n_nodes)]
    energies = [E(v) for v in nodes]
    sweeps = 0
    stall = 0
    last_max = np.inf
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        i = 1 + int(np.argmax(energies[1:-1]))
        u = nodes[i]
        g = op.apply_values(u) - smoothed_reaction(prob, u, eps0)
        gnorm = float(np.sqrt(grid.inner(g, g)))
        if gnorm <= 1e-12 * max(abs(energies[i]), 1.0):
            break
        d_prev = u - nodes[i - 1]
        d_next = nodes[i + 1] - u
        spacing = min(
            np.sqrt(grid.inner(d_prev, d_prev)),
            np.sqrt(grid.inner(d_next, d_next)),
        )
        su = min(1.0, 0.5 * spacing / gnorm)
        moved = False
        for _ in range(60):
            cand = u - su * g
            ec = E(cand)
            if ec < energies[i] - 1e-16 * max(abs(energies[i]), 1.0):
                nodes[i] = cand
                energies[i] = ec
                moved = True
                break
            su *= 0.5
        if not moved:
            break
        if sweep % REPARAM_EVERY == 0:
            nodes = _reparametrize(op, nodes)
            energies = [E(v) for v in nodes]
        cur = max(energies)
        if abs(last_max - cur) <= 1e-10 * max(abs(cur), 1.0):
            stall += 1
            if stall >= 25:
                break
        else:
            stall = 0
        last_max = cur

    c_eps, u = _path_max(op, prob, eps0, nodes)

    # sharpen along the regularization schedule, ending at the exact equation
    if eps_schedule is None:
        eps_schedule = [eps0 * 10.0 ** (-k) for k in range(0, 9)] + [0.0]
    else:
        eps_schedule = [float(e) for e in eps_schedule]
    if eps_schedule[0] != eps0:
        eps_schedule = [eps0] + list(eps_schedule)

    trace = []
    newton_its = 0
    uscale = max(float(np.abs(u).max()), 1.0)
    lichnerowicz = abs((p - 1.0) - (q + 1.0)) <= 1e-12
    witness_ok, _ = op.coercivity_witness(0.0)
    for eps in eps_schedule:
        target = max(1e-3 * tol_residual, 1e-9 * uscale)
        u, resid, its = _newton_polish(
            op, prob, eps, u, target, accept_tol=tol_residual,
            positivity=(eps == 0.0),
        )
        newton_its += its
        umin = float(u.min())
        uscale = max(float(np.abs(u).max()), 1.0)
        entry = {"eps": eps, "residual": resid, "min_u": umin, "newton_iterations": its}
        up = np.maximum(u, 0.0)
        entry["singular_integral"] = grid.integrate(
            prob.A.values * (eps + up**2) ** (-(p + 1.0) / 2.0)
        )
        trace.append(entry)
        if umin <= 1e-10 * uscale:
            raise SolverError(
                "lower bound collapsed along the regularization schedule "
                f"(min u = {umin:.3e} at eps = {eps:.3e})",
                residual=resid,
            )
        if witness_ok:
            green = op.solve_shifted(
                0.0, ScalarField(grid, prob.B.values * up**q), check_coercivity=False
            )
            entry["green_lower_bound"] = green.min()
            entry["green_ok"] = bool(
                float((u - green.values).min()) >= -1e-6 * uscale
            )
        if lichnerowicz:
            nb = lebesgue_norm(grid, prob.B.values, s)
            nu = energy_norm(op, ScalarField(grid, u))
            entry["power_term_sobolev_bound"] = float(
                nb * (nu / np.sqrt(S_psi)) ** (q + 1.0)
            )

    sing0 = [t["singular_integral"] for t in trace]
    sing_bounded = max(sing0) <= 100.0 * max(sing0[0], 1e-300) + 1e-12

    final = ScalarField(grid, u)
    resid_final = residual_sup(op, prob, final)
    report = SolverReport(
        u=final,
        residual=resid_final,
        iterations=sweeps + newton_its,
        converged=bool(resid_final <= tol_residual and final.min() > 0.0),
        method="mountain-pass",
        pass_level=c_eps,
        rim_value=float(rim),
        energy_at_endpoints=(float(e_t0), float(e_t2)),
        energy_at_r0=energy_at_r0,
        energy_at_solution=energy(op, prob, 0.0, final) if final.min() > 0 else None,
        eps_trace=trace,
        extras={
            "eps0": eps0,
            "r0": float(r0),
            "t0": float(t0),
            "t2": float(t2),
            "S_psi": float(S_psi),
            "norm_B": float(normB),
            "cond_satisfied": bool(cond.satisfied),
            "cond_margin": float(cond.margin),
            "path_sweeps": sweeps,
            "pass_level_in_bracket": bool(
                rim < c_eps < (energy_at_r0 if energy_at_r0 is not None else np.inf)
            ),
            "singular_integral_bounded": bool(sing_bounded),
            "lichnerowicz_exponents": bool(lichnerowicz),
        },
    )
    if not report.converged:
        raise ConvergenceError(
            f"minimax search ended with residual {resid_final:.3e} "
            f"(target {tol_residual:.1e})",
            residual=resid_final,
        )
    return report


def second_solution_attempt(op: PaneitzOperator, prob: ProblemSpec,
                            u_B: ScalarField, eps_pert: float,
                            tol_residual: float = 1e-6,
                            distinct_tol: float = 1e-4,
                            **mp_kwargs) -> SolverReport | None:
    """Bracket the coefficient between B - eps and B + eps and iterate.

    Solutions of the perturbed problems sub/supersolve the original one, so a
    monotone iteration between them lands on another solution.  Whether the
    limit differs from ``u_B`` is recorded as a distinctness flag (no
    topological multiplicity argument is attempted).  Saddle-type solutions
    need not be ordered in the coefficient; a violated ordering is reported
    in the extras and the iteration falls back to descending from the
    supersolution alone.  Returns None when no valid iteration can be set up
    or it fails to converge.
    """
    if prob.mode != SOURCE:
        raise ValueError("second-solution bracketing addresses the source mode")
    grid = op.grid
    if eps_pert < 0.0:
        raise ValueError("perturbation must be nonnegative")
    if eps_pert == 0.0:
        return SolverReport(
            u=u_B,
            residual=residual_sup(op, prob, u_B),
            iterations=0,
            converged=True,
            method="second-solution",
            extras={"distinct": False, "ordering_ok": True,
                    "note": "degenerate perturbation: bracket collapses"},
        )
    if prob.B.min() - eps_pert < 0.0:
        raise ValueError("perturbation exceeds min(B); lower problem leaves source mode")

    try:
        lo_rep = mountain_pass_solve(op, prob.with_B(prob.B - eps_pert), **mp_kwargs)
        hi_rep = mountain_pass_solve(op, prob.with_B(prob.B + eps_pert), **mp_kwargs)
    except SolverError:
        # near the fold the upper perturbed problem has no solution and no
        # second solution can be distinguished
        return None
    u_lo, u_hi = lo_rep.u.values, hi_rep.u.values
    scale = max(float(np.abs(u_hi).max()), 1.0)
    ordering_ok = bool(float((u_hi - u_lo).min()) >= -ORDER_SLACK * scale)

    try:
        if ordering_ok:
            u, resid, its, shift, mono, conf = _monotone_iterate(
                op, prob, u_lo, u_lo, u_hi, +1, 1e-10, tol_residual, 100000,
            )
        else:
            # u_hi still supersolves; descend from it above a small constant
            # subsolution
            e = np.ones(grid.shape)
            pe = op.apply_values(e)
            s1 = 1.0
            from .problems import reaction

            for _ in range(200):
                vals = s1 * e
                if (float((reaction(prob, vals) - s1 * pe).min()) >= 0.0
                        and float((u_hi - vals).min()) >= 0.0):
                    break
                s1 *= 0.5
            else:
                return None
            u, resid, its, shift, mono, conf = _monotone_iterate(
                op, prob, u_hi, s1 * e, u_hi, -1, 1e-10, tol_residual, 100000,
            )
    except SolverError:
        return None
    if resid > tol_residual:
        return None
    field = ScalarField(grid, u)
    distinct = bool(float(np.abs(u - u_B.values).max()) > distinct_tol)
    return SolverReport(
        u=field,
        residual=resid,
        iterations=its,
        converged=True,
        method="second-solution",
        monotone_ok=mono,
        confined_ok=conf,
        shift=shift,
        extras={
            "distinct": distinct,
            "ordering_ok": ordering_ok,
            "perturbation": eps_pert,
            "gap_to_first": float(np.abs(u - u_B.values).max()),
        },
    )
