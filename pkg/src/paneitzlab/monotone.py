"""Sub/supersolution search, order-preserving shift, and the monotone
steady-state iteration, plus the continuation in the power-term coefficient
used when B is only nonnegative."""

from __future__ import annotations

import numpy as np

from .errors import BracketError, ConvergenceError, SolverError
from .geometry import ScalarField
from .operator import PaneitzOperator
from .problems import (
    ABSORPTION,
    SOURCE,
    Bracket,
    ProblemSpec,
    SolverReport,
    reaction,
    residual_sup,
)

__all__ = [
    "find_sub_super",
    "verify_bracket",
    "lipschitz_shift",
    "monotone_solve",
    "epsilon_continuation",
]

# pointwise slack for order comparisons, relative to the field scale
ORDER_SLACK = 1e-12


def _sub_margin(op, prob, s, e_vals, pe_vals):
    """min over x of f(x, s*e) - P(s*e); >= 0 means subsolution."""
    u = s * e_vals
    return float((reaction(prob, u) - s * pe_vals).min())


def _super_margin(op, prob, s, e_vals, pe_vals):
    """min over x of P(s*e) - f(x, s*e); >= 0 means supersolution."""
    u = s * e_vals
    return float((s * pe_vals - reaction(prob, u)).min())


def find_sub_super(op: PaneitzOperator, prob: ProblemSpec,
                   e: ScalarField | None = None,
                   max_halvings: int = 200,
                   max_doublings: int = 200) -> Bracket:
    """Scale a cone element into a sub/supersolution pair.

    Starting from s = 1, the subsolution scale s1 is halved until
    ``P(s1 e) <= f(x, s1 e)`` holds everywhere (the singular term always wins
    for small scales), and the supersolution scale s2 is doubled until the
    reversed inequality holds.  In absorption mode the doubling terminates
    whenever B > 0 where the potential is nonpositive; a pure B = 0 problem
    with the potential dipping nonpositive has no constant supersolution and
    is reported as such.
    """
    if e is None:
        e = ScalarField.constant(op.grid, 1.0)
    if e.min() <= 0.0:
        raise ValueError("cone element must be positive")
    e_vals = e.values
    pe_vals = op.apply_values(e_vals)

    s1 = 1.0
    for _ in range(max_halvings + 1):
        if _sub_margin(op, prob, s1, e_vals, pe_vals) >= 0.0:
            break
        s1 *= 0.5
    else:
        raise BracketError(
            f"no subsolution scale found down to {s1}; "
            "singular coefficient may be degenerate"
        )

    s2 = 1.0
    for _ in range(max_doublings + 1):
        if _super_margin(op, prob, s2, e_vals, pe_vals) >= 0.0:
            break
        s2 *= 2.0
    else:
        hint = ""
        if prob.mode == ABSORPTION and prob.B.min() <= 0.0 and op.W.min() <= 0.0:
            hint = " (B vanishes where the potential is nonpositive)"
        if prob.mode == SOURCE:
            hint = " (source mode: constant supersolutions exist only below the fold)"
        raise BracketError(f"no supersolution scale found up to {s2}{hint}")

    s2 = max(s2, s1)
    return Bracket(s1=s1, s2=s2, e=e)


def verify_bracket(op: PaneitzOperator, prob: ProblemSpec, bracket: Bracket,
                   slack: float = 0.0) -> tuple[bool, bool]:
    """Pointwise check of the defining inequalities, with optional slack."""
    e_vals = bracket.e.values
    pe_vals = op.apply_values(e_vals)
    sub_ok = _sub_margin(op, prob, bracket.s1, e_vals, pe_vals) >= -slack
    super_ok = _super_margin(op, prob, bracket.s2, e_vals, pe_vals) >= -slack
    return bool(sub_ok), bool(super_ok)


def lipschitz_bound(p: float, q: float, a_max: float, b_max: float,
                    delta: float, M: float) -> float:
    """p * a_max / delta^(p+1) + q * b_max * M^(q-1), the slope bound behind
    the order-preserving shift."""
    if not (0.0 < delta <= M):
        raise ValueError(f"need 0 < delta <= M, got ({delta}, {M})")
    return p * a_max / delta ** (p + 1.0) + q * b_max * M ** (q - 1.0)


def lipschitz_shift(prob: ProblemSpec, delta: float, M: float) -> float:
    """Bound on -df/du over scales [delta, M]; f + shift*I is then monotone."""
    return lipschitz_bound(
        prob.p, prob.q, prob.A.max(), float(np.abs(prob.B.values).max()), delta, M
    )


def _monotone_iterate(op, prob, start_vals, lower_vals, upper_vals,
                      direction, tol_step, tol_residual, maxiter,
                      linear_tol=1e-12):
    """Core shifted-fixed-point loop between explicit order bounds.

    direction +1 iterates upward from a subsolution, -1 downward from a
    supersolution.  Monotonicity and confinement are asserted every step and
    a violation aborts with diagnostics: it signals the discrete solve broke
    the order structure the argument relies on.
    """
    grid = op.grid
    scale = max(float(np.abs(upper_vals).max()), 1.0)
    slack = ORDER_SLACK * scale
    u = start_vals.copy()
    monotone_ok = True
    confined_ok = True
    shift = None
    step = np.inf
    resid = np.inf
    for it in range(1, maxiter + 1):
        delta = max(float(u.min() if direction > 0 else lower_vals.min()), 1e-300)
        M = float(upper_vals.max() if direction > 0 else u.max())
        shift = lipschitz_shift(prob, delta, M)
        rhs = reaction(prob, u) + shift * u
        unew = op.solve_shifted(
            shift, ScalarField(grid, rhs), tol=linear_tol,
            x0=ScalarField(grid, u),
        ).values
        if direction > 0:
            if float((unew - u).min()) < -slack:
                monotone_ok = False
        else:
            if float((u - unew).min()) < -slack:
                monotone_ok = False
        if (float((unew - lower_vals).min()) < -slack
                or float((upper_vals - unew).min()) < -slack):
            confined_ok = False
        if not (monotone_ok and confined_ok):
            raise SolverError(
                "monotone iteration broke the order structure at step "
                f"{it} (monotone_ok={monotone_ok}, confined_ok={confined_ok}); "
                "the discrete solve violated inverse positivity"
            )
        step = float(np.abs(unew - u).max())
        u = unew
        resid = float(np.abs(op.apply_values(u) - reaction(prob, u)).max())
        if step <= tol_step and resid <= tol_residual:
            return u, resid, it, shift, monotone_ok, confined_ok
    raise ConvergenceError(
        f"monotone iteration stalled after {maxiter} steps "
        f"(step {step:.3e}, residual {resid:.3e})",
        residual=resid,
    )


def monotone_solve(op: PaneitzOperator, prob: ProblemSpec, bracket: Bracket,
                   start: str = "sub", tol_step: float = 1e-10,
                   tol_residual: float = 1e-8, maxiter: int = 100000,
                   check_bracket: bool = True) -> SolverReport:
    """Monotone fixed-point iteration inside a sub/supersolution bracket.

    Iterates ``u_{k+1} = (P + shift)^{-1}(f(u_k) + shift*u_k)`` starting from
    the subsolution (``start='sub'``, nondecreasing iterates) or from the
    supersolution (``start='super'``, nonincreasing).  The shift is
    recomputed each step from the current sub-bracket, which keeps it as
    small as the order argument allows and speeds convergence.  Stops once
    the sup-norm step is below ``tol_step`` and the equation residual below
    ``tol_residual``.
    """
    prob.validate_exponents(op.params)
    if check_bracket:
        scale = max(prob.A.max(), abs(op.params.beta), 1.0)
        sub_ok, super_ok = verify_bracket(op, prob, bracket, slack=1e-10 * scale)
        if not (sub_ok and super_ok):
            raise BracketError(
                f"bracket invalid (sub_ok={sub_ok}, super_ok={super_ok})"
            )
    if start not in ("sub", "super"):
        raise ValueError("start must be 'sub' or 'super'")
    lower = bracket.lower.values
    upper = bracket.upper.values
    start_vals = lower if start == "sub" else upper
    direction = +1 if start == "sub" else -1
    u, resid, its, shift, mono, conf = _monotone_iterate(
        op, prob, start_vals, lower, upper, direction,
        tol_step, tol_residual, maxiter,
    )
    return SolverReport(
        u=ScalarField(op.grid, u),
        residual=resid,
        iterations=its,
        converged=True,
        method=f"monotone-{start}",
        monotone_ok=mono,
        confined_ok=conf,
        bracket=bracket,
        shift=shift,
    )


def epsilon_continuation(op: PaneitzOperator, prob: ProblemSpec,
                         eps_schedule, tol_step: float = 1e-10,
                         tol_residual: float = 1e-8,
                         maxiter: int = 100000) -> SolverReport:
    """Continuation B -> B + eps for absorption problems with B >= 0.

    Each schedule entry is solved by the monotone iteration with the previous
    solution as warm start; since shrinking eps raises the right side, the
    previous solution is a subsolution of the next problem and the solutions
    are pointwise nondecreasing along the schedule.  The schedule must be
    nonincreasing and nonnegative; a trailing 0 entry finishes with an exact
    solve of the target problem whenever it admits a bracket.

    The report's solution is the last entry's; the trace records the
    sup-norm Cauchy differences, the cross-entry monotonicity flag, and the
    uniform lower bound observed.  A collapsing lower bound is reported as a
    non-converged result with diagnostics rather than raised.
    """
    if prob.mode != ABSORPTION:
        raise ValueError("continuation applies to the absorption mode")
    if prob.B.min() < 0.0:
        raise ValueError("continuation requires B >= 0 pointwise")
    schedule = [float(e) for e in eps_schedule]
    if not schedule:
        raise ValueError("empty schedule")
    if any(e < 0 for e in schedule):
        raise ValueError("schedule entries must be nonnegative")
    if any(b > a + 1e-15 for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be nonincreasing")

    prev: np.ndarray | None = None
    trace = []
    diffs = []
    eps_monotone_ok = True
    report = None
    lower_bound = np.inf
    for eps in schedule:
        prob_eps = prob.with_B(prob.B + eps)
        bracket = find_sub_super(op, prob_eps)
        if prev is None:
            report = monotone_solve(op, prob_eps, bracket, tol_step=tol_step,
                                    tol_residual=tol_residual, maxiter=maxiter)
        else:
            # warm start: the previous solution subsolves the new problem
            lower = np.minimum(prev, bracket.lower.values)
            upper = np.maximum(prev, bracket.upper.values)
            u, resid, its, shift, mono, conf = _monotone_iterate(
                op, prob_eps, prev, lower, upper, +1,
                tol_step, tol_residual, maxiter,
            )
            report = SolverReport(
                u=ScalarField(op.grid, u), residual=resid, iterations=its,
                converged=True, method="monotone-continuation",
                monotone_ok=mono, confined_ok=conf, bracket=bracket,
                shift=shift,
            )
        uvals = report.u.values
        if prev is not None:
            diffs.append(float(np.abs(uvals - prev).max()))
            if float((uvals - prev).min()) < -ORDER_SLACK * max(uvals.max(), 1.0):
                eps_monotone_ok = False
        lower_bound = min(lower_bound, float(uvals.min()))
        trace.append({"eps": eps, "min_u": float(uvals.min()),
                      "residual": report.residual})
        prev = uvals

    cauchy_ok = all(b <= a * 1.5 + 1e-14 for a, b in zip(diffs, diffs[1:]))
    scale = max(prob.A.max(), 1.0)
    degenerate = lower_bound <= 1e-10 * scale
    report.method = "epsilon-continuation"
    report.eps_trace = trace
    report.extras.update({
        "cauchy_diffs": diffs,
        "cauchy_ok": bool(cauchy_ok),
        "eps_monotone_ok": bool(eps_monotone_ok),
        "uniform_lower_bound": float(lower_bound),
    })
    if degenerate:
        report.converged = False
        report.extras["degenerate_lower_bound"] = True
    return report
