"""Principal eigenpair, discrete Sobolev constant, sign of the conformal
invariant, energy norm, and empirical positivity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoercivityError, ConvergenceError
from .geometry import ScalarField
from .operator import PaneitzOperator

__all__ = [
    "EigenPair",
    "AnalysisReport",
    "PositivityReport",
    "analyze",
    "principal_eigenpair",
    "rayleigh_quotient",
    "sobolev_constant",
    "invariant_sign",
    "energy_norm",
    "positivity_check",
]

# relative tolerance (against the beta scale) below which the first
# eigenvalue is declared zero; discrete spectra never hit 0 exactly
ZERO_EIGENVALUE_RTOL = 1e-9


@dataclass(frozen=True)
class EigenPair:
    """Smallest eigenvalue and max-normalized eigenfunction.

    ``positive`` records whether the eigenfunction came out strictly positive
    (it should, for a coercive operator with positive inverse); a violation is
    reported here rather than silently fixed.
    """

    lambda1: float
    phi1: ScalarField
    residual: float
    iterations: int
    positive: bool


@dataclass(frozen=True)
class PositivityReport:
    passed: bool
    min_green: float
    min_random_inverse: float
    scale: float
    samples: int
    reason: str = ""


@dataclass(frozen=True)
class AnalysisReport:
    """Container for the spectral diagnostics a run requested.

    The embedding constant is grid-dependent, so the grid signature always
    travels with it.
    """

    S_psi: float | None = None
    invariant_sign: int | None = None
    eigen: EigenPair | None = None
    energy_norms: dict = field(default_factory=dict)
    grid_signature: str = ""


def analyze(op: PaneitzOperator, want_sobolev: bool = True,
            want_eigen: bool = True, fields: dict | None = None,
            seed: int = 0) -> AnalysisReport:
    """Bundle the requested spectral diagnostics into one report."""
    eig = principal_eigenpair(op) if want_eigen else None
    sign = invariant_sign(op, eig) if want_eigen else None
    S = sobolev_constant(op, seed=seed) if want_sobolev else None
    norms = {name: energy_norm(op, u) for name, u in (fields or {}).items()}
    return AnalysisReport(
        S_psi=S,
        invariant_sign=sign,
        eigen=eig,
        energy_norms=norms,
        grid_signature=f"sizes={op.grid.sizes} lengths={op.grid.lengths}",
    )


def rayleigh_quotient(op: PaneitzOperator, u: ScalarField) -> float:
    """<u, P u> / <u, u> with quadrature weights."""
    denom = op.grid.inner(u.values, u.values)
    if denom == 0.0:
        raise ValueError("Rayleigh quotient of the zero field")
    return op.form(u) / denom


def principal_eigenpair(op: PaneitzOperator, tol: float = 1e-10,
                        maxiter: int = 20000) -> EigenPair:
    """Smallest eigenvalue of the operator by inverse power iteration.

    The operator is shifted by ``max(0, -min W) + margin`` so the inverse
    exists even when the potential dips negative; the shift is subtracted off
    the converged eigenvalue.  Stops when the eigen-residual
    ``||P phi - lambda phi||_inf`` drops below ``tol`` times the operator
    scale.
    """
    w = op.W.values
    scale = max(abs(op.params.beta), float(np.abs(w).max()), 1.0)
    shift = max(0.0, -float(w.min())) + 0.05 * scale
    v = np.ones(op.grid.shape)
    v /= np.sqrt(op.grid.inner(v, v))
    lam = op.grid.inner(v, op.apply_values(v))
    resid = np.inf
    rhs = ScalarField(op.grid, v)
    for it in range(1, maxiter + 1):
        u = op.solve_shifted(shift, rhs, tol=1e-14, check_coercivity=False)
        v = u.values / np.sqrt(op.grid.inner(u.values, u.values))
        pv = op.apply_values(v)
        lam = op.grid.inner(v, pv)
        resid = float(np.abs(pv - lam * v).max()) / scale
        if resid <= tol:
            break
        rhs = ScalarField(op.grid, v)
    else:
        raise ConvergenceError(
            f"inverse iteration stalled at residual {resid:.3e}", residual=resid
        )
    # normalize to max = 1 with a positive peak
    peak = v.flat[np.argmax(np.abs(v))]
    v = v / peak
    phi = ScalarField(op.grid, v)
    pv = op.apply_values(v)
    resid_abs = float(np.abs(pv - lam * v).max())
    return EigenPair(
        lambda1=float(lam),
        phi1=phi,
        residual=resid_abs,
        iterations=it,
        positive=bool(v.min() > 0.0),
    )


def invariant_sign(op: PaneitzOperator, eig: EigenPair | None = None) -> int:
    """Sign of the conformal invariant, read off the first eigenvalue.

    Returns -1, 0 or +1, with zero declared when |lambda1| is below
    ``ZERO_EIGENVALUE_RTOL`` relative to the beta scale.
    """
    if eig is None:
        eig = principal_eigenpair(op)
    scale = max(abs(op.params.beta), 1.0)
    if abs(eig.lambda1) <= ZERO_EIGENVALUE_RTOL * scale:
        return 0
    return 1 if eig.lambda1 > 0 else -1


def energy_norm(op: PaneitzOperator, u: ScalarField) -> float:
    """sqrt(<u, P u>).  Raises if the quadratic form is negative."""
    q = op.form(u)
    scale = max(abs(op.params.beta), 1.0) * op.grid.inner(u.values, u.values)
    if q < -1e-12 * max(scale, 1.0):
        raise CoercivityError(f"quadratic form is negative ({q:.3e}); norm undefined")
    return float(np.sqrt(max(q, 0.0)))


# -- Sobolev constant ---------------------------------------------------------


def _lp_norm_sq(grid, values: np.ndarray, p: float) -> float:
    """(integral |u|^p)^(2/p)."""
    return grid.integrate(np.abs(values) ** p) ** (2.0 / p)


def critical_quotient(op: PaneitzOperator, u: ScalarField,
                      exponent: float | None = None) -> float:
    """<u, P u> / (integral |u|^e)^(2/e), e defaulting to the critical 2n/(n-4)."""
    e = op.params.two_sharp if exponent is None else exponent
    denom = _lp_norm_sq(op.grid, u.values, e)
    if denom == 0.0:
        raise ValueError("quotient of the zero field")
    return op.form(u) / denom


def _descend_quotient(op: PaneitzOperator, start: np.ndarray, exponent: float,
                      maxiter: int, tol: float) -> tuple[float, np.ndarray]:
    """Projected gradient descent for the constrained quadratic form.

    Minimizes <u, P u> on the unit sphere of the L^exponent norm by steepest
    descent with backtracking; the iterate is renormalized after each step.
    """
    grid = op.grid
    e = exponent

    def normalize(u):
        nrm = grid.integrate(np.abs(u) ** e) ** (1.0 / e)
        if nrm == 0.0 or not np.isfinite(nrm):
            return None
        return u / nrm

    u = normalize(start.astype(float))
    if u is None:
        raise ValueError("zero start field")
    f = grid.inner(u, op.apply_values(u))
    step = 1.0
    for _ in range(maxiter):
        g = 2.0 * op.apply_values(u)
        gnorm = np.sqrt(grid.inner(g, g))
        if gnorm == 0.0:
            break
        d = g / gnorm
        improved = False
        s = step
        for _ in range(60):
            cand = normalize(u - s * d)
            if cand is not None:
                fc = grid.inner(cand, op.apply_values(cand))
                if fc < f - 1e-16 * max(abs(f), 1.0):
                    u, fprev, f = cand, f, fc
                    step = min(s * 2.0, 1e6)
                    improved = True
                    break
            s *= 0.5
        if not improved:
            break
        if abs(fprev - f) <= tol * max(abs(f), 1e-300):
            break
    return f, u


def sobolev_constant(op: PaneitzOperator, seed: int = 0, n_random: int = 3,
                     maxiter: int = 4000, tol: float = 1e-14,
                     exponent: float | None = None,
                     return_minimizer: bool = False):
    """Best discrete constant S with ||u||_{L^e}^2 * S <= <u, P u>.

    Estimated by projected gradient descent on the unit L^e sphere from a
    constant start, seeded random starts, and a centered bump start; the
    smallest value found wins.  Deterministic for a given seed.  The value is
    grid-dependent and is only meaningful together with the grid signature.
    """
    grid = op.grid
    e = op.params.two_sharp if exponent is None else exponent
    rng = np.random.default_rng(seed)
    starts = [np.ones(grid.shape)]
    for _ in range(n_random):
        starts.append(rng.standard_normal(grid.shape))
    # bumps at the box center and at the potential's most favorable point;
    # the latter keeps the search equivariant under grid translations of W
    mesh = grid.meshgrid()
    centers = [tuple(L / 2.0 for L in grid.lengths)]
    k_min = np.unravel_index(int(np.argmin(op.W.values)), grid.shape)
    centers.append(tuple(x[k_min] for x in mesh))
    width = min(grid.lengths) / 8.0
    for c in centers:
        r2 = np.zeros(grid.shape)
        for x, L, c_i in zip(mesh, grid.lengths, c):
            dx = np.abs(x - c_i)
            dx = np.minimum(dx, L - dx)
            r2 = r2 + dx**2
        starts.append(np.exp(-r2 / (2.0 * width**2)))

    best = np.inf
    best_u = None
    for s in starts:
        val, u = _descend_quotient(op, s, e, maxiter, tol)
        if val < best:
            best, best_u = val, u
    if not np.isfinite(best):
        raise ConvergenceError("quotient descent diverged")
    if return_minimizer:
        return float(best), ScalarField(grid, best_u)
    return float(best)


# -- positivity diagnostics ---------------------------------------------------


def positivity_check(op: PaneitzOperator, samples: int = 4,
                     seed: int = 0) -> PositivityReport:
    """Empirical inverse-positivity check.

    Solves against discrete delta loads at ``samples`` points (columns of the
    inverse kernel) and against random nonnegative fields, and reports the
    most negative value seen.  PASS requires all minima >= -1e-12 * scale.
    An indefinite operator (first eigenvalue <= 0) is reported as FAIL with a
    reason, not raised.
    """
    grid = op.grid
    ok, margin = op.coercivity_witness(0.0)
    if not ok:
        # fall back on the computed spectrum before giving up
        eig = principal_eigenpair(op)
        scale = max(abs(op.params.beta), 1.0)
        if eig.lambda1 <= ZERO_EIGENVALUE_RTOL * scale:
            return PositivityReport(
                passed=False,
                min_green=float("nan"),
                min_random_inverse=float("nan"),
                scale=scale,
                samples=0,
                reason=(
                    f"operator not positive definite (lambda1 = {eig.lambda1:.6e}); "
                    "inverse kernel has no sign"
                ),
            )
    rng = np.random.default_rng(seed)
    npts = grid.npoints
    idx = np.linspace(0, npts - 1, max(samples, 1)).astype(int)
    min_green = np.inf
    scale = 0.0
    for j in idx:
        delta = np.zeros(npts)
        delta[j] = 1.0 / grid.cell_weight
        col = op.solve_shifted(
            0.0, ScalarField(grid, delta.reshape(grid.shape)),
            check_coercivity=False,
        )
        min_green = min(min_green, col.min())
        scale = max(scale, float(np.abs(col.values).max()))
    min_rand = np.inf
    for _ in range(max(samples, 1)):
        load = np.abs(rng.standard_normal(grid.shape))
        sol = op.solve_shifted(0.0, ScalarField(grid, load), check_coercivity=False)
        min_rand = min(min_rand, sol.min())
        scale = max(scale, float(np.abs(sol.values).max()))
    passed = min_green >= -1e-12 * scale and min_rand >= -1e-12 * scale
    reason = "" if passed else "inverse image of a nonnegative load dips negative"
    return PositivityReport(
        passed=bool(passed),
        min_green=float(min_green),
        min_random_inverse=float(min_rand),
        scale=float(scale),
        samples=int(samples),
        reason=reason,
    )
