"""Discrete fourth-order operator: constant-coefficient spectral symbol plus a
multiplication potential.

The operator acts as ``ifft(sigma(t) * fft(u)) + W * u`` with symbol
``sigma(t) = t^2 + alpha * t`` and potential ``W(x) = b_n * (Qconst - V(x))``
where ``V = |grad psi|^2`` (or any user-supplied nonnegative potential).  With
``psi = 0`` the potential is the constant ``beta = b_n * Qconst``, which makes
the whole operator diagonal in frequency space.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    CoercivityError,
    ConvergenceError,
    GridMismatchError,
    PaneitzLabError,
)
from .geometry import GeometryParams, ScalarField, SpectralGrid, gradient_squared

__all__ = ["PaneitzOperator", "build_operator"]


class PaneitzOperator:
    """Immutable handle for the discretized operator.

    Parameters
    ----------
    params : GeometryParams
        Analytic coefficients (alpha, beta, b_n, Qconst, ...).
    grid : SpectralGrid
        Periodic lattice the operator acts on.
    V : ScalarField, optional
        Nonnegative potential entering as ``W = b_n * (Qconst - V)``.
        Defaults to zero, i.e. ``W = beta`` everywhere.
    """

    # dense assembly is cached up to this many grid points
    MAX_DENSE = 4096

    def __init__(self, params: GeometryParams, grid: SpectralGrid,
                 V: ScalarField | None = None):
        self.params = params
        self.grid = grid
        if V is None:
            V = ScalarField.constant(grid, 0.0)
        elif V.grid != grid:
            raise GridMismatchError("potential lives on a different grid")
        self.V = V
        self.W = ScalarField(grid, params.b_n * (params.Qconst - V.values))
        t = grid.laplacian_eigenvalues
        self.sigma = t * (t + params.alpha)
        self._dense = None

    # -- basic algebra ------------------------------------------------------

    def _check_grid(self, u: ScalarField) -> None:
        if u.grid != self.grid:
            raise GridMismatchError("field lives on a different grid")

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        hat = np.fft.fftn(values)
        out = np.fft.ifftn(self.sigma * hat).real
        return out + self.W.values * values

    def apply(self, u: ScalarField) -> ScalarField:
        """P u, exact in the symbol part for band-limited fields."""
        self._check_grid(u)
        return ScalarField(self.grid, self.apply_values(u.values))

    def form(self, u: ScalarField) -> float:
        """Quadratic form <u, P u> with quadrature weights."""
        self._check_grid(u)
        return self.grid.inner(u.values, self.apply_values(u.values))

    def coercivity_witness(self, lam: float = 0.0) -> tuple[bool, float]:
        """Sufficient positivity margin min sigma + min W + lam.

        Positive margin certifies the shifted operator is positive definite;
        a nonpositive margin is inconclusive (the operator may still be
        definite through the interplay of symbol and potential).
        """
        margin = float(self.sigma.min() + self.W.min() + lam)
        return margin > 0.0, margin

    # -- linear solves --------------------------------------------------------

    def _precond_symbol(self, lam: float) -> np.ndarray:
        c = float(np.mean(self.W.values)) + lam
        scale = abs(self.params.beta) + abs(self.W.values).max() + abs(lam)
        if c <= 0.0:
            c = max(1e-8 * max(scale, 1.0), 1e-12)
        return self.sigma + c

    def solve_shifted(self, lam: float, rhs: ScalarField, tol: float = 1e-12,
                      maxiter: int = 10000, check_coercivity: bool = True,
                      x0: ScalarField | None = None) -> ScalarField:
        """Solve (P + lam) u = rhs by preconditioned conjugate gradients.

        The preconditioner inverts the constant-coefficient part
        ``sigma(t) + mean(W) + lam`` in frequency space, which is exact when
        the potential is constant.  Stops at relative sup-norm residual
        ``tol``; raises ConvergenceError past ``maxiter`` iterations.

        With ``check_coercivity=True`` (default) the sufficient witness
        ``min sigma + min W + lam > 0`` is required up front.  Callers holding
        an independent positivity certificate (for instance a computed first
        eigenvalue) may disable the check.
        """
        self._check_grid(rhs)
        if check_coercivity:
            ok, margin = self.coercivity_witness(lam)
            if not ok:
                raise CoercivityError(
                    f"coercivity witness failed (margin {margin:.3e}); "
                    "operator possibly indefinite under shift "
                    f"lambda={lam!r}"
                )
        b = rhs.values
        bnorm = float(np.abs(b).max())
        if bnorm == 0.0:
            return ScalarField(self.grid, np.zeros(self.grid.shape))
        pre = self._precond_symbol(lam)
        diag = self.W.values + lam

        def mv(x):
            hat = np.fft.fftn(x)
            return np.fft.ifftn(self.sigma * hat).real + diag * x

        def pinv(r):
            return np.fft.ifftn(np.fft.fftn(r) / pre).real

        # at this breakdown residual the iteration has hit the floating-point
        # floor of the operator application, not a genuine indefiniteness
        breakdown_floor = 1e-8

        x = np.zeros_like(b) if x0 is None else x0.values.copy()
        r = b - mv(x) if x0 is not None else b.copy()
        z = pinv(r)
        p = z.copy()
        rz = float(np.sum(r * z))
        last = float(np.abs(r).max()) / bnorm
        for _ in range(maxiter):
            last = float(np.abs(r).max()) / bnorm
            if last <= tol:
                return ScalarField(self.grid, x)
            Ap = mv(p)
            pAp = float(np.sum(p * Ap))
            if pAp <= 0.0 or rz <= 0.0:
                if last <= breakdown_floor:
                    return ScalarField(self.grid, x)
                raise CoercivityError(
                    "conjugate gradients met a nonpositive curvature direction "
                    f"at relative residual {last:.3e}; operator indefinite "
                    "under shift"
                )
            a = rz / pAp
            x += a * p
            r -= a * Ap
            z = pinv(r)
            rz_new = float(np.sum(r * z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise ConvergenceError(
            f"linear solve stalled at relative residual {last:.3e}", residual=last
        )

    # -- geometric transform --------------------------------------------------

    def conformal_Q(self, u: ScalarField) -> ScalarField:
        """Curvature-potential of the conformally transformed metric.

        Normalized so the identity factor returns ``Qconst``:
        ``(2/(n-4)) * u^{-(n+4)/(n-4)} * P u``.  Requires u > 0 and a zero
        scalar-field potential (pure geometric transform).
        """
        self._check_grid(u)
        if u.min() <= 0.0:
            raise ValueError("conformal factor must be positive everywhere")
        if float(np.abs(self.V.values).max()) != 0.0:
            raise ValueError("conformal transform requires a zero potential")
        n = self.params.n
        expo = (n + 4.0) / (n - 4.0)
        pu = self.apply_values(u.values)
        out = (2.0 / (n - 4.0)) * u.values ** (-expo) * pu
        return ScalarField(self.grid, out)

    # -- dense assembly (oracles, Newton on small grids) ----------------------

    def dense_matrix(self) -> np.ndarray:
        """Assemble the operator as a dense symmetric matrix (small grids only)."""
        npts = self.grid.npoints
        if npts > self.MAX_DENSE:
            raise PaneitzLabError(
                f"dense assembly refused for {npts} grid points (cap {self.MAX_DENSE})"
            )
        if self._dense is None:
            eye = np.eye(npts).reshape((npts,) + self.grid.shape)
            cols = np.empty((npts, npts))
            for j in range(npts):
                cols[:, j] = self.apply_values(eye[j]).ravel()
            self._dense = 0.5 * (cols + cols.T)
        return self._dense


def build_operator(params: GeometryParams, grid: SpectralGrid,
                   psi: ScalarField | None = None,
                   potential: ScalarField | None = None) -> PaneitzOperator:
    """Construct the operator from a scalar field psi or a direct potential V.

    Exactly one of ``psi`` / ``potential`` may be given; with neither the
    potential is zero and the operator is the pure constant-coefficient one.
    """
    if psi is not None and potential is not None:
        raise ValueError("give either psi or potential, not both")
    if psi is not None:
        V = gradient_squared(psi)
    else:
        V = potential
    return PaneitzOperator(params, grid, V)
