"""Problem data for the singular semilinear equation and shared solver types.

Two sign conventions are supported for ``P u = RHS(u)``:

* absorption:  RHS = A/u^p - B u^q   (the power term damps growth)
* source:      RHS = A/u^p + B u^q   (the power term feeds growth; B >= 0)

``A`` must be strictly positive; exponents satisfy p > 1 and q > 1.  In
source mode the theory needs a compact embedding, so q < 2n/(n-4) - 1 is
enforced strictly and the borderline value runs best-effort with a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GridMismatchError
from .geometry import GeometryParams, ScalarField
from .operator import PaneitzOperator

__all__ = [
    "ABSORPTION",
    "SOURCE",
    "ProblemSpec",
    "Bracket",
    "SolverReport",
    "reaction",
    "reaction_derivative",
    "smoothed_reaction",
    "energy",
    "energy_gradient_values",
    "residual_sup",
    "lyapunov_energy",
]

ABSORPTION = "absorption"
SOURCE = "source"


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficient fields, exponents and the nonlinearity sign mode."""

    A: ScalarField
    B: ScalarField
    p: float
    q: float
    mode: str = ABSORPTION

    def __post_init__(self):
        if self.mode not in (ABSORPTION, SOURCE):
            raise ValueError(f"mode must be '{ABSORPTION}' or '{SOURCE}'")
        if self.A.grid != self.B.grid:
            raise GridMismatchError("A and B live on different grids")
        if self.A.min() <= 0.0:
            raise ValueError("A must be strictly positive everywhere")
        if not self.p > 1.0:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.q > 1.0:
            raise ValueError(f"q must exceed 1, got {self.q}")
        if self.mode == SOURCE and self.B.min() < 0.0:
            raise ValueError("source mode requires B >= 0 pointwise")

    @property
    def grid(self):
        return self.A.grid

    @property
    def sign(self) -> float:
        return -1.0 if self.mode == ABSORPTION else 1.0

    def validate_exponents(self, params: GeometryParams) -> None:
        """Mode-dependent admissibility of q against the critical exponent.

        Absorption accepts any q > 1 (no embedding is needed for the monotone
        scheme).  Source mode requires q < 2#-1; equality is allowed but runs
        best-effort with a warning since compactness is borderline.
        """
        qmax = params.two_sharp - 1.0
        if self.mode == SOURCE:
            if self.q > qmax + 1e-12:
                raise ValueError(
                    f"source mode needs q <= {qmax} (= 2#-1), got {self.q}"
                )
            if abs(self.q - qmax) <= 1e-12:
                warnings.warn(
                    "q equals the critical exponent 2#-1; proceeding best-effort",
                    RuntimeWarning,
                    stacklevel=2,
                )

    def with_B(self, B: ScalarField) -> "ProblemSpec":
        return ProblemSpec(self.A, B, self.p, self.q, self.mode)


def reaction(prob: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """f(x, u) = A/u^p -/+ B u^q pointwise; u must be positive."""
    return prob.A.values / u**prob.p + prob.sign * prob.B.values * u**prob.q


def reaction_derivative(prob: ProblemSpec, u: np.ndarray) -> np.ndarray:
    """df/du pointwise at positive u."""
    return (
        -prob.p * prob.A.values / u ** (prob.p + 1)
        + prob.sign * prob.q * prob.B.values * u ** (prob.q - 1)
    )


def smoothed_reaction(prob: ProblemSpec, u: np.ndarray, eps: float) -> np.ndarray:
    """Regularized source-mode right side A u+/(eps+(u+)^2)^((p+1)/2) + B (u+)^q.

    At eps = 0 and u > 0 this reduces to the exact reaction.  Only meaningful
    in source mode (the regularized functional's Euler-Lagrange right side).
    """
    up = np.maximum(u, 0.0)
    sing = prob.A.values * up * (eps + up**2) ** (-(prob.p + 1) / 2.0)
    return sing + prob.B.values * up**prob.q


def smoothed_reaction_derivative(prob: ProblemSpec, u: np.ndarray, eps: float) -> np.ndarray:
    up = np.maximum(u, 0.0)
    base = eps + up**2
    dsing = prob.A.values * (eps - prob.p * up**2) * base ** (-(prob.p + 3) / 2.0)
    dpow = np.where(up > 0, prob.q * prob.B.values * up ** (prob.q - 1), 0.0)
    return dsing + dpow


@dataclass(frozen=True)
class Bracket:
    """Sub/supersolution pair of the form s1*e <= s2*e.

    ``e`` is an interior element of the positive cone (default the constant
    one); s1*e is expected to be a subsolution and s2*e a supersolution,
    which :func:`paneitzlab.monotone.verify_bracket` checks pointwise.
    """

    s1: float
    s2: float
    e: ScalarField

    def __post_init__(self):
        if not (self.s1 > 0 and self.s2 >= self.s1):
            raise ValueError(f"need 0 < s1 <= s2, got ({self.s1}, {self.s2})")
        if self.e.min() <= 0.0:
            raise ValueError("cone element e must be positive everywhere")

    @property
    def lower(self) -> ScalarField:
        return ScalarField(self.e.grid, self.s1 * self.e.values)

    @property
    def upper(self) -> ScalarField:
        return ScalarField(self.e.grid, self.s2 * self.e.values)


@dataclass
class SolverReport:
    """Outcome of one nonlinear solve.

    ``residual`` is the sup-norm of ``P u - RHS(u)`` at the returned field.
    Mountain-pass runs additionally carry the pass level, the endpoint/rim
    energies and the regularization schedule trace.
    """

    u: ScalarField
    residual: float
    iterations: int
    converged: bool
    method: str
    monotone_ok: bool | None = None
    confined_ok: bool | None = None
    bracket: Bracket | None = None
    shift: float | None = None
    pass_level: float | None = None
    rim_value: float | None = None
    energy_at_endpoints: tuple[float, float] | None = None
    energy_at_r0: float | None = None
    energy_at_solution: float | None = None
    eps_trace: list = dc_field(default_factory=list)
    extras: dict = dc_field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "method": self.method,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "min_u": self.u.min(),
            "max_u": self.u.max(),
        }
        for name in ("monotone_ok", "confined_ok", "shift", "pass_level",
                     "rim_value", "energy_at_r0", "energy_at_solution"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.energy_at_endpoints is not None:
            out["energy_at_endpoints"] = list(self.energy_at_endpoints)
        if self.bracket is not None:
            out["bracket"] = {"s1": self.bracket.s1, "s2": self.bracket.s2}
        if self.eps_trace:
            out["eps_trace"] = self.eps_trace
        if self.extras:
            out["extras"] = self.extras
        return out


def residual_sup(op: PaneitzOperator, prob: ProblemSpec, u: ScalarField) -> float:
    """||P u - RHS(u)||_inf at a positive field."""
    return float(np.abs(op.apply_values(u.values) - reaction(prob, u.values)).max())


# -- energy functionals -------------------------------------------------------


def energy(op: PaneitzOperator, prob: ProblemSpec, eps: float,
           u: ScalarField) -> float:
    """Regularized action for the source-sign problem.

    E_eps(u) = 1/2 <u, P u> + 1/(p-1) * int A (eps+(u+)^2)^{-(p-1)/2}
               - 1/(q+1) * int B (u+)^{q+1}

    ``eps = 0`` is allowed only for fields bounded away from zero.
    """
    if prob.mode != SOURCE:
        raise ValueError("energy functional is defined for the source mode")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0 and u.min() <= 0.0:
        raise ValueError("eps = 0 requires min(u) > 0")
    grid = op.grid
    up = np.maximum(u.values, 0.0)
    quad = 0.5 * op.form(u)
    sing = grid.integrate(prob.A.values * (eps + up**2) ** (-(prob.p - 1) / 2.0))
    power = grid.integrate(prob.B.values * up ** (prob.q + 1))
    return quad + sing / (prob.p - 1.0) - power / (prob.q + 1.0)


def energy_gradient_values(op: PaneitzOperator, prob: ProblemSpec, eps: float,
                           u: np.ndarray) -> np.ndarray:
    """Variational derivative of E_eps: P u - smoothed RHS."""
    return op.apply_values(u) - smoothed_reaction(prob, u, eps)


def lyapunov_energy(op: PaneitzOperator, prob: ProblemSpec, u: ScalarField) -> float:
    """Energy decreasing along the gradient flow (either sign mode).

    1/2 <u, P u> - int F(x, u) with dF/du = f; for p > 1 the primitive of the
    singular part is -A u^{1-p}/(p-1).
    """
    uv = u.values
    F = (
        -prob.A.values * uv ** (1.0 - prob.p) / (prob.p - 1.0)
        + prob.sign * prob.B.values * uv ** (prob.q + 1.0) / (prob.q + 1.0)
    )
    return 0.5 * op.form(u) - op.grid.integrate(F)
