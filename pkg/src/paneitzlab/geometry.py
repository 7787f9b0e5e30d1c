"""Analytic coefficients of the Einstein-form fourth-order operator and the
periodic computational lattice.

The analytic dimension ``n`` fixes exponents and the constant coefficients of
the operator; the lattice dimension ``d`` (1 to 3) is independent of it and
only controls the grid on which fields are sampled.  The closed manifold is
modelled by a flat periodic box: integrals become quadrature-weighted sums and
the volume is the box volume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, PaneitzLabError

__all__ = [
    "GeometryParams",
    "SpectralGrid",
    "ScalarField",
    "derive_coefficients",
    "gradient_squared",
    "save_field",
    "load_field",
    "field_to_csv",
]


@dataclass(frozen=True)
class GeometryParams:
    """Constant coefficients of the fourth-order operator on an Einstein model.

    The operator symbol is ``sigma(t) = t^2 + alpha*t`` acting in frequency
    space (``t`` is the eigenvalue of the positive Laplacian), and the full
    zeroth-order multiplier is carried separately as a potential.  ``beta`` is
    the constant zeroth-order coefficient, tied to the curvature constant by
    ``beta = b_n * Qconst`` exactly.
    """

    n: int
    R: float
    alpha: float
    beta: float
    Qconst: float
    b_n: float
    a_n: float
    two_sharp: float

    def factor_roots(self) -> tuple[float, float]:
        """Roots (r1, r2) of the factorization sigma(t) + beta = (t+r1)(t+r2).

        The discriminant ``alpha^2 - 4*beta`` equals ``4*R^2 / (n(n-1))^2``,
        so for R != 0 the factorization is always real and the operator is a
        product of two second-order operators.
        """
        disc = self.alpha**2 - 4.0 * self.beta
        if disc < 0:
            raise PaneitzLabError(f"negative discriminant {disc}")
        root = math.sqrt(disc)
        return (self.alpha - root) / 2.0, (self.alpha + root) / 2.0


def derive_coefficients(n: int, R: float) -> GeometryParams:
    """Populate every coefficient of the Einstein-form operator from (n, R).

    Requires an integer dimension ``n >= 5`` (the critical exponent
    ``2n/(n-4)`` must be positive and finite).
    """
    if int(n) != n:
        raise ValueError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < 5:
        raise ValueError(f"n must be >= 5, got {n}")
    R = float(R)
    alpha = (n**2 - 2 * n - 4) * R / (2 * n * (n - 1))
    beta = (n - 4) * (n**2 - 4) * R**2 / (16 * n * (n - 1) ** 2)
    qconst = (n**2 - 4) * R**2 / (8 * n * (n - 1) ** 2)
    return GeometryParams(
        n=n,
        R=R,
        alpha=alpha,
        beta=beta,
        Qconst=qconst,
        b_n=(n - 4) / 2.0,
        a_n=(n - 4) / 4.0,
        two_sharp=2.0 * n / (n - 4),
    )


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic lattice in 1, 2 or 3 dimensions.

    ``sizes`` are per-axis point counts (powers of two), ``lengths`` the box
    edge lengths.  Quadrature weight per cell is ``prod(L_i / N_i)``; the dual
    lattice carries the positive-Laplacian eigenvalue
    ``t(k) = sum_i (2*pi*m_i / L_i)^2``.
    """

    sizes: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if not 1 <= len(self.sizes) <= 3:
            raise ValueError(f"grid dimension must be 1..3, got {len(self.sizes)}")
        if len(self.lengths) != len(self.sizes):
            raise ValueError("sizes and lengths must have equal length")
        for m in self.sizes:
            if not _is_power_of_two(int(m)):
                raise ValueError(f"grid sizes must be powers of two, got {m}")
        for L in self.lengths:
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"box lengths must be positive, got {L}")
        object.__setattr__(self, "sizes", tuple(int(m) for m in self.sizes))
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_weight(self) -> float:
        return float(np.prod([L / m for L, m in zip(self.lengths, self.sizes)]))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Physical coordinates along each axis (cell-left convention)."""
        return tuple(
            np.arange(m) * (L / m) for m, L in zip(self.sizes, self.lengths)
        )

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers 2*pi*m/L per axis, fftfreq ordering."""
        return tuple(
            2.0 * np.pi * np.fft.fftfreq(m, d=1.0 / m) / L
            for m, L in zip(self.sizes, self.lengths)
        )

    @cached_property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """t(k) >= 0 on the full dual lattice, shaped like the grid."""
        t = np.zeros(self.shape)
        for axis, k in enumerate(self.wavenumbers):
            sh = [1] * self.d
            sh[axis] = self.sizes[axis]
            t = t + (k.reshape(sh)) ** 2
        return t

    @cached_property
    def derivative_multipliers(self) -> tuple[np.ndarray, ...]:
        """Spectral multipliers i*k per axis, Nyquist mode zeroed.

        For even sizes the m = -N/2 mode has no well-defined odd derivative;
        dropping it keeps first derivatives of real fields real.
        """
        out = []
        for axis, k in enumerate(self.wavenumbers):
            k = k.copy()
            m = self.sizes[axis]
            if m % 2 == 0:
                k[m // 2] = 0.0
            sh = [1] * self.d
            sh[axis] = m
            out.append(1j * k.reshape(sh))
        return tuple(out)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_weight)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(u * v) * self.cell_weight)


@dataclass(frozen=True)
class ScalarField:
    """Real-valued grid function, stored row-major on its grid."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.npoints:
                vals = vals.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"field has {vals.size} values, grid has {self.grid.npoints} points"
                )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: SpectralGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_callable(cls, grid: SpectralGrid, fn) -> "ScalarField":
        return cls(grid, fn(*grid.meshgrid()))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def same_grid(self, other: "ScalarField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError("fields live on different grids")

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            self.same_grid(other)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._coerce(other))

    def __rtruediv__(self, other):
        return ScalarField(self.grid, self._coerce(other) / self.values)

    def __pow__(self, exponent):
        return ScalarField(self.grid, self.values**exponent)

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def gradient_squared(psi: ScalarField) -> ScalarField:
    """Pointwise |grad psi|^2 by spectral differentiation on the periodic grid.

    The result is a sum of squares of real derivative fields, hence
    nonnegative up to roundoff; tiny negative noise is clamped to zero.
    """
    grid = psi.grid
    hat = np.fft.fftn(psi.values)
    out = np.zeros(grid.shape)
    for mult in grid.derivative_multipliers:
        d = np.fft.ifftn(mult * hat).real
        out += d * d
    return ScalarField(grid, np.maximum(out, 0.0))


# --- field I/O -------------------------------------------------------------
#
# Binary format: raw little-endian IEEE-754 binary64, row-major, plus a text
# sidecar "<path>.meta" recording d, sizes and lengths.  CSV export carries
# integer index coordinates and the value.

_META_SUFFIX = ".meta"


def save_field(field: ScalarField, path: str | Path) -> tuple[Path, Path]:
    """Write a field as raw binary64 plus a text sidecar; returns both paths."""
    path = Path(path)
    data = np.ascontiguousarray(field.values, dtype="<f8")
    path.write_bytes(data.tobytes(order="C"))
    meta = Path(str(path) + _META_SUFFIX)
    lines = [
        f"d = {field.grid.d}",
        "sizes = " + ",".join(str(m) for m in field.grid.sizes),
        "lengths = " + ",".join(repr(L) for L in field.grid.lengths),
        "",
    ]
    meta.write_text("\n".join(lines))
    return path, meta


def load_field(path: str | Path, grid: SpectralGrid | None = None) -> ScalarField:
    """Read a field written by :func:`save_field`.

    If ``grid`` is given it must agree with the sidecar; otherwise the grid is
    reconstructed from the sidecar.
    """
    path = Path(path)
    meta = Path(str(path) + _META_SUFFIX)
    if not meta.exists():
        raise PaneitzLabError(f"missing sidecar descriptor {meta}")
    entries = {}
    for line in meta.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    sizes = tuple(int(x) for x in entries["sizes"].split(","))
    lengths = tuple(float(x) for x in entries["lengths"].split(","))
    file_grid = SpectralGrid(sizes, lengths)
    if grid is not None and grid != file_grid:
        raise GridMismatchError(f"file grid {file_grid} does not match expected {grid}")
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    return ScalarField(file_grid, raw.reshape(sizes).copy())


def field_to_csv(field: ScalarField, path: str | Path) -> Path:
    """Write (index coordinates, value) rows for plotting."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"i{a}" for a in range(field.grid.d)] + ["value"])
        for idx in np.ndindex(*field.grid.shape):
            writer.writerow(list(idx) + [repr(float(field.values[idx]))])
    return path


def load_field_csv(path: str | Path, grid: SpectralGrid) -> ScalarField:
    """Read a 1-D CSV written by :func:`field_to_csv` onto a known grid."""
    path = Path(path)
    values = np.zeros(grid.shape)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ncoord = len(header) - 1
        if ncoord != grid.d:
            raise GridMismatchError(f"CSV has {ncoord} index columns, grid is {grid.d}-d")
        for row in reader:
            idx = tuple(int(x) for x in row[:ncoord])
            values[idx] = float(row[ncoord])
    return ScalarField(grid, values)
