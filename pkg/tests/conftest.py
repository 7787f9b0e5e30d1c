import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import paneitzlab as pl

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def ref_params():
    """Unit-sphere convention in dimension five: R = n(n-1) = 20."""
    return pl.derive_coefficients(5, 20)


@pytest.fixture(scope="session")
def ref_grid():
    return pl.SpectralGrid((64,), (TWO_PI,))


@pytest.fixture(scope="session")
def ref_op(ref_params, ref_grid):
    return pl.build_operator(ref_params, ref_grid)


@pytest.fixture(scope="session")
def ref_sobolev(ref_op):
    return pl.sobolev_constant(ref_op, seed=0)


@pytest.fixture(scope="session")
def mp_params():
    """Curvature scaled so the discrete embedding constant sits near one,
    which keeps the minimax geometry wide open for the source fixture."""
    return pl.derive_coefficients(5, 3.8)


@pytest.fixture(scope="session")
def mp_op(mp_params, ref_grid):
    return pl.build_operator(mp_params, ref_grid)


@pytest.fixture(scope="session")
def mp_sobolev(mp_op):
    return pl.sobolev_constant(mp_op, seed=0)


@pytest.fixture(scope="session")
def mp_problem(ref_grid):
    return pl.ProblemSpec(
        A=pl.ScalarField.constant(ref_grid, 1.0),
        B=pl.ScalarField.constant(ref_grid, 0.05),
        p=1.5,
        q=2.0,
        mode="source",
    )


@pytest.fixture(scope="session")
def bis_op(ref_grid):
    """Moderate curvature: certificates stay mutually consistent and the
    threshold-coupling probes are cheap."""
    return pl.build_operator(pl.derive_coefficients(5, 5.0), ref_grid)


@pytest.fixture(scope="session")
def bis_sobolev(bis_op):
    return pl.sobolev_constant(bis_op, seed=0)


def constant_problem(grid, a=1.0, b=1.0, p=3.0, q=2.0, mode="absorption"):
    return pl.ProblemSpec(
        A=pl.ScalarField.constant(grid, a),
        B=pl.ScalarField.constant(grid, b),
        p=p,
        q=q,
        mode=mode,
    )
