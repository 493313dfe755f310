import pytest

from models import build_preset
from operators import Convention, position_elements
from schrodinger import Grid, build_hamiltonian, eigensolve, solve


@pytest.fixture(scope="session")
def harmonic_eig():
    """Oscillator x²/2 on [-10, 10], 4096 points, 40 levels."""
    return solve(build_preset("Harmonic", 0.0), k_states=40, n_points=4096)


@pytest.fixture(scope="session")
def harmonic_fine():
    """Oscillator on a grid fine enough for 1e-6 matrix elements."""
    spec = build_preset("Harmonic", 0.0)
    return eigensolve(build_hamiltonian(spec, Grid(-10.0, 10.0, 16385)), 12)


@pytest.fixture(scope="session")
def harmonic_elements(harmonic_eig):
    return position_elements(harmonic_eig, 20, Convention.CANONICAL)


@pytest.fixture(scope="session")
def double_well_eig():
    """Model I at σ=0 on the default grid."""
    return solve(build_preset("ModelI", 0.0), k_states=60, n_points=4096)


@pytest.fixture(scope="session")
def tilted_eig():
    """Model I at σ=30, past the critical tilt."""
    return solve(build_preset("ModelI", 30.0), k_states=60, n_points=2049)
