import numpy as np
import pytest

from exceptions import TruncationTooLarge
from operators import Convention, momentum_element, position_elements


def test_harmonic_ladder_element(harmonic_fine):
    elements = position_elements(harmonic_fine, 10)
    # states are signed positive on the left, so the ladder elements come out negative
    assert abs(elements.x_elements[0, 1]) == pytest.approx(np.sqrt(0.5), abs=1e-6)
    assert abs(elements.x_elements[3, 4]) == pytest.approx(np.sqrt(2.0), abs=1e-6)


def test_table_is_symmetric(tilted_eig):
    elements = position_elements(tilted_eig, 40)
    np.testing.assert_array_equal(elements.x_elements, elements.x_elements.T)
    assert elements.k_trunc == 40
    assert elements.energies.shape == (40,)


def test_parity_selection_rule(harmonic_eig):
    x = position_elements(harmonic_eig, 10).x_elements
    assert abs(x[0, 0]) < 1e-12
    assert abs(x[0, 2]) < 1e-12
    assert abs(x[1, 3]) < 1e-12


def test_harmonic_table_is_tridiagonal(harmonic_elements):
    x = harmonic_elements.x_elements
    off_band = x - np.diag(np.diag(x, 1), 1) - np.diag(np.diag(x, -1), -1)
    assert np.max(np.abs(off_band)) < 1e-4


def test_momentum_element(harmonic_elements):
    elements = harmonic_elements
    assert momentum_element(elements, 2, 2) == 0j
    p = momentum_element(elements, 1, 0)
    expected = 1j * (elements.energies[1] - elements.energies[0]) * elements.x_elements[1, 0]
    assert p == pytest.approx(expected)
    assert abs(p.imag) == pytest.approx(np.sqrt(0.5), abs=1e-4)


def test_conventions_differ_by_half(harmonic_elements):
    half = harmonic_elements.with_convention("half")
    assert half.kappa == 0.5
    assert harmonic_elements.kappa == 1.0
    for m, n in [(0, 1), (3, 4), (5, 2)]:
        assert momentum_element(half, m, n) == 0.5 * momentum_element(harmonic_elements, m, n)


def test_momentum_matrix_is_hermitian(tilted_eig):
    p = position_elements(tilted_eig, 30, Convention.CANONICAL).momentum
    np.testing.assert_allclose(p, p.conj().T, atol=1e-14)


def test_sum_rule(harmonic_elements, tilted_eig):
    assert harmonic_elements.sum_rule(0) == pytest.approx(0.5, abs=1e-4)
    elements = position_elements(tilted_eig, 60, Convention.CANONICAL)
    assert elements.sum_rule(0) == pytest.approx(0.5, abs=1e-3)


def test_truncation_limits(harmonic_eig, harmonic_elements):
    with pytest.raises(TruncationTooLarge):
        position_elements(harmonic_eig, harmonic_eig.k_states + 1)
    with pytest.raises(TruncationTooLarge):
        position_elements(harmonic_eig, 0)
    smaller = harmonic_elements.truncated(5)
    assert smaller.k_trunc == 5
    np.testing.assert_array_equal(smaller.x_elements, harmonic_elements.x_elements[:5, :5])
    with pytest.raises(TruncationTooLarge):
        harmonic_elements.truncated(50)


def test_to_frame_lists_upper_triangle(harmonic_elements):
    frame = harmonic_elements.truncated(4).to_frame()
    assert list(frame.columns) == ["m", "n", "x_mn"]
    assert len(frame) == 10
    assert (frame["m"] <= frame["n"]).all()


def test_momentum_matches_derivative_quadrature(harmonic_fine):
    elements = position_elements(harmonic_fine, 10, Convention.CANONICAL)
    h = harmonic_fine.grid.spacing
    for m, n in [(1, 0), (4, 3), (8, 7)]:
        # p = -i d/dx
        expected = -1j * np.sum(harmonic_fine.states[m] * np.gradient(harmonic_fine.states[n], h)) * h
        assert momentum_element(elements, m, n) == pytest.approx(expected, abs=1e-5)
