"""Shared fixtures: reference symbols and random-symbol helpers."""

import numpy as np
import pytest

from blockmg import MatrixTrigPolynomial


@pytest.fixture
def f_q2():
    """Degree-2 stiffness symbol, hardcoded reference values."""
    a0 = np.array([[16.0, -8.0], [-8.0, 14.0]]) / 3.0
    a1 = np.array([[0.0, -8.0], [0.0, 1.0]]) / 3.0
    return MatrixTrigPolynomial({0: a0, 1: a1, -1: a1.T})


@pytest.fixture
def p_l2():
    """Block form of the scalar linear-interpolation transfer, degree 2."""
    return MatrixTrigPolynomial({
        0: np.array([[1.0, 1.0], [0.0, 2.0]]),
        -1: np.array([[1.0, 0.0], [2.0, 0.0]]),
        1: np.array([[0.0, 1.0], [0.0, 0.0]]),
    })


def random_hermitian_symbol(rng, d, degree, shift_to_psd=False):
    """Random Hermitian matrix trig polynomial, optionally shifted PSD."""
    coeffs = {}
    c0 = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    coeffs[0] = c0 + c0.conj().T
    for j in range(1, degree + 1):
        cj = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        coeffs[j] = cj
        coeffs[-j] = cj.conj().T
    f = MatrixTrigPolynomial(coeffs)
    if shift_to_psd:
        thetas = np.linspace(0, 2 * np.pi, 128, endpoint=False)
        low = min(np.linalg.eigvalsh(v)[0] for v in f.evaluate_grid(thetas))
        coeffs[0] = coeffs[0] + (abs(low) + 0.1) * np.eye(d)
        f = MatrixTrigPolynomial(coeffs)
    return f


def random_symbol(rng, d, degree):
    """Random complex (non-Hermitian) matrix trig polynomial."""
    return MatrixTrigPolynomial({
        j: rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        for j in range(-degree, degree + 1)})
