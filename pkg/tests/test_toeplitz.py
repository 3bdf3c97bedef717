import math

import numpy as np
import pytest
from scipy import linalg

from cgemev.exceptions import NotPositiveDefinite
from cgemev.spectral import ModelParams
from cgemev.toeplitz import (
    CorrelationKernel,
    NuggetSystem,
    apply_filter,
    build_kernel,
    cgem_parts,
    cgem_statistic,
    gibbs_energy,
    log_likelihood,
    trace_filter,
    white_kernel,
)

CASES = [(0.5, 1.0, 1.0, 0.1, 40), (1.5, 2.0, 0.7, 0.05, 64), (2.5, 0.5, 3.0, 0.2, 33), (1.0, 1.3, 1.0, 0.1, 50)]


def dense(nu, b, theta, delta, n):
    kernel = build_kernel(ModelParams(nu, b, theta, delta), n)
    R = linalg.toeplitz(kernel.first_row)
    A = b * R @ np.linalg.inv(np.eye(n) + b * R)
    return kernel, R, A


@pytest.mark.parametrize("nu, b, theta, delta, n", CASES)
@pytest.mark.parametrize("method", ["cholesky", "levinson"])
def test_dense_oracles(nu, b, theta, delta, n, method):
    kernel, R, A = dense(nu, b, theta, delta, n)
    y = np.random.default_rng(n).normal(size=n)
    assert np.max(np.abs(apply_filter(b, kernel, y, method) - A @ y)) < 1e-10
    assert trace_filter(b, kernel, method=method) == pytest.approx(np.trace(A), abs=1e-10)
    expected = y @ A @ (np.eye(n) - A) @ y - np.trace(A)
    assert cgem_statistic(b, kernel, y, method) == pytest.approx(expected, abs=1e-10)
    S = np.eye(n) + b * R
    sign, logdet = np.linalg.slogdet(S)
    ll = -0.5 * (y @ np.linalg.solve(S, y) + logdet + n * math.log(2 * math.pi))
    assert log_likelihood(b, kernel, y, method) == pytest.approx(ll, abs=1e-10)


def test_gibbs_energy_dense():
    kernel, R, _ = dense(0.5, 1.0, 1.0, 0.1, 48)
    z = np.random.default_rng(0).normal(size=48)
    assert gibbs_energy(kernel, z) == pytest.approx(z @ np.linalg.solve(R, z) / 48, rel=1e-10)


@pytest.mark.parametrize("nu, b, theta, delta, n", CASES)
def test_trace_identity(nu, b, theta, delta, n):
    kernel, R, A = dense(nu, b, theta, delta, n)
    I = np.eye(n)
    assert np.trace(A @ (I - A) @ (I + b * R)) == pytest.approx(np.trace(A), abs=1e-12)


def test_block_right_hand_sides():
    kernel, _, A = dense(1.5, 1.0, 1.0, 0.05, 30)
    Y = np.random.default_rng(1).normal(size=(30, 3))
    quad, trA = cgem_parts(1.0, kernel, Y, "levinson")
    assert quad.shape == (3,)
    for j in range(3):
        assert quad[j] == pytest.approx(Y[:, j] @ A @ (np.eye(30) - A) @ Y[:, j], abs=1e-10)
    ll = log_likelihood(1.0, kernel, Y)
    assert ll[1] == pytest.approx(log_likelihood(1.0, kernel, Y[:, 1]), abs=1e-12)


def test_levinson_matches_cholesky_large():
    kernel = build_kernel(ModelParams(1.5, 1.0, 1.0, 0.01), 1500)
    y = np.random.default_rng(2).normal(size=1500)
    a = NuggetSystem(2.0, kernel, "levinson")
    c = NuggetSystem(2.0, kernel, "cholesky")
    assert np.max(np.abs(a.solve(y) - c.solve(y))) < 1e-9
    assert a.logdet() == pytest.approx(c.logdet(), rel=1e-11)
    assert a.trace_inverse() == pytest.approx(c.trace_inverse(), rel=1e-11)


def test_randomized_trace_within_stderr():
    kernel = build_kernel(ModelParams(0.5, 1.0, 1.0, 0.05), 200)
    exact = trace_filter(1.0, kernel)
    est, se = trace_filter(1.0, kernel, mode="randomized", probes=200, seed=4)
    assert abs(est - exact) < 4 * se
    assert trace_filter(1.0, kernel, mode="randomized", probes=200, seed=4) == (est, se)


def test_white_kernel_filter_is_scalar():
    kernel = white_kernel(10)
    y = np.arange(10.0)
    assert np.allclose(apply_filter(3.0, kernel, y), 0.75 * y)


def test_not_positive_definite():
    row = np.array([1.0, 1.5, 0.0, 0.0])
    bad = CorrelationKernel(first_row=row, params=None, n=4)
    for method in ("cholesky", "levinson"):
        with pytest.raises(NotPositiveDefinite):
            log_likelihood(5.0, bad, np.ones(4), method)


def test_input_validation():
    kernel = white_kernel(4)
    with pytest.raises(ValueError):
        NuggetSystem(-1.0, kernel)
    with pytest.raises(ValueError):
        NuggetSystem(1.0, kernel, method="qr")
    with pytest.raises(ValueError):
        trace_filter(1.0, kernel, mode="sketch")
    with pytest.raises(ValueError):
        build_kernel(ModelParams(0.5, 1, 1, 1), 1)


@pytest.mark.parametrize("nu,theta", [(0.5, 1.0), (1.5, 2.0)])
def test_statistic_is_scaled_b_score(nu, theta):
    # y'A(I-A)y - tr A = 2 b d(loglik)/db at fixed theta
    n = 300
    kernel = build_kernel(ModelParams(nu, 1.0, theta, 0.02), n)
    y = np.random.default_rng(3).normal(size=n) * 1.5
    for b in (0.3, 1.0, 4.0):
        eps = 1e-5 * b
        score = (log_likelihood(b + eps, kernel, y) - log_likelihood(b - eps, kernel, y)) / (2 * eps)
        assert cgem_statistic(b, kernel, y) == pytest.approx(2 * b * score, rel=1e-6, abs=1e-6)
