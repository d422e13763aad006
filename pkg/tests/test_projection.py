import numpy as np
import pytest

from desci.data import MaskCube
from desci.projection import (SplitState, admm_dual_update, admm_theta_update,
                              gap_accelerated_step, gap_project)
from desci.sensing import SensingOperator
from desci.tv import tv_denoise

from conftest import dense_phi, random_operator


def _state(rng, shape, gamma):
    x, b = rng.normal(size=shape), rng.normal(size=shape)
    return SplitState(x=x, theta=np.zeros(shape), b=b, gamma=gamma)


def dense_theta(Phi, y, v, gamma):
    A = Phi.T @ Phi + gamma * np.eye(Phi.shape[1])
    return np.linalg.solve(A, Phi.T @ y + gamma * v)


def kkt_projection(Phi, y, theta):
    n, N = Phi.shape
    K = np.block([[np.eye(N), Phi.T], [Phi, np.zeros((n, n))]])
    return np.linalg.solve(K, np.concatenate([theta, y]))[:N]


@pytest.mark.parametrize("gamma", [0.24, 1.2, 30.0])
def test_admm_theta_matches_dense_solve(rng, gamma):
    op = random_operator(rng, 3, 3, 2, binary=False)
    st = _state(rng, (2, 3, 3), gamma)
    y = rng.normal(size=(3, 3))
    theta = admm_theta_update(st, op, y)
    ref = dense_theta(dense_phi(op.masks.values), y.ravel(), (st.x + st.b).ravel(), gamma)
    np.testing.assert_allclose(theta.ravel(), ref, rtol=1e-8, atol=1e-12)


def test_admm_theta_zero_residual(rng):
    op = random_operator(rng, 4, 4, 3)
    st = _state(rng, (3, 4, 4), 1.0)
    y = op.A(st.x + st.b)
    np.testing.assert_allclose(admm_theta_update(st, op, y), st.x + st.b, rtol=0, atol=1e-12)


def test_admm_theta_large_gamma(rng):
    op = random_operator(rng, 4, 4, 3)
    st = _state(rng, (3, 4, 4), 1e12)
    v = st.x + st.b
    theta = admm_theta_update(st, op, rng.normal(size=(4, 4)))
    assert np.linalg.norm(theta - v) <= 1e-6 * np.linalg.norm(v)


def test_admm_theta_negative_gamma():
    with pytest.raises(ValueError):
        SplitState(x=np.zeros((1, 1, 1)), theta=np.zeros((1, 1, 1)), b=np.zeros((1, 1, 1)), gamma=-1)


def test_admm_theta_decreases_quadratic(rng):
    op = random_operator(rng, 4, 4, 3, binary=False)
    st = _state(rng, (3, 4, 4), 2.0)
    y = rng.normal(size=(4, 4))

    def f(t):
        return 0.5 * np.sum((y - op.A(t)) ** 2) + st.gamma / 2 * np.sum((t - st.x - st.b) ** 2)

    theta = admm_theta_update(st, op, y)
    assert f(theta) < f(st.x + st.b)
    # optimality: small perturbations never do better
    for _ in range(50):
        assert f(theta) <= f(theta + 1e-3 * rng.normal(size=theta.shape))


def test_gap_project_fixed_point(rng):
    op = random_operator(rng, 3, 5, 2)
    theta = rng.normal(size=(2, 3, 5))
    np.testing.assert_allclose(gap_project(theta, op, op.A(theta)), theta, atol=1e-13)


def test_gap_project_zero_theta_all_ones():
    op = SensingOperator(MaskCube(np.ones((2, 2, 2))))
    y = np.array([[2.0, 4.0], [6.0, -8.0]])
    x = gap_project(np.zeros((2, 2, 2)), op, y)
    for frame in x:
        np.testing.assert_array_equal(frame, y / 2)


@pytest.mark.parametrize("binary", [True, False])
def test_gap_project_manifold_and_kkt(rng, binary):
    op = random_operator(rng, 4, 4, 3, binary=binary)
    theta, y = rng.normal(size=(3, 4, 4)), rng.normal(size=(4, 4))
    x = gap_project(theta, op, y)
    assert np.max(np.abs(op.A(x) - y)) <= 1e-10 * np.max(np.abs(y))
    ref = kkt_projection(dense_phi(op.masks.values), y.ravel(), theta.ravel())
    np.testing.assert_allclose(x.ravel(), ref, rtol=1e-9, atol=1e-10)


def test_gap_project_idempotent(rng):
    op = random_operator(rng, 5, 5, 4, binary=False)
    y = rng.normal(size=(5, 5))
    x1 = gap_project(rng.normal(size=(4, 5, 5)), op, y)
    np.testing.assert_allclose(gap_project(x1, op, y), x1, rtol=0, atol=1e-10)


def test_admm_gamma_zero_equals_gap(rng):
    for _ in range(10):
        op = random_operator(rng, 4, 6, 3, binary=False)
        x, y = rng.normal(size=(3, 4, 6)), rng.normal(size=(4, 6))
        st = SplitState(x=x, theta=x, b=np.zeros_like(x), gamma=0.0)
        np.testing.assert_allclose(admm_theta_update(st, op, y), gap_project(x, op, y),
                                   rtol=0, atol=1e-12)


def test_accelerated_first_step_is_gap(rng):
    op = random_operator(rng, 4, 4, 2)
    y = rng.normal(size=(4, 4))
    theta = np.zeros((2, 4, 4))
    x, y_run = gap_accelerated_step(theta, op, y, y.copy())
    np.testing.assert_array_equal(x, gap_project(theta, op, y))
    np.testing.assert_array_equal(y_run, 2 * y)


def test_accelerated_running_constant_on_manifold(rng):
    op = random_operator(rng, 4, 4, 2)
    theta = rng.normal(size=(2, 4, 4))
    y = op.A(theta)
    y_run = rng.normal(size=(4, 4))
    _, y_next = gap_accelerated_step(theta, op, y, y_run)
    np.testing.assert_allclose(y_next, y_run, atol=1e-13)


def test_accelerated_shrinks_residual_as_fast_as_gap(rng):
    # smooth tiny scene, denoised between projections
    i, j = np.mgrid[0:8, 0:8]
    truth = np.stack([100 + 10 * i + 5 * j, 120 + 8 * i - 3 * j]).astype(float)
    op = random_operator(np.random.default_rng(3), 8, 8, 2)
    y = op.A(truth)

    def run(accelerated):
        x, y_run = op.At(y), y.copy()
        for t in range(3):
            # acceleration starts once x is a denoised estimate, as in the solver
            if accelerated and t > 0:
                proj, y_run = gap_accelerated_step(x, op, y, y_run)
            else:
                proj = gap_project(x, op, y)
            x = tv_denoise(proj, 5.0, 30)
        return np.linalg.norm(y - op.A(x))

    assert run(True) <= run(False)


def test_dual_update_examples(rng):
    x = rng.normal(size=(2, 3, 3))
    b = rng.normal(size=(2, 3, 3))
    st = SplitState(x=x, theta=x.copy(), b=b, gamma=1.0)
    np.testing.assert_array_equal(admm_dual_update(st), b)
    v = rng.normal(size=x.shape)
    st = SplitState(x=x, theta=x + v, b=np.zeros_like(x), gamma=1.0)
    np.testing.assert_allclose(admm_dual_update(st), -v, atol=1e-14)
    theta = rng.normal(size=x.shape)
    st = SplitState(x=x, theta=theta, b=b, gamma=1.0)
    np.testing.assert_allclose(admm_dual_update(st) + theta - x, b, atol=1e-13)
    assert st.q().shape == x.shape
