import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import multivariate_normal

from casmart import gp
from casmart.gp import (Dataset, GPFitError, GPOptimizationError, fit, optimize_hyperparameters, predict,
                        update_with_observation)
from casmart.kernels import KernelSpec, kernel_matrix

VARIANTS = [
    lambda r: KernelSpec.rbf(r.uniform(0.3, 3), r.uniform(0.1, 2)),
    lambda r: KernelSpec.matern(1.5, r.uniform(0.3, 3), r.uniform(0.1, 2)),
    lambda r: KernelSpec.matern(2.5, r.uniform(0.3, 3), r.uniform(0.1, 2)),
    lambda r: KernelSpec.rq(r.uniform(0.3, 3), r.uniform(0.1, 2), r.uniform(0.2, 5)),
    lambda r: KernelSpec.product(KernelSpec.rq(r.uniform(0.3, 3), r.uniform(0.1, 2), r.uniform(0.2, 5)),
                                 KernelSpec.constant(r.uniform(0.3, 3))),
]


def dense_oracle(kernel, noise, X, y, Xq):
    A = np.linalg.inv(kernel_matrix(kernel, X, X) + noise * np.eye(len(X)))
    Ks = kernel_matrix(kernel, X, Xq)
    mean = Ks.T @ A @ y
    var = np.diag(kernel_matrix(kernel, Xq, Xq) - Ks.T @ A @ Ks)
    return mean, var


def random_instance(seed, n=8, d=2):
    r = np.random.default_rng(seed)
    kernel = VARIANTS[r.integers(len(VARIANTS))](r)
    X = r.random((n, d))
    y = r.normal(size=n)
    return kernel, r.uniform(1e-3, 0.1), X, y, r.random((6, d))


def test_exact_interpolation_single_point():
    m = fit(Dataset([[0.0]], [2.0]), KernelSpec.rbf(), 0.0)
    p = predict(m, [[0.0]])
    assert p.mean[0] == pytest.approx(2.0, abs=1e-12)
    assert p.std[0] == pytest.approx(0.0, abs=1e-8)


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        fit(Dataset(np.zeros((0, 1)), []), KernelSpec.rbf(), 0.1)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), [1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset([[0.0], [1.0]], [1.0, np.nan])


def test_matches_dense_inverse_oracle():
    kernel, noise, X, y, Xq = random_instance(11)
    m = fit(Dataset(X, y), kernel, noise)
    mean, var = dense_oracle(kernel, noise, X, y, Xq)
    p = predict(m, Xq)
    np.testing.assert_allclose(p.mean, mean, atol=1e-8)
    np.testing.assert_allclose(p.var, var, atol=1e-8)


@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_matches_dense_inverse_oracle_property(n, d, seed):
    kernel, noise, X, y, Xq = random_instance(seed, n, d)
    p = predict(fit(Dataset(X, y), kernel, noise), Xq)
    mean, var = dense_oracle(kernel, noise, X, y, Xq)
    np.testing.assert_allclose(p.mean, mean, atol=1e-8)
    np.testing.assert_allclose(p.var, np.maximum(var, 0), atol=1e-8)


def test_far_query_reverts_to_prior():
    k = KernelSpec.rbf(1.7, 0.2)
    m = fit(Dataset([[0.0], [0.3]], [1.0, -1.0]), k, 1e-4)
    p = predict(m, [[50.0]])
    assert abs(p.mean[0]) < 1e-6
    assert abs(p.var[0] - 1.7) < 1e-6


def test_noise_free_training_point_has_zero_std():
    X = np.array([[0.0], [0.4], [1.0]])
    m = fit(Dataset(X, [0.1, 0.5, -0.2]), KernelSpec.matern(2.5), 0.0)
    assert np.all(predict(m, X).std < 1e-6)


def test_log_marginal_likelihood_matches_density():
    kernel, noise, X, y, _ = random_instance(5)
    m = fit(Dataset(X, y), kernel, noise)
    cov = kernel_matrix(kernel, X, X) + noise * np.eye(len(y))
    assert m.log_marginal_likelihood == pytest.approx(multivariate_normal(np.zeros(len(y)), cov).logpdf(y), abs=1e-9)


def test_jitter_escalates_on_duplicates():
    X = np.array([[0.2], [0.2], [0.7]])
    m = fit(Dataset(X, [1.0, 1.0, 0.0]), KernelSpec.rbf(), 0.0)
    assert m.jitter >= 0.0
    assert np.all(np.isfinite(predict(m, X).mean))


def test_jitter_exhaustion_raises(monkeypatch):
    def always_fail(_):
        raise np.linalg.LinAlgError

    monkeypatch.setattr(gp.np.linalg, "cholesky", always_fail)
    with pytest.raises(GPFitError) as info:
        fit(Dataset([[0.0]], [1.0]), KernelSpec.rbf(), 0.1)
    assert info.value.jitters == pytest.approx([0.0] + [10.0**k for k in range(-10, -3)], rel=1e-9)


def test_update_equals_fresh_fit():
    kernel, noise, X, y, Xq = random_instance(7)
    m = fit(Dataset(X[:-1], y[:-1]), kernel, noise)
    up = update_with_observation(m, X[-1], y[-1])
    fresh = fit(Dataset(X, y), kernel, noise)
    np.testing.assert_allclose(predict(up, Xq).mean, predict(fresh, Xq).mean, atol=1e-10)
    np.testing.assert_allclose(predict(up, Xq).std, predict(fresh, Xq).std, atol=1e-10)
    assert up.log_marginal_likelihood == pytest.approx(fresh.log_marginal_likelihood, abs=1e-9)


def test_duplicate_observation_reduces_std():
    X = np.array([[0.1], [0.5], [0.9]])
    m = fit(Dataset(X, [0.0, 1.0, 0.5]), KernelSpec.rbf(1.0, 0.3), 0.05)
    up = update_with_observation(m, [0.5], 1.0)
    assert predict(up, [[0.5]]).std[0] < predict(m, [[0.5]]).std[0]


def test_update_rejects_bad_input():
    m = fit(Dataset([[0.0], [1.0]], [0.0, 1.0]), KernelSpec.rbf(), 0.01)
    with pytest.raises(ValueError):
        update_with_observation(m, [0.5], np.nan)
    with pytest.raises(ValueError):
        update_with_observation(m, [0.5, 0.5], 1.0)


def test_update_with_refit_is_deterministic():
    rng = np.random.default_rng(0)
    X = rng.random((6, 1))
    m = fit(Dataset(X, np.sin(6 * X[:, 0])), KernelSpec.rbf(), 0.01)
    a = update_with_observation(m, [0.5], 0.3, refit_hyperparameters=True, restarts=2, seed=4)
    b = update_with_observation(m, [0.5], 0.3, refit_hyperparameters=True, restarts=2, seed=4)
    assert a.kernel == b.kernel and a.noise_variance == b.noise_variance


def test_length_scale_recovery():
    hits = 0
    for seed in range(10):
        r = np.random.default_rng(100 + seed)
        X = r.random((30, 1))
        cov = kernel_matrix(KernelSpec.rbf(1.0, 0.3), X, X) + 1e-4 * np.eye(30)
        y = r.multivariate_normal(np.zeros(30), cov)
        m = optimize_hyperparameters(Dataset(X, y), KernelSpec.rbf(), restarts=5, seed=seed)
        hits += 0.15 <= m.kernel.length_scale <= 0.6
    assert hits >= 8


def test_zero_target_gives_small_signal_variance():
    X = np.linspace(0, 1, 8)[:, None]
    m = optimize_hyperparameters(Dataset(X, np.zeros(8)), KernelSpec.rbf(), restarts=3, seed=0)
    assert m.kernel.signal_variance < 1e-3
    assert np.max(np.abs(predict(m, np.array([[0.25], [0.8]])).mean)) < 1e-3


def test_constant_target_is_predicted():
    X = np.linspace(0, 1, 8)[:, None]
    m = optimize_hyperparameters(Dataset(X, np.full(8, 3.0)), KernelSpec.rbf(), restarts=3, seed=0)
    np.testing.assert_allclose(predict(m, np.array([[0.25], [0.8]])).mean, 3.0, atol=1e-3)


def test_optimizer_is_deterministic_and_improves_likelihood():
    rng = np.random.default_rng(2)
    X = rng.random((12, 2))
    data = Dataset(X, np.sin(3 * X[:, 0]) + X[:, 1] ** 2)
    a = optimize_hyperparameters(data, KernelSpec.matern(2.5), restarts=1, seed=9)
    b = optimize_hyperparameters(data, KernelSpec.matern(2.5), restarts=1, seed=9)
    assert a.kernel == b.kernel and a.noise_variance == b.noise_variance
    default = fit(data, KernelSpec.matern(2.5), 1e-2)
    assert a.log_marginal_likelihood >= default.log_marginal_likelihood
    assert gp.NOISE_BOUNDS[0] <= a.noise_variance <= gp.NOISE_BOUNDS[1]


def test_fixed_noise_and_warm_start():
    rng = np.random.default_rng(4)
    X = rng.random((10, 1))
    data = Dataset(X, np.cos(4 * X[:, 0]))
    m = optimize_hyperparameters(data, KernelSpec.rbf(), restarts=2, seed=1, noise_variance=1e-3)
    assert m.noise_variance == 1e-3
    warm = optimize_hyperparameters(data, KernelSpec.rbf(), restarts=1, seed=2, noise_variance=1e-3, warm_start=m)
    assert warm.log_marginal_likelihood >= m.log_marginal_likelihood - 1e-6


def test_optimizer_preconditions(monkeypatch):
    with pytest.raises(ValueError):
        optimize_hyperparameters(Dataset([[0.0]], [1.0]), KernelSpec.rbf())
    data = Dataset([[0.0], [1.0]], [0.0, 1.0])
    with pytest.raises(ValueError):
        optimize_hyperparameters(data, KernelSpec.rbf(), restarts=0)
    monkeypatch.setattr(gp, "_neg_lml_and_grad", lambda theta, *a: (1e25, np.zeros_like(theta)))
    with pytest.raises(GPOptimizationError):
        optimize_hyperparameters(data, KernelSpec.rbf(), restarts=2)
