import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

from casmart import surprise as sp
from casmart.gp import Dataset, fit, predict
from casmart.kernels import KernelSpec, kernel_matrix


def kl_quadrature(p, q):
    """KL(p || q) for Gaussians given as (mean, std), by numerical integration."""
    lo = min(p[0] - 12 * p[1], q[0] - 12 * q[1])
    hi = max(p[0] + 12 * p[1], q[0] + 12 * q[1])
    f = lambda t: norm.pdf(t, *p) * (norm.logpdf(t, *p) - norm.logpdf(t, *q))
    return quad(f, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-12, points=[p[0], q[0]])[0]


def test_normal_helpers():
    assert sp.std_normal_cdf(0.0) == 0.5
    assert sp.std_normal_pdf(0.0) == pytest.approx(0.398942, abs=1e-6)
    area = quad(sp.std_normal_pdf, -np.inf, 1.96)[0]
    assert sp.std_normal_cdf(1.96) == pytest.approx(area, abs=1e-10)
    assert sp.std_normal_cdf(1.96) == pytest.approx(0.9750, abs=1e-4)
    assert sp.std_normal_ppf(0.975) == pytest.approx(1.959964, abs=1e-6)


def test_shannon_values():
    assert sp.shannon_surprise(0.0, 1.0, 0.0, 0.0) == pytest.approx(0.918939, abs=1e-6)
    assert sp.shannon_surprise(0.0, 0.6, 0.64, 3.0) == pytest.approx(5.418939, abs=1e-6)
    quad_term = lambda s: sp.shannon_surprise(0.0, s, 0.0, 1.0) - 0.5 * math.log(2 * math.pi * s * s)
    assert quad_term(2.0) < quad_term(0.5)
    with pytest.raises(sp.DegenerateDistributionError):
        sp.shannon_surprise(0.0, 0.0, 0.0, 1.0)


def test_bayesian_values():
    assert sp.bayesian_surprise((0.3, 1.2), (0.3, 1.2)) == 0.0
    assert sp.bayesian_surprise((0.0, 1.0), (1.0, 1.0)) == pytest.approx(0.5, abs=1e-12)
    assert sp.bayesian_surprise((0.0, 1.0), (0.0, 0.5)) == pytest.approx(0.318147, abs=1e-6)
    assert sp.bayesian_surprise((0.0, 1.0), (1.0, 1.0)) == pytest.approx(kl_quadrature((1.0, 1.0), (0.0, 1.0)), abs=1e-6)
    assert sp.bayesian_surprise((0.0, 1.0), (0.0, 0.5)) == pytest.approx(kl_quadrature((0.0, 0.5), (0.0, 1.0)), abs=1e-6)


def test_flat_bayesian_values():
    flat = sp.FlatPrior()
    assert sp.flat_bayesian_surprise((0.0, 10.0), flat) == 0.0
    assert sp.flat_bayesian_surprise((0.0, 1.0), flat) == pytest.approx(1.807585, abs=1e-6)
    assert sp.flat_bayesian_surprise((0.0, 1.0), flat) == pytest.approx(kl_quadrature((0.0, 1.0), (0.0, 10.0)), abs=1e-6)


def test_flat_bayesian_increases_as_posterior_sharpens():
    flat = sp.FlatPrior()
    for s in [0.01, 0.1, 0.5, 1.0, 2.0]:
        h = 1e-6 * s
        d = (sp.flat_bayesian_surprise((0.4, s + h), flat) - sp.flat_bayesian_surprise((0.4, s - h), flat)) / (2 * h)
        assert d < 0


def test_confidence_correction_values():
    assert sp.confidence_correction(1.0) == pytest.approx(-1.418939, abs=1e-6)
    assert sp.confidence_correction(1.0 / math.sqrt(2 * math.pi * math.e)) == pytest.approx(0.0, abs=1e-12)
    assert sp.confidence_correction(3.0) < sp.confidence_correction(2.0)
    assert sp.confidence_correction(2.0) == pytest.approx(-norm(0, 2.0).entropy(), abs=1e-12)


def test_flat_adjustment_values():
    assert sp.flat_adjustment(sp.FlatPrior(0.0, 10.0)) == pytest.approx(0.693147, abs=1e-6)
    assert sp.flat_adjustment(sp.FlatPrior(10.0, 10.0)) == pytest.approx(1.84102, abs=1e-5)
    assert sp.flat_adjustment(sp.FlatPrior(-10.0, 10.0)) == pytest.approx(0.17275, abs=1e-5)


def _fixture():
    X = np.array([[0.0], [0.3], [1.0]])
    y = np.array([0.2, 1.0, -0.5])
    return X, y, fit(Dataset(X, y), KernelSpec.rbf(1.0, 1.0), 0.01)


def _reference_breakdown(X, y, noise, x, yq, flat_sd=10.0):
    """Independent dense-algebra implementation of every surprise term."""
    k = KernelSpec.rbf(1.0, 1.0)

    def latent(Xt, yt, xq):
        A = np.linalg.inv(kernel_matrix(k, Xt, Xt) + noise * np.eye(len(Xt)))
        ks = kernel_matrix(k, Xt, xq)[:, 0]
        return ks @ A @ yt, math.sqrt(1.0 - ks @ A @ ks)

    mu, sd = latent(X, y, x)
    mu_post, sd_post = latent(np.vstack([X, x]), np.append(y, yq), x)
    s = -norm.logpdf(yq, mu, math.sqrt(sd**2 + noise))
    kl = kl_quadrature((mu_post, sd_post), (0.0, flat_sd))
    c = -norm(0, sd).entropy()
    a = -math.log(norm.sf(0.0))
    return s, kl, c, a, s + kl + c - a


def test_breakdown_matches_reference():
    X, y, m = _fixture()
    b = sp.breakdown(m, [0.5], 2.0, sp.FlatPrior())
    ref = _reference_breakdown(X, y, 0.01, np.array([[0.5]]), 2.0)
    got = (b.shannon, b.bayesian_flat, b.confidence_correction, b.adjustment, b.cas)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-8)
    assert b.cas == pytest.approx(b.shannon + b.bayesian_flat + b.confidence_correction - b.adjustment, abs=1e-12)
    assert b.cas == sp.cas(m, [0.5], 2.0, sp.FlatPrior()).cas


def test_cas_grows_with_residual():
    _, _, m = _fixture()
    p = predict(m, [[0.5]])
    mu, s = p.mean[0], math.sqrt(p.var[0] + m.noise_variance)
    flat = sp.FlatPrior()
    at_mean = sp.cas(m, [0.5], mu, flat).cas
    assert at_mean < sp.cas(m, [0.5], mu + 3 * s, flat).cas
    assert at_mean < sp.cas(m, [0.5], mu - 3 * s, flat).cas


def test_threshold_decisions():
    _, _, m = _fixture()
    p = predict(m, [[0.5]])
    mu, s = p.mean[0], math.sqrt(p.var[0] + m.noise_variance)
    flat = sp.FlatPrior()
    _, k, flag = sp.evaluate(m, [0.5], mu, flat)
    assert not flag and sp.cas(m, [0.5], mu, flat).cas < k
    for y in (mu + 3 * s, mu - 3 * s):
        b, k, flag = sp.evaluate(m, [0.5], y, flat)
        assert flag and b.cas > k
        assert k == sp.cas_threshold(m, [0.5], flat, 0.95, y=y)


def test_measure_validation():
    _, _, m = _fixture()
    with pytest.raises(ValueError):
        sp.evaluate(m, [0.5], 1.0, sp.FlatPrior(), measure="entropy")
    with pytest.raises(ValueError):
        sp.breakdown(m, [0.5], math.inf, sp.FlatPrior())
    with pytest.raises(ValueError):
        sp.credible_z(1.0)
    with pytest.raises(ValueError):
        sp.SurpriseBreakdown(0, 0, 0, 0, 0).value("nope")


def random_fixture(seed):
    r = np.random.default_rng(seed)
    d = int(r.integers(1, 4))
    n = int(r.integers(2, 9))
    X = r.random((n, d))
    kernel = [KernelSpec.rbf(r.uniform(0.2, 3), r.uniform(0.1, 1.5)),
              KernelSpec.matern(2.5, r.uniform(0.2, 3), r.uniform(0.1, 1.5)),
              KernelSpec.rq(r.uniform(0.2, 3), r.uniform(0.1, 1.5), r.uniform(0.3, 4))][r.integers(3)]
    m = fit(Dataset(X, r.normal(0, 1.5, n)), kernel, r.uniform(1e-4, 0.2))
    x = r.random(d)
    p = predict(m, x[None, :])
    s_tot = math.sqrt(p.var[0] + m.noise_variance)
    y = p.mean[0] + r.uniform(-4, 4) * s_tot
    level = r.uniform(0.5, 0.99)
    return m, x, y, level, p.mean[0], s_tot


@given(st.integers(0, 2**32 - 1), st.sampled_from(sp.MEASURES))
def test_flag_equals_interval_test(seed, measure):
    m, x, y, level, mu, s_tot = random_fixture(seed)
    z = sp.credible_z(level)
    _, _, flag = sp.evaluate(m, x, y, sp.FlatPrior(), level, measure)
    if abs(abs(y - mu) - z * s_tot) > 1e-9 * s_tot:
        assert flag == (abs(y - mu) > z * s_tot)


@given(st.integers(0, 2**32 - 1))
def test_breakdown_components_sum(seed):
    m, x, y, *_ = random_fixture(seed)
    b = sp.breakdown(m, x, y, sp.FlatPrior())
    assert b.cas == pytest.approx(b.shannon + b.bayesian_flat + b.confidence_correction - b.adjustment, abs=1e-10)
    assert b.bayesian >= -1e-12 and b.bayesian_flat >= -1e-12


def test_flat_prior_validation():
    with pytest.raises(ValueError):
        sp.FlatPrior(0.0, 0.0)
    assert sp.FlatPrior().dominates(1.0)
    assert not sp.FlatPrior().dominates(20.0)
