import numpy as np
import pytest
from conftest import normal_pdf

from fsrdiag import (
    Affine,
    ConditionalProblem,
    DomainError,
    GaussianPrior,
    MeasurementModel,
    NoiseSchedule,
    SamplerDivergenceError,
    SamplerSpec,
    UnsupportedOperationError,
    ensemble_density,
    make_operator,
    run_sampler,
)
from fsrdiag.experiments.targets import make_prior
from fsrdiag.metrics import tv_distance
from fsrdiag.samplers import (
    METHODS,
    approx_likelihood_score,
    approx_log_likelihood,
    pgdm_default_r2,
    reverse_sde_step,
)


def meas(op="identity", sigma=0.3):
    return MeasurementModel(make_operator(op), sigma)


def fd_check(spec, prior, m, y, schedule, t, x, h=1e-5):
    s = approx_likelihood_score(spec, prior, m, y, t, x, schedule)
    f = lambda z: approx_log_likelihood(spec, prior, m, y, t, z, schedule)  # noqa: E731
    fd = (f(x + h) - f(x - h)) / (2 * h)
    np.testing.assert_allclose(s, fd, rtol=1e-5, atol=1e-7)


def test_pgdm_default_r2(schedule):
    for t in [0.01, 0.4, 1.0]:
        assert pgdm_default_r2(schedule, t) == pytest.approx(1 - schedule.alpha_bar(t), rel=1e-12)


@pytest.mark.parametrize("method", ["sigma_dps", "zeta_dps"])
@pytest.mark.parametrize("prior,op,y", [("bi_asym", "cubic", -1.1), ("tri_equal", "sine", 0.25), ("wide", "quadratic", 1.0)])
def test_dirac_scores_are_gradients(schedule, method, prior, op, y):
    p = make_prior(prior)
    x = np.linspace(-2.5, 2.5, 11)
    for t in [0.1, 0.5, 0.9]:
        fd_check(SamplerSpec(method, zeta=0.2), p, meas(op), y, schedule, t, x)


@pytest.mark.parametrize("prior", ["bi_asym", "pent_asym", "narrow"])
def test_pgdm_score_is_gradient(schedule, prior):
    p = make_prior(prior)
    x = np.linspace(-2.5, 2.5, 11)
    for t in [0.1, 0.5, 0.9]:
        fd_check(SamplerSpec("pgdm"), p, meas("gain_shift"), 0.4, schedule, t, x)
        fd_check(SamplerSpec("pgdm", r_schedule=lambda t: 0.3), p, meas("gain"), 0.4, schedule, t, x)


@pytest.mark.parametrize("prior", ["narrow", "wide"])
def test_tmpd_score_is_gradient_for_gaussian(schedule, prior):
    p = make_prior(prior)
    x = np.linspace(-2.5, 2.5, 11)
    for t in [0.1, 0.5, 0.9]:
        fd_check(SamplerSpec("tmpd"), p, meas("gain_shift"), -2.0, schedule, t, x)


@pytest.mark.parametrize("op", ["identity", "gain_shift", "gain"])
def test_tmpd_exact_for_gaussian(schedule, rng, op):
    p = GaussianPrior(0.6, 0.5)
    m = meas(op)
    cp = ConditionalProblem(p, m, 1.5, schedule)
    for _ in range(30):
        t, x = rng.uniform(0.01, 1.0), rng.uniform(-3, 3)
        s = approx_likelihood_score(SamplerSpec("tmpd"), p, m, 1.5, t, x, schedule)
        assert s == pytest.approx(cp.likelihood_score(t, x), abs=1e-10)


def test_zeta_sigma_ratio(schedule):
    p = make_prior("bi_asym")
    m = meas("cubic", 0.3)
    x = np.linspace(-2, 2, 9)
    t, zeta, y = 0.4, 0.17, 0.9
    a = approx_likelihood_score(SamplerSpec("sigma_dps"), p, m, y, t, x, schedule)
    b = approx_likelihood_score(SamplerSpec("zeta_dps", zeta=zeta), p, m, y, t, x, schedule)
    mean = p.denoiser_moments(schedule, t, x).mean
    resid = np.abs(y - mean**3)
    assert np.all(np.sign(a) == np.sign(b))
    np.testing.assert_allclose(b / a, zeta * 2 * 0.09 / resid, rtol=1e-10)


@pytest.mark.parametrize("method", METHODS)
def test_zero_residual_gives_zero_score(schedule, method):
    p = make_prior("narrow")
    m = meas("gain_shift")
    t, x = 0.3, 0.8
    y = m.apply(p.denoiser_moments(schedule, t, x).mean)
    s = approx_likelihood_score(SamplerSpec(method), p, m, y, t, x, schedule)
    assert abs(s) < 1e-14


def test_multivariate_scores(schedule):
    p = GaussianPrior([0.0, 1.0], [[1.0, 0.2], [0.2, 0.5]])
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    m = MeasurementModel(Affine(A, [0.1, -0.2]), 0.4)
    cp = ConditionalProblem(p, m, [0.3, 0.5], schedule)
    x = np.array([[0.2, -0.1], [1.0, 0.4]])
    s = approx_likelihood_score(SamplerSpec("tmpd"), p, m, [0.3, 0.5], 0.3, x, schedule)
    np.testing.assert_allclose(s, cp.likelihood_score(0.3, x), atol=1e-10)
    for method in ["sigma_dps", "pgdm"]:
        spec = SamplerSpec(method)
        g = approx_likelihood_score(spec, p, m, [0.3, 0.5], 0.3, x, schedule)
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            f = lambda z: approx_log_likelihood(spec, p, m, [0.3, 0.5], 0.3, z, schedule)  # noqa: E731
            np.testing.assert_allclose(g[:, i], (f(x + e) - f(x - e)) / (2 * h), rtol=1e-6)


def test_affine_only_methods_reject_nonlinear_operator(schedule):
    p = make_prior("wide")
    for method in ["pgdm", "tmpd"]:
        with pytest.raises(UnsupportedOperationError):
            approx_likelihood_score(SamplerSpec(method), p, meas("cubic"), 1.0, 0.3, 0.1, schedule)
        with pytest.raises(UnsupportedOperationError):
            run_sampler(SamplerSpec(method, K=10, n_steps=3), p, meas("sine"), 0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SamplerSpec("dps")
    with pytest.raises(DomainError):
        SamplerSpec("tmpd", t_end=0.0)
    with pytest.raises(ValueError):
        SamplerSpec("zeta_dps", zeta=0.0)
    spec = SamplerSpec("tmpd", n_steps=4, t_end=0.2)
    np.testing.assert_allclose(spec.time_grid(), [1.0, 0.8, 0.6, 0.4, 0.2])


def test_reverse_step_formula(schedule):
    x, t, dt = np.array([0.5]), 0.6, 0.01
    b = schedule.beta(t)
    out = reverse_sde_step(x, t, dt, np.array([-0.2]), schedule, np.array([1.0]))
    assert out[0] == pytest.approx(0.5 + (0.25 * b - 0.2 * b) * dt + np.sqrt(b * dt))
    with pytest.raises(DomainError):
        reverse_sde_step(x, t, 0.0, x, schedule, 0.0)


def test_determinism_and_noise_free_mode():
    p, m = make_prior("bi_asym"), meas("identity", 0.2)
    spec = SamplerSpec("sigma_dps", K=500, n_steps=50, seed=7)
    a = run_sampler(spec, p, m, 0.3)
    b = run_sampler(spec, p, m, 0.3)
    np.testing.assert_array_equal(a.states, b.states)
    c = run_sampler(SamplerSpec("sigma_dps", K=500, n_steps=50, seed=8), p, m, 0.3)
    assert not np.array_equal(a.states, c.states)
    d1 = run_sampler(spec, p, m, 0.3, noise=False)
    d2 = run_sampler(spec, p, m, 0.3, noise=False)
    np.testing.assert_array_equal(d1.states, d2.states)
    assert a.states.shape == (500, 51) and a.times[0] == 1.0


def test_record_subset():
    p, m = make_prior("narrow"), meas()
    spec = SamplerSpec("tmpd", K=200, n_steps=20, seed=1)
    full = run_sampler(spec, p, m, 0.5)
    term = run_sampler(spec, p, m, 0.5, record="terminal")
    np.testing.assert_array_equal(term.terminal(), full.terminal())
    some = run_sampler(spec, p, m, 0.5, record=[0, 10])
    np.testing.assert_array_equal(some.states, full.states[:, [0, 10]])


def test_stationary_standard_normal():
    p = make_prior("narrow")
    spec = SamplerSpec("unconditional", K=10**5, n_steps=399, seed=3)
    ens = run_sampler(spec, p, meas(), 0.0, score_fn=lambda t, x: -x, record="terminal")
    x = np.linspace(-5, 5, 201)
    f = ensemble_density(ens, x)
    assert tv_distance(f.values[0], normal_pdf(x, 0.0, 1.0), x) <= 0.02


def _within_3se(samples, mean, var):
    k = samples.size
    assert abs(samples.mean() - mean) <= 3 * np.sqrt(var / k)
    assert abs(samples.var() - var) <= 3 * var * np.sqrt(2.0 / (k - 1))


def test_true_posterior_score_recovers_posterior(schedule):
    cp = ConditionalProblem(make_prior("wide"), meas("gain_shift"), 0.5, schedule)
    spec = SamplerSpec("unconditional", K=10**5, seed=4)
    ens = run_sampler(spec, cp.prior, cp.measurement, 0.5, score_fn=lambda t, x: cp.posterior(t).score(x),
                      record="terminal")
    post = cp.posterior(spec.t_end)
    _within_3se(ens.terminal(), post.means[0, 0], post.covs[0, 0, 0])


def test_unconditional_ablation_matches_prior(schedule):
    p = make_prior("narrow")
    spec = SamplerSpec("unconditional", K=10**5, seed=5)
    ens = run_sampler(spec, p, meas(), 0.0, record="terminal")
    mix = p.marginal(schedule, spec.t_end)
    _within_3se(ens.terminal(), mix.means[0, 0], mix.covs[0, 0, 0])


def test_tmpd_ensemble_tv(schedule):
    cp = ConditionalProblem(make_prior("narrow"), meas("identity"), 1.5, schedule)
    spec = SamplerSpec("tmpd", K=10**5, seed=6)
    ens = run_sampler(spec, cp.prior, cp.measurement, 1.5, record="terminal")
    x = np.linspace(-2, 3, 301)
    f = ensemble_density(ens, x)
    assert tv_distance(f.values[0], cp.posterior_density(spec.t_end, x), x) <= 0.03


def test_divergence_raises():
    p = make_prior("narrow")
    spec = SamplerSpec("unconditional", K=100, n_steps=10)

    def blowup(t, x):
        out = -x.copy()
        out[: x.shape[0] // 2] = np.inf
        return out

    with pytest.raises(SamplerDivergenceError) as info:
        run_sampler(spec, p, meas(), 0.0, score_fn=blowup)
    assert info.value.first_step == 0


def test_few_divergences_are_tolerated():
    p = make_prior("narrow")
    spec = SamplerSpec("unconditional", K=1000, n_steps=10)

    def one_bad(t, x):
        # poisons the first live trajectory at every step: 10 of 1000 in total
        out = -x.copy()
        out[:1] = np.nan
        return out

    ens = run_sampler(spec, p, meas(), 0.0, score_fn=one_bad)
    assert ens.n_diverged == 10 and ens.terminal().size == 990


def test_pgdm_with_custom_schedule(schedule):
    p = make_prior("bi_asym")
    a = approx_likelihood_score(SamplerSpec("pgdm", r_schedule=lambda t: 0.0), p, meas(), 0.3, 0.5, 0.2, schedule)
    b = approx_likelihood_score(SamplerSpec("sigma_dps"), p, meas(), 0.3, 0.5, 0.2, schedule)
    assert a == pytest.approx(b, rel=1e-12)


def test_custom_noise_schedule_used():
    p = make_prior("narrow")
    spec = SamplerSpec("tmpd", K=100, n_steps=10, seed=0)
    a = run_sampler(spec, p, meas(), 0.5, NoiseSchedule(0.1, 20.0))
    b = run_sampler(spec, p, meas(), 0.5, NoiseSchedule(0.1, 10.0))
    assert not np.allclose(a.terminal(), b.terminal())
