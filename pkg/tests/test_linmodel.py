import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penpath.errors import GuardError, ValidationError
from penpath.linmodel import (
    DesignDistribution,
    DesignSample,
    GlmFamily,
    NoiseSpec,
    TrueModel,
    design_stats,
    model_from_config,
    read_csv,
    simulate,
)


def test_zero_mean_noise_on_fixed_design():
    model = TrueModel(beta=[0.0], design=DesignDistribution.fixed([[1.0]]))
    assert simulate(model, 3, seed=1).y.shape == (3,)
    big = simulate(model, 10**6, seed=2)
    assert -0.01 <= big.y.mean() <= 0.01


def test_noiseless_identity_case():
    model = TrueModel(beta=[1.0], noise=NoiseSpec(sigma2=0.0, allow_degenerate=True), design=DesignDistribution.fixed([[1.0]]))
    assert np.array_equal(simulate(model, 2, seed=0).y, [1.0, 1.0])


def test_degenerate_noise_needs_opt_in():
    with pytest.raises(ValidationError):
        NoiseSpec(sigma2=0.0)


def test_simulate_is_bitwise_deterministic():
    model = TrueModel(beta=[1.0, -2.0], noise=NoiseSpec("laplace", 2.0))
    a = simulate(model, 50, seed=99)
    b = simulate(model, 50, seed=99)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert simulate(model, 50, seed=100).y.tobytes() != a.y.tobytes()


@pytest.mark.parametrize("n", [0, -3, 2.5])
def test_simulate_rejects_bad_sample_size(n):
    with pytest.raises(ValidationError):
        simulate(TrueModel(beta=[1.0]), n, seed=0)


def test_poisson_overflow_guard():
    model = TrueModel(beta=[40.0], design=DesignDistribution.fixed([[1.0]]), glm="poisson")
    with pytest.raises(GuardError):
        simulate(model, 3, seed=0)


def test_design_stats_examples():
    st_ = design_stats(DesignSample(np.eye(2), [0.0, 0.0]))
    assert np.array_equal(st_.c_n, np.diag([0.5, 0.5]))
    assert st_.max_row_norm_sq == 1.0
    rank1 = design_stats(DesignSample(np.ones((4, 2)), np.zeros(4)))
    assert np.array_equal(rank1.c_n, np.ones((2, 2)))
    assert rank1.singular
    assert abs(rank1.min_eigenvalue) <= 1e-12


def test_gram_matrix_law_of_large_numbers():
    sample = simulate(TrueModel(beta=[0.0, 0.0]), 10**5, seed=5)
    c = np.eye(2) * 3.0
    stats = design_stats(sample, c_limit=c)
    assert np.max(np.abs(stats.c_n - np.eye(2))) <= 0.05
    assert np.array_equal(stats.c_limit, c)


@pytest.mark.parametrize("kind", ["gaussian", "laplace", "uniform"])
def test_residual_variance_matches_sigma2(kind):
    model = TrueModel(beta=[1.0, 2.0], noise=NoiseSpec(kind, 2.5))
    s = simulate(model, 10**5, seed=11)
    resid = s.y - s.x @ model.beta
    assert abs(resid.var() / 2.5 - 1.0) <= 0.02


def test_density_at_zero_formulas():
    assert NoiseSpec("gaussian", 4.0).density_at_zero == pytest.approx(1 / math.sqrt(2 * math.pi * 4.0))
    assert NoiseSpec("laplace", 2.0).density_at_zero == pytest.approx(1 / (math.sqrt(2.0) * math.sqrt(2.0)))
    # uniform on [-a, a] has variance a^2 / 3
    a = 1.5
    assert NoiseSpec("uniform", a * a / 3).density_at_zero == pytest.approx(1 / (2 * a))


@pytest.mark.parametrize("kind", ["laplace", "uniform", "gaussian"])
def test_noise_median_zero(kind):
    eps = NoiseSpec(kind, 1.0).sample(np.random.default_rng(0), 10**5)
    assert abs(np.mean(np.sign(eps))) <= 0.01


def test_row_norm_over_n_decreases():
    model = TrueModel(beta=[0.0, 0.0, 0.0])
    vals = [design_stats(simulate(model, n, seed=3)).max_row_norm_sq / n for n in (100, 1000, 10000)]
    assert vals[0] > vals[1] > vals[2]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["logistic", "poisson", "gaussian"]), st.floats(min_value=-5, max_value=5))
def test_glm_derivatives(kind, theta):
    fam = GlmFamily(kind)
    h = 1e-5
    fd = (fam.log_partition(theta + h) - fam.log_partition(theta - h)) / (2 * h)
    assert abs(fd - fam.b_prime(theta)) <= 1e-6 * max(1.0, abs(float(fam.b_prime(theta))))
    assert fam.b_second(theta) >= 0


def test_gaussian_identity_alias():
    assert GlmFamily("gaussian-identity").kind == "gaussian"


def test_fixed_design_limit_gram():
    m = np.array([[1.0, 0.0], [1.0, 2.0]])
    d = DesignDistribution.fixed(m)
    assert np.array_equal(d.second_moment(), m.T @ m / 2)
    assert np.array_equal(d.sample(5, np.random.default_rng(0))[4], m[0])


def test_weighted_second_moment_quadrature():
    # E[b''(x^T beta) x x^T] against a large Monte Carlo average
    d = DesignDistribution.gaussian(2, [[1.0, 0.3], [0.3, 2.0]])
    fam = GlmFamily("logistic")
    beta = np.array([0.7, -0.4])
    x = d.sample(400_000, np.random.default_rng(1))
    w = fam.b_second(x @ beta)
    mc = (x * w[:, None]).T @ x / x.shape[0]
    assert np.max(np.abs(d.weighted_second_moment(fam.b_second, beta) - mc)) <= 5e-3


def test_sample_validation():
    with pytest.raises(ValidationError):
        DesignSample(np.ones((3, 1)), [1.0, 2.0])
    with pytest.raises(ValidationError):
        DesignSample(np.ones((2, 1)), [1.0, np.nan])
    with pytest.raises(ValidationError):
        TrueModel(beta=[1.0, 2.0], design=DesignDistribution.gaussian(3))


def test_read_csv(tmp_path):
    good = tmp_path / "d.csv"
    good.write_text("y,x1,x2\n1.5,1,0\n-2,0.5,3\n")
    s = read_csv(good)
    assert s.n == 2 and s.p == 2
    assert np.array_equal(s.y, [1.5, -2.0])
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("y,a\n1,2\n")
    with pytest.raises(ValidationError):
        read_csv(bad_header)
    nan = tmp_path / "n.csv"
    nan.write_text("y,x1\n1,nan\n")
    with pytest.raises(ValidationError):
        read_csv(nan)


def test_model_from_config():
    m = model_from_config({"beta": [1, 0], "noise": {"kind": "laplace", "sigma2": 2}, "design": {"kind": "gaussian"}})
    assert m.noise.kind == "laplace" and m.p == 2
    g = model_from_config({"beta": [0.5], "glm": "logistic"})
    assert g.glm.kind == "logistic"
