import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penpath.contrasts import (
    ContrastSpec,
    eval_contrast,
    eval_gradient,
    eval_hessian,
    fd_hessian,
    limit_curvature,
    simulated_curvature,
)
from penpath.errors import GuardError, UnsupportedModelError, ValidationError
from penpath.linmodel import DesignDistribution, DesignSample, NoiseSpec, TrueModel, simulate

PAIR = DesignSample(np.ones((2, 1)), [1.0, -1.0])


def test_contrast_values():
    assert eval_contrast(ContrastSpec.least_squares(), PAIR, [0.0]) == 1.0
    assert eval_contrast(ContrastSpec.lad(), PAIR, [0.0]) == 1.0
    one = DesignSample(np.ones((1, 1)), [1.0])
    assert eval_contrast(ContrastSpec.glm("logistic"), one, [0.0]) == pytest.approx(math.log(2.0), abs=1e-15)


def test_gradient_values():
    ones = DesignSample(np.ones((2, 1)), [1.0, 1.0])
    assert eval_gradient(ContrastSpec.least_squares(), ones, [0.0])[0] == pytest.approx(-2.0)
    assert eval_gradient(ContrastSpec.lad(), PAIR, [0.0])[0] == 0.0
    one = DesignSample(np.ones((1, 1)), [1.0])
    assert eval_gradient(ContrastSpec.glm("logistic"), one, [0.0])[0] == pytest.approx(-0.5)


def test_lad_subgradient_sign_convention():
    # residuals (0, 2): sgn(0) = 0 so only the second row contributes
    s = DesignSample(np.ones((2, 1)), [1.0, 3.0])
    assert eval_gradient(ContrastSpec.lad(), s, [1.0])[0] == -0.5


def test_parse_and_smoothness():
    assert ContrastSpec.parse("ls").kind == "least_squares"
    assert ContrastSpec.parse("poisson").family.kind == "poisson"
    assert not ContrastSpec.lad().smooth and ContrastSpec.least_squares().smooth
    with pytest.raises(ValidationError):
        ContrastSpec.parse("huber")
    with pytest.raises(ValidationError):
        ContrastSpec("glm")


def _glm_sample(kind, seed):
    model = TrueModel(beta=[0.4, -0.3, 0.2], glm=kind)
    return simulate(model, 200, seed)


@pytest.mark.parametrize(
    "spec,sample",
    [
        (ContrastSpec.least_squares(), simulate(TrueModel(beta=[1.0, 0.0, -1.0]), 200, 1)),
        (ContrastSpec.glm("logistic"), _glm_sample("logistic", 2)),
        (ContrastSpec.glm("poisson"), _glm_sample("poisson", 3)),
        (ContrastSpec.glm("gaussian"), _glm_sample("gaussian", 4)),
    ],
)
def test_gradient_matches_central_differences(spec, sample):
    gen = np.random.default_rng(0)
    h = 1e-6
    for _ in range(20):
        phi = gen.standard_normal(3)
        analytic = eval_gradient(spec, sample, phi)
        fd = np.array(
            [(eval_contrast(spec, sample, phi + h * e) - eval_contrast(spec, sample, phi - h * e)) / (2 * h) for e in np.eye(3)]
        )
        assert np.max(np.abs(analytic - fd)) <= 1e-5 * (1 + np.max(np.abs(analytic)))
        fd_h = fd_hessian(lambda z: eval_contrast(spec, sample, z), phi, 1e-4)
        assert np.max(np.abs(eval_hessian(spec, sample, phi) - fd_h)) <= 1e-4


@pytest.mark.parametrize("spec", [ContrastSpec.least_squares(), ContrastSpec.lad(), ContrastSpec.glm("logistic")])
def test_midpoint_convexity(spec):
    sample = simulate(TrueModel(beta=[1.0, -1.0]), 60, 8)
    if spec.kind == "glm":
        sample = DesignSample(sample.x, (sample.y > 0).astype(float))
    gen = np.random.default_rng(1)
    for _ in range(100):
        a, b = gen.standard_normal((2, 2)) * 3
        mid = eval_contrast(spec, sample, (a + b) / 2)
        assert mid <= (eval_contrast(spec, sample, a) + eval_contrast(spec, sample, b)) / 2 + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_least_squares_translation_identity(seed):
    model = TrueModel(beta=[0.5, -1.0])
    s = simulate(model, 30, seed)
    phi = np.random.default_rng(seed).standard_normal(2) * 2
    eps = s.y - s.x @ model.beta
    d = phi - model.beta
    c_n = s.x.T @ s.x / s.n
    lhs = eval_contrast(ContrastSpec.least_squares(), s, phi) - eval_contrast(ContrastSpec.least_squares(), s, model.beta)
    rhs = d @ c_n @ d - 2.0 / s.n * eps @ s.x @ d
    assert abs(lhs - rhs) <= 1e-10


def test_poisson_contrast_overflow_guard():
    s = DesignSample(np.ones((1, 1)), [1.0])
    with pytest.raises(GuardError):
        eval_contrast(ContrastSpec.glm("poisson"), s, [31.0])


def test_limit_curvature_examples():
    lap = TrueModel(beta=[1.0, 0.0], noise=NoiseSpec("laplace", 2.0))  # f(0) = 1/2
    info = limit_curvature(ContrastSpec.lad(), lap)
    assert np.allclose(info.fisher_like, np.eye(2), atol=1e-15)
    assert np.allclose(info.score_cov, np.eye(2))
    logit = TrueModel(beta=[0.0], design=DesignDistribution.fixed([[1.0]]), glm="logistic")
    assert limit_curvature(ContrastSpec.glm("logistic"), logit).fisher_like[0, 0] == pytest.approx(0.25)


def test_least_squares_curvature_convention():
    model = TrueModel(beta=[1.0, 2.0], noise=NoiseSpec(sigma2=3.0), design=DesignDistribution.gaussian(2, [[2.0, 0.5], [0.5, 1.0]]))
    info = limit_curvature(ContrastSpec.least_squares(), model)
    c = model.design.second_moment()
    assert np.allclose(info.fisher_like, 2 * c)
    assert np.allclose(info.score_cov, 4 * 3.0 * c)


def test_lad_gaussian_curvature_by_simulation():
    model = TrueModel(beta=[0.0], design=DesignDistribution.fixed([[1.0]]))
    fd = simulated_curvature(ContrastSpec.lad(), model, 10**6, seed=3)[0, 0]
    assert limit_curvature(ContrastSpec.lad(), model).fisher_like[0, 0] == pytest.approx(2 / math.sqrt(2 * math.pi))
    assert abs(fd / (2 / math.sqrt(2 * math.pi)) - 1) <= 0.02


@pytest.mark.parametrize(
    "spec,model",
    [
        (ContrastSpec.least_squares(), TrueModel(beta=[1.0, -0.5])),
        (ContrastSpec.lad(), TrueModel(beta=[1.0, -0.5], noise=NoiseSpec("laplace"))),
        (ContrastSpec.glm("logistic"), TrueModel(beta=[1.0, -0.5], glm="logistic")),
        (ContrastSpec.glm("poisson"), TrueModel(beta=[0.3, -0.5], glm="poisson")),
    ],
)
def test_score_is_centered_with_matching_covariance(spec, model):
    info = limit_curvature(spec, model)
    s = simulate(model, 10**5, seed=17)
    delta = info.score(s.x, s.y)
    se = delta.std(axis=0) / math.sqrt(s.n)
    assert np.all(np.abs(delta.mean(axis=0)) <= 3 * se)
    emp = delta.T @ delta / s.n
    assert np.max(np.abs(emp - info.score_cov)) <= 0.05 * np.max(np.abs(info.score_cov))
    assert np.allclose(info.fisher_like, info.fisher_like.T)
    assert np.linalg.eigvalsh(info.fisher_like).min() > 0


def test_unsupported_pairs():
    with pytest.raises(UnsupportedModelError):
        limit_curvature(ContrastSpec.least_squares(), TrueModel(beta=[1.0], glm="logistic"))
    with pytest.raises(UnsupportedModelError):
        limit_curvature(ContrastSpec.glm("poisson"), TrueModel(beta=[1.0], glm="logistic"))


def test_fd_hessian_exact_on_quadratics():
    a = np.array([[2.0, 0.5], [0.5, 1.0]])
    h = fd_hessian(lambda z: z @ a @ z + 3 * z[0], np.array([0.3, -0.2]), 0.5)
    assert np.allclose(h, 2 * a, atol=1e-12)
