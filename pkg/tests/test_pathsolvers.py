import json

import numpy as np
import pytest

from penpath import checks, rng
from penpath.contrasts import ContrastSpec
from penpath.errors import CostLimitError, SolverError, ValidationError
from penpath.linmodel import DesignSample
from penpath.pathsolvers import (
    TGrid,
    grid_path,
    l0_path,
    lasso_path,
    lower_envelope,
    minimize_on_support,
    penalized_objective,
    ridge_path,
    write_path_csv,
)
from penpath.penalties import PenaltySpec

LS = ContrastSpec.least_squares()


def test_tgrid_validation():
    assert len(TGrid.uniform(2.0, 5)) == 5
    assert TGrid.uniform(2.0, 5).t_max == 2.0
    for bad in ([], [1.0, 1.0], [2.0, 1.0], [-1.0, 0.0], [0.0, np.inf]):
        with pytest.raises(ValidationError):
            TGrid(np.array(bad))
    with pytest.raises(ValidationError):
        TGrid.uniform(0.0, 3)


def test_tgrid_is_read_only():
    g = TGrid.uniform(1.0, 3)
    with pytest.raises(ValueError):
        g.points[0] = 5.0


def test_lasso_toy(toy_sample):
    sol = lasso_path(toy_sample, tgrid=TGrid(np.array([0.0, 2.0, 4.0, 5.0])))
    assert sol.coefficients[:, 0].tolist() == pytest.approx([1.0, 0.5, 0.0, 0.0], abs=1e-14)
    assert sol.diagnostics["lambda_n"] == 0.5
    assert sol.diagnostics["t_zero"] == pytest.approx(4.0)
    assert sol.coefficients[-1, 0] == 0.0


def test_lasso_unpenalized_is_least_squares():
    s = checks.random_instance(5, 3, 40)
    sol = lasso_path(s, tgrid=TGrid(np.array([0.0])))
    ols = np.linalg.solve(s.x.T @ s.x, s.x.T @ s.y)
    assert np.allclose(sol.coefficients[0], ols, atol=1e-12)


def test_lasso_exact_path_ends_at_t_zero():
    s = checks.random_instance(6, 3, 40)
    sol = lasso_path(s)
    assert sol.tgrid.t_max == pytest.approx(sol.diagnostics["t_zero"])
    assert np.all(sol.coefficients[-1] == 0.0)
    assert np.all(sol.kkt_residuals <= 1e-10)


def test_lasso_singular_design():
    s = DesignSample(np.ones((5, 2)), np.arange(5.0))
    with pytest.raises(ValidationError, match="ridge"):
        lasso_path(s)


def test_ridge_examples(toy_sample):
    sol = ridge_path(toy_sample, tgrid=TGrid(np.array([0.0, 2.0, 1e6])))
    assert sol.coefficients[0, 0] == pytest.approx(1.0)
    assert sol.coefficients[1, 0] == pytest.approx(0.5)
    bound = abs(toy_sample.y.mean()) / (1e6 * 0.5)
    assert abs(sol.coefficients[2, 0]) <= bound


def test_ridge_requires_positive_weight_for_singular_design():
    s = DesignSample(np.ones((5, 2)), np.arange(5.0))
    with pytest.raises(ValidationError):
        ridge_path(s, tgrid=TGrid(np.array([0.0, 1.0])))
    assert np.all(np.isfinite(ridge_path(s, tgrid=TGrid(np.array([1.0]))).coefficients))


def test_ridge_agrees_with_grid_solver():
    s = checks.random_instance(7, 2, 30)
    g = TGrid.uniform(5.0, 11)
    a = ridge_path(s, tgrid=g)
    b = grid_path(LS, PenaltySpec(2, s.n), s, g, tol=1e-11)
    assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-8


def test_grid_vs_lasso_random_p2():
    s = checks.random_instance(8, 2, 30)
    g = TGrid.uniform(1.2 * lasso_path(s).diagnostics["t_zero"], 21)
    a = lasso_path(s, tgrid=g)
    b = grid_path(LS, PenaltySpec(1, s.n), s, g)
    assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-6


def test_lad_median():
    s = DesignSample(np.ones((3, 1)), [1.0, 2.0, 3.0])
    sol = grid_path(ContrastSpec.lad(), PenaltySpec(1, 3), s, TGrid(np.array([0.0])))
    assert sol.coefficients[0, 0] == pytest.approx(2.0, abs=1e-8)


def test_separable_logistic():
    s = DesignSample(np.array([[1.0], [2.0], [-1.0], [-2.0]]), [1.0, 1.0, 0.0, 0.0])
    logit = ContrastSpec.glm("logistic")
    with pytest.raises(SolverError, match="not attained"):
        grid_path(logit, PenaltySpec(1, s.n), s, TGrid(np.array([0.0])))
    sol = grid_path(logit, PenaltySpec(1, s.n), s, TGrid(np.array([0.5])), tol=1e-8)
    assert np.all(np.isfinite(sol.coefficients)) and sol.kkt_residuals[0] <= 1e-8


def test_grid_path_rejects_other_exponents():
    s = checks.random_instance(9, 1, 10)
    with pytest.raises(ValidationError):
        grid_path(LS, PenaltySpec(0, s.n), s, TGrid.uniform(1.0, 3))
    with pytest.raises(ValidationError):
        grid_path(LS, PenaltySpec(1, s.n), s, TGrid.uniform(1.0, 3), tol=0.0)


def test_l0_toy():
    toy_sample = DesignSample(np.ones((4, 1)), np.ones(4))
    sol = l0_path(LS, toy_sample, 6.0, tgrid=TGrid(np.array([0.0, 3.9, 4.0, 4.1, 6.0])))
    assert sol.diagnostics["submodel_values"] == pytest.approx([1.0, 0.0], abs=1e-15)
    assert sol.coefficients[:, 0].tolist() == pytest.approx([1.0, 1.0, 0.0, 0.0, 0.0])
    exact = l0_path(LS, toy_sample, 6.0)
    assert exact.breakpoints.tolist() == pytest.approx([4.0])
    (tie,) = exact.diagnostics["ties"]
    assert tie["support_before"] == [0] and tie["support_after"] == []
    assert abs(tie["objective_gap"]) <= 1e-10


def test_l0_aic_solution(toy_sample):
    assert l0_path(LS, toy_sample, 6.0).diagnostics["aic"] == pytest.approx([1.0])


@pytest.mark.parametrize("seed", range(20))
def test_l0_support_nonincreasing_and_ties(seed):
    p = 1 + seed % 4
    s = checks.random_instance(rng.mix64(30, seed), p, 30)
    sol = l0_path(LS, s, 50.0, tgrid=TGrid.uniform(50.0, 101))
    assert np.all(np.diff(sol.support_sizes) <= 0)
    exact = l0_path(LS, s, 50.0)
    assert all(abs(t["objective_gap"]) <= 1e-10 for t in exact.diagnostics["ties"])
    full = np.linalg.lstsq(s.x, s.y, rcond=None)[0]
    assert np.allclose(sol.coefficients[0], full, atol=1e-10)


def test_l0_cost_guard():
    s = DesignSample(np.eye(20)[:, :16] + 1.0, np.arange(20.0))
    with pytest.raises(CostLimitError, match="2\\^16"):
        l0_path(LS, s, 1.0)


def test_lower_envelope_ties_prefer_smaller_slope():
    bps, active = lower_envelope([2.0, 1.0, 0.0], [0.0, 1.0, 2.0], 10.0)
    # all three lines meet at t = 1
    assert bps.tolist() == [1.0] and active == [2, 0]


def test_minimize_on_support_keeps_exact_zeros():
    s = checks.random_instance(10, 3, 30)
    phi, val, res = minimize_on_support(LS, s, [0, 2])
    assert phi[1] == 0.0 and res <= 1e-10


@pytest.mark.parametrize(
    "contrast,gamma", [(LS, 1), (LS, 2), (ContrastSpec.lad(), 1), (ContrastSpec.lad(), 2), (ContrastSpec.glm("poisson"), 1)]
)
def test_near_minimizer_certificate(contrast, gamma):
    s = checks.random_instance(11, 2, 40)
    if contrast.kind == "glm":
        s = DesignSample(s.x, np.round(np.abs(s.y)))
    tol = 1e-8
    sol = grid_path(contrast, PenaltySpec(gamma, s.n), s, TGrid.uniform(4.0, 9), tol)
    assert np.all(sol.kkt_residuals <= tol)
    gen = np.random.default_rng(0)
    pen = PenaltySpec(gamma, s.n)
    for t, b, obj in zip(sol.tgrid.points, sol.coefficients, sol.objective_values):
        assert obj == pytest.approx(penalized_objective(contrast, pen, s, b, t), abs=1e-14)
        for probe in b + gen.standard_normal((10, 2)) * gen.choice([1e-4, 1e-2, 1.0], size=(10, 1)):
            assert obj <= penalized_objective(contrast, pen, s, probe, t) + 2 * tol


@pytest.mark.slow
def test_homotopy_matches_grid_solver_on_random_instances():
    worst = 0.0
    for i in range(50):
        s = checks.random_instance(rng.mix64(31, i), 1 + i % 3, 30)
        g = TGrid.uniform(1.1 * lasso_path(s).diagnostics["t_zero"], 21)
        a = lasso_path(s, tgrid=g).coefficients
        b = grid_path(LS, PenaltySpec(1, s.n), s, g).coefficients
        worst = max(worst, float(np.max(np.abs(a - b))))
    assert worst <= 1e-5


def test_lasso_path_continuous_at_breakpoints():
    for seed in range(10):
        s = checks.random_instance(rng.mix64(32, seed), 3, 30)
        exact = lasso_path(s)
        knots = exact.tgrid.points
        for k in range(1, len(knots) - 1):
            left = lasso_path(s, tgrid=TGrid(np.array([knots[k - 1], (knots[k - 1] + knots[k]) / 2]))).coefficients
            right = lasso_path(s, tgrid=TGrid(np.array([(knots[k] + knots[k + 1]) / 2, knots[k + 1]]))).coefficients
            # extend each segment linearly to the shared knot
            from_left = left[1] + (left[1] - left[0])
            from_right = right[0] - (right[1] - right[0])
            assert np.max(np.abs(from_left - exact.coefficients[k])) <= 1e-10
            assert np.max(np.abs(from_right - exact.coefficients[k])) <= 1e-10


def test_noiseless_exact_recovery():
    x = np.random.default_rng(3).standard_normal((20, 3))
    beta = np.array([1.0, 0.0, -2.0])
    s = DesignSample(x, x @ beta)
    sol = lasso_path(s, tgrid=TGrid(np.array([0.0])))
    assert np.allclose(sol.coefficients[0], beta, atol=1e-12)


def test_path_csv_round_trip(tmp_path, toy_sample):
    s = checks.random_instance(12, 2, 25)
    sol = lasso_path(s)
    write_path_csv(sol, tmp_path / "path.csv", tmp_path / "bp.json")
    header = (tmp_path / "path.csv").read_text().splitlines()[0]
    assert header == "t,beta_1,beta_2,objective,kkt_residual,support_size"
    table = np.loadtxt(tmp_path / "path.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.array_equal(table[:, 0], sol.tgrid.points)
    assert np.array_equal(table[:, 1:3], sol.coefficients)
    assert np.array_equal(table[:, 3], sol.objective_values)
    assert np.array_equal(table[:, 5], sol.support_sizes)
    assert json.loads((tmp_path / "bp.json").read_text()) == sol.breakpoints.tolist()
