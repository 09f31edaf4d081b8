import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penpath import checks


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.floats(0.1, 3.0), st.floats(-4, 4))
def test_line_minimize_matches_dense_scan(centres, curv, shift):
    centres = np.array(centres)

    def fun(v):
        v = np.asarray(v, dtype=float)
        return curv * (v - shift) ** 2 + np.abs(v[:, None] - centres[None, :]).sum(axis=1)

    arg, val = checks.line_minimize(fun, centres, -5.0, 5.0)
    grid = np.linspace(-5.0, 5.0, 200_001)
    assert val <= fun(grid).min() + 1e-12
    assert val == pytest.approx(float(fun(np.array([arg]))[0]), abs=1e-15)


def test_line_minimize_clips_to_interval():
    arg, val = checks.line_minimize(lambda v: (np.asarray(v) - 10.0) ** 2, [], -1.0, 1.0)
    assert arg == 1.0 and val == 81.0


def test_nested_minimize_on_lad_instance():
    sample = checks.random_instance(3, 2, 15)
    x, y = sample.x, sample.y

    def fun(pts):
        return np.mean(np.abs(y[None, :] - pts @ x.T), axis=1) + 0.3 * np.abs(pts).sum(axis=1)

    def kinks(head):
        return np.concatenate([(y - x[:, :-1] @ head) / x[:, -1], [0.0]])

    arg, val, edge = checks.nested_minimize(fun, kinks, 2, 10.0)
    assert not edge
    gen = np.random.default_rng(0)
    probes = arg + gen.standard_normal((2000, 2)) * gen.choice([1e-6, 1e-3, 1e-1, 1.0], size=(2000, 1))
    assert val <= fun(probes).min() + 1e-12


def test_nested_minimize_reports_boundary():
    arg, val, edge = checks.nested_minimize(lambda pts: ((pts - 20.0) ** 2).sum(axis=1), lambda head: [], 2, 3.0)
    assert edge and np.allclose(arg, [3.0, 3.0])
    with pytest.raises(ValueError):
        checks.nested_minimize(lambda pts: pts.sum(axis=1), lambda head: [], 3, 1.0)


def test_ks_brute_force_examples():
    assert checks.ks_brute_force([1, 2], [1.5]) == 0.5


def test_run_suites_rejects_unknown_name():
    with pytest.raises(KeyError):
        checks.run_suites(["oracle", "nosuchsuite"])


def test_all_suites_pass():
    results = checks.run_suites()
    assert list(results) == list(checks.SUITES)
    failed = [r["name"] for rows in results.values() for r in rows if not r["passed"]]
    assert failed == []
    assert all(set(r) == {"name", "value", "threshold", "passed"} for rows in results.values() for r in rows)
