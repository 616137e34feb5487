import math

import numpy as np
import pytest

import confex


def rct(n=600, j=4, effect=0.1, seed=0):
    rng = np.random.default_rng(seed)
    l = rng.uniform(-1, 1, size=(n, j))
    a = (rng.random(n) < 0.5).astype(float)
    p = 0.4 + effect * a + l @ np.full(j, 0.05)
    y = (rng.random(n) < p).astype(float)
    return confex.Dataset(a, y, "binary", [f"X{k + 1}" for k in range(j)], l)


def test_four_row_estimates():
    a = np.array([0.0, 0.0, 1.0, 1.0])
    l = np.array([[0.3], [-1.2], [0.7], [2.0]])
    cont = confex.Dataset(a, np.array([1.0, 2.0, 3.0, 4.0]), "continuous", ["X"], l)
    binary = confex.Dataset(a, np.array([0.0, 1.0, 1.0, 1.0]), "binary", ["X"], l)
    assert confex.dr_effect(cont, [])["estimate"] == pytest.approx(2.0, abs=1e-8)
    assert confex.dr_effect(binary, [])["estimate"] == pytest.approx(0.5, abs=1e-8)


def test_invalid_data_raises():
    a = np.array([1.0, 1.0, 1.0])
    with pytest.raises(confex.ConfexError):
        confex.Dataset(a, np.array([0.0, 1.0, 0.0]), "binary", ["X"], np.array([[1.0], [2.0], [3.0]]))


def test_glm_gaussian_mean():
    fit = confex.fit_glm(np.ones((3, 1)), np.array([1.0, 2.0, 3.0]), "gaussian")
    assert fit["coefficients"][0] == pytest.approx(2.0)
    assert fit["covariance"][0, 0] == pytest.approx(1.0 / 3.0)


def test_trajectory_and_analysis():
    d = rct()
    t = confex.build_trajectory(d, seed=3)
    assert len(t["orbits"]) == 5
    assert sorted(t["elimination_order"]) == d.covariate_names
    assert t["evaluations"] == 10
    full = confex.dr_effect(d)
    assert t["orbits"][-1]["estimate"] == full["estimate"]

    r1 = confex.analyze(d, B=10, seed=5, interior_knots=1)
    r2 = confex.analyze(d, B=10, seed=5, interior_knots=1)
    assert r1["q_values"] == [1, 2]
    assert np.array_equal(r1["predicted_effects"], r2["predicted_effects"])
    lo, hi = r1["uncertainty_intervals"][0]
    assert lo <= hi


def test_spline_helpers():
    x = [0.0, 1.0, 2.0, 3.0]
    s = confex.fit_natural_spline(x, [1.0, 4.0, 7.0, 10.0], 1)
    assert s(8.0) == pytest.approx(25.0, abs=1e-8)
    b = confex.natural_spline_basis(x, [0.0, 1.5, 3.0])
    assert b.shape == (4, 3)
    lo, hi = confex.uncertainty_interval([0.0, 1.0, 2.0], [3.0, 4.0, 5.0], 0.0, 0.05)
    assert (lo, hi) == (0.0, 5.0)


def test_simulate_small():
    r = confex.simulate(1, 3, 0, 0.0, n=300, population=3000, replicates=3, B=3, seed=2)
    assert r["completed"] + r["failures"] == 3
    assert r["true_psi"] == 0.0
    assert math.isfinite(r["measured"]["mean"])
