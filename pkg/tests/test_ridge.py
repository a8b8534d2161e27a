import numpy as np
import pytest
from hypothesis import given, strategies as st

from sigreg import ConditioningError, ConfigError, DataError, RidgeModel, SigShape, ridge_fit, ridge_path
from sigreg.ridge import (
    cv_errors,
    cv_select_lambda,
    default_lambda_grid,
    empirical_risk,
    kfold_ids,
    predict,
    ridge_objective,
)


def design(rng, n=60, q=6):
    F = np.column_stack([np.ones(n), rng.normal(size=(n, q - 1))])
    beta = rng.normal(size=q)
    return F, F @ beta + 0.1 * rng.normal(size=n), beta


def normal_equation_residual(F, y, model):
    n = F.shape[0]
    D = np.ones(F.shape[1])
    D[0] = 0.0
    A = F.T @ F / n + model.lam * np.diag(D)
    rhs = F.T @ y / n
    return np.abs(A @ model.coeffs - rhs).max() / max(1.0, np.abs(rhs).max())


def test_default_grid():
    grid = default_lambda_grid()
    assert grid.size == 91
    assert grid[0] == pytest.approx(1e-6) and grid[-1] == pytest.approx(1e3)
    assert np.allclose(np.diff(np.log10(grid)), 0.1)


def test_intercept_only_gives_mean(rng):
    y = rng.normal(size=20)
    for lam in (0.0, 1.0, 1e6):
        np.testing.assert_allclose(ridge_fit(np.ones((20, 1)), y, lam).coeffs, [y.mean()], rtol=1e-12)


def test_exact_linear_data_without_penalty(rng):
    f = rng.normal(size=(30, 1))
    model = ridge_fit(f, 2.0 * f[:, 0], 0.0, intercept=False)
    assert model.coeffs[0] == pytest.approx(2.0, abs=1e-10)


def test_large_lambda_limit(rng):
    F, y, _ = design(rng)
    model = ridge_fit(F, y, 1e8)
    assert np.abs(model.coeffs[1:]).max() < 1e-6
    assert model.coeffs[0] == pytest.approx(y.mean(), abs=1e-6)


def test_singular_unregularized_system_raises(rng):
    F = np.column_stack([np.ones(10), rng.normal(size=10)])
    F = np.column_stack([F, F[:, 1]])
    with pytest.raises(ConditioningError):
        ridge_fit(F, rng.normal(size=10), 0.0)
    with pytest.raises(ConditioningError):
        ridge_fit(rng.normal(size=(3, 5)), rng.normal(size=3), 0.0)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_inputs_rejected(rng, bad):
    F, y, _ = design(rng)
    F[3, 2] = bad
    with pytest.raises(DataError):
        ridge_fit(F, y, 1.0)


def test_negative_lambda_rejected(rng):
    F, y, _ = design(rng)
    with pytest.raises(ConfigError):
        ridge_fit(F, y, -1.0)


@pytest.mark.parametrize("n, q", [(60, 6), (20, 45)])
@pytest.mark.parametrize("lam", [1e-6, 1e-2, 1.0, 100.0])
def test_normal_equations_hold(rng, n, q, lam):
    F, y, _ = design(rng, n, q)
    F[:, 1:] *= rng.uniform(0.1, 10.0, size=q - 1)
    model = ridge_fit(F, y, lam)
    assert normal_equation_residual(F, y, model) <= 1e-8


@pytest.mark.parametrize("n, q", [(60, 6), (20, 45)])
def test_ridge_path_matches_individual_fits(rng, n, q):
    F, y, _ = design(rng, n, q)
    grid = np.array([1e-4, 1e-2, 1.0, 10.0])
    path = ridge_path(F, y, grid)
    for g, lam in enumerate(grid):
        np.testing.assert_allclose(path[g], ridge_fit(F, y, lam).coeffs, rtol=1e-7, atol=1e-9)
    std = ridge_path(F, y, grid, standardize=True)
    for g, lam in enumerate(grid):
        np.testing.assert_allclose(std[g], ridge_fit(F, y, lam, standardize=True).coeffs, rtol=1e-7, atol=1e-9)


def test_ridge_path_unregularized_matches_least_squares(rng):
    F, y, _ = design(rng)
    expected, *_ = np.linalg.lstsq(F, y, rcond=None)
    np.testing.assert_allclose(ridge_path(F, y, [0.0])[0], expected, rtol=1e-9)


def test_standardize_maps_back_to_raw_columns(rng):
    F, y, _ = design(rng)
    scale = np.concatenate([[1.0], rng.uniform(0.1, 10, size=5)])
    a = ridge_fit(F, y, 0.3, standardize=True)
    b = ridge_fit(F * scale, y, 0.3, standardize=True)
    np.testing.assert_allclose(predict(a, F), predict(b, F * scale), rtol=1e-10)


def test_standardize_leaves_constant_columns_alone(rng):
    F, y, _ = design(rng)
    F = np.column_stack([F, np.full(F.shape[0], 0.25)])
    model = ridge_fit(F, y, 0.1, standardize=True)
    assert np.all(np.isfinite(model.coeffs))


@given(st.integers(0, 2**32 - 1))
def test_fit_invariant_under_row_permutation(seed):
    rng = np.random.default_rng(seed)
    F, y, _ = design(rng, 25, 5)
    perm = rng.permutation(25)
    a, b = ridge_fit(F, y, 0.5), ridge_fit(F[perm], y[perm], 0.5)
    np.testing.assert_allclose(predict(a, F), predict(b, F), rtol=1e-10, atol=1e-10)


def test_model_shape_validation():
    with pytest.raises(DataError):
        RidgeModel(coeffs=np.zeros(3), lam=1.0, shape=SigShape(2, 2))
    with pytest.raises(ConditioningError):
        RidgeModel(coeffs=np.array([np.nan]), lam=1.0)
    model = RidgeModel(coeffs=np.zeros(7), lam=1.0, shape=SigShape(2, 2))
    with pytest.raises(ValueError):
        model.coeffs[0] = 1.0


def test_empirical_risk_examples(rng):
    F, y, beta = design(rng)
    exact = F @ beta
    assert empirical_risk(RidgeModel(beta, 0.0), F, exact) == 0.0
    assert empirical_risk(RidgeModel(np.zeros(6), 0.0), F, y) == pytest.approx(np.mean(y**2))
    model = ridge_fit(F, y, 0.1)
    loop = sum((y[i] - sum(F[i, j] * model.coeffs[j] for j in range(6))) ** 2 for i in range(len(y))) / len(y)
    assert empirical_risk(model, F, y) == pytest.approx(loop, rel=1e-12)
    assert empirical_risk(model, F, y) == pytest.approx(np.mean((y - predict(model, F)) ** 2), rel=1e-15)


def test_objective_adds_penalty_without_intercept(rng):
    F, y, _ = design(rng)
    model = ridge_fit(F, y, 0.7)
    expected = empirical_risk(model, F, y) + 0.7 * np.sum(model.coeffs[1:] ** 2)
    assert ridge_objective(model, F, y) == pytest.approx(expected, rel=1e-14)


def test_predict_examples():
    coeffs = np.array([1.0, -2.0, 3.0])
    assert np.all(predict(RidgeModel(np.zeros(3), 0.0), np.ones((4, 3))) == 0)
    np.testing.assert_array_equal(predict(RidgeModel(coeffs, 0.0), np.eye(3)), coeffs)
    with pytest.raises(DataError):
        predict(RidgeModel(coeffs, 0.0), np.eye(2))


def test_kfold_ids_balanced_and_seeded():
    ids = kfold_ids(23, 5, seed=4)
    assert sorted(np.bincount(ids)) == [4, 4, 5, 5, 5]
    np.testing.assert_array_equal(ids, kfold_ids(23, 5, seed=4))
    assert not np.array_equal(ids, kfold_ids(23, 5, seed=5))
    with pytest.raises(DataError):
        kfold_ids(3, 5)
    with pytest.raises(ConfigError):
        kfold_ids(10, 1)


def test_cv_single_value_grid(rng):
    F, y, _ = design(rng)
    assert cv_select_lambda(F, y, [0.37]) == 0.37


def test_cv_noiseless_data_picks_smallest_value(rng):
    F, _, beta = design(rng)
    grid = default_lambda_grid()
    errors = cv_errors(F, F @ beta, grid)
    assert np.all(np.diff(errors) >= -1e-15)
    assert cv_select_lambda(F, F @ beta, grid) == grid[0]


def test_cv_ties_go_to_larger_lambda():
    # intercept-only features: every lambda gives the same fit
    y = np.arange(10.0)
    assert cv_select_lambda(np.ones((10, 1)), y, [0.1, 1.0, 10.0]) == 10.0


def test_cv_duplicated_rows_in_every_fold(rng):
    F, y, _ = design(rng, 40, 4)
    ids = kfold_ids(40, 5, seed=0)
    grid = default_lambda_grid(1e-3, 1e2, 5)
    single = cv_select_lambda(F, y, grid, fold_ids=ids)
    doubled = cv_select_lambda(np.vstack([F, F]), np.concatenate([y, y]), grid, fold_ids=np.concatenate([ids, ids]))
    assert single == doubled


def test_cv_rejects_bad_grid(rng):
    F, y, _ = design(rng)
    with pytest.raises(ConfigError):
        cv_select_lambda(F, y, [])
    with pytest.raises(ConfigError):
        cv_select_lambda(F, y, [0.0, 1.0])
