import math

import numpy as np
import pytest

from subexp_lasso import geometry
from subexp_lasso.distributions import DistributionSpec
from subexp_lasso.errors import ConfigurationError
from subexp_lasso.models import (Dataset, ObservationModel, generate_dataset,
                                 sparse_vector)
from subexp_lasso.solver import (SolverConfig, empirical_risk,
                                 excess_decomposition, excess_risk,
                                 rank1_extract, sign_invariant_error,
                                 solve_lasso, solve_lifted)


def toy_dataset(X, y, seed=0):
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    return Dataset(X, np.asarray(y, dtype=float),
                   DistributionSpec("gaussian", p),
                   ObservationModel("linear", np.ones(p)), seed)


# ---------------------------------------------------------------------------
# Risk evaluation
# ---------------------------------------------------------------------------

def test_empirical_risk_examples():
    ds = toy_dataset([[1.0, 0.0]], [2.0])
    assert empirical_risk(ds, np.zeros(2)) == 4.0
    # exact interpolation
    X = np.array([[1.0, 2.0], [0.0, 1.0]])
    beta = np.array([3.0, -1.0])
    ds = toy_dataset(X, X @ beta)
    assert empirical_risk(ds, beta) == 0.0


def test_empirical_risk_duplicate_accumulation_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n, p = int(rng.integers(2, 30)), int(rng.integers(1, 8))
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        beta = rng.standard_normal(p)
        ds = toy_dataset(X, y)
        # independently coded accumulation: exact summation of squares
        oracle = math.fsum((float(y[i] - X[i] @ beta)) ** 2
                           for i in range(n)) / n
        assert empirical_risk(ds, beta) == pytest.approx(oracle, rel=1e-12)


def test_excess_decomposition_identity():
    rng = np.random.default_rng(2)
    for _ in range(300):
        n, p = int(rng.integers(2, 25)), int(rng.integers(1, 8))
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = toy_dataset(X, y)
        beta = rng.standard_normal(p)
        beta_nat = rng.standard_normal(p)
        q, m = excess_decomposition(ds, beta, beta_nat)
        direct = empirical_risk(ds, beta) - empirical_risk(ds, beta_nat)
        scale = 1.0 + abs(empirical_risk(ds, beta)) + abs(empirical_risk(ds, beta_nat))
        assert q >= 0.0
        assert abs(q + m - direct) <= 1e-10 * scale


def test_excess_decomposition_trivial_cases():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10, 3))
    beta0 = np.array([1.0, -1.0, 0.5])
    ds = toy_dataset(X, X @ beta0)
    q, m = excess_decomposition(ds, beta0, beta0)
    assert (q, m) == (0.0, 0.0)
    # noiseless data: the cross term vanishes identically at beta_nat = beta0
    beta = rng.standard_normal(3)
    q, m = excess_decomposition(ds, beta, beta0)
    assert m == 0.0
    assert q == pytest.approx(empirical_risk(ds, beta) - empirical_risk(ds, beta0),
                              rel=1e-12)


# ---------------------------------------------------------------------------
# Vector solver
# ---------------------------------------------------------------------------

def test_solve_matches_normal_equations_on_unconstrained_instances():
    rng = np.random.default_rng(4)
    cfg = SolverConfig(max_iters=100_000, tol=1e-14)
    for i in range(50):
        n, p = 80, 8
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = toy_dataset(X, y, seed=i)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        res = solve_lasso(ds, geometry.l2_ball(1e6, p), cfg)
        assert np.linalg.norm(res.estimate - oracle) < 1e-6


def test_solve_orthonormal_design_is_projection():
    # constrained LS with orthonormal rows equals projecting the data vector
    X = np.eye(2)
    y = np.array([1.0, 2.0])
    ds = toy_dataset(X, y)
    res = solve_lasso(ds, geometry.l1_ball(1.0, 2),
                      SolverConfig(max_iters=5_000, tol=1e-14))
    assert np.allclose(res.estimate, [0.0, 1.0], atol=1e-8)


def test_noiseless_sparse_recovery_small():
    p, k, n = 50, 3, 200
    beta0 = sparse_vector(p, k, seed=6)
    model = ObservationModel("linear", beta0)
    spec = DistributionSpec("laplace", p)
    ds = generate_dataset(model, spec, n, 7)
    s = geometry.l1_ball(float(np.abs(beta0).sum()), p)
    res = solve_lasso(ds, s, SolverConfig(max_iters=20_000, tol=1e-12))
    assert np.linalg.norm(res.estimate - beta0) < 1e-5


def test_monotone_trace_and_feasibility_and_certificate():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((60, 10))
    y = rng.standard_normal(60)
    ds = toy_dataset(X, y)
    s = geometry.l1_ball(0.8, 10)
    cfg = SolverConfig(max_iters=50_000, tol=1e-13, track_trace=True)
    res = solve_lasso(ds, s, cfg)
    trace = np.array(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12 * np.maximum(trace[:-1], 1.0))
    assert geometry.contains(s, res.estimate)
    assert res.objective == pytest.approx(empirical_risk(ds, res.estimate),
                                          abs=1e-12)
    # fixed-point optimality certificate
    assert res.fixed_point_residual < 10 * math.sqrt(cfg.tol) * \
        (1.0 + np.linalg.norm(res.estimate))


def test_backtracking_step_rule_reaches_same_solution():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    ds = toy_dataset(X, y)
    s = geometry.l1_ball(0.5, 5)
    a = solve_lasso(ds, s, SolverConfig(max_iters=50_000, tol=1e-13))
    b = solve_lasso(ds, s, SolverConfig(max_iters=50_000, tol=1e-13,
                                        step_rule="backtracking"))
    assert np.linalg.norm(a.estimate - b.estimate) < 1e-5


def test_restarts_are_deterministic():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    ds = toy_dataset(X, y)
    s = geometry.hypercube(0.3, 4)
    cfg = SolverConfig(max_iters=10_000, tol=1e-13, restart_count=3, seed=5)
    a = solve_lasso(ds, s, cfg)
    b = solve_lasso(ds, s, cfg)
    assert np.array_equal(a.estimate, b.estimate)


def test_non_finite_data_rejected():
    X = np.array([[1.0, np.nan]])
    ds = toy_dataset(X, [1.0])
    with pytest.raises(ConfigurationError):
        solve_lasso(ds, geometry.l2_ball(1.0, 2))


def test_nonconvergence_is_reported_not_fatal():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((50, 6))
    y = rng.standard_normal(50)
    ds = toy_dataset(X, y)
    res = solve_lasso(ds, geometry.l2_ball(1.0, 6),
                      SolverConfig(max_iters=3, tol=1e-16))
    assert not res.converged
    assert res.estimate is not None


# ---------------------------------------------------------------------------
# Lifted solver
# ---------------------------------------------------------------------------

def lifted_interpolation_dataset(B_nat, n, seed):
    p = B_nat.shape[0]
    spec = DistributionSpec("gaussian", p)
    model = ObservationModel("lifted_view", np.eye(p)[0])
    ds = generate_dataset(model, spec, n, seed)
    y = np.einsum("nij,ij->n", ds.inputs, B_nat)
    return Dataset(ds.inputs, y, spec, model, seed, centering=ds.centering)


def test_lifted_interpolating_target_reaches_zero_objective():
    rng = np.random.default_rng(12)
    u = rng.standard_normal(4)
    u /= np.linalg.norm(u)
    B_nat = np.outer(u, u)
    ds = lifted_interpolation_dataset(B_nat, 80, 13)
    assert empirical_risk(ds, B_nat) == pytest.approx(0.0, abs=1e-20)
    s = geometry.lifted_psd_fro(1.5, 4)
    res = solve_lifted(ds, s, SolverConfig(max_iters=30_000, tol=1e-14))
    initial = empirical_risk(ds, geometry.project(s, np.zeros((4, 4))))
    assert res.objective <= 1e-6 * initial


def grid_oracle_2x2(ds, radius, lo=-1.5, hi=1.5, steps=31):
    """Dense grid search over feasible 2 x 2 symmetric PSD matrices."""
    best_obj, best_B = np.inf, None
    for a in np.linspace(0.0, hi, steps):
        for c in np.linspace(0.0, hi, steps):
            for b in np.linspace(lo / 2, hi / 2, steps):
                B = np.array([[a, b], [b, c]])
                if a * c - b * b < -1e-12:
                    continue
                if np.hypot(np.hypot(a, c), np.sqrt(2) * b) > radius:
                    continue
                obj = empirical_risk(ds, B)
                if obj < best_obj:
                    best_obj, best_B = obj, B
    return best_obj, best_B


def test_lifted_solver_matches_grid_oracle_on_quadratic_data():
    # p = 2 noiseless quadratic data: the solver must find the constrained
    # empirical minimizer located by the dense grid oracle
    p, n = 2, 50
    beta0 = np.eye(p)[0]
    model = ObservationModel("lifted_view", beta0)
    spec = DistributionSpec("gaussian", p)
    ds = generate_dataset(model, spec, n, 14)
    s = geometry.lifted_psd_fro(1.5, p)
    res = solve_lifted(ds, s, SolverConfig(max_iters=40_000, tol=1e-14))
    best_obj, best_B = grid_oracle_2x2(ds, s.radius)
    assert res.objective <= best_obj + 1e-9
    # grid resolution is 0.05 per axis
    assert np.linalg.norm(res.estimate - best_B, "fro") < 0.1


def test_lifted_recovery_with_interpolating_outputs():
    # outputs that the lifted target interpolates: exact recovery at p=2, n=50
    p, n = 2, 50
    beta0 = np.eye(p)[0]
    target = np.outer(beta0, beta0)
    model = ObservationModel("lifted_view", beta0)
    spec = DistributionSpec("gaussian", p)
    raw = generate_dataset(model, spec, n, 14)
    y = np.einsum("nij,ij->n", raw.inputs, target)
    ds = Dataset(raw.inputs, y, spec, model, 14, centering=raw.centering)
    s = geometry.lifted_psd_fro(1.5, p)
    res = solve_lifted(ds, s, SolverConfig(max_iters=40_000, tol=1e-14))
    assert np.linalg.norm(res.estimate - target, "fro") < 1e-2


def test_lifted_objective_identity_isotropic_centering():
    # <x x^T - I, b b^T>_F = <x, b>^2 - ||b||^2
    rng = np.random.default_rng(15)
    x = rng.standard_normal(5)
    b = rng.standard_normal(5)
    lift = np.outer(x, x) - np.eye(5)
    lhs = float(np.sum(lift * np.outer(b, b)))
    assert lhs == pytest.approx(float(x @ b) ** 2 - float(b @ b), rel=1e-12)


def test_solver_entry_points_validate_dataset_kind():
    rng = np.random.default_rng(16)
    X = rng.standard_normal((10, 3))
    ds = toy_dataset(X, X @ np.ones(3))
    with pytest.raises(ConfigurationError):
        solve_lifted(ds, geometry.lifted_psd_fro(1.0, 3))
    with pytest.raises(ConfigurationError):
        solve_lasso(ds, geometry.lifted_psd_fro(1.0, 3))


# ---------------------------------------------------------------------------
# Rank-one extraction, sign-blind error
# ---------------------------------------------------------------------------

def test_rank1_pure_rank_one():
    u = np.array([0.6, -0.8])
    lam, vec, degenerate = rank1_extract(2.0 * np.outer(u, u))
    assert not degenerate
    assert lam == pytest.approx(2.0, rel=1e-10)
    assert np.allclose(vec, -u, atol=1e-10)  # canonical sign: largest coord positive


def test_rank1_diagonal():
    lam, vec, _ = rank1_extract(np.diag([3.0, 1.0]))
    assert lam == pytest.approx(3.0, rel=1e-12)
    assert np.allclose(vec, [1.0, 0.0], atol=1e-8)


def test_rank1_matches_dense_eigendecomposition_oracle():
    rng = np.random.default_rng(17)
    for _ in range(25):
        G = rng.standard_normal((5, 5))
        B = G @ G.T
        lam, vec, _ = rank1_extract(B)
        w, V = np.linalg.eigh(B)
        assert lam == pytest.approx(w[-1], rel=1e-8)
        top = V[:, -1]
        assert min(np.linalg.norm(vec - top), np.linalg.norm(vec + top)) < 1e-6


def test_rank1_zero_matrix_flagged():
    lam, vec, degenerate = rank1_extract(np.zeros((3, 3)))
    assert degenerate and lam == 0.0
    assert np.linalg.norm(vec) == pytest.approx(1.0)


def test_sign_invariant_error_examples():
    a = np.array([1.0, 2.0])
    assert sign_invariant_error(a, -a) == 0.0
    assert sign_invariant_error(a, a) == 0.0
    assert sign_invariant_error(np.array([1.0, 0.0]), np.array([0.0, 1.0])) \
        == pytest.approx(math.sqrt(2.0))


def test_trace_csv_roundtrip():
    rng = np.random.default_rng(19)
    X = rng.standard_normal((20, 3))
    ds = toy_dataset(X, rng.standard_normal(20))
    res = solve_lasso(ds, geometry.l1_ball(0.5, 3),
                      SolverConfig(max_iters=500, tol=1e-12, track_trace=True))
    from subexp_lasso.solver import trace_csv
    text = trace_csv(res)
    lines = text.strip().splitlines()
    assert lines[0] == "iteration,objective"
    vals = [float(line.split(",")[1]) for line in lines[1:]]
    assert vals == res.objective_trace
    plain = solve_lasso(ds, geometry.l1_ball(0.5, 3), SolverConfig(max_iters=50))
    with pytest.raises(ValueError):
        trace_csv(plain)


def test_excess_risk_helper():
    rng = np.random.default_rng(18)
    X = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    ds = toy_dataset(X, y)
    b1, b2 = rng.standard_normal(4), rng.standard_normal(4)
    assert excess_risk(ds, b1, b2) == pytest.approx(
        empirical_risk(ds, b1) - empirical_risk(ds, b2), abs=1e-10)
