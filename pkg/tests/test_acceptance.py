"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Absolute error levels of the underlying theory are not reproducible (hidden
constants), so acceptance checks scaling laws, exact identities, and oracle
equivalence at pinned tolerances.
"""

import math
import time

import numpy as np
import pytest

from subexp_lasso import geometry, harness
from subexp_lasso.complexity import (dudley_sparse_bound, empirical_width,
                                     exponential_width, finite_gamma_bound,
                                     gaussian_width, polytope_complexity,
                                     small_ball_report, sparse_cone_bound)
from subexp_lasso.distributions import (ConcentrationProfile,
                                        DistributionSpec, euclidean_scaled,
                                        profile_for, verify_bernstein_tail,
                                        zero_norm)
from subexp_lasso.models import (Dataset, Noise, ObservationModel,
                                 generate_dataset, lifted_target_scale,
                                 mismatch_report, target_scale_mu)
from subexp_lasso.seeding import derive_seed
from subexp_lasso.solver import (SolverConfig, empirical_risk,
                                 excess_decomposition, rank1_extract,
                                 sign_invariant_error, solve_lasso,
                                 solve_lifted)

P, K = 100, 5
NOISE_STD = 0.5
ACCEPT_SOLVER = SolverConfig(max_iters=50_000, tol=1e-14)


def _report(num, desc, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {desc}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def sparse_interior_beta0(p=P, k=K):
    """k-sparse unit-norm target with decaying magnitudes, strictly interior
    to the sqrt(k)-l1 ball (slack ~0.6) as criterion 3 requires."""
    vals = np.array([1.0, 0.35, 0.2, 0.12, 0.08])[:k]
    beta0 = np.zeros(p)
    beta0[np.linspace(3, p - 10, k, dtype=int)] = vals
    return beta0 / np.linalg.norm(beta0)


@pytest.fixture(scope="module")
def decay_curves():
    beta0 = sparse_interior_beta0()
    spec = DistributionSpec("laplace", P)
    noise = Noise("laplace", NOISE_STD / math.sqrt(2.0))  # std 0.5
    model = ObservationModel("linear", beta0, noise=noise)
    grid = (200, 400, 800, 1600, 3200)
    tuned = harness.run_error_curve(harness.ExperimentConfig(
        name="tuned", model=model, spec=spec,
        hypothesis_set=geometry.l1_ball(float(np.abs(beta0).sum()), P),
        solver_config=ACCEPT_SOLVER, n_grid=grid, trials_per_n=30,
        master_seed=21))
    untuned = harness.run_error_curve(harness.ExperimentConfig(
        name="untuned", model=model, spec=spec,
        hypothesis_set=geometry.l1_ball(math.sqrt(K), P),
        solver_config=ACCEPT_SOLVER, n_grid=grid, trials_per_n=30,
        master_seed=22))
    return tuned, untuned


def test_criterion_01_exact_recovery():
    t0 = time.perf_counter()
    beta0 = sparse_interior_beta0()
    model = ObservationModel("linear", beta0)
    spec = DistributionSpec("laplace", P)
    s = geometry.l1_ball(float(np.abs(beta0).sum()), P)
    errs = []
    for trial in range(20):
        ds = generate_dataset(model, spec, 400, derive_seed(3, "exact", trial))
        res = solve_lasso(ds, s, ACCEPT_SOLVER)
        errs.append(float(np.linalg.norm(res.estimate - beta0)))
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-5 and elapsed < 60.0
    _report(1, "exact recovery, noiseless tuned l1 ball", ok,
            f"max err {max(errs):.2e}, {elapsed:.1f}s")


def test_criterion_02_decay_rate_tuned(decay_curves):
    tuned, _ = decay_curves
    ok = -0.65 <= tuned.decay_slope <= -0.35
    _report(2, "tuned decay slope in [-0.65, -0.35]", ok,
            f"slope {tuned.decay_slope:.4f} +/- {tuned.decay_stderr:.4f}")


def test_criterion_03_decay_rate_untuned(decay_curves):
    tuned, untuned = decay_curves
    in_range = -0.55 <= untuned.decay_slope <= -0.15
    sep = (untuned.decay_slope - 2 * untuned.decay_stderr
           > tuned.decay_slope + 2 * tuned.decay_stderr)
    shallower = tuned.decay_slope < untuned.decay_slope
    ok = in_range and (sep or shallower)
    _report(3, "untuned decay slope shallower, in [-0.55, -0.15]", ok,
            f"untuned {untuned.decay_slope:.4f} +/- {untuned.decay_stderr:.4f} "
            f"vs tuned {tuned.decay_slope:.4f}")


def test_criterion_04_mismatch_principle_consistency():
    p = 50
    rng = np.random.default_rng(40)
    beta0 = np.zeros(p)
    beta0[rng.choice(p, 5, replace=False)] = rng.standard_normal(5)
    beta0 /= np.linalg.norm(beta0)
    spec = DistributionSpec("gaussian", p)
    model = ObservationModel("single_index", beta0, link="tanh")
    mu = target_scale_mu(model, spec, 10_000_000, seed=41)
    beta_nat = mu.value * beta0
    rep = mismatch_report(model, spec, beta_nat, mc_budget=200_000, seed=42)
    rho_ok = rep.rho_global < 3.0 * rep.mc_std_error * math.sqrt(p)

    s = geometry.l1_ball(float(np.abs(beta_nat).sum()), p)
    curve = harness.run_error_curve(harness.ExperimentConfig(
        name="sim-tanh", model=model, spec=spec, hypothesis_set=s,
        target_rule="explicit", target_vector=beta_nat,
        solver_config=ACCEPT_SOLVER, n_grid=(400, 3200), trials_per_n=15,
        master_seed=43))
    med_lo = curve.aggregates[400]["median"]
    med_hi = curve.aggregates[3200]["median"]
    ok = rho_ok and med_hi < 0.5 * med_lo
    _report(4, "single-index scaled target: vanishing mismatch, error halves", ok,
            f"mu {mu.value:.4f}, rho {rep.rho_global:.4f} "
            f"(allow {3 * rep.mc_std_error * math.sqrt(p):.4f}), "
            f"medians {med_lo:.4f} -> {med_hi:.4f}")


def test_criterion_05_lifted_phase_retrieval():
    t0 = time.perf_counter()
    p = 10
    rng = np.random.default_rng(42)
    beta0 = rng.standard_normal(p)
    beta0 /= np.linalg.norm(beta0)
    model = ObservationModel("lifted_view", beta0)
    spec = DistributionSpec("gaussian", p)
    s = geometry.lifted_psd_fro(1.0, p)
    # measured per-trial success rate P(err < 0.1) = 0.90 over 100 trials
    # (the criterion's threshold sits at the error distribution's q90), so
    # >= 8/10 holds for ~93% of master seeds; seed pinned to a representative
    # outcome (9/10)
    hits, errs = 0, []
    for trial in range(10):
        ds = generate_dataset(model, spec, 600, derive_seed(8, "lifted", trial))
        res = solve_lifted(ds, s, ACCEPT_SOLVER)
        lam, vec, _ = rank1_extract(res.estimate)
        err = sign_invariant_error(lam * vec, beta0)
        errs.append(err)
        hits += err < 0.1
    elapsed = time.perf_counter() - t0
    ok = hits >= 8 and elapsed < 300.0
    _report(5, "lifted estimator recovers the direction (>= 8/10 below 0.1)",
            ok, f"{hits}/10, median err {np.median(errs):.3f}, {elapsed:.1f}s")


def test_criterion_06_lifted_even_link_target():
    sq = lifted_target_scale("square", 10_000_000, seed=60)
    ident = lifted_target_scale("identity", 10_000_000, seed=61)
    ok = abs(sq.value - 1.0) < 0.01 and abs(ident.value) < 0.01
    _report(6, "lifted target scale: square -> 1, identity -> 0", ok,
            f"square {sq.value:.5f}, identity {ident.value:.5f}")


def test_criterion_07_width_sanity():
    g1 = gaussian_width(geometry.l2_ball(1.0, 1), 4_000, 70)
    interval_ok = abs(g1.mean - math.sqrt(2 / math.pi)) <= 3 * g1.std_error

    rng = np.random.default_rng(71)
    identity_ok = True
    detail_gap = 0.0
    for i in range(5):
        p = int(rng.integers(4, 24))
        pts = rng.standard_normal((int(rng.integers(5, 25)), p))
        sk = geometry.skeleton_from_points(pts, f"skeleton-{i}")
        spec = DistributionSpec("gaussian", p)
        a = gaussian_width(sk, 3_000, 72 + i)
        b = empirical_width(sk, spec, 24, 3_000, 172 + i)
        gap = abs(a.mean - b.mean)
        identity_ok &= gap <= 3 * (a.std_error + b.std_error)
        detail_gap = max(detail_gap, gap)

    ratio_ok = True
    tested = [(geometry.l1_ball(1.0, 16), 16), (geometry.l2_ball(1.0, 8), 8),
              (geometry.hypercube(0.5, 6), 6),
              (geometry.skeleton_from_points(rng.standard_normal((12, 10)),
                                             "ratio"), 10)]
    for target, p in tested:
        g = gaussian_width(target, 3_000, 73)
        e = exponential_width(target, 3_000, 74)
        ratio_ok &= e.mean <= 3.0 * math.sqrt(math.log(p)) * g.mean \
            + 3 * (e.std_error + g.std_error)

    ok = interval_ok and identity_ok and ratio_ok
    _report(7, "width sanity: analytic value, driver identity, log-p ratio",
            ok, f"interval {g1.mean:.4f}, max identity gap {detail_gap:.4f}")


def test_criterion_08_paley_zygmund():
    p = 20
    spec = DistributionSpec("gaussian", p)
    rng = np.random.default_rng(80)
    dirs = rng.standard_normal((200, p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rep = small_ball_report(spec, dirs, "paley_zygmund", 100_000, 81)
    alpha_ok = abs(rep.alpha_hat - math.sqrt(2 / math.pi)) \
        < 0.02 * math.sqrt(2 / math.pi)
    pz_ok = rep.tau * rep.q_hat >= rep.pz_bound - rep.mc_allowance
    ok = alpha_ok and pz_ok
    _report(8, "small-ball certificate from first/second moments", ok,
            f"alpha {rep.alpha_hat:.4f}, tau*q {rep.tau * rep.q_hat:.4f} "
            f">= {rep.pz_bound:.4f}")


def test_criterion_09_tail_soundness():
    rng = np.random.default_rng(90)
    M = np.linalg.qr(rng.standard_normal((8, 5)))[0]
    specs = [DistributionSpec("gaussian", 8),
             DistributionSpec("rademacher", 8),
             DistributionSpec("laplace", 8),
             DistributionSpec("mixed", 8, mixing=M, base_kind="laplace")]
    thresholds = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
    total_violations = 0
    for si, spec in enumerate(specs):
        prof = profile_for(spec)
        for d in range(20):
            v = rng.standard_normal(8)
            v /= np.linalg.norm(v)
            rep = verify_bernstein_tail(spec, prof, v, thresholds, 100_000,
                                        derive_seed(91, f"tails-{si}", d))
            total_violations += rep.violations
    ok = total_violations == 0
    _report(9, "two-sided tail bound sound for all laws (80 directions)", ok,
            f"{total_violations} violations")


def test_criterion_10_oracle_equivalence():
    rng = np.random.default_rng(100)
    # projections vs brute-force oracles
    proj_ok = True
    worst_proj = 0.0
    for i in range(1_000):
        p = int(rng.integers(2, 7))
        choice = i % 3
        v = 3.0 * rng.standard_normal(p)
        if choice == 0:
            r = float(rng.uniform(0.3, 2.0))
            got = geometry.project(geometry.l1_ball(r, p), v)
            if np.abs(v).sum() <= r:
                oracle = v
            else:
                lo, hi = 0.0, float(np.abs(v).max())
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    if np.maximum(np.abs(v) - mid, 0.0).sum() > r:
                        lo = mid
                    else:
                        hi = mid
                oracle = np.sign(v) * np.maximum(np.abs(v) - hi, 0.0)
        elif choice == 1:
            r = float(rng.uniform(0.3, 2.0))
            center = 0.2 * rng.standard_normal(p)
            got = geometry.project(geometry.l2_ball(r, p, center=center), v)
            d = v - center
            oracle = v if np.linalg.norm(d) <= r \
                else center + r * d / np.linalg.norm(d)
        else:
            h = float(rng.uniform(0.2, 1.5))
            got = geometry.project(geometry.hypercube(h, p), v)
            oracle = np.array([min(max(x, -h), h) for x in v])
        gap = float(np.linalg.norm(got - oracle))
        worst_proj = max(worst_proj, gap)
        proj_ok &= gap < 1e-8

    # solver vs normal equations
    ls_ok = True
    worst_ls = 0.0
    for i in range(50):
        n, p = 80, 8
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = Dataset(X, y, DistributionSpec("gaussian", p),
                     ObservationModel("linear", np.ones(p)), i)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        res = solve_lasso(ds, geometry.l2_ball(1e6, p), ACCEPT_SOLVER)
        gap = float(np.linalg.norm(res.estimate - oracle))
        worst_ls = max(worst_ls, gap)
        ls_ok &= gap < 1e-6

    # excess decomposition identity
    id_ok = True
    for _ in range(1_000):
        n, p = int(rng.integers(2, 20)), int(rng.integers(1, 7))
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = Dataset(X, y, DistributionSpec("gaussian", p),
                     ObservationModel("linear", np.ones(p)), 0)
        b1, b2 = rng.standard_normal(p), rng.standard_normal(p)
        q, m = excess_decomposition(ds, b1, b2)
        direct = empirical_risk(ds, b1) - empirical_risk(ds, b2)
        scale = 1.0 + abs(empirical_risk(ds, b1)) + abs(empirical_risk(ds, b2))
        id_ok &= abs(q + m - direct) <= 1e-10 * scale

    ok = proj_ok and ls_ok and id_ok
    _report(10, "oracle equivalence: projections, LS solver, decomposition",
            ok, f"worst proj gap {worst_proj:.2e}, worst LS gap {worst_ls:.2e}")


def test_criterion_11_certificate_coherence():
    rng = np.random.default_rng(110)
    checked, positives, coherent = 0, 0, True
    for i in range(100):
        p = int(rng.integers(3, 6))
        n = int(rng.integers(25, 60))
        beta0 = rng.standard_normal(p) * 0.5
        noise = Noise("gaussian", float(rng.uniform(0.0, 0.3)))
        model = ObservationModel("linear", beta0, noise=noise)
        spec = DistributionSpec("laplace", p)
        ds = generate_dataset(model, spec, n, derive_seed(111, "cert", i))
        s = geometry.l2_ball(float(np.linalg.norm(beta0)) + 2.0, p)
        t = float(rng.uniform(0.05, 1.0))
        rep = harness.excess_certificate(ds, s, beta0, t, 256,
                                         derive_seed(112, "cert-dirs", i))
        res = solve_lasso(ds, s, ACCEPT_SOLVER)
        err = float(np.linalg.norm(res.estimate - beta0))
        checked += 1
        if rep.positive:
            positives += 1
            coherent &= err < t
    ok = coherent and positives >= 20
    _report(11, "positive excess certificate implies solver error below t",
            ok, f"{positives}/{checked} certificates positive, all coherent: "
                f"{coherent}")


def test_criterion_12_formula_bounds():
    # hand-computed values, 1e-3 relative
    hand_ok = True
    b = sparse_cone_bound(4, 256, 10_000, "(0,2)-q")
    hand_ok &= abs(b.value - 4.246) / 4.246 < 1e-3
    b20 = sparse_cone_bound(8, 16, 100, "(2,0)")
    hand_ok &= abs(b20.value - math.sqrt(8 * math.log(2))) < 1e-12

    p, r, c = 6, 1.5, 0.9
    s = geometry.l1_ball(r, p)
    prof_g = ConcentrationProfile(euclidean_scaled(c), zero_norm())
    _, m_g = polytope_complexity(s, prof_g, 100)
    hand_ok &= abs(m_g - 2 * r * c * math.sqrt(math.log(2 * p))) < 1e-12
    prof_e = ConcentrationProfile(zero_norm(), euclidean_scaled(c))
    _, m_e = polytope_complexity(s, prof_e, 100)
    hand_ok &= abs(m_e - 2 * r * c * math.log(2 * p)) < 1e-12

    two = geometry.skeleton_from_points(np.array([[1.0, 0.0], [-1.0, 0.0]]),
                                        "pair")
    hand_ok &= abs(finite_gamma_bound(two, 2, euclidean_scaled(1.0))
                   - 2 * math.sqrt(math.log(2))) < 1e-12

    dud_ok = True
    for k, p2 in [(1, 2), (2, 16), (4, 64)]:
        closed = 3.0 * k * (math.log(p2 / k) + math.log(9.0) + 1.0)
        dud_ok &= abs(dudley_sparse_bound(k, p2, 1) - closed) / closed < 1e-3
    ratio_ok = all(
        dudley_sparse_bound(k, p2, 2) / math.sqrt(k * math.log(p2 / k)) < 8.0
        for k in range(1, 9) for p2 in (16, 64, 256, 1024) if k <= p2 / 2)

    ok = hand_ok and dud_ok and ratio_ok
    _report(12, "closed-form complexity surrogates match hand values", ok,
            f"(0,2)-q value {b.value:.5f}")
