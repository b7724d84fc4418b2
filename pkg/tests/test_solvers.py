"""Solvers: schedules, bounds, ISTA/ADMM/PnP variants, counter-example."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pnp_online.denoisers import (AveragedFilterDenoiser, IdentityDenoiser,
                                  TvProxDenoiser, tv_objective, tv_prox)
from pnp_online.errors import ConfigurationError, DivergenceError
from pnp_online.forward import (Image, build_gaussian_model, datafit_value,
                                grad_full)
from pnp_online.linops import MatrixOperator
from pnp_online.solvers import (SolverConfig, composition_alpha,
                                corollary1_constant, estimate_gradient_noise,
                                fista_q_update, huber_gradient, operator_P,
                                prop2_bound, run_admm, run_counterexample,
                                run_ista, run_pnp_admm, run_pnp_ista,
                                run_pnp_sgd, sgd_bound)


def quadratic_model(n=10, M=14, I=2, seed=0, noisy=True):
    rng = np.random.default_rng(seed)
    truth = Image(pixels=rng.uniform(0, 1, n), width=n, height=1)
    model = build_gaussian_model(n=n, M=M, I=I, seed=seed, truth=truth)
    if noisy:
        # perturb measurements so the least-squares solution is nontrivial
        comps = [(op, y + 0.01 * rng.standard_normal(y.shape))
                 for op, y in model.components]
        model = type(model)(components=comps, lipschitz=model.lipschitz,
                            width=n, height=1)
    return model, truth


def least_squares_solution(model):
    n = model.n
    G = np.zeros((n, n))
    b = np.zeros(n)
    eye = np.eye(n)
    for op, y in model.components:
        A = np.column_stack([op.apply(eye[:, j]) for j in range(n)])
        G += np.real(A.conj().T @ A)
        b += np.real(A.conj().T @ y)
    return np.linalg.solve(G, b)


# ------------------------------------------------------------- q schedule

def test_fista_q_first_step_golden_ratio():
    assert fista_q_update(1.0) == pytest.approx((1 + math.sqrt(5)) / 2,
                                                abs=1e-10)


def test_fista_q_second_step():
    # iterate the recursion numerically: q2 = (1 + sqrt(1 + 4*q1^2))/2
    q1 = fista_q_update(1.0)
    oracle = (1.0 + math.sqrt(1.0 + 4.0 * q1 * q1)) / 2.0
    assert oracle == pytest.approx(2.1935270853, abs=1e-9)
    assert fista_q_update(q1) == pytest.approx(oracle, abs=1e-12)


def test_fista_q_growth_lower_bound():
    q = 1.0
    for k in range(1, 51):
        q = fista_q_update(q)
        assert q >= (k + 2) / 2.0


# ------------------------------------------------------------------ bounds

def test_prop2_bound_plugin():
    assert prop2_bound(0.5, 1.0, 1) == pytest.approx(6.0)


def test_prop2_bound_halves_when_t_doubles():
    assert prop2_bound(0.3, 2.0, 10) == pytest.approx(
        2 * prop2_bound(0.3, 2.0, 20))


def test_prop2_bound_theta_to_zero_limit():
    assert prop2_bound(1e-12, 1.0, 5) == pytest.approx(2.0 / 5, rel=1e-9)


def test_sgd_bound_reduces_to_prop2_when_nu_zero():
    for t in (1, 7, 100):
        assert sgd_bound(0.5, 0.1, 0.0, 4, 2.0, t) == pytest.approx(
            prop2_bound(0.5, 4.0, t))


def test_sgd_bound_large_B_limit():
    val = sgd_bound(0.5, 0.1, 1.0, 10 ** 12, 2.0, 7)
    assert val == pytest.approx(2 * 3.0 * 4.0 / 7, rel=1e-4)


def test_corollary1_instance_sqrt_t_rate():
    theta, nu, L, x0 = 0.5, 0.3, 2.0, 1.5
    A = corollary1_constant(theta, x0, nu, L)
    for t in (1, 4, 100):
        gamma = 1.0 / (L * math.sqrt(t))
        assert sgd_bound(theta, gamma, nu, 1, x0, t) <= A / math.sqrt(t) + 1e-12


# ------------------------------------------------------------- composition

def test_composition_alpha_half_half():
    assert composition_alpha(0.5, 0.5) == pytest.approx(2.0 / 3.0)


def test_composition_alpha_near_identity():
    assert composition_alpha(0.4, 1e-12) == pytest.approx(0.4, abs=1e-9)


def test_composition_alpha_inequality_chain():
    theta = 0.5
    alpha = composition_alpha(theta, 0.25)       # gamma*L/2 = 1/4
    assert alpha == pytest.approx(4.0 / 7.0)
    assert alpha / (1 - alpha) == pytest.approx(4.0 / 3.0)
    assert alpha / (1 - alpha) <= 2 * (1 + theta) / (1 - theta)


# --------------------------------------------------------------- operator P

def test_operator_P_identity_zero_residual(small_dt_model):
    import math as _math
    from pnp_online.forward import DtGeometry, build_dt_model
    from conftest import make_truth
    geometry = DtGeometry(grid=8, num_transmitters=2, num_receivers=6)
    truth = make_truth(8, seed=3)
    model = build_dt_model(geometry, truth, seed=0, input_snr_db=_math.inf)
    out = operator_P(model, IdentityDenoiser(), 1.0 / model.lipschitz, 0.1,
                     truth.pixels)
    assert np.max(np.abs(out - truth.pixels)) < 1e-10


def test_operator_P_matches_one_ista_step(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    lam = 1e-4
    sigma = math.sqrt(gamma * lam)
    x = np.random.default_rng(0).standard_normal(model.n) * 0.01
    via_P = operator_P(model, TvProxDenoiser(), gamma, sigma, x)
    manual = tv_prox((x - gamma * grad_full(model, x)).reshape(model.shape),
                     gamma * lam, inner_tol=1e-12).ravel()
    assert np.array_equal(via_P, manual)


def test_converged_run_is_fixed_point(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    sigma = 0.1
    den = AveragedFilterDenoiser()
    cfg = SolverConfig(gamma=gamma, sigma=sigma, iterations=5000, seed=0,
                       record_trace=False, record_timing=False)
    x, _ = run_pnp_ista(model, den, cfg)
    residual = x - operator_P(model, den, gamma, sigma, x)
    assert float(np.sum(residual ** 2)) <= 1e-10


# ---------------------------------------------------------------- run_ista

def test_ista_no_iterations_returns_x0():
    model, _ = quadratic_model()
    cfg = SolverConfig(gamma=1.0 / model.lipschitz, iterations=0, seed=0)
    x, trace = run_ista(model, lambda z: z, cfg)
    assert np.array_equal(x, np.zeros(model.n))
    assert len(trace) == 0


def test_ista_identity_prox_converges_to_least_squares():
    model, _ = quadratic_model()
    cfg = SolverConfig(gamma=1.0 / model.lipschitz, iterations=4000, seed=0,
                       record_trace=False, record_timing=False)
    x, _ = run_ista(model, lambda z: z, cfg)
    assert np.max(np.abs(grad_full(model, x))) < 1e-6
    assert np.max(np.abs(x - least_squares_solution(model))) < 1e-5


def test_fista_beats_ista_at_fifty_iterations():
    model, _ = quadratic_model(n=12, M=16, I=2, seed=1)
    lam = 1e-3
    gamma = 1.0 / model.lipschitz

    def prox(z):
        return tv_prox(z.reshape(1, 12), gamma * lam, inner_tol=1e-13).ravel()

    def objective(x):
        return datafit_value(model, x) + lam * float(np.sum(np.abs(np.diff(x))))

    basic = SolverConfig(gamma=gamma, iterations=50, seed=0,
                         record_timing=False)
    accel = SolverConfig(gamma=gamma, iterations=50, seed=0,
                         q_schedule="fista", record_timing=False)
    xb, _ = run_ista(model, prox, basic)
    xa, _ = run_ista(model, prox, accel)
    assert objective(xa) <= objective(xb) + 1e-12


# ---------------------------------------------------------------- run_admm

def test_admm_zero_model_keeps_x0():
    model = type(quadratic_model()[0])(
        components=[(MatrixOperator(np.zeros((4, 4))),
                     np.zeros(4, dtype=complex))],
        lipschitz=0.0, width=4, height=1)
    cfg = SolverConfig(gamma=1.0, iterations=20, seed=0, record_timing=False)
    x, _ = run_admm(model, lambda z: z, cfg)
    assert np.allclose(x, np.zeros(4), atol=1e-12)


def test_admm_identity_prox_least_squares():
    model, _ = quadratic_model(seed=2)
    cfg = SolverConfig(gamma=1.0 / model.lipschitz, iterations=3000, seed=0,
                       record_trace=False, record_timing=False)
    x, _ = run_admm(model, lambda z: z, cfg)
    assert np.max(np.abs(x - least_squares_solution(model))) < 1e-6


def test_admm_matches_ista_on_tv_problem():
    model, _ = quadratic_model(n=9, M=12, I=3, seed=3)
    model = type(model)(components=model.components,
                        lipschitz=model.lipschitz, width=3, height=3)
    lam = 1e-3
    gamma = 1.0 / model.lipschitz

    def prox(z):
        return tv_prox(z.reshape(3, 3), gamma * lam, inner_tol=1e-13).ravel()

    def objective(x):
        g = x.reshape(3, 3)
        return datafit_value(model, x) + lam * (
            float(np.sum(np.abs(np.diff(g, axis=0))))
            + float(np.sum(np.abs(np.diff(g, axis=1)))))

    long_cfg = SolverConfig(gamma=gamma, iterations=6000, seed=0,
                            record_trace=False, record_timing=False)
    x_ista, _ = run_ista(model, prox, long_cfg)
    x_admm, _ = run_admm(model, prox, long_cfg)
    assert objective(x_admm) == pytest.approx(objective(x_ista), rel=1e-5)


# ---------------------------------------------------------------- PnP-ISTA

def test_pnp_ista_tv_identical_to_ista(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    lam = 1e-4
    sigma = math.sqrt(gamma * lam)
    cfg = SolverConfig(gamma=gamma, sigma=sigma, iterations=100, seed=0,
                       record_timing=False)
    x1, t1 = run_pnp_ista(model, TvProxDenoiser(), cfg)

    def prox(z):
        return tv_prox(z.reshape(model.shape), gamma * lam,
                       inner_tol=1e-12).ravel()

    x2, t2 = run_ista(model, prox, cfg)
    assert np.array_equal(x1, x2)
    assert t1.dist == t2.dist


def test_pnp_ista_identity_is_gradient_descent():
    model, _ = quadratic_model(seed=4)
    gamma = 1.0 / model.lipschitz
    cfg = SolverConfig(gamma=gamma, sigma=0.1, iterations=30, seed=0,
                       record_timing=False)
    x1, _ = run_pnp_ista(model, IdentityDenoiser(), cfg)
    x = np.zeros(model.n)
    for _ in range(30):
        x = x - gamma * grad_full(model, x)
    assert np.array_equal(x1, x)


def test_pnp_ista_prop2_bound_filter(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    sigma = 0.1
    den = AveragedFilterDenoiser()
    ref = SolverConfig(gamma=gamma, sigma=sigma, iterations=10_000, seed=0,
                       record_trace=False, record_timing=False)
    xstar, _ = run_pnp_ista(model, den, ref)
    d0 = float(np.sum(xstar ** 2))               # x0 = 0
    cfg = SolverConfig(gamma=gamma, sigma=sigma, iterations=300, seed=0,
                       record_timing=False)
    _, trace = run_pnp_ista(model, den, cfg)
    dist = np.asarray(trace.dist)
    run_avg = np.cumsum(dist) / np.arange(1, dist.size + 1)
    for t in range(1, dist.size + 1):
        assert run_avg[t - 1] <= prop2_bound(0.5, d0, t)


# ---------------------------------------------------------------- PnP-ADMM

def test_pnp_admm_identity_least_squares():
    model, _ = quadratic_model(seed=5)
    cfg = SolverConfig(gamma=1.0 / model.lipschitz, iterations=3000, seed=0,
                       record_trace=False, record_timing=False)
    x, _ = run_pnp_admm(model, IdentityDenoiser(), cfg)
    assert np.max(np.abs(x - least_squares_solution(model))) < 1e-6


def test_pnp_admm_converges_to_fix_P(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    sigma = 0.1
    den = AveragedFilterDenoiser()
    cfg = SolverConfig(gamma=gamma, sigma=sigma, iterations=4000, seed=0,
                       record_trace=False, record_timing=False)
    x, _ = run_pnp_admm(model, den, cfg)
    assert np.max(np.abs(x - operator_P(model, den, gamma, sigma, x))) < 1e-8


# ----------------------------------------------------------------- PnP-SGD

def test_pnp_sgd_full_batch_equals_pnp_ista(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    cfg = SolverConfig(gamma=gamma, sigma=0.1, iterations=60, seed=0,
                       sample_mode="full", record_timing=False)
    den = AveragedFilterDenoiser()
    xs, ts = run_pnp_sgd(model, den, cfg)
    xi, ti = run_pnp_ista(model, den, cfg)
    assert np.array_equal(xs, xi)
    assert ts.dist == ti.dist


def test_pnp_sgd_deterministic(small_dt_model):
    model, _ = small_dt_model
    cfg = SolverConfig(gamma=1.0 / model.lipschitz, sigma=0.1, iterations=50,
                       seed=3, batch_size=2, record_timing=False)
    den = AveragedFilterDenoiser()
    x1, t1 = run_pnp_sgd(model, den, cfg)
    x2, t2 = run_pnp_sgd(model, den, cfg)
    assert np.array_equal(x1, x2)
    assert t1.dist == t2.dist
    assert all(np.array_equal(a, b) for a, b in zip(t1.indices, t2.indices))


def test_pnp_sgd_smaller_gamma_lower_plateau(small_dt_model):
    model, _ = small_dt_model
    den = AveragedFilterDenoiser()
    plateaus = []
    for scale in (1.0, 1.0 / 16.0):
        cfg = SolverConfig(gamma=scale / model.lipschitz, sigma=0.1,
                           iterations=2000, seed=0, batch_size=2,
                           record_timing=False)
        _, trace = run_pnp_sgd(model, den, cfg)
        plateaus.append(float(np.mean(np.asarray(trace.dist)[-100:])))
    assert plateaus[1] < plateaus[0]


def test_pnp_sgd_prop5_bound_seed_averaged(small_dt_model):
    model, _ = small_dt_model
    gamma = 1.0 / model.lipschitz
    sigma = 0.1
    den = AveragedFilterDenoiser()
    ref = SolverConfig(gamma=gamma, sigma=sigma, iterations=10_000, seed=0,
                       record_trace=False, record_timing=False)
    xstar, _ = run_pnp_ista(model, den, ref)
    x0_dist = math.sqrt(float(np.sum(xstar ** 2)))
    nu = estimate_gradient_noise(model, np.zeros(model.n), num_draws=1000,
                                 B=1, seed=0)
    B = 2
    avg = np.zeros(200)
    for seed in range(20):
        cfg = SolverConfig(gamma=gamma, sigma=sigma, iterations=200,
                           seed=seed, batch_size=B, record_timing=False)
        _, trace = run_pnp_sgd(model, den, cfg)
        avg += np.asarray(trace.dist)
    avg /= 20.0
    run_avg = np.cumsum(avg) / np.arange(1, 201)
    for t in range(1, 201):
        assert run_avg[t - 1] <= sgd_bound(0.5, gamma, nu, B, x0_dist, t)


def test_divergence_detector_raises():
    model, _ = quadratic_model(seed=6)
    # absurdly large step forces blow-up
    cfg = SolverConfig(gamma=1e9 / model.lipschitz, iterations=500, seed=0,
                       record_timing=False)
    with pytest.raises(DivergenceError) as excinfo:
        run_ista(model, lambda z: z, cfg)
    assert excinfo.value.trace is not None


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(gamma=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(gamma=0.1, batch_size=0)
    with pytest.raises(ConfigurationError):
        SolverConfig(gamma=0.1, q_schedule="nesterov")


# ----------------------------------------------------------- counter-example

def test_counterexample_always_upper_branch_exact():
    z = run_counterexample(0.5, 1.0, 1.0, 0.1, 10_000)
    # bitwise identical to an independently coded scalar recursion
    ref, cur = [0.1], 0.1
    for _ in range(10_000):
        x = cur + 1.0 * math.copysign(1.0, cur) if cur != 0.0 else 0.0
        cur = x - 0.5 * huber_gradient(x)
        ref.append(cur)
    assert np.array_equal(z, np.asarray(ref))
    # closed form 0.1 + 0.5 k up to accumulated floating-point rounding
    ks = np.arange(10_001)
    closed = 0.1 + 0.5 * ks
    assert np.max(np.abs(np.abs(z) - closed)) < 1e-11


def test_counterexample_divergence_bound_random_triples():
    rng = np.random.default_rng(0)
    count = 0
    while count < 20:
        gamma = rng.uniform(0.05, 0.95)
        c = rng.uniform(0.5, 4.0)
        sigma = rng.uniform(gamma / math.sqrt(c) * 1.05, 3.0)
        if sigma <= gamma / math.sqrt(c):
            continue
        count += 1
        z0 = rng.uniform(-1.0, 1.0)
        t = 500
        z = run_counterexample(gamma, sigma, c, z0, t)
        drift = sigma * math.sqrt(c) - gamma
        slack = 1e-9 * np.arange(t + 1)          # accumulated rounding
        assert np.all(np.abs(z) + slack >= abs(z0)
                      + np.arange(t + 1) * drift - 1e-12)


def test_counterexample_bounded_when_condition_violated():
    z = run_counterexample(0.5, 0.2, 1.0, 0.1, 10_000)
    assert np.max(np.abs(z)) < 10.0


def test_counterexample_zero_start_stays_on_huber_path():
    # sgn(0) = 0: first step is pure gradient, afterwards shift kicks in
    z = run_counterexample(0.5, 1.0, 1.0, 0.0, 3)
    assert z[0] == 0.0
    assert z[1] == 0.0                           # D(0 - gamma*0) = 0


def test_counterexample_rejects_bad_gamma():
    with pytest.raises(ConfigurationError):
        run_counterexample(1.5, 1.0, 1.0, 0.1, 10)


def test_huber_gradient_branches():
    assert huber_gradient(0.5) == 0.5
    assert huber_gradient(-0.5) == -0.5
    assert huber_gradient(3.0) == 1.0
    assert huber_gradient(-3.0) == -1.0
    assert huber_gradient(0.0) == 0.0


# ------------------------------------------------------------ noise estimate

def test_estimate_gradient_noise_zero_for_single_component():
    model, _ = quadratic_model(I=1, seed=7)
    nu = estimate_gradient_noise(model, np.zeros(model.n), num_draws=50)
    assert nu == pytest.approx(0.0, abs=1e-14)


def test_estimate_gradient_noise_deterministic(small_dt_model):
    model, _ = small_dt_model
    a = estimate_gradient_noise(model, np.zeros(model.n), num_draws=100,
                                seed=4)
    b = estimate_gradient_noise(model, np.zeros(model.n), num_draws=100,
                                seed=4)
    assert a == b


# --------------------------------------------------------------- properties

@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1.0, max_value=1e6))
def test_fista_q_monotone_property(q):
    assert fista_q_update(q) > q


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1 - 1e-6),
       st.floats(min_value=1e-6, max_value=1 - 1e-6))
def test_composition_alpha_in_unit_interval(a1, a2):
    alpha = composition_alpha(a1, a2)
    assert 0.0 < alpha < 1.0
