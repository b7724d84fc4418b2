"""Batch and online solvers: ISTA/FISTA, ADMM, PnP-ISTA, PnP-ADMM, PnP-SGD.

All runs are seed-deterministic state machines. Traces record the squared
distance to the fixed-point operator P(x) = denoise(x - gamma * grad d(x)),
computed with the full gradient even inside stochastic runs.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from pnp_online.errors import ConfigurationError, DivergenceError
from pnp_online.forward import (CyclingSampler, grad_full,
                                gradient_from_indices, prox_datafit)

DIVERGENCE_FACTOR = 1e6
ITERATE_SNAPSHOT_LIMIT = 4096


@dataclass
class SolverConfig:
    gamma: float
    sigma: float = 0.0
    iterations: int = 100
    batch_size: int = 1
    q_schedule: str = "constant"   # "constant" (q_k = 1) or "fista"
    seed: int = 0
    record_trace: bool = True
    record_timing: bool = True
    dist_stride: int | None = None
    sample_mode: str = "replacement"  # "replacement", "cycle", or "full"
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be nonnegative")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.q_schedule not in ("constant", "fista"):
            raise ConfigurationError("q_schedule must be 'constant' or 'fista'")
        if self.sample_mode not in ("replacement", "cycle", "full"):
            raise ConfigurationError(
                "sample_mode must be 'replacement', 'cycle', or 'full'")


@dataclass
class IterateTrace:
    dist: list = field(default_factory=list)
    snr: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    iterates: list | None = None
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.dist)


def fista_q_update(q_prev):
    """q_k = (1/2)(1 + sqrt(1 + 4 q_{k-1}^2)); strictly increasing from 1."""
    if q_prev < 1.0:
        raise ConfigurationError("q_prev must be >= 1")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * q_prev * q_prev))


def prop2_bound(theta, x0_minus_xstar_sq, t):
    """Batch running-average fixed-point distance bound."""
    if not 0.0 < theta < 1.0:
        raise ConfigurationError("theta must lie in (0, 1)")
    if t < 1:
        raise ConfigurationError("t must be >= 1")
    return (2.0 / t) * ((1.0 + theta) / (1.0 - theta)) * x0_minus_xstar_sq


def sgd_bound(theta, gamma, nu, B, x0_dist, t):
    """Stochastic running-average fixed-point distance bound (in expectation)."""
    if not 0.0 < theta < 1.0:
        raise ConfigurationError("theta must lie in (0, 1)")
    if min(gamma, B, t) <= 0 or nu < 0 or x0_dist < 0:
        raise ConfigurationError("sgd_bound arguments must be positive")
    factor = 2.0 * (1.0 + theta) / (1.0 - theta)
    return factor * (gamma * gamma * nu * nu / B
                     + 2.0 * gamma * nu / math.sqrt(B) * x0_dist
                     + x0_dist * x0_dist / t)


def corollary1_constant(theta, x0_dist, nu, L):
    """A = 2((1+theta)/(1-theta)) (||x0 - x*|| + nu/L)^2."""
    return 2.0 * (1.0 + theta) / (1.0 - theta) * (x0_dist + nu / L) ** 2


def composition_alpha(alpha1, alpha2):
    """Averagedness constant of the composition of two averaged operators."""
    for a in (alpha1, alpha2):
        if not 0.0 < a < 1.0:
            raise ConfigurationError("alphas must lie in (0, 1)")
    return (alpha1 + alpha2 - 2.0 * alpha1 * alpha2) / (1.0 - alpha1 * alpha2)


def operator_P(model, denoiser, gamma, sigma, x):
    """P(x) = denoise(x - gamma * grad d(x)) on flat vectors."""
    z = x - gamma * grad_full(model, x)
    return denoiser.denoise(z.reshape(model.shape), sigma).ravel()


def _snr_or_nan(truth, x):
    if truth is None:
        return math.nan
    from pnp_online.metrics import snr_db
    return snr_db(truth, x)


class _TraceRecorder:
    """Shared per-iteration bookkeeping for all solver loops."""

    def __init__(self, model, config, x0, dist_fn, truth):
        self.model = model
        self.config = config
        self.dist_fn = dist_fn
        self.truth = truth
        self.x0_norm = float(np.linalg.norm(x0))
        stride = config.dist_stride
        if stride is None:
            stride = 1 if model.n <= ITERATE_SNAPSHOT_LIMIT else 10
        self.stride = stride
        self.trace = IterateTrace()
        if config.record_trace and model.n <= ITERATE_SNAPSHOT_LIMIT:
            self.trace.iterates = []
        self.start = time.perf_counter()

    def check_divergence(self, x):
        if not np.all(np.isfinite(x)):
            raise DivergenceError("NaN or Inf in iterate", trace=self.trace)
        if np.linalg.norm(x) > DIVERGENCE_FACTOR * (1.0 + self.x0_norm):
            raise DivergenceError("iterate norm exceeded safety bound",
                                  trace=self.trace)

    def record(self, k, x, indices=None):
        if not self.config.record_trace:
            return
        if k % self.stride == 0 or k == self.config.iterations:
            dist = self.dist_fn(x)
        else:
            dist = math.nan
        self.trace.dist.append(dist)
        self.trace.snr.append(_snr_or_nan(self.truth, x))
        elapsed = (time.perf_counter() - self.start
                   if self.config.record_timing else 0.0)
        self.trace.elapsed.append(elapsed)
        self.trace.indices.append(None if indices is None
                                  else np.asarray(indices).copy())
        if self.trace.iterates is not None:
            self.trace.iterates.append(x.copy())


def _initial_iterate(model, config):
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float).ravel().copy()
        if x0.size != model.n:
            raise ConfigurationError("x0 length mismatch")
        return x0
    return np.zeros(model.n)


def _momentum_coefficient(config, q_prev):
    if config.q_schedule == "fista":
        q_new = fista_q_update(q_prev)
    else:
        q_new = 1.0
    return (q_prev - 1.0) / q_new, q_new


def _run_forward_backward(model, config, gradient_step, backward_step,
                          dist_fn, truth):
    """Shared forward-backward loop; variants differ only in the two steps."""
    x = _initial_iterate(model, config)
    s = x.copy()
    q_prev = 1.0
    recorder = _TraceRecorder(model, config, x, dist_fn, truth)
    for k in range(1, config.iterations + 1):
        grad, indices = gradient_step(s, k)
        z = s - config.gamma * grad
        x_new = backward_step(z)
        recorder.check_divergence(x_new)
        beta, q_prev = _momentum_coefficient(config, q_prev)
        s = x_new + beta * (x_new - x)
        x = x_new
        recorder.record(k, x, indices)
    return x, recorder.trace


def run_ista(model, regularizer_prox, config, truth=None):
    """ISTA/FISTA: gradient step on d, then the regularizer prox.

    regularizer_prox maps a flat vector to a flat vector and already
    captures gamma*lambda.
    """
    def gradient_step(s, _k):
        return grad_full(model, s), None

    def dist_fn(x):
        px = regularizer_prox(x - config.gamma * grad_full(model, x))
        return float(np.sum((x - px) ** 2))

    return _run_forward_backward(model, config, gradient_step,
                                 regularizer_prox, dist_fn, truth)


def run_pnp_ista(model, denoiser, config, truth=None):
    """PnP-ISTA: gradient step on d, then the plugged-in denoiser."""
    def gradient_step(s, _k):
        return grad_full(model, s), None

    def backward_step(z):
        return denoiser.denoise(z.reshape(model.shape), config.sigma).ravel()

    def dist_fn(x):
        return float(np.sum((x - operator_P(model, denoiser, config.gamma,
                                            config.sigma, x)) ** 2))

    return _run_forward_backward(model, config, gradient_step, backward_step,
                                 dist_fn, truth)


def run_pnp_sgd(model, denoiser, config, truth=None):
    """PnP-SGD: minibatch gradient step, then the denoiser.

    sample_mode "replacement" draws independent uniform indices (the
    analyzed estimator); "cycle" randomly cycles through all components
    without replacement; "full" always uses every component in order.
    """
    rng = np.random.default_rng(config.seed)
    sampler = (CyclingSampler(model.num_components, rng)
               if config.sample_mode == "cycle" else None)

    def gradient_step(s, _k):
        if config.sample_mode == "full":
            # deterministic full batch: no indices recorded, so the trace is
            # indistinguishable from the batch algorithm it degenerates to
            return grad_full(model, s), None
        if config.sample_mode == "cycle":
            indices = sampler.draw(config.batch_size)
        else:
            indices = rng.integers(0, model.num_components,
                                   size=config.batch_size)
        return gradient_from_indices(model, indices, s), indices

    def backward_step(z):
        return denoiser.denoise(z.reshape(model.shape), config.sigma).ravel()

    def dist_fn(x):
        return float(np.sum((x - operator_P(model, denoiser, config.gamma,
                                            config.sigma, x)) ** 2))

    return _run_forward_backward(model, config, gradient_step, backward_step,
                                 dist_fn, truth)


def _run_admm_family(model, config, backward_step, dist_fn, truth,
                     prox_tol=1e-12):
    """Shared ADMM loop with dual variable started at zero."""
    x = _initial_iterate(model, config)
    s = np.zeros(model.n)
    recorder = _TraceRecorder(model, config, x, dist_fn, truth)
    for k in range(1, config.iterations + 1):
        z, info = prox_datafit(model, config.gamma, x - s, tol=prox_tol,
                               return_info=True)
        if not info.converged:
            recorder.trace.warnings.append(
                f"iteration {k}: inner CG stopped at relative residual "
                f"{info.relative_residual:.3e}")
        x = backward_step(z + s)
        recorder.check_divergence(x)
        s = s + (z - x)
        recorder.record(k, x)
    return x, recorder.trace


def run_admm(model, regularizer_prox, config, truth=None):
    """ADMM with the data prox solved by CG."""
    def dist_fn(x):
        px = regularizer_prox(x - config.gamma * grad_full(model, x))
        return float(np.sum((x - px) ** 2))

    return _run_admm_family(model, config, regularizer_prox, dist_fn, truth)


def run_pnp_admm(model, denoiser, config, truth=None):
    """PnP-ADMM with the data prox solved by CG."""
    def backward_step(v):
        return denoiser.denoise(v.reshape(model.shape), config.sigma).ravel()

    def dist_fn(x):
        return float(np.sum((x - operator_P(model, denoiser, config.gamma,
                                            config.sigma, x)) ** 2))

    return _run_admm_family(model, config, backward_step, dist_fn, truth)


def huber_gradient(x):
    """Derivative of the Huber function: x on [-1, 1], sign(x) outside."""
    if abs(x) <= 1.0:
        return x
    return math.copysign(1.0, x)


def run_counterexample(gamma, sigma, c, z0, t):
    """Scalar PnP-ISTA (q_k = 1) with Huber fidelity and the shift denoiser.

    Returns the array [z^0, ..., z^t]. For sigma > gamma/sqrt(c) the
    iterates diverge linearly; the run is allowed regardless so the bounded
    regime can be observed too.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    if sigma <= 0 or c <= 0:
        raise ConfigurationError("sigma and c must be positive")
    shift = sigma * math.sqrt(c)
    z = float(z0)
    trace = [z]
    for _ in range(t):
        x = z + shift * math.copysign(1.0, z) if z != 0.0 else 0.0
        z = x - gamma * huber_gradient(x)
        trace.append(z)
    return np.asarray(trace)


def estimate_gradient_noise(model, x0, num_draws=1000, B=1, seed=0):
    """Monte-Carlo estimate of nu: rms of ||grad d - minibatch grad|| * sqrt(B).

    Evaluated at x0 as a proxy for the global constant of the variance
    assumption.
    """
    from pnp_online.forward import grad_minibatch

    rng = np.random.default_rng(seed)
    full = grad_full(model, x0)
    total = 0.0
    for _ in range(num_draws):
        g, _ = grad_minibatch(model, x0, B, rng)
        diff = full - g
        total += float(diff @ diff)
    return math.sqrt(total / num_draws) * math.sqrt(B)
