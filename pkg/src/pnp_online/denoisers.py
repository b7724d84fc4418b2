"""Denoisers for the plug-and-play slot, with averagedness certificates.

Shipped plug-ins are the anisotropic-TV proximal operator (a true proximal
operator, hence 1/2-averaged) and a symmetric unit-DC-gain convolution
filter whose spectrum lies in [0, 1] (also 1/2-averaged). The shift
denoiser is the bounded-but-divergent counter-example.
"""

import math
from dataclasses import dataclass

import numpy as np

from pnp_online.errors import ConfigurationError


def _grad2d(u):
    """Forward differences with Neumann boundary: last row/column zero."""
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:, :-1] = u[:, 1:] - u[:, :-1]
    dy[:-1, :] = u[1:, :] - u[:-1, :]
    return dx, dy


def _div2d(px, py):
    """Negative adjoint of _grad2d: <grad u, p> = -<u, div p>."""
    div = np.zeros_like(px)
    if px.shape[1] >= 2:
        div[:, 0] = px[:, 0]
        div[:, 1:-1] = px[:, 1:-1] - px[:, :-2]
        div[:, -1] = -px[:, -2]
    if py.shape[0] >= 2:
        div[0, :] += py[0, :]
        div[1:-1, :] += py[1:-1, :] - py[:-2, :]
        div[-1, :] += -py[-2, :]
    return div


def tv_prox(z, lambda_scaled, inner_iters=200, inner_tol=1e-10,
            isotropic=False):
    """Proximal operator of lambda_scaled * ||D x||_1 at the 2D array z.

    Accelerated dual projection: projected FISTA on the dual variable with
    step 1/8 (an upper bound on ||D||^2), stopping on duality gap.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ConfigurationError("tv_prox expects a 2D array")
    if lambda_scaled < 0:
        raise ConfigurationError("lambda_scaled must be nonnegative")
    if lambda_scaled == 0.0:
        return z.copy()

    lam = lambda_scaled
    px = np.zeros_like(z)
    py = np.zeros_like(z)
    qx, qy = px, py
    tau = 0.125
    q_prev = 1.0
    x = z.copy()
    for _ in range(inner_iters):
        x = z + _div2d(qx, qy)
        gx, gy = _grad2d(x)
        nx = qx + tau * gx
        ny = qy + tau * gy
        if isotropic:
            mag = np.sqrt(nx * nx + ny * ny)
            factor = lam / np.maximum(mag, lam)
            px_new = nx * factor
            py_new = ny * factor
        else:
            px_new = np.clip(nx, -lam, lam)
            py_new = np.clip(ny, -lam, lam)
        q_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * q_prev * q_prev))
        beta = (q_prev - 1.0) / q_new
        qx = px_new + beta * (px_new - px)
        qy = py_new + beta * (py_new - py)
        px, py = px_new, py_new
        q_prev = q_new

        x = z + _div2d(px, py)
        gx, gy = _grad2d(x)
        if isotropic:
            penalty = lam * float(np.sum(np.sqrt(gx * gx + gy * gy)))
        else:
            penalty = lam * float(np.sum(np.abs(gx)) + np.sum(np.abs(gy)))
        gap = penalty - float(np.sum(px * gx) + np.sum(py * gy))
        if gap <= inner_tol:
            break
    return z + _div2d(px, py)


def tv_objective(x, z, lambda_scaled, isotropic=False):
    """(1/2)||x - z||^2 + lambda_scaled * TV(x); used by tests and oracles."""
    gx, gy = _grad2d(np.asarray(x, dtype=float))
    if isotropic:
        tv = float(np.sum(np.sqrt(gx * gx + gy * gy)))
    else:
        tv = float(np.sum(np.abs(gx)) + np.sum(np.abs(gy)))
    return 0.5 * float(np.sum((x - z) ** 2)) + lambda_scaled * tv


def averaged_linear_filter(z, sigma, passes=None):
    """Symmetric circular binomial smoothing W z with spectrum in [0, 1].

    One pass convolves each axis with [1/4, 1/2, 1/4] (periodic boundary);
    the DFT symbol is prod (1+cos w)/2 per axis, so W is symmetric PSD with
    unit DC gain and 2W - I is nonexpansive: W is 1/2-averaged. The number
    of passes grows like sigma^2 (diffusion-time mapping).
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ConfigurationError("averaged_linear_filter expects a 2D array")
    if sigma <= 0:
        raise ConfigurationError("sigma must be positive")
    if passes is None:
        passes = max(1, int(round(100.0 * sigma * sigma)))
    out = z
    for _ in range(passes):
        for axis in (0, 1):
            out = (0.5 * out
                   + 0.25 * np.roll(out, 1, axis=axis)
                   + 0.25 * np.roll(out, -1, axis=axis))
    return out


def shift_denoiser(z, sigma, c):
    """Appendix-style bounded counter-example: z + sigma*sqrt(c)*sgn(z)."""
    z = np.asarray(z, dtype=float)
    return z + sigma * math.sqrt(c) * np.sign(z)


class Denoiser:
    """denoise(z, sigma) on 2D arrays, with an optional declared theta."""

    kind = "Identity"
    declared_theta = None

    def denoise(self, z, sigma):
        raise NotImplementedError


class IdentityDenoiser(Denoiser):
    kind = "Identity"
    declared_theta = 0.5  # I = (1-theta)I + theta*I for any theta

    def denoise(self, z, sigma):
        return np.asarray(z, dtype=float).copy()


class TvProxDenoiser(Denoiser):
    """TV prox with strength read through sigma^2 = gamma*lambda."""

    kind = "ProximalTV"
    declared_theta = 0.5

    def __init__(self, inner_iters=200, inner_tol=1e-12, isotropic=False):
        self.inner_iters = inner_iters
        self.inner_tol = inner_tol
        self.isotropic = isotropic

    def denoise(self, z, sigma):
        return tv_prox(z, sigma * sigma, inner_iters=self.inner_iters,
                       inner_tol=self.inner_tol, isotropic=self.isotropic)


class AveragedFilterDenoiser(Denoiser):
    kind = "AveragedLinearFilter"
    declared_theta = 0.5

    def __init__(self, passes=None):
        self.passes = passes

    def denoise(self, z, sigma):
        return averaged_linear_filter(z, sigma, passes=self.passes)


class ShiftDenoiser(Denoiser):
    """Bounded denoiser that is not averaged (divergence counter-example)."""

    kind = "ShiftCounterexample"
    declared_theta = None

    def __init__(self, c=1.0):
        if c <= 0:
            raise ConfigurationError("c must be positive")
        self.c = c

    def denoise(self, z, sigma):
        return shift_denoiser(z, sigma, self.c)


class DampedDenoiser(Denoiser):
    """(1-theta) I + theta * inner; theta-averaged when inner is nonexpansive."""

    kind = "DampedWrapper"

    def __init__(self, inner, theta):
        if not 0.0 < theta < 1.0:
            raise ConfigurationError("theta must lie in (0, 1)")
        self.inner = inner
        self.declared_theta = theta

    def denoise(self, z, sigma):
        z = np.asarray(z, dtype=float)
        return (1.0 - self.declared_theta) * z \
            + self.declared_theta * self.inner.denoise(z, sigma)


def damp(denoiser, theta):
    """Damping wrapper; preserves the fixed points of the wrapped denoiser."""
    return DampedDenoiser(denoiser, theta)


@dataclass
class OperatorCertificate:
    """Empirical falsification record for alpha-averagedness."""

    pairs_tested: int
    max_violation: float
    alpha_tested: float
    passed: bool
    bounded_constant_c: float | None = None


def certify_averaged(denoiser, alpha, sigma, num_pairs=1000, domain_scale=2.0,
                     seed=0, tol=1e-9, shape=(16, 16)):
    """Test the averagedness inequality on random pairs.

    For each sampled pair (x, y) the recorded quantity is
    ||D(x)-D(y)||^2 - ||x-y||^2 + ((1-alpha)/alpha)||x-D(x)-y+D(y)||^2,
    which is <= 0 for every alpha-averaged operator. A pass is evidence,
    a violation is a disproof.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError("alpha must lie in (0, 1)")
    if num_pairs < 1:
        raise ConfigurationError("num_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    ratio = (1.0 - alpha) / alpha
    max_violation = -math.inf
    for _ in range(num_pairs):
        x = rng.uniform(-domain_scale, domain_scale, size=shape)
        y = rng.uniform(-domain_scale, domain_scale, size=shape)
        dx = denoiser.denoise(x, sigma)
        dy = denoiser.denoise(y, sigma)
        lhs = float(np.sum((dx - dy) ** 2))
        dist = float(np.sum((x - y) ** 2))
        corr = float(np.sum((x - dx - y + dy) ** 2))
        max_violation = max(max_violation, lhs - dist + ratio * corr)
    return OperatorCertificate(pairs_tested=num_pairs,
                               max_violation=max_violation,
                               alpha_tested=alpha,
                               passed=max_violation <= tol)


def certify_pair(denoiser, alpha, sigma, x, y):
    """Averagedness violation for one explicit pair (constructive disproof)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = denoiser.denoise(x, sigma)
    dy = denoiser.denoise(y, sigma)
    ratio = (1.0 - alpha) / alpha
    return (float(np.sum((dx - dy) ** 2)) - float(np.sum((x - y) ** 2))
            + ratio * float(np.sum((x - dx - y + dy) ** 2)))


def estimate_bounded_constant(denoiser, sigma, samples):
    """max over samples of (1/n)||D(x)-x||^2 / sigma^2: a lower bound on c."""
    samples = list(samples)
    if not samples:
        raise ConfigurationError("sample set must be nonempty")
    worst = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        dx = denoiser.denoise(x, sigma)
        worst = max(worst, float(np.sum((dx - x) ** 2)) / x.size / (sigma * sigma))
    return worst
