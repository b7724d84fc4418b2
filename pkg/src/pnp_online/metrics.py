"""Reconstruction diagnostics: fixed-point distance, SNR, trace summaries."""

import math
from dataclasses import dataclass

import numpy as np

from pnp_online.errors import ConfigurationError
from pnp_online.solvers import operator_P

SNR_CAP_DB = 300.0


def dist_to_fix(model, denoiser, gamma, sigma, x):
    """Squared distance ||x - P(x)||^2 to the denoiser-gradient operator."""
    x = np.asarray(x, dtype=float).ravel()
    return float(np.sum((x - operator_P(model, denoiser, gamma, sigma, x)) ** 2))


def snr_db(reference, estimate):
    """Signal-to-error ratio 20 log10(||ref|| / ||est - ref||), capped at 300 dB."""
    reference = np.asarray(reference, dtype=float).ravel()
    estimate = np.asarray(estimate, dtype=float).ravel()
    if reference.shape != estimate.shape:
        raise ConfigurationError("reference and estimate dims must match")
    ref_norm = np.linalg.norm(reference)
    if ref_norm == 0.0:
        raise ConfigurationError("reference must not be identically zero")
    err_norm = np.linalg.norm(estimate - reference)
    if err_norm == 0.0:
        return SNR_CAP_DB
    return min(SNR_CAP_DB, 20.0 * math.log10(ref_norm / err_norm))


@dataclass
class TraceSummary:
    min_dist: float
    running_avg_dist: np.ndarray
    final_snr_db: float
    iterations: int
    per_iteration_seconds: float


def summarize(trace):
    """Aggregate a trace: min dist, running averages, final SNR, timing.

    NaN dist entries (skipped by the recording stride) are ignored; the
    running average at t is the mean of the recorded dist values up to t.
    """
    if len(trace) == 0:
        raise ConfigurationError("trace must be nonempty")
    dist = np.asarray(trace.dist, dtype=float)
    recorded = ~np.isnan(dist)
    if not np.any(recorded):
        raise ConfigurationError("trace has no recorded dist values")
    cumsum = np.cumsum(np.where(recorded, dist, 0.0))
    counts = np.cumsum(recorded)
    running = np.where(counts > 0, cumsum / np.maximum(counts, 1), math.nan)
    elapsed = trace.elapsed[-1] if trace.elapsed else 0.0
    return TraceSummary(min_dist=float(np.nanmin(dist)),
                        running_avg_dist=running,
                        final_snr_db=float(trace.snr[-1]) if trace.snr else math.nan,
                        iterations=len(trace),
                        per_iteration_seconds=float(elapsed) / len(trace))
