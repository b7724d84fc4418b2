"""Shared fixtures: small measurement models and phantoms."""

import sys

import numpy as np
import pytest

from pnp_online.forward import (DtGeometry, Image, build_dt_model,
                                build_gaussian_model)
from pnp_online.phantoms import phantom_generate


def make_truth(grid, seed=0, contrast=0.05):
    phantom = phantom_generate("blobs", grid, seed=seed)
    return Image(pixels=phantom.pixels * contrast, width=grid, height=grid)


@pytest.fixture(scope="session")
def small_dt_model():
    """16x16 DT model with 4 illuminations and 12 receivers, 40 dB noise."""
    geometry = DtGeometry(grid=16, num_transmitters=4, num_receivers=12)
    truth = make_truth(16, seed=1)
    model = build_dt_model(geometry, truth, seed=0, input_snr_db=40.0)
    return model, truth


@pytest.fixture(scope="session")
def small_gaussian_model():
    """16-dim real Gaussian model, noiseless."""
    truth = Image(pixels=np.linspace(0.0, 1.0, 16), width=4, height=4)
    model = build_gaussian_model(n=16, M=24, I=4, seed=3, truth=truth)
    return model, truth


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines even with output capture on."""
    module = sys.modules.get("test_acceptance") or sys.modules.get(
        "tests.test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
