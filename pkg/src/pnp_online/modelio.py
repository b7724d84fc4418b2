"""PNPM1 binary container for simulated DT measurement sets.

Layout: magic "PNPM1", one format-version byte, a fixed-size header
(dimensions, geometry record, seed, input SNR), then row-major complex64
blocks: the shared scattering matrix S once, followed by one incident
field u_in^i and one measurement vector y_i per illumination. The loader
reconstructs the model bit-exactly from the stored complex64 arrays.
"""

import math
import struct

import numpy as np

from pnp_online.errors import ConfigurationError
from pnp_online.forward import (BornComponentOperator, DtGeometry,
                                MeasurementModel)
from pnp_online.linops import power_iteration_lipschitz

MAGIC = b"PNPM1"
VERSION = 1
_HEADER = struct.Struct("<B III dddd III B q d")
_INCIDENT_CODES = {"point": 0, "plane": 1}
_INCIDENT_NAMES = {v: k for k, v in _INCIDENT_CODES.items()}


def save_model(path, model):
    """Serialize a DT MeasurementModel; raises for non-DT models."""
    geometry = model.geometry
    if geometry is None:
        raise ConfigurationError("only DT models carry the PNPM1 geometry record")
    ops = [op for op, _ in model.components]
    if not all(isinstance(op, BornComponentOperator) for op in ops):
        raise ConfigurationError("PNPM1 stores S diag(u_in) factored operators")
    scattering = ops[0].scattering
    n, M, I = model.n, model.M, model.num_components
    snr = model.input_snr_db if model.input_snr_db is not None else math.inf
    header = _HEADER.pack(VERSION, n, M, I,
                          geometry.domain_side, geometry.wavelength,
                          geometry.eps_background, geometry.ring_radius,
                          geometry.grid, geometry.num_transmitters,
                          geometry.num_receivers,
                          _INCIDENT_CODES[geometry.incident],
                          int(model.seed or 0), float(snr))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(np.ascontiguousarray(scattering, dtype=np.complex64).tobytes())
        for op, y in model.components:
            fh.write(np.ascontiguousarray(op.incident_field,
                                          dtype=np.complex64).tobytes())
            fh.write(np.ascontiguousarray(y, dtype=np.complex64).tobytes())


def load_model(path):
    """Load a PNPM1 container back into a MeasurementModel."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigurationError(f"bad magic {magic!r}: not a PNPM1 file")
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ConfigurationError("truncated PNPM1 header")
        (version, n, M, I, domain_side, wavelength, eps_background,
         ring_radius, grid, num_tx, num_rx, incident_code, seed,
         input_snr_db) = _HEADER.unpack(header)
        if version != VERSION:
            raise ConfigurationError(f"unsupported PNPM1 version {version}")
        geometry = DtGeometry(domain_side=domain_side, grid=grid,
                              wavelength=wavelength,
                              eps_background=eps_background,
                              num_transmitters=num_tx, num_receivers=num_rx,
                              ring_radius=ring_radius,
                              incident=_INCIDENT_NAMES[incident_code])
        itemsize = np.dtype(np.complex64).itemsize

        def read_block(count):
            raw = fh.read(count * itemsize)
            if len(raw) != count * itemsize:
                raise ConfigurationError("truncated PNPM1 data block")
            return np.frombuffer(raw, dtype=np.complex64).astype(np.complex64)

        scattering = read_block(M * n).reshape(M, n)
        components = []
        for _ in range(I):
            u_in = read_block(n)
            y = read_block(M)
            components.append((BornComponentOperator(scattering, u_in), y))
    lipschitz = max(power_iteration_lipschitz(op, seed=seed).value
                    for op, _ in components)
    return MeasurementModel(components=components, lipschitz=lipschitz,
                            width=grid, height=grid, geometry=geometry,
                            seed=seed, input_snr_db=input_snr_db)
