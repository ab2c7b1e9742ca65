"""Binary checkpoints.

Layout (little-endian throughout)::

    b"MHDS"            magic
    int32              format version
    int32              grid size M
    float64 x 7        R, kappa, sigma, n1, n2, n3, t
    complex128 x 8 M^3 coefficients, field-major (a, u1, u2, u3, theta, b1, b2, b3),
                       wavevectors in lexicographic order of signed (k1, k2, k3),
                       each k_i running from -M/2 to M/2 - 1

Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import MHDStabError
from .spectral import Grid
from .system import Params, State

MAGIC = b"MHDS"
VERSION = 1
_HEADER = struct.Struct("<4sii7d")
_AXES = (-3, -2, -1)


class CheckpointError(MHDStabError):
    """A checkpoint file is truncated, corrupt, or of an unknown version."""


def save(path, s: State, p: Params, t: float = 0.0) -> None:
    header = _HEADER.pack(MAGIC, VERSION, s.grid.m, p.R, p.kappa, p.sigma, *p.n_vec, t)
    body = np.ascontiguousarray(sfft.fftshift(s.data, axes=_AXES)).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def load(path) -> tuple[State, Params, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, m, r_gas, kappa, sigma, n1, n2, n3, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    count = 8 * m**3
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise CheckpointError(f"{path}: expected {16 * count} data bytes, found {len(body)}")
    coeffs = np.frombuffer(body, dtype="<c16").reshape(8, m, m, m)
    data = sfft.ifftshift(coeffs, axes=_AXES).astype(np.complex128)
    grid = Grid(m)
    p = Params(R=r_gas, kappa=kappa, sigma=sigma, n=(n1, n2, n3))
    return State(grid, data), p, t
