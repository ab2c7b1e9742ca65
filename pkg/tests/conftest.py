import numpy as np
import pytest

from mhdstab import spectral as sp
from mhdstab.spectral import Grid
from mhdstab.system import Params, State


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture
def params():
    return Params()


def band_field(grid, rng, components=None, kmax=4, zero_mean=True):
    """Random real band-limited spectrum on |k|_inf <= kmax."""
    lead = () if components is None else (components,)
    phys = rng.standard_normal(lead + grid.shape)
    coeffs = sp.to_spectral(grid, phys)
    kinf = np.max(np.abs(grid.k), axis=0)
    coeffs = coeffs * (kinf <= kmax)
    if zero_mean:
        coeffs[..., 0, 0, 0] = 0.0
    return coeffs


def random_state(grid, rng, size=0.1, index=4.0, kmax=4):
    """Random admissible state with ||.||_{H^index} = size and div b = 0."""
    data = band_field(grid, rng, components=8, kmax=kmax)
    data[5:8] = sp.leray_project(grid, data[5:8])
    data *= size / sp.sobolev_norm(grid, data, index)
    return State(grid, data)


# one verdict line per acceptance criterion, printed after the run
VERDICTS: dict[str, tuple[bool, str]] = {}


def verdict(name: str, ok: bool, detail: str) -> bool:
    VERDICTS[name] = (bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(VERDICTS, key=lambda n: int(n[1:])):
        ok, detail = VERDICTS[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
