import numpy as np
import pytest

from hfbgas.grid import Grid, Field, TrapSpec, lowest_eigenpairs
from hfbgas.hartree import InteractionSpec, minimize_hartree
from hfbgas.thermal import (build_thermal_model, build_thermal_pdm,
                            condensate_amplitude)


@pytest.fixture(scope="session")
def grid64():
    return Grid(1, 64, 8.0)


@pytest.fixture(scope="session")
def grid32():
    return Grid(1, 32, 8.0)


@pytest.fixture(scope="session")
def harmonic():
    return TrapSpec(2.0, 1.0)


@pytest.fixture(scope="session")
def spec64(grid64, harmonic):
    return lowest_eigenpairs(grid64, harmonic, 30)


@pytest.fixture(scope="session")
def spec32(grid32, harmonic):
    return lowest_eigenpairs(grid32, harmonic, 30)


@pytest.fixture(scope="session")
def standard_instance(grid32, harmonic, spec32):
    """The 1d reference instance: N=100, T=0.3, four thermal modes."""
    import warnings
    model = build_thermal_model(harmonic, 100.0, temperature=0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pdm = build_thermal_pdm(model, spec32, target_excited=5.0)
    inter = InteractionSpec(v0=1.0, sigma=1.0, N_scale=100.0)
    hres = minimize_hartree(grid32, harmonic, inter, g=0.95, grad_tol=1e-10)
    phi0 = Field(grid32, condensate_amplitude(model, pdm) * hres.minimizer.values)
    return {"grid": grid32, "trap": harmonic, "spec": spec32, "model": model,
            "pdm": pdm, "inter": inter, "phi0": phi0, "hartree": hres}
