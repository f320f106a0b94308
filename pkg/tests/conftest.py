import numpy as np
import pytest

from memflow import device as dv
from memflow import solver as sv
from memflow import statistics as stats


@pytest.fixture(scope="session", autouse=True)
def warm_statistics_tables():
    """Build the one-time Chebyshev tables up front so individual tests and
    the timed acceptance criteria measure steady-state cost."""
    for j in (-0.5, 0.5, 1.5):
        stats.fermi_dirac(j, 5.0)


def make_1d_setup(cells=16, U=0.0, length=1.0, n_bar=1.0, p_bar=1.0,
                  doping=0.5, lam=1.0, final_time=1.0):
    geom = dv.MeshGeometry(
        dimension=1, lengths=(length,), cells=(cells,),
        contacts=(dv.ContactSegment("left"), dv.ContactSegment("right")))
    mesh = dv.build_mesh(geom)
    v_prof = dv.ConstantProfile(0.0) if U == 0.0 \
        else dv.LinearProfile(0.0, U, length)
    bc = dv.BoundaryData.from_profiles(
        mesh, dv.ConstantProfile(n_bar), dv.ConstantProfile(p_bar), v_prof)
    params = dv.ModelParameters.from_profile(
        mesh, lam=lam, doping=dv.ConstantProfile(doping),
        final_time=final_time)
    return mesh, bc, params


def equilibrium_initial(mesh, bc, params, D0=0.5):
    n0 = bc.n_cell.copy()
    p0 = bc.p_cell.copy()
    return dv.validate_initial_data(n0, p0, np.full(mesh.n_cells, D0),
                                    mesh, bc, params)


def perturbed_initial(mesh, bc, params, amp=0.3, seed=0):
    rng = np.random.default_rng(seed)
    n0 = bc.n_cell * (1.0 + amp * rng.uniform(-1, 1, mesh.n_cells))
    p0 = bc.p_cell * (1.0 + amp * rng.uniform(-1, 1, mesh.n_cells))
    D0 = np.clip(0.5 + amp * rng.uniform(-1, 1, mesh.n_cells), 0.0, 1.0)
    return dv.validate_initial_data(n0, p0, D0, mesh, bc, params)


@pytest.fixture
def setup_1d_16():
    return make_1d_setup(cells=16)


@pytest.fixture(scope="session")
def biased_1d_run():
    """Shared short biased run used by several diagnostics tests."""
    mesh, bc, params = make_1d_setup(cells=16, U=2.0, final_time=0.1)
    state0 = equilibrium_initial(mesh, bc, params)
    config = sv.SolverConfig(dt=2e-3, dt_min=1e-9, dt_max=2e-2)
    traj = sv.run_transient(state0, sv.TimeSchedule(t_end=0.1), mesh, bc,
                            params, config)
    return mesh, bc, params, config, traj
