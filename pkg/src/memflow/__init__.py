"""memflow: finite-volume simulation of electron, hole, and oxygen-vacancy
transport in memristive devices, with built-in certification of free-energy
decay, vacancy mass conservation, and density bounds."""

from .device import (BoundaryData, ConstantProfile, ContactSegment,
                     DeviceMesh, InitialDataError, LinearProfile, MeshError,
                     MeshGeometry, ModelParameters, PiecewiseProfile,
                     SystemState, TabulatedProfile, build_mesh,
                     equilibrium_state, lambda_const, validate_initial_data)
from .diagnostics import (EnergyReport, boundedness_monitor,
                          check_energy_inequality, dissipation, energy_report,
                          free_energy, neumann_poincare_constant,
                          poincare_check)
from .solver import (EdgeFlux, NonConvergenceError, SolverConfig,
                     StepRejectedError, TimeSchedule, Trajectory, advance,
                     assemble_fluxes, run_transient, solve_poisson)
from .statistics import (BLAKEMORE, FERMI_DIRAC_HALF, CarrierStatistics,
                         FermiDiracOrder, SaturationError, antideriv_G,
                         antideriv_H, blakemore_h, blakemore_h_prime,
                         fermi_dirac, fermi_dirac_quad, g_prime, g_tilde,
                         gamma_fn, h_tilde, inverse_fd_half, relative_energy)

__version__ = "0.1.0"
