"""Implicit finite-volume solver for the coupled three-species system.

One backward-Euler step solves, per cell K and species density rho with
chemical potential phi,

    m(K) (rho_K - rho_K^old) = dt * sum_edges (m(sigma)/d) a_edge (phi_L - phi_K),

coupled to the discrete Poisson equation.  The primal unknowns are the
chemical potentials phi_n, phi_p, phi_D, so n, p > 0 and 0 < D < 1 hold by
construction and the Blakemore singularity at D = 1 never enters the Newton
iteration.  The outer loop is a Gummel sweep (nonlinear Poisson with frozen
potentials, then one damped-Newton transport solve per species against the
frozen electric potential); backward Euler plus the convexity of the free
energy make the scheme dissipative for equilibrium boundary data.

The decoupled sweep contracts at a rate that degrades as the squared Debye
length shrinks; strongly screened devices (lambda well below the device
scale) need a larger gummel_max_iter, not a smaller step, since the rate is
nearly dt-independent.  Sweeps fail fast on stalls and blow-ups so the
adaptive step controller retries cheaply.

The vacancy equation has no-flux conditions on the whole boundary, so its
cell-mass total telescopes: its Newton iteration is pushed to the residual
floor, which conserves the vacancy mass to ~1e-13 over thousands of steps.

Edge densities ("mean" of the adjacent cells by default, "upwind"
selectable) are shared with the dissipation functional in diagnostics, so
dissipation equals sum(flux * potential drop) identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

from . import statistics as stats
from .device import (BoundaryData, DeviceMesh, ModelParameters, SystemState,
                     edge_density, lambda_const)
from .statistics import BLAKEMORE, FERMI_DIRAC_HALF, SaturationError

__all__ = [
    "SolverConfig",
    "EdgeFlux",
    "StepReport",
    "TimeSchedule",
    "Trajectory",
    "NonConvergenceError",
    "StepRejectedError",
    "solve_poisson",
    "assemble_fluxes",
    "advance",
    "run_transient",
    "write_step_log",
    "write_flux_norms",
]


class NonConvergenceError(RuntimeError):
    """Nonlinear iteration failed to converge; the caller should reduce dt."""


class StepRejectedError(RuntimeError):
    """A converged step violated a state bound (vacancy saturation)."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and stepping policy.  All tolerances are strictly positive;
    the adaptive step is confined to [dt_min, dt_max]."""

    dt: float = 1e-2
    dt_min: float = 1e-8
    dt_max: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    gummel_tol: float = 1e-9
    gummel_max_iter: int = 100
    damping: float = 0.5
    saturation_eps: float = 1e-12
    edge_scheme: str = "mean"       # or "upwind"
    adaptive: bool = True
    dt_grow: float = 1.2
    dt_shrink: float = 0.5
    easy_gummel_iters: int = 6

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.gummel_tol > 0
                and self.saturation_eps > 0):
            raise ValueError("solver tolerances must be positive")
        if not (0.0 < self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt <= dt_max")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping factor must lie in (0, 1)")


# ---------------------------------------------------------------------------
# Poisson
# ---------------------------------------------------------------------------

class PoissonOperator:
    """Prefactored two-point-flux Laplacian with Dirichlet contacts.

    The matrix depends only on mesh, boundary layout and lambda, so one LU
    factorization serves a whole transient run.
    """

    def __init__(self, mesh: DeviceMesh, bc: BoundaryData,
                 params: ModelParameters):
        self.mesh = mesh
        self.bc = bc
        self.lam2 = params.lam ** 2
        nc = mesh.n_cells
        k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
        t = self.lam2 * mesh.edge_transmissibility
        de = mesh.dirichlet_edges
        kb = mesh.bedge_cells[de]
        tb = self.lam2 * mesh.bedge_transmissibility[de]
        rows = np.concatenate([k0, k1, k0, k1, kb])
        cols = np.concatenate([k0, k1, k1, k0, kb])
        vals = np.concatenate([t, t, -t, -t, tb])
        self.matrix = csc_matrix((vals, (rows, cols)), shape=(nc, nc))
        self._lu = splu(self.matrix)
        self._bc_rhs = np.zeros(nc)
        np.add.at(self._bc_rhs, kb, tb * bc.V_trace)

    def solve(self, charge: np.ndarray) -> np.ndarray:
        """Potential for given space charge rho = n - p - D + A."""
        rhs = self._bc_rhs - self.mesh.cell_measures * charge
        return self._lu.solve(rhs)

    def residual(self, V: np.ndarray, charge: np.ndarray) -> np.ndarray:
        return self.matrix @ V - (self._bc_rhs - self.mesh.cell_measures * charge)

    def solve_nonlinear(self, phi_n, phi_p, phi_D, V0, params,
                        tol: float, max_iter: int = 60) -> np.ndarray:
        """Newton solve of the Poisson equation with frozen quasi-Fermi
        potentials; the density response adds a nonnegative diagonal, so the
        linearization stays an M-matrix and plain Newton is robust."""
        m = self.mesh.cell_measures
        V = V0.copy()
        scale = max(1.0, float(np.max(np.abs(m * params.doping))))
        for _ in range(max_iter):
            n = stats.fermi_dirac(0.5, phi_n + V)
            p = stats.fermi_dirac(0.5, phi_p - V)
            D = stats.fermi_dirac(-1.0, phi_D - V)
            r = self.residual(V, n - p - D + params.doping)
            if np.max(np.abs(r)) <= tol * scale:
                return V
            drho = (stats.fermi_dirac(-0.5, phi_n + V)
                    + stats.fermi_dirac(-0.5, phi_p - V) + D * (1.0 - D))
            jac = self.matrix + csc_matrix(
                (m * drho, (np.arange(len(V)), np.arange(len(V)))),
                shape=self.matrix.shape)
            V = V - splu(jac).solve(r)
        raise NonConvergenceError("nonlinear Poisson solve did not converge")


def solve_poisson(n, p, D, mesh: DeviceMesh, bc: BoundaryData,
                  params: ModelParameters) -> np.ndarray:
    """Potential solving the linear discrete Poisson problem for given
    densities: Dirichlet traces on contact edges, zero flux elsewhere.
    The direct factorization leaves a relative residual near machine
    precision (asserted at 1e-12)."""
    op = PoissonOperator(mesh, bc, params)
    charge = np.asarray(n) - np.asarray(p) - np.asarray(D) + params.doping
    V = op.solve(charge)
    r = op.residual(V, charge)
    scale = max(np.max(np.abs(op.matrix @ V)), np.max(np.abs(V)), 1e-30)
    if np.max(np.abs(r)) > 1e-12 * scale:
        raise NonConvergenceError("linear Poisson residual above 1e-12")
    return V


def solve_equilibrium_potential(alpha_n: float, alpha_p: float,
                                alpha_D: float, V0, mesh, bc, params,
                                tol: float = 1e-13,
                                max_iter: int = 100) -> np.ndarray:
    """Nonlinear Poisson solve with spatially constant quasi-Fermi levels."""
    op = PoissonOperator(mesh, bc, params)
    nc = mesh.n_cells
    return op.solve_nonlinear(np.full(nc, alpha_n), np.full(nc, alpha_p),
                              np.full(nc, alpha_D), np.asarray(V0, float),
                              params, tol, max_iter)


# ---------------------------------------------------------------------------
# species transport
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Species:
    """Wiring of one species into the common transport form."""

    name: str
    v_sign: float            # statistics argument is phi + v_sign * V
    flux_sign: float         # physical flux = flux_sign * a * grad(phi)
    statistics: object       # CarrierStatistics
    has_contacts: bool       # Dirichlet ghost values on contact edges?


def _species_list() -> tuple[_Species, ...]:
    return (
        _Species("n", +1.0, +1.0, FERMI_DIRAC_HALF, True),
        _Species("p", -1.0, -1.0, FERMI_DIRAC_HALF, True),
        _Species("D", -1.0, -1.0, BLAKEMORE, False),
    )


def _trace_values(spec: _Species, bc: BoundaryData):
    """Ghost chemical potential and density on Dirichlet edges."""
    if not spec.has_contacts:
        return None, None
    if spec.name == "n":
        return bc.phi_n_trace(), bc.n_trace
    return bc.phi_p_trace(), bc.p_trace


def _transport_residual(spec: _Species, phi, V, mass_old, dt, mesh, bc,
                        scheme):
    """Residual of the backward-Euler balance and the edge data behind it."""
    arg = phi + spec.v_sign * V
    rho = spec.statistics.forward(arg)
    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    dphi = phi[k0] - phi[k1]
    trace_phi, trace_rho = _trace_values(spec, bc)
    if trace_phi is not None:
        kb = mesh.bedge_cells[mesh.dirichlet_edges]
        dphib = phi[kb] - trace_phi
    else:
        kb, dphib = None, None
    a, ab = edge_density(mesh, rho, dphi, trace_rho, dphib, scheme)
    t = mesh.edge_transmissibility
    r = mesh.cell_measures * rho - mass_old
    flow = t * a * dphi
    np.add.at(r, k0, dt * flow)
    np.add.at(r, k1, -dt * flow)
    if trace_phi is not None:
        tb = mesh.bedge_transmissibility[mesh.dirichlet_edges]
        np.add.at(r, kb, dt * tb * ab * dphib)
    return r, rho, arg, (a, ab, dphi, dphib, kb)


def _transport_jacobian(spec: _Species, phi, V, dt, mesh, bc, scheme,
                        rho, arg, edge_data):
    a, ab, dphi, dphib, kb = edge_data
    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    t = mesh.edge_transmissibility
    drho = spec.statistics.slope(arg)
    nc = mesh.n_cells
    if scheme == "mean":
        da0 = 0.5 * drho[k0]
        da1 = 0.5 * drho[k1]
    else:
        up0 = dphi >= 0.0
        da0 = np.where(up0, drho[k0], 0.0)
        da1 = np.where(up0, 0.0, drho[k1])
    # residual row K gains +dt * t * a * (phi_K - phi_L) on edges K|L
    d00 = dt * t * (a + da0 * dphi)
    d01 = dt * t * (-a + da1 * dphi)
    d11 = dt * t * (a - da1 * dphi)
    d10 = dt * t * (-a - da0 * dphi)
    rows = [k0, k0, k1, k1, np.arange(nc)]
    cols = [k0, k1, k1, k0, np.arange(nc)]
    vals = [d00, d01, d11, d10, mesh.cell_measures * drho]
    if kb is not None:
        tb = mesh.bedge_transmissibility[mesh.dirichlet_edges]
        if scheme == "mean":
            dab = 0.5 * drho[kb]
        else:
            dab = np.where(dphib >= 0.0, drho[kb], 0.0)
        rows.append(kb)
        cols.append(kb)
        vals.append(dt * tb * (ab + dab * dphib))
    return csc_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nc, nc))


def _newton_transport(spec: _Species, phi0, V, mass_old, dt, mesh, bc,
                      config: SolverConfig, tol_abs: float,
                      to_floor: bool = False):
    """Damped Newton solve of one species' transport equation, frozen V.

    With ``to_floor`` the iteration continues to the rounding floor of the
    residual (used for the vacancy species, whose total mass then telescopes
    exactly up to rounding).
    """
    phi = phi0.copy()
    r, rho, arg, edata = _transport_residual(spec, phi, V, mass_old, dt,
                                             mesh, bc, config.edge_scheme)
    rnorm = float(np.max(np.abs(r)))
    iters = 0
    floor_tol = 1e-15 * max(1.0, float(np.max(np.abs(mass_old))))
    target = floor_tol if to_floor else tol_abs
    while rnorm > target and iters < config.newton_max_iter:
        jac = _transport_jacobian(spec, phi, V, dt, mesh, bc,
                                  config.edge_scheme, rho, arg, edata)
        try:
            step = splu(jac).solve(-r)
        except RuntimeError as exc:
            raise NonConvergenceError(
                f"singular transport Jacobian for species {spec.name}") from exc
        s = 1.0
        best = None
        for _ in range(30):
            phi_try = phi + s * step
            r_try, rho_t, arg_t, ed_t = _transport_residual(
                spec, phi_try, V, mass_old, dt, mesh, bc, config.edge_scheme)
            rn_try = float(np.max(np.abs(r_try)))
            if rn_try < rnorm:
                best = (phi_try, r_try, rho_t, arg_t, ed_t, rn_try)
                break
            s *= config.damping
        if best is None:
            if to_floor and rnorm <= tol_abs:
                break  # already below the ordinary tolerance; floor reached
            raise NonConvergenceError(
                f"line search stalled for species {spec.name} "
                f"(residual {rnorm:.3e})")
        phi, r, rho, arg, edata, rnorm_new = best
        iters += 1
        if to_floor and rnorm_new >= 0.5 * rnorm and rnorm_new <= tol_abs:
            rnorm = rnorm_new
            break  # converged and no longer contracting: rounding floor
        rnorm = rnorm_new
    if rnorm > tol_abs:
        raise NonConvergenceError(
            f"transport Newton for species {spec.name} stopped at residual "
            f"{rnorm:.3e} > {tol_abs:.3e}")
    return phi, rho, iters, rnorm


# ---------------------------------------------------------------------------
# fluxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeFlux:
    """Species fluxes integrated over edges (flux density times interface
    measure), oriented from edge_cells[:, 0] to edge_cells[:, 1]; boundary
    entries are oriented outward.  No-flux constraints hold by construction:
    J_D vanishes on the whole boundary, J_n and J_p on Neumann edges."""

    J_n: np.ndarray
    J_p: np.ndarray
    J_D: np.ndarray
    bJ_n: np.ndarray
    bJ_p: np.ndarray
    bJ_D: np.ndarray


def assemble_fluxes(state: SystemState, mesh: DeviceMesh, bc: BoundaryData,
                    config: SolverConfig = SolverConfig()) -> EdgeFlux:
    """Two-point fluxes of the current state.

    Raises SaturationError when the vacancy density is within half a guard
    distance of saturation; the caller treats that as a step rejection.
    """
    if np.max(state.D) >= 1.0 - 0.5 * config.saturation_eps:
        raise SaturationError(
            "vacancy density reached the saturation guard; reject the step")
    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    t = mesh.edge_transmissibility
    nb = mesh.bedge_cells.shape[0]
    out = {}
    bout = {}
    for spec in _species_list():
        phi = getattr(state, f"phi_{spec.name}")
        rho = getattr(state, spec.name)
        dphi = phi[k0] - phi[k1]
        trace_phi, trace_rho = _trace_values(spec, bc)
        dphib = None
        if trace_phi is not None:
            kb = mesh.bedge_cells[mesh.dirichlet_edges]
            dphib = phi[kb] - trace_phi
        a, ab = edge_density(mesh, rho, dphi, trace_rho, dphib,
                             config.edge_scheme)
        # physical flux across sigma in the 0 -> 1 orientation
        out[spec.name] = spec.flux_sign * t * a * (-dphi)
        bflux = np.zeros(nb)
        if trace_phi is not None:
            # outward orientation: the ghost trace plays the far-side role
            tb = mesh.bedge_transmissibility[mesh.dirichlet_edges]
            bflux[mesh.dirichlet_edges] = spec.flux_sign * tb * ab * (-dphib)
        bout[spec.name] = bflux
    return EdgeFlux(J_n=out["n"], J_p=out["p"], J_D=out["D"],
                    bJ_n=bout["n"], bJ_p=bout["p"], bJ_D=bout["D"])


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    t: float
    dt: float
    gummel_iters: int
    newton_iters: int
    residual: float


def advance(state: SystemState, dt: float, mesh: DeviceMesh,
            bc: BoundaryData, params: ModelParameters,
            config: SolverConfig,
            poisson: PoissonOperator | None = None
            ) -> tuple[SystemState, StepReport]:
    """One backward-Euler step by Gummel iteration.

    Each sweep solves the nonlinear Poisson equation with frozen chemical
    potentials, then one transport Newton per species against the frozen
    potential; convergence is measured on the coupled residual.  On success
    the new state is nonnegative with the vacancy density inside the
    saturation guard; NonConvergenceError and StepRejectedError tell the
    caller to retry with a smaller step.
    """
    if poisson is None:
        poisson = PoissonOperator(mesh, bc, params)
    m = mesh.cell_measures
    mass_old = {s.name: m * getattr(state, s.name) for s in _species_list()}
    scale = max(1.0, max(float(np.max(np.abs(v))) for v in mass_old.values()))
    phi = {s.name: getattr(state, f"phi_{s.name}").copy()
           for s in _species_list()}
    V = state.V.copy()
    newton_total = 0
    residual = np.inf
    converged = False
    gummel_iters = 0
    best_history: list[float] = []
    for gummel_iters in range(1, config.gummel_max_iter + 1):
        V = poisson.solve_nonlinear(phi["n"], phi["p"], phi["D"], V, params,
                                    tol=min(config.gummel_tol,
                                            config.newton_tol))
        for spec in _species_list():
            phi_s, rho_s, iters, _ = _newton_transport(
                spec, phi[spec.name], V, mass_old[spec.name], dt, mesh, bc,
                config, tol_abs=config.newton_tol * scale,
                to_floor=(spec.name == "D"))
            phi[spec.name] = phi_s
            newton_total += iters
        # coupled residual: transport residuals at the current V plus the
        # Poisson residual at the current potentials
        res = 0.0
        for spec in _species_list():
            r, _, _, _ = _transport_residual(
                spec, phi[spec.name], V, mass_old[spec.name], dt, mesh, bc,
                config.edge_scheme)
            res = max(res, float(np.max(np.abs(r))))
        n = stats.fermi_dirac(0.5, phi["n"] + V)
        p = stats.fermi_dirac(0.5, phi["p"] - V)
        D = stats.fermi_dirac(-1.0, phi["D"] - V)
        rp = poisson.residual(V, n - p - D + params.doping)
        res = max(res, float(np.max(np.abs(rp))))
        residual = res
        if res <= config.gummel_tol * scale:
            converged = True
            break
        # fail fast on blow-ups and hopeless stalls instead of burning the
        # whole budget: estimate the contraction rate over a trailing window
        # and bail once the remaining sweeps provably cannot reach tolerance
        best = min(best_history[-1], res) if best_history else res
        best_history.append(best)
        if res > 100.0 * max(best, config.gummel_tol * scale):
            raise NonConvergenceError(
                f"Gummel iteration diverged to residual {res:.3e} after "
                f"{gummel_iters} sweeps (best {best:.3e})")
        if len(best_history) >= 16:
            window = best_history[-1] / best_history[-16]
            remaining = config.gummel_max_iter - gummel_iters
            target = config.gummel_tol * scale
            if window >= 1.0:
                needed = np.inf
            else:
                rate = window ** (1.0 / 15.0)
                needed = np.log(target / best_history[-1]) / np.log(rate)
            if needed > 1.2 * remaining + 10:
                raise NonConvergenceError(
                    f"Gummel iteration stalled at residual {res:.3e} after "
                    f"{gummel_iters} sweeps (estimated {needed:.0f} more "
                    f"needed, {remaining} available)")
    if not converged:
        raise NonConvergenceError(
            f"Gummel iteration stopped at residual {residual:.3e} after "
            f"{gummel_iters} sweeps")
    new_state = SystemState.from_potentials(state.t + dt, phi["n"], phi["p"],
                                            phi["D"], V)
    if np.max(new_state.D) > 1.0 - config.saturation_eps:
        raise StepRejectedError(
            "converged step breached the vacancy saturation guard")
    # structural guarantees of the potential variables, asserted anyway
    assert float(np.min(new_state.n)) >= 0.0
    assert float(np.min(new_state.p)) >= 0.0
    assert float(np.min(new_state.D)) >= 0.0
    return new_state, StepReport(t=new_state.t, dt=dt,
                                 gummel_iters=gummel_iters,
                                 newton_iters=newton_total,
                                 residual=residual)


@dataclass(frozen=True)
class TimeSchedule:
    """Horizon and the times at which full states are dumped.  Steps land on
    dump times exactly (the step is clipped, not interpolated)."""

    t_end: float
    dump_times: tuple[float, ...] = ()


@dataclass
class Trajectory:
    """Accepted states with their step and energy reports."""

    states: list
    steps: list
    reports: list
    Lambda: float = 0.0

    def __len__(self):
        return len(self.states)


def run_transient(initial: SystemState, schedule: TimeSchedule,
                  mesh: DeviceMesh, bc: BoundaryData,
                  params: ModelParameters, config: SolverConfig) -> Trajectory:
    """Advance to the final time with adaptive step control.

    The step halves on rejection or non-convergence, grows by dt_grow after
    easy steps, stays inside [dt_min, dt_max], and is clipped to land exactly
    on dump times and the horizon.  Deterministic for fixed inputs.
    Raises NonConvergenceError once dt_min is reached.
    """
    from . import diagnostics

    poisson = PoissonOperator(mesh, bc, params)
    lam_const = lambda_const(bc, mesh)
    traj = Trajectory(states=[initial], steps=[
        StepReport(t=initial.t, dt=0.0, gummel_iters=0, newton_iters=0,
                   residual=0.0)], reports=[], Lambda=lam_const)
    report0 = diagnostics.energy_report(initial, bc, mesh, params, config,
                                        lam_const=lam_const)
    traj.reports.append(report0)

    t_end = schedule.t_end
    landmarks = sorted(set(list(schedule.dump_times) + [t_end]))
    dt_nominal = config.dt
    t = initial.t
    state = initial
    eps_t = 1e-12 * max(1.0, abs(t_end))
    while t < t_end - eps_t:
        next_mark = next(x for x in landmarks if x > t + eps_t)
        dt_used = min(dt_nominal, next_mark - t)
        try:
            new_state, step = advance(state, dt_used, mesh, bc, params,
                                      config, poisson)
        except (NonConvergenceError, StepRejectedError, SaturationError):
            if dt_nominal <= config.dt_min * (1.0 + 1e-12):
                raise NonConvergenceError(
                    f"step failed at t={t} with dt at dt_min={config.dt_min}")
            dt_nominal = max(config.dt_min, dt_nominal * config.dt_shrink)
            continue
        state = new_state
        t = state.t
        traj.states.append(state)
        traj.steps.append(step)
        rep = diagnostics.energy_report(state, bc, mesh, params, config,
                                        lam_const=lam_const,
                                        previous=traj.reports[-1],
                                        dt=step.dt)
        traj.reports.append(rep)
        if config.adaptive and step.gummel_iters <= config.easy_gummel_iters \
                and dt_used >= dt_nominal * (1.0 - 1e-12):
            dt_nominal = min(config.dt_max, dt_nominal * config.dt_grow)
    return traj


# ---------------------------------------------------------------------------
# run artifacts
# ---------------------------------------------------------------------------

STEP_LOG_HEADER = ("step,t,dt,gummel_iters,newton_iters,residual,E,"
                   "dissipation,mass_D,min_n,max_n,min_p,max_p,min_D,max_D,"
                   "energy_decay_ok")


def write_step_log(traj: Trajectory, path) -> None:
    """Per-step CSV log with the fixed schema; floats are written with
    shortest round-trip formatting so identical runs give identical bytes."""
    lines = [STEP_LOG_HEADER]
    for i, (step, rep) in enumerate(zip(traj.steps, traj.reports)):
        row = [str(i), repr(step.t), repr(step.dt), str(step.gummel_iters),
               str(step.newton_iters), repr(step.residual), repr(rep.E),
               repr(rep.dissipation), repr(rep.mass_D),
               repr(rep.min_n), repr(rep.max_n), repr(rep.min_p),
               repr(rep.max_p), repr(rep.min_D), repr(rep.max_D),
               "1" if rep.inequality_verdict else "0"]
        lines.append(",".join(row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_flux_norms(traj: Trajectory, mesh: DeviceMesh, bc: BoundaryData,
                     config: SolverConfig, path) -> None:
    """Discrete flux norms per step, logged for inspection only.

    The density of flux j = J/m(sigma) is weighted with the diamond volume
    m(sigma) d_sigma:  ||j||_q = (sum m d |j|^q)^(1/q), q in {2, 5/4}.
    """
    vol = mesh.edge_measures * mesh.edge_distances
    lines = ["step,t,Jn_l2,Jp_l2,JD_l2,Jn_l54,Jp_l54,JD_l54"]
    for i, state in enumerate(traj.states):
        fx = assemble_fluxes(state, mesh, bc, config)
        cols = [str(i), repr(state.t)]
        for q in (2.0, 1.25):
            for J in (fx.J_n, fx.J_p, fx.J_D):
                j = np.abs(J) / np.maximum(mesh.edge_measures, 1e-300)
                cols.append(repr(float(np.sum(vol * j ** q) ** (1.0 / q))))
        lines.append(",".join(cols))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def dump_state_csv(state: SystemState, mesh: DeviceMesh, path) -> None:
    """Full state dump: cell_id,x[,y],n,p,D,V,phi_n,phi_p,phi_D."""
    dim = mesh.dimension
    header = "cell_id,x" + (",y" if dim == 2 else "") + \
        ",n,p,D,V,phi_n,phi_p,phi_D"
    lines = [header]
    for k in range(mesh.n_cells):
        coords = [repr(float(c)) for c in mesh.cell_centroids[k]]
        vals = [repr(float(f[k])) for f in (state.n, state.p, state.D,
                                            state.V, state.phi_n,
                                            state.phi_p, state.phi_D)]
        lines.append(",".join([str(k)] + coords + vals))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
