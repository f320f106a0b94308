"""Free energy, dissipation, boundary-equilibrium defect, and the runtime
certificates attached to discrete trajectories.

The free energy of a state against the boundary extension is

    E = sum_K m(K) [ Grel(n_K | nbar_K) + Grel(p_K | pbar_K)
                     + H(D_K) + D_K Vbar_K ]
        + (lam^2 / 2) * B(V - Vbar, V - Vbar),

where Grel is the Bregman distance of the carrier anti-derivative, H the
vacancy anti-derivative, and B the edge-wise square form of the discrete
Poisson operator (interior drops plus Dirichlet boundary terms, where the
trace of V - Vbar vanishes).

The dissipation uses exactly the same edge densities as the solver fluxes,
so dissipation == sum(flux * potential drop) holds identically; with
equilibrium boundary data (vanishing defect) backward Euler then satisfies

    E(t_{m+1}) + dt * dissipation(t_{m+1}) <= E(t_m)

up to solver tolerances, which is what ``check_energy_inequality`` asserts
step by step (with half the dissipation, leaving slack).  For biased
boundary data the Gronwall-type certificate is evaluated and reported, not
asserted: its constants are proven for the continuous problem, not for this
discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import statistics as stats
from .device import (BoundaryData, DeviceMesh, ModelParameters, SystemState,
                     edge_density, lambda_const)
from .fixtures import load_truncation_constants

__all__ = [
    "EnergyReport",
    "free_energy",
    "dissipation",
    "energy_report",
    "StepVerdict",
    "check_energy_inequality",
    "BoundednessReport",
    "boundedness_monitor",
    "PoincareResult",
    "poincare_check",
    "neumann_poincare_constant",
    "discrete_w1r_norm",
]

DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class EnergyReport:
    """Energy bookkeeping for one accepted state."""

    t: float
    E: float
    dissipation: float
    Lambda: float
    mass_n: float
    mass_p: float
    mass_D: float
    min_n: float
    max_n: float
    min_p: float
    max_p: float
    min_D: float
    max_D: float
    min_V: float
    max_V: float
    inequality_verdict: bool
    inequality_slack: float

    def __post_init__(self):
        if self.dissipation < 0.0:
            raise ValueError("dissipation is a sum of squares, cannot be < 0")


def _potential_square_form(w: np.ndarray, mesh: DeviceMesh) -> float:
    """B(w, w): interior edge drops plus Dirichlet boundary terms with a
    vanishing trace for w."""
    total = 0.0
    if mesh.n_edges:
        k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
        dw = w[k0] - w[k1]
        total += float(np.sum(mesh.edge_transmissibility * dw * dw))
    de = mesh.dirichlet_edges
    if de.size:
        wb = w[mesh.bedge_cells[de]]
        total += float(np.sum(mesh.bedge_transmissibility[de] * wb * wb))
    return total


def free_energy(state: SystemState, bc: BoundaryData, mesh: DeviceMesh,
                params: ModelParameters) -> float:
    """Free energy of a state relative to the boundary extension.

    Vacuum cells are floored at a tiny positive density before entering the
    carrier terms (the limit value of the relative energy is finite); the
    vacancy term takes its endpoint limits continuously.
    """
    m = mesh.cell_measures
    n = np.maximum(state.n, DENSITY_FLOOR)
    p = np.maximum(state.p, DENSITY_FLOOR)
    rel_n = stats.relative_energy(n, bc.n_cell)
    rel_p = stats.relative_energy(p, bc.p_cell)
    hd = stats.antideriv_H(np.clip(state.D, 0.0, 1.0))
    bulk = float(np.sum(m * (rel_n + rel_p + hd + state.D * bc.V_cell)))
    w = state.V - bc.V_cell
    return bulk + 0.5 * params.lam ** 2 * _potential_square_form(w, mesh)


def _species_quadratic(state: SystemState, mesh: DeviceMesh,
                       bc: BoundaryData, scheme: str) -> float:
    """Sum over species and edges of t * a * (potential drop)^2; the same
    edge densities as the flux assembly."""
    from .solver import _species_list, _trace_values

    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    t = mesh.edge_transmissibility
    total = 0.0
    for spec in _species_list():
        phi = getattr(state, f"phi_{spec.name}")
        rho = getattr(state, spec.name)
        dphi = phi[k0] - phi[k1]
        trace_phi, trace_rho = _trace_values(spec, bc)
        dphib = None
        if trace_phi is not None:
            kb = mesh.bedge_cells[mesh.dirichlet_edges]
            dphib = phi[kb] - trace_phi
        a, ab = edge_density(mesh, rho, dphi, trace_rho, dphib, scheme)
        total += float(np.sum(t * a * dphi * dphi))
        if trace_phi is not None:
            tb = mesh.bedge_transmissibility[mesh.dirichlet_edges]
            total += float(np.sum(tb * ab * dphib * dphib))
    return total


def dissipation(state: SystemState, mesh: DeviceMesh, bc: BoundaryData,
                scheme: str = "mean") -> float:
    """Nonnegative quadratic dissipation functional of a state.

    Equals sum(flux * potential drop) over all edges and species exactly,
    because both sides share the edge-density routine.
    """
    return _species_quadratic(state, mesh, bc, scheme)


def energy_report(state: SystemState, bc: BoundaryData, mesh: DeviceMesh,
                  params: ModelParameters, config=None,
                  lam_const: float | None = None,
                  previous: EnergyReport | None = None,
                  dt: float | None = None) -> EnergyReport:
    """Assemble the per-step report; the inequality verdict compares against
    the previous report with half-dissipation weighting and a slack of ten
    Newton tolerances (vacuous for the first state)."""
    scheme = config.edge_scheme if config is not None else "mean"
    newton_tol = config.newton_tol if config is not None else 1e-10
    E = free_energy(state, bc, mesh, params)
    diss = dissipation(state, mesh, bc, scheme)
    lam = lambda_const(bc, mesh) if lam_const is None else lam_const
    m = mesh.cell_measures
    if previous is None or dt is None:
        verdict, slack = True, 0.0
    else:
        slack = E + 0.5 * dt * diss - previous.E
        verdict = bool(slack <= 10.0 * newton_tol)
    return EnergyReport(
        t=state.t, E=E, dissipation=diss, Lambda=lam,
        mass_n=float(np.sum(m * state.n)), mass_p=float(np.sum(m * state.p)),
        mass_D=float(np.sum(m * state.D)),
        min_n=float(state.n.min()), max_n=float(state.n.max()),
        min_p=float(state.p.min()), max_p=float(state.p.max()),
        min_D=float(state.D.min()), max_D=float(state.D.max()),
        min_V=float(state.V.min()), max_V=float(state.V.max()),
        inequality_verdict=verdict, inequality_slack=float(slack))


# ---------------------------------------------------------------------------
# trajectory certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepVerdict:
    step: int
    t: float
    lhs: float
    rhs: float
    slack: float        # lhs - reference; passes iff slack <= tolerance
    ok: bool
    asserted: bool      # False: reported only (biased boundary data)


def _gronwall_constants(bc: BoundaryData, mesh: DeviceMesh) -> tuple[float, float]:
    """Conservative constants (c, c1) for the growth certificate
    E(t) + half integral of dissipation <= (E0 + c Lambda t) exp(c1 Lambda t).

    Assembled from the frozen lattice constant for s^{5/3} <= C (G(s) + 1)
    and the boundary extension: carrier totals are absorbed into the energy
    through Young's inequality, with a factor-two allowance for the diamond
    overlap of edge densities and the contact traces.
    """
    c53 = load_truncation_constants()["c_53_untruncated"]
    g_hat = float(np.max(np.abs(stats.inverse_fd_half(
        np.concatenate([bc.n_cell, bc.p_cell])))))
    G_hat = float(np.max(
        stats.antideriv_G(np.concatenate([bc.n_cell, bc.p_cell]))
        + g_hat * np.concatenate([bc.n_cell, bc.p_cell])))
    V_hat = float(np.max(np.abs(bc.V_cell)))
    measure = mesh.total_measure
    tau = min(1.0, (5.0 / (6.0 * c53 * max(g_hat, 1e-300))) ** 0.6)
    c_a = 1.2 * tau ** (5.0 / 3.0) * c53
    c_b = (c_a * V_hat * measure
           + 2.4 * tau ** (5.0 / 3.0) * c53 * measure * (G_hat + 1.0)
           + 1.6 * tau ** (-2.5) * measure)
    trace_max = float(np.max(bc.n_cell + bc.p_cell))
    return 2.0 * c_b + 2.0 * measure * trace_max, 2.0 * c_a


def check_energy_inequality(traj, bc: BoundaryData, mesh: DeviceMesh,
                            params: ModelParameters, config=None,
                            tol_slack: float | None = None) -> list[StepVerdict]:
    """Per-step free-energy verdicts for a trajectory.

    Equilibrium boundary data (vanishing defect): asserts
    E_{m+1} + dt * diss_{m+1} / 2 <= E_m + tol_slack for every step.
    Biased data: evaluates the Gronwall-type certificate with derived
    constants and reports the margins without failing.
    A single-state trajectory passes vacuously.
    """
    newton_tol = config.newton_tol if config is not None else 1e-10
    if tol_slack is None:
        tol_slack = 10.0 * newton_tol
    reports = traj.reports
    verdicts: list[StepVerdict] = []
    if len(reports) < 2:
        return verdicts
    lam = traj.Lambda
    if lam == 0.0:
        for i in range(1, len(reports)):
            prev, cur = reports[i - 1], reports[i]
            dt = cur.t - prev.t
            lhs = cur.E + 0.5 * dt * cur.dissipation
            slack = lhs - prev.E
            verdicts.append(StepVerdict(
                step=i, t=cur.t, lhs=lhs, rhs=prev.E, slack=slack,
                ok=bool(slack <= tol_slack), asserted=True))
        return verdicts
    c, c1 = _gronwall_constants(bc, mesh)
    E0 = reports[0].E
    half_int = 0.0
    for i in range(1, len(reports)):
        prev, cur = reports[i - 1], reports[i]
        dt = cur.t - prev.t
        half_int += 0.5 * dt * cur.dissipation
        lhs = cur.E + half_int
        rhs = (E0 + c * lam * cur.t) * np.exp(c1 * lam * cur.t)
        verdicts.append(StepVerdict(
            step=i, t=cur.t, lhs=lhs, rhs=rhs, slack=lhs - rhs,
            ok=bool(lhs <= rhs), asserted=False))
    return verdicts


@dataclass(frozen=True)
class BoundednessReport:
    sup_n: float
    sup_p: float
    sup_D: float
    ceiling: float
    ok: bool
    failing_step: int | None
    l53_n: float            # max over time of the cell-weighted 5/3 norm
    l53_p: float
    w1r_V: float            # monitoring only; nothing is asserted about it
    r: float


def discrete_w1r_norm(V: np.ndarray, mesh: DeviceMesh, r: float = 4.0) -> float:
    """Discrete W^{1,r}-style norm of a cell field, for monitoring:
    (sum m(K) |V_K|^r + sum m(sigma) d_sigma |dV/d|^r)^(1/r)."""
    total = float(np.sum(mesh.cell_measures * np.abs(V) ** r))
    if mesh.n_edges:
        k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
        grad = np.abs(V[k0] - V[k1]) / mesh.edge_distances
        total += float(np.sum(mesh.edge_measures * mesh.edge_distances
                              * grad ** r))
    return total ** (1.0 / r)


def boundedness_monitor(traj, mesh: DeviceMesh,
                        ceiling: float | None = None,
                        r: float = 4.0) -> BoundednessReport:
    """Running supremum of the carrier densities over a trajectory.

    Fails (with the first offending step named) if either carrier supremum
    exceeds the ceiling; the default ceiling is ten times the initial
    supremum.  Also reports the discrete L^inf(L^{5/3}) norms and the
    W^{1,r}-style potential norm, both informational.
    """
    m = mesh.cell_measures
    states = traj.states
    if ceiling is None:
        base = max(states[0].n.max(), states[0].p.max())
        ceiling = 10.0 * base
    sup_n = sup_p = sup_D = 0.0
    l53_n = l53_p = w1r = 0.0
    failing = None
    for i, s in enumerate(states):
        sup_n = max(sup_n, float(s.n.max()))
        sup_p = max(sup_p, float(s.p.max()))
        sup_D = max(sup_D, float(s.D.max()))
        l53_n = max(l53_n, float(np.sum(m * s.n ** (5 / 3)) ** 0.6))
        l53_p = max(l53_p, float(np.sum(m * s.p ** (5 / 3)) ** 0.6))
        w1r = max(w1r, discrete_w1r_norm(s.V, mesh, r))
        if failing is None and max(s.n.max(), s.p.max()) > ceiling:
            failing = i
    return BoundednessReport(sup_n=sup_n, sup_p=sup_p, sup_D=sup_D,
                             ceiling=float(ceiling), ok=failing is None,
                             failing_step=failing, l53_n=l53_n, l53_p=l53_p,
                             w1r_V=w1r, r=r)


# ---------------------------------------------------------------------------
# nonlinear Poincare check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoincareResult:
    slack: float            # bound - value, nonnegative if the estimate holds
    value: float
    bound: float
    c_poincare: float
    u_mean: float


def neumann_poincare_constant(mesh: DeviceMesh) -> float:
    """Square of the discrete Poincare-Wirtinger constant: the inverse of the
    spectral gap of the Neumann edge Laplacian in the cell-measure inner
    product.  Exact for the discrete difference-quotient gradient by the
    spectral theorem."""
    nc = mesh.n_cells
    if nc < 2:
        raise ValueError("Poincare constant needs at least two cells")
    L = np.zeros((nc, nc))
    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    t = mesh.edge_transmissibility
    np.add.at(L, (k0, k0), t)
    np.add.at(L, (k1, k1), t)
    np.add.at(L, (k0, k1), -t)
    np.add.at(L, (k1, k0), -t)
    M = np.diag(mesh.cell_measures)
    eigs = linalg.eigh(L, M, eigvals_only=True)
    gap = eigs[1]
    if gap <= 0.0:
        raise ValueError("mesh is disconnected: spectral gap vanished")
    return 1.0 / float(gap)


def poincare_check(u, mesh: DeviceMesh, u_hat: float,
                   c_poincare: float | None = None) -> PoincareResult:
    """Nonlinear Poincare-Wirtinger certificate for f(u) = -log(1 - u).

    With u in [0, 1) cell-wise and mean(u) < u_hat < 1, checks

        ||f(u)||_2^2 <= 2 m(Omega) f(u_hat)^2
                        + 4 C_P (1 + u_hat/(u_hat - mean u)) ||grad f(u)||_2^2

    with the spectral C_P of the mesh, and returns the slack (bound minus
    value); a negative slack indicates an implementation bug, not a state
    property, since the estimate is a theorem at the discrete level.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u >= 1.0)):
        raise ValueError("poincare_check requires a field with values in [0, 1)")
    m = mesh.cell_measures
    u_mean = float(np.dot(m, u) / mesh.total_measure)
    if not (u_mean < u_hat < 1.0):
        raise ValueError(
            f"hypothesis violated: need mean(u) = {u_mean} < u_hat < 1")
    if c_poincare is None:
        c_poincare = neumann_poincare_constant(mesh)
    f = -np.log1p(-u)
    value = float(np.sum(m * f * f))
    grad2 = 0.0
    if mesh.n_edges:
        k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
        df = f[k0] - f[k1]
        grad2 = float(np.sum(mesh.edge_transmissibility * df * df))
    f_hat = -np.log1p(-u_hat)
    bound = 2.0 * mesh.total_measure * f_hat ** 2 \
        + 4.0 * c_poincare * (1.0 + u_hat / (u_hat - u_mean)) * grad2
    return PoincareResult(slack=bound - value, value=value, bound=bound,
                          c_poincare=float(c_poincare), u_mean=u_mean)
