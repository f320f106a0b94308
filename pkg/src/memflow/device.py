"""Device geometry, boundary decomposition, doping, and simulation state.

Meshes are 1D intervals (uniform or geometrically graded) and 2D
tensor-product rectangles; fluxes use the two-point approximation, which is
consistent on exactly these meshes.  The boundary splits into Dirichlet
contact edges and insulating Neumann edges; the Dirichlet part must have
positive measure or the Poisson problem loses uniqueness.

Standing model assumptions, validated here and referenced by error messages:

* (A1) the contact (Dirichlet) part of the boundary has positive measure;
* (A2) the doping profile is bounded and the scaled Debye length positive;
* (A3) boundary carrier densities are strictly positive;
* (A4) initial densities are admissible: n0, p0 >= 0, 0 <= D0 <= 1, and the
  measure-weighted mean of D0 is strictly below 1.

Boundary data are represented as analytic profiles evaluated per cell (the
"boundary extension"), not only as traces: the free energy and the
equilibrium defect need interior values of n_bar, p_bar, V_bar.

All quantities are in scaled dimensionless form (see README for the mapping
from physical device parameters).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import statistics as stats

__all__ = [
    "NEUMANN",
    "DIRICHLET",
    "MeshError",
    "InitialDataError",
    "ConstantProfile",
    "LinearProfile",
    "PiecewiseProfile",
    "TabulatedProfile",
    "MeshGeometry",
    "ContactSegment",
    "DeviceMesh",
    "ModelParameters",
    "BoundaryData",
    "SystemState",
    "build_mesh",
    "validate_initial_data",
    "lambda_const",
]

NEUMANN = 0
DIRICHLET = 1

# Densities are floored here when converting to chemical potentials; the
# statistics argument then stays within the overflow-safe window |z| <= 700.
DENSITY_FLOOR = 1e-300
SATURATION_NUDGE = 1e-12


class MeshError(ValueError):
    """Invalid mesh geometry or contact layout."""


class InitialDataError(ValueError):
    """Initial data violating an admissibility assumption.

    Carries the full list of violations in ``violations``; the message names
    each violated assumption and the offending cell indices.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


# ---------------------------------------------------------------------------
# analytic profiles (boundary extension, doping, initial data)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    value: float

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.full(points.shape[0], float(self.value))


@dataclass(frozen=True)
class LinearProfile:
    """value0 + (value1 - value0) * x_axis / length, along one coordinate."""

    value0: float
    value1: float
    length: float
    axis: int = 0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        x = points[:, self.axis]
        return self.value0 + (self.value1 - self.value0) * x / self.length


@dataclass(frozen=True)
class PiecewiseProfile:
    """Piecewise-constant in one coordinate: values[i] on [breaks[i], breaks[i+1])."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]
    axis: int = 0

    def __post_init__(self):
        if len(self.breaks) != len(self.values) + 1:
            raise ValueError("piecewise profile needs len(breaks) == len(values) + 1")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        x = points[:, self.axis]
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1,
                      0, len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class TabulatedProfile:
    """Linear interpolation of tabulated (x, value) samples along one coordinate."""

    x: tuple[float, ...]
    values: tuple[float, ...]
    axis: int = 0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.interp(points[:, self.axis], self.x, self.values)


Profile = ConstantProfile | LinearProfile | PiecewiseProfile | TabulatedProfile


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactSegment:
    """One Dirichlet contact patch: a whole side, or a span of it (2D)."""

    side: str                       # 1D: left|right; 2D also bottom|top
    lo: float | None = None        # span in the transverse coordinate
    hi: float | None = None


@dataclass(frozen=True)
class MeshGeometry:
    """Geometry description consumed by ``build_mesh``."""

    dimension: int
    lengths: tuple[float, ...]          # (L,) or (Lx, Ly)
    cells: tuple[int, ...]              # (n,) or (nx, ny)
    contacts: tuple[ContactSegment, ...]
    grading: float = 1.0                # 1D geometric width ratio


def _graded_edges(length: float, n: int, ratio: float) -> np.ndarray:
    if ratio == 1.0:
        return np.linspace(0.0, length, n + 1)
    w = ratio ** np.arange(n)
    w *= length / w.sum()
    return np.concatenate([[0.0], np.cumsum(w)])


@dataclass(frozen=True)
class DeviceMesh:
    """Cell/edge representation of a 1D interval or 2D tensor rectangle.

    Interior edges connect exactly two cells (``edge_cells``); boundary edges
    belong to one cell and carry a Dirichlet or Neumann tag.  Transmissibility
    building blocks are the interface measure and the centroid(-to-face)
    distance.  Immutable and shareable across threads.
    """

    dimension: int
    cell_centroids: np.ndarray          # (nc, dim)
    cell_measures: np.ndarray           # (nc,)
    edge_cells: np.ndarray              # (ne, 2) int
    edge_measures: np.ndarray           # (ne,)
    edge_distances: np.ndarray          # (ne,) centroid distance d_KL
    bedge_cells: np.ndarray             # (nb,) int
    bedge_measures: np.ndarray          # (nb,)
    bedge_distances: np.ndarray         # (nb,) centroid-to-face distance
    bedge_centroids: np.ndarray         # (nb, dim)
    bedge_tags: np.ndarray              # (nb,) int, NEUMANN or DIRICHLET
    geometry: MeshGeometry | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("cell_centroids", "cell_measures", "edge_cells",
                     "edge_measures", "edge_distances", "bedge_cells",
                     "bedge_measures", "bedge_distances", "bedge_centroids",
                     "bedge_tags"):
            getattr(self, name).setflags(write=False)
        if np.any(self.cell_measures <= 0.0):
            raise MeshError("all cell measures must be positive")
        if self.dirichlet_measure <= 0.0:
            raise MeshError(
                "total Dirichlet boundary measure must be positive "
                "(assumption (A1)): add at least one contact")

    @property
    def n_cells(self) -> int:
        return self.cell_measures.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edge_measures.shape[0]

    @property
    def dirichlet_edges(self) -> np.ndarray:
        return np.flatnonzero(self.bedge_tags == DIRICHLET)

    @property
    def dirichlet_measure(self) -> float:
        return float(self.bedge_measures[self.bedge_tags == DIRICHLET].sum())

    @property
    def total_measure(self) -> float:
        return float(self.cell_measures.sum())

    @property
    def edge_transmissibility(self) -> np.ndarray:
        """m(sigma)/d_KL per interior edge."""
        return self.edge_measures / self.edge_distances

    @property
    def bedge_transmissibility(self) -> np.ndarray:
        return self.bedge_measures / self.bedge_distances

    # -- serialization (bit-exact round trip through JSON) ------------------

    def to_dict(self) -> dict:
        d = {
            "dimension": self.dimension,
            "cell_centroids": self.cell_centroids.tolist(),
            "cell_measures": self.cell_measures.tolist(),
            "edge_cells": self.edge_cells.tolist(),
            "edge_measures": self.edge_measures.tolist(),
            "edge_distances": self.edge_distances.tolist(),
            "bedge_cells": self.bedge_cells.tolist(),
            "bedge_measures": self.bedge_measures.tolist(),
            "bedge_distances": self.bedge_distances.tolist(),
            "bedge_centroids": self.bedge_centroids.tolist(),
            "bedge_tags": self.bedge_tags.tolist(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceMesh":
        def arr(key, dtype=float):
            return np.array(d[key], dtype=dtype)
        return cls(
            dimension=int(d["dimension"]),
            cell_centroids=arr("cell_centroids"),
            cell_measures=arr("cell_measures"),
            edge_cells=arr("edge_cells", int).reshape(-1, 2),
            edge_measures=arr("edge_measures"),
            edge_distances=arr("edge_distances"),
            bedge_cells=arr("bedge_cells", int),
            bedge_measures=arr("bedge_measures"),
            bedge_distances=arr("bedge_distances"),
            bedge_centroids=arr("bedge_centroids"),
            bedge_tags=arr("bedge_tags", int),
        )

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load_json(cls, path) -> "DeviceMesh":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _build_mesh_1d(geom: MeshGeometry) -> DeviceMesh:
    (length,) = geom.lengths
    (n,) = geom.cells
    if n < 1:
        raise MeshError("mesh needs at least one cell")
    if length <= 0.0:
        raise MeshError("interval length must be positive")
    xe = _graded_edges(length, n, geom.grading)
    xc = 0.5 * (xe[:-1] + xe[1:])
    sides = {"left": 0.0, "right": length}
    tags = {}
    for c in geom.contacts:
        if c.side not in sides:
            raise MeshError(f"unknown 1D contact side {c.side!r} "
                            "(contacts must lie on the boundary)")
        if c.side in tags:
            raise MeshError(f"overlapping contact tags on side {c.side!r}")
        tags[c.side] = DIRICHLET
    bsides = ["left", "right"]
    return DeviceMesh(
        dimension=1,
        cell_centroids=xc[:, None].copy(),
        cell_measures=np.diff(xe),
        edge_cells=np.column_stack([np.arange(n - 1), np.arange(1, n)]),
        edge_measures=np.ones(n - 1),
        edge_distances=np.diff(xc) if n > 1 else np.empty(0),
        bedge_cells=np.array([0, n - 1]),
        bedge_measures=np.ones(2),
        bedge_distances=np.array([xc[0] - xe[0], xe[-1] - xc[-1]]),
        bedge_centroids=np.array([[0.0], [length]]),
        bedge_tags=np.array([tags.get(s, NEUMANN) for s in bsides]),
        geometry=geom,
    )


def _build_mesh_2d(geom: MeshGeometry) -> DeviceMesh:
    lx, ly = geom.lengths
    nx, ny = geom.cells
    if nx < 1 or ny < 1:
        raise MeshError("mesh needs at least one cell per direction")
    if lx <= 0.0 or ly <= 0.0:
        raise MeshError("rectangle side lengths must be positive")
    xe = np.linspace(0.0, lx, nx + 1)
    ye = np.linspace(0.0, ly, ny + 1)
    xc = 0.5 * (xe[:-1] + xe[1:])
    yc = 0.5 * (ye[:-1] + ye[1:])
    dx, dy = lx / nx, ly / ny

    def cid(i, j):
        return j * nx + i

    cents = np.array([[xc[i], yc[j]] for j in range(ny) for i in range(nx)])
    measures = np.full(nx * ny, dx * dy)

    ecells, emeas, edist = [], [], []
    for j in range(ny):
        for i in range(nx - 1):
            ecells.append((cid(i, j), cid(i + 1, j)))
            emeas.append(dy)
            edist.append(dx)
    for j in range(ny - 1):
        for i in range(nx):
            ecells.append((cid(i, j), cid(i, j + 1)))
            emeas.append(dx)
            edist.append(dy)

    side_extent = {"left": ly, "right": ly, "bottom": lx, "top": lx}
    spans: dict[str, list[tuple[float, float]]] = {s: [] for s in side_extent}
    for c in geom.contacts:
        if c.side not in side_extent:
            raise MeshError(f"unknown 2D contact side {c.side!r} "
                            "(contacts must lie on the boundary)")
        lo = 0.0 if c.lo is None else float(c.lo)
        hi = side_extent[c.side] if c.hi is None else float(c.hi)
        if not (0.0 <= lo < hi <= side_extent[c.side]):
            raise MeshError(
                f"contact span [{lo}, {hi}] is not a valid part of side "
                f"{c.side!r} (contacts must lie on the boundary)")
        for plo, phi in spans[c.side]:
            if lo < phi and plo < hi:
                raise MeshError(f"overlapping contact tags on side {c.side!r}")
        spans[c.side].append((lo, hi))

    def tag_for(side, coord):
        for lo, hi in spans[side]:
            if lo <= coord <= hi:
                return DIRICHLET
        return NEUMANN

    bcells, bmeas, bdist, bcent, btags = [], [], [], [], []
    for j in range(ny):  # left/right
        for side, i, x in (("left", 0, 0.0), ("right", nx - 1, lx)):
            bcells.append(cid(i, j))
            bmeas.append(dy)
            bdist.append(dx / 2)
            bcent.append((x, yc[j]))
            btags.append(tag_for(side, yc[j]))
    for i in range(nx):  # bottom/top
        for side, j, y in (("bottom", 0, 0.0), ("top", ny - 1, ly)):
            bcells.append(cid(i, j))
            bmeas.append(dx)
            bdist.append(dy / 2)
            bcent.append((xc[i], y))
            btags.append(tag_for(side, xc[i]))

    return DeviceMesh(
        dimension=2,
        cell_centroids=cents,
        cell_measures=measures,
        edge_cells=np.array(ecells, dtype=int).reshape(-1, 2),
        edge_measures=np.array(emeas),
        edge_distances=np.array(edist),
        bedge_cells=np.array(bcells, dtype=int),
        bedge_measures=np.array(bmeas),
        bedge_distances=np.array(bdist),
        bedge_centroids=np.array(bcent),
        bedge_tags=np.array(btags, dtype=int),
        geometry=geom,
    )


def build_mesh(geom: MeshGeometry) -> DeviceMesh:
    """Build a DeviceMesh from a geometry description.

    Deterministic cell/edge ordering: 1D left to right; 2D row-major cells,
    x-directed interior edges first, then y-directed, then boundary edges
    left/right by row followed by bottom/top by column.
    """
    if geom.dimension == 1:
        return _build_mesh_1d(geom)
    if geom.dimension == 2:
        return _build_mesh_2d(geom)
    raise MeshError(f"unsupported dimension {geom.dimension} (1 or 2 only)")


# ---------------------------------------------------------------------------
# parameters and boundary data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParameters:
    """Scaled model parameters: squared Debye length scale, doping, horizon."""

    lam: float                      # scaled Debye length, > 0
    doping: np.ndarray              # per-cell acceptor density A(x)
    final_time: float

    def __post_init__(self):
        self.doping.setflags(write=False)
        if not self.lam > 0.0:
            raise ValueError("scaled Debye length must be positive (assumption (A2))")
        if not np.all(np.isfinite(self.doping)):
            raise ValueError("doping must be bounded (assumption (A2))")
        if not self.final_time >= 0.0:
            raise ValueError("final_time must be nonnegative")

    @classmethod
    def from_profile(cls, mesh: DeviceMesh, lam: float, doping: Profile,
                     final_time: float) -> "ModelParameters":
        return cls(lam=lam, doping=doping.evaluate(mesh.cell_centroids),
                   final_time=final_time)


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data with its interior extension.

    ``*_cell`` are the profiles evaluated at cell centroids (the boundary
    extension entering the free energy and the equilibrium defect);
    ``*_trace`` are the values imposed on Dirichlet contact edges.  Boundary
    carrier densities must be strictly positive; data are time-independent.
    """

    n_cell: np.ndarray
    p_cell: np.ndarray
    V_cell: np.ndarray
    n_trace: np.ndarray
    p_trace: np.ndarray
    V_trace: np.ndarray
    dirichlet_edges: np.ndarray

    def __post_init__(self):
        for name in ("n_cell", "p_cell", "V_cell", "n_trace", "p_trace",
                     "V_trace", "dirichlet_edges"):
            getattr(self, name).setflags(write=False)
        if np.any(self.n_cell <= 0.0) or np.any(self.p_cell <= 0.0) \
                or np.any(self.n_trace <= 0.0) or np.any(self.p_trace <= 0.0):
            raise ValueError(
                "boundary carrier densities must be strictly positive "
                "(assumption (A3))")

    @classmethod
    def from_profiles(cls, mesh: DeviceMesh, n_profile: Profile,
                      p_profile: Profile, V_profile: Profile) -> "BoundaryData":
        dir_edges = mesh.dirichlet_edges
        bpts = mesh.bedge_centroids[dir_edges]
        return cls(
            n_cell=n_profile.evaluate(mesh.cell_centroids),
            p_cell=p_profile.evaluate(mesh.cell_centroids),
            V_cell=V_profile.evaluate(mesh.cell_centroids),
            n_trace=n_profile.evaluate(bpts),
            p_trace=p_profile.evaluate(bpts),
            V_trace=V_profile.evaluate(bpts),
            dirichlet_edges=dir_edges.copy(),
        )

    # quasi-Fermi potentials of the extension: g(n_bar) - V_bar, g(p_bar) + V_bar
    def phi_n_cell(self) -> np.ndarray:
        return stats.inverse_fd_half(self.n_cell) - self.V_cell

    def phi_p_cell(self) -> np.ndarray:
        return stats.inverse_fd_half(self.p_cell) + self.V_cell

    def phi_n_trace(self) -> np.ndarray:
        return stats.inverse_fd_half(self.n_trace) - self.V_trace

    def phi_p_trace(self) -> np.ndarray:
        return stats.inverse_fd_half(self.p_trace) + self.V_trace


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class SystemState:
    """Cell fields at one time instant.

    The chemical potentials are the solver's primal unknowns; densities are
    recovered through the statistics maps, so n, p > 0 and 0 < D < 1 hold by
    construction:  n = F_{1/2}(phi_n + V), p = F_{1/2}(phi_p - V),
    D = F_{-1}(phi_D - V).
    """

    t: float
    n: np.ndarray
    p: np.ndarray
    D: np.ndarray
    V: np.ndarray
    phi_n: np.ndarray
    phi_p: np.ndarray
    phi_D: np.ndarray

    @classmethod
    def from_potentials(cls, t: float, phi_n, phi_p, phi_D, V) -> "SystemState":
        phi_n = np.asarray(phi_n, dtype=float)
        phi_p = np.asarray(phi_p, dtype=float)
        phi_D = np.asarray(phi_D, dtype=float)
        V = np.asarray(V, dtype=float)
        return cls(
            t=t,
            n=stats.fermi_dirac(0.5, phi_n + V),
            p=stats.fermi_dirac(0.5, phi_p - V),
            D=stats.fermi_dirac(-1.0, phi_D - V),
            V=V, phi_n=phi_n, phi_p=phi_p, phi_D=phi_D,
        )

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.n.copy(), self.p.copy(),
                           self.D.copy(), self.V.copy(), self.phi_n.copy(),
                           self.phi_p.copy(), self.phi_D.copy())

    def statistics_residual(self) -> float:
        """Max violation of the density/potential consistency relations."""
        rn = np.abs(self.n - stats.fermi_dirac(0.5, self.phi_n + self.V))
        rp = np.abs(self.p - stats.fermi_dirac(0.5, self.phi_p - self.V))
        rD = np.abs(self.D - stats.fermi_dirac(-1.0, self.phi_D - self.V))
        return float(max(rn.max(), rp.max(), rD.max()))


# ---------------------------------------------------------------------------
# shared edge kernel (fluxes and dissipation must use the same edge density)
# ---------------------------------------------------------------------------

def edge_density(mesh: DeviceMesh, rho: np.ndarray, dphi: np.ndarray,
                 trace_rho: np.ndarray | None, trace_dphi: np.ndarray | None,
                 scheme: str = "mean"):
    """Edge density a_KL for the two-point flux a_KL * (m/d) * dphi.

    ``mean`` averages the adjacent cell densities (boundary edges average the
    cell value with the Dirichlet trace); ``upwind`` takes the density of the
    upstream cell with respect to the potential drop.  The same routine backs
    flux assembly and the dissipation functional, making the identity
    dissipation = sum(flux * dphi) exact.
    """
    k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    if scheme == "mean":
        a = 0.5 * (rho[k0] + rho[k1])
    elif scheme == "upwind":
        # particles flow from high to low potential: upstream = larger phi
        a = np.where(dphi >= 0.0, rho[k0], rho[k1])
    else:
        raise ValueError(f"unknown edge density scheme {scheme!r}")
    if trace_rho is None:
        return a, None
    kb = mesh.bedge_cells[mesh.dirichlet_edges]
    if scheme == "mean":
        ab = 0.5 * (rho[kb] + trace_rho)
    else:
        ab = np.where(trace_dphi >= 0.0, rho[kb], trace_rho)
    return a, ab


def lambda_const(bc: BoundaryData, mesh: DeviceMesh) -> float:
    """Boundary equilibrium defect.

    Twice the sum over the two carrier species of the squared supremum of
    discrete difference quotients of the extension's quasi-Fermi potentials,
    over interior and Dirichlet boundary edges.  Exactly zero iff both
    quasi-Fermi levels of the extension are edge-wise constant (thermal
    equilibrium boundary data).
    """
    total = 0.0
    for phi_cell, phi_trace in ((bc.phi_n_cell(), bc.phi_n_trace()),
                                (bc.phi_p_cell(), bc.phi_p_trace())):
        sup = 0.0
        if mesh.n_edges:
            k0, k1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
            dq = (phi_cell[k0] - phi_cell[k1]) / mesh.edge_distances
            sup = float(np.max(dq * dq))
        de = mesh.dirichlet_edges
        if de.size:
            kb = mesh.bedge_cells[de]
            dqb = (phi_cell[kb] - phi_trace) / mesh.bedge_distances[de]
            sup = max(sup, float(np.max(dqb * dqb)))
        total += sup
    return 2.0 * total


# ---------------------------------------------------------------------------
# initial data validation
# ---------------------------------------------------------------------------

def validate_initial_data(n0, p0, D0, mesh: DeviceMesh, bc: BoundaryData,
                          params: ModelParameters) -> SystemState:
    """Check admissibility of initial fields and assemble the initial state.

    Accepts iff n0, p0 >= 0, D0 in [0, 1] cell-wise and the measure-weighted
    mean of D0 is strictly below 1 (assumption (A4)); every violation is
    reported with the offending cell indices.  On success the initial
    potential solves the Poisson problem for the initial densities, and the
    chemical potentials are entered by flooring vacuum cells at a tiny
    positive density and nudging saturated cells (D0 = 1) to 1 - 1e-12.
    Pure: the same inputs always produce the same state.
    """
    n0 = np.asarray(n0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    D0 = np.asarray(D0, dtype=float)
    violations = []
    for name, f in (("n0", n0), ("p0", p0), ("D0", D0)):
        if f.shape != (mesh.n_cells,):
            violations.append(
                f"{name} has shape {f.shape}, expected ({mesh.n_cells},)")
    if violations:
        raise InitialDataError(violations)
    for name, f in (("n0", n0), ("p0", p0)):
        bad = np.flatnonzero(~(f >= 0.0))
        if bad.size:
            violations.append(
                f"{name} must be nonnegative (assumption (A4)); "
                f"violated at cells {bad.tolist()}")
    bad = np.flatnonzero(~((D0 >= 0.0) & (D0 <= 1.0)))
    if bad.size:
        violations.append(
            "D0 must lie in [0, 1] (assumption (A4)); "
            f"violated at cells {bad.tolist()}")
    if not violations:
        mean_D = float(np.dot(mesh.cell_measures, D0) / mesh.total_measure)
        if not mean_D < 1.0:
            violations.append(
                f"mean of D0 is {mean_D}, but must be strictly below 1 "
                "(assumption (A4))")
    if violations:
        raise InitialDataError(violations)

    from . import solver  # deferred: solver imports this module's types

    V0 = solver.solve_poisson(n0, p0, D0, mesh, bc, params)
    n_f = np.maximum(n0, DENSITY_FLOOR)
    p_f = np.maximum(p0, DENSITY_FLOOR)
    D_f = np.clip(D0, DENSITY_FLOOR, 1.0 - SATURATION_NUDGE)
    phi_n = stats.inverse_fd_half(n_f) - V0
    phi_p = stats.inverse_fd_half(p_f) + V0
    phi_D = np.log(D_f) - np.log1p(-D_f) + V0
    state = SystemState.from_potentials(0.0, phi_n, phi_p, phi_D, V0)
    return state


def equilibrium_state(mesh: DeviceMesh, bc: BoundaryData,
                      params: ModelParameters, D_level: float = 0.5,
                      tol: float = 1e-13, max_iter: int = 100) -> SystemState:
    """Construct the thermal-equilibrium state for given boundary data.

    Solves the nonlinear Poisson problem with spatially constant quasi-Fermi
    levels taken from the boundary extension (which requires equilibrium
    data) and a constant vacancy potential fixed by the level ``D_level`` at
    the potential reference.  The result is a fixed point of the transient
    scheme when the boundary defect vanishes.
    """
    from . import solver

    alpha_n = float(np.mean(bc.phi_n_cell()))
    alpha_p = float(np.mean(bc.phi_p_cell()))
    alpha_D = stats.blakemore_h(D_level) + float(np.mean(bc.V_cell))
    V = bc.V_cell.copy()
    V = solver.solve_equilibrium_potential(alpha_n, alpha_p, alpha_D, V,
                                           mesh, bc, params, tol=tol,
                                           max_iter=max_iter)
    phi = (np.full(mesh.n_cells, alpha_n), np.full(mesh.n_cells, alpha_p),
           np.full(mesh.n_cells, alpha_D))
    return SystemState.from_potentials(0.0, *phi, V)
