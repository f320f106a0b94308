"""Scenario configs: one TOML file describes a device, boundary drive,
initial data, solver settings and outputs; this module parses it, builds the
simulation objects, and drives a full run with its artifacts.

Config layout (tables [device], [boundary], [initial], [solver], [output]):

    [device]
    dimension = 1
    length = 1.0              # 2D: lx, ly
    cells = 64                # 2D: cells = [32, 16]
    contacts = ["left", "right"]   # 2D: array of {side=..., span=[lo, hi]}
    lambda = 1.0
    final_time = 1.0
    doping = {type = "constant", value = 0.5}   # piecewise | csv too

    [boundary]
    mode = "equilibrium"      # or "bias" (U = ...) or "ramp" (U_final, ...)
    n = 1.0
    p = 1.0
    V = 0.0

    [initial]
    n = 1.0                   # constants or {type = ...} profile tables
    p = 1.0
    D = 0.5
    perturbation = 0.0        # relative amplitude of seeded random noise

    [solver]                  # optional SolverConfig overrides (dt, tolerances...)
    [output]
    directory = "runs/equilibrium"
    dump_times = [1.0]

A ramp drive is executed quasi-statically: the bias is raised through a
fixed number of constant-bias segments, each restarted from the previous
final state, so the core solver only ever sees time-independent boundary
data.  Identical config and seed give byte-identical logs.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import diagnostics, solver
from .device import (BoundaryData, ConstantProfile, ContactSegment,
                     DeviceMesh, LinearProfile, MeshGeometry, ModelParameters,
                     PiecewiseProfile, TabulatedProfile, build_mesh,
                     validate_initial_data)

__all__ = [
    "ConfigError",
    "Scenario",
    "RunSetup",
    "RunResult",
    "load_scenario",
    "build_setup",
    "run_scenario",
    "apply_overrides",
]

OUTPUT_ROOT_ENV = "MEMFLOW_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Invalid scenario config; the message names the offending field."""


@dataclass(frozen=True)
class Scenario:
    name: str
    config: dict
    base_dir: Path

    def output_dir(self) -> Path:
        out = self.config.get("output", {}).get("directory", f"runs/{self.name}")
        root = os.environ.get(OUTPUT_ROOT_ENV)
        base = Path(root) if root else self.base_dir
        path = Path(out)
        return path if path.is_absolute() else base / path


@dataclass
class RunSetup:
    mesh: DeviceMesh
    bc: BoundaryData
    params: ModelParameters
    config: solver.SolverConfig
    state0: object
    schedule: solver.TimeSchedule
    boundary_mode: str
    ramp: dict | None = None


@dataclass
class RunResult:
    trajectory: solver.Trajectory
    summary: dict


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with open(path, "rb") as f:
            cfg = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    for table in ("device", "boundary", "initial"):
        if table not in cfg:
            raise ConfigError(f"missing required [{table}] table")
    return Scenario(name=path.stem, config=cfg, base_dir=path.parent)


def apply_overrides(scenario: Scenario, overrides: dict) -> Scenario:
    """Dotted-key overrides, e.g. {'solver.dt': 1e-3, 'device.cells': 32}."""
    cfg = json.loads(json.dumps(scenario.config))  # deep copy, plain types
    for key, value in overrides.items():
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} does not address a table")
        node[parts[-1]] = value
    return Scenario(name=scenario.name, config=cfg, base_dir=scenario.base_dir)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _profile(spec, field: str, length: float):
    """A profile from either a bare number or a {type = ...} table."""
    if isinstance(spec, (int, float)):
        return ConstantProfile(float(spec))
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"{field} must be a number or a profile table "
                          "with a 'type' key")
    kind = spec["type"]
    try:
        if kind == "constant":
            return ConstantProfile(float(spec["value"]))
        if kind == "linear":
            return LinearProfile(float(spec["value0"]), float(spec["value1"]),
                                 length, axis=int(spec.get("axis", 0)))
        if kind == "piecewise":
            return PiecewiseProfile(tuple(spec["breaks"]),
                                    tuple(spec["values"]),
                                    axis=int(spec.get("axis", 0)))
        if kind == "csv":
            data = np.loadtxt(spec["path"], delimiter=",", ndmin=2)
            return TabulatedProfile(tuple(data[:, 0]), tuple(data[:, 1]),
                                    axis=int(spec.get("axis", 0)))
    except KeyError as exc:
        raise ConfigError(f"{field}: profile of type {kind!r} is missing "
                          f"key {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{field}: cannot read table {spec.get('path')!r}: "
                          f"{exc}") from exc
    raise ConfigError(f"{field}: unknown profile type {kind!r}")


def _geometry(dev: dict) -> MeshGeometry:
    dim = dev.get("dimension", 1)
    if dim not in (1, 2):
        raise ConfigError("[device].dimension must be 1 or 2")
    contacts_cfg = dev.get("contacts")
    if not contacts_cfg:
        raise ConfigError("[device].contacts must list at least one contact "
                          "(assumption (A1))")
    contacts = []
    for c in contacts_cfg:
        if isinstance(c, str):
            contacts.append(ContactSegment(side=c))
        elif isinstance(c, dict) and "side" in c:
            span = c.get("span")
            if span is None:
                contacts.append(ContactSegment(side=c["side"]))
            else:
                contacts.append(ContactSegment(side=c["side"],
                                               lo=float(span[0]),
                                               hi=float(span[1])))
        else:
            raise ConfigError("[device].contacts entries must be side names "
                              "or tables with a 'side' key")
    if dim == 1:
        if "length" not in dev:
            raise ConfigError("[device].length is required for 1D devices")
        cells = dev.get("cells")
        if not isinstance(cells, int) or cells < 1:
            raise ConfigError("[device].cells must be a positive integer")
        return MeshGeometry(dimension=1, lengths=(float(dev["length"]),),
                            cells=(cells,), contacts=tuple(contacts),
                            grading=float(dev.get("grading", 1.0)))
    if "lx" not in dev or "ly" not in dev:
        raise ConfigError("[device].lx and [device].ly are required for 2D")
    cells = dev.get("cells")
    if (not isinstance(cells, (list, tuple)) or len(cells) != 2
            or not all(isinstance(c, int) and c >= 1 for c in cells)):
        raise ConfigError("[device].cells must be [nx, ny] for 2D devices")
    return MeshGeometry(dimension=2,
                        lengths=(float(dev["lx"]), float(dev["ly"])),
                        cells=(cells[0], cells[1]), contacts=tuple(contacts))


def _boundary_profiles(bnd: dict, geom: MeshGeometry, bias: float):
    length = geom.lengths[0]
    n_prof = _profile(bnd.get("n", 1.0), "[boundary].n", length)
    p_prof = _profile(bnd.get("p", 1.0), "[boundary].p", length)
    if bias == 0.0:
        v_prof = _profile(bnd.get("V", 0.0), "[boundary].V", length)
    else:
        v0 = float(bnd.get("V", 0.0))
        v_prof = LinearProfile(v0, v0 + bias, length)
    return n_prof, p_prof, v_prof


def _solver_config(sol: dict) -> solver.SolverConfig:
    known = {f.name for f in dataclasses.fields(solver.SolverConfig)}
    unknown = set(sol) - known
    if unknown:
        raise ConfigError(f"[solver] has unknown keys {sorted(unknown)}")
    try:
        return solver.SolverConfig(**sol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[solver]: {exc}") from exc


def build_setup(scenario: Scenario, seed: int = 0,
                bias_override: float | None = None) -> RunSetup:
    """Instantiate mesh, boundary data, parameters, solver config and the
    validated initial state for a scenario."""
    cfg = scenario.config
    dev = cfg["device"]
    bnd = cfg["boundary"]
    init = cfg["initial"]

    geom = _geometry(dev)
    try:
        mesh = build_mesh(geom)
    except ValueError as exc:
        raise ConfigError(f"[device]: {exc}") from exc

    mode = bnd.get("mode", "equilibrium")
    ramp = None
    if mode == "equilibrium":
        bias = 0.0
    elif mode == "bias":
        if "U" not in bnd:
            raise ConfigError("[boundary].U is required for mode = 'bias'")
        bias = float(bnd["U"])
    elif mode == "ramp":
        for key in ("U_final", "ramp_time"):
            if key not in bnd:
                raise ConfigError(f"[boundary].{key} is required for "
                                  "mode = 'ramp'")
        bias = float(bnd["U_final"])
        ramp = {"U_final": bias, "ramp_time": float(bnd["ramp_time"]),
                "segments": int(bnd.get("segments", 10))}
        if ramp["segments"] < 1 or ramp["ramp_time"] <= 0.0:
            raise ConfigError("[boundary]: ramp needs segments >= 1 and "
                              "ramp_time > 0")
    else:
        raise ConfigError(f"[boundary].mode {mode!r} is not one of "
                          "equilibrium | bias | ramp")
    if bias_override is not None:
        bias = bias_override
    n_prof, p_prof, v_prof = _boundary_profiles(bnd, geom, bias)
    try:
        bc = BoundaryData.from_profiles(mesh, n_prof, p_prof, v_prof)
    except ValueError as exc:
        raise ConfigError(f"[boundary]: {exc}") from exc

    if "lambda" not in dev:
        raise ConfigError("[device].lambda (scaled Debye length) is required")
    if "final_time" not in dev:
        raise ConfigError("[device].final_time is required")
    doping = _profile(dev.get("doping", 0.0), "[device].doping",
                      geom.lengths[0])
    try:
        params = ModelParameters.from_profile(
            mesh, lam=float(dev["lambda"]), doping=doping,
            final_time=float(dev["final_time"]))
    except ValueError as exc:
        raise ConfigError(f"[device]: {exc}") from exc

    length = geom.lengths[0]
    fields = {}
    for key in ("n", "p", "D"):
        if key not in init:
            raise ConfigError(f"[initial].{key} is required")
        fields[key] = _profile(init[key], f"[initial].{key}", length) \
            .evaluate(mesh.cell_centroids)
    amp = float(init.get("perturbation", 0.0))
    if amp:
        rng = np.random.default_rng(seed)
        for key in ("n", "p", "D"):
            fields[key] = fields[key] * (1.0 + amp * rng.uniform(
                -1.0, 1.0, mesh.n_cells))
        fields["D"] = np.clip(fields["D"], 0.0, 1.0)

    state0 = validate_initial_data(fields["n"], fields["p"], fields["D"],
                                   mesh, bc, params)
    sol_cfg = _solver_config(dict(cfg.get("solver", {})))
    dump_times = tuple(float(t) for t in cfg.get("output", {})
                       .get("dump_times", ()))
    schedule = solver.TimeSchedule(t_end=params.final_time,
                                   dump_times=dump_times)
    return RunSetup(mesh=mesh, bc=bc, params=params, config=sol_cfg,
                    state0=state0, schedule=schedule, boundary_mode=mode,
                    ramp=ramp)


# ---------------------------------------------------------------------------
# run driver
# ---------------------------------------------------------------------------

def _concat_trajectories(parts: list[solver.Trajectory]) -> solver.Trajectory:
    out = parts[0]
    for t in parts[1:]:
        out.states.extend(t.states[1:])
        out.steps.extend(t.steps[1:])
        out.reports.extend(t.reports[1:])
        out.Lambda = t.Lambda
    return out


def run_scenario(scenario: Scenario, seed: int = 0,
                 out_dir: Path | None = None,
                 write_outputs: bool = True) -> RunResult:
    """Execute a scenario and write its artifacts (step log, flux norms,
    state dumps, JSON summary) into the output directory."""
    setup = build_setup(scenario, seed=seed)
    cfg = setup.config

    if setup.ramp is None:
        traj = solver.run_transient(setup.state0, setup.schedule, setup.mesh,
                                    setup.bc, setup.params, cfg)
        bc_final = setup.bc
    else:
        # quasi-static ramp: constant-bias segments restarted from the
        # previous final state; the core never sees time-dependent data.
        # the initial state is validated at zero applied bias
        ramp = setup.ramp
        nseg = ramp["segments"]
        t_seg = ramp["ramp_time"] / nseg
        t_end = setup.params.final_time
        state = build_setup(scenario, seed=seed, bias_override=0.0).state0
        parts = []
        t0 = 0.0
        bc_final = setup.bc
        for i in range(nseg):
            u_i = ramp["U_final"] * (i + 1) / nseg
            seg_setup = build_setup(scenario, seed=seed, bias_override=u_i)
            seg_end = min((i + 1) * t_seg, t_end)
            if seg_end <= t0:
                break
            state = state.copy()
            state.t = t0
            sched = solver.TimeSchedule(
                t_end=seg_end,
                dump_times=tuple(t for t in setup.schedule.dump_times
                                 if t0 < t <= seg_end))
            parts.append(solver.run_transient(state, sched, seg_setup.mesh,
                                              seg_setup.bc, setup.params,
                                              cfg))
            state = parts[-1].states[-1]
            t0 = seg_end
            bc_final = seg_setup.bc
        if t0 < t_end:
            sched = solver.TimeSchedule(
                t_end=t_end, dump_times=tuple(
                    t for t in setup.schedule.dump_times if t > t0))
            state = state.copy()
            state.t = t0
            parts.append(solver.run_transient(state, sched, setup.mesh,
                                              bc_final, setup.params, cfg))
        traj = _concat_trajectories(parts)

    verdicts = diagnostics.check_energy_inequality(
        traj, bc_final, setup.mesh, setup.params, cfg)
    bounds = diagnostics.boundedness_monitor(traj, setup.mesh)
    asserted = bool(verdicts) and verdicts[0].asserted
    n_fail = sum(not v.ok for v in verdicts)
    if asserted:
        energy_decay = "pass" if n_fail == 0 else "fail"
    else:
        energy_decay = "reported"
    mass0 = traj.reports[0].mass_D
    drift = abs(traj.reports[-1].mass_D - mass0) / abs(mass0) if mass0 else 0.0
    total_diss = sum(s.dt * r.dissipation
                     for s, r in zip(traj.steps[1:], traj.reports[1:]))
    summary = {
        "scenario": scenario.name,
        "seed": seed,
        "mode": setup.boundary_mode,
        "Lambda": traj.Lambda,
        "steps": len(traj) - 1,
        "t_end": traj.states[-1].t,
        "final_E": traj.reports[-1].E,
        "total_dissipation": total_diss,
        "energy_decay": energy_decay,
        "verdicts": {"pass": len(verdicts) - n_fail, "fail": n_fail,
                     "asserted": asserted},
        "mass_D_drift_rel": drift,
        "bounds": {
            "sup_n": bounds.sup_n, "sup_p": bounds.sup_p,
            "sup_D": bounds.sup_D, "ceiling": bounds.ceiling,
            "ok": bounds.ok,
        },
    }
    if write_outputs:
        out = Path(out_dir) if out_dir else scenario.output_dir()
        out.mkdir(parents=True, exist_ok=True)
        solver.write_step_log(traj, out / "step_log.csv")
        solver.write_flux_norms(traj, setup.mesh, bc_final, cfg,
                                out / "flux_norms.csv")
        dumped = set()
        for st in traj.states:
            marks = [t for t in setup.schedule.dump_times
                     if abs(st.t - t) <= 1e-12 * max(1.0, abs(t))]
            if (marks or st.t == 0.0) and st.t not in dumped:
                solver.dump_state_csv(st, setup.mesh,
                                      out / f"state_t{st.t:g}.csv")
                dumped.add(st.t)
        with open(out / "summary.json", "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True)
            f.write("\n")
    return RunResult(trajectory=traj, summary=summary)
