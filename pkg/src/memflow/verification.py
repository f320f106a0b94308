"""Named verification suites behind ``memflow verify``.

Each suite re-checks one family of structural inequalities at runtime using
the frozen derived constants, printing one pass/fail line per check plus the
provenance of every constant involved.  The same functions back the test
suite, so `verify` failing means the shipped constants or the numerics
regressed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import regularization as reg
from . import statistics as stats
from .device import ContactSegment, MeshGeometry, build_mesh
from .diagnostics import neumann_poincare_constant, poincare_check
from .fixtures import load_envelope_constants, load_truncation_constants

__all__ = ["CheckResult", "SUITES", "run_suite", "format_table"]

LATTICE_K = (1, 2, 5, 10, 50)
LATTICE_DELTA = (0.01, 0.1, 0.5)
LATTICE_S = np.logspace(-3, 3, 25)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _check(name, passed, detail) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def suite_statistics_roundtrip() -> list[CheckResult]:
    y = np.linspace(-30.0, 50.0, 500)
    back = stats.inverse_fd_half(stats.fermi_dirac(0.5, y))
    err = float(np.max(np.abs(back - y)))
    out = [_check("inverse(F_1/2(y)) = y on [-30, 50], 500 points",
                  err <= 1e-8, f"max abs err {err:.3e} (tol 1e-8)")]
    rng = np.random.default_rng(2024)
    worst = 0.0
    for j in (-1.0, -0.5, 0.5):
        zs = rng.uniform(-80.0, 80.0, 25)
        for z in zs:
            a = stats.fermi_dirac(j, float(z))
            b = stats.fermi_dirac_quad(j, float(z))
            worst = max(worst, abs(a - b) / abs(b))
    out.append(_check("fast path vs quadrature oracle, model orders",
                      worst <= 1e-10, f"worst rel err {worst:.3e} (tol 1e-10)"))
    return out


def suite_appendix_a() -> list[CheckResult]:
    out = []
    zneg = -np.logspace(-6, np.log10(700.0), 200)
    for j in (-0.5, 0.5):
        f = stats.fermi_dirac(j, zneg)
        lo, hi = np.exp(zneg) / 2.0, np.exp(zneg)
        bad = int(np.sum((f < lo) | (f > hi)))
        out.append(_check(
            f"two-sided exponential envelope, order {j}, z <= 0 (200 pts)",
            bad == 0, f"{bad} violations"))
    zpos = np.logspace(-6, 2, 200)
    j = 0.5
    f = stats.fermi_dirac(j, zpos)
    g2, g1 = stats.gamma_fn(j + 2.0), stats.gamma_fn(j + 1.0)
    upper = zpos ** (j + 1) / g2 + (2 * zpos) ** j / g1 + 2.0 ** j
    lower = zpos ** (j + 1) / (2 * g2) + 0.5
    bad = int(np.sum((f < lower) | (f > upper)))
    out.append(_check(
        "power-law envelope, order 1/2, z in (0, 100] (200 pts)",
        bad == 0, f"{bad} violations"))

    zs = np.linspace(-20.0, 30.0, 50)
    h = 1e-5
    fd = (stats.fermi_dirac(0.5, zs + h) - stats.fermi_dirac(0.5, zs - h)) / (2 * h)
    ref = stats.fermi_dirac(-0.5, zs)
    rel = float(np.max(np.abs(fd - ref) / np.abs(ref)))
    out.append(_check(
        "derivative of F_1/2 equals F_-1/2 (central differences, 50 pts)",
        rel <= 1e-6, f"max rel dev {rel:.3e} (tol 1e-6)"))

    env = load_envelope_constants()
    z = np.logspace(-8, 8, 400)
    ratio = stats.g_prime(z) / (1.0 / z + z ** (-1.0 / 3.0))
    lo, hi = env["gprime_ratio_lower"], env["gprime_ratio_upper"]
    bad = int(np.sum((ratio < lo) | (ratio > hi)))
    out.append(_check(
        "g' envelope ratio inside frozen bracket on [1e-8, 1e8]",
        bad == 0, f"{bad} violations of [{lo:.6g}, {hi:.6g}]"))

    hstep = 1e-4 * z
    d = (stats.g_prime(z + hstep) * (z + hstep)
         - stats.g_prime(z - hstep) * (z - hstep)) / (2 * hstep)
    shape = np.where(z < stats.F12_ZERO, 1.0, z ** (-1.0 / 3.0))
    c = env["zgprime_derivative_bound"]
    bad = int(np.sum(d > c * shape))
    out.append(_check(
        "finite-difference (z g')' below frozen two-regime bound",
        bad == 0, f"{bad} violations of C = {c:.6g}"))
    return out


def suite_lemma_2_4() -> list[CheckResult]:
    c = load_truncation_constants()["c_trunc53"]
    worst = -np.inf
    count = 0
    bad = 0
    for k in LATTICE_K:
        for d in LATTICE_DELTA:
            lev = reg.TruncationLevel(k, d)
            G = reg.G_k_delta(lev, LATTICE_S)
            lhs = reg.trunc_T(k, LATTICE_S) ** (5.0 / 3.0)
            rhs = c * (1.0 + G)
            bad += int(np.sum(lhs > rhs))
            count += LATTICE_S.size
            worst = max(worst, float(np.max(lhs / (1.0 + G))))
    return [_check(
        f"clamp(s)^(5/3) <= C (1 + G_k_delta(s)) on {count} lattice points",
        bad == 0, f"{bad} violations; observed sup {worst:.6g} vs C {c:.6g}")]


def suite_lemma_2_6() -> list[CheckResult]:
    consts = load_truncation_constants()
    out = []
    checks = {"second derivative of G_k dominates g'": 0,
              "s^(5/3) <= C (G_k + 1)": 0,
              "clamp(s)^(7/6) <= C g_tilde_k": 0,
              "g_tilde_k^(10/7) <= C (G_k + 1)": 0,
              "h_tilde_k' >= max(s^(-1/2), 1)": 0}
    npts = 0
    for k in LATTICE_K:
        lev = reg.TruncationLevel(k, 0.0)
        s = LATTICE_S
        npts += s.size
        G = reg.G_k_delta(lev, s)
        gt = reg.g_tilde_k_delta(lev, s)
        gpp = reg.G_k_delta_second_fd(lev, s, h=1e-4)
        gp = stats.g_prime(s)
        # equality holds below the truncation point; allow finite-difference slack
        checks["second derivative of G_k dominates g'"] += int(
            np.sum(gp > gpp * (1.0 + 1e-6) + 1e-9))
        checks["s^(5/3) <= C (G_k + 1)"] += int(
            np.sum(s ** (5 / 3) > consts["c_53"] * (G + 1.0)))
        checks["clamp(s)^(7/6) <= C g_tilde_k"] += int(
            np.sum(reg.trunc_T(k, s) ** (7 / 6) > consts["c_76"] * gt))
        checks["g_tilde_k^(10/7) <= C (G_k + 1)"] += int(
            np.sum(gt ** (10 / 7) > consts["c_107"] * (G + 1.0)))
        sv = np.linspace(1e-4, 1.0 - 1e-4, 25)
        hp = reg.h_tilde_k_delta_prime(lev, sv)
        checks["h_tilde_k' >= max(s^(-1/2), 1)"] += int(
            np.sum(hp < np.maximum(sv ** -0.5, 1.0) * (1.0 - 1e-12)))
    for name, bad in checks.items():
        out.append(_check(f"{name} ({npts} lattice points)", bad == 0,
                          f"{bad} violations"))

    # monotone family and pointwise consistency of the capped coefficients
    sgrid = np.linspace(0.0, 1.0 - 1e-6, 200)
    mono_bad = 0
    for k in LATTICE_K:
        mono_bad += int(np.sum(reg.L_k(k, sgrid) >
                               reg.L_k(k + 1, sgrid) + 1e-12))
    out.append(_check("L_k <= L_{k+1} on [0, 1)", mono_bad == 0,
                      f"{mono_bad} violations"))
    scomp = np.linspace(0.0, 0.9, 50)
    dev = float(np.max(np.abs(reg.L_k(10 ** 6, scomp) + np.log1p(-scomp))))
    out.append(_check("L_k -> -log(1-s) on compact subsets", dev <= 1e-5,
                      f"max dev {dev:.3e} at k = 1e6"))
    zg = np.logspace(-2, 1, 40)
    dev1 = float(np.max(np.abs(reg.s_k1(10 ** 6, zg)
                               / (zg * stats.g_prime(zg)) - 1.0)))
    zh = np.linspace(0.05, 0.95, 40)
    dev2 = float(np.max(np.abs(reg.s_k2(10 ** 9, zh)
                               * (1.0 - zh) - 1.0)))
    out.append(_check("capped coefficients converge to z g'(z), z h'(z)",
                      max(dev1, dev2) <= 1e-5,
                      f"max devs {dev1:.2e}, {dev2:.2e}"))
    return out


def suite_poincare(trials: int = 100) -> list[CheckResult]:
    geom = MeshGeometry(dimension=1, lengths=(1.0,), cells=(32,),
                        contacts=(ContactSegment("left"),))
    mesh = build_mesh(geom)
    cp = neumann_poincare_constant(mesh)
    rng = np.random.default_rng(7)
    worst = np.inf
    bad = 0
    for _ in range(trials):
        u = rng.uniform(0.0, 0.9, mesh.n_cells)
        res = poincare_check(u, mesh, u_hat=0.95, c_poincare=cp)
        worst = min(worst, res.slack)
        bad += res.slack < 0.0
    return [_check(
        f"nonlinear Poincare certificate, {trials} random fields",
        bad == 0, f"{bad} negative slacks; min slack {worst:.6g} "
        f"(C_P = {cp:.6g})")]


SUITES = {
    "statistics-roundtrip": suite_statistics_roundtrip,
    "appendix-a": suite_appendix_a,
    "lemma-2-4": suite_lemma_2_4,
    "lemma-2-6": suite_lemma_2_6,
    "poincare": suite_poincare,
}


def run_suite(name: str) -> list[CheckResult]:
    if name == "all":
        results = []
        for key in SUITES:
            results.extend(run_suite(key))
        return results
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from "
                       f"{sorted(SUITES)} or 'all'")
    return SUITES[name]()


def format_table(results: list[CheckResult], with_provenance: bool = True) -> str:
    width = max(len(r.name) for r in results)
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name.ljust(width)}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    if with_provenance:
        lines.append("")
        lines.append("derived-constant provenance:")
        for loader in (load_envelope_constants, load_truncation_constants):
            try:
                cs = loader()
            except FileNotFoundError as exc:
                lines.append(f"  ({exc})")
                continue
            for p in cs.provenance:
                lines.append(f"  {p}")
            for k, v in cs.values.items():
                lines.append(f"    {k} = {v!r}")
    return "\n".join(lines)
