"""Frozen derived constants for the inequality suites.

The analysis only proves that envelope constants exist; concrete values are
obtained once by scanning the quadrature oracle over documented grids
(``scripts/derive_constants.py``), widened by a 1.5 safety factor, and
frozen as CSV fixtures shipped with the package.  Tests and the ``verify``
command consume them through this module; regenerating the fixtures is an
explicit, reviewed act.

Each CSV carries a provenance header (grid, date, oracle tolerance) exposed
alongside the values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

__all__ = [
    "ConstantSet",
    "load_envelope_constants",
    "load_truncation_constants",
]


@dataclass(frozen=True)
class ConstantSet:
    """Named constants plus the provenance lines they were derived under."""

    values: dict
    provenance: tuple[str, ...]

    def __getitem__(self, key: str) -> float:
        return self.values[key]


def _load(name: str) -> ConstantSet:
    ref = resources.files("memflow") / "fixtures" / name
    if not ref.is_file():
        raise FileNotFoundError(
            f"fixture {name} is missing; run scripts/derive_constants.py")
    provenance = []
    rows = []
    with ref.open() as f:
        for line in f:
            if line.startswith("#"):
                provenance.append(line[1:].strip())
            else:
                rows.append(line)
    values = {}
    for rec in csv.DictReader(rows):
        values[rec["name"]] = float(rec["value"])
    return ConstantSet(values=values, provenance=tuple(provenance))


def load_envelope_constants() -> ConstantSet:
    """Brackets for the inverse-map derivative envelopes:

    * ``gprime_ratio_lower`` / ``gprime_ratio_upper``: two-sided bracket for
      g'(z) / (1/z + z^{-1/3}) on z in [1e-8, 1e8];
    * ``zgprime_derivative_bound``: upper constant C for the finite-difference
      derivative of z g'(z) against 1 below F_{1/2}(0) and z^{-1/3} above.
    """
    return _load("envelope_constants.csv")


def load_truncation_constants() -> ConstantSet:
    """Per-inequality constants of the truncation lattice:

    ``c_trunc53`` for T_k(s)^{5/3} <= C (1 + G_{k,delta}(s));
    ``c_53``      for s^{5/3} <= C (G_k(s) + 1);
    ``c_76``      for T_k(s)^{7/6} <= C gt_k(s);
    ``c_107``     for gt_k(s)^{10/7} <= C (G_k(s) + 1);
    ``c_53_untruncated`` for s^{5/3} <= C (G(s) + 1) on the scan range.
    """
    return _load("truncation_constants.csv")
