"""Disc-radius estimates for the tangent vector (1, 0) on the coupled bidisc.

The pseudo-norm of a tangent vector is the infimum of 1/r over radii r of
structure-holomorphic discs through the point with derivative matching the
vector.  At the origin the explicit disc z -> (z, 0) on the radius-2 disc
certifies an upper bound of 1/2, and that certificate is checked (residual
exactly zero), never assumed.

Away from the origin, at basepoints (0, b) with b != 0, this module scans
graph discs z -> (z, f(z)) over a grid of radii: a radius is feasible when
the solver converges, its equation residual passes the gate, and the graph
stays inside the radius-1/10 target factor.  The largest feasible radius
a gives an empirical lower-bound estimate 1/a for the pseudo-norm; a
failed solve is evidence, not proof, so every report carries an
empirical=true flag, and the rigorous content rides on the certificate
chain attached to solves that do converge.  The punchline the reports
juxtapose: 1/2 at the origin against estimates above 1/2 arbitrarily
close to it.

Scan points are independent jobs; records are assembled in radius order
so reports are byte-identical for every thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .acs import MEMBERSHIP_SLACK, Z2_RADIUS, DiscMap, graph_map, jholo_residual
from .certify import RESIDUAL_GATE_FACTOR, CertificateReport, theorem2_chain
from .dbar import (
    DbarProblem,
    DbarSolution,
    NanEncountered,
    picard_solve,
    rescaled_solution_record,
)
from .grid import ComplexField, make_grid
from .util import (
    SCHEMA_VERSION,
    as_complex_pair,
    parallel_map,
    write_json,
    write_pgm,
)

FAILURE_NONE = "none"
FAILURE_SUP = "sup_bound_violated"
FAILURE_NONCONV = "non_convergence"

DEFAULT_RESOLUTION = 65
DEFAULT_RADIUS_RANGE = (0.25, 2.0)
DEFAULT_RADIUS_COUNT = 16
# anchor sweep used by reports: three magnitudes, two phases
DEFAULT_B_SWEEP = (0.05, 0.05j, 0.01, 0.01j, 0.001, 0.001j)


def default_radii() -> np.ndarray:
    lo, hi = DEFAULT_RADIUS_RANGE
    return np.geomspace(lo, hi, DEFAULT_RADIUS_COUNT)


def _check_anchor(b: complex) -> complex:
    b = complex(b)
    if b == 0:
        raise ValueError("anchor must be nonzero; the zero graph is trivial")
    if abs(b) >= Z2_RADIUS - MEMBERSHIP_SLACK:
        raise ValueError("anchor must lie strictly inside the radius-1/10 disc")
    return b


@dataclass(frozen=True)
class FeasibilityRecord:
    """Outcome of one graph-disc attempt at one radius.

    failure_mode none means feasible; non_convergence covers both a
    diverging iteration and a converged fixed point whose equation
    residual misses the gate (no certificate either way); the sup mode
    means a gate-passing solution exists but its graph escapes the
    radius-1/10 factor, which is exactly what the sup lower bound demands.
    """

    radius: float
    b: complex
    feasible: bool
    failure_mode: str
    solution: DbarSolution | None
    chain: CertificateReport | None
    chain_note: str | None = None

    def __post_init__(self):
        if self.failure_mode not in (FAILURE_NONE, FAILURE_SUP, FAILURE_NONCONV):
            raise ValueError(f"unknown failure mode {self.failure_mode!r}")
        if self.feasible != (self.failure_mode == FAILURE_NONE):
            raise ValueError("feasible flag must match the failure mode")
        if self.solution is not None:
            got = self.solution.problem.grid.radius
            if abs(got - float(self.radius)) > 1e-12 * max(1.0, abs(got)):
                raise ValueError("record radius disagrees with the solution's grid")
        if self.feasible:
            sol = self.solution
            if sol is None or not sol.converged:
                raise ValueError("a feasible record needs a converged solution")
            gate = RESIDUAL_GATE_FACTOR * sol.f.spec.spacing
            if sol.residual_sup > gate:
                raise ValueError("a feasible record needs the residual below the gate")
            if sol.sup_f >= Z2_RADIUS - MEMBERSHIP_SLACK:
                raise ValueError("a feasible graph must stay inside the target factor")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "b", complex(self.b))

    def to_json_dict(self) -> dict:
        sol = self.solution
        return {
            "radius": self.radius,
            "b": as_complex_pair(self.b),
            "feasible": self.feasible,
            "failure_mode": self.failure_mode,
            "converged": None if sol is None else sol.converged,
            "iterations": None if sol is None else sol.iterations,
            "sup_f": None if sol is None else sol.sup_f,
            "residual_sup": None if sol is None else sol.residual_sup,
            "residual_gate": None
            if sol is None
            else RESIDUAL_GATE_FACTOR * sol.f.spec.spacing,
            "chain": None if self.chain is None else self.chain.to_json_dict(),
            "chain_note": self.chain_note,
        }


@dataclass(frozen=True)
class KrEstimate:
    """Scan summary at one basepoint for the fixed vector (1, 0)."""

    basepoint: tuple
    vector: tuple
    upper_bound: float
    records: tuple
    a_observed: float
    empirical: bool = True

    def __post_init__(self):
        if not self.upper_bound > 0:
            raise ValueError("upper bound must be positive")
        if self.records:
            top = max(rec.radius for rec in self.records)
            if self.a_observed > top:
                raise ValueError("a_observed cannot exceed the scanned radii")
        object.__setattr__(self, "basepoint", tuple(complex(c) for c in self.basepoint))
        object.__setattr__(self, "vector", tuple(complex(c) for c in self.vector))
        object.__setattr__(self, "records", tuple(self.records))

    def lower_bound(self) -> float:
        """Empirical: no larger graph disc worked, so at least 1/a_observed."""
        if self.a_observed == 0.0:
            return math.inf
        return 1.0 / self.a_observed

    def scan_consistent(self) -> bool:
        return check_scan_consistency(self.records)

    def to_json_dict(self) -> dict:
        no_disc = self.a_observed == 0.0
        return {
            "basepoint": [as_complex_pair(c) for c in self.basepoint],
            "vector": [as_complex_pair(c) for c in self.vector],
            "upper_bound": None if math.isinf(self.upper_bound) else self.upper_bound,
            "lower_bound": None if no_disc else self.lower_bound(),
            "no_feasible_disc": no_disc,
            "a_observed": self.a_observed,
            "empirical": self.empirical,
            "scan_consistent": self.scan_consistent(),
            "records": [rec.to_json_dict() for rec in self.records],
        }


@dataclass(frozen=True)
class OriginBound:
    """The exact origin estimate together with its checked witness."""

    bound: float
    witness: DiscMap
    witness_residual_sup: float


def upper_bound_origin(resolution: int = DEFAULT_RESOLUTION) -> OriginBound:
    """Certified upper bound 1/2 at ((0,0), (1,0)) from the disc z -> (z, 0).

    The witness is checked, not asserted: its holomorphy residual is
    measured and must vanish (it does exactly on dyadic spacings, where
    centered differences of linear data are exact).
    """
    spec = make_grid(2.0, resolution)
    witness = DiscMap(
        spec,
        ComplexField.from_function(spec, lambda z: z),
        ComplexField.constant(spec, 0.0),
    )
    _, sup = jholo_residual(witness)
    if sup > 1e-13:
        raise ArithmeticError(f"origin witness residual {sup:.3e} is not zero")
    return OriginBound(0.5, witness, sup)


def scaled_witness_bound(t: float, resolution: int = DEFAULT_RESOLUTION) -> OriginBound:
    """Bound 1/t from the witness z -> (t z, 0) on the unit disc.

    Consistency family for the origin estimate: as t approaches 2 the
    bound approaches the best one, and the range constraint |t z| < 2
    caps how far t can go.
    """
    t = float(t)
    if t <= 0:
        raise ValueError("scale must be positive")
    spec = make_grid(1.0, resolution)
    witness = DiscMap(
        spec,
        ComplexField.from_function(spec, lambda z: t * z),
        ComplexField.constant(spec, 0.0),
    )
    _, sup = jholo_residual(witness)
    if sup > 1e-13:
        raise ArithmeticError(f"scaled witness residual {sup:.3e} is not zero")
    return OriginBound(1.0 / t, witness, sup)


def graph_feasibility(
    r: float,
    b: complex,
    template: DbarProblem | None = None,
) -> FeasibilityRecord:
    """Attempt a graph disc of radius r anchored at f(0) = b.

    Solver trouble (divergence, non-convergence, residual above the gate)
    is recorded as non_convergence; a certified solution whose sup leaves
    the radius-1/10 factor is recorded as sup_bound_violated.  Infeasible
    records are data, not errors.  When the gate passes, the theorem chain
    runs on the unit-disc rescale of the solution and rides along.
    """
    r = float(r)
    if not (r > 0 and math.isfinite(r)):
        raise ValueError("radius must be positive and finite")
    b = _check_anchor(b)
    if template is None:
        problem = DbarProblem(make_grid(r, DEFAULT_RESOLUTION), b=b)
    else:
        problem = replace(
            template, grid=make_grid(r, template.grid.resolution), b=b
        )

    try:
        sol = picard_solve(problem)
    except NanEncountered:
        return FeasibilityRecord(r, b, False, FAILURE_NONCONV, None, None,
                                 "iteration left the floating-point range")

    gate = RESIDUAL_GATE_FACTOR * sol.f.spec.spacing
    gate_ok = sol.converged and sol.residual_sup <= gate

    chain = None
    chain_note = None
    if gate_ok:
        try:
            chain = theorem2_chain(rescaled_solution_record(sol))
        except ValueError as exc:
            chain_note = f"chain unavailable after rescale: {exc}"
    else:
        chain_note = "no certificate: solve missed the residual gate"

    if not gate_ok:
        return FeasibilityRecord(r, b, False, FAILURE_NONCONV, sol, chain, chain_note)
    if sol.sup_f >= Z2_RADIUS - MEMBERSHIP_SLACK:
        return FeasibilityRecord(r, b, False, FAILURE_SUP, sol, chain, chain_note)
    # construct the graph to re-validate the range through the map type
    graph_map(sol.f)
    return FeasibilityRecord(r, b, True, FAILURE_NONE, sol, chain, chain_note)


def check_scan_consistency(records) -> bool:
    """No feasible radius above one where a certified solution broke the sup bound."""
    sup_violations = [rec.radius for rec in records if rec.failure_mode == FAILURE_SUP]
    if not sup_violations:
        return True
    r0 = min(sup_violations)
    return all(not rec.feasible for rec in records if rec.radius > r0)


def radius_scan(
    b: complex,
    radii=None,
    template: DbarProblem | None = None,
    threads: int = 1,
) -> KrEstimate:
    """Feasibility records over a radius grid plus the bound estimate.

    a_observed is the largest feasible radius (zero when none is); the
    reported lower bound 1/a_observed is empirical by construction.
    """
    b = _check_anchor(b)
    if radii is None:
        radii = default_radii()
    radii = sorted(float(r) for r in np.asarray(radii, dtype=float).ravel())
    if len(radii) == 0:
        raise ValueError("radius scan needs at least one radius")

    records = parallel_map(
        lambda r: graph_feasibility(r, b, template), radii, threads=threads
    )
    feasible = [rec.radius for rec in records if rec.feasible]
    a_observed = max(feasible) if feasible else 0.0
    upper = (1.0 / a_observed) if a_observed > 0 else math.inf
    return KrEstimate(
        basepoint=(0.0, b),
        vector=(1.0, 0.0),
        upper_bound=upper,
        records=tuple(records),
        a_observed=a_observed,
    )


def _csv_complex(b: complex) -> str:
    s = repr(complex(b))
    return s[1:-1] if s.startswith("(") else s


def usc_report(
    b_list,
    out_dir,
    radii=None,
    template: DbarProblem | None = None,
    threads: int = 1,
) -> dict:
    """Juxtapose the exact origin bound with scan estimates near the origin.

    Writes usc_report.json (summary), usc_table.csv (one row per scanned
    radius), and one heatmap of |f| per solve that produced a field.  The
    headline flag all_gaps_positive records whether every tested
    basepoint's empirical lower bound exceeded the origin's exact 1/2;
    with no basepoints it is null.  Values that would be infinite are
    encoded as null plus the no_feasible_disc flag.
    """
    b_list = [_check_anchor(b) for b in b_list]
    os.makedirs(out_dir, exist_ok=True)
    origin = upper_bound_origin()

    rows = []
    csv_lines = ["b,r,feasible,sup_f,residual"]
    heatmaps = []
    scans = []
    for bi, b in enumerate(b_list):
        est = radius_scan(b, radii=radii, template=template, threads=threads)
        scans.append(est)
        no_disc = est.a_observed == 0.0
        # an empty feasible set bounds the norm below by 1/min-radius at
        # least, so the gap against 1/2 holds a fortiori
        gap_positive = True if no_disc else est.lower_bound() > origin.bound
        rows.append(
            {
                "b": as_complex_pair(b),
                "a_observed": est.a_observed,
                "lower_bound": None if no_disc else est.lower_bound(),
                "no_feasible_disc": no_disc,
                "gap_positive": gap_positive,
                "scan_consistent": est.scan_consistent(),
            }
        )
        for ri, rec in enumerate(est.records):
            sol = rec.solution
            sup_s = "" if sol is None else repr(sol.sup_f)
            res_s = "" if sol is None else repr(sol.residual_sup)
            csv_lines.append(
                f"{_csv_complex(b)},{rec.radius!r},{str(rec.feasible).lower()},{sup_s},{res_s}"
            )
            if sol is not None:
                name = f"scan_b{bi:02d}_r{ri:02d}_absf.pgm"
                write_pgm(os.path.join(out_dir, name), np.abs(sol.f.values))
                heatmaps.append(name)

    summary = {
        "schema_version": SCHEMA_VERSION,
        "vector": [as_complex_pair(1.0), as_complex_pair(0.0)],
        "origin_upper_bound": origin.bound,
        "origin_witness_residual": origin.witness_residual_sup,
        "empirical": True,
        "rows": rows,
        "all_gaps_positive": None
        if not rows
        else all(row["gap_positive"] for row in rows),
    }
    json_path = write_json(os.path.join(out_dir, "usc_report.json"), summary)
    csv_path = os.path.join(out_dir, "usc_table.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(csv_lines) + "\n")

    return {
        "summary": summary,
        "scans": scans,
        "paths": {"json": json_path, "csv": csv_path, "heatmaps": heatmaps},
    }
