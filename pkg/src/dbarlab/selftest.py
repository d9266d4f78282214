"""Self-check battery: every shipped guarantee exercised in one pass.

Each criterion function runs one guarantee end to end and returns a
CriterionResult with the measured numbers in its details.  run_selftest
aggregates them into a summary dict that intentionally contains no
timestamps, paths, or timing figures: two runs with the same config must
produce byte-identical canonical JSON regardless of thread count, and the
last criterion checks exactly that property on a reduced workload.  Wall
clock budgets are enforced where a guarantee includes one, but only the
boolean verdict lands in the summary.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .acs import j_squared_deviation, reduction_identity
from .cauchy import cauchy_transform
from .certify import eq_chain_check, lemma1_check, lemma2_check, sqrt_branch
from .dbar import DbarProblem, picard_solve, profile_exact, residual_dbar
from .grid import ComplexField, RealField, make_grid
from .kr import radius_scan, upper_bound_origin, usc_report
from .ode import (
    exact_forward,
    family_trajectory,
    lower_bound_check,
    nonuniq_family,
    rk4_integrate,
)
from .util import SCHEMA_VERSION, config_digest, json_dumps, parallel_map

SELFTEST_DEFAULTS = {
    "criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
    "random_field_count": 20,
    "random_field_resolution": 129,
    "reduction_budget_seconds": 10.0,
    "family_kink": 0.0,
    "family_resolutions": [129, 257],
    "sharpness_resolution": 257,
    "chain_resolution": 257,
    "max_principle_resolution": 257,
    "sweep_resolution": 257,
    "sweep_magnitudes": [0.001, 0.01, 0.05, 0.1],
    "sweep_phases": [[1.0, 0.0], [0.7071067811865476, 0.7071067811865476]],
    "sweep_budget_seconds": 1800.0,
    "transform_resolutions": [129, 257],
    "transform_agreement_resolution": 65,
    "ode_steps": 1000,
    "structure_sample_count": 1000000,
    "scan_anchor": [0.05, 0.0],
    "scan_resolution": 65,
}

CRITERION_NAMES = {
    1: "reduction_identity",
    2: "exact_family",
    3: "lemma1_sharpness",
    4: "identity_chain",
    5: "max_principle",
    6: "sup_lower_bound_sweep",
    7: "cauchy_transform",
    8: "ode_analogue",
    9: "structure_matrix",
    10: "usc_gap",
    11: "determinism",
}


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    details: dict

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "name": self.name,
            "passed": self.passed,
            "details": self.details,
        }


def merge_config(overrides: dict | None) -> dict:
    """Defaults plus overrides; unknown keys or wrong shapes are errors."""
    cfg = {k: (list(v) if isinstance(v, list) else v) for k, v in SELFTEST_DEFAULTS.items()}
    if overrides is None:
        return cfg
    if not isinstance(overrides, dict):
        raise ValueError("selftest config must be a JSON object")
    for key, value in overrides.items():
        if key not in SELFTEST_DEFAULTS:
            raise ValueError(f"unknown selftest config key {key!r}")
        want = SELFTEST_DEFAULTS[key]
        if isinstance(want, list) != isinstance(value, list):
            raise ValueError(f"config key {key!r} must be a list" if isinstance(want, list)
                             else f"config key {key!r} must be a scalar")
        if isinstance(want, (int, float)) and not isinstance(want, bool):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ValueError(f"config key {key!r} must be numeric")
        cfg[key] = value
    bad = [c for c in cfg["criteria"] if c not in CRITERION_NAMES]
    if bad:
        raise ValueError(f"unknown criteria requested: {bad}")
    return cfg


def _random_small_field(spec, seed: int) -> ComplexField:
    rng = np.random.default_rng(seed)
    Z = spec.nodes()
    c = rng.normal(size=5) + 1j * rng.normal(size=5)
    vals = c[0] + c[1] * Z + c[2] * Z * Z + c[3] * np.conj(Z) + c[4] * np.abs(Z)
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = 0.09 * vals / peak
    return ComplexField(spec, vals, spec.default_margin())


def criterion_01(cfg: dict, threads: int) -> CriterionResult:
    """Graph system and scalar equation agree to rounding on random fields."""
    spec = make_grid(1.0, int(cfg["random_field_resolution"]))
    count = int(cfg["random_field_count"])
    start = time.monotonic()
    gaps = parallel_map(
        lambda i: reduction_identity(_random_small_field(spec, 1000 + i)),
        range(count),
        threads=threads,
    )
    elapsed = time.monotonic() - start
    worst = float(max(gaps))
    runtime_ok = elapsed < float(cfg["reduction_budget_seconds"])
    return CriterionResult(
        1,
        CRITERION_NAMES[1],
        worst <= 1e-10 and runtime_ok,
        {
            "fields": count,
            "resolution": spec.resolution,
            "max_discrepancy": worst,
            "tolerance": 1e-10,
            "runtime_ok": runtime_ok,
        },
    )


def criterion_02(cfg: dict, threads: int) -> CriterionResult:
    """Closed-form family: kink-line residual scale and its halving."""
    c = float(cfg["family_kink"])
    sups = []
    away = []
    spacings = []
    for n in cfg["family_resolutions"]:
        spec = make_grid(1.0, int(n))
        res_field, sup = residual_dbar(profile_exact(c, spec))
        X, _ = spec.mesh()
        off_kink = res_field.mask & (np.abs(X - c) >= 3 * spec.spacing)
        sups.append(sup)
        away.append(float(np.max(res_field.values[off_kink])))
        spacings.append(spec.spacing)
    away_ok = all(a <= 2.0 * h for a, h in zip(away, spacings))
    ratio = sups[-1] / sups[0]
    halves = 0.375 <= ratio <= 0.625
    return CriterionResult(
        2,
        CRITERION_NAMES[2],
        away_ok and halves,
        {
            "kink": c,
            "resolutions": [int(n) for n in cfg["family_resolutions"]],
            "residual_sup": sups,
            "residual_sup_off_kink": away,
            "constant_bound": 2.0,
            "halving_ratio": ratio,
        },
    )


def criterion_03(cfg: dict, threads: int) -> CriterionResult:
    """Sharpness: the smoothness inequality is an equality on the profile."""
    spec = make_grid(1.0, int(cfg["sharpness_resolution"]))
    X, _ = spec.mesh()
    rep = lemma1_check(profile_exact(-1.0, spec).restrict(X > -0.5))
    tol = 10.0 * spec.spacing ** 2
    ok = abs(rep.min_slack) <= tol and rep.hypothesis_ok
    return CriterionResult(
        3,
        CRITERION_NAMES[3],
        ok,
        {
            "resolution": spec.resolution,
            "min_slack": rep.min_slack,
            "tolerance": tol,
            "hypothesis_ok": rep.hypothesis_ok,
            "inequality_ok": rep.details["inequality_ok"],
        },
    )


def criterion_04(cfg: dict, threads: int) -> CriterionResult:
    """Identity chain on the explicit branch of the profile."""
    spec = make_grid(1.0, int(cfg["chain_resolution"]))
    branch = sqrt_branch(profile_exact(-1.0, spec))
    rep = eq_chain_check(branch)
    tol = 10.0 * spec.spacing
    worst = max(rep.details["violations"].values())
    ok = worst <= tol and rep.min_slack >= -tol
    return CriterionResult(
        4,
        CRITERION_NAMES[4],
        ok,
        {
            "resolution": spec.resolution,
            "violations": rep.details["violations"],
            "laplacian_slack_min": rep.min_slack,
            "tolerance": tol,
        },
    )


def criterion_05(cfg: dict, threads: int) -> CriterionResult:
    """Discrete maximum principle calibration on the exact quadratic."""
    spec = make_grid(1.0, int(cfg["max_principle_resolution"]))
    u = RealField.from_function(
        spec, lambda X, Y: 0.25 * (X * X + Y * Y) + 0.01, margin=0.0
    )
    rep = lemma2_check(u)
    tol = 10.0 * spec.spacing ** 2
    quad_ok = (
        rep.hypothesis_ok
        and rep.details["triggered"]
        and abs(rep.details["conclusion_slack"] - 0.01) <= tol
    )
    zero = lemma2_check(RealField.constant(spec, 0.0))
    zero_ok = not zero.details["triggered"]
    return CriterionResult(
        5,
        CRITERION_NAMES[5],
        quad_ok and zero_ok,
        {
            "resolution": spec.resolution,
            "conclusion_slack": rep.details["conclusion_slack"],
            "target_slack": 0.01,
            "tolerance": tol,
            "hypothesis_ok": rep.hypothesis_ok,
            "zero_field_triggered": zero.details["triggered"],
        },
    )


def criterion_06(cfg: dict, threads: int) -> CriterionResult:
    """No gate-passing solve with nonzero anchor undercuts the sup floor."""
    n = int(cfg["sweep_resolution"])
    anchors = []
    for mag in cfg["sweep_magnitudes"]:
        for ph in cfg["sweep_phases"]:
            anchors.append(float(mag) * complex(ph[0], ph[1]))

    def run(b: complex) -> dict:
        sol = picard_solve(DbarProblem(make_grid(1.0, n), b=b))
        gate = 5.0 * sol.f.spec.spacing
        gate_ok = sol.converged and sol.residual_sup <= gate
        return {
            "b": [b.real, b.imag],
            "converged": sol.converged,
            "residual_sup": sol.residual_sup,
            "residual_gate": gate,
            "gate_ok": gate_ok,
            "sup_f": sol.sup_f,
            "undercuts_floor": bool(gate_ok and sol.sup_f < 0.08),
        }

    start = time.monotonic()
    rows = parallel_map(run, anchors, threads=threads)
    elapsed = time.monotonic() - start
    runtime_ok = elapsed < float(cfg["sweep_budget_seconds"])
    none_undercut = not any(row["undercuts_floor"] for row in rows)
    return CriterionResult(
        6,
        CRITERION_NAMES[6],
        none_undercut and runtime_ok,
        {
            "resolution": n,
            "floor": 0.08,
            "rows": rows,
            "runtime_ok": runtime_ok,
        },
    )


def criterion_07(cfg: dict, threads: int) -> CriterionResult:
    """Transform accuracy on the disc indicator plus path agreement."""
    errs = []
    for n in cfg["transform_resolutions"]:
        spec = make_grid(1.0, int(n))
        chi = ComplexField.constant(spec, 1.0)
        out = cauchy_transform(chi)
        zz = spec.nodes()
        inner = chi.mask & (np.abs(zz) <= 0.8)
        errs.append(float(np.max(np.abs(out.values - np.conj(zz))[inner])))
    na = int(cfg["transform_agreement_resolution"])
    spec_a = make_grid(1.0, na)
    chi_a = ComplexField.constant(spec_a, 1.0)
    fast = cauchy_transform(chi_a, method="fft")
    direct = cauchy_transform(chi_a, method="direct")
    agreement = float(np.max(np.abs(fast.values - direct.values)))
    ok = errs[0] <= 0.05 and errs[-1] < errs[0] and agreement <= 1e-10
    return CriterionResult(
        7,
        CRITERION_NAMES[7],
        ok,
        {
            "resolutions": [int(n) for n in cfg["transform_resolutions"]],
            "indicator_errors": errs,
            "error_bound": 0.05,
            "path_agreement": agreement,
            "agreement_bound": 1e-10,
        },
    )


def criterion_08(cfg: dict, threads: int) -> CriterionResult:
    """Scalar analogue: integrator accuracy, family validity, bound slack."""
    steps = int(cfg["ode_steps"])
    rk_errs = {}
    for g0 in (0.01, 1.0):
        traj = rk4_integrate(g0, steps=steps)
        rk_errs[repr(g0)] = abs(traj.value_at_end() - exact_forward(g0, 1.0))
    rk_ok = all(e <= 1e-6 for e in rk_errs.values())

    fam_resid = {}
    fam_ok = True
    for c in (0.0, 0.3, 0.9):
        traj = family_trajectory(c, samples=2001)
        step = traj.xs[1] - traj.xs[0]
        fd = (traj.gs[2:] - traj.gs[:-2]) / (2 * step)
        resid = np.abs(fd - np.sqrt(traj.gs[1:-1]))
        off = np.abs(traj.xs[1:-1] - c) > step
        fam_resid[repr(c)] = float(np.max(resid[off]))
        fam_ok = fam_ok and fam_resid[repr(c)] <= 2 * step

    slack_gaps = {}
    for g0 in (0.01, 0.25, 1.0):
        res = lower_bound_check(g0)
        slack_gaps[repr(g0)] = abs(res.slack - (np.sqrt(g0) + g0))
    slack_ok = all(v <= 1e-12 for v in slack_gaps.values())

    distinct = nonuniq_family(0.0, 1.0) - nonuniq_family(0.9, 1.0)
    return CriterionResult(
        8,
        CRITERION_NAMES[8],
        rk_ok and fam_ok and slack_ok,
        {
            "rk4_errors": rk_errs,
            "family_fd_residuals": fam_resid,
            "slack_formula_gaps": slack_gaps,
            "nonuniqueness_witness_gap": distinct,
        },
    )


def criterion_09(cfg: dict, threads: int) -> CriterionResult:
    """Structure matrix algebra and the certified origin witness."""
    count = int(cfg["structure_sample_count"])
    rng = np.random.default_rng(0)
    z1 = 1.999 * np.sqrt(rng.uniform(size=count)) * np.exp(2j * np.pi * rng.uniform(size=count))
    z2 = 0.0999 * np.sqrt(rng.uniform(size=count)) * np.exp(2j * np.pi * rng.uniform(size=count))
    dev = j_squared_deviation(z1, z2)
    origin = upper_bound_origin(int(cfg["scan_resolution"]))
    ok = dev <= 1e-14 and origin.witness_residual_sup == 0.0 and origin.bound == 0.5
    return CriterionResult(
        9,
        CRITERION_NAMES[9],
        ok,
        {
            "samples": count,
            "max_square_deviation": dev,
            "deviation_bound": 1e-14,
            "origin_bound": origin.bound,
            "origin_witness_residual": origin.witness_residual_sup,
        },
    )


def criterion_10(cfg: dict, threads: int, out_dir=None) -> CriterionResult:
    """Strict gap between origin bound and nearby empirical lower bounds."""
    b = complex(cfg["scan_anchor"][0], cfg["scan_anchor"][1])
    template = DbarProblem(make_grid(1.0, int(cfg["scan_resolution"])), b=b)
    if out_dir is None:
        with tempfile.TemporaryDirectory() as tmp:
            report = usc_report([b], tmp, template=template, threads=threads)
    else:
        report = usc_report([b], out_dir, template=template, threads=threads)
    summary = report["summary"]
    est = report["scans"][0]
    gap_ok = est.a_observed < 2.0 and (
        est.a_observed == 0.0 or est.lower_bound() > 0.5
    )
    ok = (
        gap_ok
        and summary["empirical"] is True
        and summary["all_gaps_positive"] is True
        and summary["origin_upper_bound"] == 0.5
    )
    return CriterionResult(
        10,
        CRITERION_NAMES[10],
        ok,
        {
            "anchor": [b.real, b.imag],
            "a_observed": est.a_observed,
            "lower_bound": None if est.a_observed == 0.0 else est.lower_bound(),
            "no_feasible_disc": est.a_observed == 0.0,
            "origin_upper_bound": summary["origin_upper_bound"],
            "empirical": summary["empirical"],
            "all_gaps_positive": summary["all_gaps_positive"],
            "scan_consistent": est.scan_consistent(),
        },
    )


def criterion_11(cfg: dict, threads: int) -> CriterionResult:
    """Reduced workload rerun across thread counts; outputs byte-compared."""
    b = complex(cfg["scan_anchor"][0], cfg["scan_anchor"][1])
    spec = make_grid(1.0, int(cfg["scan_resolution"]))

    def workload(t: int) -> str:
        est = radius_scan(b, radii=[0.25, 0.5, 1.0], threads=t)
        gaps = parallel_map(
            lambda i: reduction_identity(_random_small_field(spec, 2000 + i)),
            range(6),
            threads=t,
        )
        chi = ComplexField.constant(spec, 1.0)
        agreement = float(
            np.max(
                np.abs(
                    cauchy_transform(chi, method="fft").values
                    - cauchy_transform(chi, method="direct").values
                )
            )
        )
        payload = {
            "scan": est.to_json_dict(),
            "reduction_gaps": [float(g) for g in gaps],
            "transform_agreement": agreement,
        }
        return json_dumps(payload)

    one = workload(1)
    many = workload(8)
    identical = one == many
    return CriterionResult(
        11,
        CRITERION_NAMES[11],
        identical,
        {
            "thread_counts": [1, 8],
            "identical": identical,
            "payload_bytes": len(one),
        },
    )


_CRITERIA = {
    1: criterion_01,
    2: criterion_02,
    3: criterion_03,
    4: criterion_04,
    5: criterion_05,
    6: criterion_06,
    7: criterion_07,
    8: criterion_08,
    9: criterion_09,
    10: criterion_10,
    11: criterion_11,
}


def run_selftest(config: dict | None = None, threads: int = 1, out_dir=None) -> dict:
    """Run the requested criteria and assemble the deterministic summary.

    The summary carries no timestamps, no paths, and no timings, so
    identical configs give byte-identical canonical JSON for any thread
    count.  out_dir, when given, receives the report files criterion 10
    emits; the summary itself never references them.
    """
    cfg = merge_config(config)
    results = []
    for idx in sorted(set(int(c) for c in cfg["criteria"])):
        fn = _CRITERIA[idx]
        try:
            if idx == 10:
                res = fn(cfg, threads, out_dir=out_dir)
            else:
                res = fn(cfg, threads)
        except Exception as exc:  # a crashed criterion is a failed criterion
            res = CriterionResult(
                idx,
                CRITERION_NAMES[idx],
                False,
                {"error": f"{type(exc).__name__}: {exc}"},
            )
        results.append(res)
    return {
        "schema_version": SCHEMA_VERSION,
        "config_digest": config_digest(cfg),
        "criteria": [r.to_json_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }


def format_table(summary: dict) -> list:
    """Human-readable pass/fail lines for terminal output."""
    lines = []
    for row in summary["criteria"]:
        mark = "PASS" if row["passed"] else "FAIL"
        lines.append(f"criterion {row['index']:02d} {row['name']:<24s} {mark}")
    verdict = "all criteria passed" if summary["all_passed"] else "FAILURES PRESENT"
    lines.append(verdict)
    return lines
