"""Command-line surface: scenario files, workflow execution, report emission.

Scenario files are JSON documents (one scenario per file):

    {
      "horizon": 1.0,
      "steps": 8,
      "delta_steps": 2,
      "lambda": 0.3,                    // scalar or per-step array
      "lambda_max": 0.3,                // optional, defaults to max(lambda)
      "driver": {"text": "-0.05*y", "form": "H"},   // or a bare string (H form)
      "obstacle": "-1e9",
      "terminal": "w",
      "scheme": "explicit",
      "seed": 0,
      "outputs": ["solve"],
      "oracle": {"kind": "crr", "spot": 1.0, "strike": 1.0,
                 "rate": 0.04, "sigma": 1.0}        // optional cross-check
    }

Subcommands: solve, picard, stopping, compare, suite.  Exit codes: 0 all
checks pass, 2 validation failure, 3 numerical check failure, 4 I/O error.
Reports are deterministic: sorted keys, floats printed with 17 significant
digits, no timing section unless --timing is passed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import comparison as cmp
from . import stopping as stp
from .crr import crr_american_put
from .driver import DriverForm, DriverParseError, TransformedDriver, parse_driver
from .errors import (
    EnumerationError,
    HypothesisError,
    PicardConvergenceError,
    RabsdeError,
    ScenarioError,
    SolverError,
)
from .lattice import IntensitySpec, build_lattice
from .solver import (
    DRIVER_VARS,
    OBSTACLE_VARS,
    TERMINAL_VARS,
    PicardOptions,
    Scenario,
    Scheme,
    Solution,
    estimate_c_prime,
    obstacle_field,
    solve_backward,
    solve_picard,
    terminal_values,
    validate_solution,
)

_KNOWN_KEYS = {
    "horizon", "steps", "delta_steps", "lambda", "lambda_max", "driver",
    "obstacle", "terminal", "scheme", "implicit_tol", "implicit_max_iter",
    "seed", "outputs", "oracle", "name",
}
_KNOWN_OUTPUTS = {"solve", "validate", "picard", "stopping", "compare"}


# -- scenario loading ----------------------------------------------------------


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)
            and math.isfinite(float(x)))


def scenario_from_dict(doc: dict) -> Scenario:
    """Build and fully validate a Scenario; collects every issue found."""
    issues: list[tuple[str, str]] = []
    if not isinstance(doc, dict):
        raise ScenarioError([("", "scenario document must be a JSON object")])
    for key in doc:
        if key not in _KNOWN_KEYS:
            issues.append((f"/{key}", "unknown key"))

    horizon = doc.get("horizon")
    if not _is_num(horizon) or float(horizon) <= 0:
        issues.append(("/horizon", "must be a positive number"))
        horizon = 1.0
    horizon = float(horizon)

    steps = doc.get("steps")
    if not _is_int(steps) or steps <= 0:
        issues.append(("/steps", "must be a positive integer"))
        steps = 1
    delta = doc.get("delta_steps", 0)
    if not _is_int(delta) or delta < 0:
        issues.append(("/delta_steps", "must be a non-negative integer (a multiple of dt)"))
        delta = 0

    lam_raw = doc.get("lambda")
    if _is_num(lam_raw):
        lam_values = [float(lam_raw)] * steps
    elif isinstance(lam_raw, list) and lam_raw and all(_is_num(v) for v in lam_raw):
        if len(lam_raw) != steps:
            issues.append(("/lambda", f"array must have one value per step ({steps})"))
            lam_values = [0.0] * steps
        else:
            lam_values = [float(v) for v in lam_raw]
    else:
        issues.append(("/lambda", "must be a number or an array of numbers"))
        lam_values = [0.0] * steps
    lam_max_raw = doc.get("lambda_max")
    if lam_max_raw is None:
        lam_max = max(lam_values) if lam_values else 0.0
    elif _is_num(lam_max_raw):
        lam_max = float(lam_max_raw)
    else:
        issues.append(("/lambda_max", "must be a number"))
        lam_max = max(lam_values) if lam_values else 0.0

    driver_raw = doc.get("driver")
    form = DriverForm.H
    driver_text = None
    if isinstance(driver_raw, str):
        driver_text = driver_raw
    elif isinstance(driver_raw, dict):
        driver_text = driver_raw.get("text")
        form_raw = driver_raw.get("form", "H")
        if form_raw in ("H", "M"):
            form = DriverForm(form_raw)
        else:
            issues.append(("/driver/form", "must be 'H' or 'M'"))
        if not isinstance(driver_text, str):
            issues.append(("/driver/text", "must be a string"))
            driver_text = "0"
    else:
        issues.append(("/driver", "must be a string or {text, form} object"))
        driver_text = "0"

    def _parse(ptr: str, text, allowed, what: str):
        if not isinstance(text, str):
            issues.append((ptr, "must be a string"))
            return parse_driver("0")
        try:
            expr = parse_driver(text)
        except DriverParseError as exc:
            issues.append((ptr, str(exc)))
            return parse_driver("0")
        extra = expr.free_vars - allowed
        if extra:
            issues.append((ptr, f"{what} may only use {sorted(allowed)}; found {sorted(extra)}"))
        return expr

    driver_expr = _parse("/driver/text" if isinstance(driver_raw, dict) else "/driver",
                         driver_text, DRIVER_VARS, "driver")
    obstacle_expr = _parse("/obstacle", doc.get("obstacle"), OBSTACLE_VARS, "obstacle")
    terminal_expr = _parse("/terminal", doc.get("terminal"), TERMINAL_VARS, "terminal")

    scheme_raw = doc.get("scheme", "explicit")
    if scheme_raw not in ("explicit", "implicit"):
        issues.append(("/scheme", "must be 'explicit' or 'implicit'"))
        scheme_raw = "explicit"
    implicit_tol = doc.get("implicit_tol", 1e-13)
    if not _is_num(implicit_tol) or implicit_tol <= 0:
        issues.append(("/implicit_tol", "must be a positive number"))
        implicit_tol = 1e-13
    implicit_max_iter = doc.get("implicit_max_iter", 500)
    if not _is_int(implicit_max_iter) or implicit_max_iter <= 0:
        issues.append(("/implicit_max_iter", "must be a positive integer"))
        implicit_max_iter = 500

    seed = doc.get("seed", 0)
    if not _is_int(seed):
        issues.append(("/seed", "must be an integer"))
    outputs = doc.get("outputs", [])
    if not isinstance(outputs, list) or any(o not in _KNOWN_OUTPUTS for o in outputs):
        issues.append(("/outputs", f"must be a list drawn from {sorted(_KNOWN_OUTPUTS)}"))

    oracle = doc.get("oracle")
    if oracle is not None:
        if not isinstance(oracle, dict) or oracle.get("kind") != "crr":
            issues.append(("/oracle", "only {'kind': 'crr', ...} is supported"))
            oracle = None
        else:
            for key in ("spot", "strike", "rate", "sigma"):
                if not _is_num(oracle.get(key)):
                    issues.append((f"/oracle/{key}", "must be a number"))

    name = doc.get("name", "")
    if not isinstance(name, str):
        issues.append(("/name", "must be a string"))
        name = ""

    intensity = None
    if not issues:
        try:
            intensity = IntensitySpec(values=tuple(lam_values), lambda_max=lam_max)
            lattice = build_lattice(horizon, steps, intensity)
        except RabsdeError as exc:
            issues.append(("/lambda", str(exc)))
    if issues:
        raise ScenarioError(issues)

    scenario = Scenario(
        horizon=horizon,
        n_steps=steps,
        intensity=intensity,
        delta_steps=delta,
        driver=TransformedDriver(base=driver_expr, form=form),
        obstacle=obstacle_expr,
        terminal=terminal_expr,
        scheme=Scheme(scheme_raw),
        implicit_tol=float(implicit_tol),
        implicit_max_iter=int(implicit_max_iter),
        oracle_params={k: float(v) for k, v in oracle.items() if k != "kind"} if oracle else None,
        name=name,
    )
    # whole-scenario checks need the built lattice
    xi = None
    try:
        xi = terminal_values(scenario, lattice)
    except RabsdeError as exc:
        issues.append(("/terminal", str(exc)))
    if xi is not None:
        s_term = obstacle_field(scenario, lattice).step(steps)
        worst = float(np.min(xi - s_term))
        if worst < -1e-12:
            issues.append(
                ("/terminal",
                 f"terminal payoff falls below the obstacle at the horizon (worst gap {worst:.6g})")
            )
    cp = estimate_c_prime(scenario)
    if not math.isfinite(cp):
        issues.append(
            ("/driver", "driver depends on u where the intensity vanishes")
        )
    elif scenario.scheme is Scheme.EXPLICIT and cp * horizon / steps > 0.5:
        issues.append(
            ("/scheme",
             f"explicit scheme needs C'*dt <= 0.5 (estimated {cp * horizon / steps:.3g}); "
             "use the implicit scheme or more steps")
        )
    if issues:
        raise ScenarioError(issues)
    return scenario


def load_scenario(path: str) -> Scenario:
    """Read, parse and validate a scenario file."""
    scenario, _outputs = load_scenario_with_outputs(path)
    return scenario


def load_scenario_with_outputs(path: str) -> tuple[Scenario, set[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([("", f"not valid JSON: {exc}")]) from None
    scenario = scenario_from_dict(doc)
    outputs = set(doc.get("outputs", []))
    return scenario, outputs


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {
        "horizon": scenario.horizon,
        "steps": scenario.n_steps,
        "delta_steps": scenario.delta_steps,
        "lambda": list(scenario.intensity.values),
        "lambda_max": scenario.intensity.lambda_max,
        "driver": {"text": scenario.driver.base.source, "form": scenario.driver.form.value},
        "obstacle": scenario.obstacle.source,
        "terminal": scenario.terminal.source,
        "scheme": scenario.scheme.value,
    }
    if scenario.name:
        out["name"] = scenario.name
    if scenario.oracle_params:
        out["oracle"] = {"kind": "crr", **{k: float(v) for k, v in scenario.oracle_params.items()}}
    return out


# -- deterministic serialization -------------------------------------------------


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def format_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, fixed 17-significant-digit floats."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {format_json(obj[k], indent + 1)}"
            for k in sorted(obj, key=str)
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{format_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def node_table_rows(solution: Solution) -> list[list]:
    """Per-node dump: one row per lattice node across all steps."""
    lat = solution.lattice
    obstacle = solution.obstacle_field()
    rows = []
    for k in range(lat.n_steps + 1):
        codes = lat.default_step_codes(k)
        y = solution.y.step(k)
        z = solution.z.step(k)
        u = solution.u.step(k)
        dk = solution.dk.step(k)
        psi = solution.psi.step(k)
        s = obstacle.step(k)
        for i in range(lat.n_nodes(k)):
            node = lat.node_at(k, i)
            rows.append([
                k, node.up_count, int(codes[i]),
                float(y[i]), float(z[i]), float(u[i]),
                float(dk[i]), float(psi[i]), float(s[i]),
            ])
    return rows


NODE_TABLE_HEADER = ["step", "up_count", "default_step", "Y", "Z", "U", "dK", "psi", "S"]


@dataclass
class RunReport:
    """Serializable run outcome plus the solution backing the CSV dump."""

    data: dict
    solution: Solution | None = None

    @property
    def passed(self) -> bool:
        return bool(self.data.get("pass", False))


def emit_report(report: RunReport, fmt: str, path: str) -> None:
    """Write the report deterministically; csv emits the per-node table."""
    if fmt == "json":
        text = format_json(report.data) + "\n"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return
    if fmt == "csv":
        if report.solution is None:
            raise ScenarioError([("", "csv output requires a solved scenario")])
        lines = [",".join(NODE_TABLE_HEADER)]
        for row in node_table_rows(report.solution):
            cells = [
                str(v) if isinstance(v, int) else format(v, ".17g") for v in row
            ]
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        return
    raise ScenarioError([("", f"unknown report format '{fmt}'")])


# -- workflows -------------------------------------------------------------------


@dataclass
class RunFlags:
    workflows: set[str] = field(default_factory=lambda: {"solve", "validate"})
    tol: float = 1e-10
    seed: int = 0
    oracle: str = "none"
    timing: bool = False
    picard_tol: float = 1e-12
    picard_rho: float = 1.0
    picard_beta: float | None = None
    picard_max_iter: int = 60
    scenario2: Scenario | None = None
    iterate_n: int = 0
    suite_cases: int = 0


def _check(name: str, tolerance: float, violation: float) -> dict:
    return {
        "name": name,
        "tolerance": tolerance,
        "violation": violation,
        "pass": bool(violation <= tolerance),
    }


def run(scenario: Scenario, flags: RunFlags) -> RunReport:
    """Execute the requested workflows and assemble the report."""
    t0 = time.perf_counter()
    data: dict = {"scenario": scenario_to_dict(scenario)}
    checks: list[dict] = []
    lattice = scenario.build_lattice()
    solution = solve_backward(scenario, lattice=lattice)
    timings = {}
    timings["solve"] = time.perf_counter() - t0

    data["solve"] = {
        "y0": solution.y0,
        "k_expected_total": solution.expected_total_k(),
        "k_max_path_total": solution.max_path_total_k(),
        "k_per_step_expected": list(solution.per_step_expected_dk()),
        "max_abs_psi": solution.max_abs_psi(),
        "weighted_psi": solution.weighted_psi(),
        "max_representation_residual": solution.diagnostics[
            "max_representation_residual"
        ],
        "scheme": scenario.scheme.value,
    }

    if "validate" in flags.workflows:
        report = validate_solution(solution, scenario)
        for name, violation in report.checks():
            checks.append(_check(name, flags.tol, violation))
        data["validate"] = {
            "driver_square_sum": report.driver_square_sum,
            "max_violation": report.max_violation,
        }

    if flags.oracle == "crr":
        params = scenario.oracle_params
        if not params:
            raise ScenarioError(
                [("/oracle", "scenario carries no oracle parameters for --oracle crr")]
            )
        t1 = time.perf_counter()
        price = crr_american_put(
            spot=float(params["spot"]),
            strike=float(params["strike"]),
            rate=float(params["rate"]),
            sigma=float(params["sigma"]),
            horizon=scenario.horizon,
            n_steps=scenario.n_steps,
            scheme=scenario.scheme,
        )
        gap = abs(price - solution.y0)
        checks.append(_check("crr_cross_check", flags.tol, gap))
        data["oracle"] = {"kind": "crr", "price": price, "gap": gap}
        timings["oracle"] = time.perf_counter() - t1

    if "picard" in flags.workflows:
        t1 = time.perf_counter()
        opts = PicardOptions(
            rho=flags.picard_rho,
            beta=flags.picard_beta,
            tol=flags.picard_tol,
            max_iter=flags.picard_max_iter,
        )
        pic_solution, history = solve_picard(scenario, opts, lattice=lattice)
        gap = max(
            float(np.max(np.abs(pic_solution.y.step(k) - solution.y.step(k))))
            for k in range(lattice.n_steps + 1)
        )
        checks.append(_check("picard_vs_backward", 10.0 * flags.picard_tol, gap))
        data["picard"] = {
            "beta": pic_solution.diagnostics["picard_beta"],
            "iterations": pic_solution.diagnostics["picard_iterations"],
            "distances": list(history),
            "converged": True,
            "gap_vs_backward": gap,
        }
        timings["picard"] = time.perf_counter() - t1

    if "stopping" in flags.workflows:
        t1 = time.perf_counter()
        stopping_data: dict = {}
        try:
            report = stp.snell_report(solution, scenario)
            checks.append(_check("snell_vs_brute_force", flags.tol, report.gap))
            checks.append(_check("tau_achieves_snell", flags.tol, report.tau_gap))
            checks.append(
                _check(
                    "tau_characterizations_coincide",
                    0.0,
                    0.0 if report.tau_rules_coincide else 1.0,
                )
            )
            stopping_data.update(
                {
                    "snell_value": report.snell_value,
                    "brute_force": report.brute_force,
                    "gap": report.gap,
                    "tau_payoff": report.tau_payoff,
                    "tau_gap": report.tau_gap,
                    "k_rule_payoff": report.k_rule_payoff,
                    "tau_rules_coincide": report.tau_rules_coincide,
                }
            )
        except EnumerationError as exc:
            stopping_data["brute_force"] = None
            stopping_data["skipped"] = str(exc)
        krep = stp.k_running_max_check(solution, scenario)
        checks.append(_check("k_running_max", flags.tol, krep.max_gap))
        stopping_data["k_running_max"] = {
            "max_gap": krep.max_gap,
            "max_gap_z_only": krep.max_gap_z_only,
            "n_paths": krep.n_paths,
        }
        data["stopping"] = stopping_data
        timings["stopping"] = time.perf_counter() - t1

    if "compare" in flags.workflows:
        if flags.scenario2 is None:
            raise ScenarioError([("", "compare requires --scenario2")])
        t1 = time.perf_counter()
        case = cmp.ComparisonCase(
            scenario1=scenario, scenario2=flags.scenario2, grid=_default_grid(scenario)
        )
        verdict = cmp.run_comparison(case, lattice=lattice, tol=flags.tol)
        checks.append(_check("comparison_min_gap", flags.tol, max(0.0, -verdict.min_gap)))
        data["comparison"] = {
            "min_gap": verdict.min_gap,
            "y0_gap": verdict.y0_gap,
            "passed": verdict.passed,
            "hypotheses": {
                "monotone_in_anticipation": verdict.hypotheses.monotone.passed,
                "terminal_gap": verdict.hypotheses.terminal_gap,
                "obstacle_gap": verdict.hypotheses.obstacle_gap,
                "theta": verdict.hypotheses.theta.theta,
                "theta_passed": verdict.hypotheses.theta.passed,
                "dominance_min_gap": verdict.hypotheses.dominance.min_gap,
            },
        }
        if flags.iterate_n > 0:
            trace = cmp.iterate_sequence(case, flags.iterate_n, lattice=lattice)
            checks.append(_check("iterate_limit_gap", 1e-8, trace.final_gap))
            data["comparison"]["iterates"] = {
                "count": len(trace.iterates),
                "sup_diffs": list(trace.sup_diffs),
                "final_gap": trace.final_gap,
            }
        timings["compare"] = time.perf_counter() - t1

    ok = all(c["pass"] for c in checks)
    data["checks"] = checks
    data["pass"] = ok
    if flags.timing:
        data["timing"] = timings
    return RunReport(data=data, solution=solution)


def _default_grid(scenario: Scenario):
    from .driver import GridSpec

    return GridSpec(
        bounds=(
            ("t", 0.0, scenario.horizon),
            ("w", -2.0, 2.0),
            ("y", -2.0, 2.0),
            ("z", -2.0, 2.0),
            ("ey", -2.0, 2.0),
            ("ez", -2.0, 2.0),
            ("u", -2.0, 2.0),
            ("tau", 0.0, scenario.horizon),
        )
    )


# -- suite ----------------------------------------------------------------------

_SUITE_CHUNK = 50


def _suite_chunk(args: tuple) -> tuple[int, float, int, tuple[int, int, int]]:
    seed, cases, n_steps, horizon, lam, tol = args
    res = cmp.run_random_suite(
        seed, cases, n_steps=n_steps, horizon=horizon, lam=lam, tol=tol
    )
    return res.cases, res.min_gap, res.failures, res.delta_counts


def run_suite(
    seed: int,
    n_cases: int,
    *,
    n_steps: int = 6,
    horizon: float = 1.0,
    lam: float = 0.3,
    tol: float = 1e-10,
    workers: int = 1,
) -> dict:
    """Randomized comparison sweep, chunked deterministically (chunk size is
    fixed so the result does not depend on the worker count)."""
    chunks = []
    done = 0
    idx = 0
    while done < n_cases:
        size = min(_SUITE_CHUNK, n_cases - done)
        chunks.append((seed + idx, size, n_steps, horizon, lam, tol))
        done += size
        idx += 1
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_suite_chunk, chunks))
    else:
        results = [_suite_chunk(c) for c in chunks]
    total = sum(r[0] for r in results)
    min_gap = min(r[1] for r in results)
    failures = sum(r[2] for r in results)
    deltas = tuple(sum(r[3][i] for r in results) for i in range(3))
    return {
        "cases": total,
        "min_gap": min_gap,
        "failures": failures,
        "delta_counts": list(deltas),
        "tolerance": tol,
        "pass": failures == 0,
    }


# -- argument parsing -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rabsde",
        description="Solve and property-check reflected anticipated BSDEs with default on exact lattices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario2=False):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        if scenario2:
            p.add_argument("--scenario2", required=True, help="second scenario JSON file")
        p.add_argument("--out", default=None, help="report output path")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--timing", action="store_true")

    p_solve = sub.add_parser("solve", help="solve backward, validate, optional oracle")
    common(p_solve)
    p_solve.add_argument("--oracle", choices=["crr", "none"], default="none")

    p_picard = sub.add_parser("picard", help="fixed-point iteration with history")
    common(p_picard)
    p_picard.add_argument("--rho", type=float, default=1.0)
    p_picard.add_argument("--beta", type=float, default=None)
    p_picard.add_argument("--max-iter", type=int, default=60)

    p_stop = sub.add_parser("stopping", help="Snell oracle, tau rules, running-max")
    common(p_stop)

    p_cmp = sub.add_parser("compare", help="hypothesis checks plus node-wise comparison")
    common(p_cmp, scenario2=True)
    p_cmp.add_argument("--iterates", type=int, default=0, help="run the monotone iterate bridge")

    p_suite = sub.add_parser("suite", help="randomized comparison sweep")
    p_suite.add_argument("--cases", type=int, default=1000)
    p_suite.add_argument("--seed", type=int, default=0)
    p_suite.add_argument("--steps", type=int, default=6)
    p_suite.add_argument("--horizon", type=float, default=1.0)
    p_suite.add_argument("--intensity", type=float, default=0.3)
    p_suite.add_argument("--tol", type=float, default=1e-10)
    p_suite.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            workers = int(os.environ.get("RABSDE_THREADS", "1"))
            data = run_suite(
                args.seed,
                args.cases,
                n_steps=args.steps,
                horizon=args.horizon,
                lam=args.intensity,
                tol=args.tol,
                workers=max(workers, 1),
            )
            report = RunReport(data=data, solution=None)
            if args.out:
                emit_report(report, "json", args.out)
            else:
                sys.stdout.write(format_json(data) + "\n")
            return 0 if data["pass"] else 3

        scenario, file_outputs = load_scenario_with_outputs(args.scenario)
        flags = RunFlags(tol=args.tol, seed=args.seed, timing=args.timing)
        if args.command == "solve":
            flags.workflows = {"solve", "validate"} | (file_outputs - {"compare"})
            flags.oracle = args.oracle
        elif args.command == "picard":
            flags.workflows = {"solve", "validate", "picard"}
            flags.picard_tol = args.tol if args.tol != 1e-10 else 1e-12
            flags.picard_rho = args.rho
            flags.picard_beta = args.beta
            flags.picard_max_iter = args.max_iter
        elif args.command == "stopping":
            flags.workflows = {"solve", "validate", "stopping"}
        elif args.command == "compare":
            flags.workflows = {"solve", "validate", "compare"}
            flags.scenario2 = load_scenario(args.scenario2)
            flags.iterate_n = args.iterates
        report = run(scenario, flags)
        if args.out:
            emit_report(report, args.format, args.out)
        else:
            sys.stdout.write(format_json(report.data) + "\n")
        return 0 if report.passed else 3
    except ScenarioError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except HypothesisError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (PicardConvergenceError, SolverError, EnumerationError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 4
    except RabsdeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
