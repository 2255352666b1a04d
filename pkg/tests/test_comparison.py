"""Hypothesis checkers, node-wise ordering, monotone iterate bridge."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import make_scenario
from rabsde.comparison import (
    ComparisonCase,
    check_dominance,
    check_monotone_in_anticipation,
    check_theta_condition,
    iterate_sequence,
    random_comparison_case,
    run_comparison,
)
from rabsde.driver import GridSpec, eval_driver, parse_driver
from rabsde.errors import HypothesisError

GRID = GridSpec(points=5, n_base=16, seed=0)


def test_monotone_linear_increasing():
    report = check_monotone_in_anticipation(parse_driver("0.2*ey"), GRID)
    assert report.passed and report.witness is None


def test_monotone_decreasing_with_witness():
    report = check_monotone_in_anticipation(parse_driver("-ey"), GRID)
    assert not report.passed
    env, lo, hi, g_lo, g_hi = report.witness
    assert lo < hi and g_lo > g_hi  # the witness really violates the inequality
    expr = parse_driver("-ey")
    assert eval_driver(expr, {**env, "ey": lo}) > eval_driver(expr, {**env, "ey": hi})


def test_monotone_saturating():
    report = check_monotone_in_anticipation(parse_driver("min(ey, 3)"), GRID)
    assert report.passed


def test_monotone_vacuous_without_ey():
    assert check_monotone_in_anticipation(parse_driver("0.3*y"), GRID).passed


def test_theta_independent_of_u():
    report = check_theta_condition(parse_driver("y + z"), 0.5, GRID)
    assert report.passed and report.theta == 0.0


def test_theta_violated_by_steep_negative_slope():
    report = check_theta_condition(parse_driver("-2*u"), 0.5, GRID)
    assert not report.passed
    assert report.theta == pytest.approx(-4.0, abs=1e-12)
    env, u_lo, u_hi, ratio = report.witness
    expr = parse_driver("-2*u")
    lhs = eval_driver(expr, {**env, "u": u_hi}) - eval_driver(expr, {**env, "u": u_lo})
    assert lhs < -1.0 * 0.5 * (u_hi - u_lo)  # steeper down than theta = -1 allows


def test_theta_mild_positive_slope():
    report = check_theta_condition(parse_driver("0.25*u"), 0.5, GRID)
    assert report.passed
    assert report.theta == pytest.approx(0.5, abs=1e-12)


def test_theta_vacuous_when_intensity_zero():
    report = check_theta_condition(parse_driver("-2*u"), 0.0, GRID)
    assert report.passed and report.theta == 0.0


def test_dominance_detects_violation():
    report = check_dominance(parse_driver("y"), parse_driver("y + 0.1"), GRID)
    assert not report.passed
    assert report.min_gap == pytest.approx(-0.1, abs=1e-12)


def _case_pair(driver1, driver2, *, xi_shift=0.0, obs_shift=0.0, delta=1):
    common = dict(
        n_steps=5, lam=0.3, delta_steps=delta, form="M",
        obstacle="w - 1 + 0.2*t", terminal="w + 0.5*h + 0.5",
    )
    s2 = make_scenario(driver=driver2, **common)
    common1 = dict(common)
    common1["obstacle"] = f"w - 1 + 0.2*t + {obs_shift!r}"
    common1["terminal"] = f"w + 0.5*h + 0.5 + {xi_shift!r}"
    s1 = make_scenario(driver=driver1, **common1)
    return ComparisonCase(scenario1=s1, scenario2=s2, grid=GRID)


def test_equal_scenarios_compare_with_zero_gap():
    case = _case_pair("0.2*y + 0.1*ey", "0.2*y + 0.1*ey")
    verdict = run_comparison(case)
    assert verdict.passed
    assert verdict.min_gap == 0.0


def test_terminal_shift_produces_strict_ordering():
    case = _case_pair("0.2*y + 0.1*ey", "0.2*y + 0.1*ey", xi_shift=1.0)
    verdict = run_comparison(case)
    assert verdict.passed
    assert verdict.y0_gap > 0.5  # the terminal bump propagates to the root


def test_run_comparison_rejects_failing_hypotheses():
    # dominated driver decreasing in the anticipated slot violates monotonicity
    case = _case_pair("0.2*y - 0.1*ey + 0.2", "0.2*y - 0.1*ey")
    with pytest.raises(HypothesisError) as exc:
        run_comparison(case)
    assert "monotone" in str(exc.value)


def test_shared_lattice_required():
    s1 = make_scenario(n_steps=4, lam=0.3, terminal="w")
    s2 = make_scenario(n_steps=5, lam=0.3, terminal="w")
    with pytest.raises(HypothesisError):
        ComparisonCase(scenario1=s1, scenario2=s2, grid=GRID)


def test_comparison_driver_may_not_use_ez():
    s1 = make_scenario(n_steps=4, lam=0.3, driver="0.1*ez", delta_steps=1, terminal="w")
    s2 = make_scenario(n_steps=4, lam=0.3, driver="0", delta_steps=1, terminal="w")
    with pytest.raises(HypothesisError):
        ComparisonCase(scenario1=s1, scenario2=s2, grid=GRID)


def test_randomized_cases_pass(capsys):
    rng = np.random.default_rng(101)
    worst = np.inf
    for _ in range(60):
        case = random_comparison_case(rng)
        verdict = run_comparison(case)
        assert verdict.passed, case.scenario1.driver.base.source
        worst = min(worst, verdict.min_gap)
    assert worst >= -1e-10


def test_generator_covers_all_lags():
    rng = np.random.default_rng(5)
    seen = set()
    for _ in range(30):
        case = random_comparison_case(rng)
        seen.add(case.scenario1.delta_steps)
    assert seen == {0, 1, 2}


def test_iterate_sequence_equal_scenarios_constant_after_first():
    case = _case_pair("0.2*y + 0.1*ey", "0.2*y + 0.1*ey")
    trace = iterate_sequence(case, 6)
    # the first bridge solve already equals the direct solution
    assert trace.sup_diffs[-1] <= 1e-13
    assert trace.final_gap <= 1e-13
    first = trace.iterates[0]
    for k in range(6):
        assert np.max(np.abs(first.y.step(k) - trace.solution2.y.step(k))) <= 1e-13


def test_iterate_sequence_monotone_convergence():
    rng = np.random.default_rng(33)
    case = random_comparison_case(rng, delta_steps=2)
    trace = iterate_sequence(case, 30)
    assert trace.final_gap <= 1e-8
    diffs = [d for d in trace.sup_diffs if d > 0]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))  # geometric-style decay


def test_iterate_sequence_prefix():
    rng = np.random.default_rng(34)
    case = random_comparison_case(rng, delta_steps=1)
    trace = iterate_sequence(case, 1)
    assert len(trace.iterates) == 1
    lat = trace.solution1.lattice
    for k in range(lat.n_steps + 1):
        gap = trace.solution1.y.step(k) - trace.iterates[0].y.step(k)
        assert float(np.min(gap)) >= -1e-10  # dominating solution stays above
