"""Lattice construction, kernel moments, conditional expectations."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rabsde import (
    ALIVE,
    IntensitySpec,
    LatticeError,
    NodeId,
    ProcessField,
    bracket_checks,
    build_lattice,
    cond_expect,
    martingale_M,
)


def test_zero_intensity_degenerates_to_binomial():
    lat = build_lattice(1.0, 1, IntensitySpec.constant(0.0, 1))
    nodes = lat.nodes(1)
    assert nodes == [NodeId(1, 0, ALIVE), NodeId(1, 1, ALIVE)]
    children = lat.children(lat.root())
    assert len(children) == 2
    assert all(prob == 0.5 for _, prob, _, _ in children)
    assert all(child.is_alive for child, _, _, _ in children)


def test_four_child_kernel_and_node_count():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    assert np.allclose(lat.p, 0.25)
    # enumerate the kernel from the root and check the (k+1)^2 count
    seen = set()
    frontier = {lat.root()}
    for k in range(2):
        nxt = set()
        for node in frontier:
            for child, prob, dw, dh in lat.children(node):
                assert prob > 0
                nxt.add(child)
        frontier = nxt
        seen = frontier
        assert len(seen) == (k + 2) ** 2
    assert lat.n_nodes(2) == 9


def test_transition_probabilities():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    kids = lat.children(lat.root())
    probs = sorted(prob for _, prob, _, _ in kids)
    assert probs == [0.125, 0.125, 0.375, 0.375]
    assert math.isclose(sum(p for _, p, _, _ in kids), 1.0)
    defaulted = NodeId(1, 0, 1)
    kids = lat.children(defaulted)
    assert [prob for _, prob, _, _ in kids] == [0.5, 0.5]
    assert all(child.default_step == 1 for child, _, _, _ in kids)


def test_rejects_intensity_too_large_for_step():
    with pytest.raises(LatticeError):
        build_lattice(1.0, 4, IntensitySpec.constant(5.0, 4))


def test_rejects_negative_intensity():
    with pytest.raises(LatticeError):
        IntensitySpec(values=(0.1, -0.2), lambda_max=0.5)


def test_rejects_value_above_lambda_max():
    with pytest.raises(LatticeError):
        IntensitySpec(values=(0.6,), lambda_max=0.5)


def test_node_count_formula_all_positive():
    lat = build_lattice(1.0, 6, IntensitySpec.constant(0.3, 6))
    for k in range(7):
        assert lat.n_nodes(k) == (k + 1) ** 2


def test_node_count_with_mixed_intensity():
    lat = build_lattice(1.0, 2, IntensitySpec(values=(0.5, 0.0), lambda_max=0.5))
    # default can only happen at step 1
    assert lat.default_steps(2) == (1,)
    assert lat.n_nodes(2) == 6


def test_cond_expect_zero_field():
    lat = build_lattice(1.0, 3, IntensitySpec.constant(0.4, 3))
    field = ProcessField.single(lat, 3, np.zeros(lat.n_nodes(3)))
    assert cond_expect(lat, field, lat.root()) == 0.0


def test_cond_expect_martingale_w():
    lat = build_lattice(1.0, 3, IntensitySpec.constant(0.4, 3))
    field = ProcessField.single(lat, 2, lat.w_values(2))
    for i in range(lat.n_nodes(1)):
        node = lat.node_at(1, i)
        w = lat.w_values(1)[i]
        assert cond_expect(lat, field, node) == pytest.approx(w, abs=1e-15)


def test_cond_expect_default_probability():
    # two-step default indicator from the alive root: 1 - (1 - p)^2
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    field = ProcessField.single(lat, 2, lat.h_values(2))
    assert cond_expect(lat, field, lat.root()) == pytest.approx(0.4375, abs=1e-15)


def test_cond_expect_zero_distance_returns_value():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    vals = np.arange(lat.n_nodes(1), dtype=float)
    field = ProcessField.single(lat, 1, vals)
    assert cond_expect(lat, field, NodeId(1, 1, ALIVE)) == 1.0


def test_cond_expect_rejects_later_node():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    field = ProcessField.single(lat, 0, np.zeros(1))
    with pytest.raises(LatticeError):
        cond_expect(lat, field, NodeId(1, 0, ALIVE))


def test_cond_expect_rejects_foreign_node():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    field = ProcessField.single(lat, 2, np.zeros(9))
    with pytest.raises(LatticeError):
        cond_expect(lat, field, NodeId(1, 5, ALIVE))


def test_martingale_m_zero_intensity():
    lat = build_lattice(1.0, 3, IntensitySpec.constant(0.0, 3))
    m = martingale_M(lat)
    for k in range(4):
        assert np.all(m.step(k) == 0.0)


def test_martingale_m_values():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    m = martingale_M(lat)
    assert m.at(NodeId(1, 0, ALIVE)) == pytest.approx(-0.25, abs=0)
    # compensator frozen at the default step
    assert m.at(NodeId(2, 1, 1)) == pytest.approx(0.75, abs=0)


def test_martingale_m_one_step_expectation():
    lat = build_lattice(1.0, 4, IntensitySpec.constant(0.7, 4))
    m = martingale_M(lat)
    for k in range(4):
        em = lat.step_expectation(k, m.step(k + 1))
        assert np.max(np.abs(em - m.step(k))) <= 1e-15


def test_bracket_checks_zero_intensity_exact():
    report = bracket_checks(build_lattice(1.0, 4, IntensitySpec.constant(0.0, 4)))
    assert report.max_violation == 0.0


def test_bracket_checks_small_violations():
    report = bracket_checks(build_lattice(1.0, 4, IntensitySpec.constant(0.5, 4)))
    assert report.max_violation <= 1e-12


def test_bracket_jump_matches_default_step():
    lat = build_lattice(1.0, 3, IntensitySpec.constant(0.5, 3))
    # along a path defaulting at step 2, H jumps by exactly one at that step
    h = [lat.h_values(k) for k in range(4)]
    path_nodes = [lat.root(), NodeId(1, 1, ALIVE), NodeId(2, 1, 2), NodeId(3, 2, 2)]
    jumps = [
        h[k + 1][lat.index(path_nodes[k + 1])] - h[k][lat.index(path_nodes[k])]
        for k in range(3)
    ]
    assert jumps == [0.0, 1.0, 0.0]


def test_kernel_moments_by_direct_summation():
    lat = build_lattice(2.0, 4, IntensitySpec.constant(0.6, 4))
    for k in range(4):
        p = lat.p[k]
        for i in range(lat.n_nodes(k)):
            node = lat.node_at(k, i)
            kids = lat.children(node)
            pre_default = node.is_alive
            dm = [dh - (p if pre_default else 0.0) for _, _, _, dh in kids]
            e_dw = sum(prob * dw for (_, prob, dw, _) in kids)
            e_dw2 = sum(prob * dw * dw for (_, prob, dw, _) in kids)
            e_dm = sum(prob * m for (_, prob, _, _), m in zip(kids, dm))
            e_dm2 = sum(prob * m * m for (_, prob, _, _), m in zip(kids, dm))
            e_cross = sum(prob * dw * m for (_, prob, dw, _), m in zip(kids, dm))
            e_cross_dw = sum(prob * dw * m * dw for (_, prob, dw, _), m in zip(kids, dm))
            e_cross_dm = sum(prob * dw * m * m for (_, prob, dw, _), m in zip(kids, dm))
            assert abs(e_dw) <= 1e-15
            assert e_dw2 == pytest.approx(lat.dt, abs=1e-15)
            assert abs(e_dm) <= 1e-15
            if pre_default:
                assert e_dm2 == pytest.approx(p * (1 - p), abs=1e-15)
            assert abs(e_cross) <= 1e-15
            assert abs(e_cross_dw) <= 1e-16
            assert abs(e_cross_dm) <= 1e-16


def test_node_probabilities_sum_to_one():
    lat = build_lattice(1.0, 8, IntensitySpec.constant(0.4, 8))
    for k in range(9):
        assert np.sum(lat.node_probabilities(k)) == pytest.approx(1.0, abs=1e-14)


def test_path_enumeration_consistent_with_probabilities():
    lat = build_lattice(1.0, 4, IntensitySpec.constant(0.5, 4))
    total = 0.0
    count = 0
    terminal = np.zeros(lat.n_nodes(4))
    for path in lat.iter_paths():
        total += path.probability
        terminal[path.indices[-1]] += path.probability
        count += 1
    assert count == lat.n_paths()
    assert total == pytest.approx(1.0, abs=1e-13)
    assert np.max(np.abs(terminal - lat.node_probabilities(4))) <= 1e-14


@st.composite
def _field_pair(draw):
    seed = draw(st.integers(0, 2**31 - 1))
    m = draw(st.integers(1, 3))
    rng = np.random.default_rng(seed)
    lat = build_lattice(1.0, 4, IntensitySpec.constant(0.5, 4))
    k_field = draw(st.integers(m, 4))
    size = lat.n_nodes(k_field)
    return lat, k_field, m, rng.normal(size=size), rng.normal(size=size)


@given(_field_pair(), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_cond_expect_linear_and_monotone(data, alpha, beta):
    lat, k_field, m, f1, f2 = data
    at = lat.node_at(k_field - m, 0)
    e1 = cond_expect(lat, ProcessField.single(lat, k_field, f1), at)
    e2 = cond_expect(lat, ProcessField.single(lat, k_field, f2), at)
    combo = cond_expect(lat, ProcessField.single(lat, k_field, alpha * f1 + beta * f2), at)
    assert combo == pytest.approx(alpha * e1 + beta * e2, abs=1e-11)
    lo = np.minimum(f1, f2)
    e_lo = cond_expect(lat, ProcessField.single(lat, k_field, lo), at)
    assert e_lo <= min(e1, e2) + 1e-13


@given(_field_pair())
@settings(max_examples=40, deadline=None)
def test_tower_property(data):
    lat, k_field, m, f1, _ = data
    field = ProcessField.single(lat, k_field, f1)
    at = lat.node_at(k_field - m, 0)
    direct = cond_expect(lat, field, at)
    # split the pullback at every intermediate step
    for mid in range(k_field - m, k_field + 1):
        inner = lat.pullback(f1, k_field, mid)
        nested = cond_expect(lat, ProcessField.single(lat, mid, inner), at)
        assert nested == pytest.approx(direct, abs=1e-12)


def test_process_field_accessors():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    field = ProcessField.from_function(lat, lambda k: lat.w_values(k))
    assert field.step_range == range(0, 3)
    assert field.at(NodeId(1, 1, ALIVE)) == pytest.approx(lat.sqrt_dt)
    assert len(field.as_dict()) == 1 + 4 + 9


def test_process_field_shape_mismatch():
    lat = build_lattice(1.0, 2, IntensitySpec.constant(0.5, 2))
    with pytest.raises(LatticeError):
        ProcessField.single(lat, 2, np.zeros(5))
