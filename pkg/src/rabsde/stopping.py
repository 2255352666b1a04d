"""Optimal-stopping checks: brute-force Snell oracle, first-hit rules, and the
pathwise running-max identity for the reflection process.

The brute-force oracle enumerates every adapted stopping rule (a stop flag per
reachable non-terminal node) and therefore stays independent of the dynamic
programming it cross-checks; instances are capped by the number of decision
nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationError, LatticeError
from .lattice import DefaultLattice, NodeId
from .solver import Scenario, Solution, obstacle_field

DEFAULT_ENUMERATION_CAP = 22


@dataclass(frozen=True)
class StoppingRule:
    """Adapted {stop, continue} labeling; terminal nodes always stop."""

    lattice: DefaultLattice
    stop: tuple[np.ndarray, ...]  # bool array per step 0..N

    def __post_init__(self):
        lat = self.lattice
        if len(self.stop) != lat.n_steps + 1:
            raise LatticeError("stopping rule must label every step 0..N")
        for k, arr in enumerate(self.stop):
            if arr.shape != (lat.n_nodes(k),) or arr.dtype != np.bool_:
                raise LatticeError(f"bad stop array at step {k}")
        if not bool(np.all(self.stop[lat.n_steps])):
            raise LatticeError("terminal nodes must stop")

    @classmethod
    def from_arrays(cls, lattice: DefaultLattice, arrays) -> "StoppingRule":
        out = [np.asarray(a, dtype=bool).copy() for a in arrays]
        out[lattice.n_steps][:] = True
        return cls(lattice, tuple(out))

    @classmethod
    def never_early(cls, lattice: DefaultLattice) -> "StoppingRule":
        return cls.from_arrays(
            lattice,
            [np.zeros(lattice.n_nodes(k), dtype=bool) for k in range(lattice.n_steps + 1)],
        )

    @classmethod
    def stop_everywhere(cls, lattice: DefaultLattice) -> "StoppingRule":
        return cls.from_arrays(
            lattice,
            [np.ones(lattice.n_nodes(k), dtype=bool) for k in range(lattice.n_steps + 1)],
        )

    def stops_at(self, node: NodeId) -> bool:
        return bool(self.stop[node.step][self.lattice.index(node)])

    def same_rule(self, other: "StoppingRule", from_step: int = 0) -> bool:
        for k in range(from_step, self.lattice.n_steps + 1):
            if not np.array_equal(self.stop[k], other.stop[k]):
                return False
        return True


def stopping_payoff(
    rule: StoppingRule, solution: Solution, scenario: Scenario, from_node: NodeId
) -> float:
    """Exact expected payoff of a stopping rule started at ``from_node``.

    Accumulates the solved driver values up to (not including) the stopping
    step, then pays the obstacle when stopping early and the terminal payoff
    at the horizon.
    """
    lat = solution.lattice
    if rule.lattice is not lat and not rule.lattice.same_grid(lat):
        raise LatticeError("rule and solution live on different lattices")
    obstacle = obstacle_field(scenario, lat)
    N = lat.n_steps
    v = solution.y.step(N).copy()  # terminal payoff xi
    for k in range(N - 1, from_node.step - 1, -1):
        cont = solution.driver_values.step(k) * lat.dt + lat.step_expectation(k, v)
        v = np.where(rule.stop[k], obstacle.step(k), cont)
    return float(v[lat.index(from_node)])


def _descendant_masks(lat: DefaultLattice, from_node: NodeId) -> list[np.ndarray]:
    k0 = from_node.step
    masks = [np.zeros(lat.n_nodes(k0), dtype=bool)]
    masks[0][lat.index(from_node)] = True
    for k in range(k0, lat.n_steps):
        nxt = np.zeros(lat.n_nodes(k + 1), dtype=bool)
        for i in np.nonzero(masks[-1])[0]:
            for child, _p, _dw, _dh in lat.children(lat.node_at(k, int(i))):
                nxt[lat.index(child)] = True
        masks.append(nxt)
    return masks


def _transition_matrix(lat: DefaultLattice, k: int, mask_k, mask_next) -> np.ndarray:
    """Dense kernel restricted to descendant nodes (rows: step k, cols: k+1)."""
    rows = np.nonzero(mask_k)[0]
    cols = np.nonzero(mask_next)[0]
    col_pos = {int(c): j for j, c in enumerate(cols)}
    W = np.zeros((rows.size, cols.size))
    for r, i in enumerate(rows):
        for child, prob, _dw, _dh in lat.children(lat.node_at(k, int(i))):
            W[r, col_pos[lat.index(child)]] += prob
    return W


def brute_force_value(
    solution: Solution,
    scenario: Scenario,
    from_node: NodeId,
    *,
    max_nodes: int = DEFAULT_ENUMERATION_CAP,
    batch_size: int = 1 << 15,
) -> tuple[float, StoppingRule]:
    """Exact maximum of ``stopping_payoff`` over all adapted rules.

    Enumerates stop/continue flags on the non-terminal nodes reachable from
    ``from_node`` (2^m rules, evaluated in vectorized batches); raises
    EnumerationError when m exceeds ``max_nodes``.
    """
    lat = solution.lattice
    k0 = from_node.step
    N = lat.n_steps
    masks = _descendant_masks(lat, from_node)
    counts = [int(np.count_nonzero(masks[k - k0])) for k in range(k0, N)]
    m = sum(counts)
    if m > max_nodes:
        raise EnumerationError(
            f"{m} decision nodes exceed the enumeration cap of {max_nodes}"
        )
    obstacle = obstacle_field(scenario, lat)
    # bit layout: step-major, node-index-minor, starting at from_node's step
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
    mats = [
        _transition_matrix(lat, k, masks[k - k0], masks[k + 1 - k0]) for k in range(k0, N)
    ]
    f_loc = [
        solution.driver_values.step(k)[masks[k - k0]] * lat.dt for k in range(k0, N)
    ]
    s_loc = [obstacle.step(k)[masks[k - k0]] for k in range(k0, N)]
    xi_loc = solution.y.step(N)[masks[N - k0]]
    n_rules = 1 << m
    best_val = -math.inf
    best_id = 0
    for start in range(0, n_rules, batch_size):
        ids = np.arange(start, min(start + batch_size, n_rules), dtype=np.int64)
        v = np.broadcast_to(xi_loc, (ids.size, xi_loc.size)).copy()
        for k in range(N - 1, k0 - 1, -1):
            i = k - k0
            cont = f_loc[i] + v @ mats[i].T
            shifts = (offsets[i] + np.arange(counts[i], dtype=np.int64))[None, :]
            bits = ((ids[:, None] >> shifts) & 1).astype(bool)
            v = np.where(bits, s_loc[i], cont)
        vals = v[:, 0]
        j = int(np.argmax(vals))
        if float(vals[j]) > best_val:
            best_val = float(vals[j])
            best_id = int(ids[j])
    stop = [np.zeros(lat.n_nodes(k), dtype=bool) for k in range(N + 1)]
    bit = 0
    for k in range(k0, N):
        for i in np.nonzero(masks[k - k0])[0]:
            stop[k][int(i)] = bool((best_id >> bit) & 1)
            bit += 1
    rule = StoppingRule.from_arrays(lat, stop)
    return best_val, rule


def optimal_tau(
    solution: Solution, scenario: Scenario, t_index: int = 0, tol: float = 1e-10
) -> StoppingRule:
    """First-hit rule: stop at the first node (step >= t_index) with Y <= S."""
    y_rule, _k_rule, _same = tau_characterizations(solution, scenario, t_index, tol)
    return y_rule


def tau_characterizations(
    solution: Solution, scenario: Scenario, t_index: int = 0, tol: float = 1e-10
) -> tuple[StoppingRule, StoppingRule, bool]:
    """Both optimal-time characterizations: first Y <= S and first K increase.

    Returns (y_rule, k_rule, coincide); the rules coincide node-by-node on
    every generic scenario because reflection pins Y to S exactly where K
    grows.
    """
    lat = solution.lattice
    N = lat.n_steps
    obstacle = obstacle_field(scenario, lat)
    stop_y = []
    stop_k = []
    for k in range(N + 1):
        if k < t_index:
            stop_y.append(np.zeros(lat.n_nodes(k), dtype=bool))
            stop_k.append(np.zeros(lat.n_nodes(k), dtype=bool))
        elif k == N:
            stop_y.append(np.ones(lat.n_nodes(k), dtype=bool))
            stop_k.append(np.ones(lat.n_nodes(k), dtype=bool))
        else:
            stop_y.append(solution.y.step(k) - obstacle.step(k) <= tol)
            stop_k.append(solution.dk.step(k) > 0.0)
    y_rule = StoppingRule.from_arrays(lat, stop_y)
    k_rule = StoppingRule.from_arrays(lat, stop_k)
    return y_rule, k_rule, y_rule.same_rule(k_rule, from_step=t_index)


@dataclass(frozen=True)
class StoppingReport:
    """Snell-value cross-check at one node."""

    node: NodeId
    snell_value: float
    brute_force: float
    gap: float
    best_rule: StoppingRule
    tau_rule: StoppingRule
    tau_payoff: float
    tau_gap: float
    k_rule_payoff: float
    tau_rules_coincide: bool


def snell_report(
    solution: Solution,
    scenario: Scenario,
    from_node: NodeId | None = None,
    *,
    max_nodes: int = DEFAULT_ENUMERATION_CAP,
) -> StoppingReport:
    lat = solution.lattice
    node = from_node if from_node is not None else lat.root()
    snell = float(solution.y.step(node.step)[lat.index(node)])
    value, best_rule = brute_force_value(solution, scenario, node, max_nodes=max_nodes)
    y_rule, k_rule, same = tau_characterizations(solution, scenario, node.step)
    tau_payoff = stopping_payoff(y_rule, solution, scenario, node)
    k_payoff = stopping_payoff(k_rule, solution, scenario, node)
    return StoppingReport(
        node=node,
        snell_value=snell,
        brute_force=value,
        gap=abs(snell - value),
        best_rule=best_rule,
        tau_rule=y_rule,
        tau_payoff=tau_payoff,
        tau_gap=abs(tau_payoff - snell),
        k_rule_payoff=k_payoff,
        tau_rules_coincide=same,
    )


@dataclass(frozen=True)
class KRunningMaxReport:
    """Pathwise gap between K increments and the running-max expression."""

    max_gap: float
    max_gap_z_only: float
    n_paths: int


def k_running_max_check(
    solution: Solution, scenario: Scenario, *, max_paths: int = 1 << 20
) -> KRunningMaxReport:
    """Compare suffix sums of dK with the pathwise running max of the negative
    part of (terminal payoff + remaining driver - remaining martingale part
    - obstacle).

    ``max_gap`` uses the full one-step martingale part (z dW + u dM +
    psi dW dM) and is exact up to round-off; ``max_gap_z_only`` drops the jump
    terms, which coincides whenever the intensity vanishes.
    """
    lat = solution.lattice
    if lat.n_paths() > max_paths:
        raise EnumerationError(f"{lat.n_paths()} paths exceed the cap of {max_paths}")
    N = lat.n_steps
    obstacle = obstacle_field(scenario, lat)
    fv = [solution.driver_values.step(k) for k in range(N)]
    zs = [solution.z.step(k) for k in range(N)]
    us = [solution.u.step(k) for k in range(N)]
    ps = [solution.psi.step(k) for k in range(N)]
    dks = [solution.dk.step(k) for k in range(N + 1)]
    hs = [lat.h_values(k) for k in range(N)]
    obs = [obstacle.step(k) for k in range(N + 1)]
    xi = solution.y.step(N)
    max_gap = 0.0
    max_gap_z = 0.0
    n_paths = 0
    for path in lat.iter_paths():
        n_paths += 1
        idx = path.indices
        fpath = np.array([fv[r][idx[r]] for r in range(N)]) * lat.dt
        zpath = np.array([zs[r][idx[r]] for r in range(N)])
        upath = np.array([us[r][idx[r]] for r in range(N)])
        ppath = np.array([ps[r][idx[r]] for r in range(N)])
        alive = np.array([1.0 - hs[r][idx[r]] for r in range(N)])
        dm = path.dh - lat.p[:N] * alive
        mart = zpath * path.dw + upath * dm + ppath * path.dw * dm
        mart_z = zpath * path.dw
        spath = np.array([obs[v][idx[v]] for v in range(N + 1)])
        dkpath = np.array([dks[r][idx[r]] for r in range(N)])
        xi_v = float(xi[idx[N]])
        for mpart, tracker in ((mart, "full"), (mart_z, "z")):
            tail_f = np.concatenate([np.cumsum(fpath[::-1])[::-1], [0.0]])
            tail_m = np.concatenate([np.cumsum(mpart[::-1])[::-1], [0.0]])
            a = xi_v + tail_f - tail_m - spath
            neg = np.maximum(-a, 0.0)
            run_max = np.maximum.accumulate(neg[::-1])[::-1]
            target = np.concatenate([np.cumsum(dkpath[::-1])[::-1], [0.0]])
            gap = float(np.max(np.abs(target - run_max)))
            if tracker == "full":
                max_gap = max(max_gap, gap)
            else:
                max_gap_z = max(max_gap_z, gap)
    return KRunningMaxReport(max_gap=max_gap, max_gap_z_only=max_gap_z, n_paths=n_paths)
