"""Branch-and-bound for LPs with binary variables.

Search is best-bound first with most-fractional branching (ties to the
lowest variable index), giving deterministic runs when no time limit is set.
Warm starts are validated by substitution before being installed as the
incumbent.  Scope is small models: no cuts, no presolve, single-threaded.
"""

from __future__ import annotations

import enum
import heapq
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .linprog import FEASIBILITY_TOL, LinearProgram, LpStatus, solve_lp_fixed

INTEGRALITY_TOL = 1e-6
_PRUNE_EPS = 1e-9  # nodes must beat the incumbent by more than this


class MipStatus(enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"  # stopped by the time limit with an incumbent
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class MixedIntegerProgram:
    """An LP plus an index set of variables restricted to {0, 1}."""

    base: LinearProgram
    binaries: tuple

    def __post_init__(self):
        bins = tuple(sorted(int(j) for j in set(self.binaries)))
        for j in bins:
            if not 0 <= j < self.base.num_vars:
                raise ValueError(f"binary index {j} out of range")
            if self.base.col_lower[j] < 0.0 or self.base.col_upper[j] > 1.0:
                raise ValueError(
                    f"binary variable {j} must have bounds within [0, 1]"
                )
        object.__setattr__(self, "binaries", bins)


@dataclass(frozen=True)
class MipOutcome:
    status: MipStatus
    incumbent: np.ndarray | None
    incumbent_value: float
    best_bound: float
    nodes: int


def solve_mip(
    mip: MixedIntegerProgram,
    warm_start=None,
    time_limit: float | None = None,
    gap_tol: float = 1e-6,
    on_node=None,
) -> MipOutcome:
    """Maximize a MIP by LP-based branch and bound.

    ``warm_start`` is a full variable vector; it is checked against rows,
    bounds and integrality and rejected with a warning if it fails.  With a
    ``time_limit`` the search may stop early and report status FEASIBLE; the
    best bound is still valid.  ``on_node`` (if given) is called after each
    processed node with ``(nodes, global_bound, incumbent_value)``.
    """
    lp = mip.base
    binaries = mip.binaries
    deadline = None if time_limit is None else time.monotonic() + float(time_limit)

    incumbent = None
    inc_val = -np.inf
    if warm_start is not None:
        reason = _warm_start_defect(mip, warm_start)
        if reason is None:
            incumbent = np.array(warm_start, dtype=float)
            inc_val = float(lp.objective @ incumbent)
        else:
            warnings.warn(f"warm start rejected: {reason}", stacklevel=2)

    # Heap of (-bound_estimate, insertion_order, fixings); the estimate is the
    # parent LP value, so it upper-bounds the node and the pop order is the
    # global best bound.  Node LPs are solved lazily at pop time.
    counter = 0
    heap = [(-np.inf, counter, {})]
    nodes = 0
    timed_out = False
    final_bound = None

    while heap:
        neg_est, _, fixings = heapq.heappop(heap)
        est = -neg_est
        if est <= inc_val + _PRUNE_EPS:
            final_bound = inc_val  # best-bound order: nothing left can improve
            break
        if _within_gap(est, inc_val, gap_tol):
            final_bound = est  # proven gap-optimal; est is still the true bound
            break
        if deadline is not None and time.monotonic() >= deadline:
            heapq.heappush(heap, (neg_est, counter, fixings))
            timed_out = True
            break

        out = solve_lp_fixed(lp, fixings)
        nodes += 1
        if out.status == LpStatus.UNBOUNDED:
            raise ValueError("LP relaxation is unbounded; the MIP is ill-posed")
        if out.status == LpStatus.OPTIMAL:
            val = out.objective_value
            x = out.solution
            if val > inc_val + _PRUNE_EPS:
                frac_j = _most_fractional(x, binaries, fixings)
                if frac_j is None:
                    # Integral relaxation: re-solve with every binary pinned to
                    # its rounded value so the incumbent carries exact 0/1
                    # entries and the true value of that assignment.
                    pin = dict(fixings)
                    for j in binaries:
                        pin[j] = float(round(x[j]))
                    clean = solve_lp_fixed(lp, pin)
                    if (
                        clean.status == LpStatus.OPTIMAL
                        and clean.objective_value > inc_val
                    ):
                        incumbent = clean.solution
                        inc_val = clean.objective_value
                else:
                    counter += 1
                    heapq.heappush(heap, (-val, counter, {**fixings, frac_j: 0.0}))
                    counter += 1
                    heapq.heappush(heap, (-val, counter, {**fixings, frac_j: 1.0}))
        if on_node:
            on_node(nodes, _queue_bound(heap, inc_val), inc_val)

    if final_bound is None:
        final_bound = _queue_bound(heap, inc_val) if timed_out else inc_val
    if incumbent is None:
        if timed_out:
            return MipOutcome(MipStatus.FEASIBLE, None, -np.inf, final_bound, nodes)
        return MipOutcome(MipStatus.INFEASIBLE, None, -np.inf, -np.inf, nodes)
    status = MipStatus.FEASIBLE if timed_out else MipStatus.OPTIMAL
    return MipOutcome(status, incumbent, inc_val, final_bound, nodes)


def enumerate_binary_oracle(mip: MixedIntegerProgram) -> MipOutcome:
    """Exact optimum by trying every binary assignment; the ground-truth oracle.

    Refuses more than 20 binaries.  With zero binaries this is a plain LP
    solve.
    """
    binaries = mip.binaries
    if len(binaries) > 20:
        raise ValueError(f"{len(binaries)} binaries is too many to enumerate")
    best_val = -np.inf
    best_x = None
    nodes = 0
    for mask in range(1 << len(binaries)):
        fixings = {j: float((mask >> k) & 1) for k, j in enumerate(binaries)}
        out = solve_lp_fixed(mip.base, fixings)
        nodes += 1
        if out.status == LpStatus.UNBOUNDED:
            raise ValueError("LP relaxation is unbounded; the MIP is ill-posed")
        if out.status == LpStatus.OPTIMAL and out.objective_value > best_val:
            best_val = out.objective_value
            best_x = out.solution
    if best_x is None:
        return MipOutcome(MipStatus.INFEASIBLE, None, -np.inf, -np.inf, nodes)
    return MipOutcome(MipStatus.OPTIMAL, best_x, best_val, best_val, nodes)


def _most_fractional(x, binaries, fixings):
    """Unfixed binary closest to 0.5, ties to the lowest index; None if integral."""
    best_j = None
    best_score = INTEGRALITY_TOL
    for j in binaries:
        if j in fixings:
            continue
        score = min(x[j], 1.0 - x[j])
        if score > best_score:
            best_score = score
            best_j = j
    return best_j


def _queue_bound(heap, inc_val):
    if not heap:
        return inc_val
    return max(inc_val, -heap[0][0])


def _within_gap(bound, inc_val, gap_tol):
    if not np.isfinite(inc_val):
        return False
    return bound - inc_val <= gap_tol * max(1.0, abs(inc_val))


def _warm_start_defect(mip: MixedIntegerProgram, vec) -> str | None:
    """Reason the warm start is unusable, or None if it validates."""
    lp = mip.base
    x = np.asarray(vec, dtype=float)
    if x.shape != lp.objective.shape:
        return f"length {x.size} != {lp.num_vars} variables"
    if not np.all(np.isfinite(x)):
        return "contains non-finite entries"
    if np.any(x < lp.col_lower - 1e-9) or np.any(x > lp.col_upper + 1e-9):
        return "violates variable bounds"
    for j in mip.binaries:
        if min(abs(x[j]), abs(1.0 - x[j])) > INTEGRALITY_TOL:
            return f"binary variable {j} = {x[j]} is not integral"
    for i, (a, sense, rhs) in enumerate(lp.rows):
        lhs = float(a @ x)
        scale = max(1.0, abs(rhs))
        if sense == "<=" and lhs > rhs + FEASIBILITY_TOL * scale:
            return f"row {i} violated by {lhs - rhs}"
        if sense == ">=" and lhs < rhs - FEASIBILITY_TOL * scale:
            return f"row {i} violated by {rhs - lhs}"
        if sense == "=" and abs(lhs - rhs) > FEASIBILITY_TOL * scale:
            return f"row {i} violated by {abs(lhs - rhs)}"
    return None
