"""Self-contained linear programming via a bounded-variable primal simplex.

All problems are maximizations over variables with (possibly infinite)
lower/upper bounds, subject to rows with senses <=, >= or =.  The solver is
dense, deterministic (Dantzig pricing with index tie-breaks, switching to
Bland's rule after a long degenerate run) and built for the small/medium
instances produced by fixed-activation-pattern relaxations: at most a few
thousand nonzeros.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

LE = "<="
GE = ">="
EQ = "="
_SENSES = (LE, GE, EQ)

FEASIBILITY_TOL = 1e-7  # row residual tolerance on reported solutions
OPTIMALITY_TOL = 1e-7   # reduced-cost tolerance
BOUND_TOL = 1e-9        # variable bound tolerance
PIVOT_TOL = 1e-11       # smallest pivot magnitude accepted

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class SimplexBreakdownError(RuntimeError):
    """Numerical failure inside the simplex; carries the offending basis."""

    def __init__(self, message: str, basis=None):
        super().__init__(message)
        self.basis = None if basis is None else [int(j) for j in basis]


@dataclass(frozen=True)
class LinearProgram:
    """A maximization LP: max objective @ x s.t. rows, col_lower <= x <= col_upper.

    ``rows`` is a sequence of ``(coefficients, sense, rhs)`` triples with
    sense one of ``"<="``, ``">="``, ``"="``.  Bounds may be +-inf; row
    coefficients, rhs and objective must be finite.
    """

    objective: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray
    rows: tuple = ()

    def __post_init__(self):
        obj = np.array(self.objective, dtype=float)
        lo = np.array(self.col_lower, dtype=float)
        hi = np.array(self.col_upper, dtype=float)
        if obj.ndim != 1 or obj.size == 0:
            raise ValueError("objective must be a nonempty 1-D vector")
        if lo.shape != obj.shape or hi.shape != obj.shape:
            raise ValueError("bound vectors must match the objective length")
        if not np.all(np.isfinite(obj)):
            raise ValueError("objective coefficients must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("NaN in variable bounds")
        if np.any(lo > hi):
            raise ValueError("crossed variable bounds (lower > upper)")
        norm_rows = []
        for coeffs, sense, rhs in self.rows:
            a = np.array(coeffs, dtype=float)
            if a.shape != obj.shape:
                raise ValueError(
                    f"row has {a.size} coefficients, expected {obj.size}"
                )
            if sense not in _SENSES:
                raise ValueError(f"unknown row sense {sense!r}")
            rhs = float(rhs)
            if not np.isfinite(rhs) or not np.all(np.isfinite(a)):
                raise ValueError("row coefficients and rhs must be finite")
            a.setflags(write=False)
            norm_rows.append((a, sense, rhs))
        for arr in (obj, lo, hi):
            arr.setflags(write=False)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "col_lower", lo)
        object.__setattr__(self, "col_upper", hi)
        object.__setattr__(self, "rows", tuple(norm_rows))

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    solution: np.ndarray | None = None
    objective_value: float | None = None


def solve_lp(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` to proven optimality, infeasibility or unboundedness.

    Optimal solutions satisfy every row within 1e-7 and every bound within
    1e-9.  The same LinearProgram always yields bitwise-identical outcomes.
    """
    if lp.num_rows == 0:
        return _solve_box_only(lp)
    return _Simplex(lp).run()


def solve_lp_fixed(lp: LinearProgram, fixings: Mapping[int, float]) -> LpOutcome:
    """Solve ``lp`` with the given variables pinned to fixed values.

    Equivalent to solving the LP whose bounds are pinched to the fixed
    values.  Fixed values must lie within the variable's bounds (1e-9 slack).
    """
    lo = np.array(lp.col_lower)
    hi = np.array(lp.col_upper)
    for j, val in fixings.items():
        j = int(j)
        if not 0 <= j < lp.num_vars:
            raise ValueError(f"fixing refers to unknown variable {j}")
        val = float(val)
        if not np.isfinite(val):
            raise ValueError(f"fixing for variable {j} is not finite")
        if val < lp.col_lower[j] - BOUND_TOL or val > lp.col_upper[j] + BOUND_TOL:
            raise ValueError(
                f"fixing x[{j}]={val} lies outside its bounds "
                f"[{lp.col_lower[j]}, {lp.col_upper[j]}]"
            )
        pinned = min(max(val, lp.col_lower[j]), lp.col_upper[j])
        lo[j] = pinned
        hi[j] = pinned
    return solve_lp(LinearProgram(lp.objective, lo, hi, lp.rows))


def format_lp(lp: LinearProgram) -> str:
    """Plain-text row/column listing of an LP, for failure reports."""
    lines = [f"max {_poly(lp.objective)}"]
    lines.append("subject to")
    for a, sense, rhs in lp.rows:
        lines.append(f"  {_poly(a)} {sense} {rhs:.17g}")
    lines.append("bounds")
    for j in range(lp.num_vars):
        lines.append(f"  {lp.col_lower[j]:.17g} <= x{j} <= {lp.col_upper[j]:.17g}")
    return "\n".join(lines)


def _poly(coeffs: np.ndarray) -> str:
    terms = [f"{c:+.17g}*x{j}" for j, c in enumerate(coeffs) if c != 0.0]
    return " ".join(terms) if terms else "0"


def _solve_box_only(lp: LinearProgram) -> LpOutcome:
    # With no rows each coordinate optimizes independently at a bound.
    x = np.where(lp.objective > 0, lp.col_upper, lp.col_lower)
    zero = lp.objective == 0
    if np.any(zero):
        rest = np.where(
            np.isfinite(lp.col_lower),
            lp.col_lower,
            np.where(np.isfinite(lp.col_upper), lp.col_upper, 0.0),
        )
        x = np.where(zero, rest, x)
    if not np.all(np.isfinite(x)):
        return LpOutcome(LpStatus.UNBOUNDED)
    return LpOutcome(LpStatus.OPTIMAL, x, float(lp.objective @ x))


class _Simplex:
    """Two-phase bounded-variable primal simplex on equality standard form.

    Columns are the structural variables, then one slack per row; rows whose
    initial slack value violates its bounds get an artificial column driven
    to zero in phase 1.
    """

    _REFRESH_EVERY = 64  # recompute basic values to shed incremental drift

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        n, m = lp.num_vars, lp.num_rows
        self.n_struct = n
        self.m = m
        A = np.zeros((m, n + m))
        b = np.empty(m)
        slack_lo = np.empty(m)
        slack_hi = np.empty(m)
        for i, (coeffs, sense, rhs) in enumerate(lp.rows):
            A[i, :n] = coeffs
            A[i, n + i] = 1.0
            b[i] = rhs
            if sense == LE:
                slack_lo[i], slack_hi[i] = 0.0, np.inf
            elif sense == GE:
                slack_lo[i], slack_hi[i] = -np.inf, 0.0
            else:
                slack_lo[i], slack_hi[i] = 0.0, 0.0
        self.A = A
        self.b = b
        self.lo = np.concatenate([lp.col_lower, slack_lo])
        self.hi = np.concatenate([lp.col_upper, slack_hi])
        self.n_art = 0
        self.cost = None

    def run(self) -> LpOutcome:
        self._init_point()
        if self.n_art:
            self._set_costs(self.phase1_cost)
            outcome = self._iterate(phase_one=True)
            if outcome != "optimal":  # pragma: no cover - phase 1 is bounded
                raise SimplexBreakdownError("phase-1 ray", self.basis)
            infeas = -float(self.cost @ self.x)
            scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
            if infeas > FEASIBILITY_TOL * scale:
                return LpOutcome(LpStatus.INFEASIBLE)
            # Artificials are (near) zero; pin them so phase 2 cannot move them.
            art = slice(self.A.shape[1] - self.n_art, self.A.shape[1])
            self.lo[art] = 0.0
            self.hi[art] = 0.0
            self._refresh_basics()
        cost = np.zeros(self.A.shape[1])
        cost[: self.n_struct] = self.lp.objective
        self._set_costs(cost)
        outcome = self._iterate(phase_one=False)
        if outcome == "unbounded":
            return LpOutcome(LpStatus.UNBOUNDED)
        self._refresh_basics()
        x = self.x[: self.n_struct].copy()
        np.clip(x, self.lp.col_lower, self.lp.col_upper, out=x)
        self._verify(x)
        return LpOutcome(LpStatus.OPTIMAL, x, float(self.lp.objective @ x))

    def _init_point(self):
        n, m = self.n_struct, self.m
        ncols = n + m
        x = np.zeros(ncols)
        stat = np.full(ncols, _AT_LOWER, dtype=np.int8)
        fin_lo = np.isfinite(self.lo[:n])
        fin_hi = np.isfinite(self.hi[:n])
        x[:n] = np.where(fin_lo, self.lo[:n], np.where(fin_hi, self.hi[:n], 0.0))
        stat[:n][~fin_lo & fin_hi] = _AT_UPPER
        stat[:n][~fin_lo & ~fin_hi] = _FREE
        resid = self.b - self.A[:, :n] @ x[:n]
        basis = np.arange(n, ncols)
        stat[n:ncols] = _BASIC
        x[n:ncols] = resid

        art_rows, art_vals, slack_stat = [], [], []
        for i in range(m):
            j = n + i
            if resid[i] > self.hi[j] + BOUND_TOL:
                pinned, st = self.hi[j], _AT_UPPER
            elif resid[i] < self.lo[j] - BOUND_TOL:
                pinned, st = self.lo[j], _AT_LOWER
            else:
                continue
            x[j] = pinned
            stat[j] = st
            art_rows.append(i)
            art_vals.append(resid[i] - pinned)
            slack_stat.append(st)
        self.n_art = len(art_rows)
        if self.n_art:
            k = self.n_art
            art_block = np.zeros((m, k))
            art_lo = np.empty(k)
            art_hi = np.empty(k)
            phase1 = np.zeros(ncols + k)
            for idx, (i, val) in enumerate(zip(art_rows, art_vals)):
                art_block[i, idx] = 1.0
                if val > 0:
                    art_lo[idx], art_hi[idx] = 0.0, np.inf
                    phase1[ncols + idx] = -1.0
                else:
                    art_lo[idx], art_hi[idx] = -np.inf, 0.0
                    phase1[ncols + idx] = 1.0
                basis[i] = ncols + idx
            self.A = np.hstack([self.A, art_block])
            self.lo = np.concatenate([self.lo, art_lo])
            self.hi = np.concatenate([self.hi, art_hi])
            x = np.concatenate([x, np.asarray(art_vals)])
            stat = np.concatenate([stat, np.full(k, _BASIC, dtype=np.int8)])
            self.phase1_cost = phase1
        self.x = x
        self.stat = stat
        self.basis = basis

    def _set_costs(self, cost: np.ndarray):
        self.cost = cost

    def _refresh_basics(self):
        nonbasic = self.stat != _BASIC
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        B = self.A[:, self.basis]
        try:
            self.x[self.basis] = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            raise SimplexBreakdownError("singular basis", self.basis)

    def _iterate(self, phase_one: bool) -> str:
        A, lo, hi = self.A, self.lo, self.hi
        x, stat, basis = self.x, self.stat, self.basis
        m = self.m
        ncols = A.shape[1]
        c = self.cost
        movable = (hi - lo) > 0.0
        bland = False
        degen_run = 0
        bland_trigger = 10 * (m + ncols)
        max_iter = 1000 + 200 * (m + ncols)

        for it in range(max_iter):
            if it and it % self._REFRESH_EVERY == 0:
                self._refresh_basics()
            B = A[:, basis]
            try:
                y = np.linalg.solve(B.T, c[basis])
            except np.linalg.LinAlgError:
                raise SimplexBreakdownError("singular basis", basis)
            d = c - y @ A
            d[basis] = 0.0

            improving = np.where(
                stat == _AT_LOWER,
                d > OPTIMALITY_TOL,
                np.where(
                    stat == _AT_UPPER,
                    d < -OPTIMALITY_TOL,
                    (stat == _FREE) & (np.abs(d) > OPTIMALITY_TOL),
                ),
            )
            improving &= movable
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return "optimal"
            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[int(np.argmax(np.abs(d[candidates])))])
            sigma = 1.0 if (stat[q] == _AT_LOWER or (stat[q] == _FREE and d[q] > 0)) else -1.0

            try:
                w = np.linalg.solve(B, A[:, q])
            except np.linalg.LinAlgError:
                raise SimplexBreakdownError("singular basis", basis)
            step = sigma * w  # basic values move by -step * t

            xB = x[basis]
            loB = lo[basis]
            hiB = hi[basis]
            ratios = np.full(m, np.inf)
            dec = step > PIVOT_TOL
            inc = step < -PIVOT_TOL
            if np.any(dec):
                ratios[dec] = (xB[dec] - loB[dec]) / step[dec]
            if np.any(inc):
                ratios[inc] = (hiB[inc] - xB[inc]) / (-step[inc])
            np.maximum(ratios, 0.0, out=ratios)
            rmin = float(ratios.min()) if m else np.inf
            own = hi[q] - lo[q] if stat[q] != _FREE else np.inf

            if not np.isfinite(rmin) and not np.isfinite(own):
                if phase_one:  # pragma: no cover - phase-1 objective is bounded
                    raise SimplexBreakdownError("phase-1 ray", basis)
                return "unbounded"

            if own <= rmin:
                # Bound flip: the entering variable jumps to its other bound.
                t = own
                x[basis] = xB - step * t
                if stat[q] == _AT_LOWER:
                    x[q] = hi[q]
                    stat[q] = _AT_UPPER
                else:
                    x[q] = lo[q]
                    stat[q] = _AT_LOWER
            else:
                near = np.flatnonzero(ratios <= rmin + 1e-9)
                if bland:
                    r = int(near[int(np.argmin(basis[near]))])
                else:
                    r = int(near[int(np.argmax(np.abs(step[near])))])
                if abs(step[r]) < PIVOT_TOL:  # pragma: no cover - excluded above
                    raise SimplexBreakdownError("pivot below tolerance", basis)
                t = float(ratios[r])
                x[basis] = xB - step * t
                x[q] = x[q] + sigma * t
                leaving = int(basis[r])
                if step[r] > 0:
                    x[leaving] = lo[leaving]
                    stat[leaving] = _AT_LOWER
                else:
                    x[leaving] = hi[leaving]
                    stat[leaving] = _AT_UPPER
                basis[r] = q
                stat[q] = _BASIC

            if t <= 1e-9:
                degen_run += 1
                if degen_run > bland_trigger:
                    bland = True
            else:
                degen_run = 0

        raise SimplexBreakdownError("simplex iteration limit exceeded", basis)

    def _verify(self, x: np.ndarray):
        for a, sense, rhs in self.lp.rows:
            lhs = float(a @ x)
            scale = max(1.0, abs(rhs))
            if sense == LE and lhs > rhs + 10 * FEASIBILITY_TOL * scale:
                raise SimplexBreakdownError(
                    f"reported solution violates row: {lhs} {sense} {rhs}", self.basis
                )
            if sense == GE and lhs < rhs - 10 * FEASIBILITY_TOL * scale:
                raise SimplexBreakdownError(
                    f"reported solution violates row: {lhs} {sense} {rhs}", self.basis
                )
            if sense == EQ and abs(lhs - rhs) > 10 * FEASIBILITY_TOL * scale:
                raise SimplexBreakdownError(
                    f"reported solution violates row: {lhs} {sense} {rhs}", self.basis
                )
