"""Dense two-phase tableau simplex with dual values.

The solver works on a :class:`~graphopt.standard_form.StandardFormProblem`.
General bounds are handled by shifting (finite lower), flipping (finite
upper only), or splitting (free) columns; two-sided bounds become an extra
internal row.  Phase I minimizes artificial infeasibility, Phase II the
true objective.  Dantzig pricing is used until the iteration count stalls
on degenerate pivots, after which Bland's rule takes over so the method
cannot cycle.

Dual convention: the reported dual of a row is the sensitivity of the
optimal value to that row's right-hand side, `y_i = dV/db_i`.  For a
minimization with "le" rows this makes duals nonpositive.  Reduced costs
are reported as `c - A'y` over the rows as given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalBreakdownError
from .standard_form import StandardFormProblem

_RC_TOL = 1e-9          # entering threshold on reduced costs
_PIVOT_TOL = 1e-11      # smallest usable pivot element
_PIVOT_GOOD = 1e-9      # pivots below this count toward numerical breakdown
_FEAS_TOL = 1e-7        # Phase I residual treated as infeasible above this
_DEGEN_STALL = 60       # degenerate pivots before Bland's rule engages
_BREAKDOWN_STALL = 50   # consecutive tiny pivots before giving up


@dataclass
class SolveResult:
    """Outcome of one LP or MILP solve.

    ``duals`` and ``reduced_costs`` follow the sensitivity convention of the
    module docstring and are ``None`` for MILP solves.
    """

    status: str                       # optimal | infeasible | unbounded | iteration_limit
    objective: float = math.nan
    primal: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0
    nodes_explored: int = 0
    mip_gap: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class _Tableau:
    rows: np.ndarray          # (m, n_total + 1), rhs in the last column
    basis: np.ndarray         # basic column per row
    n_struct: int
    init_col: np.ndarray      # identity column each row started with
    artificial: np.ndarray    # bool mask over columns
    iterations: int = 0
    tiny_pivots: int = 0
    degenerate: int = 0
    bland: bool = False


def _pivot(t: _Tableau, row: int, col: int) -> None:
    piv = t.rows[row, col]
    if abs(piv) < _PIVOT_TOL:
        raise NumericalBreakdownError(f"pivot {piv:.3e} below tolerance")
    if abs(piv) < _PIVOT_GOOD:
        t.tiny_pivots += 1
        if t.tiny_pivots > _BREAKDOWN_STALL:
            raise NumericalBreakdownError("persistent near-singular pivots")
    else:
        t.tiny_pivots = 0
    t.rows[row] /= piv
    factors = t.rows[:, col].copy()
    factors[row] = 0.0
    t.rows -= np.outer(factors, t.rows[row])
    t.rows[:, col] = 0.0
    t.rows[row, col] = 1.0
    t.basis[row] = col
    t.iterations += 1


def _reduced_costs(t: _Tableau, cost: np.ndarray) -> np.ndarray:
    cb = cost[t.basis]
    return cost - cb @ t.rows[:, :-1]


def _objective_of(t: _Tableau, cost: np.ndarray) -> float:
    return float(cost[t.basis] @ t.rows[:, -1])


def _run_phase(t: _Tableau, cost: np.ndarray, allowed: np.ndarray, max_iterations: int) -> str:
    """Drive the tableau to optimality for the given costs.

    Returns "optimal", "unbounded", or "iteration_limit".
    """
    m = t.rows.shape[0]
    while True:
        if t.iterations > max_iterations:
            return "iteration_limit"
        rc = _reduced_costs(t, cost)
        candidates = np.where(allowed & (rc < -_RC_TOL))[0]
        if candidates.size == 0:
            return "optimal"
        if t.bland:
            entering = int(candidates[0])
        else:
            entering = int(candidates[np.argmin(rc[candidates])])
        col = t.rows[:, entering]
        eligible = np.where(col > _PIVOT_TOL)[0]
        if eligible.size == 0:
            return "unbounded"
        ratios = t.rows[eligible, -1] / col[eligible]
        best = np.min(ratios)
        ties = eligible[np.where(ratios <= best + 1e-12)[0]]
        # smallest basic-variable index among ties keeps the walk deterministic
        # and is the Bland-compatible choice
        leaving = int(ties[np.argmin(t.basis[ties])])
        if best < 1e-12:
            t.degenerate += 1
            if t.degenerate > _DEGEN_STALL:
                t.bland = True
        else:
            t.degenerate = 0
        _pivot(t, leaving, entering)
        if m == 0:  # pragma: no cover - degenerate guard
            return "optimal"


def solve_lp(problem: StandardFormProblem, *, max_iterations: Optional[int] = None) -> SolveResult:
    """Solve the LP relaxation of ``problem`` (integrality is ignored)."""
    n = problem.n_cols
    m_given = problem.n_rows
    a_given = problem.dense_rows()
    b_given = problem.rhs.copy()
    senses = list(problem.senses)
    c_given = problem.objective.astype(float).copy()

    # normalize any "ge" rows to "le"; the dual flips back on the way out
    given_sign = np.ones(m_given)
    for i, s in enumerate(senses):
        if s == "ge":
            given_sign[i] = -1.0
            a_given[i] *= -1.0
            b_given[i] = -b_given[i]
            senses[i] = "le"

    # --- column transforms to reach t >= 0 ---------------------------------
    # each entry: (kind, struct_col (or first of pair), offset)
    transforms: list[tuple[str, int, float]] = []
    struct_cols = 0
    bound_rows: list[tuple[int, float]] = []  # (struct_col, width) rows t <= width
    for j in range(n):
        lo, hi = problem.lower[j], problem.upper[j]
        if lo > hi + 1e-12:
            return SolveResult(status="infeasible", iterations=0)
        if math.isfinite(lo):
            transforms.append(("shift", struct_cols, lo))
            if math.isfinite(hi):
                bound_rows.append((struct_cols, hi - lo))
            struct_cols += 1
        elif math.isfinite(hi):
            transforms.append(("flip", struct_cols, hi))
            struct_cols += 1
        else:
            transforms.append(("split", struct_cols, 0.0))
            struct_cols += 2

    m = m_given + len(bound_rows)
    a_int = np.zeros((m, struct_cols))
    b_int = np.zeros(m)
    c_int = np.zeros(struct_cols)
    const_shift = 0.0

    for j, (kind, k, offset) in enumerate(transforms):
        col = a_given[:, j]
        if kind == "shift":
            a_int[:m_given, k] = col
            b_int[:m_given] -= col * offset
            c_int[k] = c_given[j]
            const_shift += c_given[j] * offset
        elif kind == "flip":
            a_int[:m_given, k] = -col
            b_int[:m_given] -= col * offset
            c_int[k] = -c_given[j]
            const_shift += c_given[j] * offset
        else:  # split
            a_int[:m_given, k] = col
            a_int[:m_given, k + 1] = -col
            c_int[k] = c_given[j]
            c_int[k + 1] = -c_given[j]
    b_int[:m_given] += b_given
    for i, (k, width) in enumerate(bound_rows):
        a_int[m_given + i, k] = 1.0
        b_int[m_given + i] = width

    kinds = ["eq" if s == "eq" else "le" for s in senses] + ["le"] * len(bound_rows)

    # --- sign-normalize rhs and classify rows ------------------------------
    row_sign = np.ones(m)
    for i in range(m):
        if b_int[i] < 0.0:
            row_sign[i] = -1.0
            a_int[i] *= -1.0
            b_int[i] *= -1.0
            if kinds[i] == "le":
                kinds[i] = "ge"

    n_slack = sum(1 for k in kinds if k in ("le", "ge"))
    n_art = sum(1 for k in kinds if k in ("ge", "eq"))
    n_total = struct_cols + n_slack + n_art

    rows = np.zeros((m, n_total + 1))
    rows[:, :struct_cols] = a_int
    rows[:, -1] = b_int
    basis = np.zeros(m, dtype=int)
    init_col = np.zeros(m, dtype=int)
    artificial = np.zeros(n_total, dtype=bool)

    slack_at = struct_cols
    art_at = struct_cols + n_slack
    for i, kind in enumerate(kinds):
        if kind == "le":
            rows[i, slack_at] = 1.0
            basis[i] = slack_at
            init_col[i] = slack_at
            slack_at += 1
        elif kind == "ge":
            rows[i, slack_at] = -1.0
            slack_at += 1
            rows[i, art_at] = 1.0
            artificial[art_at] = True
            basis[i] = art_at
            init_col[i] = art_at
            art_at += 1
        else:  # eq
            rows[i, art_at] = 1.0
            artificial[art_at] = True
            basis[i] = art_at
            init_col[i] = art_at
            art_at += 1

    t = _Tableau(rows=rows, basis=basis, n_struct=struct_cols, init_col=init_col, artificial=artificial)
    if max_iterations is None:
        max_iterations = max(5000, 50 * (m + n_total))

    # --- Phase I ------------------------------------------------------------
    if n_art:
        cost1 = np.zeros(n_total)
        cost1[artificial] = 1.0
        allowed = np.ones(n_total, dtype=bool)
        status = _run_phase(t, cost1, allowed, max_iterations)
        if status == "iteration_limit":
            return SolveResult(status="iteration_limit", iterations=t.iterations)
        if status == "unbounded":  # pragma: no cover - Phase I is bounded below
            raise NumericalBreakdownError("phase I reported unbounded")
        if _objective_of(t, cost1) > _FEAS_TOL:
            return SolveResult(status="infeasible", iterations=t.iterations)
        # drive leftover artificials out of the basis where possible
        for i in range(m):
            if artificial[t.basis[i]]:
                row = t.rows[i, :struct_cols + n_slack]
                nz = np.where(np.abs(row) > _PIVOT_GOOD)[0]
                if nz.size:
                    _pivot(t, i, int(nz[0]))
                # an all-zero row is redundant; its artificial stays basic at 0

    # --- Phase II -----------------------------------------------------------
    cost2 = np.zeros(n_total)
    cost2[:struct_cols] = c_int
    t.bland = False
    t.degenerate = 0
    allowed = ~artificial
    status = _run_phase(t, cost2, allowed, max_iterations)
    if status == "iteration_limit":
        return SolveResult(status="iteration_limit", iterations=t.iterations)
    if status == "unbounded":
        return SolveResult(status="unbounded", iterations=t.iterations)

    # --- recover primal, duals, reduced costs -------------------------------
    x_int = np.zeros(n_total)
    x_int[t.basis] = t.rows[:, -1]
    x = np.zeros(n)
    for j, (kind, k, offset) in enumerate(transforms):
        if kind == "shift":
            x[j] = offset + x_int[k]
        elif kind == "flip":
            x[j] = offset - x_int[k]
        else:
            x[j] = x_int[k] - x_int[k + 1]

    rc_final = _reduced_costs(t, cost2)
    y_given = np.empty(m_given)
    for i in range(m_given):
        y_given[i] = row_sign[i] * -rc_final[t.init_col[i]]
    reduced = c_given - a_given.T @ y_given
    y_given *= given_sign  # report duals relative to the rows as given

    objective = float(c_given @ x) + problem.objective_constant
    return SolveResult(
        status="optimal",
        objective=objective,
        primal=x,
        duals=y_given,
        reduced_costs=reduced,
        iterations=t.iterations,
    )
