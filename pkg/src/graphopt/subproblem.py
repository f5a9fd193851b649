"""Per-stage problems: a subgraph plus relocated linking rows.

A stage owns its subgraph's variables and rows.  Linking rows handed to it
from the parent level are rewritten over *copy variables* (one per foreign
variable, bounds inherited from the original), which are then pinned to the
parent's iterate through equality fixing rows.  Optional elastic slacks keep
relocated rows feasible for any parent iterate; optional value-function
columns (theta) and cut rows support the decomposition loop.

Column layout is fixed as ``[own variables][copies][slacks][thetas]`` so a
stage built without thetas produces exactly the same pivot sequence as one
whose theta columns simply never enter the basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import SubproblemInfeasibleError
from .model import Constraint, Graph, VariableRef
from .solvers import LinearSolver, SimplexSolver, default_solver
from .simplex import SolveResult
from .standard_form import StandardFormProblem, flatten

_INF = float("inf")


@dataclass
class _Row:
    coefs: dict[int, float]
    sense: str  # "le" | "eq"
    rhs: float
    tag: str


@dataclass
class CutData:
    """One optimality cut: theta >= phi + pi' (x - anchor)."""

    child_id: str
    refs: tuple[VariableRef, ...]
    pi: np.ndarray
    phi: float
    anchor: np.ndarray
    kind: str = "benders"  # "benders" | "strengthened" | "lagrangian" | "warm_start"
    iteration: int = 0
    theta_index: int = 0

    def predicted_value(self, x: np.ndarray) -> float:
        return self.phi + float(self.pi @ (x - self.anchor))

    def same_hyperplane(self, other: "CutData", tol: float = 1e-12) -> bool:
        """True when both describe the same row, whatever anchor expresses it."""
        if self.child_id != other.child_id or self.refs != other.refs:
            return False
        if self.theta_index != other.theta_index or self.pi.shape != other.pi.shape:
            return False
        if float(np.max(np.abs(self.pi - other.pi), initial=0.0)) > tol:
            return False
        rhs_self = float(self.pi @ self.anchor) - self.phi
        rhs_other = float(other.pi @ other.anchor) - other.phi
        return abs(rhs_self - rhs_other) <= tol


class StageProblem:
    """Solvable form of one subgraph with relocated rows, fixing rows and cuts."""

    def __init__(
        self,
        subgraph: Graph,
        relocated: Sequence[Constraint] = (),
        *,
        theta_count: int = 0,
        theta_lb: float = -1e9,
        add_slacks: bool = False,
        slack_penalty: float = 1e6,
    ):
        base = flatten(subgraph)
        self.graph = subgraph
        self.columns: list[VariableRef] = list(base.columns)
        self.var_index: dict[VariableRef, int] = dict(base.var_index)
        self.n_own = len(self.columns)
        self._objective: list[float] = [float(c) for c in base.objective]
        self.objective_constant = float(base.objective_constant)
        self._lower: list[float] = [float(v) for v in base.lower]
        self._upper: list[float] = [float(v) for v in base.upper]
        self._integrality: list[str] = list(base.integrality)
        self.theta_lb = float(theta_lb)
        self.slack_penalty = float(slack_penalty)

        self._rows: list[_Row] = []
        dense = {}
        for r, c, v in base.triplets:
            dense.setdefault(r, {})[c] = dense.setdefault(r, {}).get(c, 0.0) + v
        for r in range(base.n_rows):
            self._rows.append(
                _Row(dense.get(r, {}), base.senses[r], float(base.rhs[r]), f"own:{base.row_provenance[r]}")
            )

        # Copy columns for foreign variables, in first-seen order over the
        # relocated rows.  Bounds (and only bounds) carry over; copies stay
        # continuous because a fixing row pins them anyway.
        self.fixed_refs: list[VariableRef] = []
        self.copy_col: dict[VariableRef, int] = {}
        for con in relocated:
            for ref, _ in con.expr.sorted_terms():
                if ref in self.var_index or ref in self.copy_col:
                    continue
                self.copy_col[ref] = self._new_column(0.0, ref.lower, ref.upper, "continuous")
                self.fixed_refs.append(ref)

        self.slack_cols: list[int] = []
        for con in relocated:
            coefs: dict[int, float] = {}
            for ref, coef in con.expr.sorted_terms():
                col = self.var_index.get(ref, self.copy_col.get(ref))
                coefs[col] = coefs.get(col, 0.0) + coef
            rhs = con.rhs - con.expr.constant
            sense = con.sense
            if add_slacks:
                if sense in ("le", "eq"):
                    up = self._new_column(self.slack_penalty, 0.0, _INF, "continuous")
                    self.slack_cols.append(up)
                    coefs[up] = -1.0
                if sense in ("ge", "eq"):
                    dn = self._new_column(self.slack_penalty, 0.0, _INF, "continuous")
                    self.slack_cols.append(dn)
                    coefs[dn] = 1.0
            if sense == "ge":
                coefs = {c: -v for c, v in coefs.items()}
                rhs = -rhs
                sense = "le"
            self._rows.append(_Row(coefs, sense, float(rhs), f"link:{con.uid}"))

        self.fixing_row_index: dict[VariableRef, int] = {}
        for ref in self.fixed_refs:
            self.fixing_row_index[ref] = len(self._rows)
            self._rows.append(_Row({self.copy_col[ref]: 1.0}, "eq", 0.0, f"fix:{ref.qualified_name}"))

        self.theta_cols: list[int] = []
        for k in range(theta_count):
            self.theta_cols.append(self._new_column(1.0, self.theta_lb, _INF, "continuous"))

        self.cuts: list[CutData] = []
        self._cut_row_start = len(self._rows)

    def _new_column(self, cost: float, lower: float, upper: float, integrality: str) -> int:
        self._objective.append(cost)
        self._lower.append(lower)
        self._upper.append(upper)
        self._integrality.append(integrality)
        return len(self._objective) - 1

    @property
    def is_mip(self) -> bool:
        return any(kind != "continuous" for kind in self._integrality)

    def fixed_values(self) -> np.ndarray:
        return np.array(
            [self._rows[self.fixing_row_index[ref]].rhs for ref in self.fixed_refs], dtype=float
        )

    # -- iterate plumbing ------------------------------------------------

    def set_fixed_values(self, values: Iterable[float]) -> None:
        vals = list(values)
        if len(vals) != len(self.fixed_refs):
            raise ValueError(
                f"expected {len(self.fixed_refs)} fixed values, got {len(vals)}"
            )
        for ref, val in zip(self.fixed_refs, vals):
            self._rows[self.fixing_row_index[ref]].rhs = float(val)

    def add_cut(self, cut: CutData) -> None:
        if not 0 <= cut.theta_index < len(self.theta_cols):
            raise ValueError(f"no theta column {cut.theta_index}")
        coefs: dict[int, float] = {self.theta_cols[cut.theta_index]: -1.0}
        for ref, coef in zip(cut.refs, cut.pi):
            col = self.var_index.get(ref)
            if col is None:
                raise ValueError(f"cut references non-stage variable {ref.qualified_name}")
            if coef:
                coefs[col] = coefs.get(col, 0.0) + float(coef)
        rhs = float(cut.pi @ cut.anchor) - cut.phi
        self._rows.append(_Row(coefs, "le", rhs, f"cut:{cut.child_id}:{cut.kind}:{cut.iteration}"))
        self.cuts.append(cut)

    def has_equivalent_cut(self, cut: CutData, tol: float = 1e-12) -> bool:
        return any(cut.same_hyperplane(old, tol) for old in self.cuts)

    # -- problem assembly ------------------------------------------------

    def _assemble(
        self,
        rows: Sequence[_Row],
        objective: Sequence[float],
        constant: float,
        integrality: Sequence[str],
    ) -> StandardFormProblem:
        triplets = []
        for r, row in enumerate(rows):
            for c, v in sorted(row.coefs.items()):
                if v:
                    triplets.append((r, c, v))
        return StandardFormProblem(
            columns=list(self.columns),
            var_index=dict(self.var_index),
            objective=np.array(objective, dtype=float),
            objective_constant=float(constant),
            triplets=triplets,
            senses=[row.sense for row in rows],
            rhs=np.array([row.rhs for row in rows], dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            integrality=list(integrality),
            row_provenance={r: row.tag for r, row in enumerate(rows)},
        )

    def problem(self, relax: bool = False) -> StandardFormProblem:
        integrality = self._integrality
        lower = self._lower
        if relax:
            integrality = ["continuous"] * len(self._integrality)
        prob = self._assemble(self._rows, self._objective, self.objective_constant, integrality)
        if relax:
            for j, kind in enumerate(self._integrality):
                if kind == "binary":
                    prob.lower[j] = max(prob.lower[j], 0.0)
                    prob.upper[j] = min(prob.upper[j], 1.0)
        return prob

    def lagrangian_problem(self, mu: np.ndarray, anchor: np.ndarray) -> StandardFormProblem:
        """Fixing rows dropped; their violation priced into the objective.

        min  c'y + theta - mu' (z - anchor)  over all remaining rows.
        """
        rows = [row for row in self._rows if not row.tag.startswith("fix:")]
        objective = list(self._objective)
        for j, ref in enumerate(self.fixed_refs):
            objective[self.copy_col[ref]] -= float(mu[j])
        constant = self.objective_constant + float(mu @ anchor)
        return self._assemble(rows, objective, constant, self._integrality)

    def level_set_problem(self, level: float) -> StandardFormProblem:
        """Zero objective plus a cap on the original objective value."""
        cap = _Row(
            {c: v for c, v in enumerate(self._objective) if v},
            "le",
            float(level) - self.objective_constant,
            "level_set",
        )
        zeros = [0.0] * len(self._objective)
        return self._assemble(list(self._rows) + [cap], zeros, 0.0, self._integrality)

    # -- solving and extraction -------------------------------------------

    def solve(self, solver: Optional[LinearSolver] = None, relax: bool = False) -> SolveResult:
        solver = solver or default_solver()
        prob = self.problem(relax=relax)
        if relax or not prob.integer_columns():
            return solver.solve_lp(prob)
        return solver.solve_milp(prob)

    def fixing_duals(self, result: SolveResult) -> np.ndarray:
        if result.duals is None:
            raise ValueError("solve result carries no duals")
        return np.array(
            [result.duals[self.fixing_row_index[ref]] for ref in self.fixed_refs], dtype=float
        )

    def theta_values(self, result: SolveResult) -> np.ndarray:
        assert result.primal is not None
        return np.array([result.primal[c] for c in self.theta_cols], dtype=float)

    def true_cost(self, result: SolveResult) -> float:
        """Objective value excluding value-function columns (slacks included)."""
        assert result.primal is not None
        n = len(self._objective) - len(self.theta_cols)
        obj = np.array(self._objective[:n], dtype=float)
        return float(np.dot(obj, result.primal[:n]) + self.objective_constant)

    def full_objective_value(self, result: SolveResult) -> float:
        """Objective value including value-function columns (for level-set audits)."""
        assert result.primal is not None
        obj = np.array(self._objective, dtype=float)
        return float(np.dot(obj, result.primal) + self.objective_constant)

    def slack_activity(self, result: SolveResult) -> float:
        if not self.slack_cols or result.primal is None:
            return 0.0
        return float(max(result.primal[c] for c in self.slack_cols))

    def own_solution(self, result: SolveResult) -> dict[VariableRef, float]:
        assert result.primal is not None
        return {ref: float(result.primal[j]) for j, ref in enumerate(self.columns)}

    def values_for(self, refs: Sequence[VariableRef], result: SolveResult) -> np.ndarray:
        assert result.primal is not None
        out = np.empty(len(refs))
        for j, ref in enumerate(refs):
            col = self.var_index.get(ref)
            if col is None:
                col = self.copy_col[ref]
            out[j] = result.primal[col]
        return out

    def require_feasible(self, result: SolveResult, context: str) -> SolveResult:
        if result.status == "infeasible":
            hint = "" if self.slack_cols else " (consider enabling elastic slacks)"
            raise SubproblemInfeasibleError(
                f"stage {self.graph.id!r} infeasible during {context}{hint}"
            )
        return result
