"""Nested decomposition over the subgraph tree.

The first subgraph layer is collapsed into a quotient graph; when that
quotient is a connected tree, each subgraph becomes a stage.  The root stage
approximates its children's value functions with cutting planes; a forward
pass fixes each child's copy variables to the parent iterate, and a backward
pass turns child sensitivities into new cuts.

Bounds follow the usual pattern: the root objective (value-function columns
included) is a lower bound, and the summed stage costs of any forward pass
are an upper bound.  Iteration stops when the relative gap closes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    CyclicStructureError,
    DisconnectedError,
    HyperedgeSpanError,
    LevelSetInfeasibleError,
    LocalNodesAtRootError,
    NoSubgraphsError,
    OverlapUnsupportedError,
    RelaxationInfeasibleError,
    RootNotFoundError,
)
from .model import Constraint, Graph, VariableRef
from .simplex import SolveResult
from .solvers import LinearSolver, default_solver
from .standard_form import StandardFormProblem, check_solution, flatten, lp_relaxation
from .subproblem import CutData, StageProblem
from .transform import CondensedTopology, condensed_topology

_INF = float("inf")


def validate_structure(graph: Graph) -> CondensedTopology:
    """Check that the first subgraph layer supports stage decomposition.

    Requirements: at least one subgraph, no nodes owned directly by the
    root, no shared nodes, every parent-level edge spanning exactly two
    subgraphs, and a connected, acyclic quotient.
    """
    subs = graph.local_subgraphs()
    if not subs:
        raise NoSubgraphsError(f"graph {graph.id!r} has no subgraphs to decompose")
    if graph.local_nodes():
        names = [n.id for n in graph.local_nodes()]
        raise LocalNodesAtRootError(
            f"nodes {names} sit directly on {graph.id!r}; move them into a subgraph"
        )
    ids = [n.id for n in graph._iter_nodes()]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise OverlapUnsupportedError(f"shared nodes {dupes} are not supported by decomposition")
    topo = condensed_topology(graph)
    if topo.orphan_edges:
        bad = [e.id for e in topo.orphan_edges]
        raise HyperedgeSpanError(
            f"edges {bad} do not span exactly two subgraphs; reroute or repartition first"
        )
    if not topo.is_connected():
        raise DisconnectedError("the subgraph quotient is not connected")
    if not topo.is_acyclic():
        raise CyclicStructureError(
            "the subgraph quotient has a cycle; reroute a linking edge to break it"
        )
    return topo


@dataclass
class Stage:
    id: str
    subgraph: Graph
    level: int  # root = 1
    parent: Optional[str]
    children: list[str] = field(default_factory=list)
    relocated: list[Constraint] = field(default_factory=list)


class BendersTree:
    """Stages in breadth-first order from a chosen root subgraph."""

    def __init__(self, graph: Graph, root: Optional[str] = None, topology: Optional[CondensedTopology] = None):
        subs = graph.local_subgraphs()
        by_id = {s.id: s for s in subs}
        if root is None:
            root = subs[0].id
        if root not in by_id:
            raise RootNotFoundError(f"no first-level subgraph named {root!r}")
        topo = topology or condensed_topology(graph)

        adjacency = {
            s.id: [t.id for t in subs if t.id != s.id and frozenset({s.id, t.id}) in topo.adjacency]
            for s in subs
        }
        self.root = root
        self.stages: dict[str, Stage] = {root: Stage(root, by_id[root], 1, None)}
        self.order: list[str] = [root]
        queue = deque([root])
        while queue:
            gid = queue.popleft()
            for nxt in adjacency[gid]:
                if nxt in self.stages:
                    continue
                self.stages[nxt] = Stage(nxt, by_id[nxt], self.stages[gid].level + 1, gid)
                self.stages[gid].children.append(nxt)
                self.order.append(nxt)
                queue.append(nxt)

        owner: dict[str, str] = {}
        for sub in subs:
            for node in sub.all_nodes():
                owner[node.id] = sub.id
        for edge in graph.local_edges():
            pair = {owner[nid] for nid in edge.incident_nodes}
            a, b = sorted(pair, key=lambda g: self.stages[g].level)
            if self.stages[b].parent == a:
                self.stages[b].relocated.extend(edge.constraints)

        self.n_levels = max(st.level for st in self.stages.values())

    def descendants(self, gid: str) -> list[str]:
        out = [gid]
        i = 0
        while i < len(out):
            out.extend(self.stages[out[i]].children)
            i += 1
        return out


@dataclass
class BendersConfig:
    max_iters: int = 100
    tol: float = 1e-6
    multicut: bool = False
    strengthened: bool = False
    lagrangian: bool = False
    lagrangian_iters: int = 50
    lagrangian_step: float = 1.0
    regularize: bool = False
    alpha: float = 0.5
    add_slacks: bool = False
    slack_penalty: float = 1e6
    parallelize_second_stage: bool = False
    warm_start_cuts: bool = False
    theta_lb: float = -1e9

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass
class IterationRecord:
    iteration: int
    lower_bound: float
    upper_bound: float       # best seen so far
    iteration_cost: float    # this iteration's forward-pass cost
    gap: float
    cuts_added: int = 0
    wall_time: float = 0.0
    regularized: bool = False


@dataclass
class BendersResult:
    status: str  # "converged" | "max_iterations"
    objective: float
    lower_bound: float
    upper_bound: float
    gap: float
    iterations: int
    best_iteration: int
    solution: dict[VariableRef, float]
    lb_history: list[float]
    ub_history: list[float]
    trace: list[IterationRecord]
    cuts: list[CutData]
    flags: dict[str, bool]
    level_set_audit: list[tuple[int, float, float]]
    max_violation: float
    config: BendersConfig
    tree: BendersTree

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _solve_problem(solver: LinearSolver, problem: StandardFormProblem) -> SolveResult:
    if problem.integer_columns():
        return solver.solve_milp(problem)
    return solver.solve_lp(problem)


def _relative_gap(upper: float, lower: float) -> float:
    if not math.isfinite(upper) or not math.isfinite(lower):
        return _INF
    if lower == 0.0:
        return upper - lower
    return (upper - lower) / abs(lower)


def _lagrangian_ascent(
    prob: StageProblem,
    lam: np.ndarray,
    anchor: np.ndarray,
    config: BendersConfig,
    solver: LinearSolver,
) -> Optional[tuple[float, np.ndarray]]:
    """Projected subgradient ascent on the fixing-row multipliers.

    Starts from the relaxation duals, keeps the best value seen, and stops
    early on a zero subgradient or an unbounded pricing problem.
    """
    mu = lam.astype(float).copy()
    best_val = -_INF
    best_mu = mu.copy()
    for t in range(1, config.lagrangian_iters + 1):
        res = _solve_problem(solver, prob.lagrangian_problem(mu, anchor))
        if res.status != "optimal":
            break
        if res.objective > best_val:
            best_val = res.objective
            best_mu = mu.copy()
        subgrad = anchor - prob.values_for(prob.fixed_refs, res)
        if float(np.max(np.abs(subgrad), initial=0.0)) <= 1e-12:
            break
        mu = mu + (config.lagrangian_step / math.sqrt(t)) * subgrad
    if not math.isfinite(best_val):
        return None
    return best_val, best_mu


def _combine_cuts(parent_values: dict[VariableRef, float], parts: list[CutData], iteration: int) -> CutData:
    """Sum per-child cuts into one row for a single value-function column."""
    refs: list[VariableRef] = []
    for part in parts:
        for ref in part.refs:
            if ref not in refs:
                refs.append(ref)
    index = {ref: j for j, ref in enumerate(refs)}
    pi = np.zeros(len(refs))
    phi = 0.0
    for part in parts:
        phi += part.phi
        for ref, coef in zip(part.refs, part.pi):
            pi[index[ref]] += coef
    anchor = np.array([parent_values[ref] for ref in refs])
    kinds = {part.kind for part in parts}
    kind = kinds.pop() if len(kinds) == 1 else "mixed"
    child_id = "+".join(part.child_id for part in parts)
    return CutData(child_id, tuple(refs), pi, phi, anchor, kind, iteration, parts[0].theta_index)


class _Decomposition:
    def __init__(self, graph: Graph, root: Optional[str], config: BendersConfig, solver: LinearSolver):
        self.graph = graph
        self.config = config
        self.solver = solver
        topo = validate_structure(graph)
        self.tree = BendersTree(graph, root, topo)
        self.problems: dict[str, StageProblem] = {}
        self.theta_index: dict[str, int] = {}
        for gid in self.tree.order:
            st = self.tree.stages[gid]
            theta_count = len(st.children) if config.multicut else (1 if st.children else 0)
            self.problems[gid] = StageProblem(
                st.subgraph,
                st.relocated,
                theta_count=theta_count,
                theta_lb=config.theta_lb,
                add_slacks=config.add_slacks and bool(st.relocated),
                slack_penalty=config.slack_penalty,
            )
            for i, child in enumerate(st.children):
                self.theta_index[child] = i if config.multicut else 0
        self.cuts: list[CutData] = []

    # -- cut management ----------------------------------------------------

    def _install_cuts(self, parent_id: str, parts: list[CutData], iteration: int) -> int:
        """Attach per-child cut components to a parent, dedup included."""
        if not parts:
            return 0
        target = self.problems[parent_id]
        if self.config.multicut:
            candidates = parts
        else:
            parent_values = {}
            for part in parts:
                for ref, val in zip(part.refs, part.anchor):
                    parent_values[ref] = float(val)
            candidates = [_combine_cuts(parent_values, parts, iteration)]
        added = 0
        for cut in candidates:
            if target.has_equivalent_cut(cut):
                continue
            target.add_cut(cut)
            self.cuts.append(cut)
            added += 1
        return added

    def _child_cut(self, gid: str, result: SolveResult, iteration: int) -> CutData:
        """Build this stage's contribution to its parent's cuts."""
        prob = self.problems[gid]
        anchor = prob.fixed_values()
        lam = prob.fixing_duals(result)
        phi = result.objective
        kind = "benders"
        if prob.is_mip and (self.config.lagrangian or self.config.strengthened):
            if self.config.lagrangian:
                best = _lagrangian_ascent(prob, lam, anchor, self.config, self.solver)
                if best is not None:
                    phi, lam = best
                    kind = "lagrangian"
            else:
                res = _solve_problem(self.solver, prob.lagrangian_problem(lam, anchor))
                if res.status == "optimal":
                    phi = res.objective
                    kind = "strengthened"
        return CutData(
            gid, tuple(prob.fixed_refs), lam.astype(float), float(phi), anchor, kind,
            iteration, self.theta_index[gid],
        )

    # -- passes --------------------------------------------------------------

    def forward(self, root_result: SolveResult) -> dict[str, SolveResult]:
        order = self.tree.order
        results: dict[str, SolveResult] = {self.tree.root: root_result}

        def solve_child(gid: str) -> SolveResult:
            st = self.tree.stages[gid]
            prob = self.problems[gid]
            anchor = self.problems[st.parent].values_for(prob.fixed_refs, results[st.parent])
            prob.set_fixed_values(anchor)
            return prob.require_feasible(prob.solve(self.solver), "the forward pass")

        if (
            self.config.parallelize_second_stage
            and self.tree.n_levels == 2
            and len(order) > 2
        ):
            children = order[1:]
            with ThreadPoolExecutor(max_workers=len(children)) as pool:
                futures = [pool.submit(solve_child, gid) for gid in children]
                for gid, fut in zip(children, futures):
                    results[gid] = fut.result()
        else:
            for gid in order[1:]:
                results[gid] = solve_child(gid)
        return results

    def backward(self, results: dict[str, SolveResult], iteration: int) -> int:
        """Harvest sensitivities leaves-first and install cuts on parents."""
        pending: dict[str, list[CutData]] = {}
        fresh: dict[str, int] = {gid: 0 for gid in self.tree.order}
        added = 0
        for gid in reversed(self.tree.order):
            if pending.get(gid):
                n = self._install_cuts(gid, pending.pop(gid), iteration)
                fresh[gid] += n
                added += n
            if gid == self.tree.root:
                continue
            prob = self.problems[gid]
            if prob.is_mip or fresh[gid]:
                res = prob.require_feasible(prob.solve(self.solver, relax=True), "the backward pass")
            else:
                res = results[gid]
            pending.setdefault(self.tree.stages[gid].parent, []).append(
                self._child_cut(gid, res, iteration)
            )
        for gid, parts in pending.items():
            added += self._install_cuts(gid, parts, iteration)
        return added

    def warm_start(self) -> int:
        """Seed cuts from one monolithic relaxation solve.

        Each stage's share of the relaxation objective, paired with the
        relaxation duals of its relocated rows, gives a supporting cut at the
        relaxation iterate.  For a pure LP this makes the first lower bound
        exact.
        """
        base = flatten(self.graph)
        res = self.solver.solve_lp(lp_relaxation(base))
        if res.status != "optimal":
            raise RelaxationInfeasibleError(
                f"monolithic relaxation is {res.status}; cannot seed warm-start cuts"
            )
        assert res.primal is not None and res.duals is not None
        rows = base.dense_rows()
        row_of_uid = {uid: r for r, uid in base.row_provenance.items()}
        values = {ref: float(res.primal[j]) for ref, j in base.var_index.items()}

        pending: dict[str, list[CutData]] = {}
        for gid in self.tree.order[1:]:
            st = self.tree.stages[gid]
            prob = self.problems[gid]
            phi = 0.0
            for sid in self.tree.descendants(gid):
                phi += self.tree.stages[sid].subgraph.effective_objective().evaluate(values)
            refs = prob.fixed_refs
            pi = np.zeros(len(refs))
            for con in st.relocated:
                r = row_of_uid[con.uid]
                for j, ref in enumerate(refs):
                    pi[j] -= res.duals[r] * rows[r, base.var_index[ref]]
            anchor = np.array([values[ref] for ref in refs])
            pending.setdefault(st.parent, []).append(
                CutData(gid, tuple(refs), pi, phi, anchor, "warm_start", 0, self.theta_index[gid])
            )
        added = 0
        for gid, parts in pending.items():
            added += self._install_cuts(gid, parts, 0)
        return added

    # -- main loop -------------------------------------------------------

    def run(self) -> BendersResult:
        config = self.config
        tree = self.tree
        root_prob = self.problems[tree.root]

        warm_cuts = self.warm_start() if config.warm_start_cuts else 0

        best_ub = _INF
        best_iteration = 0
        best_solution: dict[VariableRef, float] = {}
        best_slack = 0.0
        lb_history: list[float] = []
        ub_history: list[float] = []
        trace: list[IterationRecord] = []
        audit: list[tuple[int, float, float]] = []
        status = "max_iterations"
        final_results: dict[str, SolveResult] = {}

        for k in range(1, config.max_iters + 1):
            started = time.perf_counter()
            root_res = root_prob.require_feasible(root_prob.solve(self.solver), "the root solve")
            lower = root_res.objective

            iterate_res = root_res
            regularized = False
            if config.regularize and tree.n_levels == 2 and math.isfinite(best_ub):
                level = lower + config.alpha * (best_ub - lower)
                level_res = _solve_problem(self.solver, root_prob.level_set_problem(level))
                if level_res.status != "optimal":
                    raise LevelSetInfeasibleError(
                        f"level-set solve at iteration {k} is {level_res.status}"
                    )
                audit.append((k, root_prob.full_objective_value(level_res), level))
                iterate_res = level_res
                regularized = True

            results = self.forward(iterate_res)
            final_results = results

            iteration_cost = 0.0
            for gid in tree.order:
                iteration_cost += self.problems[gid].true_cost(results[gid])
            if iteration_cost < best_ub:
                best_ub = iteration_cost
                best_iteration = k
                best_solution = {}
                for gid in tree.order:
                    best_solution.update(self.problems[gid].own_solution(results[gid]))
                best_slack = max(
                    (self.problems[gid].slack_activity(results[gid]) for gid in tree.order),
                    default=0.0,
                )

            lb_history.append(lower)
            ub_history.append(best_ub)
            gap = _relative_gap(best_ub, lower)
            record = IterationRecord(
                k, lower, best_ub, iteration_cost, gap,
                cuts_added=warm_cuts if k == 1 else 0,
                regularized=regularized,
            )
            trace.append(record)
            if gap <= config.tol:
                status = "converged"
                record.wall_time = time.perf_counter() - started
                break
            if k < config.max_iters:
                record.cuts_added += self.backward(results, k)
            record.wall_time = time.perf_counter() - started

        theta_at_bound = False
        for gid in tree.order:
            prob = self.problems[gid]
            res = final_results.get(gid)
            if res is not None and res.primal is not None and prob.theta_cols:
                thetas = prob.theta_values(res)
                if thetas.size and float(thetas.min()) <= config.theta_lb + 1e-6:
                    theta_at_bound = True
        flags = {
            "theta_lower_bound_active": theta_at_bound,
            "slacks_active": best_slack > 1e-7,
        }
        violation = check_solution(self.graph, best_solution) if best_solution else _INF

        return BendersResult(
            status=status,
            objective=best_ub,
            lower_bound=lb_history[-1] if lb_history else -_INF,
            upper_bound=best_ub,
            gap=trace[-1].gap if trace else _INF,
            iterations=len(trace),
            best_iteration=best_iteration,
            solution=best_solution,
            lb_history=lb_history,
            ub_history=ub_history,
            trace=trace,
            cuts=list(self.cuts),
            flags=flags,
            level_set_audit=audit,
            max_violation=violation,
            config=config,
            tree=tree,
        )


def run_decomposition(
    graph: Graph,
    root: Optional[str] = None,
    config: Optional[BendersConfig] = None,
    solver: Optional[LinearSolver] = None,
) -> BendersResult:
    """Solve a hierarchical graph by tree decomposition with cutting planes."""
    return _Decomposition(graph, root, config or BendersConfig(), solver or default_solver()).run()
