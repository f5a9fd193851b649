"""Hierarchical graph model for linear and mixed-integer problems.

A :class:`Graph` holds nodes, edges, and nested subgraphs.  Each
:class:`Node` owns variables, constraints over its own variables, and a
linear objective.  An :class:`Edge` couples two or more nodes through
linking constraints and is owned by the graph whose node set spans it.
Subgraphs nest to arbitrary depth; ``local_*`` accessors list one layer,
``all_*`` accessors recurse depth-first.

Everything is a minimization.  Senses are the strings ``"le"``, ``"eq"``,
``"ge"``; integrality is ``"continuous"``, ``"binary"``, or ``"integer"``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal, Mapping, Optional, Union

from .errors import (
    CycleInNestingError,
    DuplicateNameError,
    ForeignVariableError,
    IdCollisionError,
    InvalidBoundsError,
    NotOwnedError,
    SingleNodeError,
)

Sense = Literal["le", "eq", "ge"]
Integrality = Literal["continuous", "binary", "integer"]

SENSES = ("le", "eq", "ge")
INTEGRALITIES = ("continuous", "binary", "integer")

_graph_counter = itertools.count(1)
_node_counter = itertools.count(1)


@dataclass(frozen=True)
class VariableRef:
    """Handle to one variable.  Identity is the pair ``(node_id, name)``.

    Bounds and integrality ride along for convenience but do not take part
    in equality or hashing, so a ref can be used as a dictionary key.
    """

    node_id: str
    name: str
    lower: float = field(default=-math.inf, compare=False)
    upper: float = field(default=math.inf, compare=False)
    integrality: Integrality = field(default="continuous", compare=False)

    @property
    def qualified_name(self) -> str:
        return f"{self.node_id}.{self.name}"

    def sort_key(self) -> tuple[str, str]:
        return (self.node_id, self.name)

    # Small amount of operator sugar so model-building code reads naturally.
    def __mul__(self, coef: float) -> "LinearExpression":
        return LinearExpression({self: float(coef)})

    __rmul__ = __mul__

    def __neg__(self) -> "LinearExpression":
        return LinearExpression({self: -1.0})

    def __add__(self, other) -> "LinearExpression":
        return LinearExpression({self: 1.0}) + other

    __radd__ = __add__

    def __sub__(self, other) -> "LinearExpression":
        return LinearExpression({self: 1.0}) - other

    def __rsub__(self, other) -> "LinearExpression":
        return -(LinearExpression({self: 1.0}) - other)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"VariableRef({self.qualified_name})"


class LinearExpression:
    """Immutable-ish linear form ``sum(coef * var) + constant``.

    Zero coefficients are dropped on construction; iteration over
    :meth:`sorted_terms` is deterministic (ordered by node id, then name).
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Mapping[VariableRef, float]] = None, constant: float = 0.0):
        clean: dict[VariableRef, float] = {}
        if terms:
            for ref, coef in terms.items():
                coef = float(coef)
                if coef != 0.0:
                    clean[ref] = coef
        self.terms = clean
        self.constant = float(constant)

    def sorted_terms(self) -> list[tuple[VariableRef, float]]:
        return sorted(self.terms.items(), key=lambda item: item[0].sort_key())

    def variables(self) -> set[VariableRef]:
        return set(self.terms)

    def evaluate(self, values: Mapping[VariableRef, float]) -> float:
        return self.constant + sum(coef * values[ref] for ref, coef in self.terms.items())

    def substitute(self, mapping: Mapping[VariableRef, VariableRef]) -> "LinearExpression":
        """Rewrite the expression over replacement refs (used by restructuring)."""
        out: dict[VariableRef, float] = {}
        for ref, coef in self.terms.items():
            new = mapping.get(ref, ref)
            out[new] = out.get(new, 0.0) + coef
        return LinearExpression(out, self.constant)

    def is_empty(self) -> bool:
        return not self.terms

    # arithmetic -----------------------------------------------------------
    @staticmethod
    def _coerce(value) -> "LinearExpression":
        if isinstance(value, LinearExpression):
            return value
        if isinstance(value, VariableRef):
            return LinearExpression({value: 1.0})
        if isinstance(value, (int, float)):
            return LinearExpression({}, float(value))
        raise TypeError(f"cannot build a linear expression from {value!r}")

    def __add__(self, other) -> "LinearExpression":
        other = self._coerce(other)
        merged = dict(self.terms)
        for ref, coef in other.terms.items():
            merged[ref] = merged.get(ref, 0.0) + coef
        return LinearExpression(merged, self.constant + other.constant)

    __radd__ = __add__

    def __sub__(self, other) -> "LinearExpression":
        return self + (self._coerce(other) * -1.0)

    def __rsub__(self, other) -> "LinearExpression":
        return self._coerce(other) - self

    def __mul__(self, coef: float) -> "LinearExpression":
        coef = float(coef)
        return LinearExpression({ref: c * coef for ref, c in self.terms.items()}, self.constant * coef)

    __rmul__ = __mul__

    def __neg__(self) -> "LinearExpression":
        return self * -1.0

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        parts = [f"{coef:+g}*{ref.qualified_name}" for ref, coef in self.sorted_terms()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return " ".join(parts)


ExprLike = Union[LinearExpression, VariableRef]


@dataclass
class Constraint:
    """One linear row: ``expr (sense) rhs``, owned by a node or an edge."""

    expr: LinearExpression
    sense: Sense
    rhs: float
    owner: str
    uid: str

    def violation(self, values: Mapping[VariableRef, float]) -> float:
        lhs = self.expr.evaluate(values)
        if self.sense == "le":
            return max(0.0, lhs - self.rhs)
        if self.sense == "ge":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


def _check_expr(expr: ExprLike) -> LinearExpression:
    expr = LinearExpression._coerce(expr)
    if expr.is_empty():
        raise SingleNodeError("constraint expression has no variables")
    return expr


def _check_sense(sense: str) -> Sense:
    if sense not in SENSES:
        raise ValueError(f"sense must be one of {SENSES}, got {sense!r}")
    return sense  # type: ignore[return-value]


def _check_rhs(rhs: float) -> float:
    rhs = float(rhs)
    if not math.isfinite(rhs):
        raise InvalidBoundsError("constraint right-hand side must be finite")
    return rhs


class Node:
    """A problem block: variables, constraints over them, and an objective."""

    def __init__(self, node_id: Optional[str] = None):
        self.id = node_id if node_id is not None else f"n{next(_node_counter)}"
        self.variables: list[VariableRef] = []
        self._by_name: dict[str, VariableRef] = {}
        self.constraints: list[Constraint] = []
        self.objective = LinearExpression()

    def add_variable(
        self,
        name: str,
        lower: float = -math.inf,
        upper: float = math.inf,
        integrality: Integrality = "continuous",
    ) -> VariableRef:
        if name in self._by_name:
            raise DuplicateNameError(f"node {self.id!r} already has a variable {name!r}")
        lower, upper = float(lower), float(upper)
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise InvalidBoundsError(f"bad bounds [{lower}, {upper}] for {self.id}.{name}")
        if integrality not in INTEGRALITIES:
            raise ValueError(f"integrality must be one of {INTEGRALITIES}")
        if integrality == "binary":
            # binary implies an effective domain inside [0, 1]
            lower, upper = max(lower, 0.0), min(upper, 1.0)
            if lower > upper:
                raise InvalidBoundsError(f"binary bounds for {self.id}.{name} exclude [0, 1]")
        ref = VariableRef(self.id, name, lower, upper, integrality)
        self.variables.append(ref)
        self._by_name[name] = ref
        return ref

    def var(self, name: str) -> VariableRef:
        return self._by_name[name]

    def _owns_all(self, expr: LinearExpression) -> None:
        for ref in expr.terms:
            if self._by_name.get(ref.name) != ref or ref.node_id != self.id:
                raise ForeignVariableError(
                    f"{ref.qualified_name} does not belong to node {self.id!r}"
                )

    def add_constraint(self, expr: ExprLike, sense: Sense, rhs: float) -> Constraint:
        expr = _check_expr(expr)
        self._owns_all(expr)
        con = Constraint(
            expr, _check_sense(sense), _check_rhs(rhs), self.id, f"{self.id}#c{len(self.constraints)}"
        )
        self.constraints.append(con)
        return con

    def set_objective(self, expr: ExprLike) -> None:
        expr = LinearExpression._coerce(expr)
        self._owns_all(expr)
        self.objective = expr

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Node({self.id}, {len(self.variables)} vars)"


class Edge:
    """Linking constraints over a fixed set of at least two nodes."""

    def __init__(self, edge_id: str, incident_nodes: frozenset[str]):
        self.id = edge_id
        self.incident_nodes = incident_nodes
        self.constraints: list[Constraint] = []

    def add(self, expr: LinearExpression, sense: Sense, rhs: float) -> Constraint:
        con = Constraint(expr, sense, rhs, self.id, f"{self.id}#c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Edge({self.id}, nodes={sorted(self.incident_nodes)})"


class Graph:
    """A hierarchical model: local nodes and edges plus nested subgraphs.

    The objective is either the sum of all node objectives (the default,
    and what :meth:`set_to_node_objectives` pins down explicitly) or a
    single explicit expression set with :meth:`set_objective`.
    """

    def __init__(self, graph_id: Optional[str] = None, *, allow_overlap: bool = False):
        self.id = graph_id if graph_id is not None else f"g{next(_graph_counter)}"
        self.allow_overlap = allow_overlap
        self._nodes: list[Node] = []
        self._edges: list[Edge] = []
        self._subgraphs: list[Graph] = []
        self._parent: Optional[Graph] = None
        self._edge_counter = 0
        self.objective_mode: Literal["node_objectives", "explicit"] = "node_objectives"
        self._explicit_objective: Optional[LinearExpression] = None

    # -- enumeration -------------------------------------------------------
    def local_nodes(self) -> list[Node]:
        return list(self._nodes)

    def local_edges(self) -> list[Edge]:
        return list(self._edges)

    def local_subgraphs(self) -> list["Graph"]:
        return list(self._subgraphs)

    def all_nodes(self) -> list[Node]:
        """All nodes at any depth, depth-first, deduplicated by identity."""
        seen: dict[str, Node] = {}
        for node in self._iter_nodes():
            if node.id not in seen:
                seen[node.id] = node
        return list(seen.values())

    def _iter_nodes(self) -> Iterator[Node]:
        yield from self._nodes
        for sub in self._subgraphs:
            yield from sub._iter_nodes()

    def all_edges(self) -> list[Edge]:
        out = list(self._edges)
        for sub in self._subgraphs:
            out.extend(sub.all_edges())
        return out

    def all_subgraphs(self) -> list["Graph"]:
        out = []
        for sub in self._subgraphs:
            out.append(sub)
            out.extend(sub.all_subgraphs())
        return out

    def depth(self) -> int:
        if not self._subgraphs:
            return 0
        return 1 + max(sub.depth() for sub in self._subgraphs)

    def root(self) -> "Graph":
        g = self
        while g._parent is not None:
            g = g._parent
        return g

    def find_node(self, node_id: str) -> Node:
        for node in self._iter_nodes():
            if node.id == node_id:
                return node
        raise KeyError(f"no node {node_id!r} in graph {self.id!r}")

    def find_subgraph(self, graph_id: str) -> "Graph":
        for sub in self.all_subgraphs():
            if sub.id == graph_id:
                return sub
        raise KeyError(f"no subgraph {graph_id!r} in graph {self.id!r}")

    # -- construction ------------------------------------------------------
    def add_node(self, node_id: Optional[str] = None) -> Node:
        node = Node(node_id)
        self.attach_node(node)
        return node

    def attach_node(self, node: Node) -> Node:
        root = self.root()
        for existing in root._iter_nodes():
            if existing.id == node.id:
                if existing is node and root.allow_overlap:
                    break  # shared node, explicitly permitted
                raise IdCollisionError(f"node id {node.id!r} already exists in this hierarchy")
        self._nodes.append(node)
        return node

    def add_subgraph(self, child: "Graph") -> "Graph":
        if child is self or self in ([child] + child.all_subgraphs()):
            raise CycleInNestingError("a graph cannot contain itself or an ancestor")
        if child._parent is not None:
            raise IdCollisionError(f"graph {child.id!r} is already nested elsewhere")
        root = self.root()
        taken_graph_ids = {root.id} | {g.id for g in root.all_subgraphs()}
        for g in [child] + child.all_subgraphs():
            if g.id in taken_graph_ids:
                raise IdCollisionError(f"subgraph id {g.id!r} already exists in this hierarchy")
        existing_nodes = {node.id: node for node in root._iter_nodes()}
        for node in child._iter_nodes():
            clash = existing_nodes.get(node.id)
            if clash is not None and not (clash is node and (root.allow_overlap or self.allow_overlap)):
                raise IdCollisionError(f"node id {node.id!r} already exists in this hierarchy")
        self._subgraphs.append(child)
        child._parent = self
        return child

    def add_link_constraint(self, expr: ExprLike, sense: Sense, rhs: float) -> Edge:
        expr = _check_expr(expr)
        sense = _check_sense(sense)
        rhs = _check_rhs(rhs)
        owned = {node.id: node for node in self.all_nodes()}
        incident: set[str] = set()
        for ref in expr.terms:
            node = owned.get(ref.node_id)
            if node is None:
                raise NotOwnedError(
                    f"{ref.qualified_name} lies outside graph {self.id!r}; "
                    "add the link on a graph that contains every referenced node"
                )
            if node._by_name.get(ref.name) != ref:
                raise NotOwnedError(f"{ref.qualified_name} is not a declared variable")
            incident.add(ref.node_id)
        if len(incident) < 2:
            raise SingleNodeError("a link constraint must couple at least two nodes")
        key = frozenset(incident)
        for edge in self._edges:
            if edge.incident_nodes == key:
                edge.add(expr, sense, rhs)
                return edge
        edge = Edge(f"{self.id}.e{self._edge_counter}", key)
        self._edge_counter += 1
        edge.add(expr, sense, rhs)
        self._edges.append(edge)
        return edge

    # -- objectives --------------------------------------------------------
    def set_to_node_objectives(self) -> None:
        self.objective_mode = "node_objectives"
        self._explicit_objective = None

    def set_objective(self, expr: ExprLike) -> None:
        expr = LinearExpression._coerce(expr)
        owned = {node.id: node for node in self.all_nodes()}
        for ref in expr.terms:
            node = owned.get(ref.node_id)
            if node is None or node._by_name.get(ref.name) != ref:
                raise NotOwnedError(f"objective references {ref.qualified_name} outside the graph")
        self.objective_mode = "explicit"
        self._explicit_objective = expr

    def effective_objective(self) -> LinearExpression:
        if self.objective_mode == "explicit":
            assert self._explicit_objective is not None
            return self._explicit_objective
        total = LinearExpression()
        for node in self.all_nodes():
            total = total + node.objective
        return total

    # -- queries used throughout the library -------------------------------
    def all_variables(self) -> list[VariableRef]:
        out: list[VariableRef] = []
        for node in self.all_nodes():
            out.extend(node.variables)
        return out

    def variable_by_qualified_name(self, qualified: str) -> VariableRef:
        node_id, _, name = qualified.rpartition(".")
        node = self.find_node(node_id)
        return node.var(name)

    def owner_subgraph(self, node_id: str) -> Optional["Graph"]:
        """First-level subgraph containing the node, or None if local/absent."""
        for sub in self._subgraphs:
            if any(n.id == node_id for n in sub.all_nodes()):
                return sub
        return None

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"Graph({self.id}, nodes={len(self._nodes)}, edges={len(self._edges)}, "
            f"subgraphs={len(self._subgraphs)})"
        )


def validate_graph(graph: Graph) -> None:
    """Re-check the structural invariants of a built graph.

    Raises the matching construction error if node sets are not disjoint
    (without the overlap flag), edge incidences drift from their constraint
    expressions, or an edge references nodes outside its owner.
    """
    ids_seen: set[str] = set()
    for sub in [graph] + graph.all_subgraphs():
        local_ids = {n.id for n in sub.local_nodes()}
        overlap = ids_seen & local_ids
        if overlap and not graph.allow_overlap:
            raise IdCollisionError(f"nodes {sorted(overlap)} appear in more than one graph")
        ids_seen |= local_ids
    for sub in [graph] + graph.all_subgraphs():
        contained = {n.id for n in sub.all_nodes()}
        for edge in sub.local_edges():
            if not edge.incident_nodes <= contained:
                raise NotOwnedError(f"edge {edge.id} references nodes outside graph {sub.id!r}")
            touched: set[str] = set()
            for con in edge.constraints:
                touched |= {ref.node_id for ref in con.expr.terms}
            if touched != set(edge.incident_nodes):
                raise NotOwnedError(f"edge {edge.id} incidence drifted from its constraints")


def linear(terms: Iterable[tuple[VariableRef, float]], constant: float = 0.0) -> LinearExpression:
    """Convenience constructor used by fixtures and tests."""
    acc: dict[VariableRef, float] = {}
    for ref, coef in terms:
        acc[ref] = acc.get(ref, 0.0) + float(coef)
    return LinearExpression(acc, constant)
