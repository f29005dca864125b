"""Hybrid two-slice dynamic Bayesian networks.

A `DbnSpec` declares one template slice: typed nodes, intra-slice (lag 0)
and previous-slice (lag 1) edges, one CPD per node, and explicit slice-1
priors for every node whose CPD reaches back a slice. Probabilities and
affine coefficients are exact rationals; "continuous" nodes are
point-mass-valued (the zero-variance case of a conditional linear Gaussian),
so a categorical child of a continuous parent needs only a threshold.

CPD kinds:
  - TableCpd: categorical child, categorical parents, exact rational rows.
  - LinearDiracCpd: continuous child; one continuous parent mapped through
    an affine form selected by the discrete parents.
  - ThresholdCpd: binary child; P(child="1") = H(a*q + c) with H the hard
    threshold centered at 1/2.
  - SoftThresholdCpd: same with a finite-steepness logistic (soft inference
    mode only).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

from .automata import Violation
from .stackcodec import format_rational, parse_rational

ROLE_INPUT = "input"
ROLE_HIDDEN = "hidden"
ROLE_OUTPUT = "output"
ROLES = (ROLE_INPUT, ROLE_HIDDEN, ROLE_OUTPUT)

KIND_CATEGORICAL = "categorical"
KIND_CONTINUOUS = "continuous_dirac"

# (template node name, lag): lag 0 = same slice, lag 1 = previous slice.
ParentRef = tuple[str, int]

ONE = Fraction(1)


class ValidationFailed(ValueError):
    """Operation attempted on a spec that does not validate."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"{len(self.violations)} violation(s): {lines}{more}")


@dataclass(frozen=True)
class NodeDecl:
    name: str
    role: str
    kind: str
    outcomes: tuple[str, ...] = ()

    @property
    def is_continuous(self) -> bool:
        return self.kind == KIND_CONTINUOUS


@dataclass(frozen=True)
class TableCpd:
    parents: tuple[ParentRef, ...]
    rows: Mapping[tuple[str, ...], Mapping[str, Fraction]]


@dataclass(frozen=True)
class LinearDiracCpd:
    continuous_parent: ParentRef
    discrete_parents: tuple[ParentRef, ...]
    cases: Mapping[tuple[str, ...], tuple[Fraction, Fraction]]  # -> (a, c): a*q + c

    @property
    def parents(self) -> tuple[ParentRef, ...]:
        return (self.continuous_parent,) + self.discrete_parents


@dataclass(frozen=True)
class ThresholdCpd:
    parent: ParentRef
    a: Fraction
    c: Fraction

    @property
    def parents(self) -> tuple[ParentRef, ...]:
        return (self.parent,)


@dataclass(frozen=True)
class SoftThresholdCpd:
    parent: ParentRef
    a: Fraction
    c: Fraction
    steepness: float

    @property
    def parents(self) -> tuple[ParentRef, ...]:
        return (self.parent,)


Cpd = Union[TableCpd, LinearDiracCpd, ThresholdCpd, SoftThresholdCpd]


@dataclass(frozen=True)
class CategoricalPrior:
    probs: Mapping[str, Fraction]


@dataclass(frozen=True)
class DiracPrior:
    value: Fraction


Prior = Union[CategoricalPrior, DiracPrior]


@dataclass(frozen=True)
class DbnSpec:
    nodes: tuple[NodeDecl, ...]
    edges: tuple[tuple[str, str, int], ...]  # (parent, child, lag)
    priors: Mapping[str, Prior]
    cpds: Mapping[str, Cpd]

    def node(self, name: str) -> NodeDecl:
        return self.node_map[name]

    @property
    def node_map(self) -> dict[str, NodeDecl]:
        return {n.name: n for n in self.nodes}

    def transition_nodes(self) -> list[str]:
        """Nodes whose CPD conditions on the previous slice (get B1 priors)."""
        out = []
        for decl in self.nodes:
            cpd = self.cpds.get(decl.name)
            if cpd is not None and any(lag == 1 for _, lag in cpd.parents):
                out.append(decl.name)
        return out

    def interface_nodes(self) -> list[str]:
        """Nodes with lag-1 children (the 2TBN frontier)."""
        targets = {parent for parent, _child, lag in self.edges if lag == 1}
        return [n.name for n in self.nodes if n.name in targets]


# ---------------------------------------------------------------------------
# Validation


def _check_table(decl: NodeDecl, cpd: TableCpd, nodes: dict[str, NodeDecl], out: list[Violation]) -> None:
    parent_decls = []
    for pname, _lag in cpd.parents:
        pdecl = nodes.get(pname)
        if pdecl is None:
            return  # edge check already reported it
        if pdecl.is_continuous:
            out.append(Violation("table-continuous-parent", decl.name, f"table parent {pname} is continuous"))
            return
        parent_decls.append(pdecl)
    arity = len(cpd.parents)
    seen = set()
    for key, dist in cpd.rows.items():
        subject = f"{decl.name}{key}"
        if len(key) != arity:
            out.append(Violation("row-arity", subject, f"row key has {len(key)} entries, expected {arity}"))
            continue
        seen.add(key)
        for value, pdecl in zip(key, parent_decls):
            if value not in pdecl.outcomes:
                out.append(Violation("unknown-outcome", subject, f"{value!r} not an outcome of {pdecl.name}"))
        total = Fraction(0)
        for outcome, prob in dist.items():
            if outcome not in decl.outcomes:
                out.append(Violation("unknown-outcome", subject, f"{outcome!r} not an outcome of {decl.name}"))
            if prob < 0:
                out.append(Violation("negative-prob", subject, f"P({outcome})={prob} < 0"))
            total += prob
        if total != ONE:
            out.append(Violation("row-sum", subject, f"row sums to {total}, not 1"))
    for combo in _combinations(parent_decls):
        if combo not in seen:
            out.append(Violation("missing-row", f"{decl.name}{combo}", "no row for this parent combination"))


def _combinations(parent_decls: Sequence[NodeDecl]):
    if not parent_decls:
        yield ()
        return
    head, *rest = parent_decls
    for value in head.outcomes:
        for tail in _combinations(rest):
            yield (value,) + tail


def validate(spec: DbnSpec) -> list[Violation]:
    """Structural violations; empty list iff the spec is well-formed."""
    out: list[Violation] = []
    nodes: dict[str, NodeDecl] = {}
    for decl in spec.nodes:
        if decl.name in nodes:
            out.append(Violation("duplicate-node", decl.name, "node declared twice"))
        nodes[decl.name] = decl
        if decl.role not in ROLES:
            out.append(Violation("bad-role", decl.name, f"role {decl.role!r} not in {ROLES}"))
        if decl.kind == KIND_CATEGORICAL:
            if not decl.outcomes:
                out.append(Violation("empty-outcomes", decl.name, "categorical node needs outcomes"))
            if len(set(decl.outcomes)) != len(decl.outcomes):
                out.append(Violation("duplicate-outcome", decl.name, "outcomes must be distinct"))
        elif decl.kind == KIND_CONTINUOUS:
            if decl.outcomes:
                out.append(Violation("bad-kind", decl.name, "continuous node must not list outcomes"))
        else:
            out.append(Violation("bad-kind", decl.name, f"kind {decl.kind!r} unknown"))

    declared_parents: dict[str, list[ParentRef]] = {name: [] for name in nodes}
    lag0_edges: list[tuple[str, str]] = []
    for parent, child, lag in spec.edges:
        subject = f"{parent}->{child}@{lag}"
        if parent not in nodes or child not in nodes:
            out.append(Violation("unknown-node", subject, "edge endpoint not declared"))
            continue
        if lag not in (0, 1):
            out.append(Violation("bad-lag", subject, "only lags 0 and 1 are allowed (first-order Markov)"))
            continue
        declared_parents[child].append((parent, lag))
        if lag == 0:
            lag0_edges.append((parent, child))

    # lag-0 edges must form a DAG
    order, leftover = _kahn(list(nodes), lag0_edges)
    for name in sorted(leftover):
        out.append(Violation("cycle", name, "node lies on a lag-0 cycle"))

    transition = set()
    for name, decl in nodes.items():
        cpd = spec.cpds.get(name)
        if cpd is None:
            out.append(Violation("missing-cpd", name, "node has no CPD"))
            continue
        if any(lag == 1 for _, lag in cpd.parents):
            transition.add(name)
        if sorted(cpd.parents) != sorted(declared_parents.get(name, [])):
            out.append(
                Violation(
                    "cpd-parent-mismatch",
                    name,
                    f"CPD parents {sorted(cpd.parents)} != declared edges {sorted(declared_parents.get(name, []))}",
                )
            )
            continue
        if isinstance(cpd, TableCpd):
            if decl.is_continuous:
                out.append(Violation("bad-cpd-kind", name, "continuous node cannot have a table CPD"))
            else:
                _check_table(decl, cpd, nodes, out)
        elif isinstance(cpd, LinearDiracCpd):
            if not decl.is_continuous:
                out.append(Violation("bad-cpd-kind", name, "linear-dirac child must be continuous"))
            pname = cpd.continuous_parent[0]
            if pname in nodes and not nodes[pname].is_continuous:
                out.append(Violation("bad-cpd-kind", name, f"linear-dirac parent {pname} must be continuous"))
            discrete_decls = [nodes[p] for p, _ in cpd.discrete_parents if p in nodes]
            if any(d.is_continuous for d in discrete_decls):
                out.append(Violation("bad-cpd-kind", name, "linear-dirac discrete parents must be categorical"))
            else:
                seen = set(cpd.cases)
                for combo in _combinations(discrete_decls):
                    if combo not in seen:
                        out.append(Violation("missing-case", f"{name}{combo}", "no affine case for this combination"))
        elif isinstance(cpd, (ThresholdCpd, SoftThresholdCpd)):
            if decl.is_continuous or tuple(decl.outcomes) != ("0", "1"):
                out.append(Violation("bad-cpd-kind", name, "threshold child must be binary with outcomes ('0','1')"))
            pname = cpd.parent[0]
            if pname in nodes and not nodes[pname].is_continuous:
                out.append(Violation("bad-cpd-kind", name, f"threshold parent {pname} must be continuous"))
            if isinstance(cpd, SoftThresholdCpd) and not cpd.steepness > 0:
                out.append(Violation("bad-cpd-kind", name, "soft threshold steepness must be positive"))
        else:
            out.append(Violation("bad-cpd-kind", name, f"unknown CPD type {type(cpd).__name__}"))
    for name in spec.cpds:
        if name not in nodes:
            out.append(Violation("unknown-node", name, "CPD for undeclared node"))

    # priors: exactly the transition nodes carry them
    for name in sorted(transition):
        prior = spec.priors.get(name)
        decl = nodes[name]
        if prior is None:
            out.append(Violation("prior-missing", name, "transition node needs a slice-1 prior"))
        elif decl.is_continuous:
            if not isinstance(prior, DiracPrior):
                out.append(Violation("bad-prior", name, "continuous node needs a dirac prior"))
        else:
            if not isinstance(prior, CategoricalPrior):
                out.append(Violation("bad-prior", name, "categorical node needs a categorical prior"))
            else:
                total = Fraction(0)
                for outcome, prob in prior.probs.items():
                    if outcome not in decl.outcomes:
                        out.append(Violation("unknown-outcome", name, f"prior outcome {outcome!r} undeclared"))
                    if prob < 0:
                        out.append(Violation("negative-prob", name, f"prior P({outcome})={prob} < 0"))
                    total += prob
                if total != ONE:
                    out.append(Violation("row-sum", name, f"prior sums to {total}, not 1"))
    for name in spec.priors:
        if name in nodes and name not in transition:
            out.append(Violation("prior-extra", name, "prior given for a node whose CPD is within-slice"))

    # inputs are exogenous evidence: no parents, categorical
    for decl in spec.nodes:
        if decl.role == ROLE_INPUT:
            if declared_parents.get(decl.name):
                out.append(Violation("input-with-parents", decl.name, "input nodes must be parentless"))
            if decl.is_continuous:
                out.append(Violation("bad-kind", decl.name, "input nodes must be categorical"))

    # transition nodes are computed before the next slice's evidence exists,
    # so their same-slice parents must be transition nodes themselves
    for name in sorted(transition):
        cpd = spec.cpds[name]
        for pname, lag in cpd.parents:
            if lag == 0 and pname not in transition:
                out.append(
                    Violation(
                        "transition-closure",
                        name,
                        f"lag-0 parent {pname} of a transition node must itself be a transition node",
                    )
                )
    return out


def _kahn(names: Sequence[str], edges: Sequence[tuple[str, str]]) -> tuple[list[str], set[str]]:
    """Deterministic topological sort (ties by name); returns (order, cyclic)."""
    indeg = {n: 0 for n in names}
    children: dict[str, list[str]] = {n: [] for n in names}
    for parent, child in edges:
        if parent in indeg and child in indeg:
            indeg[child] += 1
            children[parent].append(child)
    ready = sorted(n for n, d in indeg.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        inserts = []
        for child in children[node]:
            indeg[child] -= 1
            if indeg[child] == 0:
                inserts.append(child)
        for child in sorted(inserts):
            # keep `ready` sorted so the order is reproducible
            lo = 0
            while lo < len(ready) and ready[lo] < child:
                lo += 1
            ready.insert(lo, child)
    return order, {n for n, d in indeg.items() if d > 0}


def topological_order(spec: DbnSpec) -> list[str]:
    """Template nodes ordered so lag-0 parents precede children (name ties)."""
    violations = validate(spec)
    if violations:
        raise ValidationFailed(violations)
    lag0 = [(p, c) for p, c, lag in spec.edges if lag == 0]
    order, _ = _kahn([n.name for n in spec.nodes], lag0)
    return order


# ---------------------------------------------------------------------------
# Unrolling


@dataclass(frozen=True)
class UnrolledNode:
    label: str  # "Name@t"
    name: str
    t: int
    decl: NodeDecl
    parents: tuple[str, ...]  # labels, aligned with `model` parent order
    model: Union[Prior, Cpd]


@dataclass(frozen=True)
class UnrolledNetwork:
    spec: DbnSpec
    T: int
    nodes: tuple[UnrolledNode, ...]  # in global topological order

    @property
    def edge_count(self) -> int:
        return sum(len(n.parents) for n in self.nodes)

    def label(self, name: str, t: int) -> str:
        return f"{name}@{t}"


def unroll(spec: DbnSpec, T: int) -> UnrolledNetwork:
    """Materialize T slices: slice 1 takes priors, later slices rebind lag-1
    parents to the previous slice."""
    if T < 1:
        raise ValueError("T must be >= 1")
    order = topological_order(spec)  # validates
    transition = set(spec.transition_nodes())
    nodes: list[UnrolledNode] = []
    node_map = spec.node_map
    for t in range(1, T + 1):
        for name in order:
            decl = node_map[name]
            cpd = spec.cpds[name]
            if t == 1 and name in transition:
                nodes.append(UnrolledNode(f"{name}@1", name, 1, decl, (), spec.priors[name]))
                continue
            parents = tuple(f"{p}@{t - lag}" for p, lag in cpd.parents)
            nodes.append(UnrolledNode(f"{name}@{t}", name, t, decl, parents, cpd))
    return UnrolledNetwork(spec=spec, T=T, nodes=tuple(nodes))


# ---------------------------------------------------------------------------
# JSON round-trip


def _ref_to_json(ref: ParentRef) -> list:
    return [ref[0], ref[1]]


def _cpd_to_json(cpd: Cpd) -> dict:
    if isinstance(cpd, TableCpd):
        return {
            "type": "table",
            "parents": [_ref_to_json(p) for p in cpd.parents],
            "rows": [
                {"given": list(key), "probs": {o: format_rational(p) for o, p in dist.items()}}
                for key, dist in sorted(cpd.rows.items())
            ],
        }
    if isinstance(cpd, LinearDiracCpd):
        return {
            "type": "linear_dirac",
            "continuous_parent": _ref_to_json(cpd.continuous_parent),
            "discrete_parents": [_ref_to_json(p) for p in cpd.discrete_parents],
            "cases": [
                {"given": list(key), "a": format_rational(a), "c": format_rational(c)}
                for key, (a, c) in sorted(cpd.cases.items())
            ],
        }
    if isinstance(cpd, ThresholdCpd):
        return {
            "type": "threshold",
            "parent": _ref_to_json(cpd.parent),
            "a": format_rational(cpd.a),
            "c": format_rational(cpd.c),
        }
    if isinstance(cpd, SoftThresholdCpd):
        return {
            "type": "soft_threshold",
            "parent": _ref_to_json(cpd.parent),
            "a": format_rational(cpd.a),
            "c": format_rational(cpd.c),
            "k": cpd.steepness,
        }
    raise TypeError(f"unknown CPD type {type(cpd).__name__}")


def _cpd_from_json(doc: Mapping[str, Any]) -> Cpd:
    kind = doc.get("type")
    if kind == "table":
        return TableCpd(
            parents=tuple((p, lag) for p, lag in doc["parents"]),
            rows={
                tuple(row["given"]): {o: parse_rational(p) for o, p in row["probs"].items()}
                for row in doc["rows"]
            },
        )
    if kind == "linear_dirac":
        return LinearDiracCpd(
            continuous_parent=tuple(doc["continuous_parent"]),
            discrete_parents=tuple((p, lag) for p, lag in doc["discrete_parents"]),
            cases={
                tuple(case["given"]): (parse_rational(case["a"]), parse_rational(case["c"]))
                for case in doc["cases"]
            },
        )
    if kind == "threshold":
        return ThresholdCpd(
            parent=tuple(doc["parent"]), a=parse_rational(doc["a"]), c=parse_rational(doc["c"])
        )
    if kind == "soft_threshold":
        return SoftThresholdCpd(
            parent=tuple(doc["parent"]),
            a=parse_rational(doc["a"]),
            c=parse_rational(doc["c"]),
            steepness=float(doc["k"]),
        )
    raise ValueError(f"unknown CPD type {kind!r}")


def spec_to_json(spec: DbnSpec) -> dict:
    priors = {}
    for name, prior in sorted(spec.priors.items()):
        if isinstance(prior, DiracPrior):
            priors[name] = {"type": "dirac", "value": format_rational(prior.value)}
        else:
            priors[name] = {
                "type": "categorical",
                "probs": {o: format_rational(p) for o, p in prior.probs.items()},
            }
    return {
        "nodes": [
            {
                "name": n.name,
                "role": n.role,
                "kind": n.kind,
                **({"outcomes": list(n.outcomes)} if n.kind == KIND_CATEGORICAL else {}),
            }
            for n in spec.nodes
        ],
        "edges": [{"parent": p, "child": c, "lag": lag} for p, c, lag in spec.edges],
        "prior": priors,
        "cpds": {name: _cpd_to_json(cpd) for name, cpd in sorted(spec.cpds.items())},
    }


def spec_from_json(doc: Mapping[str, Any]) -> DbnSpec:
    nodes = tuple(
        NodeDecl(
            name=n["name"],
            role=n["role"],
            kind=n["kind"],
            outcomes=tuple(n.get("outcomes", ())),
        )
        for n in doc["nodes"]
    )
    edges = tuple((e["parent"], e["child"], e["lag"]) for e in doc["edges"])
    priors: dict[str, Prior] = {}
    for name, p in doc.get("prior", {}).items():
        if p["type"] == "dirac":
            priors[name] = DiracPrior(parse_rational(p["value"]))
        elif p["type"] == "categorical":
            priors[name] = CategoricalPrior({o: parse_rational(v) for o, v in p["probs"].items()})
        else:
            raise ValueError(f"unknown prior type {p['type']!r} for {name}")
    cpds = {name: _cpd_from_json(c) for name, c in doc.get("cpds", {}).items()}
    return DbnSpec(nodes=nodes, edges=edges, priors=priors, cpds=cpds)


def load_spec(path: str | Path) -> DbnSpec:
    spec, _metadata = load_network(path)
    return spec


def load_network(path: str | Path) -> tuple[DbnSpec, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return spec_from_json(doc), dict(doc.get("metadata", {}))


def save_spec(spec: DbnSpec, path: str | Path, metadata: Mapping[str, Any] | None = None) -> None:
    doc = spec_to_json(spec)
    if metadata:
        doc["metadata"] = dict(metadata)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
