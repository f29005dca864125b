"""Forward filtering over hybrid 2-slice networks.

The filtered belief is a weighted mixture of components, each pairing an
assignment of the categorical state-carrying nodes with exact rational
values for the continuous ones. In exact mode every CPD either is
deterministic (affine maps, hard thresholds) or branches into finitely many
exactly-weighted children (rational tables), so the posterior is computed
with no integration and no rounding: on a compiled machine network the
mixture stays a single point mass that walks through the machine's
configurations.

One `filter_step` consumes the evidence for one slice and produces the
slice's filtered marginals plus the predicted joint over the nodes that
carry state into the next slice (the nodes whose CPDs have lag-1 parents).
Between steps only that predicted joint is kept; everything else is
marginalized out, and duplicate components are merged by exact equality.

Soft mode replaces every hard threshold with a logistic of finite
steepness k. Weights become binary64 and probability begins to leak off
the true trajectory, which is the point: it measures how fast the
simulation degrades when the zero-variance reads are relaxed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence

from .dbn import (
    CategoricalPrior,
    Cpd,
    DbnSpec,
    DiracPrior,
    LinearDiracCpd,
    SoftThresholdCpd,
    TableCpd,
    ThresholdCpd,
    UnrolledNetwork,
    ValidationFailed,
    unroll,
    validate,
)
from .stackcodec import format_rational, heaviside, logistic

DEFAULT_COMPONENT_CAP = 4096
DEFAULT_SUPPORT_CAP = 1 << 22

HALT_OUTCOMES = frozenset(("run", "halt_0", "halt_1"))
ONE_HALF = Fraction(1, 2)


class ZeroEvidenceProbability(ArithmeticError):
    """Observed evidence has probability 0 under the predicted belief."""


class ComponentOverflow(RuntimeError):
    """Mixture grew past the configured component cap; failing loudly
    beats approximating silently."""


class SupportTooLarge(RuntimeError):
    """Unrolled joint is too big to enumerate at desk scale."""


@dataclass(frozen=True)
class Mode:
    """Inference mode: exact rational filtering, or soft with logistic
    thresholds of steepness k and binary64 weights."""

    kind: str
    steepness: float | None = None

    @staticmethod
    def exact() -> "Mode":
        return EXACT

    @staticmethod
    def soft(k: float) -> "Mode":
        if not k > 0:
            raise ValueError("soft-mode steepness must be positive")
        return Mode("soft", float(k))

    @property
    def is_exact(self) -> bool:
        return self.kind == "exact"


EXACT = Mode("exact")


class OpCounter:
    """Counts rational/weight arithmetic operations (not bit operations),
    for checking that per-step work does not depend on the step index."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def reset(self) -> None:
        self.count = 0


@dataclass(frozen=True)
class BeliefComponent:
    weight: object  # Fraction in exact mode, float in soft mode
    discrete_assignment: Mapping[str, str]
    continuous_values: Mapping[str, Fraction]

    def key(self) -> tuple:
        return (
            tuple(sorted(self.discrete_assignment.items())),
            tuple(sorted(self.continuous_values.items())),
        )


@dataclass(frozen=True)
class BeliefState:
    components: tuple[BeliefComponent, ...]
    step_index: int

    def total_weight(self):
        return sum(c.weight for c in self.components)

    def single(self) -> BeliefComponent:
        if len(self.components) != 1:
            raise ValueError(f"belief has {len(self.components)} components, not 1")
        return self.components[0]


@dataclass(frozen=True)
class TraceRecord:
    """One filtering step: the slice's filtered marginals, the predicted
    state-carrying joint for the next slice, and the halting decision."""

    step: int
    evidence: Mapping[str, str]
    marginals: Mapping[str, Mapping]  # node -> {outcome or Fraction: weight}
    predicted: Mapping[str, Mapping]  # transition node -> same, given evidence so far
    decision: str  # "run" | "accept" | "reject"
    components: int

    def to_json_dict(self, exact: bool = True) -> dict:
        def prob(p):
            return format_rational(p) if exact else float(p)

        def marg(m):
            if not m:
                return {}
            keys = sorted(m)
            if isinstance(keys[0], Fraction):
                return {format_rational(k): prob(m[k]) for k in keys}
            return {k: prob(m[k]) for k in keys}

        return {
            "step": self.step,
            "evidence": dict(sorted(self.evidence.items())),
            "marginals": {name: marg(self.marginals[name]) for name in sorted(self.marginals)},
            "predicted": {name: marg(self.predicted[name]) for name in sorted(self.predicted)},
            "decision": self.decision,
            "components": self.components,
        }


@dataclass(frozen=True)
class DecideResult:
    verdict: str  # "accept" | "reject" | "timeout"
    step: int | None
    records: tuple[TraceRecord, ...]


# ---------------------------------------------------------------------------
# Engine plan


@dataclass(frozen=True)
class _Plan:
    spec: DbnSpec
    extension_order: tuple[str, ...]  # slice completion, lag-0 parents first
    transition_order: tuple[str, ...]  # state-carrying nodes, lag-0-among-themselves first
    input_nodes: tuple[str, ...]
    kinds: Mapping[str, str]
    decision_node: str | None  # output node over {run, halt_0, halt_1}


def _plan(spec: DbnSpec) -> _Plan:
    from .dbn import _kahn  # deterministic topological order

    order, _ = _kahn([n.name for n in spec.nodes], [(p, c) for p, c, lag in spec.edges if lag == 0])
    transition = set(spec.transition_nodes())
    node_map = spec.node_map
    decision = None
    for decl in spec.nodes:
        if decl.role == "output" and set(decl.outcomes) == HALT_OUTCOMES:
            cpd = spec.cpds[decl.name]
            if isinstance(cpd, TableCpd) and all(
                lag == 0 and p in transition for p, lag in cpd.parents
            ):
                decision = decl.name
                break
    return _Plan(
        spec=spec,
        extension_order=tuple(n for n in order if n not in transition),
        transition_order=tuple(n for n in order if n in transition),
        input_nodes=tuple(n.name for n in spec.nodes if n.role == "input"),
        kinds={n.name: n.kind for n in spec.nodes},
        decision_node=decision,
    )


def _parent_values(parents, disc, cont, prev_disc=None, prev_cont=None):
    values = []
    for name, lag in parents:
        if lag == 1:
            src_d, src_c = prev_disc, prev_cont
        else:
            src_d, src_c = disc, cont
        values.append(src_d[name] if name in src_d else src_c[name])
    return tuple(values)


def _branches(cpd: Cpd, mode: Mode, ops: OpCounter, disc, cont, prev_disc, prev_cont):
    """All (value, weight-factor) branches of one CPD evaluation.

    Categorical branches carry probabilities; deterministic continuous and
    hard-threshold evaluations return a single branch of factor 1 (None).
    """
    if isinstance(cpd, TableCpd):
        key = _parent_values(cpd.parents, disc, cont, prev_disc, prev_cont)
        row = cpd.rows[key]
        if mode.is_exact:
            return [(outcome, p) for outcome, p in row.items() if p != 0]
        return [(outcome, float(p)) for outcome, p in row.items() if p != 0]
    if isinstance(cpd, LinearDiracCpd):
        key = _parent_values(cpd.discrete_parents, disc, cont, prev_disc, prev_cont)
        a, c = cpd.cases[key]
        (qname, qlag) = cpd.continuous_parent
        q = (prev_cont if qlag == 1 else cont)[qname]
        ops.count += 2
        return [(a * q + c, None)]
    if isinstance(cpd, (ThresholdCpd, SoftThresholdCpd)):
        (qname, qlag) = cpd.parent
        q = (prev_cont if qlag == 1 else cont)[qname]
        ops.count += 3  # affine + compare / logistic
        x = cpd.a * q + cpd.c
        if isinstance(cpd, ThresholdCpd) and mode.is_exact:
            return [(str(heaviside(x)), None)]
        if mode.is_exact:
            raise ValueError("SoftThreshold CPD requires soft mode")
        k = cpd.steepness if isinstance(cpd, SoftThresholdCpd) else mode.steepness
        p1 = logistic(x, k)
        return [("1", p1), ("0", 1.0 - p1)]
    raise TypeError(f"unknown CPD type {type(cpd).__name__}")


def _apply_branches(comps, name, is_continuous, branch_fn, ops):
    """Extend components in slot (disc, cont); multi-branch copies dicts."""
    out = []
    for comp in comps:
        branches = branch_fn(comp)
        if len(branches) == 1:
            value, factor = branches[0]
            if is_continuous:
                comp[2][name] = value
            else:
                comp[1][name] = value
            if factor is not None:
                ops.count += 1
                comp[0] = comp[0] * factor
            out.append(comp)
            continue
        for value, factor in branches:
            disc = dict(comp[1])
            cont = dict(comp[2])
            if is_continuous:
                cont[name] = value
            else:
                disc[name] = value
            ops.count += 1
            out.append([comp[0] * factor, disc, cont, *comp[3:]])
    return out


def init(spec: DbnSpec, mode: Mode = EXACT) -> BeliefState:
    """Slice-1 belief from the priors; deterministic priors give exactly one
    component of weight 1."""
    violations = validate(spec)
    if violations:
        raise ValidationFailed(violations)
    one = Fraction(1) if mode.is_exact else 1.0
    comps = [[one, {}, {}]]
    for name in sorted(spec.priors):
        prior = spec.priors[name]
        if isinstance(prior, DiracPrior):
            for comp in comps:
                comp[2][name] = prior.value
        else:
            new = []
            for comp in comps:
                items = [(o, p) for o, p in prior.probs.items() if p != 0]
                for outcome, p in items:
                    disc = dict(comp[1])
                    disc[name] = outcome
                    new.append([comp[0] * (p if mode.is_exact else float(p)), disc, dict(comp[2])])
            comps = new
    components = _merged(comps, mode)
    return BeliefState(components=components, step_index=0)


def _merged(comps, mode: Mode) -> tuple[BeliefComponent, ...]:
    acc: dict[tuple, list] = {}
    for w, disc, cont, *_ in comps:
        key = (tuple(sorted(disc.items())), tuple(sorted(cont.items())))
        slot = acc.get(key)
        if slot is None:
            acc[key] = [w, disc, cont]
        else:
            slot[0] = slot[0] + w
    out = []
    for key in sorted(acc):
        w, disc, cont = acc[key]
        out.append(BeliefComponent(weight=w, discrete_assignment=disc, continuous_values=cont))
    return tuple(out)


def filter_step(
    spec: DbnSpec,
    belief: BeliefState,
    evidence: Mapping[str, str],
    mode: Mode = EXACT,
    ops: OpCounter | None = None,
    component_cap: int = DEFAULT_COMPONENT_CAP,
) -> tuple[BeliefState, TraceRecord]:
    """Advance one slice: complete it in topological order, condition on the
    slice's input evidence, record filtered marginals, then predict the
    state-carrying nodes of the next slice and marginalize everything else
    out (merging duplicate components)."""
    plan = _plan(spec)
    return _filter_step_planned(plan, belief, evidence, mode, ops or OpCounter(), component_cap)


def _filter_step_planned(
    plan: _Plan,
    belief: BeliefState,
    evidence: Mapping[str, str],
    mode: Mode,
    ops: OpCounter,
    component_cap: int,
) -> tuple[BeliefState, TraceRecord]:
    spec = plan.spec
    step = belief.step_index + 1
    for name in evidence:
        if name not in plan.input_nodes:
            raise ValueError(f"evidence given for non-input node {name!r}")
    for name in plan.input_nodes:
        if name not in evidence:
            raise ValueError(f"missing evidence for input node {name!r}")

    # working layout: [weight, slice_disc, slice_cont]
    comps = [[c.weight, dict(c.discrete_assignment), dict(c.continuous_values)] for c in belief.components]

    for name in plan.extension_order:
        cpd = spec.cpds[name]
        is_cont = plan.kinds[name] == "continuous_dirac"
        if name in plan.input_nodes:
            observed = evidence[name]
            decl = spec.node_map[name]
            if observed not in decl.outcomes:
                raise ValueError(f"evidence {observed!r} is not an outcome of {name}")

            def branch_fn(comp, cpd=cpd, observed=observed):
                row = dict(_branches(cpd, mode, ops, comp[1], comp[2], None, None))
                p = row.get(observed)
                if p is None:
                    return []
                return [(observed, p)]

        else:

            def branch_fn(comp, cpd=cpd):
                return _branches(cpd, mode, ops, comp[1], comp[2], None, None)

        comps = _apply_branches(comps, name, is_cont, branch_fn, ops)
        if not comps:
            raise ZeroEvidenceProbability(f"evidence {dict(evidence)} has probability 0 at step {step}")

    total = comps[0][0]
    for comp in comps[1:]:
        total = total + comp[0]
        ops.count += 1
    if total == 0:
        raise ZeroEvidenceProbability(f"evidence {dict(evidence)} has probability 0 at step {step}")
    for comp in comps:
        comp[0] = comp[0] / total
        ops.count += 1

    marginals = {name: {} for name in plan.kinds}
    for w, disc, cont in comps:
        for name, value in disc.items():
            slot = marginals[name]
            slot[value] = slot.get(value, 0) + w
            ops.count += 1
        for name, value in cont.items():
            slot = marginals[name]
            slot[value] = slot.get(value, 0) + w
            ops.count += 1

    # predict: slice t+1 values of the state-carrying nodes
    next_comps = [[w, {}, {}, disc, cont] for w, disc, cont in comps]
    for name in plan.transition_order:
        cpd = spec.cpds[name]
        is_cont = plan.kinds[name] == "continuous_dirac"

        def branch_fn(comp, cpd=cpd):
            return _branches(cpd, mode, ops, comp[1], comp[2], comp[3], comp[4])

        next_comps = _apply_branches(next_comps, name, is_cont, branch_fn, ops)

    components = _merged(next_comps, mode)
    if len(components) > component_cap:
        raise ComponentOverflow(
            f"{len(components)} components exceed the cap of {component_cap} at step {step}"
        )

    predicted = {name: {} for name in plan.transition_order}
    for comp in components:
        ops.count += len(comp.discrete_assignment) + len(comp.continuous_values)
        for name, value in comp.discrete_assignment.items():
            slot = predicted[name]
            slot[value] = slot.get(value, 0) + comp.weight
        for name, value in comp.continuous_values.items():
            slot = predicted[name]
            slot[value] = slot.get(value, 0) + comp.weight

    decision = "run"
    if plan.decision_node is not None:
        cpd = spec.cpds[plan.decision_node]
        half = ONE_HALF if mode.is_exact else 0.5
        zero = Fraction(0) if mode.is_exact else 0.0
        p0, p1 = zero, zero
        for comp in components:
            key = tuple(comp.discrete_assignment[p] for p, _lag in cpd.parents)
            row = cpd.rows[key]
            ops.count += 2
            w = comp.weight if mode.is_exact else float(comp.weight)
            p0 = p0 + w * (row.get("halt_0", 0) if mode.is_exact else float(row.get("halt_0", 0)))
            p1 = p1 + w * (row.get("halt_1", 0) if mode.is_exact else float(row.get("halt_1", 0)))
        if p1 > half:
            decision = "accept"
        elif p0 > half:
            decision = "reject"

    record = TraceRecord(
        step=step,
        evidence=dict(evidence),
        marginals=marginals,
        predicted=predicted,
        decision=decision,
        components=len(components),
    )
    return BeliefState(components=components, step_index=step), record


def iter_filter(
    spec: DbnSpec,
    inputs: Sequence[str],
    max_steps: int,
    mode: Mode = EXACT,
    ops: OpCounter | None = None,
    component_cap: int = DEFAULT_COMPONENT_CAP,
    input_node: str | None = None,
) -> Iterator[TraceRecord]:
    """Stream one TraceRecord per step, feeding "end" past the end of
    `inputs`; stops after the first accept/reject decision or max_steps."""
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    plan = _plan(spec)
    if input_node is None:
        if len(plan.input_nodes) != 1:
            raise ValueError(f"network has {len(plan.input_nodes)} input nodes; name one explicitly")
        input_node = plan.input_nodes[0]
    if plan.decision_node is None:
        raise ValueError("network has no output node over {run, halt_0, halt_1}")
    belief = init(spec, mode)
    counter = ops or OpCounter()
    for t in range(1, max_steps + 1):
        symbol = inputs[t - 1] if t - 1 < len(inputs) else "end"
        belief, record = _filter_step_planned(plan, belief, {input_node: symbol}, mode, counter, component_cap)
        yield record
        if record.decision != "run":
            return


def decide(
    spec: DbnSpec,
    inputs: Sequence[str],
    max_steps: int,
    mode: Mode = EXACT,
    ops: OpCounter | None = None,
    component_cap: int = DEFAULT_COMPONENT_CAP,
    record_sink: Callable[[TraceRecord], None] | None = None,
) -> DecideResult:
    """Run the halting decision: accept/reject at the first step where the
    halt posterior crosses 1/2, else timeout. Keeps the full trace."""
    records = []
    for record in iter_filter(spec, inputs, max_steps, mode, ops, component_cap):
        records.append(record)
        if record_sink is not None:
            record_sink(record)
    last = records[-1]
    if last.decision in ("accept", "reject"):
        return DecideResult(verdict=last.decision, step=last.step, records=tuple(records))
    return DecideResult(verdict="timeout", step=None, records=tuple(records))


# ---------------------------------------------------------------------------
# Brute-force oracle


def enumerate_unrolled(
    spec: DbnSpec,
    T: int,
    evidence: Mapping[tuple[str, int], str] | None = None,
    query: Sequence[tuple[str, int]] | None = None,
    max_support: int = DEFAULT_SUPPORT_CAP,
) -> dict[tuple[str, int], dict]:
    """Exact marginals by explicit summation over the unrolled joint.

    Independent of the filtering engine: it enumerates complete assignments
    of the unrolled network (branching only at genuinely stochastic nodes),
    conditions on `evidence` (keyed by (node, slice)), and sums. Only
    useful at desk scale; `max_support` bounds the number of enumerated
    assignments. `query` restricts which (node, slice) marginals are
    accumulated (default: all of them).
    """
    net: UnrolledNetwork = unroll(spec, T)
    evidence = dict(evidence or {})
    node_map = spec.node_map
    for name, t in evidence:
        if t < 1 or t > T or name not in node_map:
            raise ValueError(f"evidence key ({name!r}, {t}) outside the unrolled network")
        if node_map[name].is_continuous:
            raise ValueError(f"evidence on continuous node {name!r} is not supported")
    if query is None:
        query = [(n.name, n.t) for n in net.nodes]
    query = list(query)

    labels = [n.label for n in net.nodes]
    index = {label: i for i, label in enumerate(labels)}
    ev_by_index: dict[int, str] = {}
    for (name, t), value in evidence.items():
        ev_by_index[index[f"{name}@{t}"]] = value
    query_ix = [index[f"{name}@{t}"] for name, t in query]

    marginals: list[dict] = [dict() for _ in query_ix]
    values: list = [None] * len(net.nodes)
    total = Fraction(0)
    leaves = 0

    def local_branches(i: int):
        node = net.nodes[i]
        model = node.model
        if isinstance(model, DiracPrior):
            return [(model.value, None)]
        if isinstance(model, CategoricalPrior):
            return [(o, p) for o, p in model.probs.items() if p != 0]
        if isinstance(model, TableCpd):
            key = tuple(values[index[p]] for p in node.parents)
            return [(o, p) for o, p in model.rows[key].items() if p != 0]
        if isinstance(model, LinearDiracCpd):
            q = values[index[node.parents[0]]]
            key = tuple(values[index[p]] for p in node.parents[1:])
            a, c = model.cases[key]
            return [(a * q + c, None)]
        if isinstance(model, ThresholdCpd):
            q = values[index[node.parents[0]]]
            return [(str(heaviside(model.a * q + model.c)), None)]
        raise ValueError(f"enumerate_unrolled is exact-only; cannot handle {type(model).__name__}")

    def walk(i: int, weight: Fraction):
        nonlocal total, leaves
        # run through deterministic/observed nodes without recursing
        while i < len(net.nodes):
            branches = local_branches(i)
            observed = ev_by_index.get(i)
            if observed is not None:
                row = dict(branches)
                if observed not in row:
                    return  # prune: evidence contradicts this prefix
                values[i] = observed
                p = row[observed]
                if p is not None:
                    weight = weight * p
                i += 1
                continue
            if len(branches) == 1:
                value, p = branches[0]
                values[i] = value
                if p is not None:
                    weight = weight * p
                i += 1
                continue
            for value, p in branches:
                values[i] = value
                walk(i + 1, weight * p)
            values[i] = None
            return
        leaves += 1
        if leaves > max_support:
            raise SupportTooLarge(f"unrolled joint support exceeds {max_support} assignments")
        total += weight
        for slot, ix in zip(marginals, query_ix):
            v = values[ix]
            slot[v] = slot.get(v, Fraction(0)) + weight

    walk(0, Fraction(1))
    if total == 0:
        raise ZeroEvidenceProbability("evidence has probability 0 in the unrolled network")
    out: dict[tuple[str, int], dict] = {}
    for (name, t), slot in zip(query, marginals):
        out[(name, t)] = {value: w / total for value, w in slot.items()}
    return out
