"""Collapse of a fully discrete 2-slice network into a hidden Markov model.

The hidden nodes of one slice are fused into a single variable over the
Cartesian product of their outcome spaces; the result is exponentially
larger but finite, which is exactly why purely discrete networks top out at
finite-state power. Inputs stay exogenous (one transition matrix per joint
input outcome) so the forward pass conditions evidence the same way the
general filtering engine does, making the two directly comparable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .dbn import (
    CategoricalPrior,
    DbnSpec,
    TableCpd,
    ValidationFailed,
    topological_order,
)
from .inference import ZeroEvidenceProbability
from .stackcodec import format_rational

ZERO = Fraction(0)
ONE = Fraction(1)


class NotDiscrete(TypeError):
    """collapse() was handed a network with continuous nodes."""


@dataclass(frozen=True)
class CollapsedHmm:
    hidden_nodes: tuple[str, ...]
    hidden_space: tuple[tuple[str, ...], ...]
    input_nodes: tuple[str, ...]
    input_space: tuple[tuple[str, ...], ...]
    output_nodes: tuple[str, ...]
    output_space: tuple[tuple[str, ...], ...]
    initial: tuple[Fraction, ...]
    # input joint outcome -> row-stochastic matrix over hidden_space
    transition: Mapping[tuple[str, ...], tuple[tuple[Fraction, ...], ...]]
    # hidden joint -> distribution over output_space
    emission: tuple[tuple[Fraction, ...], ...]

    def hidden_index(self, joint: tuple[str, ...]) -> int:
        return self.hidden_space.index(joint)


def _space(decls) -> tuple[tuple[str, ...], ...]:
    outcome_lists = [d.outcomes for d in decls]
    return tuple(itertools.product(*outcome_lists)) if outcome_lists else ((),)


def _extend(spec: DbnSpec, comps, names, lookup):
    """Branch components over `names` in order; `lookup(name, lag)` resolves
    a parent value for the current partial assignment."""
    for name in names:
        cpd = spec.cpds[name]
        if not isinstance(cpd, TableCpd):
            raise NotDiscrete(f"node {name} does not have a table CPD")
        new = []
        for weight, assign in comps:
            key = tuple(lookup(assign, p, lag) for p, lag in cpd.parents)
            for outcome, p in cpd.rows[key].items():
                if p != 0:
                    ext = dict(assign)
                    ext[name] = outcome
                    new.append((weight * p, ext))
        comps = new
    return comps


def collapse(spec: DbnSpec) -> CollapsedHmm:
    """Fuse the hidden nodes into one chain variable.

    Supported shape (checked): hidden nodes draw on previous-slice hidden
    and input nodes plus same-slice hidden nodes; output nodes draw on
    same-slice hidden and output nodes; input nodes are parentless. This is
    the shape the machine compiler and the random-network generator emit.
    """
    order = topological_order(spec)  # raises ValidationFailed on bad specs
    continuous = [n.name for n in spec.nodes if n.is_continuous]
    if continuous:
        raise NotDiscrete(f"network has continuous nodes: {continuous}")

    roles = {n.name: n.role for n in spec.nodes}
    hidden_order = tuple(n for n in order if roles[n] == "hidden")
    input_order = tuple(n for n in order if roles[n] == "input")
    output_order = tuple(n for n in order if roles[n] == "output")
    transition_nodes = set(spec.transition_nodes())

    for name in hidden_order:
        for p, lag in spec.cpds[name].parents:
            if lag == 1 and roles[p] not in ("hidden", "input"):
                raise ValueError(f"hidden node {name} has unsupported lag-1 parent {p} ({roles[p]})")
            if lag == 0 and roles[p] != "hidden":
                raise ValueError(f"hidden node {name} has unsupported lag-0 parent {p} ({roles[p]})")
    for name in output_order:
        for p, lag in spec.cpds[name].parents:
            if lag != 0 or roles[p] not in ("hidden", "output"):
                raise ValueError(f"output node {name} has unsupported parent {p}@{lag}")
    for name in input_order:
        if name in transition_nodes:
            raise ValueError(f"input node {name} cannot carry state across slices")

    node_map = spec.node_map
    hidden_space = _space([node_map[n] for n in hidden_order])
    input_space = _space([node_map[n] for n in input_order])
    output_space = _space([node_map[n] for n in output_order])
    hidden_ix = {joint: i for i, joint in enumerate(hidden_space)}
    output_ix = {joint: i for i, joint in enumerate(output_space)}

    def same_slice(assign, parent, lag):
        if lag != 0:
            raise AssertionError("prior extension saw a lag-1 parent")
        return assign[parent]

    # initial distribution: priors for the state-carrying hidden nodes,
    # then the within-slice hidden CPDs on top
    comps = [(ONE, {})]
    for name in hidden_order:
        if name in transition_nodes:
            prior = spec.priors[name]
            assert isinstance(prior, CategoricalPrior)
            comps = [
                (w * p, {**assign, name: outcome})
                for w, assign in comps
                for outcome, p in prior.probs.items()
                if p != 0
            ]
        else:
            comps = _extend(spec, comps, [name], same_slice)
    initial = [ZERO] * len(hidden_space)
    for w, assign in comps:
        initial[hidden_ix[tuple(assign[n] for n in hidden_order)]] += w

    # transition matrices, one per joint input outcome
    transition = {}
    for u in input_space:
        matrix = []
        for h in hidden_space:
            prev = dict(zip(hidden_order, h)) | dict(zip(input_order, u))

            def lookup(assign, parent, lag, prev=prev):
                return prev[parent] if lag == 1 else assign[parent]

            comps = _extend(spec, [(ONE, {})], hidden_order, lookup)
            row = [ZERO] * len(hidden_space)
            for w, assign in comps:
                row[hidden_ix[tuple(assign[n] for n in hidden_order)]] += w
            matrix.append(tuple(row))
        transition[u] = tuple(matrix)

    # emission: outputs given the fused hidden value
    emission = []
    for h in hidden_space:
        base = dict(zip(hidden_order, h))
        comps = _extend(spec, [(ONE, dict(base))], output_order, same_slice)
        row = [ZERO] * len(output_space)
        for w, assign in comps:
            row[output_ix[tuple(assign[n] for n in output_order)]] += w
        emission.append(tuple(row))

    return CollapsedHmm(
        hidden_nodes=hidden_order,
        hidden_space=hidden_space,
        input_nodes=input_order,
        input_space=input_space,
        output_nodes=output_order,
        output_space=output_space,
        initial=tuple(initial),
        transition=transition,
        emission=tuple(emission),
    )


def forward(
    hmm: CollapsedHmm,
    inputs: Sequence[tuple[str, ...]],
    observations: Sequence[tuple[str, ...] | None] | None = None,
) -> list[tuple[Fraction, ...]]:
    """Filtered distribution over the fused hidden space, one entry per step.

    `inputs[t]` selects the transition matrix applied after step t+1's
    distribution is recorded; `observations[t]` (optional) conditions on the
    joint output outcome of that slice before recording.
    """
    alpha = list(hmm.initial)
    out: list[tuple[Fraction, ...]] = []
    for t, u in enumerate(inputs):
        obs = observations[t] if observations is not None else None
        if obs is not None:
            j = hmm.output_space.index(tuple(obs))
            alpha = [a * hmm.emission[i][j] for i, a in enumerate(alpha)]
            total = sum(alpha)
            if total == 0:
                raise ZeroEvidenceProbability(f"observation {obs} impossible at step {t + 1}")
            alpha = [a / total for a in alpha]
        out.append(tuple(alpha))
        matrix = hmm.transition[tuple(u)]
        alpha = [
            sum(alpha[i] * matrix[i][j] for i in range(len(alpha)))
            for j in range(len(alpha))
        ]
    return out


def project_hidden(hmm: CollapsedHmm, dist: Sequence[Fraction], name: str) -> dict[str, Fraction]:
    """Marginal of one original hidden node under a fused distribution."""
    k = hmm.hidden_nodes.index(name)
    out: dict[str, Fraction] = {}
    for joint, w in zip(hmm.hidden_space, dist):
        if w != 0:
            out[joint[k]] = out.get(joint[k], ZERO) + w
    return out


def output_marginal(hmm: CollapsedHmm, dist: Sequence[Fraction], name: str) -> dict[str, Fraction]:
    """Marginal of one output node under a fused hidden distribution."""
    k = hmm.output_nodes.index(name)
    out: dict[str, Fraction] = {}
    for i, w in enumerate(dist):
        if w == 0:
            continue
        for joint, p in zip(hmm.output_space, hmm.emission[i]):
            if p != 0:
                out[joint[k]] = out.get(joint[k], ZERO) + w * p
    return out


def hmm_to_json(hmm: CollapsedHmm) -> dict:
    def vec(v):
        return [format_rational(x) for x in v]

    return {
        "hidden_nodes": list(hmm.hidden_nodes),
        "hidden_space": ["|".join(j) for j in hmm.hidden_space],
        "input_nodes": list(hmm.input_nodes),
        "input_space": ["|".join(j) for j in hmm.input_space],
        "output_nodes": list(hmm.output_nodes),
        "output_space": ["|".join(j) for j in hmm.output_space],
        "initial": vec(hmm.initial),
        "transition": {"|".join(u): [vec(row) for row in m] for u, m in sorted(hmm.transition.items())},
        "emission": [vec(row) for row in hmm.emission],
    }
