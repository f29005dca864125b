"""Seeded generators for machines and discrete networks.

Used by the test suite (oracle-equivalence sweeps run over hundreds of
random machines) and handy for poking at the library; everything is
deterministic in the seed.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .automata import INPUT_SYMBOLS, STACK_GUARDS, TwoStackPDA
from .dbn import CategoricalPrior, DbnSpec, NodeDecl, TableCpd

BINARY = ("0", "1")


def random_pda(seed: int, max_states: int = 6) -> TwoStackPDA:
    """A valid deterministic two-stack machine with 1..max_states working
    states. The initial state is never a halt state, pops are only emitted
    under nonempty guards, and halt targets are kept rare enough that runs
    usually survive a few steps."""
    rng = random.Random(seed)
    n = rng.randint(1, max_states)
    working = [f"q{i}" for i in range(n)]
    states = working + ["halt_0", "halt_1"]
    # halts roughly once per 3n guard rows
    targets = working * 3 + ["halt_0", "halt_1"]

    def action(empty: int) -> str:
        if empty:
            return rng.choice(("push_0", "push_1", "noop"))
        return rng.choice(("push_0", "push_1", "pop", "noop"))

    table = {}
    for state in working:
        for ta, ea in STACK_GUARDS:
            for tb, eb in STACK_GUARDS:
                for sym in INPUT_SYMBOLS:
                    table[(state, ta, ea, tb, eb, sym)] = (
                        rng.choice(targets),
                        action(ea),
                        action(eb),
                    )
    return TwoStackPDA(
        states=frozenset(states),
        initial_state="q0",
        halt_0="halt_0",
        halt_1="halt_1",
        transitions=table,
        metadata={"name": f"random-{seed}"},
    )


def random_bits(seed: int, length: int) -> str:
    rng = random.Random(seed)
    return "".join(rng.choice("01") for _ in range(length))


def _random_dist(rng: random.Random, outcomes, positive: bool = False) -> dict[str, Fraction]:
    """Random rational distribution summing to 1; zero entries allowed
    unless `positive` (input priors need full support so that no legal
    input sequence has probability zero)."""
    lo = 1 if positive else 0
    weights = [rng.randint(lo, 6) for _ in outcomes]
    if not any(weights):
        weights[rng.randrange(len(weights))] = 1
    total = sum(weights)
    return {o: Fraction(w, total) for o, w in zip(outcomes, weights)}


def random_discrete_dbn(
    seed: int,
    max_hidden: int = 3,
    max_observed: int = 2,
    with_input: bool = True,
) -> DbnSpec:
    """A stochastic discrete 2-slice network: binary hidden nodes carried
    across slices by random rational tables (optionally steered by one
    exogenous binary input), plus observed output nodes hanging off the
    current slice's hiddens."""
    rng = random.Random(seed)
    n_hidden = rng.randint(1, max_hidden)
    n_obs = rng.randint(0, max_observed)
    has_input = with_input and rng.random() < 0.7

    hiddens = [f"H{i}" for i in range(n_hidden)]
    outputs = [f"O{i}" for i in range(n_obs)]
    nodes = [NodeDecl(h, "hidden", "categorical", BINARY) for h in hiddens]
    nodes += [NodeDecl(o, "output", "categorical", BINARY) for o in outputs]
    if has_input:
        nodes.append(NodeDecl("In", "input", "categorical", BINARY))

    edges = []
    cpds = {}
    priors = {}

    def combos(parents):
        if not parents:
            yield ()
            return
        head, *rest = parents
        for v in BINARY:
            for tail in combos(rest):
                yield (v,) + tail

    for h in hiddens:
        parent_names = rng.sample(hiddens, rng.randint(1, n_hidden))
        parents = [(p, 1) for p in sorted(parent_names)]
        if has_input and rng.random() < 0.6:
            parents.append(("In", 1))
        rows = {key: _random_dist(rng, BINARY) for key in combos(parents)}
        cpds[h] = TableCpd(parents=tuple(parents), rows=rows)
        priors[h] = CategoricalPrior(_random_dist(rng, BINARY))
        edges += [(p, h, lag) for p, lag in parents]

    for o in outputs:
        parent_names = rng.sample(hiddens, rng.randint(1, n_hidden))
        parents = [(p, 0) for p in sorted(parent_names)]
        rows = {key: _random_dist(rng, BINARY) for key in combos(parents)}
        cpds[o] = TableCpd(parents=tuple(parents), rows=rows)
        edges += [(p, o, 0) for p, _ in parents]

    if has_input:
        cpds["In"] = TableCpd(parents=(), rows={(): _random_dist(rng, BINARY, positive=True)})

    return DbnSpec(nodes=tuple(nodes), edges=tuple(edges), priors=priors, cpds=cpds)


def random_input_symbols(seed: int, spec: DbnSpec, steps: int) -> list[dict[str, str]]:
    """Per-step evidence maps covering every input node of `spec`."""
    rng = random.Random(seed)
    input_nodes = [(n.name, n.outcomes) for n in spec.nodes if n.role == "input"]
    out = []
    for _ in range(steps):
        out.append({name: rng.choice(outcomes) for name, outcomes in input_nodes})
    return out
