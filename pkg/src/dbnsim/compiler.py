"""Compilers: Turing machine -> two-stack PDA -> hybrid 2-slice network.

The PDA->network stage emits one template slice of eleven nodes:

    U (input symbol), State, Top_a, Empty_a, Top_b, Empty_b,
    Action_a, Action_b, Stack_a, Stack_b, Y

Within a slice, Top_x/Empty_x threshold-read Stack_x, the action and next
state are table rows copied from the PDA's transition function, and Y flags
halt states. Across slices, Stack_x evolves through the four affine stack
kernels selected by (Top_x, Action_x) and State follows the transition
table; slice-1 priors put the machine in its initial configuration (both
stacks at the empty encoding 0 unless a tape is preloaded).

The guard reads feeding a transition sit on lag-1 edges (State_{t+1} is a
function of slice-t State/Top/Empty/U), so the joint over (State, Stack_a,
Stack_b) at any slice is exactly one machine configuration, with state and
stacks at the same machine time.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .automata import (
    ACTIONS,
    INPUT_SYMBOLS,
    PdaConfig,
    Rule,
    TmConfig,
    TuringMachine,
    TwoStackPDA,
    validate_pda,
    validate_tm,
)
from .dbn import (
    CategoricalPrior,
    DbnSpec,
    DiracPrior,
    KIND_CATEGORICAL,
    KIND_CONTINUOUS,
    LinearDiracCpd,
    NodeDecl,
    TableCpd,
    ThresholdCpd,
    ValidationFailed,
    validate,
)
from .stackcodec import encode

# Every TM step costs exactly this many PDA steps (left moves need three
# phases; right moves take one plus two padding steps).
TM_STEP_DILATION = 3

Y_OUTCOMES = ("run", "halt_0", "halt_1")


# ---------------------------------------------------------------------------
# TM -> PDA

def tm_to_pda(tm: TuringMachine) -> TwoStackPDA:
    """Compile to a two-stack machine: stack a holds the tape left of the
    head (nearest cell on top), stack b holds the head cell and everything
    to its right. An empty stack reads as blank through the empty guard.

    A right move pops the head off b and pushes the written bit onto a in
    one step, then pads. A left move takes three real phases: drop the head
    from b, then swap the written bit in while popping the carried cell off
    a, then push the carried cell onto b.
    """
    violations = validate_tm(tm)
    if violations:
        raise ValidationFailed(violations)
    for state in tm.states:
        if "~" in state:
            raise ValueError(f"state name {state!r} uses the reserved character '~'")

    states = set(tm.states)
    rules: list[Rule] = []

    def read_guards(symbol: int) -> list[tuple[int | None, int]]:
        # (top_b, empty_b) guard pairs under which the head reads `symbol`
        if symbol == 1:
            return [(1, 0)]
        return [(0, 0), (None, 1)]  # a written 0, or a never-visited blank

    for (state, read), (target, write, move) in sorted(tm.transitions.items()):
        for top_b, empty_b in read_guards(read):
            pop_b = "pop" if empty_b == 0 else "noop"
            if move == "R":
                r1, r2 = f"{target}~r1", f"{target}~r2"
                states.update((r1, r2))
                rules.append(
                    Rule(state, next_state=r1, action_a=f"push_{write}", action_b=pop_b,
                         top_b=top_b, empty_b=empty_b)
                )
            else:
                l2 = f"{target}~l2~{write}"
                states.add(l2)
                states.update((f"{target}~l3~0", f"{target}~l3~1"))
                rules.append(
                    Rule(state, next_state=l2, action_b=pop_b, top_b=top_b, empty_b=empty_b)
                )

    for state in sorted(states):
        if state.endswith("~r1"):
            rules.append(Rule(state, next_state=state[:-1] + "2"))
        elif state.endswith("~r2"):
            rules.append(Rule(state, next_state=state[: -len("~r2")]))
        elif "~l2~" in state:
            target, write = state.split("~l2~")
            # pop the carried cell off a (or synthesize a blank) while
            # pushing the freshly written bit under it on b
            rules.append(
                Rule(state, next_state=f"{target}~l3~0", action_b=f"push_{write}", empty_a=1)
            )
            for carried in (0, 1):
                rules.append(
                    Rule(state, next_state=f"{target}~l3~{carried}", action_a="pop",
                         action_b=f"push_{write}", top_a=carried, empty_a=0)
                )
        elif "~l3~" in state:
            target, carried = state.split("~l3~")
            rules.append(Rule(state, next_state=target, action_b=f"push_{carried}"))

    return TwoStackPDA.from_rules(
        states=sorted(states),
        initial_state=tm.initial_state,
        halt_0=tm.halt_0,
        halt_1=tm.halt_1,
        rules=rules,
        metadata={"source": "tm", "dilation": TM_STEP_DILATION, **dict(tm.metadata)},
    )


def tape_config(pda: TwoStackPDA, tape: str) -> PdaConfig:
    """Starting configuration of a compiled TM with `tape` under the head."""
    if any(c not in "01" for c in tape):
        raise ValueError(f"tape must be over {{0,1}}, got {tape!r}")
    return PdaConfig(pda.initial_state, "", tape)


def tm_config_stacks(config: TmConfig) -> tuple[str, str]:
    """The stack pair a compiled PDA holds for this TM configuration."""
    return config.left, f"{config.head}{config.right}"


def tapes_equivalent(s1: str, s2: str) -> bool:
    """Equal up to trailing (bottom-of-stack / far-from-head) blanks."""
    return s1.rstrip("0") == s2.rstrip("0")


# ---------------------------------------------------------------------------
# PDA -> DBN

def _guard_space(states: Iterable[str]):
    for state in states:
        for ta in (0, 1):
            for ea in (0, 1):
                for tb in (0, 1):
                    for eb in (0, 1):
                        for sym in INPUT_SYMBOLS:
                            yield state, ta, ea, tb, eb, sym


def _pda_outcome(pda: TwoStackPDA, state: str, ta: int, ea: int, tb: int, eb: int, sym: str):
    """Transition row for a full (possibly non-canonical) guard reading.

    Halt states absorb: the machine stays put with noop actions, which keeps
    the CPTs total and pins P(Y=halt) at 1 forever after halting. Guards
    with empty=1 canonicalize their top component to 0 (a threshold read of
    the empty encoding yields 0 anyway, so the extra rows are unreachable).
    """
    if state in pda.halt_states:
        return state, "noop", "noop"
    key = (state, 0 if ea else ta, ea, 0 if eb else tb, eb, sym)
    return pda.transitions[key]


def pda_to_dbn(pda: TwoStackPDA, initial: PdaConfig | None = None) -> DbnSpec:
    """Emit the template network simulating `pda`.

    `initial` overrides the default starting configuration (initial state,
    both stacks empty); compiled Turing machines use it to preload the tape
    into the Stack_b prior.
    """
    violations = validate_pda(pda)
    if violations:
        raise ValidationFailed(violations)
    start = initial or PdaConfig(pda.initial_state, "", "")
    if start.state not in pda.states:
        raise ValueError(f"initial configuration state {start.state!r} not in the machine")

    states = tuple(sorted(pda.states))
    third = Fraction(1, 3)
    one = Fraction(1)

    nodes = (
        NodeDecl("U", "input", KIND_CATEGORICAL, INPUT_SYMBOLS),
        NodeDecl("State", "hidden", KIND_CATEGORICAL, states),
        NodeDecl("Top_a", "hidden", KIND_CATEGORICAL, ("0", "1")),
        NodeDecl("Empty_a", "hidden", KIND_CATEGORICAL, ("0", "1")),
        NodeDecl("Top_b", "hidden", KIND_CATEGORICAL, ("0", "1")),
        NodeDecl("Empty_b", "hidden", KIND_CATEGORICAL, ("0", "1")),
        NodeDecl("Action_a", "hidden", KIND_CATEGORICAL, ACTIONS),
        NodeDecl("Action_b", "hidden", KIND_CATEGORICAL, ACTIONS),
        NodeDecl("Stack_a", "hidden", KIND_CONTINUOUS),
        NodeDecl("Stack_b", "hidden", KIND_CONTINUOUS),
        NodeDecl("Y", "output", KIND_CATEGORICAL, Y_OUTCOMES),
    )

    guard_parents = (("State", 1), ("Top_a", 1), ("Empty_a", 1), ("Top_b", 1), ("Empty_b", 1), ("U", 1))
    action_parents = (("State", 0), ("Top_a", 0), ("Empty_a", 0), ("Top_b", 0), ("Empty_b", 0), ("U", 0))

    state_rows: dict[tuple[str, ...], dict[str, Fraction]] = {}
    action_rows = {"a": {}, "b": {}}
    for state, ta, ea, tb, eb, sym in _guard_space(states):
        nxt, act_a, act_b = _pda_outcome(pda, state, ta, ea, tb, eb, sym)
        key = (state, str(ta), str(ea), str(tb), str(eb), sym)
        state_rows[key] = {nxt: one}
        action_rows["a"][key] = {act_a: one}
        action_rows["b"][key] = {act_b: one}

    def stack_cpd(side: str) -> LinearDiracCpd:
        cases = {}
        for t in ("0", "1"):
            cases[(t, "push_0")] = (Fraction(1, 4), Fraction(1, 4))
            cases[(t, "push_1")] = (Fraction(1, 4), Fraction(3, 4))
            cases[(t, "pop")] = (Fraction(4), Fraction(-(2 * int(t) + 1)))
            cases[(t, "noop")] = (Fraction(1), Fraction(0))
        return LinearDiracCpd(
            continuous_parent=(f"Stack_{side}", 1),
            discrete_parents=((f"Top_{side}", 1), (f"Action_{side}", 1)),
            cases=cases,
        )

    y_rows = {}
    for state in states:
        if state == pda.halt_0:
            y_rows[(state,)] = {"halt_0": one}
        elif state == pda.halt_1:
            y_rows[(state,)] = {"halt_1": one}
        else:
            y_rows[(state,)] = {"run": one}

    cpds = {
        "U": TableCpd(parents=(), rows={(): {sym: third for sym in INPUT_SYMBOLS}}),
        "State": TableCpd(parents=guard_parents, rows=state_rows),
        "Top_a": ThresholdCpd(parent=("Stack_a", 0), a=Fraction(4), c=Fraction(-2)),
        "Empty_a": ThresholdCpd(parent=("Stack_a", 0), a=Fraction(-4), c=Fraction(1)),
        "Top_b": ThresholdCpd(parent=("Stack_b", 0), a=Fraction(4), c=Fraction(-2)),
        "Empty_b": ThresholdCpd(parent=("Stack_b", 0), a=Fraction(-4), c=Fraction(1)),
        "Action_a": TableCpd(parents=action_parents, rows=action_rows["a"]),
        "Action_b": TableCpd(parents=action_parents, rows=action_rows["b"]),
        "Stack_a": stack_cpd("a"),
        "Stack_b": stack_cpd("b"),
        "Y": TableCpd(parents=(("State", 0),), rows=y_rows),
    }

    edges = []
    for child, cpd in cpds.items():
        for parent, lag in cpd.parents:
            edges.append((parent, child, lag))

    priors = {
        "State": CategoricalPrior({start.state: one}),
        "Stack_a": DiracPrior(encode(start.stack_a)),
        "Stack_b": DiracPrior(encode(start.stack_b)),
    }

    spec = DbnSpec(nodes=nodes, edges=tuple(edges), priors=priors, cpds=cpds)
    leftover = validate(spec)
    if leftover:  # compiler bug if this ever fires
        raise ValidationFailed(leftover)
    return spec


def network_metadata(pda: TwoStackPDA, spec: DbnSpec) -> dict:
    """Inventory block emitted next to a compiled network file."""
    return {
        "nodes": [n.name for n in spec.nodes],
        "state_count": len(pda.states),
        "dilation": pda.metadata.get("dilation"),
        "machine": pda.metadata.get("name"),
        "source": pda.metadata.get("source", "pda"),
    }
