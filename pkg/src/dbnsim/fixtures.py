"""Reference machines used throughout the tests, demos and docs."""

from __future__ import annotations

from .automata import Rule, TuringMachine, TwoStackPDA


def parity_pda() -> TwoStackPDA:
    """Accepts (halt_1) inputs containing an even number of 1s.

    Pure finite control: both stacks stay untouched, which makes this the
    smallest fixture whose compiled network still exercises every node kind.
    """
    rules = [
        Rule("q_even", next_state="q_odd", input="1"),
        Rule("q_even", next_state="q_even", input="0"),
        Rule("q_even", next_state="halt_1", input="end"),
        Rule("q_odd", next_state="q_even", input="1"),
        Rule("q_odd", next_state="q_odd", input="0"),
        Rule("q_odd", next_state="halt_0", input="end"),
    ]
    return TwoStackPDA.from_rules(
        states=["q_even", "q_odd", "halt_0", "halt_1"],
        initial_state="q_even",
        halt_0="halt_0",
        halt_1="halt_1",
        rules=rules,
        metadata={"name": "PARITY"},
    )


def pusher_pda() -> TwoStackPDA:
    """Pushes a 1 onto stack a every step, forever; never halts.

    The guards it can actually reach are (empty at step 1, top-1 afterwards);
    every other guard combination routes to a frozen sink state `p_err`.
    That matters for the soft inference mode: the branches created by
    softened threshold reads then end up in configurations the true run can
    never revisit, so the weight of the correct component is the bare product
    of the logistic factors along the run, with nothing merging back in.
    """
    rules = [
        Rule("p0", next_state="p1", action_a="push_1", empty_a=1),
        Rule("p0", next_state="p_err"),
        Rule("p1", next_state="p1", action_a="push_1", top_a=1, empty_a=0),
        Rule("p1", next_state="p_err"),
        Rule("p_err", next_state="p_err"),
    ]
    return TwoStackPDA.from_rules(
        states=["p0", "p1", "p_err", "halt_0", "halt_1"],
        initial_state="p0",
        halt_0="halt_0",
        halt_1="halt_1",
        rules=rules,
        metadata={"name": "PUSHER"},
    )


def increment_tm() -> TuringMachine:
    """Adds one to a binary number written least-significant-bit first.

    Flips 1s to 0s moving right until the first 0 (or a fresh blank), writes
    a 1 there and accepts.
    """
    transitions = {
        ("s0", 1): ("s0", 0, "R"),
        ("s0", 0): ("halt_1", 1, "R"),
    }
    return TuringMachine(
        states=frozenset(["s0", "halt_0", "halt_1"]),
        initial_state="s0",
        halt_0="halt_0",
        halt_1="halt_1",
        transitions=transitions,
        metadata={"name": "INCREMENT"},
    )


def seekleft_tm() -> TuringMachine:
    """Steps left off the given tape, then reports what the fresh cell held.

    Exists to exercise the left-move path of the machine compiler (a left
    move from the leftmost visited cell must synthesize a blank from an
    empty stack).
    """
    transitions = {
        ("s0", 0): ("s1", 0, "L"),
        ("s0", 1): ("s1", 1, "L"),
        ("s1", 0): ("halt_1", 1, "R"),
        ("s1", 1): ("halt_0", 0, "R"),
    }
    return TuringMachine(
        states=frozenset(["s0", "s1", "halt_0", "halt_1"]),
        initial_state="s0",
        halt_0="halt_0",
        halt_1="halt_1",
        transitions=transitions,
        metadata={"name": "SEEKLEFT"},
    )
