"""Turing machines and two-stack pushdown automata, with direct simulators.

The simulators here are the ground-truth oracles for every inference test:
a compiled network is correct exactly when its filtered posteriors track
`pda_run` configuration for configuration.

Conventions:
  - stack words and tape halves are str over {'0','1'}; index 0 is the top
    of a stack / the cell nearest the head,
  - input symbols are "0", "1" and "end" ("end" is fed once the caller's
    input string is exhausted, so decision problems over finite strings are
    expressible),
  - a guard reads (top_a, empty_a, top_b, empty_b); when empty_x = 1 the
    top_x component is ignored and canonicalized to 0.

All types are immutable values; step functions are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

INPUT_SYMBOLS = ("0", "1", "end")
END = "end"
ACTIONS = ("push_0", "push_1", "pop", "noop")
MOVES = ("L", "R")

# (state, top_a, empty_a, top_b, empty_b, input) — always canonical.
Guard = tuple[str, int, int, int, int, str]
# (next_state, action_a, action_b)
Outcome = tuple[str, str, str]

# Canonical (top, empty) pairs for one stack: nonempty-top-0, nonempty-top-1, empty.
STACK_GUARDS = ((0, 0), (1, 0), (0, 1))


class HaltedMachine(Exception):
    """Step applied to a configuration whose state is a halt state."""


class PopOnEmpty(Exception):
    """A pop hit an empty stack (only reachable if validation was skipped)."""


@dataclass(frozen=True)
class Violation:
    """One broken machine invariant; `subject` names the offending piece."""

    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


# ---------------------------------------------------------------------------
# Two-stack PDA


@dataclass(frozen=True)
class Rule:
    """One (possibly wildcarded) transition row.

    Guard fields left as None match any canonical value; expansion is
    first-match-wins over the listed rules.
    """

    state: str
    next_state: str
    action_a: str = "noop"
    action_b: str = "noop"
    top_a: int | None = None
    empty_a: int | None = None
    top_b: int | None = None
    empty_b: int | None = None
    input: str | None = None


@dataclass(frozen=True)
class TwoStackPDA:
    states: frozenset[str]
    initial_state: str
    halt_0: str
    halt_1: str
    transitions: Mapping[Guard, Outcome]
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def halt_states(self) -> frozenset[str]:
        return frozenset((self.halt_0, self.halt_1))

    @staticmethod
    def from_rules(
        states: Iterable[str],
        initial_state: str,
        halt_0: str,
        halt_1: str,
        rules: Sequence[Rule],
        metadata: Mapping[str, Any] | None = None,
    ) -> "TwoStackPDA":
        """Expand wildcard rules (first match wins) into a canonical table."""
        table: dict[Guard, Outcome] = {}
        for rule in rules:
            for side in ("a", "b"):
                t, e = getattr(rule, f"top_{side}"), getattr(rule, f"empty_{side}")
                if t == 1 and e == 1:
                    raise ValueError(
                        f"rule for {rule.state}: guard top_{side}=1 with "
                        f"empty_{side}=1 is unsatisfiable"
                    )
            for ta, ea in STACK_GUARDS:
                if rule.top_a is not None and rule.top_a != ta:
                    continue
                if rule.empty_a is not None and rule.empty_a != ea:
                    continue
                for tb, eb in STACK_GUARDS:
                    if rule.top_b is not None and rule.top_b != tb:
                        continue
                    if rule.empty_b is not None and rule.empty_b != eb:
                        continue
                    for sym in INPUT_SYMBOLS:
                        if rule.input is not None and rule.input != sym:
                            continue
                        key: Guard = (rule.state, ta, ea, tb, eb, sym)
                        if key not in table:
                            table[key] = (rule.next_state, rule.action_a, rule.action_b)
        return TwoStackPDA(
            states=frozenset(states),
            initial_state=initial_state,
            halt_0=halt_0,
            halt_1=halt_1,
            transitions=table,
            metadata=dict(metadata or {}),
        )


@dataclass(frozen=True)
class PdaConfig:
    state: str
    stack_a: str
    stack_b: str


@dataclass(frozen=True)
class TmConfig:
    state: str
    left: str  # cells left of the head, nearest first
    head: int
    right: str  # cells right of the head, nearest first


@dataclass(frozen=True)
class RunResult:
    """Outcome of a bounded run; configs[t] is the configuration after t steps."""

    verdict: str  # "halt_0" | "halt_1" | "timeout"
    step: int | None
    configs: tuple

    @property
    def halted(self) -> bool:
        return self.verdict != "timeout"


def stack_guard(stack: str) -> tuple[int, int]:
    """Canonical (top, empty) read of one stack."""
    if stack == "":
        return (0, 1)
    return (int(stack[0]), 0)


def _apply_action(stack: str, action: str) -> str:
    if action == "noop":
        return stack
    if action == "push_0":
        return "0" + stack
    if action == "push_1":
        return "1" + stack
    if action == "pop":
        if stack == "":
            raise PopOnEmpty("pop on empty stack")
        return stack[1:]
    raise ValueError(f"unknown stack action {action!r}")


def pda_step(pda: TwoStackPDA, config: PdaConfig, symbol: str) -> PdaConfig:
    """Apply one transition: read guards, consume `symbol`, update atomically."""
    if config.state in pda.halt_states:
        raise HaltedMachine(f"machine already halted in {config.state}")
    ta, ea = stack_guard(config.stack_a)
    tb, eb = stack_guard(config.stack_b)
    key: Guard = (config.state, ta, ea, tb, eb, symbol)
    try:
        next_state, act_a, act_b = pda.transitions[key]
    except KeyError:
        raise KeyError(f"no transition for guard {key}") from None
    return PdaConfig(
        state=next_state,
        stack_a=_apply_action(config.stack_a, act_a),
        stack_b=_apply_action(config.stack_b, act_b),
    )


def pda_run(
    pda: TwoStackPDA,
    inputs: Sequence[str],
    max_steps: int,
    initial: PdaConfig | None = None,
) -> RunResult:
    """Iterate pda_step, feeding "end" once `inputs` is exhausted.

    Returns the first entry into a halt state (step index counts transitions
    taken, so an initially-halted machine reports step 0) or a timeout.
    `initial` overrides the default (initial state, both stacks empty), which
    is how compiled Turing machines preload their tape.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    config = initial or PdaConfig(pda.initial_state, "", "")
    configs = [config]
    if config.state in pda.halt_states:
        return RunResult(_verdict(pda, config.state), 0, tuple(configs))
    for t in range(1, max_steps + 1):
        symbol = inputs[t - 1] if t - 1 < len(inputs) else END
        config = pda_step(pda, config, symbol)
        configs.append(config)
        if config.state in pda.halt_states:
            return RunResult(_verdict(pda, config.state), t, tuple(configs))
    return RunResult("timeout", None, tuple(configs))


def _verdict(machine, state: str) -> str:
    return "halt_0" if state == machine.halt_0 else "halt_1"


def validate_pda(pda: TwoStackPDA) -> list[Violation]:
    """All TwoStackPDA invariant violations, empty iff the machine is valid."""
    out: list[Violation] = []
    if pda.halt_0 == pda.halt_1:
        out.append(Violation("halt-collision", pda.halt_0, "halt_0 and halt_1 must differ"))
    for name, role in ((pda.initial_state, "initial"), (pda.halt_0, "halt_0"), (pda.halt_1, "halt_1")):
        if name not in pda.states:
            out.append(Violation("unknown-state", name, f"{role} state not in state set"))
    for key, outcome in sorted(pda.transitions.items()):
        state, ta, ea, tb, eb, sym = key
        subject = str(key)
        next_state, act_a, act_b = outcome
        if state not in pda.states:
            out.append(Violation("unknown-state", subject, f"guard state {state!r} not declared"))
        if state in pda.halt_states:
            out.append(Violation("halt-outgoing", subject, f"halt state {state!r} has an outgoing transition"))
        if sym not in INPUT_SYMBOLS:
            out.append(Violation("bad-input", subject, f"input symbol {sym!r} not in {INPUT_SYMBOLS}"))
        for bit, label in ((ta, "top_a"), (ea, "empty_a"), (tb, "top_b"), (eb, "empty_b")):
            if bit not in (0, 1):
                out.append(Violation("bad-guard", subject, f"{label} must be 0 or 1"))
        if (ea == 1 and ta != 0) or (eb == 1 and tb != 0):
            out.append(Violation("non-canonical-guard", subject, "top must be canonicalized to 0 when empty=1"))
        if next_state not in pda.states:
            out.append(Violation("unknown-state", subject, f"successor {next_state!r} not declared"))
        for act, label, empty in ((act_a, "action_a", ea), (act_b, "action_b", eb)):
            if act not in ACTIONS:
                out.append(Violation("bad-action", subject, f"{label} {act!r} not in {ACTIONS}"))
            elif act == "pop" and empty == 1:
                out.append(
                    Violation("pop-on-empty-guard", subject, f"{label} pops a stack its guard says is empty")
                )
    for state in sorted(pda.states - pda.halt_states):
        for ta, ea in STACK_GUARDS:
            for tb, eb in STACK_GUARDS:
                for sym in INPUT_SYMBOLS:
                    key = (state, ta, ea, tb, eb, sym)
                    if key not in pda.transitions:
                        out.append(Violation("totality", str(key), "no transition for this guard"))
    return out


# ---------------------------------------------------------------------------
# Turing machine


@dataclass(frozen=True)
class TuringMachine:
    """One-tape machine over {0,1} with 0 as the blank symbol."""

    states: frozenset[str]
    initial_state: str
    halt_0: str
    halt_1: str
    transitions: Mapping[tuple[str, int], tuple[str, int, str]]  # (state, read) -> (next, write, move)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def halt_states(self) -> frozenset[str]:
        return frozenset((self.halt_0, self.halt_1))


def validate_tm(tm: TuringMachine) -> list[Violation]:
    out: list[Violation] = []
    if tm.halt_0 == tm.halt_1:
        out.append(Violation("halt-collision", tm.halt_0, "halt_0 and halt_1 must differ"))
    for name, role in ((tm.initial_state, "initial"), (tm.halt_0, "halt_0"), (tm.halt_1, "halt_1")):
        if name not in tm.states:
            out.append(Violation("unknown-state", name, f"{role} state not in state set"))
    for (state, read), (next_state, write, move) in sorted(tm.transitions.items()):
        subject = f"({state!r}, {read})"
        if state not in tm.states:
            out.append(Violation("unknown-state", subject, "source state not declared"))
        if state in tm.halt_states:
            out.append(Violation("halt-outgoing", subject, "halt state has an outgoing transition"))
        if read not in (0, 1) or write not in (0, 1):
            out.append(Violation("bad-symbol", subject, "tape symbols must be 0 or 1"))
        if move not in MOVES:
            out.append(Violation("bad-move", subject, f"move must be one of {MOVES}"))
        if next_state not in tm.states:
            out.append(Violation("unknown-state", subject, f"successor {next_state!r} not declared"))
    for state in sorted(tm.states - tm.halt_states):
        for read in (0, 1):
            if (state, read) not in tm.transitions:
                out.append(Violation("totality", f"({state!r}, {read})", "no transition for this reading"))
    return out


def tm_initial_config(tm: TuringMachine, tape: str = "") -> TmConfig:
    """Head on the leftmost cell of `tape`; empty tape reads blank."""
    if any(c not in "01" for c in tape):
        raise ValueError(f"tape must be over {{0,1}}, got {tape!r}")
    head = int(tape[0]) if tape else 0
    return TmConfig(tm.initial_state, "", head, tape[1:])


def tm_step(tm: TuringMachine, config: TmConfig) -> TmConfig:
    """Standard single-step semantics; never-visited cells read blank (0)."""
    if config.state in tm.halt_states:
        raise HaltedMachine(f"machine already halted in {config.state}")
    next_state, write, move = tm.transitions[(config.state, config.head)]
    if move == "R":
        left = str(write) + config.left
        head = int(config.right[0]) if config.right else 0
        right = config.right[1:]
    else:
        right = str(write) + config.right
        head = int(config.left[0]) if config.left else 0
        left = config.left[1:]
    return TmConfig(next_state, left, head, right)


def tm_run(tm: TuringMachine, tape: str, max_steps: int) -> RunResult:
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    config = tm_initial_config(tm, tape)
    configs = [config]
    if config.state in tm.halt_states:
        return RunResult(_verdict(tm, config.state), 0, tuple(configs))
    for t in range(1, max_steps + 1):
        config = tm_step(tm, config)
        configs.append(config)
        if config.state in tm.halt_states:
            return RunResult(_verdict(tm, config.state), t, tuple(configs))
    return RunResult("timeout", None, tuple(configs))


# ---------------------------------------------------------------------------
# Machine files (JSON)


def machine_to_json(machine: TwoStackPDA | TuringMachine) -> dict:
    """Canonical JSON form; PDA rows are fully expanded and sorted."""
    if isinstance(machine, TwoStackPDA):
        rows = [
            {
                "state": state,
                "top_a": ta,
                "empty_a": ea,
                "top_b": tb,
                "empty_b": eb,
                "input": sym,
                "next": nxt,
                "action_a": act_a,
                "action_b": act_b,
            }
            for (state, ta, ea, tb, eb, sym), (nxt, act_a, act_b) in sorted(machine.transitions.items())
        ]
        kind = "pda2"
    else:
        rows = [
            {"state": state, "read": read, "next": nxt, "write": write, "move": move}
            for (state, read), (nxt, write, move) in sorted(machine.transitions.items())
        ]
        kind = "tm"
    doc = {
        "kind": kind,
        "states": sorted(machine.states),
        "initial": machine.initial_state,
        "halt_0": machine.halt_0,
        "halt_1": machine.halt_1,
        "transitions": rows,
    }
    if machine.metadata:
        doc["metadata"] = dict(machine.metadata)
    return doc


def _guard_field(row: Mapping[str, Any], name: str) -> int | None:
    value = row.get(name, "*")
    if value == "*" or value is None:
        return None
    if value in (0, 1):
        return value
    raise ValueError(f"transition field {name} must be 0, 1 or '*', got {value!r}")


def machine_from_json(doc: Mapping[str, Any]) -> TwoStackPDA | TuringMachine:
    kind = doc.get("kind")
    required = ("states", "initial", "halt_0", "halt_1", "transitions")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ValueError(f"machine file is missing keys: {missing}")
    metadata = doc.get("metadata", {})
    if kind == "pda2":
        rules = []
        for row in doc["transitions"]:
            sym = row.get("input", "*")
            rules.append(
                Rule(
                    state=row["state"],
                    next_state=row["next"],
                    action_a=row.get("action_a", "noop"),
                    action_b=row.get("action_b", "noop"),
                    top_a=_guard_field(row, "top_a"),
                    empty_a=_guard_field(row, "empty_a"),
                    top_b=_guard_field(row, "top_b"),
                    empty_b=_guard_field(row, "empty_b"),
                    input=None if sym in ("*", None) else sym,
                )
            )
        return TwoStackPDA.from_rules(
            states=doc["states"],
            initial_state=doc["initial"],
            halt_0=doc["halt_0"],
            halt_1=doc["halt_1"],
            rules=rules,
            metadata=metadata,
        )
    if kind == "tm":
        transitions = {
            (row["state"], row["read"]): (row["next"], row["write"], row["move"])
            for row in doc["transitions"]
        }
        return TuringMachine(
            states=frozenset(doc["states"]),
            initial_state=doc["initial"],
            halt_0=doc["halt_0"],
            halt_1=doc["halt_1"],
            transitions=transitions,
            metadata=dict(metadata),
        )
    raise ValueError(f"unknown machine kind {kind!r} (expected 'tm' or 'pda2')")


def load_machine(path: str | Path) -> TwoStackPDA | TuringMachine:
    with open(path, "r", encoding="utf-8") as fh:
        return machine_from_json(json.load(fh))


def save_machine(machine: TwoStackPDA | TuringMachine, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(machine_to_json(machine), fh, indent=2, sort_keys=False)
        fh.write("\n")
