"""Command-line surface: compile machines, validate files, run filtered
simulations with JSONL traces, compare against the direct oracle, collapse
discrete networks to HMMs.

Exit codes: 0 success (a run's TIMEOUT still counts as a produced result),
1 usage or I/O trouble, 2 validation or semantic failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import compiler
from .automata import (
    TuringMachine,
    TwoStackPDA,
    load_machine,
    pda_run,
    save_machine,
    tm_run,
    validate_pda,
    validate_tm,
)
from .dbn import ValidationFailed, load_network, save_spec, spec_from_json, validate
from .hmm import NotDiscrete, collapse, hmm_to_json
from .inference import (
    DEFAULT_COMPONENT_CAP,
    EXACT,
    ComponentOverflow,
    Mode,
    ZeroEvidenceProbability,
    decide,
)
from .stackcodec import encode, format_rational

COMPONENT_CAP_ENV = "DBNSIM_COMPONENT_CAP"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments; the exit-code contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _component_cap() -> int:
    raw = os.environ.get(COMPONENT_CAP_ENV)
    if raw is None:
        return DEFAULT_COMPONENT_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{COMPONENT_CAP_ENV} must be an integer, got {raw!r}")
    if cap < 1:
        raise ValueError(f"{COMPONENT_CAP_ENV} must be positive")
    return cap


def _mode(args) -> Mode:
    if args.mode == "soft":
        return Mode.soft(args.k)
    return EXACT


def _check_bits(s: str, what: str) -> str:
    if any(c not in "01" for c in s):
        raise ValueError(f"{what} must be a string over {{0,1}}, got {s!r}")
    return s


def _print_violations(violations) -> None:
    for v in violations:
        print(str(v), file=sys.stderr)


def cmd_compile(args) -> int:
    machine = load_machine(args.infile)
    if args.what == "tm":
        if not isinstance(machine, TuringMachine):
            print(f"{args.infile} is not a Turing machine file", file=sys.stderr)
            return 2
        violations = validate_tm(machine)
        if violations:
            _print_violations(violations)
            return 2
        save_machine(compiler.tm_to_pda(machine), args.outfile)
        return 0
    if not isinstance(machine, TwoStackPDA):
        print(f"{args.infile} is not a two-stack PDA file", file=sys.stderr)
        return 2
    violations = validate_pda(machine)
    if violations:
        _print_violations(violations)
        return 2
    initial = compiler.tape_config(machine, _check_bits(args.tape, "--tape")) if args.tape else None
    spec = compiler.pda_to_dbn(machine, initial=initial)
    metadata = compiler.network_metadata(machine, spec)
    if args.tape:
        metadata["tape"] = args.tape
    save_spec(spec, args.outfile, metadata=metadata)
    return 0


def cmd_validate(args) -> int:
    with open(args.infile, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "kind" in doc:
        machine = load_machine(args.infile)
        violations = validate_tm(machine) if isinstance(machine, TuringMachine) else validate_pda(machine)
    elif "nodes" in doc:
        violations = validate(spec_from_json(doc))
    else:
        print(f"{args.infile}: neither a machine file (kind) nor a network file (nodes)", file=sys.stderr)
        return 1
    if violations:
        _print_violations(violations)
        return 2
    print("OK")
    return 0


def cmd_run(args) -> int:
    spec, _meta = load_network(args.network)
    inputs = _check_bits(args.input, "--input")
    mode = _mode(args)
    sink = None
    trace_fh = None
    if args.trace:
        trace_fh = open(args.trace, "w", encoding="utf-8")

        def sink(record):
            trace_fh.write(json.dumps(record.to_json_dict(exact=mode.is_exact)) + "\n")

    try:
        result = decide(
            spec,
            inputs,
            max_steps=args.max_steps,
            mode=mode,
            component_cap=_component_cap(),
            record_sink=sink,
        )
    finally:
        if trace_fh is not None:
            trace_fh.close()
    if result.verdict == "accept":
        print(f"ACCEPT t={result.step}")
    elif result.verdict == "reject":
        print(f"REJECT t={result.step}")
    else:
        print("TIMEOUT")
    return 0


def _oracle_verdict(verdict: str) -> str:
    return {"halt_0": "reject", "halt_1": "accept", "timeout": "timeout"}[verdict]


def cmd_compare(args) -> int:
    machine = load_machine(args.machine)
    inputs = _check_bits(args.input, "--input")
    mode = _mode(args)
    if isinstance(machine, TuringMachine):
        pda = compiler.tm_to_pda(machine)
        initial = compiler.tape_config(pda, inputs)
        oracle = pda_run(pda, "", args.max_steps, initial=initial)
        spec = compiler.pda_to_dbn(pda, initial=initial)
        result = decide(spec, "", args.max_steps, mode=mode, component_cap=_component_cap())
        tm_oracle = tm_run(machine, inputs, max(1, args.max_steps // compiler.TM_STEP_DILATION))
        if tm_oracle.halted != oracle.halted or (
            tm_oracle.halted and oracle.step != compiler.TM_STEP_DILATION * tm_oracle.step
        ):
            print(f"tm/pda oracles disagree: tm={tm_oracle.verdict}@{tm_oracle.step} pda={oracle.verdict}@{oracle.step}")
            return 2
    else:
        pda = machine
        oracle = pda_run(pda, inputs, args.max_steps)
        spec = compiler.pda_to_dbn(pda)
        result = decide(spec, inputs, args.max_steps, mode=mode, component_cap=_component_cap())

    ok = _oracle_verdict(oracle.verdict) == result.verdict and oracle.step == (
        result.step if result.verdict != "timeout" else None
    )
    divergence = None
    for record in result.records:
        t = record.step
        if t >= len(oracle.configs):
            break
        config = oracle.configs[t]
        expected = {
            "State": {config.state: 1},
            "Stack_a": {encode(config.stack_a): 1},
            "Stack_b": {encode(config.stack_b): 1},
        }
        for node, want in expected.items():
            got = record.predicted[node]
            if set(got) != set(want) or any(got[k] != 1 for k in got):
                pretty = {
                    (format_rational(k) if not isinstance(k, str) else k): str(v)
                    for k, v in got.items()
                }
                divergence = (t, node, pretty)
                break
        if divergence:
            break

    print(f"oracle:    {oracle.verdict} step={oracle.step}")
    print(f"inference: {result.verdict} step={result.step}")
    if divergence is None and ok:
        print("MATCH")
        return 0
    if divergence:
        t, node, got = divergence
        print(f"first divergence at step {t}: {node} posterior {got}")
    else:
        print("verdict/step mismatch")
    return 2


def cmd_collapse(args) -> int:
    spec, _meta = load_network(args.network)
    try:
        hmm = collapse(spec)
    except NotDiscrete as exc:
        print(f"not collapsible: {exc}", file=sys.stderr)
        return 2
    doc = hmm_to_json(hmm)
    if args.outfile:
        with open(args.outfile, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        json.dump(doc, sys.stdout, indent=2)
        print()
    return 0


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dbnsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a machine one stage down the pipeline")
    psub = p.add_subparsers(dest="what", required=True)
    for what, blurb in (("tm", "Turing machine -> two-stack PDA"), ("pda", "two-stack PDA -> network")):
        q = psub.add_parser(what, help=blurb)
        q.add_argument("infile")
        q.add_argument("-o", "--outfile", required=True)
        if what == "pda":
            q.add_argument("--tape", default="", help="preload stack b with this tape (compiled TMs)")
        q.set_defaults(func=cmd_compile, what=what)

    p = sub.add_parser("validate", help="validate a machine or network file")
    p.add_argument("infile")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="filter a compiled network over an input string")
    p.add_argument("network")
    p.add_argument("--input", default="", help="binary input string (end-padded)")
    p.add_argument("--max-steps", type=_positive_int, default=1000)
    p.add_argument("--mode", choices=("exact", "soft"), default="exact")
    p.add_argument("--k", type=float, default=50.0, help="soft-mode threshold steepness")
    p.add_argument("--trace", help="write one JSON record per step to this file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run inference and the direct simulator side by side")
    p.add_argument("machine")
    p.add_argument("--input", default="", help="input string (tape contents for a TM)")
    p.add_argument("--max-steps", type=_positive_int, default=1000)
    p.add_argument("--mode", choices=("exact", "soft"), default="exact")
    p.add_argument("--k", type=float, default=50.0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("collapse", help="collapse a discrete network to an HMM")
    p.add_argument("network")
    p.add_argument("-o", "--outfile")
    p.set_defaults(func=cmd_collapse)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return 1
    except ValidationFailed as exc:
        _print_violations(exc.violations)
        return 2
    except (ZeroEvidenceProbability, ComponentOverflow, NotDiscrete) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
