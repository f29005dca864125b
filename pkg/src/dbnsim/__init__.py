"""dbnsim: machines compiled to hybrid dynamic Bayesian networks, run by
exact forward filtering.

The pipeline: a Turing machine compiles to a two-stack PDA (`tm_to_pda`),
a PDA compiles to a 2-slice network (`pda_to_dbn`) whose stacks are
rational-encoded point masses, and the filtering engine (`decide`,
`filter_step`) reproduces the machine's run, including halting and
acceptance, as posterior marginals. `enumerate_unrolled`, `collapse` and
`forward` provide independent oracles; `pda_run`/`tm_run` simulate
machines directly.
"""

from .automata import (
    HaltedMachine,
    PdaConfig,
    PopOnEmpty,
    Rule,
    RunResult,
    TmConfig,
    TuringMachine,
    TwoStackPDA,
    Violation,
    load_machine,
    machine_from_json,
    machine_to_json,
    pda_run,
    pda_step,
    save_machine,
    tm_initial_config,
    tm_run,
    tm_step,
    validate_pda,
    validate_tm,
)
from .compiler import TM_STEP_DILATION, network_metadata, pda_to_dbn, tape_config, tm_to_pda
from .dbn import (
    CategoricalPrior,
    DbnSpec,
    DiracPrior,
    LinearDiracCpd,
    NodeDecl,
    SoftThresholdCpd,
    TableCpd,
    ThresholdCpd,
    ValidationFailed,
    load_network,
    load_spec,
    save_spec,
    spec_from_json,
    spec_to_json,
    topological_order,
    unroll,
    validate,
)
from .hmm import CollapsedHmm, NotDiscrete, collapse, forward, hmm_to_json, output_marginal, project_hidden
from .inference import (
    DEFAULT_COMPONENT_CAP,
    EXACT,
    BeliefComponent,
    BeliefState,
    ComponentOverflow,
    DecideResult,
    Mode,
    OpCounter,
    SupportTooLarge,
    TraceRecord,
    ZeroEvidenceProbability,
    decide,
    enumerate_unrolled,
    filter_step,
    init,
    iter_filter,
)
from .stackcodec import (
    EmptyStack,
    InvalidEncoding,
    ThresholdAmbiguous,
    TopMismatch,
    decode,
    depth,
    encode,
    heaviside,
    is_empty,
    is_valid,
    logistic,
    pop,
    push,
    top,
)
from . import fixtures, randgen

__version__ = "0.1.0"
