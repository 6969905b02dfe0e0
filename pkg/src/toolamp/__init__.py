"""toolamp: greedy hierarchical amplification of agent tools.

Atomic tools are wrapped into agent composite tools layer by layer, the
scored results feed a cross-composite pairing search, and the winner is
itself an invocable tool.  ``ToolAmplifier`` exposes the search through
a scikit-learn style fit/predict interface; the submodules carry the
functional pieces (metrics, toolkit, runtime, composition, amplifier,
topologies).
"""

from .amplifier import (
    AmplificationResult,
    LibraryEntry,
    SearchConfig,
    ensure_variants,
    load_library,
    run,
    save_library,
    score_candidate,
    stage1,
    stage2,
)
from .composition import (
    Leaf,
    Node,
    depth,
    display_name,
    encapsulate,
    instantiate,
    leaves,
    parse_name,
    serialize_name,
)
from .data import ValidationInstance, load_dataset, save_dataset
from .estimator import ToolAmplifier, as_instances
from .metrics import (
    Bitset,
    MetricValue,
    ScoreReport,
    TokenSequence,
    aggregate,
    bleu,
    exact_match,
    external_validator,
    hashed_fingerprint,
    levenshtein,
    rouge_l,
    rouge_n,
    score_instance,
    smiles_lite_valid,
    tanimoto,
    tokenize,
)
from .runtime import (
    RESERVE_ANSWER,
    AgentOutcome,
    PlannerPolicy,
    ReActStep,
    remote_plan,
    render_prompt,
    run_react,
)
from .simenv import SimEnvSpec, SimToolSpec, build_registry, gen_simenv
from .toolkit import (
    CostLedger,
    CostModel,
    ToolDescriptor,
    ToolRegistry,
    call_line_protocol,
    estimate_tokens,
    invoke,
    register_tool,
)
from .topologies import TopologySpec, build_topology, final_refer, run_network

__version__ = "0.1.0"

__all__ = [
    "AgentOutcome",
    "AmplificationResult",
    "Bitset",
    "CostLedger",
    "CostModel",
    "Leaf",
    "LibraryEntry",
    "MetricValue",
    "Node",
    "PlannerPolicy",
    "RESERVE_ANSWER",
    "ReActStep",
    "ScoreReport",
    "SearchConfig",
    "SimEnvSpec",
    "SimToolSpec",
    "TokenSequence",
    "ToolAmplifier",
    "ToolDescriptor",
    "ToolRegistry",
    "TopologySpec",
    "ValidationInstance",
    "aggregate",
    "as_instances",
    "bleu",
    "build_registry",
    "build_topology",
    "call_line_protocol",
    "depth",
    "display_name",
    "encapsulate",
    "ensure_variants",
    "estimate_tokens",
    "exact_match",
    "external_validator",
    "final_refer",
    "gen_simenv",
    "hashed_fingerprint",
    "instantiate",
    "invoke",
    "leaves",
    "levenshtein",
    "load_dataset",
    "load_library",
    "parse_name",
    "register_tool",
    "remote_plan",
    "render_prompt",
    "rouge_l",
    "rouge_n",
    "run",
    "run_network",
    "run_react",
    "save_dataset",
    "save_library",
    "score_candidate",
    "score_instance",
    "serialize_name",
    "smiles_lite_valid",
    "stage1",
    "stage2",
    "tanimoto",
    "tokenize",
]
