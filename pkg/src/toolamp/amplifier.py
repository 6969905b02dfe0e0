"""Two-stage greedy construction of the best agent composite tool.

Stage 1 ("atomic-to-composite") wraps each starting tool in successive
agent layers, keeping layers only while the validation score improves
by at least ``delta``; every built layer joins the shared library as a
captured variant named ``{base}_{layer}``.  Stage 2 ("cross-composite
synergy") repeatedly pairs the best library entry with the next
``top_k`` entries, keeps the round's candidates when the best of them
beats the global best, and stops at the first non-improving round.

All scoring is delegated to a scorer callable so synthetic fitness
landscapes can be swapped in; the default scorer instantiates the tree
and runs it over the validation set with per-instance derived seeds,
which makes results independent of evaluation order and worker count.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .base import check_positive_int, check_seed
from .composition import (
    CompositionTree,
    Leaf,
    encapsulate,
    instantiate,
    leaves,
    parse_name,
    serialize_name,
)
from .errors import ConfigurationError, DataError, ToolFailure, UnknownToolError
from .metrics import (
    DISTANCE_METRICS,
    METRIC_IDS,
    ScoreReport,
    aggregate,
    score_instance,
    zero_scores,
)
from .runtime import RESERVE_ANSWER
from .seeding import stable_u64
from .toolkit import PUBLIC_NAME_RE, CostLedger, ToolRegistry, invoke

STAGES = ("atomic", "stage1", "stage2")


@dataclass(frozen=True)
class SearchConfig:
    """Search hyperparameters.  Defaults: delta=0.01, top_k=3,
    max_layers=8, max_stage2_rounds=5; all overridable."""

    delta: float = 0.01
    top_k: int = 3
    max_layers: int = 8
    max_stage2_rounds: int = 5
    fitness_metric: str = "accuracy"
    seed: int = 0
    validation: tuple = ()
    n_workers: int = 1

    def __post_init__(self):
        if not isinstance(self.delta, (int, float)) or self.delta < 0 or self.delta != self.delta:
            raise ConfigurationError(f"delta must be a finite non-negative real, got {self.delta!r}")
        check_positive_int(self.top_k, "top_k")
        check_positive_int(self.max_layers, "max_layers")
        check_positive_int(self.max_stage2_rounds, "max_stage2_rounds")
        check_positive_int(self.n_workers, "n_workers")
        check_seed(self.seed)
        if self.fitness_metric not in METRIC_IDS:
            raise ConfigurationError(f"unknown fitness metric {self.fitness_metric!r}")
        if self.fitness_metric in DISTANCE_METRICS:
            raise ConfigurationError(
                f"{self.fitness_metric} is a distance; fitness must be a higher-is-better metric"
            )


@dataclass
class LibraryEntry:
    """A scored composition: the unit both stages trade in."""

    tree: CompositionTree
    score: float
    metric_id: str
    stage: str
    ledger: CostLedger
    created_step: int
    depth: int = 0
    report: ScoreReport | None = field(default=None, repr=False)

    @property
    def name(self) -> str:
        return serialize_name(self.tree)

    def row(self) -> dict:
        return {
            "name": self.name,
            "score": self.score,
            "metric": self.metric_id,
            "stage": self.stage,
            "depth": self.depth,
            "tokens": self.ledger.all_tokens,
            "created_step": self.created_step,
        }


@dataclass
class AmplificationResult:
    best: LibraryEntry
    library: list[LibraryEntry]
    per_candidate_reports: list[ScoreReport]
    total_ledger: CostLedger


# --------------------------------------------------------------------------
# scoring


def score_candidate(
    tree: CompositionTree,
    validation,
    fitness_metric: str,
    seed: int,
    registry: ToolRegistry,
    policy_factory=None,
    n_workers: int = 1,
) -> ScoreReport:
    """Instantiate the tree and score it over the validation set.

    Pure given (tree, validation, seed): per-instance seeds derive from
    the run seed and the instance id, and the policy's random scope is
    the tree's structural name, so repetition, worker count, and what
    else has been scored never change the outcome.  Tool failures and
    reserve answers score zero for their instance and are tallied.
    """
    report, _ = _score_with_ledger(
        tree, validation, fitness_metric, seed, registry, policy_factory, n_workers
    )
    return report


def _score_with_ledger(
    tree, validation, fitness_metric, seed, registry, policy_factory, n_workers
) -> tuple[ScoreReport, CostLedger]:
    validation = list(validation)
    if not validation:
        raise ConfigurationError("validation set must be nonempty")
    tool_id = instantiate(tree, registry, policy_factory)

    def one(instance):
        ledger = CostLedger()
        instance_seed = stable_u64(seed, instance.id)
        try:
            answer = invoke(registry, tool_id, instance.input, ledger, instance_seed)
        except ToolFailure:
            return zero_scores(instance.task_kind, instance.gold), ledger, 1
        if answer == RESERVE_ANSWER:
            return zero_scores(instance.task_kind, instance.gold), ledger, 0
        return score_instance(instance.task_kind, answer, instance.gold), ledger, 0

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one, validation))
    else:
        results = [one(instance) for instance in validation]

    total = CostLedger()
    for _, ledger, _ in results:
        total.absorb(ledger)
    failures = sum(failed for _, _, failed in results)
    report = aggregate([scores for scores, _, _ in results], fitness_metric, failures=failures)
    return report, total


def make_scorer(registry, config: SearchConfig, policy_factory=None):
    """Default scorer: validation-set scoring with the config's seed."""

    def scorer(tree: CompositionTree) -> tuple[ScoreReport, CostLedger]:
        return _score_with_ledger(
            tree,
            config.validation,
            config.fitness_metric,
            config.seed,
            registry,
            policy_factory,
            config.n_workers,
        )

    return scorer


def _entry_depth(tree: CompositionTree, registry: ToolRegistry) -> int:
    """Stacking depth counting captured variants: a leaf's registered
    depth, or one above the deepest child."""
    if isinstance(tree, Leaf):
        tool_id = registry.resolve_public(tree.public_name)
        return registry.descriptor(tool_id).depth if tool_id else tree.depth_suffix
    return 1 + max(_entry_depth(child, registry) for child in tree.children)


class _StepCounter:
    def __init__(self):
        self.value = 0

    def next(self) -> int:
        self.value += 1
        return self.value


# --------------------------------------------------------------------------
# stage 1: atomic-to-composite amplification


def stage1(
    tool: Leaf,
    config: SearchConfig,
    registry: ToolRegistry,
    scorer=None,
    policy_factory=None,
    _steps: _StepCounter | None = None,
) -> list[LibraryEntry]:
    """Layer agents around one tool while the score keeps improving.

    Layer 1 wraps the raw tool; layer i+1 wraps the raw tool together
    with the captured layer-i variant.  The atomic tool and every built
    layer (including the final, non-improving one) are returned.
    """
    scorer = scorer or make_scorer(registry, config, policy_factory)
    steps = _steps or _StepCounter()
    entries = []

    report, ledger = scorer(tool)
    entries.append(
        LibraryEntry(
            tree=tool,
            score=report.fitness,
            metric_id=config.fitness_metric,
            stage="atomic",
            ledger=ledger,
            created_step=steps.next(),
            depth=_entry_depth(tool, registry),
            report=report,
        )
    )
    previous_score = report.fitness

    base = tool.base_name
    raw = tool
    for layer in range(1, config.max_layers + 1):
        if layer == 1:
            children = (raw,)
        else:
            children = (raw, Leaf(base, tool.depth_suffix + layer - 1))
        policy = policy_factory(layer) if policy_factory else None
        candidate = encapsulate(children, policy)
        variant_name = f"{base}_{tool.depth_suffix + layer}"
        instantiate(candidate, registry, policy_factory, public_name=variant_name)
        report, ledger = scorer(candidate)
        captured = Leaf(base, tool.depth_suffix + layer)
        entries.append(
            LibraryEntry(
                tree=captured,
                score=report.fitness,
                metric_id=config.fitness_metric,
                stage="stage1",
                ledger=ledger,
                created_step=steps.next(),
                depth=_entry_depth(captured, registry),
                report=report,
            )
        )
        if report.fitness - previous_score < config.delta:
            break
        previous_score = report.fitness
    return entries


# --------------------------------------------------------------------------
# stage 2: cross-composite synergy


def _sort_key(entry: LibraryEntry):
    # score descending; ties prefer the shallower tree, then the smaller name
    return (-entry.score, entry.depth, entry.name)


def stage2(
    library: list[LibraryEntry],
    config: SearchConfig,
    registry: ToolRegistry,
    scorer=None,
    policy_factory=None,
    _steps: _StepCounter | None = None,
) -> tuple[LibraryEntry, list[LibraryEntry]]:
    """Pair the best entry with the next top-k and keep stacking while it
    helps.  Returns the global best entry and every candidate built (the
    final non-improving round's candidates included, so callers can
    report everything that was validated)."""
    if len(library) < 2:
        raise ConfigurationError("stage 2 needs a library with at least 2 entries")
    scorer = scorer or make_scorer(registry, config, policy_factory)
    steps = _steps or _StepCounter()
    working = list(library)
    built: list[LibraryEntry] = []
    best_score = max(entry.score for entry in working)

    for _ in range(config.max_stage2_rounds):
        ranked = sorted(working, key=_sort_key)
        anchor, partners = ranked[0], ranked[1 : 1 + config.top_k]
        if not partners:
            break
        round_entries = []
        for partner in partners:
            policy = policy_factory(None) if policy_factory else None
            candidate = encapsulate((anchor.tree, partner.tree), policy)
            report, ledger = scorer(candidate)
            round_entries.append(
                LibraryEntry(
                    tree=candidate,
                    score=report.fitness,
                    metric_id=config.fitness_metric,
                    stage="stage2",
                    ledger=ledger,
                    created_step=steps.next(),
                    depth=_entry_depth(candidate, registry),
                    report=report,
                )
            )
        built.extend(round_entries)
        round_best = max(entry.score for entry in round_entries)
        if round_best > best_score:
            working.extend(round_entries)
            best_score = round_best
        else:
            break

    best = min(working + built, key=_sort_key)
    return best, built


# --------------------------------------------------------------------------
# end to end


def leaf_for_tool(registry: ToolRegistry, tool_id: str) -> Leaf:
    descriptor = registry.descriptor(tool_id)
    match = PUBLIC_NAME_RE.match(descriptor.public_name)
    return Leaf(match.group("base"), int(match.group("num")))


def ensure_variants(
    tree: CompositionTree, registry: ToolRegistry, policy_factory=None
) -> None:
    """Rebuild captured stage-1 variants that a persisted name refers to.

    A leaf suffix above any registered variant of the same base denotes
    further amplification layers; those are reconstructed with the
    stage-1 wrapping rule (layer 1 wraps the anchor tool alone, layer
    i+1 wraps the anchor with the previous variant).  Behavioral policy
    comes from the caller's factory: name strings never encode it.
    """
    todo = [tree] if isinstance(tree, Leaf) else list(leaves(tree))
    for leaf in todo:
        if registry.resolve_public(leaf.public_name) is not None:
            continue
        anchors = [
            suffix
            for suffix in range(leaf.depth_suffix)
            if registry.resolve_public(f"{leaf.base_name}_{suffix}") is not None
        ]
        if not anchors:
            raise UnknownToolError(
                f"cannot rebuild {leaf.public_name!r}: no registered variant of "
                f"{leaf.base_name!r} to amplify from"
            )
        anchor = max(anchors)
        raw = Leaf(leaf.base_name, anchor)
        for layer in range(1, leaf.depth_suffix - anchor + 1):
            target = f"{leaf.base_name}_{anchor + layer}"
            if registry.resolve_public(target) is not None:
                continue
            if layer == 1:
                children = (raw,)
            else:
                children = (raw, Leaf(leaf.base_name, anchor + layer - 1))
            policy = policy_factory(layer) if policy_factory else None
            instantiate(
                encapsulate(children, policy), registry, policy_factory,
                public_name=target,
            )


def run(
    config: SearchConfig,
    tool_ids: list[str],
    registry: ToolRegistry,
    scorer=None,
    policy_factory=None,
) -> AmplificationResult:
    """Full search: stage 1 per tool, union into the library, stage 2."""
    if not tool_ids:
        raise ConfigurationError("amplification needs at least one tool")
    scorer = scorer or make_scorer(registry, config, policy_factory)
    steps = _StepCounter()
    library: list[LibraryEntry] = []
    for tool_id in tool_ids:
        library.extend(
            stage1(leaf_for_tool(registry, tool_id), config, registry, scorer,
                   policy_factory, _steps=steps)
        )
    if len(library) >= 2:
        best, extra = stage2(library, config, registry, scorer, policy_factory, _steps=steps)
        library = library + extra
    else:
        best = library[0]
    total = CostLedger()
    for entry in library:
        total.absorb(entry.ledger)
    return AmplificationResult(
        best=best,
        library=library,
        per_candidate_reports=[entry.report for entry in library],
        total_ledger=total,
    )


# --------------------------------------------------------------------------
# persistence: one JSON object per line, canonical key order


def save_library(entries: list[LibraryEntry], path) -> None:
    lines = [json.dumps(entry.row(), sort_keys=True) for entry in entries]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_library(path) -> list[dict]:
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            parse_name(row["name"])  # validate the stored name string
            rows.append(row)
        except (ValueError, KeyError) as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from exc
    return rows
