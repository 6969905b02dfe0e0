"""Scikit-learn style front end for the amplification search.

``ToolAmplifier.fit`` runs the two-stage search against the validation
instances; afterwards the fitted composite answers new queries through
``predict`` and re-scores datasets through ``score``.  Hyperparameters
follow the estimator contract (``get_params``/``set_params``), so the
search composes with ecosystem utilities such as grid search and
cloning.
"""

from .amplifier import SearchConfig, run, score_candidate
from .base import BaseEstimator, check_is_fitted, check_probability, check_seed
from .composition import display_name, instantiate
from .data import ValidationInstance
from .errors import ConfigurationError, DataError
from .metrics import TASK_KINDS
from .runtime import PlannerPolicy
from .seeding import stable_u64
from .toolkit import CostLedger, ToolRegistry, invoke


def as_instances(X, task_kind: str = "property_prediction") -> list[ValidationInstance]:
    """Coerce fit/score inputs into validation instances.

    Accepts ValidationInstance objects, dicts with the dataset fields, or
    bare (input, gold) pairs (ids are assigned positionally).
    """
    instances = []
    for i, item in enumerate(X):
        if isinstance(item, ValidationInstance):
            instances.append(item)
        elif isinstance(item, dict):
            instances.append(
                ValidationInstance(
                    id=item.get("id", f"x-{i:05d}"),
                    input=item["input"],
                    gold=item["gold"],
                    task_kind=item.get("task_kind", task_kind),
                    metadata=dict(item.get("metadata", {})),
                )
            )
        elif isinstance(item, (tuple, list)) and len(item) == 2:
            instances.append(
                ValidationInstance(
                    id=f"x-{i:05d}", input=item[0], gold=item[1], task_kind=task_kind
                )
            )
        else:
            raise DataError(f"cannot interpret instance {item!r}")
    if not instances:
        raise DataError("X must contain at least one instance")
    ids = {inst.id for inst in instances}
    if len(ids) != len(instances):
        raise DataError("instance ids must be unique")
    return instances


class ToolAmplifier(BaseEstimator):
    """Greedy two-stage composite-tool search as an estimator.

    Parameters
    ----------
    registry : ToolRegistry with the atomic tools registered.
    tool_ids : tools to amplify; defaults to every registered tool.
    delta, top_k, max_layers, max_stage2_rounds, fitness_metric, seed :
        search hyperparameters (see SearchConfig).
    judge_accuracy, modify_success, reserve_prob : simulated planner
        branch probabilities used for every composite layer.
    modify_schedule : optional callable layer_index -> modify probability,
        overriding ``modify_success`` per stage-1 layer.
    task_kind : task kind assumed for bare (input, gold) pairs.
    n_workers : per-candidate scoring parallelism; results are identical
        to serial execution.

    Attributes (after fit)
    ----------------------
    result_ : the full AmplificationResult.
    best_tree_, best_name_, best_score_ : the winning composite.
    library_ : every validated entry.
    """

    def __init__(
        self,
        registry: ToolRegistry | None = None,
        tool_ids: list[str] | None = None,
        delta: float = 0.01,
        top_k: int = 3,
        max_layers: int = 8,
        max_stage2_rounds: int = 5,
        fitness_metric: str = "accuracy",
        seed: int = 0,
        judge_accuracy: float = 1.0,
        modify_success: float = 0.0,
        reserve_prob: float = 0.0,
        modify_schedule=None,
        task_kind: str = "property_prediction",
        n_workers: int = 1,
    ):
        self.registry = registry
        self.tool_ids = tool_ids
        self.delta = delta
        self.top_k = top_k
        self.max_layers = max_layers
        self.max_stage2_rounds = max_stage2_rounds
        self.fitness_metric = fitness_metric
        self.seed = seed
        self.judge_accuracy = judge_accuracy
        self.modify_success = modify_success
        self.reserve_prob = reserve_prob
        self.modify_schedule = modify_schedule
        self.task_kind = task_kind
        self.n_workers = n_workers

    def _validate(self):
        if self.registry is None:
            raise ConfigurationError("ToolAmplifier needs a registry of atomic tools")
        if self.task_kind not in TASK_KINDS:
            raise ConfigurationError(f"unknown task kind {self.task_kind!r}")
        check_probability(self.judge_accuracy, "judge_accuracy")
        check_probability(self.modify_success, "modify_success")
        check_probability(self.reserve_prob, "reserve_prob")
        check_seed(self.seed)

    def _policy_factory(self):
        def factory(layer):
            modify = self.modify_success
            if layer is not None and self.modify_schedule is not None:
                modify = self.modify_schedule(layer)
            return PlannerPolicy(
                judge_accuracy=self.judge_accuracy,
                modify_success=modify,
                reserve_prob=self.reserve_prob,
            )

        return factory

    def fit(self, X, y=None):
        """Search for the best composite over the validation instances."""
        self._validate()
        instances = as_instances(X, self.task_kind)
        config = SearchConfig(
            delta=self.delta,
            top_k=self.top_k,
            max_layers=self.max_layers,
            max_stage2_rounds=self.max_stage2_rounds,
            fitness_metric=self.fitness_metric,
            seed=self.seed,
            validation=tuple(instances),
            n_workers=self.n_workers,
        )
        tool_ids = list(self.tool_ids) if self.tool_ids else self.registry.tool_ids()
        result = run(config, tool_ids, self.registry, policy_factory=self._policy_factory())
        self.result_ = result
        self.best_tree_ = result.best.tree
        self.best_name_ = display_name(result.best.tree)
        self.best_score_ = result.best.score
        self.library_ = result.library
        return self

    def predict(self, X) -> list[str]:
        """Answer raw query strings with the fitted composite."""
        check_is_fitted(self)
        tool_id = instantiate(self.best_tree_, self.registry, self._policy_factory())
        answers = []
        for query in X:
            ledger = CostLedger()
            seed = stable_u64(self.seed, "predict", query)
            answers.append(invoke(self.registry, tool_id, query, ledger, seed))
        return answers

    def score(self, X, y=None) -> float:
        """Mean fitness of the fitted composite on the given instances."""
        check_is_fitted(self)
        instances = as_instances(X, self.task_kind)
        report = score_candidate(
            self.best_tree_,
            instances,
            self.fitness_metric,
            self.seed,
            self.registry,
            self._policy_factory(),
            n_workers=self.n_workers,
        )
        return report.fitness
