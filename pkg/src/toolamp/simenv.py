"""Synthetic desk-scale environments: random gold answers plus noisy
oracle tools bound to them.

These stand in for external model-backed tools so search behavior can
be checked against closed-form expectations.
"""

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .base import check_probability
from .data import ValidationInstance, gold_map
from .errors import ConfigurationError, DataError
from .toolkit import CostModel, ToolDescriptor, ToolRegistry, noisy_oracle_descriptor


@dataclass(frozen=True)
class SimToolSpec:
    name: str
    p_correct: float
    perturber: str = "substitute_char"

    def __post_init__(self):
        check_probability(self.p_correct, f"tool {self.name!r} p_correct")


@dataclass(frozen=True)
class SimEnvSpec:
    n_instances: int = 100
    alphabet: str = "abcd"
    answer_length: int = 8
    tools: tuple[SimToolSpec, ...] = (SimToolSpec("oracle", 1.0),)
    judge_accuracy: float = 1.0
    modify_success: float = 0.0
    reserve_prob: float = 0.0
    seed: int = 0
    task_kind: str = "property_prediction"

    def __post_init__(self):
        if self.n_instances < 1:
            raise ConfigurationError("n_instances must be >= 1")
        if not self.alphabet:
            raise ConfigurationError("alphabet must be nonempty")
        check_probability(self.judge_accuracy, "judge_accuracy")
        check_probability(self.modify_success, "modify_success")
        check_probability(self.reserve_prob, "reserve_prob")

    @classmethod
    def from_json(cls, obj: dict) -> "SimEnvSpec":
        try:
            tools = tuple(
                SimToolSpec(t["name"], t["p_correct"], t.get("perturber", "substitute_char"))
                for t in obj.get("tools", [])
            ) or cls().tools
            return cls(
                n_instances=obj.get("n_instances", 100),
                alphabet=obj.get("alphabet", "abcd"),
                answer_length=obj.get("answer_length", 8),
                tools=tools,
                judge_accuracy=obj.get("judge_accuracy", 1.0),
                modify_success=obj.get("modify_success", 0.0),
                reserve_prob=obj.get("reserve_prob", 0.0),
                seed=obj.get("seed", 0),
                task_kind=obj.get("task_kind", "property_prediction"),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad simulation spec: {exc}") from exc


def load_simenv_spec(path) -> SimEnvSpec:
    path = Path(path)
    if not path.exists():
        raise DataError(f"simulation spec not found: {path}")
    try:
        return SimEnvSpec.from_json(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from exc


def gen_simenv(spec: SimEnvSpec) -> tuple[list[ValidationInstance], list[ToolDescriptor]]:
    """Deterministically generate the dataset and the tool descriptors.

    Gold answers are random strings over the alphabet; each tool entry
    becomes a noisy oracle with the given per-query correctness
    probability, reading gold from the environment gold source.
    """
    rng = random.Random(spec.seed)
    instances = []
    for i in range(spec.n_instances):
        gold = "".join(rng.choice(spec.alphabet) for _ in range(spec.answer_length))
        instances.append(
            ValidationInstance(
                id=f"sim-{i:05d}",
                input=f"q{i:05d}-{gold[: min(4, len(gold))]}",
                gold=gold,
                task_kind=spec.task_kind,
            )
        )
    descriptors = [
        noisy_oracle_descriptor(f"{tool.name}_0", tool.p_correct, tool.perturber)
        for tool in spec.tools
    ]
    return instances, descriptors


def build_registry(
    descriptors,
    instances=None,
    cost_model: CostModel | None = None,
) -> ToolRegistry:
    """Registry wired to the environment: descriptors registered and the
    instances' gold map installed as the shared gold source."""
    registry = ToolRegistry(
        cost_model=cost_model,
        gold_source=gold_map(instances) if instances else None,
    )
    for descriptor in descriptors:
        registry.register(descriptor)
    return registry
