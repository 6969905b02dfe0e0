"""Validation/test instances and their JSON Lines on-disk format."""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .metrics import TASK_KINDS


@dataclass(frozen=True)
class ValidationInstance:
    id: str
    input: str
    gold: str
    task_kind: str
    metadata: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.id:
            raise DataError("instance id must be nonempty")
        if not self.gold:
            raise DataError(f"instance {self.id!r}: gold answer must be nonempty")
        if self.task_kind not in TASK_KINDS:
            raise DataError(f"instance {self.id!r}: unknown task kind {self.task_kind!r}")

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "input": self.input,
            "gold": self.gold,
            "task_kind": self.task_kind,
        }
        if self.metadata:
            obj["metadata"] = self.metadata
        return obj


def _instance_from_json(obj: dict) -> ValidationInstance:
    missing = [key for key in ("id", "input", "gold", "task_kind") if key not in obj]
    if missing:
        raise DataError(f"missing fields {missing}")
    return ValidationInstance(
        id=obj["id"],
        input=obj["input"],
        gold=obj["gold"],
        task_kind=obj["task_kind"],
        metadata=dict(obj.get("metadata", {})),
    )


def load_dataset(path) -> list[ValidationInstance]:
    """Load a JSON Lines dataset, preserving order; malformed lines and
    duplicate ids are errors naming the offending line."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    instances = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            instance = _instance_from_json(json.loads(line))
        except (json.JSONDecodeError, DataError) as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from exc
        if instance.id in seen:
            raise DataError(f"{path}: line {lineno}: duplicate id {instance.id!r}")
        seen.add(instance.id)
        instances.append(instance)
    if not instances:
        raise DataError(f"{path}: dataset is empty")
    return instances


def save_dataset(instances, path) -> None:
    lines = [json.dumps(inst.to_json(), sort_keys=True) for inst in instances]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def gold_map(instances) -> dict[str, str]:
    """input -> gold mapping used as the environment gold source."""
    return {inst.input: inst.gold for inst in instances}
