"""Atomic-tool abstraction with pluggable backends and cost accounting.

Every tool, whether a raw backend or an agent composite, is invocable
through the same ``invoke`` entry point, which also keeps the cost
ledger.  Randomized backends derive their outcome from
``hash(run_seed, tool_id, query)``, so the answer for a given triple is
the same no matter where or in what order it is requested.
"""

import math
import re
import string
import subprocess
import threading
from dataclasses import dataclass, field, replace

import requests

from .errors import (
    ConfigurationError,
    RegistrationError,
    ToolFailure,
    UnknownToolError,
)
from .seeding import derive_rng, unit_uniform

BACKENDS = ("table", "noisy_oracle", "external_command", "http", "composite")

PUBLIC_NAME_RE = re.compile(r"^(?P<base>.+)_(?P<num>\d+)$")

DEFAULT_FALLBACK = "UNKNOWN"

_PERTURB_ALPHABET = string.ascii_letters + string.digits


def estimate_tokens(text: str) -> int:
    """ceil(len/4): 0 for empty text, at least 1 otherwise."""
    if not text:
        return 0
    return math.ceil(len(text) / 4)


@dataclass
class CostLedger:
    """Token and simulated-time accounting for one run or sub-run.

    Merging is a fieldwise sum, so ledgers can be kept per task and
    combined at joins without locking.
    """

    prompt_tokens: int = 0
    completion_tokens: int = 0
    tool_tokens: int = 0
    calls: int = 0
    sim_time_ms: int = 0

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value < 0:
                raise ConfigurationError(f"ledger field {name} must be non-negative")

    def as_dict(self) -> dict[str, int]:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "tool_tokens": self.tool_tokens,
            "calls": self.calls,
            "sim_time_ms": self.sim_time_ms,
        }

    @property
    def all_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens + self.tool_tokens

    def merge(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
            self.tool_tokens + other.tool_tokens,
            self.calls + other.calls,
            self.sim_time_ms + other.sim_time_ms,
        )

    def absorb(self, other: "CostLedger") -> None:
        """In-place merge."""
        self.prompt_tokens += other.prompt_tokens
        self.completion_tokens += other.completion_tokens
        self.tool_tokens += other.tool_tokens
        self.calls += other.calls
        self.sim_time_ms += other.sim_time_ms


@dataclass(frozen=True)
class CostModel:
    """Declared latency model: a per-call constant plus a per-token increment."""

    per_call_ms: int = 50
    per_token_ms: int = 2

    def time_ms(self, tokens: int) -> int:
        return self.per_call_ms + self.per_token_ms * tokens


@dataclass(frozen=True)
class ToolDescriptor:
    """Registration record for one tool.

    ``public_name`` follows the anonymized ``{name}_{num}`` convention so
    that planners see no capability hints beyond the task name.  ``depth``
    is 0 for raw backends and the stacking depth for composites.
    """

    tool_id: str
    public_name: str
    description: str
    backend: str
    backend_params: dict = field(default_factory=dict)
    depth: int = 0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if not PUBLIC_NAME_RE.match(self.public_name):
            raise ConfigurationError(
                f"public name {self.public_name!r} must match '{{name}}_{{num}}'"
            )
        if (self.depth > 0) != (self.backend == "composite"):
            raise ConfigurationError(
                f"depth {self.depth} inconsistent with backend {self.backend!r}"
            )
        if self.depth < 0:
            raise ConfigurationError("depth must be non-negative")

    def to_json(self) -> dict:
        return {
            "tool_id": self.tool_id,
            "public_name": self.public_name,
            "description": self.description,
            "backend": self.backend,
            "backend_params": self.backend_params,
            "depth": self.depth,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ToolDescriptor":
        try:
            return cls(
                tool_id=obj["tool_id"],
                public_name=obj["public_name"],
                description=obj.get("description", ""),
                backend=obj["backend"],
                backend_params=dict(obj.get("backend_params", {})),
                depth=int(obj.get("depth", 0)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"tool descriptor missing field {exc}") from exc


class ToolRegistry:
    """Append-only registry mapping tool ids to invocation closures.

    Registration is single-writer (guarded by a lock); once registered,
    tools may be invoked from any number of threads.  ``gold_source``
    optionally maps queries to environment gold answers; it backs the
    noisy-oracle backend and the simulated judge.
    """

    def __init__(self, cost_model: CostModel | None = None, gold_source: dict | None = None):
        self.cost_model = cost_model or CostModel()
        self.gold_source = gold_source
        self._descriptors: dict[str, ToolDescriptor] = {}
        self._invocables: dict = {}
        self._by_public_name: dict[str, str] = {}
        self._structural: dict = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._descriptors)

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self._descriptors

    def tool_ids(self) -> list[str]:
        return list(self._descriptors)

    def descriptor(self, tool_id: str) -> ToolDescriptor:
        try:
            return self._descriptors[tool_id]
        except KeyError:
            raise UnknownToolError(f"tool {tool_id!r} is not registered") from None

    def resolve_public(self, public_name: str) -> str | None:
        return self._by_public_name.get(public_name)

    def next_public_name(self, prefix: str) -> str:
        taken = [
            int(m.group("num"))
            for name in self._by_public_name
            if (m := PUBLIC_NAME_RE.match(name)) and m.group("base") == prefix
        ]
        return f"{prefix}_{max(taken) + 1 if taken else 0}"

    def register(self, descriptor: ToolDescriptor, invocable=None) -> str:
        """Register a tool; returns its id.  Duplicate ids are an error."""
        with self._lock:
            if descriptor.tool_id in self._descriptors:
                raise RegistrationError(f"duplicate tool id {descriptor.tool_id!r}")
            if descriptor.public_name in self._by_public_name:
                raise RegistrationError(
                    f"duplicate public name {descriptor.public_name!r}"
                )
            if invocable is None:
                invocable = _build_invocable(self, descriptor)
            self._descriptors[descriptor.tool_id] = descriptor
            self._invocables[descriptor.tool_id] = invocable
            self._by_public_name[descriptor.public_name] = descriptor.tool_id
        return descriptor.tool_id

    # structural memoization used by composition.instantiate: the same
    # tree (structure + policies) maps to one registered tool
    def lookup_structural(self, key) -> str | None:
        return self._structural.get(key)

    def remember_structural(self, key, tool_id: str) -> None:
        self._structural[key] = tool_id


def register_tool(registry: ToolRegistry, descriptor: ToolDescriptor, invocable=None) -> str:
    return registry.register(descriptor, invocable)


def invoke(
    registry: ToolRegistry,
    tool_id: str,
    query: str,
    ledger: CostLedger,
    seed: int,
) -> str:
    """Run a tool on one query.

    Deterministic given (tool_id, query, seed).  The ledger receives the
    estimated tokens of the query and answer under ``tool_tokens``, one
    call, and the cost model's simulated latency; backend-internal costs
    (composites, reported remote tokens) accumulate on top.
    """
    if tool_id not in registry:
        raise UnknownToolError(f"tool {tool_id!r} is not registered")
    answer = registry._invocables[tool_id](query, ledger, seed)
    tokens = estimate_tokens(query) + estimate_tokens(answer)
    ledger.tool_tokens += tokens
    ledger.calls += 1
    ledger.sim_time_ms += registry.cost_model.time_ms(tokens)
    return answer


# --------------------------------------------------------------------------
# backends


def _build_invocable(registry: ToolRegistry, descriptor: ToolDescriptor):
    builder = {
        "table": _table_invocable,
        "noisy_oracle": _noisy_oracle_invocable,
        "external_command": _external_command_invocable,
        "http": _http_invocable,
    }.get(descriptor.backend)
    if builder is None:
        raise ConfigurationError(
            f"backend {descriptor.backend!r} needs an explicit invocable"
        )
    return builder(registry, descriptor)


def _table_invocable(registry, descriptor):
    params = descriptor.backend_params
    table = dict(params.get("table", {}))
    fallback = params.get("fallback", DEFAULT_FALLBACK)

    def run(query, ledger, seed):
        return table.get(query, fallback)

    return run


def substitute_one_char(text: str, rng) -> str:
    """Replace one character with a different one; always differs from input."""
    if not text:
        return "?"
    pos = rng.randrange(len(text))
    choices = [c for c in _PERTURB_ALPHABET if c != text[pos]]
    return text[:pos] + rng.choice(choices) + text[pos + 1 :]


PERTURBERS = {"substitute_char": substitute_one_char}


def _noisy_oracle_invocable(registry, descriptor):
    params = descriptor.backend_params
    p_correct = float(params.get("p_correct", 1.0))
    if not 0.0 <= p_correct <= 1.0:
        raise ConfigurationError(f"p_correct must be in [0, 1], got {p_correct}")
    perturber_name = params.get("perturber", "substitute_char")
    try:
        perturber = PERTURBERS[perturber_name]
    except KeyError:
        raise ConfigurationError(f"unknown perturber {perturber_name!r}") from None
    local_gold = params.get("gold")
    fallback = params.get("fallback", DEFAULT_FALLBACK)
    tool_id = descriptor.tool_id

    def run(query, ledger, seed):
        source = local_gold if local_gold is not None else registry.gold_source
        gold = source.get(query) if source else None
        if gold is None:
            return fallback
        if unit_uniform(seed, tool_id, query, "noisy") < p_correct:
            return gold
        return perturber(gold, derive_rng(seed, tool_id, query, "perturb"))

    return run


def _external_command_invocable(registry, descriptor):
    params = descriptor.backend_params
    command = params.get("command")
    if not command:
        raise ConfigurationError("external_command backend needs 'command'")
    timeout_s = float(params.get("timeout_s", 10.0))

    def run(query, ledger, seed):
        try:
            proc = subprocess.run(
                command,
                input=query + "\n",
                capture_output=True,
                text=True,
                timeout=timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise ToolFailure(
                f"tool command timed out after {timeout_s}s", status=None
            ) from exc
        except OSError as exc:
            raise ToolFailure(f"tool command failed to start: {exc}") from exc
        if proc.returncode != 0:
            raise ToolFailure(
                f"tool command exited with status {proc.returncode}",
                status=proc.returncode,
                stderr=proc.stderr,
            )
        return proc.stdout.splitlines()[0] if proc.stdout else ""

    return run


def _http_invocable(registry, descriptor):
    params = descriptor.backend_params
    url = params.get("url")
    if not url:
        raise ConfigurationError("http backend needs 'url'")
    timeout_s = float(params.get("timeout_s", 10.0))
    endpoint = url.rstrip("/") + "/invoke"

    def run(query, ledger, seed):
        try:
            response = requests.post(endpoint, json={"query": query}, timeout=timeout_s)
        except requests.RequestException as exc:
            raise ToolFailure(f"http tool unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ToolFailure(
                f"http tool returned status {response.status_code}",
                status=response.status_code,
                stderr=response.text[:500],
            )
        try:
            payload = response.json()
            answer = payload["answer"]
        except (ValueError, KeyError) as exc:
            raise ToolFailure(f"http tool returned a malformed body: {exc}") from exc
        if not isinstance(answer, str):
            raise ToolFailure("http tool 'answer' field is not a string")
        reported = payload.get("tokens")
        if isinstance(reported, int) and reported > 0:
            ledger.tool_tokens += reported
        return answer

    return run


def call_line_protocol(command, line: str, timeout_s: float = 10.0) -> str:
    """One-shot use of the external-command protocol: write one line to
    the command's stdin, return the first line of its stdout.

    This is the plug-in seam for external scorers (real fingerprint
    providers, molecule validators, normalizers) that are not full
    registered tools.
    """
    try:
        proc = subprocess.run(
            command, input=line + "\n", capture_output=True, text=True, timeout=timeout_s
        )
    except subprocess.TimeoutExpired as exc:
        raise ToolFailure(f"line tool timed out after {timeout_s}s") from exc
    except OSError as exc:
        raise ToolFailure(f"line tool failed to start: {exc}") from exc
    if proc.returncode != 0:
        raise ToolFailure(
            f"line tool exited with status {proc.returncode}",
            status=proc.returncode,
            stderr=proc.stderr,
        )
    return proc.stdout.splitlines()[0] if proc.stdout else ""


def table_descriptor(public_name: str, table: dict, fallback: str = DEFAULT_FALLBACK,
                     description: str = "") -> ToolDescriptor:
    return ToolDescriptor(
        tool_id=public_name,
        public_name=public_name,
        description=description or "Lookup tool",
        backend="table",
        backend_params={"table": dict(table), "fallback": fallback},
    )


def noisy_oracle_descriptor(public_name: str, p_correct: float,
                            perturber: str = "substitute_char",
                            gold: dict | None = None,
                            description: str = "") -> ToolDescriptor:
    params = {"p_correct": p_correct, "perturber": perturber}
    if gold is not None:
        params["gold"] = dict(gold)
    return ToolDescriptor(
        tool_id=public_name,
        public_name=public_name,
        description=description or "Prediction tool",
        backend="noisy_oracle",
        backend_params=params,
    )


def with_public_name(descriptor: ToolDescriptor, public_name: str) -> ToolDescriptor:
    return replace(descriptor, tool_id=public_name, public_name=public_name)
