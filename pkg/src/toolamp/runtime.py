"""Thought/action/observation agent loop over registered tools.

Three planner backends share the loop mechanics:

* ``scripted`` calls the tools in order and finalizes with the last
  observation; used by tests and pass-through composites.
* ``simulated`` is the desk-scale stand-in for an LLM planner.  It calls
  the tools, then resolves disagreement through parameterized behavior
  branches: consensus passes through ("correct"), a wrong consensus is
  repaired with probability ``modify_success`` ("modify"), disagreement
  is settled by an oracle-assisted judge with accuracy
  ``judge_accuracy`` ("judge"), or abstained from with probability
  ``reserve_prob`` ("reserve").  The judge consults the environment gold
  answer; this is an explicit simulation device standing in for real
  planner judgment quality.
* ``remote`` defers each step to an HTTP planner endpoint.

Every planner turn charges the estimated tokens of the rendered prompt
and of the emitted text to the ledger, so composite runs carry a full
cost trace.
"""

import json
import re
from dataclasses import dataclass
from importlib import resources

import requests

from .base import check_positive_int, check_probability
from .errors import ConfigurationError, ProtocolError, TemplateError, ToolFailure, TransportError
from .seeding import derive_rng
from .toolkit import CostLedger, ToolRegistry, estimate_tokens, invoke

STEP_KINDS = ("thought", "action", "observation", "final")

POLICY_KINDS = ("scripted", "simulated", "remote")

PATTERNS = ("correct", "modify", "judge", "reserve")

RESERVE_ANSWER = "UNABLE_TO_ANSWER"

TEMPLATE_IDS = (
    "molecule_design",
    "captioning",
    "reaction_prediction",
    "final_refer",
    "react_turn",
)

_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


@dataclass(frozen=True)
class ReActStep:
    kind: str
    text: str = ""
    tool_id: str | None = None
    tool_input: str | None = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ConfigurationError(f"unknown step kind {self.kind!r}")
        if self.kind == "action" and (self.tool_id is None or self.tool_input is None):
            raise ConfigurationError("action steps need tool_id and tool_input")

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "text": self.text}
        if self.tool_id is not None:
            obj["tool_id"] = self.tool_id
        if self.tool_input is not None:
            obj["tool_input"] = self.tool_input
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "ReActStep":
        if "kind" not in obj:
            raise ProtocolError("step object has no 'kind' field")
        return cls(
            kind=obj["kind"],
            text=obj.get("text", ""),
            tool_id=obj.get("tool_id"),
            tool_input=obj.get("tool_input"),
        )


def trace_to_jsonl(trace: list[ReActStep]) -> str:
    return "".join(json.dumps(step.to_json(), sort_keys=True) + "\n" for step in trace)


def trace_from_jsonl(text: str) -> list[ReActStep]:
    return [ReActStep.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


def validate_trace(trace: list[ReActStep]) -> None:
    """A well-formed trace has exactly one final step, at the end."""
    finals = [i for i, step in enumerate(trace) if step.kind == "final"]
    if len(finals) != 1 or finals[0] != len(trace) - 1:
        raise ConfigurationError("trace must contain exactly one final step, at the end")


@dataclass(frozen=True)
class PlannerPolicy:
    """Planner parameters; see the module docstring for branch semantics."""

    kind: str = "simulated"
    call_order: tuple[str, ...] | str = "all"
    judge_accuracy: float = 1.0
    modify_success: float = 0.0
    reserve_prob: float = 0.0
    max_steps: int = 16
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        check_probability(self.judge_accuracy, "judge_accuracy")
        check_probability(self.modify_success, "modify_success")
        check_probability(self.reserve_prob, "reserve_prob")
        check_positive_int(self.max_steps, "max_steps")


@dataclass
class AgentOutcome:
    answer: str
    trace: list[ReActStep]
    ledger: CostLedger
    reserved: bool = False
    budget_exhausted: bool = False
    pattern: str = "correct"


def _load_templates() -> dict[str, str]:
    loaded = {}
    for template_id in TEMPLATE_IDS:
        path = resources.files("toolamp.templates").joinpath(f"{template_id}.txt")
        loaded[template_id] = path.read_text(encoding="utf-8")
    return loaded


_TEMPLATES = _load_templates()


def render_prompt(template_id: str, variables: dict) -> str:
    """Substitute ``{name}`` placeholders; unbound placeholders are an error."""
    try:
        template = _TEMPLATES[template_id]
    except KeyError:
        raise TemplateError(f"unknown template {template_id!r}") from None
    missing = [
        name for name in _PLACEHOLDER_RE.findall(template) if name not in variables
    ]
    if missing:
        raise TemplateError(f"unbound placeholders in {template_id!r}: {missing}")
    return _PLACEHOLDER_RE.sub(lambda m: str(variables[m.group(1)]), template)


# --------------------------------------------------------------------------
# the loop


def _resolve_order(policy: PlannerPolicy, toolset: list[str]) -> list[str]:
    if policy.call_order == "all":
        return list(toolset)
    order = [tool for tool in policy.call_order if tool in toolset]
    return order or list(toolset)


def _tool_lines(registry: ToolRegistry, toolset: list[str]) -> str:
    lines = []
    for tool_id in toolset:
        descriptor = registry.descriptor(tool_id)
        lines.append(f"- {descriptor.public_name}: {descriptor.description}")
    return "\n".join(lines)


class _Turn:
    """Token accounting for one planner turn (prompt in, text out)."""

    def __init__(self, registry: ToolRegistry, ledger: CostLedger):
        self.registry = registry
        self.ledger = ledger

    def charge(self, prompt: str, emitted: str) -> None:
        prompt_tokens = estimate_tokens(prompt)
        completion_tokens = estimate_tokens(emitted)
        self.ledger.prompt_tokens += prompt_tokens
        self.ledger.completion_tokens += completion_tokens
        self.ledger.sim_time_ms += self.registry.cost_model.time_ms(
            prompt_tokens + completion_tokens
        )


def run_react(
    policy: PlannerPolicy,
    toolset: list[str],
    query: str,
    registry: ToolRegistry,
    ledger_seed: int,
    scope: str = "root",
    gold: str | None = None,
    context: list[str] | None = None,
) -> AgentOutcome:
    """Run the agent loop for one query and return answer, trace, ledger.

    ``scope`` keys the policy's random draws (composites pass their own
    identity) so that distinct layers draw independently while repeated
    runs stay deterministic.  ``gold`` overrides the registry's
    environment gold lookup for the simulated judge.  ``context``
    messages (e.g. peer-agent outputs) are carried in every rendered
    prompt, so they are token-charged once per planner turn, the way a
    conversation window would be.
    """
    if policy.kind == "remote":
        return _run_remote(policy, toolset, query, registry, ledger_seed)
    if policy.kind == "simulated" and not toolset:
        raise ConfigurationError("simulated policy needs a nonempty toolset")

    ledger = CostLedger()
    turn = _Turn(registry, ledger)
    trace: list[ReActStep] = []
    order = _resolve_order(policy, toolset)
    tool_lines = _tool_lines(registry, order)
    if context:
        query_block = query + "\nIncoming messages:\n" + "\n".join(context)
    else:
        query_block = query
    answers: list[tuple[str, str]] = []
    actions_taken = 0
    budget_exhausted = False

    for tool_id in order:
        if actions_taken >= policy.max_steps:
            budget_exhausted = True
            break
        prompt = render_prompt(
            "react_turn",
            {
                "tools": tool_lines,
                "question": query_block,
                "transcript": _transcript(trace),
            },
        )
        public = registry.descriptor(tool_id).public_name
        thought = ReActStep("thought", f"Consulting {public}.")
        action = ReActStep("action", f"Call {public}", tool_id=tool_id, tool_input=query)
        turn.charge(prompt, thought.text + "\n" + action.text)
        trace.extend([thought, action])
        actions_taken += 1
        try:
            answer = invoke(registry, tool_id, query, ledger, ledger_seed)
            trace.append(ReActStep("observation", answer))
            answers.append((tool_id, answer))
        except ToolFailure as exc:
            trace.append(ReActStep("observation", f"TOOL_FAILURE: {exc}"))

    reserved = False
    pattern = "correct"
    if policy.kind == "scripted" or budget_exhausted:
        final_text = answers[-1][1] if answers else ""
    else:
        final_text, reserved, pattern = _decide(
            policy, answers, query, registry, ledger_seed, scope, gold
        )

    final = ReActStep("final", final_text)
    final_prompt = render_prompt(
        "react_turn",
        {"tools": tool_lines, "question": query_block, "transcript": _transcript(trace)},
    )
    turn.charge(final_prompt, final.text)
    trace.append(final)
    validate_trace(trace)
    return AgentOutcome(
        answer=final_text,
        trace=trace,
        ledger=ledger,
        reserved=reserved,
        budget_exhausted=budget_exhausted,
        pattern=pattern,
    )


def _transcript(trace: list[ReActStep]) -> str:
    return "\n".join(f"{step.kind}: {step.text}" for step in trace)


def reasoning_output(outcome: AgentOutcome) -> str:
    """The agent's full emission (transcript text); what peers in a
    multi-agent network receive, as opposed to the bare answer a
    composite passes upward through the tool interface."""
    return _transcript(outcome.trace)


def _decide(
    policy: PlannerPolicy,
    answers: list[tuple[str, str]],
    query: str,
    registry: ToolRegistry,
    ledger_seed: int,
    scope: str,
    gold: str | None,
) -> tuple[str, bool, str]:
    """Behavior-branch resolution for the simulated planner.

    Draw order is fixed (reserve, then judge or modify) so outcomes are
    reproducible per (seed, scope, query).
    """
    if gold is None and registry.gold_source is not None:
        gold = registry.gold_source.get(query)
    if not answers:
        return "", False, "correct"
    rng = derive_rng(ledger_seed, scope, query, "policy")
    distinct: list[str] = []
    for _, answer in answers:
        if answer not in distinct:
            distinct.append(answer)

    if len(distinct) == 1:
        consensus = distinct[0]
        if gold is not None and consensus != gold and rng.random() < policy.modify_success:
            return gold, False, "modify"
        return consensus, False, "correct"

    if rng.random() < policy.reserve_prob:
        return RESERVE_ANSWER, True, "reserve"

    # judge: pick the gold-matching answer with probability judge_accuracy,
    # otherwise fall among the rest uniformly; with no gold signal the pick
    # is uniform over the distinct answers
    wrong = [answer for answer in distinct if answer != gold]
    if gold is not None and gold in distinct:
        if rng.random() < policy.judge_accuracy or not wrong:
            return gold, False, "judge"
        return rng.choice(wrong), False, "judge"
    return rng.choice(distinct), False, "judge"


# --------------------------------------------------------------------------
# remote planner adapter


def parse_plan_step(obj: dict) -> ReActStep:
    if not isinstance(obj, dict):
        raise ProtocolError(f"planner response is not an object: {obj!r}")
    step = ReActStep.from_json(obj)
    if step.kind not in ("action", "final", "thought"):
        raise ProtocolError(f"planner may not emit {step.kind!r} steps")
    return step


def remote_plan(
    endpoint: str,
    trace_so_far: list[ReActStep],
    toolset_descriptions: list[dict],
    query: str = "",
    timeout_s: float = 10.0,
) -> ReActStep:
    """Ask a remote planner for the next step.

    POSTs ``{"trace": [...], "tools": [...], "query": ...}`` to
    ``<endpoint>/plan`` and expects a single step object back.
    """
    payload = {
        "trace": [step.to_json() for step in trace_so_far],
        "tools": toolset_descriptions,
        "query": query,
    }
    try:
        response = requests.post(
            endpoint.rstrip("/") + "/plan", json=payload, timeout=timeout_s
        )
    except requests.Timeout as exc:
        raise TransportError(f"planner endpoint timed out: {exc}") from exc
    except requests.RequestException as exc:
        raise TransportError(f"planner endpoint unreachable: {exc}") from exc
    if response.status_code != 200:
        raise ProtocolError(f"planner returned status {response.status_code}")
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolError(f"planner response is not JSON: {exc}") from exc
    try:
        return parse_plan_step(body)
    except ConfigurationError as exc:
        raise ProtocolError(f"planner step invalid: {exc}") from exc


def _run_remote(
    policy: PlannerPolicy,
    toolset: list[str],
    query: str,
    registry: ToolRegistry,
    ledger_seed: int,
) -> AgentOutcome:
    if not policy.endpoint:
        raise ConfigurationError("remote policy needs an endpoint")
    ledger = CostLedger()
    turn = _Turn(registry, ledger)
    trace: list[ReActStep] = []
    descriptions = [
        {
            "name": registry.descriptor(tool_id).public_name,
            "description": registry.descriptor(tool_id).description,
        }
        for tool_id in toolset
    ]
    by_public = {d["name"]: tool_id for d, tool_id in zip(descriptions, toolset)}
    budget_exhausted = False
    final_text = ""
    for _ in range(policy.max_steps):
        step = remote_plan(policy.endpoint, trace, descriptions, query)
        request_text = json.dumps(
            {"trace": [s.to_json() for s in trace], "tools": descriptions, "query": query}
        )
        turn.charge(request_text, step.text)
        trace.append(step)
        if step.kind == "final":
            final_text = step.text
            break
        if step.kind == "action":
            tool_id = by_public.get(step.tool_id, step.tool_id)
            try:
                answer = invoke(registry, tool_id, step.tool_input, ledger, ledger_seed)
                trace.append(ReActStep("observation", answer))
            except ToolFailure as exc:
                trace.append(ReActStep("observation", f"TOOL_FAILURE: {exc}"))
    else:
        budget_exhausted = True
        observations = [s.text for s in trace if s.kind == "observation"]
        final_text = observations[-1] if observations else ""
    if not trace or trace[-1].kind != "final":
        trace.append(ReActStep("final", final_text))
    validate_trace(trace)
    return AgentOutcome(
        answer=final_text,
        trace=trace,
        ledger=ledger,
        reserved=final_text == RESERVE_ANSWER,
        budget_exhausted=budget_exhausted,
        pattern="correct",
    )
