"""Baseline multi-agent communication structures with exact message and
token accounting.

Six constructions are supported: chain, random, full_connected, layered,
star, and debate.  Every network ends with a final-decision agent that
merges the terminal agents' outputs into one answer (majority vote in
simulation, with judge-quality tie-breaking); the star's root doubles as
that decider.

Inter-agent messages carry the sender's full reasoning output (its
transcript), which receiving agents keep in their prompt for every
planner turn; only the short final answer is voted on.  A composite
tool, by contrast, passes bare answer strings upward through the tool
interface, which is where the two designs' token costs diverge.

Counting conventions, fixed here because the constructions are only
loosely specified upstream: the chain counts the user's hand-off to the
first agent as a message; at ``num_agents <= 1`` every kind degenerates
to the same minimal graph (0 agents: ``user -> final``; 1 agent:
``user -> a1 -> final``), which keeps the six kinds isomorphic where
they cannot differ structurally.  For ``num_agents >= 2`` the message
counts follow the closed forms checked in the test suite (chain: N+1;
full_connected: N(N-1)/2 + N; layered: ceil(N/2)*floor(N/2) + floor(N/2);
star: N*rounds; debate: N(N-1)*rounds + N; random: N*rounds + N).  For
the single-pass kinds (chain, full_connected, layered) ``rounds``
re-executes the pass without changing the structural edge set.
"""

from collections import Counter
from dataclasses import dataclass

from .base import check_positive_int
from .errors import ConfigurationError, ToolFailure
from .runtime import PlannerPolicy, reasoning_output, render_prompt, run_react
from .seeding import derive_rng
from .toolkit import CostLedger, ToolRegistry, estimate_tokens

TOPOLOGY_KINDS = ("chain", "random", "full_connected", "layered", "star", "debate")

#: kinds whose construction itself repeats across rounds
_MULTI_ROUND_KINDS = ("random", "star", "debate")


def default_rounds(kind: str) -> int:
    return 2 if kind in _MULTI_ROUND_KINDS else 1


@dataclass(frozen=True)
class TopologySpec:
    """A communication graph: directed (round, src, dst) message edges
    over agents ``a1..aN`` plus the ``user`` and ``final`` endpoints."""

    kind: str
    num_agents: int
    rounds: int
    edges: tuple[tuple[int, str, str], ...]
    seed: int = 0

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(f"a{i}" for i in range(1, self.num_agents + 1))

    @property
    def message_count(self) -> int:
        return len(self.edges)

    def structure(self) -> Counter:
        """Multiset of edges ignoring round tags; used for isomorphism checks."""
        return Counter((src, dst) for _, src, dst in self.edges)


def build_topology(kind: str, num_agents: int, rounds: int | None = None, seed: int = 0) -> TopologySpec:
    if kind not in TOPOLOGY_KINDS:
        raise ConfigurationError(f"unknown topology kind {kind!r}")
    if num_agents < 0:
        raise ConfigurationError("num_agents must be non-negative")
    if rounds is None:
        rounds = default_rounds(kind)
    check_positive_int(rounds, "rounds")

    if num_agents == 0:
        edges = ((1, "user", "final"),)
    elif num_agents == 1:
        edges = ((1, "user", "a1"), (1, "a1", "final"))
    else:
        edges = tuple(_edges_for(kind, num_agents, rounds, seed))
    return TopologySpec(kind, num_agents, rounds, edges, seed)


def _edges_for(kind, n, rounds, seed):
    agents = [f"a{i}" for i in range(1, n + 1)]
    if kind == "chain":
        yield (1, "user", agents[0])
        for left, right in zip(agents, agents[1:]):
            yield (1, left, right)
        yield (1, agents[-1], "final")
    elif kind == "full_connected":
        for i, src in enumerate(agents):
            for dst in agents[i + 1 :]:
                yield (1, src, dst)
        for agent in agents:
            yield (2, agent, "final")
    elif kind == "layered":
        first = agents[: (n + 1) // 2]
        second = agents[(n + 1) // 2 :]
        for src in first:
            for dst in second:
                yield (1, src, dst)
        for src in second:
            yield (2, src, "final")
    elif kind == "star":
        for rnd in range(1, rounds + 1):
            for agent in agents:
                yield (rnd, agent, "final")
    elif kind == "debate":
        for rnd in range(1, rounds + 1):
            for src in agents:
                for dst in agents:
                    if src != dst:
                        yield (rnd, src, dst)
        for agent in agents:
            yield (rounds + 1, agent, "final")
    elif kind == "random":
        for rnd in range(1, rounds + 1):
            for i, src in enumerate(agents):
                rng = derive_rng(seed, "random-topology", n, rnd, i)
                dst = rng.choice([a for a in agents if a != src])
                yield (rnd, src, dst)
        for agent in agents:
            yield (rounds + 1, agent, "final")


# --------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class Message:
    """What travels between agents: the full emission, plus the short
    answer used for voting."""

    text: str
    answer: str


def _normalize(answer: str) -> str:
    return answer.strip().casefold()


def _majority(answers: list[str]) -> str:
    counts = Counter(_normalize(a) for a in answers)
    top = max(counts.values())
    winner = sorted(key for key, count in counts.items() if count == top)[0]
    return next(a for a in answers if _normalize(a) == winner)


def final_refer(
    question: str,
    answers: list[str],
    policy: PlannerPolicy,
    ledger: CostLedger | None = None,
    registry: ToolRegistry | None = None,
    gold: str | None = None,
    seed: int = 0,
    vote_answers: list[str] | None = None,
) -> str:
    """Merge agent outputs into one answer: majority vote over normalized
    answers, ties settled by the judge branch with the policy's accuracy.

    The decision prompt is rendered over the full outputs and
    token-accounted even though the vote itself is simulated;
    ``vote_answers`` optionally separates the short voted answers from
    the texts shown in the prompt.
    """
    if not answers:
        raise ConfigurationError("final decision needs at least one answer")
    votes = vote_answers if vote_answers is not None else answers
    if len(votes) != len(answers):
        raise ConfigurationError("vote_answers must align with answers")
    prompt = render_prompt(
        "final_refer",
        {"question": question, "answers": "\n".join(answers)},
    )
    counts = Counter(_normalize(v) for v in votes)
    top = max(counts.values())
    tied = sorted(key for key, count in counts.items() if count == top)
    if len(tied) == 1:
        winner = tied[0]
    else:
        rng = derive_rng(seed, "final-refer", question)
        gold_key = _normalize(gold) if gold is not None else None
        if gold_key in tied and rng.random() < policy.judge_accuracy:
            winner = gold_key
        else:
            others = [key for key in tied if key != gold_key] or tied
            winner = rng.choice(others)
    answer = next(v for v in votes if _normalize(v) == winner)
    if ledger is not None:
        ledger.prompt_tokens += estimate_tokens(prompt)
        ledger.completion_tokens += estimate_tokens(answer)
        if registry is not None:
            ledger.sim_time_ms += registry.cost_model.time_ms(
                estimate_tokens(prompt) + estimate_tokens(answer)
            )
    return answer


class _NetworkRun:
    def __init__(self, spec, query, policy, registry, toolset, seed, gold):
        self.spec = spec
        self.query = query
        self.policy = policy
        self.registry = registry
        self.toolset = list(toolset) if toolset else None
        self.seed = seed
        self.gold = gold
        self.ledger = CostLedger()

    def agent_step(self, agent: str, rnd: int, inbox: list[Message]) -> Message:
        """One agent turn: consume inbox, produce an outbound message."""
        context = [m.text for m in inbox]
        if self.toolset:
            scope = f"{self.spec.kind}:{agent}:{rnd}"
            try:
                outcome = run_react(
                    self.policy, self.toolset, self.query, self.registry,
                    self.seed, scope=scope, gold=self.gold, context=context,
                )
                self.ledger.absorb(outcome.ledger)
                return Message(reasoning_output(outcome), outcome.answer)
            except ToolFailure as exc:
                failure = f"TOOL_FAILURE: {exc}"
                return Message(failure, failure)
        # tool-less agents relay: majority of what they heard, else the task
        prompt = "\n".join([self.query, *context])
        answer = _majority([m.answer for m in inbox]) if inbox else self.query
        tokens = estimate_tokens(prompt) + estimate_tokens(answer)
        self.ledger.prompt_tokens += estimate_tokens(prompt)
        self.ledger.completion_tokens += estimate_tokens(answer)
        self.ledger.sim_time_ms += self.registry.cost_model.time_ms(tokens)
        return Message(answer, answer)

    def finish(self, messages: list[Message]) -> str:
        return final_refer(
            self.query,
            [m.text for m in messages],
            self.policy,
            self.ledger,
            self.registry,
            gold=self.gold,
            seed=self.seed,
            vote_answers=[m.answer for m in messages],
        )


def run_network(
    spec: TopologySpec,
    query: str,
    policy: PlannerPolicy,
    registry: ToolRegistry,
    toolset=None,
    seed: int = 0,
    gold: str | None = None,
) -> tuple[str, CostLedger]:
    """Execute the network on one query; deterministic per (spec, seed).

    Agents run in round order; whoever feeds the final decider
    contributes to the closing vote.  Agent failures become failure
    messages and the run continues.
    """
    if gold is None and registry.gold_source is not None:
        gold = registry.gold_source.get(query)
    state = _NetworkRun(spec, query, policy, registry, toolset, seed, gold)
    n = spec.num_agents

    if n == 0:
        prompt = render_prompt("final_refer", {"question": query, "answers": ""})
        answer = query
        state.ledger.prompt_tokens += estimate_tokens(prompt)
        state.ledger.completion_tokens += estimate_tokens(answer)
        state.ledger.sim_time_ms += registry.cost_model.time_ms(
            estimate_tokens(prompt) + estimate_tokens(answer)
        )
        return answer, state.ledger

    agents = list(spec.agents)

    if n == 1:
        message = state.agent_step(agents[0], 1, [])
        return state.finish([message]), state.ledger

    if spec.kind == "chain":
        terminal = None
        for rnd in range(1, spec.rounds + 1):
            message = None
            for agent in agents:
                inbox = [message] if message is not None else []
                message = state.agent_step(agent, rnd, inbox)
            terminal = message
        answer = state.finish([terminal])
    elif spec.kind == "full_connected":
        outputs: dict[str, Message] = {}
        for rnd in range(1, spec.rounds + 1):
            outputs = {}
            for i, agent in enumerate(agents):
                inbox = [outputs[a] for a in agents[:i]]
                outputs[agent] = state.agent_step(agent, rnd, inbox)
        answer = state.finish([outputs[a] for a in agents])
    elif spec.kind == "layered":
        first = agents[: (n + 1) // 2]
        second = agents[(n + 1) // 2 :]
        terminal: list[Message] = []
        for rnd in range(1, spec.rounds + 1):
            upstream = [state.agent_step(agent, rnd, []) for agent in first]
            terminal = [state.agent_step(agent, rnd, list(upstream)) for agent in second]
        answer = state.finish(terminal)
    elif spec.kind == "star":
        collected = []
        for rnd in range(1, spec.rounds + 1):
            for agent in agents:
                collected.append(state.agent_step(agent, rnd, []))
        answer = state.finish(collected)
    elif spec.kind == "debate":
        previous: list[tuple[str, Message]] = []
        for rnd in range(1, spec.rounds + 1):
            current = {}
            for agent in agents:
                inbox = [msg for other, msg in previous if other != agent]
                current[agent] = state.agent_step(agent, rnd, inbox)
            previous = list(current.items())
        answer = state.finish([msg for _, msg in previous])
    elif spec.kind == "random":
        inboxes: dict[str, list[Message]] = {agent: [] for agent in agents}
        outputs = {}
        for rnd in range(1, spec.rounds + 1):
            sends = [
                (src, dst)
                for edge_round, src, dst in spec.edges
                if edge_round == rnd and dst != "final"
            ]
            outputs = {
                agent: state.agent_step(agent, rnd, inboxes[agent]) for agent in agents
            }
            inboxes = {agent: [] for agent in agents}
            for src, dst in sends:
                inboxes[dst].append(outputs[src])
        answer = state.finish([outputs[a] for a in agents])
    else:  # pragma: no cover - kinds are validated at construction
        raise ConfigurationError(f"unknown topology kind {spec.kind!r}")

    return answer, state.ledger


def network_report_row(
    spec: TopologySpec, score: float, ledger: CostLedger
) -> dict:
    """Machine-readable summary row mirroring cost-table column semantics."""
    return {
        "kind": spec.kind,
        "NUM": spec.num_agents,
        "rounds": spec.rounds,
        "score": score,
        "all_tokens": ledger.all_tokens,
        "sim_time_ms": ledger.sim_time_ms,
    }
