import math

import pytest

from toolamp.errors import ConfigurationError
from toolamp.runtime import PlannerPolicy
from toolamp.simenv import SimEnvSpec, SimToolSpec, build_registry, gen_simenv
from toolamp.toolkit import CostLedger, ToolRegistry
from toolamp.topologies import (
    TOPOLOGY_KINDS,
    build_topology,
    default_rounds,
    final_refer,
    network_report_row,
    run_network,
)


def expected_message_count(kind: str, n: int, rounds: int) -> int:
    """Closed forms for the fixed constructions; at n <= 1 every kind
    degenerates to the same minimal graph (1 or 2 messages)."""
    if n == 0:
        return 1
    if n == 1:
        return 2
    return {
        "chain": n + 1,
        "full_connected": n * (n - 1) // 2 + n,
        "layered": math.ceil(n / 2) * (n // 2) + n // 2,
        "star": n * rounds,
        "debate": n * (n - 1) * rounds + n,
        "random": n * rounds + n,
    }[kind]


class TestBuildTopology:
    @pytest.mark.parametrize("kind", TOPOLOGY_KINDS)
    @pytest.mark.parametrize("n", [0, 1, 2, 4, 8])
    def test_message_counts_match_closed_forms(self, kind, n):
        rounds = default_rounds(kind)
        spec = build_topology(kind, n, rounds, seed=5)
        assert spec.message_count == expected_message_count(kind, n, rounds)

    def test_chain_4_has_five_messages(self):
        assert build_topology("chain", 4).message_count == 5

    def test_full_connected_4(self):
        assert build_topology("full_connected", 4).message_count == 10

    def test_debate_4_rounds_2(self):
        assert build_topology("debate", 4, rounds=2).message_count == 28

    @pytest.mark.parametrize("n", [0, 1])
    def test_all_kinds_isomorphic_at_small_n(self, n):
        structures = {
            kind: build_topology(kind, n, seed=1).structure() for kind in TOPOLOGY_KINDS
        }
        reference = structures["chain"]
        assert all(s == reference for s in structures.values())

    def test_random_is_seed_deterministic(self):
        a = build_topology("random", 6, rounds=3, seed=9)
        b = build_topology("random", 6, rounds=3, seed=9)
        c = build_topology("random", 6, rounds=3, seed=10)
        assert a.edges == b.edges
        assert a.edges != c.edges

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            build_topology("ring", 3)


class TestFinalRefer:
    def test_majority(self):
        policy = PlannerPolicy()
        assert final_refer("q", ["x", "x", "y"], policy) == "x"

    def test_single_answer(self):
        assert final_refer("q", ["x"], PlannerPolicy()) == "x"

    def test_tie_with_gold_and_perfect_judge(self):
        policy = PlannerPolicy(judge_accuracy=1.0)
        assert final_refer("q", ["right", "wrong"], policy, gold="right") == "right"

    def test_empty_answers_rejected(self):
        with pytest.raises(ConfigurationError):
            final_refer("q", [], PlannerPolicy())

    def test_prompt_is_token_accounted(self):
        ledger = CostLedger()
        final_refer("q", ["x"], PlannerPolicy(), ledger, ToolRegistry())
        assert ledger.prompt_tokens > 0
        assert ledger.completion_tokens > 0


def design_env(n_instances=30, num_tools=2, p=0.9, seed=3):
    tools = tuple(SimToolSpec(f"tool{i}", p) for i in range(num_tools))
    spec = SimEnvSpec(
        n_instances=n_instances,
        tools=tools,
        judge_accuracy=0.9,
        seed=seed,
        task_kind="property_prediction",
    )
    instances, descriptors = gen_simenv(spec)
    registry = build_registry(descriptors, instances)
    toolset = [d.tool_id for d in descriptors]
    return instances, registry, toolset


class TestRunNetwork:
    def test_num0_direct_answer(self):
        registry = ToolRegistry()
        spec = build_topology("chain", 0)
        answer, ledger = run_network(spec, "the question", PlannerPolicy(), registry)
        assert answer == "the question"
        assert ledger.prompt_tokens > 0
        assert ledger.completion_tokens > 0

    def test_num1_identical_ledgers_across_kinds(self):
        results = {}
        for kind in TOPOLOGY_KINDS:
            instances, registry, toolset = design_env()
            spec = build_topology(kind, 1, seed=2)
            query = instances[0].input
            policy = PlannerPolicy(kind="scripted")
            results[kind] = run_network(spec, query, policy, registry, toolset, seed=4)
        answers = {answer for answer, _ in results.values()}
        ledgers = {tuple(ledger.as_dict().items()) for _, ledger in results.values()}
        assert len(answers) == 1
        assert len(ledgers) == 1

    @pytest.mark.parametrize("kind", TOPOLOGY_KINDS)
    def test_deterministic_per_seed(self, kind):
        instances, registry, toolset = design_env()
        spec = build_topology(kind, 3, seed=1)
        query = instances[0].input
        first = run_network(spec, query, PlannerPolicy(), registry, toolset, seed=6)
        second = run_network(spec, query, PlannerPolicy(), registry, toolset, seed=6)
        assert first[0] == second[0]
        assert first[1] == second[1]

    def test_ledger_monotone_in_num(self):
        for kind in ("chain", "layered", "debate"):
            totals = []
            for n in (1, 2, 4):
                instances, registry, toolset = design_env()
                spec = build_topology(kind, n, seed=1)
                total = 0
                for instance in instances[:5]:
                    _, ledger = run_network(
                        spec, instance.input, PlannerPolicy(), registry, toolset, seed=2
                    )
                    total += ledger.all_tokens
                totals.append(total)
            assert totals == sorted(totals)

    def test_agents_without_tools_relay(self):
        registry = ToolRegistry()
        spec = build_topology("chain", 3)
        answer, ledger = run_network(spec, "echo me", PlannerPolicy(), registry)
        assert answer == "echo me"
        assert ledger.all_tokens > 0

    def test_with_tools_majority_reaches_gold(self):
        instances, registry, toolset = design_env(p=1.0)
        spec = build_topology("layered", 4, seed=0)
        instance = instances[0]
        answer, _ = run_network(spec, instance.input, PlannerPolicy(), registry, toolset, seed=3)
        assert answer == instance.gold

    def test_report_row_fields(self):
        spec = build_topology("star", 2)
        row = network_report_row(spec, 0.5, CostLedger(tool_tokens=5, sim_time_ms=7))
        assert row == {
            "kind": "star",
            "NUM": 2,
            "rounds": 2,
            "score": 0.5,
            "all_tokens": 5,
            "sim_time_ms": 7,
        }
