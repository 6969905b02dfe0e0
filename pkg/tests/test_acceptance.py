"""Acceptance suite: one test per shipping criterion, each printing a
PASS/FAIL line.  Tolerances are pinned here and nowhere else.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import functools
import itertools
import math
import random

import pytest

from toolamp.amplifier import SearchConfig, run, score_candidate, stage1, stage2, make_scorer
from toolamp.cli import main
from toolamp.composition import Leaf, Node, depth, leaves, parse_name, serialize_name
from toolamp.data import save_dataset
from toolamp.metrics import Bitset, bleu, levenshtein, tanimoto
from toolamp.metrics import ScoreReport
from toolamp.runtime import PlannerPolicy
from toolamp.simenv import SimEnvSpec, SimToolSpec, build_registry, gen_simenv
from toolamp.toolkit import CostLedger
from toolamp.topologies import TOPOLOGY_KINDS, build_topology, default_rounds, run_network


def report_line(name: str):
    """Decorator printing the criterion verdict."""

    def wrap(fn):
        @functools.wraps(fn)
        def run_test(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] FAIL  {name}")
                raise
            print(f"[ACCEPTANCE] PASS  {name}")

        return run_test

    return wrap


# --------------------------------------------------------------------------
# 1. metric oracles


def naive_levenshtein(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return naive_levenshtein(a[1:], b[1:])
    return 1 + min(
        naive_levenshtein(a[1:], b),
        naive_levenshtein(a, b[1:]),
        naive_levenshtein(a[1:], b[1:]),
    )


@report_line("metric oracles (levenshtein recursion, bleu identity, tanimoto properties)")
def test_metric_oracles():
    rng = random.Random(2024)
    alphabet = "abcd"
    for _ in range(500):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        assert levenshtein(a, b) == naive_levenshtein(a, b)

    for _ in range(100):
        length = rng.randint(1, 12)
        tokens = [rng.choice(alphabet) for _ in range(length)]
        max_n = rng.randint(1, min(4, length))
        smoothing = rng.choice(["none", "add_one"])
        assert abs(bleu(tokens, tokens, max_n=max_n, smoothing=smoothing) - 1.0) < 1e-12

    for _ in range(200):
        width = 256
        a = Bitset(width, frozenset(rng.sample(range(width), rng.randint(0, 30))))
        b = Bitset(width, frozenset(rng.sample(range(width), rng.randint(0, 30))))
        assert tanimoto(a, b) == tanimoto(b, a)
        assert 0.0 <= tanimoto(a, b) <= 1.0
        if a.set_bits:
            assert tanimoto(a, a) == 1.0
        if a.set_bits and b.set_bits and not (a.set_bits & b.set_bits):
            assert tanimoto(a, b) == 0.0


# --------------------------------------------------------------------------
# 2. naming grammar


def random_tree(rng: random.Random, max_depth=5, max_arity=3):
    if max_depth == 0 or rng.random() < 0.35:
        return Leaf(rng.choice(["Name2SMILES", "ChemDFM", "UniMol", "alpha"]), rng.randint(0, 4))
    arity = rng.randint(1, max_arity)
    return Node(tuple(random_tree(rng, max_depth - 1, max_arity) for _ in range(arity)))


@report_line("naming grammar (1000-tree round trip, published name strings)")
def test_naming_grammar():
    rng = random.Random(7)
    for _ in range(1000):
        tree = random_tree(rng)
        assert parse_name(serialize_name(tree)) == tree

    published = [
        ("['Name2SMILES_3', 'ChemDFM_0']", 2, 1),
        ("['Name2SMILES_1', 'ChemDFM_2']", 2, 1),
        ("[['SMILES2Property_1', 'UniMol_0'], 'SMILES2Property_1']", 3, 2),
    ]
    for text, expected_leaves, expected_depth in published:
        tree = parse_name(text)
        assert len(leaves(tree)) == expected_leaves
        assert depth(tree) == expected_depth


# --------------------------------------------------------------------------
# 3. judge amplification oracle


def judge_environment(n=2000, p=0.7, q=0.9, env_seed=0):
    spec = SimEnvSpec(
        n_instances=n,
        tools=(SimToolSpec("alpha", p), SimToolSpec("beta", p)),
        judge_accuracy=q,
        seed=env_seed,
    )
    instances, descriptors = gen_simenv(spec)
    registry = build_registry(descriptors, instances)
    factory = lambda layer: PlannerPolicy(judge_accuracy=q)
    return instances, registry, factory


@report_line("judge amplification oracle (0.868 composite, 0.70 atomics, stage2 pick)")
def test_judge_amplification_oracle():
    instances, registry, factory = judge_environment()
    expected = 0.7**2 + 2 * 0.7 * 0.3 * 0.9  # joint-outcome enumeration = 0.868
    assert expected == pytest.approx(0.868)

    for base in ("alpha", "beta"):
        atomic = score_candidate(Leaf(base, 0), instances, "accuracy", 17, registry, factory)
        assert abs(atomic.fitness - 0.70) <= 0.02

    pair = Node((Leaf("alpha", 0), Leaf("beta", 0)))
    composite = score_candidate(pair, instances, "accuracy", 17, registry, factory)
    assert abs(composite.fitness - expected) <= 0.02

    config = SearchConfig(validation=tuple(instances), seed=17, max_stage2_rounds=2)
    scorer = make_scorer(registry, config, factory)
    library = []
    for base in ("alpha", "beta"):
        library.extend(stage1(Leaf(base, 0), config, registry, scorer, factory))
    best, _ = stage2(library, config, registry, scorer, factory)
    assert isinstance(best.tree, Node)
    assert best.score >= composite.fitness - 0.02


# --------------------------------------------------------------------------
# 4. stage-1 termination and monotonicity


@report_line("stage-1 termination and monotonicity (diminishing-modify recursion)")
def test_stage1_termination_and_monotonicity():
    delta = 0.02
    spec = SimEnvSpec(n_instances=2000, tools=(SimToolSpec("seedtool", 0.5),), seed=11)
    instances, descriptors = gen_simenv(spec)
    registry = build_registry(descriptors, instances)
    config = SearchConfig(validation=tuple(instances), delta=delta, max_layers=8, seed=4)

    def factory(layer):
        modify = 0.3 * 0.5 ** (layer - 1) if layer else 0.0
        return PlannerPolicy(judge_accuracy=1.0, modify_success=modify)

    entries = stage1(Leaf("seedtool", 0), config, registry, policy_factory=factory)
    layer_entries = entries[1:]
    assert 1 <= len(layer_entries) <= 8  # terminates within the cap

    analytic = [0.5]
    for i in range(1, len(layer_entries) + 1):
        analytic.append(analytic[-1] + (1 - analytic[-1]) * 0.3 * 0.5 ** (i - 1))
    assert abs(entries[0].score - analytic[0]) <= 0.03
    for idx, entry in enumerate(layer_entries, start=1):
        assert abs(entry.score - analytic[idx]) <= 0.03

    scores = [entries[0].score] + [entry.score for entry in layer_entries]
    for prev, cur in zip(scores, scores[1:-1]):  # all retained layers
        assert cur - prev >= delta


# --------------------------------------------------------------------------
# 5. greedy vs exhaustive


def monotone_scorer(tree):
    distinct = len({leaf.base_name for leaf in leaves(tree)})
    score = min(1.0, 0.1 * distinct)
    report = ScoreReport(
        means={"accuracy": score}, n_instances=1, fitness_metric="accuracy", fitness=score
    )
    return report, CostLedger()


def bounded_trees(bases, max_arity=2):
    depth0 = [Leaf(base, 0) for base in bases]

    def nodes_over(space):
        for arity in range(1, max_arity + 1):
            for children in itertools.product(space, repeat=arity):
                yield Node(tuple(children))

    depth1 = list(nodes_over(depth0))
    return depth0 + depth1 + list(nodes_over(depth0 + depth1))


@report_line("greedy equals exhaustive optimum; winner never below best atomic")
def test_greedy_vs_exhaustive():
    from toolamp.toolkit import ToolRegistry, register_tool, table_descriptor

    bases = ("a", "b", "c")
    registry = ToolRegistry()
    for base in bases:
        register_tool(registry, table_descriptor(f"{base}_0", {}))
    config = SearchConfig(validation=(), seed=0)
    result = run(config, [f"{b}_0" for b in bases], registry, scorer=monotone_scorer)
    oracle_optimum = max(monotone_scorer(t)[0].fitness for t in bounded_trees(bases))
    assert result.best.score == pytest.approx(oracle_optimum)

    for env_seed in (0, 1, 2):
        spec = SimEnvSpec(
            n_instances=100,
            tools=(SimToolSpec("x", 0.55), SimToolSpec("y", 0.65)),
            judge_accuracy=0.8,
            seed=env_seed,
        )
        instances, descriptors = gen_simenv(spec)
        env_registry = build_registry(descriptors, instances)
        env_config = SearchConfig(
            validation=tuple(instances), seed=env_seed, max_stage2_rounds=2
        )
        factory = lambda layer: PlannerPolicy(judge_accuracy=0.8)
        env_result = run(env_config, ["x_0", "y_0"], env_registry, policy_factory=factory)
        best_atomic = max(e.score for e in env_result.library if e.stage == "atomic")
        assert env_result.best.score >= best_atomic


# --------------------------------------------------------------------------
# 6. topology message counts


def closed_form(kind, n, rounds):
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


@report_line("topology message counts match closed forms; NUM<=1 isomorphic")
def test_topology_message_counts():
    for kind in TOPOLOGY_KINDS:
        for n in (0, 1, 2, 4, 8):
            rounds = default_rounds(kind)
            spec = build_topology(kind, n, rounds, seed=3)
            assert spec.message_count == closed_form(kind, n, rounds), (kind, n)
    for n in (0, 1):
        structures = [build_topology(kind, n, seed=1).structure() for kind in TOPOLOGY_KINDS]
        assert all(s == structures[0] for s in structures)


# --------------------------------------------------------------------------
# 7. cost-ratio echo


@report_line("cost ratio: composite tokens / layered MAS tokens <= 0.2")
def test_cost_ratio_echo():
    from toolamp.amplifier import _score_with_ledger

    spec = SimEnvSpec(
        n_instances=20,
        tools=tuple(SimToolSpec(f"tool{i}", 0.8) for i in range(4)),
        judge_accuracy=0.9,
        seed=7,
        task_kind="molecule_design",
        alphabet="CNO()=1c",
        answer_length=10,
    )
    instances, descriptors = gen_simenv(spec)
    registry = build_registry(descriptors, instances)
    toolset = [d.tool_id for d in descriptors]
    policy = PlannerPolicy(judge_accuracy=0.9)

    tree = Node((
        Node((Leaf("tool0", 0), Leaf("tool1", 0))),
        Node((Leaf("tool2", 0), Leaf("tool3", 0))),
    ))
    _, composite_ledger = _score_with_ledger(
        tree, instances, "bleu2", 5, registry, lambda layer: policy, 1
    )

    mas_spec = build_topology("layered", 4, rounds=2, seed=5)
    mas_ledger = CostLedger()
    for instance in instances:
        _, ledger = run_network(mas_spec, instance.input, policy, registry, toolset, seed=5)
        mas_ledger.absorb(ledger)

    ratio = composite_ledger.all_tokens / mas_ledger.all_tokens
    print(f"  (composite={composite_ledger.all_tokens} tokens, "
          f"layered MAS={mas_ledger.all_tokens} tokens, ratio={ratio:.4f})")
    assert ratio <= 0.2


# --------------------------------------------------------------------------
# 8. determinism


@report_line("determinism: identical library bytes; serial == concurrent scoring")
def test_determinism(tmp_path):
    import json

    spec = SimEnvSpec(
        n_instances=60,
        tools=(SimToolSpec("alpha", 0.7), SimToolSpec("beta", 0.7)),
        judge_accuracy=0.9,
        seed=3,
    )
    instances, descriptors = gen_simenv(spec)
    val = tmp_path / "val.jsonl"
    save_dataset(instances, val)
    tools_file = tmp_path / "tools.json"
    tools_file.write_text(json.dumps([d.to_json() for d in descriptors]), encoding="utf-8")

    outputs = []
    for name in ("first", "second"):
        out = tmp_path / f"{name}.jsonl"
        code = main([
            "amplify", "--tools", str(tools_file), "--val", str(val),
            "--metric", "accuracy", "--seed", "77", "--out", str(out),
        ])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]

    registry = build_registry(descriptors, instances)
    factory = lambda layer: PlannerPolicy(judge_accuracy=0.9)
    tree = Node((Leaf("alpha", 0), Leaf("beta", 0)))
    serial = score_candidate(tree, instances, "accuracy", 9, registry, factory, n_workers=1)
    concurrent = score_candidate(tree, instances, "accuracy", 9, registry, factory, n_workers=8)
    assert serial == concurrent
