"""Command-line surface.

Subcommands: ``amplify`` (search), ``evaluate`` (held-out scoring of a
named composite; kept separate so the search never touches test data),
``mas`` (baseline network runs), ``parse-name``, ``gen-env``, and
``report``.  A single JSON config document with sections
{search, metrics, tools, mas, env} can seed any command; explicit flags
override config keys.  Exit codes: 0 success, 2 configuration error,
3 data error, 4 external-tool failure.
"""

import argparse
import json
import sys
from pathlib import Path

from .amplifier import SearchConfig, ensure_variants, run, save_library, score_candidate
from .composition import depth, display_name, leaves, parse_name, serialize_name
from .data import load_dataset, save_dataset
from .errors import ConfigurationError, DataError, ToolFailure, ToolampError
from .metrics import score_instance
from .report import AMPLIFY_COLUMNS, MAS_COLUMNS, amplification_rows, read_rows, render_table, write_rows
from .runtime import PlannerPolicy
from .simenv import build_registry, gen_simenv, load_simenv_spec
from .toolkit import CostLedger, ToolDescriptor, ToolRegistry
from .topologies import TOPOLOGY_KINDS, build_topology, network_report_row, run_network

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TOOL = 4

CONFIG_SECTIONS = ("search", "metrics", "tools", "mas", "env")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    file = Path(path)
    if not file.exists():
        raise ConfigurationError(f"config file not found: {file}")
    try:
        config = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{file}: {exc}") from exc
    unknown = set(config) - set(CONFIG_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return config


def setting(args_value, config: dict, section: str, key: str, default):
    """Flag value if given, else the config key, else the default."""
    if args_value is not None:
        return args_value
    return config.get(section, {}).get(key, default)


def load_tools(path: str) -> list[ToolDescriptor]:
    file = Path(path)
    if not file.exists():
        raise DataError(f"tool registry file not found: {file}")
    try:
        items = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{file}: {exc}") from exc
    if not isinstance(items, list) or not items:
        raise DataError(f"{file}: expected a nonempty JSON list of tool descriptors")
    return [ToolDescriptor.from_json(obj) for obj in items]


def make_policy(config: dict, args=None) -> PlannerPolicy:
    search = config.get("search", {})
    return PlannerPolicy(
        judge_accuracy=search.get("judge_accuracy", 1.0),
        modify_success=search.get("modify_success", 0.0),
        reserve_prob=search.get("reserve_prob", 0.0),
        max_steps=search.get("max_steps", 16),
    )


def _registry_for(tools_path: str, instances) -> ToolRegistry:
    descriptors = load_tools(tools_path)
    return build_registry(descriptors, instances)


# --------------------------------------------------------------------------
# subcommands


def cmd_amplify(args) -> int:
    config = load_config(args.config)
    instances = load_dataset(args.val)
    registry = _registry_for(args.tools, instances)
    policy = make_policy(config)
    search = SearchConfig(
        delta=setting(args.delta, config, "search", "delta", 0.01),
        top_k=setting(args.k, config, "search", "k", 3),
        max_layers=setting(args.max_layers, config, "search", "max_layers", 8),
        max_stage2_rounds=setting(args.max_stage2_rounds, config, "search", "max_stage2_rounds", 5),
        fitness_metric=setting(args.metric, config, "search", "metric", "accuracy"),
        seed=setting(args.seed, config, "search", "seed", 0),
        validation=tuple(instances),
        n_workers=setting(args.workers, config, "search", "workers", 1),
    )
    result = run(
        search,
        registry.tool_ids(),
        registry,
        policy_factory=lambda layer: policy,
    )
    if args.out:
        save_library(result.library, args.out)
    rows = amplification_rows(result)
    print(render_table(rows, AMPLIFY_COLUMNS))
    print(f"\nbest: {display_name(result.best.tree)}  "
          f"{search.fitness_metric}={result.best.score:.4f}  "
          f"total_tokens={result.total_ledger.all_tokens}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    instances = load_dataset(args.test)
    registry = _registry_for(args.tools, instances)
    tree = parse_name(args.name)
    policy = make_policy(config)
    metric = setting(args.metric, config, "search", "metric", "accuracy")
    seed = setting(args.seed, config, "search", "seed", 0)
    # names from a library file may reference captured stage-1 variants;
    # rebuild them against this registry under the configured policy
    ensure_variants(tree, registry, lambda layer: policy)
    report = score_candidate(
        tree, instances, metric, seed, registry, policy_factory=lambda layer: policy
    )
    if report.failures == report.n_instances:
        raise ToolFailure("every instance failed; the tool backends look unreachable")
    row = {
        "name": display_name(tree),
        "metric": metric,
        "test_score": report.fitness,
        "n_instances": report.n_instances,
        "failures": report.failures,
        **{f"mean_{k}": v for k, v in report.means.items()},
    }
    if args.out:
        write_rows([row], args.out)
    print(json.dumps(row, sort_keys=True))
    return EXIT_OK


def cmd_mas(args) -> int:
    config = load_config(args.config)
    kind = setting(args.kind, config, "mas", "kind", "chain")
    if kind not in TOPOLOGY_KINDS:
        raise ConfigurationError(f"unknown topology kind {kind!r}")
    num = setting(args.num, config, "mas", "num", 2)
    rounds = setting(args.rounds, config, "mas", "rounds", None)
    seed = setting(args.seed, config, "mas", "seed", 0)
    metric = setting(args.metric, config, "search", "metric", "accuracy")
    spec = build_topology(kind, num, rounds, seed)
    policy = make_policy(config)

    instances = load_dataset(args.val) if args.val else []
    toolset = None
    if args.tools:
        registry = _registry_for(args.tools, instances)
        toolset = registry.tool_ids()
    else:
        registry = build_registry([], instances)

    total = CostLedger()
    fitness_values = []
    if instances:
        for instance in instances:
            answer, ledger = run_network(
                spec, instance.input, policy, registry, toolset, seed=seed
            )
            total.absorb(ledger)
            scores = score_instance(instance.task_kind, answer, instance.gold)
            fitness_values.append(scores.get(metric, 0.0))
        score = sum(fitness_values) / len(fitness_values)
    else:
        # no dataset: exercise the network once so the ledger is meaningful
        _, ledger = run_network(spec, args.query, policy, registry, toolset, seed=seed)
        total.absorb(ledger)
        score = None
    row = network_report_row(spec, score, total)
    if args.out:
        write_rows([row], args.out)
    print(render_table([row], MAS_COLUMNS))
    return EXIT_OK


def cmd_parse_name(args) -> int:
    tree = parse_name(args.name)
    summary = {
        "canonical": serialize_name(tree),
        "display": display_name(tree),
        "depth": depth(tree),
        "leaves": [leaf.public_name for leaf in leaves(tree)],
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_gen_env(args) -> int:
    spec = load_simenv_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    instances, descriptors = gen_simenv(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_dataset(instances, out_dir / "dataset.jsonl")
    tools_json = json.dumps([d.to_json() for d in descriptors], indent=2, sort_keys=True)
    (out_dir / "tools.json").write_text(tools_json + "\n", encoding="utf-8")
    # carry the environment's planner defaults into a reusable run config
    config_json = json.dumps(
        {
            "search": {
                "judge_accuracy": spec.judge_accuracy,
                "modify_success": spec.modify_success,
                "reserve_prob": spec.reserve_prob,
                "seed": spec.seed,
            }
        },
        indent=2,
        sort_keys=True,
    )
    (out_dir / "config.json").write_text(config_json + "\n", encoding="utf-8")
    print(f"wrote {len(instances)} instances and {len(descriptors)} tools to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        raise DataError(f"run directory not found: {run_dir}")
    found = False
    for name, columns in (
        ("library.jsonl", ("name", "score", "metric", "stage", "depth", "tokens", "created_step")),
        ("mas.jsonl", MAS_COLUMNS),
        ("evaluate.jsonl", ("name", "metric", "test_score", "n_instances", "failures")),
    ):
        path = run_dir / name
        if path.exists():
            rows = read_rows(path)
            print(f"== {name} ==")
            print(render_table(rows, columns))
            print()
            found = True
    if not found:
        raise DataError(f"no report files found in {run_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolamp",
        description="Greedy hierarchical amplification of agent tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    amplify = sub.add_parser("amplify", help="run the two-stage search")
    amplify.add_argument("--tools", required=True, help="tool registry JSON file")
    amplify.add_argument("--val", required=True, help="validation dataset (JSON Lines)")
    amplify.add_argument("--metric", default=None)
    amplify.add_argument("--delta", type=float, default=None)
    amplify.add_argument("--k", type=int, default=None)
    amplify.add_argument("--max-layers", dest="max_layers", type=int, default=None)
    amplify.add_argument("--max-stage2-rounds", dest="max_stage2_rounds", type=int, default=None)
    amplify.add_argument("--seed", type=int, default=None)
    amplify.add_argument("--workers", type=int, default=None)
    amplify.add_argument("--out", default=None, help="library JSON Lines output path")
    amplify.add_argument("--config", default=None)
    amplify.set_defaults(func=cmd_amplify)

    evaluate = sub.add_parser("evaluate", help="score a named composite on held-out data")
    evaluate.add_argument("--name", required=True, help="composite name string")
    evaluate.add_argument("--test", required=True, help="test dataset (JSON Lines)")
    evaluate.add_argument("--tools", required=True)
    evaluate.add_argument("--metric", default=None)
    evaluate.add_argument("--seed", type=int, default=None)
    evaluate.add_argument("--out", default=None)
    evaluate.add_argument("--config", default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    mas = sub.add_parser("mas", help="run a baseline multi-agent network")
    mas.add_argument("--kind", default=None, choices=TOPOLOGY_KINDS)
    mas.add_argument("--num", type=int, default=None)
    mas.add_argument("--rounds", type=int, default=None)
    mas.add_argument("--seed", type=int, default=None)
    mas.add_argument("--metric", default=None)
    mas.add_argument("--val", default=None, help="dataset of queries to run")
    mas.add_argument("--query", default="ping", help="single query when no dataset is given")
    mas.add_argument("--tools", default=None, help="optional tool registry file")
    mas.add_argument("--out", default=None)
    mas.add_argument("--config", default=None)
    mas.set_defaults(func=cmd_mas)

    parse_cmd = sub.add_parser("parse-name", help="parse a composite name string")
    parse_cmd.add_argument("name")
    parse_cmd.set_defaults(func=cmd_parse_name)

    gen_env = sub.add_parser("gen-env", help="generate a synthetic environment")
    gen_env.add_argument("--spec", required=True, help="environment spec JSON file")
    gen_env.add_argument("--seed", type=int, default=None)
    gen_env.add_argument("--out", default="env", help="output directory")
    gen_env.set_defaults(func=cmd_gen_env)

    report = sub.add_parser("report", help="render report files from a run directory")
    report.add_argument("run_dir")
    report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ToolFailure as exc:
        print(f"tool failure: {exc}", file=sys.stderr)
        return EXIT_TOOL
    except ToolampError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
