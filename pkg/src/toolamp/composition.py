"""Composite-tool trees, their bracketed name grammar, and instantiation.

A tree is either a ``Leaf`` referencing a registered tool by its public
``base_suffix`` name, or a ``Node`` bundling child trees behind one
planner.  Single wrapping of a tool is conventionally recorded by
bumping the leaf suffix rather than by nesting brackets, so name
strings like ``['alpha_2']`` and ``[['a_0', 'b_1'], 'a_1']`` stay flat
per amplification chain and nested only across combinations.

Serialization is injective (quoted leaf vs bracketed list), which the
parser inverts exactly; the parser also accepts a bare top-level list
whose single item is a leaf, as published tables write stand-alone
tools that way.
"""

from dataclasses import dataclass
from typing import Union

from .errors import ConfigurationError, NameParseError, UnknownToolError
from .runtime import PlannerPolicy, run_react
from .toolkit import ToolDescriptor, ToolRegistry


@dataclass(frozen=True)
class Leaf:
    """A reference to a registered tool, named ``{base_name}_{depth_suffix}``.

    The suffix records the amplification layer at which this variant was
    captured; it is assigned by the amplifier and never parsed back into
    behavioral parameters.
    """

    base_name: str
    depth_suffix: int = 0

    def __post_init__(self):
        if not self.base_name:
            raise ConfigurationError("leaf base_name must be nonempty")
        if any(ch in self.base_name for ch in "'\"[],"):
            raise ConfigurationError(f"leaf base_name {self.base_name!r} contains grammar characters")
        if self.depth_suffix < 0:
            raise ConfigurationError("depth_suffix must be non-negative")

    @property
    def public_name(self) -> str:
        return f"{self.base_name}_{self.depth_suffix}"


@dataclass(frozen=True)
class Node:
    """An agent bundling child trees; optionally carries its own policy."""

    children: tuple["CompositionTree", ...]
    policy: PlannerPolicy | None = None

    def __post_init__(self):
        if not self.children:
            raise ConfigurationError("a composite node needs at least one child")


CompositionTree = Union[Leaf, Node]


def encapsulate(children, policy: PlannerPolicy | None = None) -> Node:
    """Wrap child trees into a new composite node (children untouched)."""
    children = tuple(children)
    if not children:
        raise ConfigurationError("cannot encapsulate an empty child list")
    return Node(children, policy)


def depth(tree: CompositionTree) -> int:
    """Structural stacking depth: 0 for a leaf, 1 + max child depth for a node."""
    if isinstance(tree, Leaf):
        return 0
    return 1 + max(depth(child) for child in tree.children)


def leaves(tree: CompositionTree) -> list[Leaf]:
    """All leaves in depth-first order."""
    if isinstance(tree, Leaf):
        return [tree]
    collected = []
    for child in tree.children:
        collected.extend(leaves(child))
    return collected


def serialize_name(tree: CompositionTree) -> str:
    """Canonical name string: ``'base_suffix'`` for leaves, ``[...]`` for nodes."""
    if isinstance(tree, Leaf):
        return f"'{tree.public_name}'"
    return "[" + ", ".join(serialize_name(child) for child in tree.children) + "]"


def display_name(tree: CompositionTree) -> str:
    """Name as published tables write it: a stand-alone leaf is shown as
    the agent's one-element toolset list."""
    if isinstance(tree, Leaf):
        return f"[{serialize_name(tree)}]"
    return serialize_name(tree)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str):
        raise NameParseError(message, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}, found {self.peek()!r}")
        self.pos += 1

    def parse_item(self) -> CompositionTree:
        self.skip_ws()
        ch = self.peek()
        if ch == "[":
            return self.parse_list()
        if ch in "'\"":
            return self.parse_leaf()
        self.error(f"expected a quoted tool name or '[', found {ch!r}")

    def parse_list(self) -> Node:
        self.expect("[")
        items = [self.parse_item()]
        self.skip_ws()
        while self.peek() == ",":
            self.pos += 1
            items.append(self.parse_item())
            self.skip_ws()
        if self.peek() == "]":
            self.pos += 1
            return Node(tuple(items))
        self.error("expected ',' or ']'")

    def parse_leaf(self) -> Leaf:
        quote = self.peek()
        self.pos += 1
        start = self.pos
        end = self.text.find(quote, start)
        if end == -1:
            self.error("unterminated quoted name")
        name = self.text[start:end]
        self.pos = end + 1
        base, underscore, suffix = name.rpartition("_")
        if not underscore or not base or not suffix.isdigit():
            self.pos = start
            self.error(f"tool name {name!r} must end in an integer suffix like '_0'")
        return Leaf(base, int(suffix))


def parse_name(text: str) -> CompositionTree:
    """Parse a name string back into a tree: the exact inverse of
    ``serialize_name``.

    Accepts single or double quotes and arbitrary spacing.  A bare quoted
    name is a leaf; brackets always denote a node, so one-element lists
    such as a table's ``['alpha_2']`` parse to an agent wrapping that one
    tool.
    """
    parser = _Parser(text)
    parser.skip_ws()
    if not parser.peek():
        raise NameParseError("empty name string", 0)
    tree = parser.parse_item()
    parser.skip_ws()
    if parser.pos != len(text):
        parser.error(f"trailing characters {text[parser.pos:]!r}")
    return tree


def structural_key(tree: CompositionTree) -> tuple:
    """Hashable identity covering structure and per-node policies; used to
    make instantiation idempotent for repeated scoring of equal trees."""
    if isinstance(tree, Leaf):
        return ("leaf", tree.public_name)
    return ("node", tree.policy, tuple(structural_key(child) for child in tree.children))


def instantiate(
    tree: CompositionTree,
    registry: ToolRegistry,
    policy_factory=None,
    public_name: str | None = None,
    name_prefix: str = "composite",
) -> str:
    """Register the tree as an invocable tool and return the root tool id.

    Children are instantiated depth-first; leaves resolve to existing
    registrations (never creating new ones), and each node becomes a tool
    whose invocation runs the agent loop over its children.  Equal
    subtrees reuse their registration, so a fresh tree registers exactly
    one tool per internal node.
    """
    missing = sorted(
        {leaf.public_name for leaf in leaves(tree) if registry.resolve_public(leaf.public_name) is None}
    )
    if missing:
        raise UnknownToolError(f"unresolved leaf tools: {', '.join(missing)}")
    return _instantiate(tree, registry, policy_factory, public_name, name_prefix)


def _instantiate(tree, registry, policy_factory, public_name, name_prefix) -> str:
    if isinstance(tree, Leaf):
        return registry.resolve_public(tree.public_name)
    key = structural_key(tree)
    existing = registry.lookup_structural(key)
    if existing is not None:
        return existing
    child_ids = [
        _instantiate(child, registry, policy_factory, None, name_prefix)
        for child in tree.children
    ]
    policy = tree.policy
    if policy is None:
        policy = policy_factory(depth(tree)) if policy_factory else PlannerPolicy()
    name = public_name or registry.next_public_name(name_prefix)
    node_depth = 1 + max(registry.descriptor(cid).depth for cid in child_ids)
    descriptor = ToolDescriptor(
        tool_id=name,
        public_name=name,
        description=f"Agent tool bundling {len(child_ids)} sub-tools",
        backend="composite",
        backend_params={},
        depth=node_depth,
    )
    scope = serialize_name(tree)

    def run_composite(query, ledger, seed, _policy=policy, _children=tuple(child_ids), _scope=scope):
        outcome = run_react(_policy, list(_children), query, registry, seed, scope=_scope)
        ledger.absorb(outcome.ledger)
        return outcome.answer

    registry.register(descriptor, run_composite)
    registry.remember_structural(key, name)
    return name
