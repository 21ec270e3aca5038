"""Per-node correctness labeling of a generated SQL tree against a gold tree.

Labeling runs in three passes over the generated tree:

1. a contextual top-down alignment that pairs generated and gold subtrees
   and stops recursing wherever a pair is recursively equivalent,
2. a suppression pass that clears blame from structural containers whose
   kind also occurs in the gold tree, and
3. a global rescue pass that clears any remaining error node that is
   recursively equivalent to some gold node anywhere in the gold tree.

Equivalence is semantic rather than structural: symmetric operators may
match with swapped operands, anti-symmetric comparison pairs may match
with the operator flipped, and column qualifiers are normalized through
per-query alias-to-table maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from sqluq.ast_core import (
    AliasMap,
    NodeKind,
    SqlNode,
    build_alias_map,
    preorder,
)

# Container kinds whose blame is suppressed when the gold tree contains a
# node of the same kind ("only their children differ").
SUPPRESSIBLE_KINDS = frozenset(
    {
        NodeKind.SELECT,
        NodeKind.FROM,
        NodeKind.WHERE,
        NodeKind.GROUP_BY,
        NodeKind.HAVING,
        NodeKind.EQ,
        NodeKind.NEQ,
    }
)

# Operators whose operands may match in reverse order.
SYMMETRIC_KINDS = frozenset(
    {NodeKind.EQ, NodeKind.NEQ, NodeKind.ADD, NodeKind.MUL, NodeKind.AND, NodeKind.OR}
)

# Comparison pairs equivalent under operand swapping.
ANTI_SYMMETRIC_PAIRS = frozenset(
    {
        (NodeKind.GT, NodeKind.LT),
        (NodeKind.LT, NodeKind.GT),
        (NodeKind.GTE, NodeKind.LTE),
        (NodeKind.LTE, NodeKind.GTE),
    }
)

_BINARY_OP_KINDS = frozenset(
    {
        NodeKind.EQ,
        NodeKind.NEQ,
        NodeKind.GT,
        NodeKind.LT,
        NodeKind.GTE,
        NodeKind.LTE,
        NodeKind.LIKE,
        NodeKind.ADD,
        NodeKind.SUB,
        NodeKind.MUL,
        NodeKind.DIV,
    }
)

# Kinds whose identifier children restate information already captured by
# the node-level content/qualifier rules, so child matching skips them.
_LEAF_LIKE_KINDS = frozenset(
    {NodeKind.COLUMN, NodeKind.TABLE, NodeKind.STAR, NodeKind.TABLE_ALIAS}
)

CORRECT = 0
ERROR = 1


class Provenance(Enum):
    INITIAL = "Initial"
    FIRST_PASS = "FirstPass"
    SUPPRESSED = "Suppressed"
    RESCUED = "Rescued"


@dataclass
class LabelMap:
    """Binary labels (0 correct / 1 error) for every generated node."""

    labels: dict[int, int]
    provenance: dict[int, Provenance]

    def error_ids(self) -> set[int]:
        return {nid for nid, lab in self.labels.items() if lab == ERROR}


@dataclass
class EquivalenceContext:
    """Alias maps plus a memo cache for one (generated, gold) pair."""

    gen_aliases: AliasMap
    gold_aliases: AliasMap
    memo: dict[tuple[int, int], bool] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0


def _unwrap(node: SqlNode) -> SqlNode:
    """Alias wrappers are transparent for equivalence and pairing."""
    while node.kind is NodeKind.ALIAS:
        node = node.children[0]
    return node


def _match_children(node: SqlNode) -> list[SqlNode]:
    """Children participating in the one-to-one equivalence correspondence."""
    if node.kind in _LEAF_LIKE_KINDS:
        return []
    if node.kind is NodeKind.SUBQUERY:
        return [c for c in node.children if c.kind is not NodeKind.TABLE_ALIAS]
    return [_unwrap(c) for c in node.children]


def _pair_children(node: SqlNode) -> list[SqlNode]:
    """Children visited by the blame recursion (alias wrappers unwrapped).

    Identifier leaves under Column/Table/Star nodes restate the content
    the node-level rules already compare, so the recursion skips them;
    their labels come from subtree marking and the rescue pass.  This
    keeps final labels independent of gold child order.
    """
    if node.kind in _LEAF_LIKE_KINDS:
        return [c for c in node.children if c.kind is NodeKind.TABLE_ALIAS]
    return [_unwrap(c) for c in node.children]


def _qualifier_of(column: SqlNode) -> str | None:
    for child in column.children:
        if child.kind is NodeKind.IDENTIFIER and "qualifier" in child.flags:
            return child.content
    return None


def _resolve_qualifier(name: str, aliases: AliasMap) -> str:
    """An alias resolves to its base table; anything else names itself."""
    return aliases.entries.get(name, name)


def shallow_equivalent(
    a: SqlNode, b: SqlNode, ctx: EquivalenceContext
) -> tuple[bool, frozenset[str]]:
    """Node-level equivalence test, ignoring children.

    Returns (equivalent, match_modes) where match_modes is a subset of
    {"direct", "swapped"} describing the child orders under which the
    operands may correspond.
    """
    a = _unwrap(a)
    b = _unwrap(b)
    if (a.kind, b.kind) in ANTI_SYMMETRIC_PAIRS:
        return True, frozenset({"swapped"})
    if a.kind is not b.kind:
        return False, frozenset()
    kind = a.kind
    modes = frozenset({"direct", "swapped"}) if kind in SYMMETRIC_KINDS else frozenset({"direct"})

    if kind is NodeKind.COLUMN:
        if a.content != b.content:
            return False, frozenset()
        qa, qb = _qualifier_of(a), _qualifier_of(b)
        if qa is None or qb is None:
            return True, modes
        if qa == qb:
            return True, modes
        base_a = _resolve_qualifier(qa, ctx.gen_aliases)
        base_b = _resolve_qualifier(qb, ctx.gold_aliases)
        if base_a == base_b:
            return True, modes
        return False, frozenset()
    if kind is NodeKind.IDENTIFIER:
        # Qualifier and table-name identifiers compare alias-normalized so
        # consistent alias renames never create content errors.
        a_ref = "qualifier" in a.flags or "table_name" in a.flags
        b_ref = "qualifier" in b.flags or "table_name" in b.flags
        if a_ref and b_ref:
            base_a = _resolve_qualifier(a.content, ctx.gen_aliases)
            base_b = _resolve_qualifier(b.content, ctx.gold_aliases)
            return (base_a == base_b), modes
        return (a.content == b.content), modes
    if kind is NodeKind.LITERAL:
        return (a.content == b.content and a.flags == b.flags), modes
    if kind in (NodeKind.TABLE, NodeKind.FUNC, NodeKind.AGG):
        return (a.content == b.content), modes
    if kind in (NodeKind.OTHER, NodeKind.ORDERED, NodeKind.JOIN):
        return (a.content == b.content), modes
    if kind is NodeKind.TABLE_ALIAS:
        # alias names themselves never trigger content errors
        return True, modes
    return True, modes


def recursively_equivalent(a: SqlNode, b: SqlNode, ctx: EquivalenceContext) -> bool:
    """True when the two subtrees are semantically interchangeable."""
    a = _unwrap(a)
    b = _unwrap(b)
    key = (a.id, b.id)
    cached = ctx.memo.get(key)
    if cached is not None:
        ctx.hits += 1
        return cached
    ctx.misses += 1
    ok, modes = shallow_equivalent(a, b, ctx)
    result = False
    if ok:
        ca = _match_children(a)
        cb = _match_children(b)
        if a.kind in (NodeKind.AND, NodeKind.OR):
            # every generated operand needs a distinct gold partner; extra
            # gold operands are omissions and omissions are not penalized
            result = len(ca) <= len(cb) and _greedy_bipartite_match(ca, cb, ctx)
        elif len(ca) != len(cb):
            result = False
        elif not ca:
            result = True
        elif a.kind in _BINARY_OP_KINDS and len(ca) == 2:
            result = False
            if "direct" in modes:
                result = recursively_equivalent(ca[0], cb[0], ctx) and recursively_equivalent(
                    ca[1], cb[1], ctx
                )
            if not result and "swapped" in modes:
                result = recursively_equivalent(ca[0], cb[1], ctx) and recursively_equivalent(
                    ca[1], cb[0], ctx
                )
        else:
            # clause lists, projection lists, argument lists: order-sensitive
            result = all(recursively_equivalent(x, y, ctx) for x, y in zip(ca, cb))
    ctx.memo[key] = result
    return result


def _greedy_bipartite_match(
    ca: list[SqlNode], cb: list[SqlNode], ctx: EquivalenceContext
) -> bool:
    """Order-free injective correspondence for n-ary symmetric connectives."""
    remaining = list(cb)
    for x in ca:
        for j, y in enumerate(remaining):
            if recursively_equivalent(x, y, ctx):
                del remaining[j]
                break
        else:
            return False
    return True


def make_context(gen: SqlNode, gold: SqlNode) -> EquivalenceContext:
    return EquivalenceContext(build_alias_map(gen), build_alias_map(gold))


def label_with_ablation(gen: SqlNode, gold: SqlNode, enable_rescue: bool) -> LabelMap:
    """Full labeling with the global rescue pass optionally disabled."""
    label_map, _ = label_with_context(gen, gold, enable_rescue=enable_rescue)
    return label_map


def label_with_context(
    gen: SqlNode, gold: SqlNode, enable_rescue: bool = True
) -> tuple[LabelMap, EquivalenceContext]:
    """As label_with_ablation, also returning the equivalence context
    (useful for inspecting memoization behaviour)."""
    ctx = make_context(gen, gold)
    gen_nodes = preorder(gen)
    labels = {n.id: ERROR for n in gen_nodes}
    prov = {n.id: Provenance.INITIAL for n in gen_nodes}

    def mark_subtree_correct(node: SqlNode):
        for d in node.walk():
            labels[d.id] = CORRECT
            prov[d.id] = Provenance.FIRST_PASS

    def align(ngen: SqlNode, ngold: SqlNode):
        if recursively_equivalent(ngen, ngold, ctx):
            mark_subtree_correct(ngen)
            return
        labels[ngen.id] = ERROR
        prov[ngen.id] = Provenance.FIRST_PASS
        for cgen in _pair_children(ngen):
            for cgold in _pair_children(ngold):
                align(cgen, cgold)

    align(gen, gold)

    gold_nodes = preorder(gold)
    gold_kinds = {n.kind for n in gold_nodes}
    for node in gen_nodes:
        if (
            labels[node.id] == ERROR
            and node.kind in SUPPRESSIBLE_KINDS
            and node.kind in gold_kinds
        ):
            labels[node.id] = CORRECT
            prov[node.id] = Provenance.SUPPRESSED

    if enable_rescue:
        for node in gen_nodes:
            if labels[node.id] != ERROR:
                continue
            for gnode in gold_nodes:
                if recursively_equivalent(node, gnode, ctx):
                    labels[node.id] = CORRECT
                    prov[node.id] = Provenance.RESCUED
                    break

    # alias wrappers mirror the expression they name
    for node in gen_nodes:
        if node.kind is NodeKind.ALIAS:
            inner = _unwrap(node)
            labels[node.id] = labels[inner.id]
            prov[node.id] = prov[inner.id]

    return LabelMap(labels=labels, provenance=prov), ctx


def align_and_label(gen: SqlNode, gold: SqlNode) -> LabelMap:
    """Label every generated node against the gold tree (rescue enabled)."""
    return label_with_ablation(gen, gold, enable_rescue=True)


def error_descriptors(tree: SqlNode, label_map: LabelMap) -> list[tuple[str, str | None]]:
    """(kind, content) descriptors of the blamed nodes, in preorder."""
    return [n.descriptor() for n in preorder(tree) if label_map.labels[n.id] == ERROR]
