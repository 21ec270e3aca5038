from sqluq.ast_core import NodeKind, parse_sql, preorder
from sqluq.labeler import (
    Provenance,
    align_and_label,
    error_descriptors,
    label_with_ablation,
    label_with_context,
    make_context,
    recursively_equivalent,
    shallow_equivalent,
)


def ctx_for(gen_sql, gold_sql):
    gen = parse_sql(gen_sql)
    gold = parse_sql(gold_sql)
    return gen, gold, make_context(gen, gold)


def find(tree, kind, content=None):
    for node in preorder(tree):
        if node.kind is kind and (content is None or node.content == content):
            return node
    raise AssertionError(f"no {kind} node with content {content!r}")


class TestShallowEquivalence:
    def test_antisymmetric_pair_swapped_mode(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a > b", "SELECT * FROM t WHERE b < a"
        )
        gt = find(gen, NodeKind.GT)
        lt = find(gold, NodeKind.LT)
        ok, modes = shallow_equivalent(gt, lt, ctx)
        assert ok and modes == frozenset({"swapped"})

    def test_function_name_mismatch(self):
        gen, gold, ctx = ctx_for("SELECT max(x) FROM t", "SELECT sum(x) FROM t")
        ok, _ = shallow_equivalent(find(gen, NodeKind.AGG), find(gold, NodeKind.AGG), ctx)
        assert not ok

    def test_qualified_vs_unqualified_column(self):
        gen, gold, ctx = ctx_for(
            "SELECT a.name FROM artist AS a", "SELECT name FROM artist"
        )
        ok, _ = shallow_equivalent(
            find(gen, NodeKind.COLUMN), find(gold, NodeKind.COLUMN), ctx
        )
        assert ok

    def test_qualifiers_resolving_to_same_base_table(self):
        gen, gold, ctx = ctx_for(
            "SELECT x.name FROM artist AS x", "SELECT a.name FROM artist AS a"
        )
        ok, _ = shallow_equivalent(
            find(gen, NodeKind.COLUMN), find(gold, NodeKind.COLUMN), ctx
        )
        assert ok

    def test_unresolvable_qualifier_differs(self):
        gen, gold, ctx = ctx_for(
            "SELECT b.name FROM artist AS a", "SELECT a.name FROM artist AS a"
        )
        ok, _ = shallow_equivalent(
            find(gen, NodeKind.COLUMN), find(gold, NodeKind.COLUMN), ctx
        )
        assert not ok

    def test_literal_string_vs_number_distinct(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a = '1'", "SELECT * FROM t WHERE a = 1"
        )
        ok, _ = shallow_equivalent(
            find(gen, NodeKind.LITERAL), find(gold, NodeKind.LITERAL), ctx
        )
        assert not ok

    def test_symmetric_kinds_offer_both_modes(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a = b", "SELECT * FROM t WHERE b = a"
        )
        ok, modes = shallow_equivalent(find(gen, NodeKind.EQ), find(gold, NodeKind.EQ), ctx)
        assert ok and modes == frozenset({"direct", "swapped"})


class TestRecursiveEquivalence:
    def test_symmetric_swap(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a = b", "SELECT * FROM t WHERE b = a"
        )
        assert recursively_equivalent(find(gen, NodeKind.EQ), find(gold, NodeKind.EQ), ctx)

    def test_antisymmetric_flip(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a > b", "SELECT * FROM t WHERE b < a"
        )
        assert recursively_equivalent(find(gen, NodeKind.GT), find(gold, NodeKind.LT), ctx)

    def test_antisymmetric_without_swap_differs(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a > b", "SELECT * FROM t WHERE a < b"
        )
        assert not recursively_equivalent(
            find(gen, NodeKind.GT), find(gold, NodeKind.LT), ctx
        )

    def test_identity_whole_tree(self):
        gen, gold, ctx = ctx_for("SELECT name FROM people", "SELECT name FROM people")
        assert recursively_equivalent(gen, gold, ctx)

    def test_nary_and_order_free(self):
        gen, gold, ctx = ctx_for(
            "SELECT * FROM t WHERE a = 1 AND b = 2 AND c = 3",
            "SELECT * FROM t WHERE c = 3 AND a = 1 AND b = 2",
        )
        assert recursively_equivalent(gen, gold, ctx)

    def test_projection_order_sensitive(self):
        gen, gold, ctx = ctx_for("SELECT a, b FROM t", "SELECT b, a FROM t")
        assert not recursively_equivalent(gen, gold, ctx)

    def test_memo_hits_during_labeling_of_repeated_subexpressions(self):
        gen = parse_sql("SELECT * FROM t WHERE a = 1 AND a = 1 AND b = 9")
        gold = parse_sql("SELECT * FROM t WHERE a = 1 AND a = 1 AND b = 2")
        _, ctx = label_with_context(gen, gold)
        assert ctx.hits > 0
        assert ctx.misses > 0


class TestAlignAndLabel:
    def test_identity_labels_all_correct(self):
        for sql in (
            "SELECT name FROM people",
            "SELECT a, sum(b) FROM t GROUP BY a HAVING sum(b) > 3 ORDER BY a LIMIT 1",
            "SELECT x.v FROM (SELECT v FROM t1) AS x WHERE x.v IN (1, 2)",
        ):
            tree = parse_sql(sql)
            lm = align_and_label(tree, parse_sql(sql))
            assert set(lm.labels.values()) == {0}
            assert set(lm.labels) == {n.id for n in preorder(tree)}

    def test_wrong_table_blames_table_and_identifier(self):
        gen = parse_sql("SELECT name FROM artists")
        gold = parse_sql("SELECT name FROM artist")
        lm = align_and_label(gen, gold)
        assert sorted(error_descriptors(gen, lm)) == [
            ("Identifier", "artists"),
            ("Table", "artists"),
        ]

    def test_wrong_literal_blames_literal_only(self):
        gen = parse_sql("SELECT * FROM t WHERE a = 1")
        lm = align_and_label(gen, parse_sql("SELECT * FROM t WHERE a = 2"))
        assert error_descriptors(gen, lm) == [("Literal", "1")]

    def test_inserted_order_by_blamed_with_children(self):
        gen = parse_sql("SELECT * FROM t ORDER BY a")
        lm = align_and_label(gen, parse_sql("SELECT * FROM t"))
        assert sorted(error_descriptors(gen, lm)) == [
            ("Column", "a"),
            ("Identifier", "a"),
            ("OrderBy", None),
            ("Ordered", None),
        ]

    def test_inserted_join_blamed(self):
        gen = parse_sql("SELECT a FROM t JOIN s ON t.x = s.x")
        gold = parse_sql("SELECT a FROM t")
        lm = align_and_label(gen, gold)
        join = find(gen, NodeKind.JOIN)
        assert lm.labels[join.id] == 1

    def test_inserted_limit_blamed(self):
        gen = parse_sql("SELECT a FROM t LIMIT 3")
        gold = parse_sql("SELECT a FROM t")
        lm = align_and_label(gen, gold)
        limit = find(gen, NodeKind.LIMIT)
        assert lm.labels[limit.id] == 1

    def test_wholly_inserted_where_container_stays_blamed(self):
        gen = parse_sql("SELECT a FROM t WHERE a = 1")
        gold = parse_sql("SELECT a FROM t")
        lm = align_and_label(gen, gold)
        where = find(gen, NodeKind.WHERE)
        assert lm.labels[where.id] == 1

    def test_provenance_values(self):
        gen = parse_sql("SELECT name FROM artists")
        gold = parse_sql("SELECT name FROM artist")
        lm = align_and_label(gen, gold)
        provs = {lm.provenance[n.id] for n in preorder(gen)}
        assert Provenance.SUPPRESSED in provs
        assert Provenance.RESCUED in provs
        assert Provenance.FIRST_PASS in provs

    def test_label_map_domain_is_exactly_gen_nodes(self):
        gen = parse_sql("SELECT a FROM t")
        gold = parse_sql("SELECT a, b, c FROM t WHERE a = 1 ORDER BY b")
        lm = align_and_label(gen, gold)
        assert set(lm.labels) == {n.id for n in preorder(gen)}
        assert set(lm.labels.values()) == {0}

    def test_select_item_alias_mirrors_wrapped_expression(self):
        gen = parse_sql("SELECT wage AS w FROM emp")
        gold = parse_sql("SELECT salary AS s FROM emp")
        lm = align_and_label(gen, gold)
        alias = find(gen, NodeKind.ALIAS)
        col = find(gen, NodeKind.COLUMN, "wage")
        assert lm.labels[alias.id] == lm.labels[col.id] == 1

    def test_alias_wrapper_correct_when_expression_correct(self):
        gen = parse_sql("SELECT salary AS w FROM emp")
        gold = parse_sql("SELECT salary FROM emp")
        lm = align_and_label(gen, gold)
        assert set(lm.labels.values()) == {0}


class TestRescueAblation:
    def test_monotone_rescue(self):
        cases = [
            ("SELECT name FROM artists", "SELECT name FROM artist"),
            ("SELECT * FROM t WHERE a = 1", "SELECT * FROM t WHERE a = 2"),
            ("SELECT a, b FROM t ORDER BY a", "SELECT b FROM s"),
        ]
        for gen_sql, gold_sql in cases:
            gen = parse_sql(gen_sql)
            gold = parse_sql(gold_sql)
            with_rescue = label_with_ablation(gen, gold, enable_rescue=True)
            without = label_with_ablation(gen, gold, enable_rescue=False)
            assert with_rescue.error_ids() <= without.error_ids()

    def test_rescue_off_overblames_documented_siblings(self):
        gen = parse_sql("SELECT * FROM t WHERE a = 1")
        gold = parse_sql("SELECT * FROM t WHERE a = 2")
        without = label_with_ablation(gen, gold, enable_rescue=False)
        blamed = set(error_descriptors(gen, without))
        assert {("Star", None), ("Table", "t"), ("Column", "a")} <= blamed

    def test_rescue_off_identity_still_clean(self):
        gen = parse_sql("SELECT name FROM people")
        lm = label_with_ablation(gen, parse_sql("SELECT name FROM people"), enable_rescue=False)
        assert set(lm.labels.values()) == {0}
