"""Expression evaluation: navigation, templates, predicates, queries."""

import pytest
from hypothesis import given, settings, strategies as st

from modelbench.errors import (
    EvalTypeError,
    NavigationError,
    NullAccessError,
    PredicateTypeError,
)
from modelbench.lang import (
    ElementHandle,
    EvalContext,
    execute_query,
    evaluate_predicate,
    evaluate_source,
    format_value,
)


def _ctx(bench, fx, element_id):
    return bench.context_for(element_id)


# -- the three console expressions ------------------------------------------


def test_console_map_attribute_names(erd):
    bench, fx = erd
    v = bench.eval("data.$ownedAttributes.values.map(attr => attr.name)", fx.user)
    assert format_value(v) == "[ 'id', 'surname', 'firstname' ]"


def test_console_layout_template(erd):
    bench, fx = erd
    v = bench.eval("`${node.x} * ${node.y} = ${node.x * node.y}`", fx.user)
    assert v == "495 * 120 = 59400"


def test_console_view_predicate_text(erd):
    bench, fx = erd
    v = bench.eval("view.oclCondition", fx.user)
    assert v == "context DObject inv: self.instanceof.name = 'Entity'"


def test_console_map_matches_direct_loop(erd):
    bench, fx = erd
    store = bench.store
    for entity in (fx.user, fx.role):
        mapped = bench.eval("data.$ownedAttributes.values.map(x => x.name)", entity)
        value = store.registry.named_child(entity, "ownedAttributes")
        direct = [store.registry.object_name(oid) for oid in value.values]
        assert mapped == direct


# -- coalescing and state access ----------------------------------------------


def test_unset_state_defaults(erd):
    bench, fx = erd
    assert bench.eval("node.state.level ?? 3", fx.user) == 3
    assert bench.eval("node.state.grid ?? false", fx.user) is False


def test_coalesce_keeps_non_null(erd):
    bench, fx = erd
    bench.set_state(fx.user, "level", 1)
    assert bench.eval("node.state.level ?? 3", fx.user) == 1


def test_coalesce_absorbs_navigation_miss(erd):
    bench, fx = erd
    assert bench.eval("data.$bogus.value ?? 'fallback'", fx.user) == "fallback"


@settings(max_examples=60, deadline=None)
@given(st.one_of(st.none(), st.integers(-99, 99), st.booleans(), st.text(max_size=5)))
def test_coalesce_law(value):
    bench_value = evaluate_source("x ?? 'd'", EvalContext(store=None, locals={"x": value}))
    if value is None:
        assert bench_value == "d"
    else:
        assert bench_value == value


# -- predicates ------------------------------------------------------------------


def test_dialect_predicate_on_entity(erd):
    bench, fx = erd
    pred = "context DObject inv: self.instanceof.name = 'Entity'"
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.user)) is True
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.user_attrs["id"])) is False


def test_positional_predicate(expr):
    bench, fx = expr
    pred = "data.$left.value.node.x < data.$right.value.node.x"
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.root)) is True


def test_positional_predicate_mirrored(expr_mirrored):
    bench, fx = expr_mirrored
    pred = "data.$left.value.node.x < data.$right.value.node.x"
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.root)) is False


def test_non_boolean_predicate_rejected(erd):
    bench, fx = erd
    with pytest.raises(PredicateTypeError):
        evaluate_predicate("data.$name.value", _ctx(bench, fx, fx.user))


def test_dialect_operators(erd):
    bench, fx = erd
    pred = ("context DObject inv: self.instanceof.name = 'Entity' "
            "and not (self.name <> 'User')")
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.user)) is True
    assert evaluate_predicate(pred, _ctx(bench, fx, fx.role)) is False


# -- executeQuery ------------------------------------------------------------------


def test_query_filters_numbers(expr):
    bench, fx = expr
    hits = execute_query("data.instanceof.name == 'Number'", bench.store, fx.model)
    assert len(hits) == 4
    assert all(isinstance(h, ElementHandle) for h in hits)


def test_query_false_is_empty(expr):
    bench, fx = expr
    assert execute_query("false", bench.store, fx.model) == []


def test_query_boolean_filters_pk_attributes(erd):
    bench, fx = erd
    hits = execute_query("(data.$isPK.value ?? false) == true", bench.store, fx.model)
    assert [h.id for h in hits] == [fx.user_attrs["id"]]


def test_query_collects_values(erd):
    bench, fx = erd
    values = execute_query(
        "data.instanceof.name == 'Attribute' ? data.$name.value : null",
        bench.store, fx.model,
    )
    assert sorted(values) == ["description", "firstname", "id", "id", "name", "surname"]


def test_query_error_tagged_with_object(erd):
    bench, fx = erd
    with pytest.raises(NavigationError) as exc:
        execute_query("data.$name.value.bogus", bench.store, fx.model)
    assert "object" in (exc.value.path or "")


# -- errors -------------------------------------------------------------------------


def test_unknown_member_names_segment(erd):
    bench, fx = erd
    with pytest.raises(NavigationError) as exc:
        bench.eval("data.instanceof.sizes", fx.user)
    assert "sizes" in str(exc.value)


def test_null_member_access(erd):
    bench, fx = erd
    with pytest.raises(NullAccessError):
        bench.eval("node.state.missing.value", fx.user)


def test_value_on_multi_valued_feature(erd):
    bench, fx = erd
    with pytest.raises(EvalTypeError):
        bench.eval("data.$ownedAttributes.value", fx.user)


# -- arithmetic and indexing -----------------------------------------------------


def test_integer_division_yields_real():
    v = evaluate_source("3 / 2", EvalContext(store=None))
    assert v == 1.5
    v = evaluate_source("4 / 2", EvalContext(store=None))
    assert v == 2.0


def test_division_by_zero():
    with pytest.raises(EvalTypeError):
        evaluate_source("1 / 0", EvalContext(store=None))


def test_index_out_of_range_is_null(erd):
    bench, fx = erd
    assert bench.eval("data.$ownedAttributes.values[9] ?? 'none'", fx.user) == "none"
    first = bench.eval("data.$ownedAttributes.values[0].name", fx.user)
    assert first == "id"


def test_logical_operators_return_operands():
    ctx = EvalContext(store=None, locals={"grid": True})
    assert evaluate_source("grid && 'grid'", ctx) == "grid"
    ctx = EvalContext(store=None, locals={"grid": False})
    assert evaluate_source("grid && 'grid'", ctx) is False
    assert evaluate_source("null || 'x'", EvalContext(store=None)) == "x"


# -- purity -----------------------------------------------------------------------


def test_evaluation_is_pure(erd):
    bench, fx = erd
    before = bench.store.serialize()
    bench.eval("data.$ownedAttributes.values.map(a => a.$isPK.value)", fx.user)
    bench.eval("`${node.x * node.y}`", fx.user)
    execute_query("data.instanceof.name == 'Attribute'", bench.store, fx.model)
    assert bench.store.serialize() == before


# -- reflective members -----------------------------------------------------------


def test_class_members(expr):
    bench, fx = expr
    sub = bench.store.registry.named_child(fx.metamodel, "Sub")
    ctx = bench.context_for(sub.id)
    assert evaluate_source("data.name", ctx) == "Sub"
    assert evaluate_source("data.isAbstract", ctx) is False
    assert evaluate_source("data.extends.map(c => c.name)", ctx) == ["BinExpression"]
    assert evaluate_source("data.attributes.map(a => a.name)", ctx) == ["val"]
    assert evaluate_source("data.references.map(r => r.name)", ctx) == ["left", "right"]


def test_instances_member_counts_subclasses(expr):
    bench, fx = expr
    store = bench.store
    bin_cls = store.registry.named_child(fx.metamodel, "BinExpression")
    ctx = EvalContext(store=store, model_id=fx.model,
                      data=ElementHandle(store, bin_cls.id))
    assert evaluate_source("data.instances.size()", ctx) == 3
    assert evaluate_source("data.extendedBy.size()", ctx) == 4


def test_object_members(erd):
    bench, fx = erd
    assert bench.eval("data.className", fx.user) == "Entity"
    assert bench.eval("data.instanceof.name", fx.user) == "Entity"
    assert bench.eval("data.instanceOf.name", fx.user) == "Entity"
    parent = bench.eval("data.parent.name", fx.user_attrs["id"])
    assert parent == "User"
    assert bench.eval("data.parent", fx.user) is None
    assert bench.eval("data.kind", fx.user) == "object"


def test_model_members(erd):
    bench, fx = erd
    ctx = bench.context_for(fx.model)
    assert evaluate_source("data.isMetamodel", ctx) is False
    assert evaluate_source("data.allInstances.size()", ctx) == 9
    assert evaluate_source("objects.size()", ctx) == 9
    assert evaluate_source("model.name", ctx) == "erd"


def test_format_value_notation(erd):
    bench, fx = erd
    assert format_value(None) == "null"
    assert format_value(True) == "true"
    assert format_value([]) == "[]"
    assert format_value(59400) == "59400"
    assert format_value(59400.0) == "59400"
    assert format_value(1.5) == "1.5"
    assert format_value(["a'b", 1]) == "[ 'a\\'b', 1 ]"
    assert format_value(bench.eval("data", fx.user)) == "<Entity User>"
    assert format_value(bench.eval("data.instanceof", fx.user)) == "<DClass Entity>"
