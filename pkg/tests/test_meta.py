"""Reflective read API over the meta-metamodel."""

import pytest

from modelbench.errors import AmbiguousNameError, NotFoundError
from modelbench.meta import DObject, DReference, DValue
from modelbench.workbench import Workbench

from conftest import single_value


def _names(store, ids):
    return [getattr(store.resolve(i), "name", None) for i in ids]


# -- classAllInstances -------------------------------------------------


def test_all_instances_entities(erd):
    bench, fx = erd
    store = bench.store
    ids = store.registry.all_instances(fx.entity_class, fx.model)
    assert [store.registry.object_name(i) for i in ids] == ["User", "Role"]


def test_all_instances_empty(erd):
    bench, fx = erd
    store = bench.store
    empty_cls = bench.add_class(fx.metamodel, "Unused")
    assert store.registry.all_instances(empty_cls, fx.model) == []


def _count_tree(store, root_id):
    """Independent oracle: walk the containment tree and count nodes."""
    count = 1
    for child in store.registry.containment_children(root_id):
        count += _count_tree(store, child)
    return count


def test_all_instances_expression_tree(expr):
    bench, fx = expr
    store = bench.store
    expression_cls = store.registry.named_child(fx.metamodel, "Expression")
    instances = store.registry.all_instances(expression_cls.id, fx.model)
    assert len(instances) == _count_tree(store, fx.root) == 7


def test_all_instances_unknown_ids(erd):
    bench, fx = erd
    with pytest.raises(NotFoundError):
        bench.store.registry.all_instances("nope", fx.model)
    with pytest.raises(NotFoundError):
        bench.store.registry.all_instances(fx.entity_class, "nope")


# -- classFeatures ------------------------------------------------------


def test_features_entity(erd):
    bench, fx = erd
    store = bench.store
    attrs, refs = store.registry.features(fx.entity_class)
    assert _names(store, attrs) == ["name"]
    assert _names(store, refs) == ["ownedAttributes"]


def test_features_bare_class(erd):
    bench, fx = erd
    cid = bench.add_class(fx.metamodel, "Bare")
    assert bench.store.registry.features(cid) == ([], [])


def test_features_inherited_superclass_first(expr):
    bench, fx = expr
    store = bench.store
    sub_cls = store.registry.named_child(fx.metamodel, "Sub")
    attrs, refs = store.registry.features(sub_cls.id)
    assert _names(store, attrs) == ["val"]
    assert _names(store, refs) == ["left", "right"]
    # super prefix property
    bin_cls = store.registry.named_child(fx.metamodel, "BinExpression")
    sup_attrs, sup_refs = store.registry.features(bin_cls.id)
    assert attrs[: len(sup_attrs)] == sup_attrs
    assert refs[: len(sup_refs)] == sup_refs


# -- classHierarchy -----------------------------------------------------


def test_hierarchy_bin_expression(expr):
    bench, fx = expr
    store = bench.store
    bin_cls = store.registry.named_child(fx.metamodel, "BinExpression")
    extends, extended_by = store.registry.hierarchy(bin_cls.id)
    assert set(_names(store, extended_by)) == {"Add", "Sub", "Mult", "Div"}
    assert _names(store, extends) == ["Expression"]


def test_hierarchy_root_class(expr):
    bench, fx = expr
    store = bench.store
    expression = store.registry.named_child(fx.metamodel, "Expression")
    extends, _ = store.registry.hierarchy(expression.id)
    assert extends == []


def test_hierarchy_number(expr):
    bench, fx = expr
    store = bench.store
    number = store.registry.named_child(fx.metamodel, "Number")
    extends, _ = store.registry.hierarchy(number.id)
    assert _names(store, extends) == ["Expression"]


# -- resolve ---------------------------------------------------------------


def test_resolve_round_trip_all_elements(erd):
    bench, _ = erd
    registry = bench.store.registry
    for eid, el in registry.elements.items():
        assert registry.resolve(eid) is el


def test_resolve_deleted_id(erd):
    bench, fx = erd
    surname = fx.user_attrs["surname"]
    bench.delete(surname)
    with pytest.raises(NotFoundError):
        bench.store.resolve(surname)


def test_resolve_owned_attributes_reference(erd):
    bench, fx = erd
    ref = bench.store.resolve(fx.owned_attributes)
    assert isinstance(ref, DReference)
    assert ref.isContainment is True


# -- namedChild --------------------------------------------------------------


def test_named_child_owned_attributes(erd):
    bench, fx = erd
    val = bench.store.registry.named_child(fx.user, "ownedAttributes")
    assert isinstance(val, DValue)
    assert len(val.values) == 3


def test_named_child_missing(erd):
    bench, fx = erd
    with pytest.raises(NotFoundError):
        bench.store.registry.named_child(fx.user, "nonexistent")


def test_named_child_val_after_cascade(expr):
    bench, fx = expr
    val = bench.store.registry.named_child(fx.root, "val")
    assert val.values == [684]


def test_named_child_ambiguous(erd):
    bench, fx = erd
    bench.add_object(fx.model, "Entity", {"name": "Dup"})
    bench.add_object(fx.model, "Entity", {"name": "Dup"})
    with pytest.raises(AmbiguousNameError):
        bench.store.registry.named_child(fx.model, "Dup")


def test_named_child_model_scope(erd):
    bench, fx = erd
    registry = bench.store.registry
    assert registry.named_child(fx.model, "User").id == fx.user
    assert registry.named_child(fx.metamodel, "Entity").id == fx.entity_class


# -- invariants ----------------------------------------------------------


def test_instance_membership_iff_subclass(expr):
    bench, fx = expr
    store = bench.store
    registry = store.registry
    classes = [
        registry.named_child(fx.metamodel, n).id
        for n in ("Expression", "BinExpression", "Number", "Add", "Sub")
    ]
    objects = registry.objects_of_model(fx.model)
    for cid in classes:
        members = set(registry.all_instances(cid, fx.model))
        for oid in objects:
            obj = registry.elements[oid]
            is_member = obj.instanceOf == cid or cid in registry.superclasses(obj.instanceOf)
            assert (oid in members) == is_member


def test_containment_walk_terminates(erd, expr):
    for bench, fx in (erd, expr):
        registry = bench.store.registry
        objects = registry.objects_of_model(fx.model)
        for oid in objects:
            steps = 0
            cursor = registry.elements[oid]
            while cursor.containerOf is not None:
                cursor = registry.elements[cursor.containerOf[0]]
                steps += 1
                assert steps <= len(objects)


def test_object_name_reads_name_feature(erd):
    bench, fx = erd
    assert bench.store.registry.object_name(fx.user) == "User"
    assert single_value(bench.store, fx.user_attrs["id"], "isPK") is True


def test_operation_signatures_stored_not_executable(erd):
    bench, fx = erd
    store = bench.store
    store.add_operation(fx.entity_class, "primaryKey", params=[["self", "Entity"]],
                        returns="Attribute")
    cls = store.resolve(fx.entity_class)
    assert [op.name for op in cls.operations] == ["primaryKey"]
    # visible reflectively, with no call semantics anywhere
    names = bench.eval("data.operations.map(o => o.name)", fx.entity_class)
    assert names == ["primaryKey"]
    # survives the serialization round trip
    from modelbench.store import ProjectStore

    loaded = ProjectStore.load(store.serialize())
    assert [op.name for op in loaded.resolve(fx.entity_class).operations] == ["primaryKey"]
