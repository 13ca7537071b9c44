"""View resolution, render trees, SVG output, projectional write-back."""

import pytest

from modelbench import views as v
from modelbench.errors import BoundsError, NotFoundError, TypeMismatchError
from modelbench.workbench import Workbench

from conftest import single_value


def _nodes_of(tree, kind):
    return [n for n in tree.walk() if n.kind == kind]


def _classes(tree):
    return {n.className for n in tree.walk() if n.className}


def _node_for(tree, element_id):
    hits = [n for n in tree.walk() if n.kind == "node" and n.elementId == element_id]
    assert len(hits) == 1, f"{element_id} appeared {len(hits)} times"
    return hits[0]


# -- resolveView ------------------------------------------------------------


def test_resolve_view_entity(erd):
    bench, fx = erd
    vp = v.default_viewpoint(bench.store)
    view = v.resolve_view(bench.store, fx.user, vp)
    assert view["name"] == "entity"


def test_resolve_view_minimal_default(erd):
    bench, fx = erd
    oid = bench.add_class(fx.metamodel, "Orphan")
    vp = v.default_viewpoint(bench.store)
    assert v.resolve_view(bench.store, oid, vp) is None
    tree = bench.render(fx.model)
    assert tree is not None  # classes are not part of the instance model render


def test_resolve_view_declaration_order(erd):
    bench, fx = erd
    vp = v.make_viewpoint("vp2", "vp2", [
        v.make_view("first", "first", "true", v.template(v.view_root("first"))),
        v.make_view("second", "second", "true", v.template(v.view_root("second"))),
    ])
    view = v.resolve_view(bench.store, fx.user, vp)
    assert view["name"] == "first"


# -- render ------------------------------------------------------------------


def test_render_erd_shape(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    entity_nodes = [n for n in _nodes_of(tree, "node") if "entity" in n.className.split()]
    attribute_nodes = [n for n in _nodes_of(tree, "node")
                       if "attribute" in n.className.split()]
    relation_nodes = [n for n in _nodes_of(tree, "node")
                      if "relation" in n.className.split()]
    edges = _nodes_of(tree, "edge")
    assert len(entity_nodes) == 2
    assert len(attribute_nodes) == 6
    assert len(relation_nodes) == 1
    assert len(edges) == 2


def test_render_empty_model(erd):
    bench, fx = erd
    empty = bench.create_model("empty", fx.metamodel)
    tree = bench.render(empty)
    assert tree.kind == "canvas"
    assert _nodes_of(tree, "node") == []


def test_render_totality(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    store = bench.store
    for oid in store.registry.objects_of_model(fx.model):
        _node_for(tree, oid)


def test_render_pk_text_and_geometry(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    user = _node_for(tree, fx.user)
    assert (user.x, user.y) == (495.0, 120.0)
    texts = [n.text for n in user.walk() if n.kind == "text"]
    assert "(PK)" in texts  # the id row
    # attribute rows are stacked inside the entity box
    id_row = _node_for(tree, fx.user_attrs["id"])
    assert id_row.x == 495.0 + v.ROW_INSET
    assert id_row.y == 120.0 + v.HEADER_HEIGHT


def test_render_determinism(erd):
    bench, fx = erd
    first = v.render_svg(bench.render(fx.model))
    second = v.render_svg(bench.render(fx.model))
    assert first == second


# -- semantic zoom -----------------------------------------------------------


ZOOM_SECTIONS = {"overview", "mid-detail", "full-detail"}


def _visible_sections(bench, fx):
    tree = bench.render(fx.model)
    user = _node_for(tree, fx.user)
    return {n.className for n in user.walk() if n.className in ZOOM_SECTIONS}


def test_zoom_default_level_is_full_detail(erd):
    bench, fx = erd
    assert _visible_sections(bench, fx) == {"full-detail"}


@pytest.mark.parametrize("level,expected", [
    (0, {"overview"}),
    (1, {"mid-detail"}),
    (2, {"full-detail"}),
    (3, {"full-detail"}),
])
def test_zoom_levels(erd, level, expected):
    bench, fx = erd
    bench.set_control_parameter(fx.model, "level", level)
    assert _visible_sections(bench, fx) == expected


def test_zoom_level_zero_hides_attribute_rows(erd):
    bench, fx = erd
    bench.set_control_parameter(fx.model, "level", 0)
    tree = bench.render(fx.model)
    user = _node_for(tree, fx.user)
    assert [n for n in user.walk() if n.kind == "node" and n is not user] == []


# -- SVG -----------------------------------------------------------------------


def test_svg_grid_pattern(erd):
    bench, fx = erd
    bench.set_state(fx.model, "grid", True)
    svg = bench.render_svg(fx.model)
    assert 'width="15" height="15"' in svg
    assert "grid-dots" in svg
    bench.set_state(fx.model, "grid", False)
    svg_off = bench.render_svg(fx.model)
    assert "grid-dots" not in svg_off


def test_svg_empty_canvas(erd):
    bench, fx = erd
    empty = bench.create_model("empty", fx.metamodel)
    svg = bench.render_svg(empty)
    assert svg.startswith("<svg ")
    assert '<g class="canvas' in svg


def test_svg_erd_counts(erd):
    bench, fx = erd
    svg = bench.render_svg(fx.model)
    entity_groups = svg.count('class="element entity')
    edge_paths = svg.count('class="edge')
    assert entity_groups == 2
    assert edge_paths == 2


def test_svg_golden(erd):
    import pathlib

    bench, fx = erd
    svg = bench.render_svg(fx.model)
    golden = pathlib.Path(__file__).parent / "golden" / "erd.svg"
    assert svg == golden.read_text(encoding="utf-8")


def test_edge_endpoints_touch_borders(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    (p1, p2) = _nodes_of(tree, "edge")[0].points
    relation = bench.store.node(fx.relation)
    # start anchor sits on the relation's border
    on_vertical = abs(p1[0] - relation.x) < 1e-9 or abs(p1[0] - (relation.x + relation.width)) < 1e-9
    on_horizontal = abs(p1[1] - relation.y) < 1e-9 or abs(p1[1] - (relation.y + relation.height)) < 1e-9
    assert on_vertical or on_horizontal


# -- error badges ---------------------------------------------------------------


def test_bad_template_becomes_error_badge(erd):
    bench, fx = erd
    vp = v.make_viewpoint("broken", "broken", [
        v.make_view("bad", "bad", "data.kind == 'object'",
                    v.template(v.view_root("bad", v.text("${data.$missing.value}")))),
    ])
    tree = v.render(bench.store, fx.model, vp)
    errors = _nodes_of(tree, "error")
    assert errors, "expression failures must surface as badges"
    # the canvas is not blanked: every root object still shows up
    for oid in bench.store.root_objects(fx.model):
        _node_for(tree, oid)


# -- projectional editing ----------------------------------------------------------


def _input_affordance(tree, element_id, feature):
    for node in tree.walk():
        aff = node.affordance
        if aff and aff.get("kind") in ("input", "selector") \
                and aff.get("element") == element_id and aff.get("feature") == feature:
            return aff
    raise AssertionError(f"no edit affordance for {element_id}.{feature}")


def test_projectional_edit_round_trip(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    aff = _input_affordance(tree, fx.user, "name")
    bench.apply_projectional_edit(aff, "Customer")
    assert single_value(bench.store, fx.user, "name") == "Customer"
    tree2 = bench.render(fx.model)
    user = _node_for(tree2, fx.user)
    inputs = [n.text for n in user.walk() if n.kind == "input"]
    assert "Customer" in inputs


def test_selector_accepts_declared_literal(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    aff = _input_affordance(tree, fx.user_attrs["id"], "type")
    assert aff["options"] == ["string", "integer", "boolean", "date"]
    bench.apply_projectional_edit(aff, "date")
    assert single_value(bench.store, fx.user_attrs["id"], "type") == "date"


def test_selector_rejects_undeclared_literal(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    aff = _input_affordance(tree, fx.user_attrs["id"], "type")
    with pytest.raises(TypeMismatchError):
        bench.apply_projectional_edit(aff, "uuid")


def test_typed_input_rejects_garbage(expr):
    bench, fx = expr
    tree = bench.render(fx.model)
    e0 = fx.by_label["e0"]
    aff = _input_affordance(tree, e0, "val")
    with pytest.raises(TypeMismatchError):
        bench.apply_projectional_edit(aff, "many")
    bench.apply_projectional_edit(aff, "112")
    assert single_value(bench.store, e0, "val") == 112
    # the edit went through the store, so the cascade fired
    assert single_value(bench.store, fx.root, "val") == 784


def test_autosize_width_hint(erd):
    bench, fx = erd
    tree = bench.render(fx.model)
    user = _node_for(tree, fx.user)
    name_input = next(n for n in user.walk() if n.kind == "input" and n.text == "User")
    assert name_input.width == len("User") * v.AUTOSIZE_UNIT


# -- control parameters -------------------------------------------------------------


def test_toggle_control(erd):
    bench, fx = erd
    bench.set_control_parameter(fx.model, "grid", True)
    assert bench.store.node(fx.model).state["grid"] is True
    tree = bench.render(fx.model)
    assert "grid" in tree.className.split()


def test_slider_bounds(erd):
    bench, fx = erd
    bench.set_control_parameter(fx.model, "level", 0)
    assert bench.store.node(fx.model).state["level"] == 0
    with pytest.raises(BoundsError):
        bench.set_control_parameter(fx.model, "level", 7)
    with pytest.raises(NotFoundError):
        bench.set_control_parameter(fx.model, "zoom", 1)
