"""Bundled example projects: an ERD editor and the expression language.

Both fixtures build their project through the workbench, so rule cascades
and validation run live while the model grows, exactly as they would under
interactive editing. All ids are deterministic, which keeps scripted
sessions and golden files stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import views as v
from .workbench import Workbench

ENTITY_PREDICATE = "context DObject inv: self.instanceof.name = 'Entity'"
ATTRIBUTE_PREDICATE = "context DObject inv: self.instanceof.name = 'Attribute'"
RELATION_PREDICATE = "context DObject inv: self.instanceof.name = 'Relation'"
CANVAS_PREDICATE = "data.kind == 'model'"

CANVAS_PARAMS = {
    "grid": "node.state.grid ?? false",
    "level": "node.state.level ?? 3",
}

PK_RULE_ID = "entity-primary-key"
PK_RULE_MESSAGE = "entity lacks a primary key attribute"


def _canvas_view() -> dict:
    return v.make_view(
        "canvas", "canvas", CANVAS_PREDICATE,
        v.template(
            v.view_root(
                "model ${grid && 'grid'}",
                v.control(
                    "Workbench", "Controls",
                    v.toggle("grid", "Grid"),
                    v.slider("level", 0, 3, "Zoom level"),
                ),
            ),
            params=CANVAS_PARAMS,
        ),
    )


@dataclass
class ErdFixture:
    metamodel: str
    model: str
    entity_class: str
    attribute_class: str
    relation_class: str
    owned_attributes: str
    is_pk_attribute: str
    user: str
    role: str
    relation: str
    user_attrs: dict = field(default_factory=dict)
    role_attrs: dict = field(default_factory=dict)
    viewpoint_id: str = "erd-syntax"


def build_erd(bench: Workbench) -> ErdFixture:
    store = bench.store
    mm = bench.create_metamodel("erd-mm")
    attr_type = bench.add_enum(mm, "AttributeType", ["string", "integer", "boolean", "date"])
    cardinality = bench.add_enum(
        mm, "Cardinality",
        ["one-to-one", "one-to-many", "many-to-one", "many-to-many"],
    )
    entity = bench.add_class(mm, "Entity")
    attribute = bench.add_class(mm, "Attribute", isRootable=False)
    relation = bench.add_class(mm, "Relation")
    bench.add_attribute(entity, "name", "string")
    owned = bench.add_reference(entity, "ownedAttributes", attribute,
                                upper=None, containment=True)
    bench.add_attribute(attribute, "name", "string")
    bench.add_attribute(attribute, "type", attr_type, default="string")
    is_pk = bench.add_attribute(attribute, "isPK", "boolean", default=False)
    bench.add_attribute(relation, "name", "string")
    bench.add_reference(relation, "left", entity, lower=1, upper=1)
    bench.add_reference(relation, "right", entity, lower=1, upper=1)
    bench.add_attribute(relation, "cardinality", cardinality)

    entity_view = v.make_view(
        "entity", "entity", ENTITY_PREDICATE,
        v.template(v.view_root(
            "entity",
            v.when("level == 0", v.box("overview", v.text("${data.name}"))),
            v.when("level == 1", v.box(
                "mid-detail",
                v.input_field("data.$name", "value", autosize=True),
            )),
            v.when("level >= 2", v.box(
                "full-detail",
                v.box("entity-header", v.input_field("data.$name", "value", autosize=True)),
                v.box("entity-body", v.repeat(
                    "data.$ownedAttributes.values", "attribute",
                    v.default_node("attribute"),
                )),
            )),
            v.decorators(),
        )),
        style={"fill": "#fdf6e3", "border": "#333333"},
        options={"childLayout": "list"},
    )
    attribute_view = v.make_view(
        "attribute", "attribute", ATTRIBUTE_PREDICATE,
        v.template(v.view_root(
            "attribute",
            v.box(
                "attribute-header",
                v.input_field("data", "name", autosize=True),
                v.text("${data.$isPK.value && '(PK)'}"),
                v.selector("data", "type"),
            ),
            v.decorators(),
        )),
    )
    relation_view = v.make_view(
        "relation", "relation", RELATION_PREDICATE,
        v.template(v.view_root(
            "relation",
            v.box("relation-inner", v.box(
                "relation-header",
                v.input_field("data.$name", "value", autosize=True),
            )),
            v.edge("association", "node", "data.$left.value.node"),
            v.edge("association", "node", "data.$right.value.node"),
            v.decorators(),
        )),
    )
    bench.put_viewpoint(v.make_viewpoint(
        "erd-syntax", "erd-syntax",
        [_canvas_view(), entity_view, attribute_view, relation_view],
        is_default=True,
    ))
    bench.register_validation_rule({
        "id": PK_RULE_ID,
        "appliesTo": ENTITY_PREDICATE,
        "check": (
            "data.$ownedAttributes.values"
            ".filter(a => (a.$isPK.value ?? false) == true).size() == 0"
            f" ? '{PK_RULE_MESSAGE}' : null"
        ),
        "severity": "error",
    })
    bench.enable_grid_snap()

    model = bench.create_model("erd", mm)
    user = bench.add_object(model, "Entity", {
        "name": "User",
        "ownedAttributes": [
            {"name": "id", "type": "integer", "isPK": True},
            {"name": "surname", "type": "string"},
            {"name": "firstname", "type": "string"},
        ],
    })
    role = bench.add_object(model, "Entity", {
        "name": "Role",
        "ownedAttributes": [
            {"name": "id", "type": "integer"},
            {"name": "name", "type": "string"},
            {"name": "description", "type": "string"},
        ],
    })
    has = bench.add_object(model, "Relation", {
        "name": "has", "left": user, "right": role, "cardinality": "one-to-many",
    })
    bench.set_layout(user, 495, 120, 160, 110)
    bench.set_layout(role, 150, 120, 160, 110)
    bench.set_layout(has, 330, 150, 90, 44)

    def attrs_of(entity_id):
        value = store.registry.named_child(entity_id, "ownedAttributes")
        return {store.registry.object_name(oid): oid for oid in value.values}

    return ErdFixture(
        metamodel=mm, model=model,
        entity_class=entity, attribute_class=attribute, relation_class=relation,
        owned_attributes=owned, is_pk_attribute=is_pk,
        user=user, role=role, relation=has,
        user_attrs=attrs_of(user), role_attrs=attrs_of(role),
    )


# layout per label; the mirrored variant reflects x around the canvas middle
_EXPR_LAYOUT = {
    "e6": (100, 120),
    "e0": (300, 280),
    "e2": (380, 280),
    "e1": (340, 200),
    "e5": (460, 200),
    "e3": (400, 120),
    "e4": (250, 40),
}


def _mirrored(layout: dict) -> dict:
    return {label: (560 - x, y) for label, (x, y) in layout.items()}


@dataclass
class ExprFixture:
    metamodel: str
    model: str
    by_label: dict
    root: str
    viewpoint_id: str = "expression-syntax"


def _binop_view(key: str, symbol: str) -> dict:
    return v.make_view(
        key, f"{key}-view",
        f"context DObject inv: self.instanceof.name = '{key.capitalize()}'",
        v.template(v.view_root(
            key,
            v.text(symbol),
            v.text("${data.$val.value}"),
            v.edge("operand", "node", "data.$left.value.node"),
            v.edge("operand", "node", "data.$right.value.node"),
        )),
        event_handlers={"onDataUpdate": f"{key}-semantics"},
    )


def build_expression(bench: Workbench, mirrored: bool = False) -> ExprFixture:
    mm = bench.create_metamodel("expr-mm")
    expression = bench.add_class(mm, "Expression", isAbstract=True)
    bench.add_attribute(expression, "val", "real")
    number = bench.add_class(mm, "Number", extends=[expression])
    bin_expr = bench.add_class(mm, "BinExpression", isAbstract=True, extends=[expression])
    bench.add_reference(bin_expr, "left", expression, lower=1, upper=1, containment=True)
    bench.add_reference(bin_expr, "right", expression, lower=1, upper=1, containment=True)
    for name in ("Add", "Sub", "Mult", "Div"):
        bench.add_class(mm, name, extends=[bin_expr])

    number_view = v.make_view(
        "number", "number-view",
        "context DObject inv: self.instanceof.name = 'Number'",
        v.template(v.view_root("number", v.input_field("data.$val", "value", autosize=True))),
    )
    bench.put_viewpoint(v.make_viewpoint(
        "expression-syntax", "expression-syntax",
        [
            _canvas_view(),
            number_view,
            _binop_view("add", "+"),
            _binop_view("sub", "-"),
            _binop_view("mult", "*"),
            _binop_view("div", "/"),
        ],
        is_default=True,
    ))
    bench.enable_grid_snap()

    model = bench.create_model("expr", mm)
    bench.enable_expression_semantics(model)

    layout = _mirrored(_EXPR_LAYOUT) if mirrored else _EXPR_LAYOUT
    by_label = {}

    def place(label, oid):
        by_label[label] = oid
        x, y = layout[label]
        bench.set_layout(oid, x, y)
        bench.set_state(oid, "label", label)

    place("e6", bench.add_object(model, "Number", {"val": 1000}))
    place("e0", bench.add_object(model, "Number", {"val": 212}))
    place("e2", bench.add_object(model, "Number", {"val": 2}))
    place("e1", bench.add_object(model, "Add",
                                 {"left": by_label["e0"], "right": by_label["e2"]}))
    place("e5", bench.add_object(model, "Number", {"val": 102}))
    place("e3", bench.add_object(model, "Add",
                                 {"left": by_label["e1"], "right": by_label["e5"]}))
    place("e4", bench.add_object(model, "Sub",
                                 {"left": by_label["e6"], "right": by_label["e3"]}))

    return ExprFixture(metamodel=mm, model=model, by_label=by_label, root=by_label["e4"])
