"""Concrete-syntax engine: view resolution, render trees, SVG output.

Viewpoints are stored as plain records. A view pairs a selection predicate
with a declarative template tree; template nodes are data, never code, and
every dynamic slot holds an expression-language source string. Rendering is
a pure function of a store snapshot: expression failures become error
badges inside the tree instead of aborting the render.

Template node kinds: ``view`` (template root), ``box``, ``text``, ``if``,
``repeat``, ``defaultNode``, ``edge``, ``input``, ``selector``, ``toggle``,
``slider``, ``control``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    BoundsError,
    KernelError,
    NotFoundError,
    QueryError,
    TypeMismatchError,
)
from .lang import (
    ElementHandle,
    EvalContext,
    NodeHandle,
    ViewHandle,
    evaluate,
    evaluate_predicate,
    js_number,
    to_display,
    parse,
    parse_template,
)
from .meta import DAttribute, DEnum, DObject, DReference, DValue
from .validation import RESERVED_MARKER_KEY

# geometry of content laid out inside an element box
LINE_HEIGHT = 16.0
ROW_HEIGHT = 22.0
ROW_INSET = 6.0
HEADER_HEIGHT = 26.0
AUTOSIZE_UNIT = 8.0  # width hint per character for autosized inputs
GRID_SPACING = 15


# ----------------------------------------------------------------------
# template builders (used by fixtures and tests)
# ----------------------------------------------------------------------


def template(root: dict, params: dict | None = None) -> dict:
    return {"params": dict(params or {}), "root": root}


def view_root(class_name: str = "", *children) -> dict:
    return {"kind": "view", "className": class_name, "children": list(children)}


def box(class_name: str = "", *children) -> dict:
    return {"kind": "box", "className": class_name, "children": list(children)}


def text(source: str) -> dict:
    return {"kind": "text", "text": source}


def input_field(data: str, field_name: str, autosize: bool = False) -> dict:
    return {"kind": "input", "data": data, "field": field_name, "autosize": autosize}


def selector(data: str, field_name: str) -> dict:
    return {"kind": "selector", "data": data, "field": field_name}


def toggle(name: str, title: str | None = None) -> dict:
    return {"kind": "toggle", "name": name, "title": title or name}


def slider(name: str, minimum: int, maximum: int, title: str | None = None) -> dict:
    if not minimum < maximum:
        raise BoundsError("slider needs min < max")
    return {"kind": "slider", "name": name, "min": minimum, "max": maximum,
            "title": title or name}


def control(title: str, payoff: str = "", *children) -> dict:
    return {"kind": "control", "title": title, "payoff": payoff, "children": list(children)}


def default_node(data: str) -> dict:
    return {"kind": "defaultNode", "data": data}


def edge(view_name: str, start: str, end: str) -> dict:
    return {"kind": "edge", "view": view_name, "start": start, "end": end}


def when(guard: str, *children) -> dict:
    return {"kind": "if", "guard": guard, "children": list(children)}


def decorators() -> dict:
    """Opaque extension slot; reserved, renders nothing."""
    return {"kind": "decorators"}


def repeat(items: str, var: str, *children) -> dict:
    return {"kind": "repeat", "items": items, "var": var, "children": list(children)}


def make_view(view_id: str, name: str, apply_to: str, template_doc: dict,
              style: dict | None = None, event_handlers: dict | None = None,
              options: dict | None = None) -> dict:
    return {
        "id": view_id,
        "name": name,
        "applyTo": apply_to,
        "template": template_doc,
        "styleParams": dict(style or {}),
        "eventHandlers": dict(event_handlers or {}),
        "options": dict(options or {}),
    }


def make_viewpoint(vp_id: str, name: str, views: list, rules: list | None = None,
                   validation_rules: list | None = None, is_default: bool = False) -> dict:
    return {
        "id": vp_id,
        "name": name,
        "isDefault": is_default,
        "views": list(views),
        "rules": list(rules or []),
        "validationRules": list(validation_rules or []),
    }


def check_viewpoint_record(record: dict):
    """Parse-validate every expression a viewpoint record embeds."""
    for view in record.get("views", []):
        _check_predicate(view["applyTo"])
        doc = view.get("template") or {}
        for src in (doc.get("params") or {}).values():
            parse(src)
        _check_template_node(doc.get("root"))


def _check_predicate(source: str):
    from .lang.interp import _DIALECT_RE, _translate_dialect

    m = _DIALECT_RE.match(source)
    if m:
        _translate_dialect(m.group(2))
    else:
        parse(source)


def _check_template_node(rec):
    if rec is None:
        return
    kind = rec["kind"]
    if kind in ("view", "box"):
        parse_template(rec.get("className", ""))
    elif kind == "text":
        parse_template(rec.get("text", ""))
    elif kind == "if":
        parse(rec["guard"])
    elif kind == "repeat":
        parse(rec["items"])
    elif kind in ("input", "selector", "defaultNode"):
        parse(rec["data"])
    elif kind == "edge":
        parse(rec["start"])
        parse(rec["end"])
    elif kind == "slider":
        if not rec["min"] < rec["max"]:
            raise BoundsError(f"slider '{rec.get('name')}' needs min < max")
    for child in rec.get("children", ()):
        _check_template_node(child)


# ----------------------------------------------------------------------
# render tree
# ----------------------------------------------------------------------


@dataclass
class RenderNode:
    kind: str
    className: str = ""
    elementId: str | None = None
    text: str | None = None
    x: float | None = None
    y: float | None = None
    width: float | None = None
    height: float | None = None
    affordance: dict | None = None
    points: list | None = None
    children: list = field(default_factory=list)

    def to_record(self) -> dict:
        rec = {"kind": self.kind}
        for key in ("className", "elementId", "text", "x", "y", "width", "height",
                    "affordance", "points"):
            v = getattr(self, key)
            if v not in (None, ""):
                rec[key] = v
        if self.children:
            rec["children"] = [c.to_record() for c in self.children]
        return rec

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


def default_viewpoint(store) -> dict | None:
    for vp in store.viewpoints:
        if vp.get("isDefault"):
            return vp
    return store.viewpoints[0] if store.viewpoints else None


def resolve_view(store, element_id: str, viewpoint: dict | None,
                 canvas_params: dict | None = None) -> dict | None:
    """First view of the viewpoint whose predicate holds, or None for the
    built-in minimal default rendering."""
    if viewpoint is None:
        return None
    ctx = _element_ctx(store, element_id, canvas_params or {})
    for view in viewpoint.get("views", []):
        try:
            if evaluate_predicate(view["applyTo"], ctx):
                return view
        except QueryError as err:
            raise type(err)(
                f"view '{view.get('name', view['id'])}': {err.message}",
                err.line, err.col, err.path,
            ) from err
    return None


def _element_ctx(store, element_id, locals_=None, view=None) -> EvalContext:
    model_id = store.registry.model_of(element_id)
    return EvalContext(
        store=store,
        model_id=model_id,
        data=ElementHandle(store, element_id),
        node=NodeHandle(store, element_id) if element_id in store.nodes else None,
        view=ViewHandle(view) if view is not None else None,
        locals=dict(locals_ or {}),
    )


class _Renderer:
    def __init__(self, store, model_id, viewpoint):
        self.store = store
        self.model_id = model_id
        self.viewpoint = viewpoint
        self.rendered: set = set()
        # elements whose view owns its children's rendering (list layout)
        self.covering: set = set()
        self.canvas_params: dict = {}

    def render(self) -> RenderNode:
        store = self.store
        canvas = RenderNode(kind="canvas", elementId=self.model_id)
        canvas_view = self._safe_resolve(self.model_id, canvas)
        ctx = _element_ctx(store, self.model_id, view=canvas_view)
        if canvas_view is not None:
            doc = canvas_view.get("template") or {}
            self.canvas_params = self._eval_params(doc.get("params"), ctx, canvas)
            ctx = _element_ctx(store, self.model_id, self.canvas_params, view=canvas_view)
            root = doc.get("root") or {}
            canvas.className = self._template_text(root.get("className", ""), ctx, canvas)
            self._walk_children(root, ctx, canvas, None)
        for oid in store.root_objects(self.model_id):
            if oid not in self.rendered:
                canvas.children.append(self.render_element(oid))
        for oid in store.registry.objects_of_model(self.model_id):
            if oid not in self.rendered and not self._covered(oid):
                canvas.children.append(self.render_element(oid))
        return canvas

    def _covered(self, oid) -> bool:
        """List-layout containers own their children's rendering: a child
        whose nearest rendered ancestor covers (e.g. a zoom guard hid its
        row) stays hidden; graph-layout children become canvas vertices."""
        obj = self.store.registry.maybe(oid)
        while obj is not None and obj.containerOf is not None:
            parent = obj.containerOf[0]
            if parent in self.rendered:
                return parent in self.covering
            obj = self.store.registry.maybe(parent)
        return False

    def _safe_resolve(self, element_id, sink: RenderNode) -> dict | None:
        try:
            return resolve_view(self.store, element_id, self.viewpoint, self.canvas_params)
        except QueryError as err:
            sink.children.append(RenderNode(kind="error", text=str(err)))
            return None

    def _eval_params(self, params, ctx, sink) -> dict:
        out = {}
        for name, src in (params or {}).items():
            try:
                out[name] = evaluate(parse(src), ctx)
            except QueryError as err:
                out[name] = None
                sink.children.append(RenderNode(kind="error", text=f"param {name}: {err}"))
        return out

    def render_element(self, element_id: str, list_slot: tuple | None = None) -> RenderNode:
        store = self.store
        self.rendered.add(element_id)
        out = RenderNode(kind="node", elementId=element_id)
        info = store.nodes.get(element_id)
        if list_slot is not None:
            out.x, out.y, out.width, out.height = list_slot
        elif info is not None:
            out.x, out.y, out.width, out.height = info.x, info.y, info.width, info.height
            out.affordance = {"kind": "move", "element": element_id}
        view = self._safe_resolve(element_id, out)
        if view is None:
            self._minimal_default(element_id, out)
        else:
            doc = view.get("template") or {}
            params = dict(self.canvas_params)
            own_ctx = _element_ctx(store, element_id, params, view=view)
            params.update(self._eval_params(doc.get("params"), own_ctx, out))
            ctx = _element_ctx(store, element_id, params, view=view)
            root = doc.get("root") or {}
            out.className = self._template_text(root.get("className", ""), ctx, out)
            layout = (view.get("options") or {}).get("childLayout", "graph")
            if layout == "list":
                self.covering.add(element_id)
            self._walk_children(root, ctx, out, _ListSlots(out) if layout == "list" else None)
        self._append_markers(element_id, out)
        return out

    def _minimal_default(self, element_id, out: RenderNode):
        store = self.store
        el = store.registry.maybe(element_id)
        out.className = "default"
        label = element_id
        if isinstance(el, DObject):
            name = store.registry.object_name(element_id)
            cls = store.resolve(el.instanceOf).name
            label = f"{name} : {cls}" if name else f"{element_id} : {cls}"
        elif el is not None and getattr(el, "name", None):
            label = f"{el.name} : {type(el).__name__}"
        out.children.append(RenderNode(kind="text", text=label))

    def _append_markers(self, element_id, out: RenderNode):
        info = self.store.nodes.get(element_id)
        if not info:
            return
        for marker in info.state.get(RESERVED_MARKER_KEY) or []:
            out.children.append(
                RenderNode(
                    kind="marker",
                    className=marker.get("severity", "error"),
                    text=marker.get("message", ""),
                )
            )

    # -- template walking ---------------------------------------------

    def _walk_children(self, rec, ctx, out: RenderNode, slots):
        for child in rec.get("children", ()):
            self._walk(child, ctx, out, slots)

    def _walk(self, rec, ctx, out: RenderNode, slots):
        try:
            self._walk_inner(rec, ctx, out, slots)
        except QueryError as err:
            out.children.append(RenderNode(kind="error", text=str(err)))

    def _walk_inner(self, rec, ctx, out: RenderNode, slots):
        kind = rec["kind"]
        if kind == "box":
            node = RenderNode(kind="box", className=self._template_text(
                rec.get("className", ""), ctx, out))
            out.children.append(node)
            self._walk_children(rec, ctx, node, slots)
        elif kind == "text":
            node = RenderNode(kind="text", text=self._projected_text(rec.get("text", ""), ctx))
            out.children.append(node)
        elif kind == "if":
            from .lang.interp import js_truthy

            if js_truthy(evaluate(parse(rec["guard"]), ctx)):
                self._walk_children(rec, ctx, out, slots)
        elif kind == "repeat":
            items = evaluate(parse(rec["items"]), ctx)
            if items is None:
                return
            if not isinstance(items, list):
                raise TypeMismatchError("repeat expects a list")
            for item in items:
                self._walk_children(rec, ctx.child(**{rec["var"]: item}), out, slots)
        elif kind == "defaultNode":
            target = evaluate(parse(rec["data"]), ctx)
            if target is None:
                return
            if not isinstance(target, ElementHandle):
                raise TypeMismatchError("defaultNode expects a model element")
            slot = slots.next() if slots is not None else None
            out.children.append(self.render_element(target.id, slot))
        elif kind == "input":
            out.children.append(self._input_node(rec, ctx))
        elif kind == "selector":
            out.children.append(self._selector_node(rec, ctx))
        elif kind == "toggle":
            scope = ctx.node.element_id if ctx.node else None
            current = bool(ctx.node and ctx.node.info.state.get(rec["name"], False))
            out.children.append(RenderNode(
                kind="toggle", text=rec.get("title", rec["name"]),
                affordance={"kind": "toggle", "name": rec["name"], "scope": scope,
                            "value": current},
            ))
        elif kind == "slider":
            scope = ctx.node.element_id if ctx.node else None
            current = ctx.node.info.state.get(rec["name"]) if ctx.node else None
            out.children.append(RenderNode(
                kind="slider", text=rec.get("title", rec["name"]),
                affordance={"kind": "slider", "name": rec["name"], "scope": scope,
                            "min": rec["min"], "max": rec["max"], "value": current},
            ))
        elif kind == "control":
            node = RenderNode(kind="control", className="control",
                              text=f"{rec.get('title', '')} {rec.get('payoff', '')}".strip())
            out.children.append(node)
            self._walk_children(rec, ctx, node, slots)
        elif kind == "decorators":
            pass  # reserved extension slot
        elif kind == "edge":
            out.children.append(self._edge_node(rec, ctx))
        elif kind == "view":
            self._walk_children(rec, ctx, out, slots)
        else:
            raise KernelError(f"unknown template node kind '{kind}'")

    def _input_node(self, rec, ctx) -> RenderNode:
        store = self.store
        value_el = self._edit_target(rec, ctx)
        feat = store.resolve(value_el.feature)
        current = value_el.values[0] if value_el.values else None
        display = "" if current is None else to_display(current)
        node = RenderNode(kind="input", text=display)
        if rec.get("autosize"):
            node.width = max(len(display), 4) * AUTOSIZE_UNIT
        node.affordance = {
            "kind": "input",
            "valueId": value_el.id,
            "element": value_el.owner,
            "feature": feat.name,
            "attrType": self._attr_type(feat),
        }
        return node

    def _selector_node(self, rec, ctx) -> RenderNode:
        store = self.store
        value_el = self._edit_target(rec, ctx)
        feat = store.resolve(value_el.feature)
        if not isinstance(feat, DAttribute) or not store.registry.contains(feat.type):
            raise TypeMismatchError(
                f"selector needs an enum-typed attribute, '{feat.name}' is not"
            )
        literals = store.resolve(feat.type).literals
        current = value_el.values[0] if value_el.values else None
        node = RenderNode(kind="selector", text="" if current is None else str(current))
        node.affordance = {
            "kind": "selector",
            "valueId": value_el.id,
            "element": value_el.owner,
            "feature": feat.name,
            "options": list(literals),
        }
        return node

    def _edit_target(self, rec, ctx) -> DValue:
        target = evaluate(parse(rec["data"]), ctx)
        if not isinstance(target, ElementHandle):
            raise TypeMismatchError("input/selector must be bound to a model element")
        el = target.element
        if isinstance(el, DValue):
            if rec.get("field", "value") != "value":
                raise TypeMismatchError("a bound value record edits its 'value'")
            return el
        if isinstance(el, DObject):
            child = self.store.registry.named_child(el.id, rec["field"])
            return child
        raise TypeMismatchError("input/selector binds objects or value records")

    def _attr_type(self, feat) -> str:
        if isinstance(feat, DReference):
            return "reference"
        if self.store.registry.contains(feat.type):
            return f"enum:{self.store.resolve(feat.type).name}"
        return feat.type

    def _edge_node(self, rec, ctx) -> RenderNode:
        start = evaluate(parse(rec["start"]), ctx)
        end = evaluate(parse(rec["end"]), ctx)
        if not isinstance(start, NodeHandle) or not isinstance(end, NodeHandle):
            raise TypeMismatchError("edge endpoints must be layout records")
        p1, p2 = _edge_anchors(start.info, end.info)
        return RenderNode(
            kind="edge",
            className=rec.get("view", ""),
            points=[list(p1), list(p2)],
        )

    def _template_text(self, source, ctx, sink) -> str:
        try:
            return evaluate(parse_template(source), ctx)
        except QueryError as err:
            sink.children.append(RenderNode(kind="error", text=str(err)))
            return ""

    def _projected_text(self, source, ctx) -> str:
        """Text run: splices drop null/boolean results, as projected children."""
        node = parse_template(source)
        out = []
        for part in node.parts:
            if isinstance(part, str):
                out.append(part)
            else:
                v = evaluate(part, ctx)
                if v is None or isinstance(v, bool):
                    continue
                out.append(to_display(v))
        return "".join(out)


class _ListSlots:
    def __init__(self, parent: RenderNode):
        self.parent = parent
        self.index = 0

    def next(self):
        x = (self.parent.x or 0.0) + ROW_INSET
        y = (self.parent.y or 0.0) + HEADER_HEIGHT + self.index * ROW_HEIGHT
        w = max((self.parent.width or 0.0) - 2 * ROW_INSET, 10.0)
        self.index += 1
        return (x, y, w, ROW_HEIGHT - 2.0)


def _edge_anchors(a, b):
    """Straight-line anchor points on the borders of two layout rects."""
    ax, ay = a.x + a.width / 2, a.y + a.height / 2
    bx, by = b.x + b.width / 2, b.y + b.height / 2
    return (_border_toward(a, bx, by), _border_toward(b, ax, ay))


def _border_toward(rect, tx, ty):
    cx, cy = rect.x + rect.width / 2, rect.y + rect.height / 2
    dx, dy = tx - cx, ty - cy
    if dx == 0 and dy == 0:
        return (cx, cy)
    candidates = []
    if dx != 0:
        candidates.append(abs((rect.width / 2) / dx))
    if dy != 0:
        candidates.append(abs((rect.height / 2) / dy))
    t = min(candidates)
    return (cx + dx * t, cy + dy * t)


def render(store, model_id: str, viewpoint: dict | None = None) -> RenderNode:
    """Produce the deterministic render tree of a model under a viewpoint."""
    vp = viewpoint if viewpoint is not None else default_viewpoint(store)
    return _Renderer(store, model_id, vp).render()


# ----------------------------------------------------------------------
# SVG output
# ----------------------------------------------------------------------


def _fmt(v) -> str:
    return js_number(float(v))


def render_svg(tree: RenderNode) -> str:
    """Standalone vector document; byte-identical for identical trees."""
    min_x, min_y, max_x, max_y = 0.0, 0.0, 400.0, 300.0
    for node in tree.walk():
        if node.kind in ("node", "canvas") and node.x is not None:
            min_x = min(min_x, node.x)
            min_y = min(min_y, node.y)
            max_x = max(max_x, node.x + (node.width or 0))
            max_y = max(max_y, node.y + (node.height or 0))
        if node.points:
            for (px, py) in node.points:
                min_x, min_y = min(min_x, px), min(min_y, py)
                max_x, max_y = max(max_x, px), max(max_y, py)
    width, height = max_x - min_x + 40, max_y - min_y + 40
    grid_on = "grid" in (tree.className or "").split()
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="{_fmt(min_x - 20)} {_fmt(min_y - 20)} '
        f'{_fmt(width)} {_fmt(height)}">'
    ]
    if grid_on:
        out.append(
            f'<defs><pattern id="grid-dots" width="{GRID_SPACING}" '
            f'height="{GRID_SPACING}" patternUnits="userSpaceOnUse">'
            '<circle cx="1" cy="1" r="1" fill="silver"/></pattern></defs>'
        )
        out.append(
            f'<rect x="{_fmt(min_x - 20)}" y="{_fmt(min_y - 20)}" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" fill="url(#grid-dots)"/>'
        )
    out.append(f'<g class="canvas {_escape_attr(tree.className)}">')
    for child in tree.children:
        _svg_node(child, out, None)
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape_attr(s: str) -> str:
    return (s or "").replace("&", "&amp;").replace('"', "&quot;").replace("<", "&lt;")


def _escape_text(s: str) -> str:
    return (s or "").replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg_node(node: RenderNode, out: list, origin):
    if node.kind == "edge":
        (x1, y1), (x2, y2) = node.points
        out.append(
            f'<path class="edge {_escape_attr(node.className)}" '
            f'd="M {_fmt(x1)} {_fmt(y1)} L {_fmt(x2)} {_fmt(y2)}" '
            'stroke="black" fill="none"/>'
        )
        return
    if node.kind == "node":
        x, y = node.x or 0.0, node.y or 0.0
        w, h = node.width or 0.0, node.height or 0.0
        out.append(f'<g class="element {_escape_attr(node.className)}" data-element="{node.elementId}">')
        out.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            'fill="white" stroke="black"/>'
        )
        cursor = [y + LINE_HEIGHT]
        for child in node.children:
            _svg_content(child, out, x + ROW_INSET, cursor, node)
        out.append("</g>")
        return
    # canvas-level non-node content (controls, errors)
    cursor = [LINE_HEIGHT]
    _svg_content(node, out, 4.0, cursor, None)


def _svg_content(node: RenderNode, out: list, x: float, cursor: list, parent):
    if node.kind == "node":
        _svg_node(node, out, None)
        return
    if node.kind == "edge":
        _svg_node(node, out, None)
        return
    if node.kind == "marker":
        if parent is not None and parent.x is not None:
            mx = parent.x + (parent.width or 0)
            my = parent.y or 0
        else:
            mx, my = x, cursor[0]
        out.append(
            f'<g class="marker {_escape_attr(node.className)}">'
            f'<circle cx="{_fmt(mx)}" cy="{_fmt(my)}" r="7" fill="gold" stroke="black"/>'
            f'<title>{_escape_text(node.text)}</title></g>'
        )
        return
    if node.kind in ("text", "input", "selector", "toggle", "slider", "error"):
        label = node.text or ""
        cls = node.kind if node.kind != "text" else "text"
        out.append(
            f'<text class="{cls}" x="{_fmt(x)}" y="{_fmt(cursor[0])}">'
            f"{_escape_text(label)}</text>"
        )
        cursor[0] += LINE_HEIGHT
        for child in node.children:
            _svg_content(child, out, x + 4.0, cursor, parent)
        return
    # box, control, and anything structural: recurse
    for child in node.children:
        _svg_content(child, out, x + 4.0, cursor, parent)


# ----------------------------------------------------------------------
# projectional write-back
# ----------------------------------------------------------------------


def apply_projectional_edit(store, affordance: dict, new_value):
    """Write an edited input/selector value back into its value record."""
    if not isinstance(affordance, dict) or affordance.get("kind") not in ("input", "selector"):
        raise TypeMismatchError("only input and selector affordances accept edits")
    value_el = store.resolve(affordance["valueId"])
    if not isinstance(value_el, DValue):
        raise NotFoundError("stale affordance: value record is gone")
    feat = store.resolve(value_el.feature)
    owner = value_el.owner
    if affordance["kind"] == "selector":
        literals = store.resolve(feat.type).literals
        if new_value not in literals:
            raise TypeMismatchError(
                f"'{new_value}' is not a declared literal of '{store.resolve(feat.type).name}'"
            )
        return store.mutate_feature(owner, feat.name, ("set", new_value))
    parsed = _parse_literal(store, feat, new_value)
    return store.mutate_feature(owner, feat.name, ("set", parsed))


def _parse_literal(store, feat, raw):
    if isinstance(feat, DReference):
        raise TypeMismatchError("inputs edit attribute values, not references")
    kind = feat.type
    if store.registry.contains(kind):
        literals = store.resolve(kind).literals
        if raw not in literals:
            raise TypeMismatchError(f"'{raw}' is not a declared enum literal")
        return raw
    if kind == "string":
        return str(raw)
    if kind == "boolean":
        if isinstance(raw, bool):
            return raw
        if raw in ("true", "false"):
            return raw == "true"
        raise TypeMismatchError(f"'{raw}' is not a boolean")
    if kind == "integer":
        if isinstance(raw, bool):
            raise TypeMismatchError("expected an integer")
        if isinstance(raw, int):
            return raw
        try:
            return int(str(raw), 10)
        except ValueError as err:
            raise TypeMismatchError(f"'{raw}' is not an integer") from err
    if kind == "real":
        if isinstance(raw, bool):
            raise TypeMismatchError("expected a number")
        if isinstance(raw, (int, float)):
            return raw
        try:
            text = str(raw)
            return int(text, 10) if re.fullmatch(r"-?\d+", text) else float(text)
        except ValueError as err:
            raise TypeMismatchError(f"'{raw}' is not a number") from err
    raise TypeMismatchError(f"unknown attribute type '{kind}'")


def find_control(viewpoint: dict, name: str) -> dict | None:
    """Locate a toggle/slider declaration by name anywhere in the viewpoint."""

    def scan(rec):
        if rec.get("kind") in ("toggle", "slider") and rec.get("name") == name:
            return rec
        for child in rec.get("children", ()):
            found = scan(child)
            if found:
                return found
        return None

    for view in viewpoint.get("views", []):
        root = (view.get("template") or {}).get("root")
        if root:
            found = scan(root)
            if found:
                return found
    return None


def set_control_parameter(store, viewpoint: dict, scope_element_id: str,
                          name: str, value):
    """Flip a toggle or move a slider: writes the scope's node state."""
    decl = find_control(viewpoint, name)
    if decl is None:
        raise NotFoundError(f"no toggle or slider named '{name}' in the viewpoint")
    if decl["kind"] == "toggle":
        return store.set_state(scope_element_id, name, bool(value))
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeMismatchError(f"slider '{name}' takes an integer")
    if not decl["min"] <= value <= decl["max"]:
        raise BoundsError(
            f"slider '{name}' accepts {decl['min']}..{decl['max']}, got {value}"
        )
    return store.set_state(scope_element_id, name, value)
