"""Event-Condition-Action rule engine.

Rules live inside viewpoint records (optionally attached to a view, whose
selection predicate then gates the rule). Dispatch is breadth-first over a
queue of events: when a rule's action commits a transaction, the changed
objects are enqueued one level deeper, and holders of references to them
are notified as derived events so updates cascade along the dependency
structure. A configurable depth cap turns runaway cycles into a
cascade-divergence error instead of a hang.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import (
    CascadeDivergenceError,
    ExprSyntaxError,
    FixtureMismatchError,
    KernelError,
    NotFoundError,
    QueryError,
)
from .lang import (
    ElementHandle,
    EvalContext,
    NodeHandle,
    ViewHandle,
    evaluate,
    evaluate_predicate,
    js_number,
    parse,
)
from .lang.interp import is_dialect, _translate_dialect, _DIALECT_RE
from .lang import ast as lang_ast
from .lang.lexer import lex
from .lang.parser import parse_tokens
from .meta import DClass, DObject, DReference

TRIGGERS = (
    "onDataUpdate",
    "onDragStart",
    "whileDragging",
    "onDragEnd",
    "onResizeStart",
    "whileResizing",
    "onResizeEnd",
)

SEMANTICS_VIEWPOINT = "semantics"


@dataclass
class EventRecord:
    trigger: str
    subject: str
    payload: dict | None = None
    causeDepth: int = 0
    # derived events notify reference holders of a change without implying
    # that the subject itself changed
    derived: bool = False


@dataclass
class ActionStatement:
    # ("feature", name) | ("layout", field) | ("state", key)
    target: tuple
    rhs: object
    source: str


def parse_action(source: str) -> list:
    """Parse an action script: ``;``-separated assignment statements.

    Assignable places are ``data.$<feature>.value``, ``node.x|y|width|height``
    and ``node.state.<key>``; right-hand sides are ordinary expressions.
    """
    tokens = lex(source)
    statements, current = [], []
    for tok in tokens:
        if tok.kind in (";", "EOF"):
            if current:
                statements.append(current)
            current = []
        else:
            current.append(tok)
    out = []
    for stmt_tokens in statements:
        split = next((i for i, t in enumerate(stmt_tokens) if t.kind == "="), None)
        if split is None:
            raise ExprSyntaxError(
                "action statements must be assignments",
                stmt_tokens[0].line, stmt_tokens[0].col,
            )
        from .lang.lexer import Token

        eof = Token("EOF", None, stmt_tokens[-1].line, stmt_tokens[-1].col)
        lhs = parse_tokens(stmt_tokens[:split] + [eof], source)
        rhs = parse_tokens(stmt_tokens[split + 1:] + [eof], source)
        out.append(ActionStatement(_classify_target(lhs), rhs, source))
    if not out:
        raise ExprSyntaxError("empty action script", 1, 1)
    return out


def _classify_target(lhs) -> tuple:
    if (
        isinstance(lhs, lang_ast.Member)
        and lhs.name == "value"
        and isinstance(lhs.base, lang_ast.DynamicName)
        and (lhs.base.base is None
             or (isinstance(lhs.base.base, lang_ast.Name) and lhs.base.base.id == "data"))
    ):
        return ("feature", lhs.base.name)
    if isinstance(lhs, lang_ast.Member) and isinstance(lhs.base, lang_ast.Name) \
            and lhs.base.id == "node" and lhs.name in ("x", "y", "width", "height"):
        return ("layout", lhs.name)
    if (
        isinstance(lhs, lang_ast.Member)
        and isinstance(lhs.base, lang_ast.Member)
        and isinstance(lhs.base.base, lang_ast.Name)
        and lhs.base.base.id == "node"
        and lhs.base.name == "state"
    ):
        return ("state", lhs.name)
    raise ExprSyntaxError(
        "assignable places are data.$<feature>.value, node.x/y/width/height, "
        "and node.state.<key>",
        lhs.line, lhs.col,
    )


def check_rule_record(record: dict):
    """Parse-validate a rule record, raising on the first defect."""
    if record.get("trigger") not in TRIGGERS:
        raise KernelError(f"unknown trigger {record.get('trigger')!r}")
    condition = record.get("condition")
    if condition:
        m = _DIALECT_RE.match(condition)
        if m:
            _translate_dialect(m.group(2))
        else:
            parse(condition)
    parse_action(record["action"])


class RuleEngine:
    """Dispatches events against the rules stored in the project's viewpoints."""

    def __init__(self, store, depth_cap: int = 100):
        self.store = store
        self.depth_cap = depth_cap
        self.trace_sink = None  # callable(str), one line per fired rule
        self.event_sink = None  # callable(EventRecord), for tests and debugging
        self.errors: list = []  # (rule id, subject, message) rule-level failures

    # -- registration ---------------------------------------------------

    def register_rule(self, record: dict, viewpoint_id: str = SEMANTICS_VIEWPOINT) -> str:
        check_rule_record(record)
        record = dict(record)
        record.setdefault("owningView", None)
        vp = self._viewpoint_record(viewpoint_id)
        vp["rules"] = [r for r in vp.get("rules", []) if r["id"] != record["id"]]
        vp["rules"].append(record)
        self.store.put_viewpoint(vp)
        return record["id"]

    def _viewpoint_record(self, viewpoint_id: str) -> dict:
        for vp in self.store.viewpoints:
            if vp["id"] == viewpoint_id:
                return json_copy(vp)
        return {
            "id": viewpoint_id,
            "name": viewpoint_id,
            "isDefault": False,
            "views": [],
            "rules": [],
            "validationRules": [],
        }

    def active_rules(self) -> list:
        """(viewpoint, owning view or None, rule) in declaration order."""
        out = []
        for vp in self.store.viewpoints:
            views = {v["id"]: v for v in vp.get("views", [])}
            for rule in vp.get("rules", []):
                view = views.get(rule.get("owningView"))
                out.append((vp, view, rule))
        return out

    # -- dispatch ---------------------------------------------------------

    def dispatch(self, event: EventRecord) -> list:
        if not self.store.registry.contains(event.subject) \
                and event.subject not in self.store.nodes:
            raise NotFoundError(f"no element '{event.subject}'")
        return self._run(deque([event]))

    def cascade_after(self, tx) -> list:
        """Seed a cascade from the changes of an already-committed transaction."""
        if tx is None:
            return []
        queue = deque()
        self._enqueue_changes(queue, tx, 0)
        return self._run(queue)

    def _enqueue_changes(self, queue, tx, depth):
        touched = self.store.affected_objects(tx) + self.store.moved_elements(tx)
        seen = []
        for oid in touched:
            if oid not in seen:
                seen.append(oid)
        for oid in seen:
            queue.append(EventRecord("onDataUpdate", oid, None, depth))
        for oid in seen:
            for ref in self.store.registry.referrers(oid):
                if ref not in seen:
                    queue.append(EventRecord("onDataUpdate", ref, None, depth, derived=True))

    def _run(self, queue) -> list:
        committed = []
        fired = set()
        recent = deque(maxlen=8)
        while queue:
            ev = queue.popleft()
            if ev.causeDepth > self.depth_cap:
                cycle = sorted({s for s in recent})
                raise CascadeDivergenceError(
                    f"update cascade exceeded depth {self.depth_cap}; "
                    f"elements involved: {', '.join(cycle)}",
                    elements=cycle,
                )
            if self.event_sink:
                self.event_sink(ev)
            if not self.store.registry.contains(ev.subject):
                continue
            recent.append(ev.subject)
            for vp, view, rule in self.active_rules():
                if rule.get("trigger") != ev.trigger:
                    continue
                key = (rule["id"], ev.subject, ev.causeDepth)
                if key in fired:
                    continue
                fired.add(key)
                ctx = self.context_for(ev.subject, view, ev.payload)
                try:
                    if view is not None and not evaluate_predicate(view["applyTo"], ctx):
                        continue
                    condition = rule.get("condition")
                    if condition and not evaluate_predicate(condition, ctx):
                        continue
                except QueryError as err:
                    self.errors.append((rule["id"], ev.subject, str(err)))
                    continue
                try:
                    tx = self._execute_action(rule, ev.subject, ctx)
                except (QueryError, KernelError) as err:
                    self.errors.append((rule["id"], ev.subject, str(err)))
                    continue
                if tx is None:
                    continue
                committed.append(tx)
                self._trace(ev, rule, tx)
                self._enqueue_changes(queue, tx, ev.causeDepth + 1)
        return committed

    def context_for(self, subject: str, view: dict | None, payload=None) -> EvalContext:
        store = self.store
        model_id = store.registry.model_of(subject)
        locals_ = {"payload": payload} if payload is not None else {}
        return EvalContext(
            store=store,
            model_id=model_id,
            data=ElementHandle(store, subject),
            node=NodeHandle(store, subject) if subject in store.nodes else None,
            view=ViewHandle(view) if view is not None else None,
            locals=locals_,
        )

    def _execute_action(self, rule: dict, subject: str, ctx: EvalContext):
        statements = parse_action(rule["action"])

        def run():
            for stmt in statements:
                value = evaluate(stmt.rhs, ctx)
                kind, name = stmt.target
                if kind == "feature":
                    payload = _plain(value)
                    self.store.mutate_feature(subject, name, ("set", payload))
                elif kind == "layout":
                    info = self.store.node(subject)
                    coords = {
                        "x": info.x, "y": info.y,
                        "width": info.width, "height": info.height,
                    }
                    coords[name] = value
                    self.store.set_layout(
                        subject, coords["x"], coords["y"], coords["width"], coords["height"]
                    )
                else:
                    self.store.set_state(subject, name, _plain(value))

        return self.store.run_batch(run)

    def _trace(self, ev: EventRecord, rule: dict, tx):
        if self.trace_sink is None:
            return
        label = self._label(ev.subject)
        changes = describe_changes(self.store, tx)
        name = rule.get("name", rule["id"])
        self.trace_sink(f"{ev.causeDepth} {ev.trigger} {label} {name} {changes}")

    def _label(self, element_id: str) -> str:
        info = self.store.nodes.get(element_id)
        if info and isinstance(info.state.get("label"), str):
            return info.state["label"]
        el = self.store.registry.maybe(element_id)
        if isinstance(el, DObject):
            name = self.store.registry.object_name(element_id)
            if name:
                return name
        elif el is not None and hasattr(el, "name"):
            return el.name
        return element_id

    # -- gestures ---------------------------------------------------------

    def simulate_drag(self, element_id: str, path) -> list:
        """Drive a drag gesture: start, one move per path point, end.

        Layout changes go through the store per point, but their data-update
        cascade is deferred to the drop so snap-style rules observe only the
        final position.
        """
        info = self.store.node(element_id)
        txs = []
        start_payload = {
            "x": info.x, "y": info.y, "width": info.width, "height": info.height,
        }
        txs += self.dispatch(EventRecord("onDragStart", element_id, start_payload))
        last_move = None
        for (x, y) in path:
            tx = self.store.set_layout(element_id, x, y)
            if tx is not None and tx.ops:
                txs.append(tx)
                last_move = tx
            payload = {"x": x, "y": y, "width": info.width, "height": info.height}
            txs += self.dispatch(EventRecord("whileDragging", element_id, payload))
        end_info = self.store.node(element_id)
        end_payload = {
            "x": end_info.x, "y": end_info.y,
            "width": end_info.width, "height": end_info.height,
        }
        txs += self.dispatch(EventRecord("onDragEnd", element_id, end_payload))
        if last_move is not None:
            txs += self.cascade_after(last_move)
        return txs


def _plain(value):
    """Convert an evaluation result into storable feature values."""
    if isinstance(value, ElementHandle):
        return value.id
    if isinstance(value, list):
        return [_plain(v) for v in value]
    return value


def json_copy(value):
    import json

    return json.loads(json.dumps(value))


def describe_changes(store, tx) -> str:
    """Compact old→new summary of a transaction, for trace lines."""
    parts = []
    for op, inv in zip(tx.ops, tx.inverseOps):
        if op["op"] == "setValue":
            feat_name = "?"
            val = store.registry.maybe(op["id"])
            if val is not None:
                feat = store.registry.maybe(val.feature)
                if feat is not None:
                    feat_name = feat.name
            parts.append(f"{feat_name}:{_values_text(inv['values'])}→{_values_text(op['values'])}")
        elif op["op"] == "setLayout":
            for fieldname in ("x", "y", "width", "height"):
                if op[fieldname] != inv[fieldname]:
                    parts.append(
                        f"{fieldname}:{_num_text(inv[fieldname])}→{_num_text(op[fieldname])}"
                    )
        elif op["op"] == "setState":
            old = "∅" if inv.get("unset") else _scalar_text(inv.get("value"))
            new = "∅" if op.get("unset") else _scalar_text(op.get("value"))
            parts.append(f"{op['key']}:{old}→{new}")
    return ",".join(parts) if parts else "-"


def _values_text(values) -> str:
    if not values:
        return "∅"
    if len(values) == 1:
        return _scalar_text(values[0])
    return "[" + ",".join(_scalar_text(v) for v in values) + "]"


def _scalar_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return js_number(v)
    if v is None:
        return "null"
    return str(v)


def _num_text(v) -> str:
    return js_number(float(v))


# ----------------------------------------------------------------------
# built-in rule factories
# ----------------------------------------------------------------------


def grid_snap_rule() -> dict:
    """Round an element to the nearest 15-unit grid vertex after it moved.

    The rule listens on data updates, checks the canvas-level grid toggle,
    and rounds half-up so exact midpoints land on the higher vertex.
    """
    return {
        "id": "grid-snap",
        "name": "grid-snap",
        "trigger": "onDataUpdate",
        "condition": "canvas.state.grid ?? false",
        "action": "node.x = round(node.x / 15) * 15; node.y = round(node.y / 15) * 15",
        "owningView": None,
    }


_BIN_OPERAND_GUARD = (
    "data.$left.value != null && data.$right.value != null"
    " && data.$left.value.$val.value != null && data.$right.value.$val.value != null"
)


def _commutative_rule(class_name: str, op: str) -> dict:
    key = class_name.lower()
    return {
        "id": f"{key}-semantics",
        "name": f"{key}-semantics",
        "trigger": "onDataUpdate",
        "condition": f"data.instanceof.name == '{class_name}' && " + _BIN_OPERAND_GUARD,
        "action": (
            "data.$val.value = "
            f"data.$left.value.$val.value {op} data.$right.value.$val.value"
        ),
        "owningView": None,
    }


def _positional_rule(class_name: str, op: str) -> dict:
    """Spatially-left operand first; ties fall back to stored operand order."""
    key = class_name.lower()
    left = "data.$left.value.$val.value"
    right = "data.$right.value.$val.value"
    return {
        "id": f"{key}-semantics",
        "name": f"{key}-semantics",
        "trigger": "onDataUpdate",
        "condition": f"data.instanceof.name == '{class_name}' && " + _BIN_OPERAND_GUARD,
        "action": (
            "data.$val.value = "
            "data.$left.value.node.x <= data.$right.value.node.x"
            f" ? {left} {op} {right}"
            f" : {right} {op} {left}"
        ),
        "owningView": None,
    }


EXPRESSION_CLASSES = ("Expression", "BinExpression", "Number", "Add", "Sub", "Mult", "Div")


def builtin_expression_semantics(engine: RuleEngine, model_id: str) -> list:
    """Register the arithmetic rules for the expression-language fixture.

    Add and Mult are commutative; Sub and Div read the operand order off the
    node geometry, so the spatially-left operand is the minuend or dividend.
    """
    store = engine.store
    mm_id = store.metamodel_of(model_id)
    for class_name in EXPRESSION_CLASSES:
        try:
            cls = store.registry.named_child(mm_id, class_name)
        except KernelError as err:
            raise FixtureMismatchError(
                f"model does not conform to the expression metamodel: {err}"
            ) from err
        if not isinstance(cls, DClass):
            raise FixtureMismatchError(f"'{class_name}' is not a class")
    bin_cls = store.registry.named_child(mm_id, "BinExpression")
    for fname in ("left", "right"):
        feat = store.registry.find_feature(bin_cls.id, fname)
        if not isinstance(feat, DReference):
            raise FixtureMismatchError(f"BinExpression lacks the '{fname}' reference")
    if store.registry.find_feature(
        store.registry.named_child(mm_id, "Expression").id, "val"
    ) is None:
        raise FixtureMismatchError("Expression lacks the 'val' attribute")

    rules = [
        _commutative_rule("Add", "+"),
        _positional_rule("Sub", "-"),
        _commutative_rule("Mult", "*"),
        _positional_rule("Div", "/"),
    ]
    return [engine.register_rule(rule) for rule in rules]
