"""Evaluator for navigation expressions.

Evaluation is read-only with respect to the store. ``data`` plays the role
of the contextual self; ``node`` and ``view`` expose the layout and
concrete-syntax bindings of the same element; ``canvas`` is the layout
record of the enclosing model, which user-defined control parameters live
on. The bounded constraint dialect (``context <Class> inv: self...``) is
translated onto the core language token-by-token.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from ..errors import (
    AmbiguousNameError,
    ConformanceError,
    EvalTypeError,
    NavigationError,
    NotFoundError,
    NullAccessError,
    PredicateTypeError,
    QueryError,
)
from ..meta import (
    DAttribute,
    DClass,
    DEnum,
    DModel,
    DObject,
    DPackage,
    DReference,
    DValue,
)
from . import ast
from .lexer import Token, lex
from .parser import parse, parse_tokens

_KIND_NAMES = {
    DModel: "model",
    DPackage: "package",
    DClass: "class",
    DEnum: "enum",
    DAttribute: "attribute",
    DReference: "reference",
    DObject: "object",
    DValue: "value",
}


# ----------------------------------------------------------------------
# runtime values
# ----------------------------------------------------------------------


class ElementHandle:
    """Read-only view of a stored element inside expression evaluation."""

    __slots__ = ("store", "id")

    def __init__(self, store, element_id):
        self.store = store
        self.id = element_id

    @property
    def element(self):
        return self.store.resolve(self.id)

    @property
    def kind(self) -> str:
        return _KIND_NAMES[type(self.element)]

    def __eq__(self, other):
        return isinstance(other, ElementHandle) and other.id == self.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        return f"ElementHandle({self.id})"


class NodeHandle:
    __slots__ = ("store", "element_id")

    def __init__(self, store, element_id):
        self.store = store
        self.element_id = element_id

    @property
    def info(self):
        return self.store.node(self.element_id)

    def __eq__(self, other):
        return isinstance(other, NodeHandle) and other.element_id == self.element_id

    def __hash__(self):
        return hash(("node", self.element_id))


class StateHandle:
    __slots__ = ("store", "element_id")

    def __init__(self, store, element_id):
        self.store = store
        self.element_id = element_id

    def get(self, key):
        return self.store.node(self.element_id).state.get(key)


class ViewHandle:
    __slots__ = ("record",)

    def __init__(self, record: dict):
        self.record = record

    def __eq__(self, other):
        return isinstance(other, ViewHandle) and other.record.get("id") == self.record.get("id")

    def __hash__(self):
        return hash(("view", self.record.get("id")))


class RecordHandle:
    """Member access over a plain record (operation signatures and the like)."""

    __slots__ = ("record",)

    def __init__(self, record: dict):
        self.record = record


@dataclass
class Closure:
    param: str
    body: object
    ctx: "EvalContext"


class BoundListOp:
    __slots__ = ("items", "op")

    def __init__(self, items, op):
        self.items = items
        self.op = op


class Builtin:
    __slots__ = ("name", "fn", "arity")

    def __init__(self, name, fn, arity):
        self.name = name
        self.fn = fn
        self.arity = arity


def _half_up(x):
    return math.floor(x + 0.5)


BUILTINS = {
    "round": Builtin("round", lambda x: _half_up(_require_number(x, "round")), 1),
    "floor": Builtin("floor", lambda x: math.floor(_require_number(x, "floor")), 1),
    "ceil": Builtin("ceil", lambda x: math.ceil(_require_number(x, "ceil")), 1),
    "abs": Builtin("abs", lambda x: abs(_require_number(x, "abs")), 1),
    "min": Builtin("min", lambda a, b: min(_require_number(a, "min"), _require_number(b, "min")), 2),
    "max": Builtin("max", lambda a, b: max(_require_number(a, "max"), _require_number(b, "max")), 2),
}


def _require_number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalTypeError(f"{where}() expects a number, got {to_display(v)}")
    return v


@dataclass
class EvalContext:
    store: object
    model_id: str | None = None
    data: object = None
    node: object = None
    view: object = None
    locals: dict = field(default_factory=dict)

    def child(self, **bindings) -> "EvalContext":
        merged = dict(self.locals)
        merged.update(bindings)
        return replace(self, locals=merged)


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------


def js_truthy(v) -> bool:
    if v is None or v is False:
        return False
    if v is True:
        return True
    if isinstance(v, (int, float)):
        return v != 0
    if isinstance(v, str):
        return len(v) > 0
    return True


def js_number(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    raise EvalTypeError(f"not a number: {v!r}")


def to_display(v) -> str:
    """String conversion used by template splices (JS-style)."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return js_number(v)
    if isinstance(v, str):
        return v
    if isinstance(v, list):
        return ",".join(to_display(x) for x in v)
    if isinstance(v, ElementHandle):
        return _handle_display(v)
    if isinstance(v, NodeHandle):
        return f"<node {v.element_id}>"
    if isinstance(v, ViewHandle):
        return f"<view {v.record.get('name', '?')}>"
    return str(v)


def _handle_display(h: ElementHandle) -> str:
    el = h.element
    if isinstance(el, DObject):
        name = h.store.registry.object_name(el.id)
        cls = h.store.resolve(el.instanceOf).name
        return f"<{cls} {name if name is not None else el.id}>"
    if isinstance(el, DValue):
        return format_value(_value_contents(h.store, el), top=True)
    kind = type(el).__name__
    return f"<{kind} {el.name}>"


def format_value(v, top=True) -> str:
    """Console notation: bare top-level strings, spaced single-quoted lists."""
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return js_number(v)
    if isinstance(v, str):
        if top:
            return v
        escaped = v.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"
    if isinstance(v, list):
        if not v:
            return "[]"
        return "[ " + ", ".join(format_value(x, top=False) for x in v) + " ]"
    if isinstance(v, (ElementHandle, NodeHandle, ViewHandle)):
        return to_display(v)
    if isinstance(v, (Closure, BoundListOp, Builtin)):
        return "<function>"
    if isinstance(v, RecordHandle):
        return f"<operation {v.record.get('name', '?')}>"
    return str(v)


def _value_contents(store, val: DValue):
    feat = store.resolve(val.feature)
    if isinstance(feat, DReference):
        return [ElementHandle(store, t) for t in val.values]
    return list(val.values)


def _ast_path(node) -> str:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Member):
        return f"{_ast_path(node.base)}.{node.name}"
    if isinstance(node, ast.DynamicName):
        base = _ast_path(node.base) if node.base is not None else "data"
        return f"{base}.${node.name}"
    if isinstance(node, ast.Index):
        return f"{_ast_path(node.base)}[...]"
    if isinstance(node, ast.Call):
        return f"{_ast_path(node.callee)}(...)"
    return "<expr>"


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------


def evaluate_source(source: str, ctx: EvalContext):
    return evaluate(parse(source), ctx)


def evaluate(node, ctx: EvalContext):
    if isinstance(node, ast.Literal):
        return node.value
    if isinstance(node, ast.Name):
        return _lookup_name(node, ctx)
    if isinstance(node, ast.Template):
        out = []
        for part in node.parts:
            if isinstance(part, str):
                out.append(part)
            else:
                out.append(to_display(evaluate(part, ctx)))
        return "".join(out)
    if isinstance(node, ast.DynamicName):
        base = ctx.data if node.base is None else evaluate(node.base, ctx)
        return _named_child(base, node, ctx)
    if isinstance(node, ast.Member):
        base = evaluate(node.base, ctx)
        return _member(base, node, ctx)
    if isinstance(node, ast.Index):
        base = evaluate(node.base, ctx)
        index = evaluate(node.index, ctx)
        if base is None:
            raise NullAccessError("cannot index null", node.line, node.col, _ast_path(node))
        if not isinstance(base, list):
            raise EvalTypeError("only lists can be indexed", node.line, node.col)
        if isinstance(index, bool) or not isinstance(index, int):
            raise EvalTypeError("list index must be an integer", node.line, node.col)
        if 0 <= index < len(base):
            return base[index]
        return None
    if isinstance(node, ast.Call):
        return _call(node, ctx)
    if isinstance(node, ast.Lambda):
        return Closure(node.param, node.body, ctx)
    if isinstance(node, ast.Unary):
        v = evaluate(node.operand, ctx)
        if node.op == "-":
            return -_require_number(v, "unary '-'")
        return not js_truthy(v)
    if isinstance(node, ast.Binary):
        return _binary(node, ctx)
    if isinstance(node, ast.Ternary):
        return (
            evaluate(node.then, ctx)
            if js_truthy(evaluate(node.cond, ctx))
            else evaluate(node.other, ctx)
        )
    raise EvalTypeError(f"cannot evaluate {type(node).__name__}")


def _lookup_name(node, ctx):
    name = node.id
    if name in ctx.locals:
        return ctx.locals[name]
    if name == "data":
        return ctx.data
    if name == "node":
        return ctx.node
    if name == "view":
        return ctx.view
    if name == "model":
        return ElementHandle(ctx.store, ctx.model_id) if ctx.model_id else None
    if name == "canvas":
        if ctx.model_id and ctx.model_id in ctx.store.nodes:
            return NodeHandle(ctx.store, ctx.model_id)
        return None
    if name == "objects":
        if ctx.model_id is None:
            return []
        return [
            ElementHandle(ctx.store, oid)
            for oid in ctx.store.registry.objects_of_model(ctx.model_id)
        ]
    if name in BUILTINS:
        return BUILTINS[name]
    raise NavigationError(f"unknown name '{name}'", node.line, node.col, name)


def _named_child(base, node, ctx):
    if base is None:
        raise NullAccessError(
            f"cannot read '${node.name}' of null", node.line, node.col, _ast_path(node)
        )
    if not isinstance(base, ElementHandle):
        raise NavigationError(
            f"'${node.name}' only navigates model elements",
            node.line, node.col, _ast_path(node),
        )
    try:
        child = ctx.store.registry.named_child(base.id, node.name)
    except (NotFoundError, AmbiguousNameError) as err:
        raise NavigationError(str(err), node.line, node.col, _ast_path(node)) from err
    return ElementHandle(ctx.store, child.id)


def _member(base, node, ctx):
    name = node.name
    if base is None:
        raise NullAccessError(
            f"cannot read '{name}' of null", node.line, node.col, _ast_path(node)
        )
    if isinstance(base, list):
        if name in ("map", "filter", "size"):
            return BoundListOp(base, name)
        raise NavigationError(
            f"lists have no member '{name}'", node.line, node.col, _ast_path(node)
        )
    if isinstance(base, ElementHandle):
        return _element_member(base, name, node, ctx)
    if isinstance(base, NodeHandle):
        info = base.info
        if name in ("x", "y", "width", "height"):
            return getattr(info, name)
        if name == "state":
            return StateHandle(base.store, base.element_id)
        if name == "id":
            return base.element_id
        raise NavigationError(
            f"layout records have no member '{name}'", node.line, node.col, _ast_path(node)
        )
    if isinstance(base, StateHandle):
        return base.get(name)
    if isinstance(base, ViewHandle):
        rec = base.record
        if name in ("applyTo", "oclCondition"):
            return rec.get("applyTo")
        if name in ("id", "name"):
            return rec.get(name)
        raise NavigationError(
            f"views have no member '{name}'", node.line, node.col, _ast_path(node)
        )
    if isinstance(base, RecordHandle):
        if name in base.record:
            return base.record[name]
        raise NavigationError(
            f"no member '{name}'", node.line, node.col, _ast_path(node)
        )
    raise NavigationError(
        f"{to_display(base)!r} has no member '{name}'", node.line, node.col, _ast_path(node)
    )


def _element_member(handle: ElementHandle, name, node, ctx):
    store = handle.store
    el = handle.element

    def wrap(eid):
        return ElementHandle(store, eid)

    def err():
        kind = type(el).__name__
        return NavigationError(
            f"{kind} has no member '{name}'", node.line, node.col, _ast_path(node)
        )

    if name == "id":
        return el.id
    if name == "kind":
        return handle.kind
    if name == "node":
        return NodeHandle(store, el.id) if el.id in store.nodes else None

    if isinstance(el, DObject):
        if name in ("instanceof", "instanceOf"):
            return wrap(el.instanceOf)
        if name == "className":
            return store.resolve(el.instanceOf).name
        if name == "parent":
            return wrap(el.containerOf[0]) if el.containerOf else None
        if name == "name":
            feat = store.registry.find_feature(el.instanceOf, "name")
            if feat is None:
                raise err()
            return _single_value(store, store.resolve(el.features[feat.id]), node)
        raise err()

    if isinstance(el, DValue):
        feat = store.resolve(el.feature)
        if name == "value":
            return _single_value(store, el, node)
        if name == "values":
            return _value_contents(store, el)
        if name == "name":
            return feat.name
        if name == "owner":
            return wrap(el.owner)
        raise err()

    if isinstance(el, DClass):
        if name == "name":
            return el.name
        if name in ("attributes", "references"):
            attrs, refs = store.registry.features(el.id)
            return [wrap(x) for x in (attrs if name == "attributes" else refs)]
        if name == "extends":
            return [wrap(x) for x in el.extends]
        if name == "extendedBy":
            return [wrap(x) for x in store.registry.direct_subclasses(el.id)]
        if name == "instances":
            model = _instance_scope(store, ctx)
            if model is None:
                return []
            try:
                return [wrap(x) for x in store.registry.all_instances(el.id, model)]
            except ConformanceError:
                return []  # class from a different metamodel: nothing here
        if name == "operations":
            return [
                RecordHandle({"name": o.name, "params": o.params, "returns": o.returns})
                for o in el.operations
            ]
        if name in ("isAbstract", "isInterface", "isFinal", "isSingleton",
                    "isRootable", "isPrimitive"):
            return getattr(el, name)
        raise err()

    if isinstance(el, DModel):
        if name == "name":
            return el.name
        if name == "isMetamodel":
            return el.isMetamodel
        if name == "packages":
            return [wrap(x) for x in el.packages]
        if name in ("allInstances", "objects"):
            return [wrap(x) for x in store.registry.objects_of_model(el.id)]
        raise err()

    if isinstance(el, DPackage):
        if name == "name":
            return el.name
        if name == "classifiers":
            return [wrap(x) for x in el.classifiers]
        raise err()

    if isinstance(el, DEnum):
        if name == "name":
            return el.name
        if name == "literals":
            return list(el.literals)
        raise err()

    if isinstance(el, DAttribute):
        if name == "name":
            return el.name
        if name == "type":
            return wrap(el.type) if store.registry.contains(el.type) else el.type
        if name in ("lowerBound", "upperBound", "defaultValue"):
            return getattr(el, name)
        raise err()

    if isinstance(el, DReference):
        if name == "name":
            return el.name
        if name == "target":
            return wrap(el.target)
        if name in ("lowerBound", "upperBound", "isContainment"):
            return getattr(el, name)
        raise err()

    raise err()


def _instance_scope(store, ctx):
    if ctx.model_id is not None and not store.resolve(ctx.model_id).isMetamodel:
        return ctx.model_id
    return None


def _single_value(store, val: DValue, node):
    feat = store.resolve(val.feature)
    if feat.upperBound is None or feat.upperBound > 1:
        raise EvalTypeError(
            f"'value' reads single-valued features; '{feat.name}' is multi-valued "
            "(use 'values')",
            node.line, node.col,
        )
    if not val.values:
        return None
    v = val.values[0]
    if isinstance(feat, DReference):
        return ElementHandle(store, v)
    return v


def _call(node, ctx):
    callee = evaluate(node.callee, ctx)
    args = [evaluate(a, ctx) for a in node.args]
    if isinstance(callee, Closure):
        if len(args) != 1:
            raise EvalTypeError("lambdas take exactly one argument", node.line, node.col)
        return evaluate(callee.body, callee.ctx.child(**{callee.param: args[0]}))
    if isinstance(callee, BoundListOp):
        return _list_op(callee, args, node, ctx)
    if isinstance(callee, Builtin):
        if len(args) != callee.arity:
            raise EvalTypeError(
                f"{callee.name}() takes {callee.arity} argument(s)", node.line, node.col
            )
        return callee.fn(*args)
    raise EvalTypeError("value is not callable", node.line, node.col, _ast_path(node))


def _apply_fn(fn, arg, node, ctx):
    if isinstance(fn, Closure):
        return evaluate(fn.body, fn.ctx.child(**{fn.param: arg}))
    if isinstance(fn, Builtin) and fn.arity == 1:
        return fn.fn(arg)
    raise EvalTypeError("expected a function argument", node.line, node.col)


def _list_op(bound: BoundListOp, args, node, ctx):
    if bound.op == "size":
        if args:
            raise EvalTypeError("size() takes no arguments", node.line, node.col)
        return len(bound.items)
    if len(args) != 1:
        raise EvalTypeError(f"{bound.op}() takes one function argument", node.line, node.col)
    fn = args[0]
    if bound.op == "map":
        return [_apply_fn(fn, item, node, ctx) for item in bound.items]
    return [item for item in bound.items if js_truthy(_apply_fn(fn, item, node, ctx))]


def _binary(node, ctx):
    op = node.op
    if op == "??":
        try:
            left = evaluate(node.left, ctx)
        except (NavigationError, NullAccessError):
            left = None
        return left if left is not None else evaluate(node.right, ctx)
    if op == "&&":
        left = evaluate(node.left, ctx)
        return evaluate(node.right, ctx) if js_truthy(left) else left
    if op == "||":
        left = evaluate(node.left, ctx)
        return left if js_truthy(left) else evaluate(node.right, ctx)

    left = evaluate(node.left, ctx)
    right = evaluate(node.right, ctx)
    if op == "==":
        return _equal(left, right)
    if op == "!=":
        return not _equal(left, right)
    if op in ("<", "<=", ">", ">="):
        if isinstance(left, str) and isinstance(right, str):
            pass
        else:
            left = _require_number(left, f"'{op}'")
            right = _require_number(right, f"'{op}'")
        return {"<": left < right, "<=": left <= right,
                ">": left > right, ">=": left >= right}[op]
    if op == "+":
        if isinstance(left, str) and isinstance(right, str):
            return left + right
        return _require_number(left, "'+'") + _require_number(right, "'+'")
    if op == "-":
        return _require_number(left, "'-'") - _require_number(right, "'-'")
    if op == "*":
        return _require_number(left, "'*'") * _require_number(right, "'*'")
    if op == "/":
        left = _require_number(left, "'/'")
        right = _require_number(right, "'/'")
        if right == 0:
            raise EvalTypeError("division by zero", node.line, node.col)
        result = left / right
        # two exact integers dividing evenly still yield a real by the rules,
        # which Python's float division already provides
        return result
    raise EvalTypeError(f"unknown operator '{op}'", node.line, node.col)


def _equal(a, b):
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


# ----------------------------------------------------------------------
# predicates and queries
# ----------------------------------------------------------------------

_DIALECT_RE = re.compile(r"^\s*context\s+([A-Za-z_][A-Za-z0-9_]*)\s+inv\s*:\s*(.*)$", re.S)

_DIALECT_KINDS = {
    "DObject": DObject,
    "DClass": DClass,
    "DModel": DModel,
    "DValue": DValue,
    "DEnum": DEnum,
    "DAttribute": DAttribute,
    "DReference": DReference,
    "DPackage": DPackage,
}

_DIALECT_WORDS = {"and": "&&", "or": "||"}


def is_dialect(source: str) -> bool:
    return _DIALECT_RE.match(source) is not None


def _translate_dialect(inv_source: str):
    out = []
    for tok in lex(inv_source):
        if tok.kind == "IDENT" and tok.value == "self":
            out.append(Token("IDENT", "data", tok.line, tok.col))
        elif tok.kind == "IDENT" and tok.value in _DIALECT_WORDS:
            op = _DIALECT_WORDS[tok.value]
            out.append(Token(op, op, tok.line, tok.col))
        elif tok.kind == "IDENT" and tok.value == "not":
            out.append(Token("!", "!", tok.line, tok.col))
        elif tok.kind == "=":
            out.append(Token("==", "==", tok.line, tok.col))
        elif tok.kind == "<>":
            out.append(Token("!=", "!=", tok.line, tok.col))
        else:
            out.append(tok)
    return parse_tokens(out, inv_source)


def _context_applies(context_name: str, ctx: EvalContext) -> bool:
    subject = ctx.data
    if not isinstance(subject, ElementHandle):
        return False
    if context_name == "Any":
        return True
    if context_name in _DIALECT_KINDS:
        return isinstance(subject.element, _DIALECT_KINDS[context_name])
    if not isinstance(subject.element, DObject):
        return False
    store = ctx.store
    try:
        mm_id = store.metamodel_of(store.registry.model_of(subject.id))
        cls = store.registry.named_child(mm_id, context_name)
    except (NotFoundError, AmbiguousNameError):
        return False
    if not isinstance(cls, DClass):
        return False
    return store.registry.is_instance_of(subject.id, cls.id)


def evaluate_predicate(source: str, ctx: EvalContext) -> bool:
    m = _DIALECT_RE.match(source)
    if m:
        context_name, inv = m.group(1), m.group(2)
        if not _context_applies(context_name, ctx):
            return False
        result = evaluate(_translate_dialect(inv), ctx)
    else:
        result = evaluate(parse(source), ctx)
    if not isinstance(result, bool):
        raise PredicateTypeError(
            f"predicate produced {to_display(result)!r}, not a boolean"
        )
    return result


def execute_query(source: str, store, model_id: str):
    """Evaluate with ``data`` bound to every object of the model in turn.

    Boolean results filter (keep the object where true); other non-null
    results are collected.
    """
    expr = parse(source)
    out = []
    for oid in store.registry.objects_of_model(model_id):
        handle = ElementHandle(store, oid)
        ctx = EvalContext(
            store=store,
            model_id=model_id,
            data=handle,
            node=NodeHandle(store, oid) if oid in store.nodes else None,
        )
        try:
            v = evaluate(expr, ctx)
        except QueryError as e:
            raise type(e)(
                e.message, e.line, e.col,
                path=f"{e.path or ''} (object {oid})".strip(),
            ) from e
        if isinstance(v, bool):
            if v:
                out.append(handle)
        elif v is not None:
            out.append(v)
    return out
