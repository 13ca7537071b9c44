"""AST node types and the source printer."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Node:
    line: int = field(default=0, kw_only=True)
    col: int = field(default=0, kw_only=True)


@dataclass
class Literal(Node):
    value: object = None


@dataclass
class Name(Node):
    id: str = ""


@dataclass
class DynamicName(Node):
    """``$name`` lookup; ``base`` is None for the bare form (resolves on data)."""

    base: object = None
    name: str = ""


@dataclass
class Member(Node):
    base: object = None
    name: str = ""


@dataclass
class Index(Node):
    base: object = None
    index: object = None


@dataclass
class Call(Node):
    callee: object = None
    args: list = field(default_factory=list)


@dataclass
class Lambda(Node):
    param: str = ""
    body: object = None


@dataclass
class Unary(Node):
    op: str = ""
    operand: object = None


@dataclass
class Binary(Node):
    op: str = ""
    left: object = None
    right: object = None


@dataclass
class Ternary(Node):
    cond: object = None
    then: object = None
    other: object = None


@dataclass
class Template(Node):
    # interleaved str and expression nodes
    parts: list = field(default_factory=list)


# precedence of binary operators, loosest first
BINARY_LEVELS = [
    ("??",),
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/"),
]

_PRECEDENCE = {op: i for i, level in enumerate(BINARY_LEVELS) for op in level}
_TERNARY_PREC = -1
_LAMBDA_PREC = -2
_UNARY_PREC = len(BINARY_LEVELS)
_POSTFIX_PREC = _UNARY_PREC + 1


def _prec(node) -> int:
    if isinstance(node, Lambda):
        return _LAMBDA_PREC
    if isinstance(node, Ternary):
        return _TERNARY_PREC
    if isinstance(node, Binary):
        return _PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return _UNARY_PREC
    return _POSTFIX_PREC


def _escape(text: str, quote: str) -> str:
    return text.replace("\\", "\\\\").replace(quote, "\\" + quote)


def to_source(node) -> str:
    """Print a node back to parseable source."""

    def wrap(child, min_prec):
        src = to_source(child)
        return f"({src})" if _prec(child) < min_prec else src

    if isinstance(node, Literal):
        v = node.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return f"'{_escape(v, chr(39))}'"
        if isinstance(v, float) and v == int(v):
            return f"{int(v)}.0"
        return repr(v)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, DynamicName):
        if node.base is None:
            return f"${node.name}"
        return f"{wrap(node.base, _POSTFIX_PREC)}.${node.name}"
    if isinstance(node, Member):
        return f"{wrap(node.base, _POSTFIX_PREC)}.{node.name}"
    if isinstance(node, Index):
        return f"{wrap(node.base, _POSTFIX_PREC)}[{to_source(node.index)}]"
    if isinstance(node, Call):
        args = ", ".join(to_source(a) for a in node.args)
        return f"{wrap(node.callee, _POSTFIX_PREC)}({args})"
    if isinstance(node, Lambda):
        return f"{node.param} => {to_source(node.body)}"
    if isinstance(node, Unary):
        return f"{node.op}{wrap(node.operand, _UNARY_PREC)}"
    if isinstance(node, Binary):
        prec = _PRECEDENCE[node.op]
        left = wrap(node.left, prec)
        right = wrap(node.right, prec + 1)
        return f"{left} {node.op} {right}"
    if isinstance(node, Ternary):
        cond = wrap(node.cond, _TERNARY_PREC + 1)
        return f"{cond} ? {to_source(node.then)} : {to_source(node.other)}"
    if isinstance(node, Template):
        out = ["`"]
        for part in node.parts:
            if isinstance(part, str):
                out.append(part.replace("\\", "\\\\").replace("`", "\\`").replace("${", "\\${"))
            else:
                out.append("${" + to_source(part) + "}")
        out.append("`")
        return "".join(out)
    raise TypeError(f"not an AST node: {node!r}")
