"""Navigation expression language: parser and evaluator.

One small expression language serves the console, view predicates, template
splices, and rule conditions/actions. It is read-only over the store;
mutation happens exclusively through rule action statements, which reuse the
same expression grammar on their right-hand sides.
"""

from .parser import parse, parse_template, parse_tokens
from .interp import (
    EvalContext,
    ElementHandle,
    NodeHandle,
    StateHandle,
    ViewHandle,
    evaluate,
    evaluate_predicate,
    evaluate_source,
    execute_query,
    format_value,
    js_number,
    to_display,
)
from .ast import to_source

__all__ = [
    "parse",
    "parse_template",
    "parse_tokens",
    "to_source",
    "EvalContext",
    "ElementHandle",
    "NodeHandle",
    "StateHandle",
    "ViewHandle",
    "evaluate",
    "evaluate_source",
    "evaluate_predicate",
    "execute_query",
    "format_value",
    "js_number",
    "to_display",
]
