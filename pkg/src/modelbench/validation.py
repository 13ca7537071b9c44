"""Validation viewpoint: structural conformance plus user-defined rules.

Findings land in two places at once: returned as marker records and written
into each element's node state under a reserved key, so renderers can show
alert badges without consulting the validator. Marker writes are diffed,
which keeps repeated validation idempotent (no new transactions when
nothing changed).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import QueryError
from .lang import ElementHandle, EvalContext, NodeHandle, evaluate, evaluate_predicate, parse
from .meta import DAttribute, DObject, DReference

RESERVED_MARKER_KEY = "validation.errors"

VALIDATION_VIEWPOINT = "validation"

_CONFORMANCE = "conformance"


@dataclass(frozen=True)
class Marker:
    elementId: str
    severity: str  # "error" | "warning"
    message: str
    sourceRule: str

    def record(self) -> dict:
        return {
            "severity": self.severity,
            "message": self.message,
            "rule": self.sourceRule,
        }

    def sort_key(self):
        return (self.elementId, self.sourceRule, self.severity, self.message)


def check_validation_rule(record: dict):
    from .lang.interp import _DIALECT_RE, _translate_dialect

    m = _DIALECT_RE.match(record["appliesTo"])
    if m:
        _translate_dialect(m.group(2))
    else:
        parse(record["appliesTo"])
    parse(record["check"])


class Validator:
    """Runs structural checks and registered rules over instance models."""

    def __init__(self, store):
        self.store = store

    # -- rule registration ----------------------------------------------

    def register_rule(self, record: dict, viewpoint_id: str = VALIDATION_VIEWPOINT) -> str:
        check_validation_rule(record)
        record = dict(record)
        record.setdefault("severity", "error")
        vp = self._viewpoint_record(viewpoint_id)
        vp["validationRules"] = [
            r for r in vp.get("validationRules", []) if r["id"] != record["id"]
        ]
        vp["validationRules"].append(record)
        self.store.put_viewpoint(vp)
        return record["id"]

    def _viewpoint_record(self, viewpoint_id: str) -> dict:
        import json

        for vp in self.store.viewpoints:
            if vp["id"] == viewpoint_id:
                return json.loads(json.dumps(vp))
        return {
            "id": viewpoint_id,
            "name": viewpoint_id,
            "isDefault": False,
            "views": [],
            "rules": [],
            "validationRules": [],
        }

    def rules(self) -> list:
        out = []
        for vp in self.store.viewpoints:
            out.extend(vp.get("validationRules", []))
        return out

    # -- validation passes ------------------------------------------------

    def validate_model(self, model_id: str) -> list:
        """Structural checks plus registered rules; markers are persisted
        into node state (as one diff transaction) and returned."""
        markers = self._structural(model_id) + self._user_rules(model_id)
        markers.sort(key=Marker.sort_key)
        self._write_markers(model_id, markers)
        return markers

    def revalidate_all(self) -> list:
        out = []
        for mid in list(self.store.models):
            out.extend(self.validate_model(mid))
        return out

    def _structural(self, model_id: str) -> list:
        store = self.store
        markers = []
        for oid in store.registry.objects_of_model(model_id):
            obj = store.registry.elements[oid]
            cls = store.resolve(obj.instanceOf)
            if cls.isAbstract or cls.isInterface:
                markers.append(Marker(
                    oid, "error",
                    f"instance of abstract or interface class '{cls.name}'",
                    f"{_CONFORMANCE}.instantiation",
                ))
            for fid, vid in obj.features.items():
                feat = store.registry.maybe(fid)
                val = store.registry.maybe(vid)
                if feat is None or val is None:
                    continue
                n = len(val.values)
                if n < feat.lowerBound or (feat.upperBound is not None and n > feat.upperBound):
                    upper = "*" if feat.upperBound is None else feat.upperBound
                    markers.append(Marker(
                        oid, "error",
                        f"feature '{feat.name}' holds {n} value(s), "
                        f"multiplicity is {feat.lowerBound}..{upper}",
                        f"{_CONFORMANCE}.multiplicity",
                    ))
                markers.extend(self._typing(oid, feat, val))
        return markers

    def _typing(self, oid, feat, val) -> list:
        store = self.store
        out = []
        for item in val.values:
            if isinstance(feat, DReference):
                if not (isinstance(item, str) and store.registry.contains(item)):
                    out.append(Marker(
                        oid, "error",
                        f"reference '{feat.name}' holds a dangling target {item!r}",
                        f"{_CONFORMANCE}.typing",
                    ))
                elif not store.registry.is_instance_of(item, feat.target):
                    target = store.resolve(feat.target).name
                    out.append(Marker(
                        oid, "error",
                        f"reference '{feat.name}' target is not an instance of '{target}'",
                        f"{_CONFORMANCE}.typing",
                    ))
                continue
            kind = feat.type
            if kind == "integer":
                ok = isinstance(item, int) and not isinstance(item, bool)
            elif kind == "real":
                ok = isinstance(item, (int, float)) and not isinstance(item, bool)
            elif kind == "string":
                ok = isinstance(item, str)
            elif kind == "boolean":
                ok = isinstance(item, bool)
            else:
                enum = store.registry.maybe(kind)
                ok = enum is not None and isinstance(item, str) and item in enum.literals
            if not ok:
                out.append(Marker(
                    oid, "error",
                    f"value {item!r} does not conform to the '{_type_name(store, kind)}' "
                    f"type of '{feat.name}'",
                    f"{_CONFORMANCE}.typing",
                ))
        return out

    def _user_rules(self, model_id: str) -> list:
        store = self.store
        markers = []
        for rule in self.rules():
            severity = rule.get("severity", "error")
            for oid in store.registry.objects_of_model(model_id):
                ctx = EvalContext(
                    store=store,
                    model_id=model_id,
                    data=ElementHandle(store, oid),
                    node=NodeHandle(store, oid) if oid in store.nodes else None,
                )
                try:
                    if not evaluate_predicate(rule["appliesTo"], ctx):
                        continue
                    message = evaluate(parse(rule["check"]), ctx)
                except QueryError as err:
                    markers.append(Marker(oid, "warning", f"rule failed: {err}", rule["id"]))
                    continue
                if message is None:
                    continue
                if not isinstance(message, str):
                    markers.append(Marker(
                        oid, "warning",
                        "rule must produce a message text or null", rule["id"],
                    ))
                    continue
                markers.append(Marker(oid, severity, message, rule["id"]))
        return markers

    def _write_markers(self, model_id: str, markers: list):
        store = self.store
        by_element: dict = {}
        for m in markers:
            by_element.setdefault(m.elementId, []).append(m.record())

        def write():
            for oid in store.registry.objects_of_model(model_id):
                info = store.nodes.get(oid)
                if info is None:
                    continue
                desired = by_element.get(oid)
                current = info.state.get(RESERVED_MARKER_KEY)
                if desired == current:
                    continue
                store.set_state(oid, RESERVED_MARKER_KEY, desired)

        store.run_batch(write)


def _type_name(store, kind: str) -> str:
    el = store.registry.maybe(kind)
    return el.name if el is not None else kind
