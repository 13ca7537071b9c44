"""Tri-submodel project store with transactional mutation.

State is partitioned the way the workbench thinks about it: ``data`` (schema
and instance elements), ``node`` (layout plus an open per-element state map),
and ``view`` (concrete-syntax records). Every mutation flows through a
transaction of primitive ops with recorded inverses, which buys deterministic
replay, exact undo/redo, and an op log that doubles as the collaboration
wire format.

Primitive op vocabulary: ``create``, ``delete``, ``setValue``, ``setMeta``,
``setLayout``, ``setState``, ``putNode``, ``dropNode``, ``putViewpoint``,
``dropViewpoint``. Ops are plain dicts so they serialize as-is.
"""

from __future__ import annotations

import json
import re
from contextlib import contextmanager
from dataclasses import dataclass, field

from . import meta
from .errors import (
    BoundsError,
    ConformanceError,
    EditRejectedError,
    KernelError,
    NameClashError,
    NotFoundError,
    NotInstantiableError,
    TypeMismatchError,
)
from .meta import (
    DAttribute,
    DClass,
    DEnum,
    DModel,
    DObject,
    DOperation,
    DPackage,
    DReference,
    DValue,
    ElementRegistry,
    element_from_record,
    element_record,
)

DEFAULT_NODE_EXTENT = (120.0, 60.0)

_NOOP = object()


@dataclass
class NodeInfo:
    """Per-element layout record plus an open key/value state map."""

    elementId: str
    x: float = 0.0
    y: float = 0.0
    width: float = DEFAULT_NODE_EXTENT[0]
    height: float = DEFAULT_NODE_EXTENT[1]
    state: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "elementId": self.elementId,
            "x": self.x,
            "y": self.y,
            "width": self.width,
            "height": self.height,
            "state": _copy_json(self.state),
        }

    @staticmethod
    def from_record(rec: dict) -> "NodeInfo":
        return NodeInfo(
            rec["elementId"],
            rec["x"],
            rec["y"],
            rec["width"],
            rec["height"],
            _copy_json(rec.get("state", {})),
        )


@dataclass
class Transaction:
    id: str
    author: str
    group: str
    ops: list = field(default_factory=list)
    inverseOps: list = field(default_factory=list)

    def record(self) -> dict:
        return {
            "id": self.id,
            "author": self.author,
            "group": self.group,
            "ops": _copy_json(self.ops),
            "inverseOps": _copy_json(self.inverseOps),
        }

    @staticmethod
    def from_record(rec: dict) -> "Transaction":
        return Transaction(
            rec["id"],
            rec["author"],
            rec.get("group", rec["id"]),
            _copy_json(rec["ops"]),
            _copy_json(rec.get("inverseOps", [])),
        )


def _copy_json(value):
    return json.loads(json.dumps(value))


class _TxBuilder:
    """Applies primitive ops immediately while recording them and their inverses."""

    def __init__(self, store: "ProjectStore"):
        self.store = store
        self.ops: list = []
        self.inverses: list = []

    def apply(self, op: dict):
        inv = self.store._apply_op(op)
        if inv is _NOOP:
            return
        self.ops.append(op)
        self.inverses.append(inv)

    def rollback(self):
        for inv in reversed(self.inverses):
            self.store._apply_op(inv)
        self.ops.clear()
        self.inverses.clear()

    @property
    def empty(self) -> bool:
        return not self.ops


class ProjectStore:
    """Single-writer store over one project.

    Readers may hold on to ids and query freely; all writes are serialized
    through the transaction machinery here. ``session`` names the author of
    locally committed transactions and ``id_prefix`` namespaces generated
    element and transaction ids so independent writers never collide.
    """

    def __init__(self, session: str = "local", id_prefix: str = ""):
        self.session = session
        self.id_prefix = id_prefix
        self.registry = ElementRegistry()
        self.metamodels: list = []
        self.models: list = []
        self.nodes: dict = {}
        self.viewpoints: list = []
        self.change_log: list = []
        self.undo_stack: list = []
        self.redo_stack: list = []
        self._id_counter = 0
        self._tx_counter = 0
        self._builder: _TxBuilder | None = None
        self._group: list | None = None
        self._group_id: str | None = None

    # ------------------------------------------------------------------
    # ids and basic lookups
    # ------------------------------------------------------------------

    def new_id(self) -> str:
        self._id_counter += 1
        return f"{self.id_prefix}e{self._id_counter}"

    def _new_tx_id(self) -> str:
        self._tx_counter += 1
        return f"{self.id_prefix}t{self._tx_counter}"

    def resolve(self, element_id: str):
        return self.registry.resolve(element_id)

    def node(self, element_id: str) -> NodeInfo:
        info = self.nodes.get(element_id)
        if info is None:
            raise NotFoundError(f"no layout record for '{element_id}'")
        return info

    def root_objects(self, model_id: str) -> list:
        """Uncontained objects of the model, in creation order (derived)."""
        return [
            oid
            for oid in self.registry.objects_of_model(model_id)
            if self.registry.elements[oid].containerOf is None
        ]

    def metamodel_of(self, model_id: str) -> str:
        model = self.resolve(model_id)
        if model.isMetamodel:
            return model_id
        if model.conformsTo is None:
            raise ConformanceError(f"model '{model.name}' declares no metamodel")
        return model.conformsTo

    # ------------------------------------------------------------------
    # transaction plumbing
    # ------------------------------------------------------------------

    @contextmanager
    def batch(self):
        """Merge all nested mutations into one transaction."""
        if self._builder is not None:
            yield self._builder
            return
        b = self._begin()
        try:
            yield b
        except BaseException:
            b.rollback()
            self._builder = None
            raise
        else:
            self._commit(b)

    def run_batch(self, fn) -> Transaction | None:
        """Run ``fn`` with all nested mutations merged into one transaction.

        Returns the committed transaction, or None when nothing changed
        (no-op batches leave no trace in the log).
        """
        owns = self._builder is None
        b = self._begin()
        try:
            fn()
        except BaseException:
            if owns:
                self._abort(b)
            raise
        if not owns:
            return None
        if b.empty:
            self._abort(b)
            return None
        return self._commit(b)

    @contextmanager
    def group(self):
        """Collect every transaction committed inside into one undo group."""
        if self._group is not None:
            yield
            return
        self._group = []
        self._group_id = None
        try:
            yield
        finally:
            txs, self._group, self._group_id = self._group, None, None
            if txs:
                self.undo_stack.append(txs)
                self.redo_stack.clear()

    def _begin(self) -> _TxBuilder:
        if self._builder is not None:
            return self._builder
        self._builder = _TxBuilder(self)
        return self._builder

    def _finish(self, builder: _TxBuilder, owns: bool) -> Transaction | None:
        if not owns:
            return None
        return self._commit(builder)

    def _commit(self, builder: _TxBuilder) -> Transaction:
        assert builder is self._builder
        self._builder = None
        tx_id = self._new_tx_id()
        group = self._group_id if self._group_id else tx_id
        tx = Transaction(tx_id, self.session, group, builder.ops, builder.inverses)
        self.change_log.append(tx)
        if self._group is not None:
            if self._group_id is None:
                self._group_id = tx_id
                tx.group = tx_id
            self._group.append(tx)
        else:
            self.undo_stack.append([tx])
            self.redo_stack.clear()
        return tx

    def _abort(self, builder: _TxBuilder):
        assert builder is self._builder
        builder.rollback()
        self._builder = None

    def _mutate(self, build) -> Transaction | None:
        """Run ``build`` against a builder, committing unless nested in a batch."""
        owns = self._builder is None
        b = self._begin()
        mark = len(b.ops)
        try:
            build(b)
        except BaseException:
            if owns:
                self._abort(b)
            else:
                # roll back only this mutation's ops, keep the outer batch alive
                while len(b.ops) > mark:
                    op = b.ops.pop()
                    inv = b.inverses.pop()
                    self._apply_op(inv)
            raise
        return self._finish(b, owns)

    def apply_transaction(self, tx) -> Transaction:
        """Apply a recorded transaction verbatim (replay or remote op).

        The transaction is appended to the log as given; inverses for
        rollback-on-error are computed live so a partially inapplicable
        transaction leaves no trace.
        """
        if isinstance(tx, dict):
            tx = Transaction.from_record(tx)
        applied = []
        for op in tx.ops:
            try:
                inv = self._apply_op(_copy_json(op))
            except KernelError:
                for prior in reversed(applied):
                    if prior is not _NOOP:
                        self._apply_op(prior)
                raise
            applied.append(inv)
        self.change_log.append(tx)
        if self._group is not None:
            if self._group_id is None:
                self._group_id = tx.id
            self._group.append(tx)
        return tx

    @staticmethod
    def replay(log, session: str = "replay") -> "ProjectStore":
        store = ProjectStore(session=session)
        for tx in log:
            store.apply_transaction(tx.record() if isinstance(tx, Transaction) else tx)
        return store

    def affected_objects(self, tx: Transaction) -> list:
        """Elements whose data changed in the transaction, in op order."""
        out = []
        for op in tx.ops:
            target = None
            if op["op"] == "setValue":
                target = op.get("owner")
            elif op["op"] == "create":
                rec = op["record"]
                if rec["kind"] == "DValue":
                    target = rec["owner"]
                elif rec["kind"] == "DObject":
                    target = rec["id"]
            if target and target not in out and self.registry.contains(target):
                out.append(target)
        return out

    def moved_elements(self, tx: Transaction) -> list:
        out = []
        for op in tx.ops:
            if op["op"] == "setLayout" and op["id"] not in out:
                if op["id"] in self.nodes:
                    out.append(op["id"])
        return out

    # ------------------------------------------------------------------
    # primitive op application
    # ------------------------------------------------------------------

    def _apply_op(self, op: dict):
        kind = op["op"]
        handler = getattr(self, f"_op_{kind}", None)
        if handler is None:
            raise KernelError(f"unknown primitive op '{kind}'")
        return handler(op)

    def _op_create(self, op):
        el = element_from_record(op["record"])
        place = op.get("place") or {}
        model_id = place.get("model")
        self.registry.add(el, model_id)
        idx = place.get("elementIndex")
        if model_id is not None and idx is not None:
            lst = self.registry.model_elements[model_id]
            lst.remove(el.id)
            lst.insert(idx, el.id)
        if isinstance(el, DModel):
            section = self.metamodels if el.isMetamodel else self.models
            sidx = place.get("sectionIndex")
            section.insert(sidx if sidx is not None else len(section), el.id)
        owner_id = place.get("owner")
        if owner_id is not None:
            slot = getattr(self.resolve(owner_id), place["slot"])
            sidx = place.get("slotIndex")
            slot.insert(sidx if sidx is not None else len(slot), el.id)
        if isinstance(el, DValue):
            owner = self.resolve(el.owner)
            owner.features[el.feature] = el.id
            self._wire_containment(el.feature, added=el.values, owner_id=el.owner)
        return {"op": "delete", "id": el.id}

    def _op_delete(self, op):
        el = self.resolve(op["id"])
        record = element_record(el)
        place: dict = {}
        model_id = self.registry.element_model[el.id]
        if model_id != el.id:
            place["model"] = model_id
            place["elementIndex"] = self.registry.model_elements[model_id].index(el.id)
        if isinstance(el, DModel):
            section = self.metamodels if el.isMetamodel else self.models
            place["sectionIndex"] = section.index(el.id)
            section.remove(el.id)
        else:
            owner_id, slot, sidx = self._find_slot(el)
            if owner_id is not None:
                place.update(owner=owner_id, slot=slot, slotIndex=sidx)
                getattr(self.resolve(owner_id), slot).remove(el.id)
        if isinstance(el, DValue):
            owner = self.registry.maybe(el.owner)
            if owner is not None and owner.features.get(el.feature) == el.id:
                del owner.features[el.feature]
            self._wire_containment(el.feature, removed=el.values)
        self.registry.remove(el.id)
        return {"op": "create", "record": record, "place": place}

    def _find_slot(self, el):
        slot_name = {
            DPackage: "packages",
            DClass: "classifiers",
            DEnum: "classifiers",
            DAttribute: "attributes",
            DReference: "references",
        }.get(type(el))
        if slot_name is None:
            return None, None, None
        for candidate in self.registry.elements.values():
            lst = getattr(candidate, slot_name, None)
            if isinstance(candidate, (DModel, DPackage, DClass)) and lst and el.id in lst:
                return candidate.id, slot_name, lst.index(el.id)
        return None, None, None

    def _op_setValue(self, op):
        el = self.resolve(op["id"])
        if not isinstance(el, DValue):
            raise TypeMismatchError(f"'{op['id']}' is not a value record")
        new = list(op["values"])
        if new == el.values:
            return _NOOP
        old = list(el.values)
        added = [v for v in new if v not in old]
        removed = [v for v in old if v not in new]
        self._guard_containment(el, added)
        el.values = new
        self._wire_containment(el.feature, added=added, removed=removed, owner_id=el.owner)
        return {"op": "setValue", "id": el.id, "values": old, "owner": el.owner}

    def _op_setMeta(self, op):
        el = self.resolve(op["id"])
        fname = op["field"]
        if not hasattr(el, fname):
            raise KernelError(f"{type(el).__name__} has no field '{fname}'")
        old = getattr(el, fname)
        new = op["value"]
        if fname == "operations":
            new = [DOperation(o["name"], list(o.get("params", [])), o.get("returns")) for o in new]
            old_rec = [{"name": o.name, "params": o.params, "returns": o.returns} for o in old]
            if old_rec == op["value"]:
                return _NOOP
            setattr(el, fname, new)
            return {"op": "setMeta", "id": el.id, "field": fname, "value": old_rec}
        if isinstance(old, list):
            new = list(new)
        if old == new:
            return _NOOP
        if fname == "extends":
            self._guard_extends(el.id, new)
        setattr(el, fname, new)
        return {"op": "setMeta", "id": el.id, "field": fname, "value": old}

    def _op_setLayout(self, op):
        info = self.node(op["id"])
        if op["width"] < 0 or op["height"] < 0:
            raise BoundsError("width and height must be non-negative")
        new = (float(op["x"]), float(op["y"]), float(op["width"]), float(op["height"]))
        old = (info.x, info.y, info.width, info.height)
        if new == old:
            return _NOOP
        info.x, info.y, info.width, info.height = new
        return {
            "op": "setLayout",
            "id": op["id"],
            "x": old[0],
            "y": old[1],
            "width": old[2],
            "height": old[3],
        }

    def _op_setState(self, op):
        info = self.node(op["id"])
        key = op["key"]
        if not key:
            raise BoundsError("state keys must be non-empty")
        if op.get("unset"):
            if key not in info.state:
                return _NOOP
            old = info.state.pop(key)
            return {"op": "setState", "id": op["id"], "key": key, "value": old}
        value = op["value"]
        if key in info.state and info.state[key] == value:
            return _NOOP
        if key in info.state:
            inv = {"op": "setState", "id": op["id"], "key": key, "value": info.state[key]}
        else:
            inv = {"op": "setState", "id": op["id"], "key": key, "unset": True}
        info.state[key] = _copy_json(value)
        return inv

    def _op_putNode(self, op):
        rec = op["record"]
        eid = rec["elementId"]
        if eid in self.nodes:
            old = self.nodes[eid].record()
            if old == rec:
                return _NOOP
            self.nodes[eid] = NodeInfo.from_record(rec)
            return {"op": "putNode", "record": old}
        self.nodes[eid] = NodeInfo.from_record(rec)
        return {"op": "dropNode", "id": eid}

    def _op_dropNode(self, op):
        info = self.nodes.pop(op["id"], None)
        if info is None:
            raise NotFoundError(f"no layout record for '{op['id']}'")
        return {"op": "putNode", "record": info.record()}

    def _op_putViewpoint(self, op):
        rec = _copy_json(op["record"])
        for i, existing in enumerate(self.viewpoints):
            if existing["id"] == rec["id"]:
                if existing == rec:
                    return _NOOP
                self.viewpoints[i] = rec
                return {"op": "putViewpoint", "record": existing, "index": i}
        idx = op.get("index")
        self.viewpoints.insert(idx if idx is not None else len(self.viewpoints), rec)
        return {"op": "dropViewpoint", "id": rec["id"]}

    def _op_dropViewpoint(self, op):
        for i, existing in enumerate(self.viewpoints):
            if existing["id"] == op["id"]:
                del self.viewpoints[i]
                return {"op": "putViewpoint", "record": existing, "index": i}
        raise NotFoundError(f"no viewpoint '{op['id']}'")

    def _wire_containment(self, feature_id, added=(), removed=(), owner_id=None):
        feat = self.registry.maybe(feature_id)
        if not isinstance(feat, DReference) or not feat.isContainment:
            return
        for tid in removed:
            target = self.registry.maybe(tid)
            if isinstance(target, DObject):
                target.containerOf = None
        for tid in added:
            target = self.registry.maybe(tid)
            if isinstance(target, DObject):
                target.containerOf = (owner_id, feature_id)

    def _guard_containment(self, value_el: DValue, added):
        feat = self.registry.maybe(value_el.feature)
        if not isinstance(feat, DReference) or not feat.isContainment:
            return
        for tid in added:
            target = self.registry.maybe(tid)
            if not isinstance(target, DObject):
                continue
            if target.containerOf not in (None, (value_el.owner, value_el.feature)):
                raise EditRejectedError(f"'{tid}' is already contained elsewhere")
            # no object may come to contain one of its own ancestors
            cursor = self.registry.maybe(value_el.owner)
            while cursor is not None and cursor.containerOf is not None:
                if cursor.id == tid or cursor.containerOf[0] == tid:
                    raise EditRejectedError("containment cycle rejected")
                cursor = self.registry.maybe(cursor.containerOf[0])
            if cursor is not None and cursor.id == tid:
                raise EditRejectedError("containment cycle rejected")

    def _guard_extends(self, class_id, new_extends):
        for sid in new_extends:
            sup = self.resolve(sid)
            if not isinstance(sup, DClass):
                raise TypeMismatchError(f"'{sid}' is not a class")
            if sup.isFinal:
                raise EditRejectedError(f"cannot extend final class '{sup.name}'")
        seen = set()

        def walk(cid):
            if cid == class_id:
                raise EditRejectedError("inheritance cycle rejected")
            if cid in seen:
                return
            seen.add(cid)
            els = self.registry.maybe(cid)
            exts = new_extends if cid == class_id else (els.extends if els else [])
            for sid in exts:
                walk(sid)

        for sid in new_extends:
            walk(sid)

    # ------------------------------------------------------------------
    # model and schema construction
    # ------------------------------------------------------------------

    def create_metamodel(self, name: str):
        return self._create_model(name, True, None)

    def create_model(self, name: str, conforms_to: str):
        mm = self.resolve(conforms_to)
        if not mm.isMetamodel:
            raise ConformanceError(f"'{mm.name}' is not a metamodel")
        return self._create_model(name, False, conforms_to)

    def _create_model(self, name, is_meta, conforms_to):
        if not name:
            raise NameClashError("model name must be non-empty")
        mid = self.new_id()

        def build(b):
            rec = element_record(DModel(mid, name, is_meta, conformsTo=conforms_to))
            b.apply({"op": "create", "record": rec, "place": {}})
            b.apply({"op": "putNode", "record": NodeInfo(mid).record()})

        tx = self._mutate(build)
        return tx, mid

    def add_package(self, model_id: str, name: str):
        model = self.resolve(model_id)
        if not isinstance(model, DModel):
            raise NotFoundError(f"'{model_id}' is not a model")
        if any(self.resolve(p).name == name for p in model.packages):
            raise NameClashError(f"package '{name}' already exists")
        pid = self.new_id()

        def build(b):
            rec = element_record(DPackage(pid, name))
            place = {"model": model_id, "owner": model_id, "slot": "packages"}
            b.apply({"op": "create", "record": rec, "place": place})

        tx = self._mutate(build)
        return tx, pid

    def _classifier_target(self, target_id):
        """Resolve an addClass/addEnum target to (model id, package id)."""
        el = self.resolve(target_id)
        if isinstance(el, DPackage):
            return self.registry.model_of(target_id), target_id
        if isinstance(el, DModel):
            if not el.isMetamodel:
                raise ConformanceError("classifiers belong to metamodels")
            if el.packages:
                return target_id, el.packages[0]
            _, pid = self.add_package(target_id, el.name)
            return target_id, pid
        raise NotFoundError(f"'{target_id}' is neither a metamodel nor a package")

    def _check_classifier_name(self, package_id, name):
        if not name:
            raise NameClashError("classifier name must be non-empty")
        pkg = self.resolve(package_id)
        for cid in pkg.classifiers:
            if self.resolve(cid).name == name:
                raise NameClashError(f"classifier '{name}' already exists in '{pkg.name}'")

    def add_class(self, target_id: str, name: str, **flags):
        model_id, package_id = self._classifier_target(target_id)
        self._check_classifier_name(package_id, name)
        extends = flags.pop("extends", [])
        cid = self.new_id()

        def build(b):
            cls = DClass(cid, name, **flags)
            place = {"model": model_id, "owner": package_id, "slot": "classifiers"}
            b.apply({"op": "create", "record": element_record(cls), "place": place})
            if extends:
                self._guard_extends(cid, extends)
                b.apply({"op": "setMeta", "id": cid, "field": "extends", "value": list(extends)})
            b.apply({"op": "putNode", "record": NodeInfo(cid).record()})

        tx = self._mutate(build)
        return tx, cid

    def add_enum(self, target_id: str, name: str, literals):
        literals = list(literals)
        if not literals or len(set(literals)) != len(literals):
            raise TypeMismatchError("enum literals must be non-empty and distinct")
        model_id, package_id = self._classifier_target(target_id)
        self._check_classifier_name(package_id, name)
        eid = self.new_id()

        def build(b):
            rec = element_record(DEnum(eid, name, literals))
            place = {"model": model_id, "owner": package_id, "slot": "classifiers"}
            b.apply({"op": "create", "record": rec, "place": place})

        tx = self._mutate(build)
        return tx, eid

    def _check_feature_name(self, class_id, name):
        if not name:
            raise NameClashError("feature name must be non-empty")
        affected = [class_id] + self.registry.superclasses(class_id) + self.registry.all_subclasses(class_id)
        for cid in affected:
            if self.registry.find_feature(cid, name) is not None:
                raise NameClashError(
                    f"feature '{name}' already exists in the hierarchy of "
                    f"'{self.resolve(class_id).name}'"
                )

    def add_attribute(self, class_id: str, name: str, type: str = "string",
                      lower: int = 0, upper: int | None = 1, default=None):
        cls = self.resolve(class_id)
        if not isinstance(cls, DClass):
            raise NotFoundError(f"'{class_id}' is not a class")
        self._check_feature_name(class_id, name)
        if type not in meta.PRIMITIVE_KINDS and not isinstance(self.resolve(type), DEnum):
            raise TypeMismatchError(f"'{type}' is neither a primitive kind nor an enum")
        self._check_bounds(lower, upper)
        model_id = self.registry.model_of(class_id)
        aid = self.new_id()

        def build(b):
            rec = element_record(DAttribute(aid, name, type, lower, upper, default))
            place = {"model": model_id, "owner": class_id, "slot": "attributes"}
            b.apply({"op": "create", "record": rec, "place": place})
            self._materialize_feature(b, class_id, aid, default)

        tx = self._mutate(build)
        return tx, aid

    def add_reference(self, class_id: str, name: str, target: str,
                      lower: int = 0, upper: int | None = 1, containment: bool = False):
        cls = self.resolve(class_id)
        if not isinstance(cls, DClass):
            raise NotFoundError(f"'{class_id}' is not a class")
        self._check_feature_name(class_id, name)
        if not isinstance(self.resolve(target), DClass):
            raise TypeMismatchError(f"reference target '{target}' is not a class")
        self._check_bounds(lower, upper)
        model_id = self.registry.model_of(class_id)
        rid = self.new_id()

        def build(b):
            rec = element_record(DReference(rid, name, target, lower, upper, containment))
            place = {"model": model_id, "owner": class_id, "slot": "references"}
            b.apply({"op": "create", "record": rec, "place": place})
            self._materialize_feature(b, class_id, rid, None)

        tx = self._mutate(build)
        return tx, rid

    def _check_bounds(self, lower, upper):
        if lower < 0:
            raise BoundsError("lowerBound must be non-negative")
        if upper is not None and (upper < 1 or lower > upper):
            raise BoundsError("upperBound must be positive and >= lowerBound")

    def _materialize_feature(self, b, class_id, feature_id, default):
        """Live co-evolution: give every existing instance a value record."""
        accepted = {class_id, *self.registry.all_subclasses(class_id)}
        for model_id in self.models:
            for oid in self.registry.objects_of_model(model_id):
                obj = self.registry.elements[oid]
                if obj.instanceOf in accepted and feature_id not in obj.features:
                    values = [default] if default is not None else []
                    rec = element_record(DValue(self.new_id(), oid, feature_id, values))
                    b.apply({"op": "create", "record": rec, "place": {"model": model_id}})

    def add_operation(self, class_id: str, name: str, params=(), returns=None):
        cls = self.resolve(class_id)
        ops = [{"name": o.name, "params": o.params, "returns": o.returns} for o in cls.operations]
        ops.append({"name": name, "params": list(params), "returns": returns})

        def build(b):
            b.apply({"op": "setMeta", "id": class_id, "field": "operations", "value": ops})

        return self._mutate(build)

    # ------------------------------------------------------------------
    # objects and values
    # ------------------------------------------------------------------

    def add_object(self, model_id: str, class_name: str, init: dict | None = None):
        model = self.resolve(model_id)
        if model.isMetamodel:
            raise ConformanceError("objects belong to instance models")
        mm_id = self.metamodel_of(model_id)
        cls = self.registry.named_child(mm_id, class_name)
        if not isinstance(cls, DClass):
            raise NotFoundError(f"'{class_name}' is not a class")
        oid_box = {}

        def build(b):
            oid_box["id"] = self._build_object(b, model_id, cls, init or {}, None)

        tx = self._mutate(build)
        return tx, oid_box["id"]

    def _build_object(self, b, model_id, cls: DClass, init: dict, container):
        if cls.isAbstract or cls.isInterface:
            raise NotInstantiableError(f"class '{cls.name}' is abstract or an interface")
        attrs, refs = self.registry.features(cls.id)
        by_name = {self.resolve(fid).name: self.resolve(fid) for fid in attrs + refs}
        unmatched = [k for k in init if k not in by_name and k != "$class"]
        if unmatched:
            raise TypeMismatchError(
                f"init keys {unmatched} match no feature of '{cls.name}'"
            )
        oid = self.new_id()
        rec = element_record(DObject(oid, cls.id, {}, container))
        b.apply({"op": "create", "record": rec, "place": {"model": model_id}})
        b.apply({"op": "putNode", "record": NodeInfo(oid).record()})
        for fid in attrs + refs:
            feat = self.resolve(fid)
            values = self._init_values(b, model_id, oid, feat, init.get(feat.name))
            vrec = element_record(DValue(self.new_id(), oid, fid, values))
            b.apply({"op": "create", "record": vrec, "place": {"model": model_id}})
        return oid

    def _init_values(self, b, model_id, owner_id, feat, given):
        if given is None:
            if isinstance(feat, DAttribute) and feat.defaultValue is not None:
                return [feat.defaultValue]
            return []
        items = given if isinstance(given, list) else [given]
        out = []
        for item in items:
            if isinstance(feat, DReference) and isinstance(item, dict):
                if not feat.isContainment:
                    raise TypeMismatchError(
                        f"nested documents are only allowed under containment "
                        f"references ('{feat.name}')"
                    )
                target_cls = self.resolve(item.get("$class") and
                                          self.registry.named_child(
                                              self.metamodel_of(model_id), item["$class"]).id
                                          or feat.target)
                child = self._build_object(
                    b, model_id, target_cls,
                    {k: v for k, v in item.items() if k != "$class"},
                    (owner_id, feat.id),
                )
                out.append(child)
            else:
                self._check_value(feat, item)
                out.append(item)
        if feat.upperBound is not None and len(out) > feat.upperBound:
            raise BoundsError(
                f"feature '{feat.name}' admits at most {feat.upperBound} value(s)"
            )
        return out

    def _check_value(self, feat, item):
        if isinstance(feat, DReference):
            if not isinstance(item, str) or not self.registry.contains(item):
                raise TypeMismatchError(
                    f"reference '{feat.name}' expects an existing element id, got {item!r}"
                )
            if not self.registry.is_instance_of(item, feat.target):
                target = self.resolve(feat.target).name
                raise TypeMismatchError(
                    f"'{item}' is not an instance of '{target}' (reference '{feat.name}')"
                )
            return
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
            literals = self.resolve(kind).literals
            ok = isinstance(item, str) and item in literals
            if not ok:
                raise TypeMismatchError(
                    f"'{item}' is not a literal of enum "
                    f"'{self.resolve(kind).name}' (attribute '{feat.name}')"
                )
        if not ok:
            raise TypeMismatchError(
                f"{item!r} does not match the '{kind}' type of attribute '{feat.name}'"
            )

    def mutate_feature(self, object_id: str, feature_name: str, edit) -> Transaction:
        obj = self.resolve(object_id)
        if not isinstance(obj, DObject):
            raise NotFoundError(f"'{object_id}' is not an object")
        feat = self.registry.find_feature(obj.instanceOf, feature_name)
        if feat is None:
            cls = self.resolve(obj.instanceOf).name
            raise NotFoundError(f"class '{cls}' declares no feature '{feature_name}'")
        val = self.resolve(obj.features[feat.id])
        action, payload = edit[0], edit[1] if len(edit) > 1 else None
        values = list(val.values)
        if action == "set":
            if payload is None:
                values = []
            else:
                items = payload if isinstance(payload, list) else [payload]
                for item in items:
                    self._check_value(feat, item)
                values = list(items)
        elif action == "insert":
            self._check_value(feat, payload)
            if feat.upperBound is not None and len(values) + 1 > feat.upperBound:
                raise BoundsError(
                    f"feature '{feat.name}' is already at its upper bound "
                    f"({feat.upperBound})"
                )
            index = edit[2] if len(edit) > 2 else len(values)
            values.insert(index, payload)
        elif action == "remove":
            if not values:
                raise BoundsError(f"feature '{feat.name}' has no values to remove")
            if payload not in values:
                raise NotFoundError(f"{payload!r} is not among the values of '{feat.name}'")
            values.remove(payload)
        else:
            raise KernelError(f"unknown edit action '{action}'")

        def build(b):
            b.apply({"op": "setValue", "id": val.id, "values": values, "owner": object_id})

        return self._mutate(build)

    # ------------------------------------------------------------------
    # layout and state
    # ------------------------------------------------------------------

    def set_layout(self, element_id: str, x, y, width=None, height=None) -> Transaction:
        info = self.node(element_id)
        w = info.width if width is None else width
        h = info.height if height is None else height
        if w < 0 or h < 0:
            raise BoundsError("width and height must be non-negative")

        def build(b):
            b.apply({"op": "setLayout", "id": element_id, "x": x, "y": y,
                     "width": w, "height": h})

        return self._mutate(build)

    def set_state(self, element_id: str, key: str, value) -> Transaction:
        self.node(element_id)
        if not key:
            raise BoundsError("state keys must be non-empty")
        if value is not None:
            json.dumps(value)  # state must stay serializable

        def build(b):
            op = {"op": "setState", "id": element_id, "key": key}
            if value is None:
                op["unset"] = True
            else:
                op["value"] = value
            b.apply(op)

        return self._mutate(build)

    # ------------------------------------------------------------------
    # deletion and co-evolution
    # ------------------------------------------------------------------

    def delete_element(self, element_id: str) -> Transaction:
        el = self.resolve(element_id)
        if isinstance(el, DValue):
            raise EditRejectedError("value records are deleted with their feature or owner")

        def build(b):
            if isinstance(el, DObject):
                self._delete_object_tree(b, [element_id])
            elif isinstance(el, (DAttribute, DReference)):
                self._delete_feature(b, element_id)
            elif isinstance(el, DClass):
                self._delete_class(b, element_id)
            elif isinstance(el, DEnum):
                self._delete_enum(b, element_id)
            elif isinstance(el, DPackage):
                self._delete_package(b, element_id)
            elif isinstance(el, DModel):
                self._delete_model(b, element_id)

        return self._mutate(build)

    def _containment_closure(self, roots):
        out, queue = [], list(roots)
        while queue:
            oid = queue.pop(0)
            if oid in out:
                continue
            out.append(oid)
            queue.extend(self.registry.containment_children(oid))
        return out

    def _purge_targets(self, b, doomed: set):
        for el in list(self.registry.elements.values()):
            if not isinstance(el, DValue) or el.owner in doomed or el.id in doomed:
                continue
            if any(v in doomed for v in el.values):
                kept = [v for v in el.values if v not in doomed]
                b.apply({"op": "setValue", "id": el.id, "values": kept, "owner": el.owner})

    def _delete_object_tree(self, b, roots):
        closure = self._containment_closure(roots)
        doomed = set(closure)
        self._purge_targets(b, doomed)
        for oid in reversed(closure):
            obj = self.registry.elements[oid]
            for vid in list(obj.features.values()):
                b.apply({"op": "delete", "id": vid})
            if oid in self.nodes:
                b.apply({"op": "dropNode", "id": oid})
            b.apply({"op": "delete", "id": oid})

    def _delete_feature(self, b, feature_id):
        feat = self.resolve(feature_id)
        holders = [
            el for el in list(self.registry.elements.values())
            if isinstance(el, DValue) and el.feature == feature_id
        ]
        if isinstance(feat, DReference) and feat.isContainment:
            for val in holders:
                for tid in val.values:
                    child = self.registry.maybe(tid)
                    if child is None:
                        continue
                    cls = self.resolve(child.instanceOf)
                    if not cls.isRootable:
                        raise EditRejectedError(
                            f"removing '{feat.name}' would orphan instances of "
                            f"non-rootable class '{cls.name}'"
                        )
        for val in holders:
            b.apply({"op": "delete", "id": val.id})
        b.apply({"op": "delete", "id": feature_id})

    def _delete_class(self, b, class_id):
        cls = self.resolve(class_id)
        for sub in self.registry.direct_subclasses(class_id):
            pruned = [x for x in self.resolve(sub).extends if x != class_id]
            b.apply({"op": "setMeta", "id": sub, "field": "extends", "value": pruned})
        accepted = {class_id, *self.registry.all_subclasses(class_id)}
        for model_id in list(self.models):
            doomed_roots = [
                oid
                for oid in self.registry.objects_of_model(model_id)
                if self.registry.elements[oid].instanceOf in accepted
            ]
            if doomed_roots:
                self._delete_object_tree(b, doomed_roots)
        for el in list(self.registry.elements.values()):
            if isinstance(el, DReference) and el.target == class_id:
                self._delete_feature(b, el.id)
        for fid in list(cls.attributes) + list(cls.references):
            if self.registry.contains(fid):
                self._delete_feature(b, fid)
        if class_id in self.nodes:
            b.apply({"op": "dropNode", "id": class_id})
        b.apply({"op": "delete", "id": class_id})

    def _delete_enum(self, b, enum_id):
        for el in list(self.registry.elements.values()):
            if isinstance(el, DAttribute) and el.type == enum_id:
                b.apply({"op": "setMeta", "id": el.id, "field": "type", "value": "string"})
        b.apply({"op": "delete", "id": enum_id})

    def _delete_package(self, b, package_id):
        pkg = self.resolve(package_id)
        for cid in list(pkg.classifiers):
            if not self.registry.contains(cid):
                continue
            if isinstance(self.resolve(cid), DClass):
                self._delete_class(b, cid)
            else:
                self._delete_enum(b, cid)
        b.apply({"op": "delete", "id": package_id})

    def _delete_model(self, b, model_id):
        model = self.resolve(model_id)
        if model.isMetamodel:
            for other in self.models:
                if self.resolve(other).conformsTo == model_id:
                    raise EditRejectedError(
                        f"metamodel '{model.name}' still has conforming models"
                    )
        for oid in list(self.root_objects(model_id)):
            if self.registry.contains(oid):
                self._delete_object_tree(b, [oid])
        for pid in list(model.packages):
            self._delete_package(b, pid)
        if model_id in self.nodes:
            b.apply({"op": "dropNode", "id": model_id})
        b.apply({"op": "delete", "id": model_id})

    def rename_feature(self, feature_id: str, new_name: str) -> Transaction:
        feat = self.resolve(feature_id)
        if not isinstance(feat, (DAttribute, DReference)):
            raise NotFoundError(f"'{feature_id}' is not a feature")
        old_name = feat.name
        if new_name == old_name:
            return self._mutate(lambda b: None)
        for cid in self.registry.feature_owner_classes(feature_id):
            clash_scope = [cid] + self.registry.superclasses(cid) + self.registry.all_subclasses(cid)
            for other in clash_scope:
                existing = self.registry.find_feature(other, new_name)
                if existing is not None and existing.id != feature_id:
                    raise NameClashError(f"feature '{new_name}' already exists")

        def build(b):
            b.apply({"op": "setMeta", "id": feature_id, "field": "name", "value": new_name})
            self._rewrite_feature_token(b, old_name, new_name)

        return self._mutate(build)

    def _rewrite_feature_token(self, b, old, new):
        """Re-bind view and rule sources after a feature rename."""
        pattern = re.compile(rf"\${re.escape(old)}(?![A-Za-z0-9_])")

        def rewrite(value):
            if isinstance(value, str):
                return pattern.sub(f"${new}", value)
            if isinstance(value, list):
                return [rewrite(v) for v in value]
            if isinstance(value, dict):
                return {k: rewrite(v) for k, v in value.items()}
            return value

        for vp in list(self.viewpoints):
            updated = rewrite(vp)
            if updated != vp:
                b.apply({"op": "putViewpoint", "record": updated})

    def retype_attribute(self, attribute_id: str, new_type: str) -> Transaction:
        attr = self.resolve(attribute_id)
        if not isinstance(attr, DAttribute):
            raise NotFoundError(f"'{attribute_id}' is not an attribute")
        if new_type not in meta.PRIMITIVE_KINDS and not isinstance(self.resolve(new_type), DEnum):
            raise TypeMismatchError(f"'{new_type}' is neither a primitive kind nor an enum")

        def build(b):
            b.apply({"op": "setMeta", "id": attribute_id, "field": "type", "value": new_type})

        return self._mutate(build)

    def set_feature_bounds(self, feature_id: str, lower: int, upper: int | None) -> Transaction:
        feat = self.resolve(feature_id)
        if not isinstance(feat, (DAttribute, DReference)):
            raise NotFoundError(f"'{feature_id}' is not a feature")
        self._check_bounds(lower, upper)

        def build(b):
            b.apply({"op": "setMeta", "id": feature_id, "field": "lowerBound", "value": lower})
            b.apply({"op": "setMeta", "id": feature_id, "field": "upperBound", "value": upper})

        return self._mutate(build)

    def set_class_flag(self, class_id: str, flag: str, value: bool) -> Transaction:
        cls = self.resolve(class_id)
        if not isinstance(cls, DClass) or not flag.startswith("is"):
            raise NotFoundError(f"'{class_id}' is not a class or '{flag}' not a flag")
        if flag == "isFinal" and value and self.registry.direct_subclasses(class_id):
            raise EditRejectedError("cannot seal a class that already has subclasses")

        def build(b):
            b.apply({"op": "setMeta", "id": class_id, "field": flag, "value": bool(value)})

        return self._mutate(build)

    def co_evolve(self, edit: dict) -> Transaction:
        """Apply one metamodel edit, adapting conforming models in the same step."""
        action = edit["action"]
        if action == "removeFeature":
            return self.delete_element(edit["feature"])
        if action == "renameFeature":
            return self.rename_feature(edit["feature"], edit["name"])
        if action == "retypeAttribute":
            return self.retype_attribute(edit["attribute"], edit["type"])
        if action == "deleteClass":
            return self.delete_element(edit["class"])
        if action == "setBounds":
            return self.set_feature_bounds(edit["feature"], edit["lower"], edit["upper"])
        if action == "setFlag":
            return self.set_class_flag(edit["class"], edit["flag"], edit["value"])
        if action == "addAttribute":
            tx, _ = self.add_attribute(
                edit["class"], edit["name"], edit.get("type", "string"),
                edit.get("lower", 0), edit.get("upper", 1), edit.get("default"),
            )
            return tx
        if action == "addReference":
            tx, _ = self.add_reference(
                edit["class"], edit["name"], edit["target"],
                edit.get("lower", 0), edit.get("upper", 1), edit.get("containment", False),
            )
            return tx
        raise KernelError(f"unknown co-evolution action '{action}'")

    # ------------------------------------------------------------------
    # viewpoints
    # ------------------------------------------------------------------

    def put_viewpoint(self, record: dict) -> Transaction:
        if "id" not in record:
            raise KernelError("viewpoint records need an id")

        def build(b):
            b.apply({"op": "putViewpoint", "record": record})

        return self._mutate(build)

    def drop_viewpoint(self, viewpoint_id: str) -> Transaction:
        def build(b):
            b.apply({"op": "dropViewpoint", "id": viewpoint_id})

        return self._mutate(build)

    def viewpoint(self, viewpoint_id: str) -> dict:
        for vp in self.viewpoints:
            if vp["id"] == viewpoint_id:
                return vp
        raise NotFoundError(f"no viewpoint '{viewpoint_id}'")

    # ------------------------------------------------------------------
    # undo / redo
    # ------------------------------------------------------------------

    def undo(self) -> Transaction:
        if not self.undo_stack:
            raise BoundsError("nothing to undo")
        group = self.undo_stack.pop()
        b = self._begin()
        try:
            for tx in reversed(group):
                for inv in reversed(tx.inverseOps):
                    b.apply(_copy_json(inv))
        except BaseException:
            self._abort(b)
            self.undo_stack.append(group)
            raise
        undo_tx = self._commit_plain(b)
        self.redo_stack.append(group)
        return undo_tx

    def redo(self) -> Transaction:
        if not self.redo_stack:
            raise BoundsError("nothing to redo")
        group = self.redo_stack.pop()
        b = self._begin()
        try:
            for tx in group:
                for op in tx.ops:
                    b.apply(_copy_json(op))
        except BaseException:
            self._abort(b)
            self.redo_stack.append(group)
            raise
        redo_tx = self._commit_plain(b)
        self.undo_stack.append(group)
        return redo_tx

    def _commit_plain(self, builder: _TxBuilder) -> Transaction:
        """Commit without touching the undo bookkeeping (undo/redo themselves)."""
        assert builder is self._builder
        self._builder = None
        tx_id = self._new_tx_id()
        tx = Transaction(tx_id, self.session, tx_id, builder.ops, builder.inverses)
        self.change_log.append(tx)
        return tx

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def document(self) -> dict:
        def model_record(mid):
            model = self.resolve(mid)
            rec = element_record(model)
            rec["rootObjects"] = self.root_objects(mid)
            rec["elements"] = [
                element_record(self.registry.elements[eid])
                for eid in self.registry.elements_of_model(mid)
            ]
            return rec

        return {
            "version": 1,
            "metamodels": [model_record(mid) for mid in self.metamodels],
            "models": [model_record(mid) for mid in self.models],
            "nodes": {eid: info.record() for eid, info in self.nodes.items()},
            "viewpoints": _copy_json(self.viewpoints),
            "log": [tx.record() for tx in self.change_log],
        }

    def serialize(self) -> str:
        return json.dumps(self.document(), sort_keys=True, indent=1) + "\n"

    def snapshot(self) -> "ProjectStore":
        """Independent copy for concurrent readers; never written back."""
        return ProjectStore.load(self.document(), session=f"{self.session}-reader")

    def data_fingerprint(self) -> str:
        """Canonical serialization of everything except the log."""
        doc = self.document()
        del doc["log"]
        return json.dumps(doc, sort_keys=True)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.serialize())

    @staticmethod
    def load(document, session: str = "local", id_prefix: str = "") -> "ProjectStore":
        if isinstance(document, str):
            document = json.loads(document)
        store = ProjectStore(session=session, id_prefix=id_prefix)
        for section, target in (("metamodels", store.metamodels), ("models", store.models)):
            for rec in document.get(section, ()):
                model_rec = {k: v for k, v in rec.items() if k not in ("elements", "rootObjects")}
                model_rec["rootObjects"] = []
                model = element_from_record(model_rec)
                store.registry.add(model, None)
                target.append(model.id)
                for el_rec in rec.get("elements", ()):
                    store.registry.add(element_from_record(el_rec), model.id)
        for rec in document.get("nodes", {}).values():
            store.nodes[rec["elementId"]] = NodeInfo.from_record(rec)
        store.viewpoints = _copy_json(document.get("viewpoints", []))
        store.change_log = [Transaction.from_record(r) for r in document.get("log", ())]
        store._id_counter = store._scan_counter("e", store.registry.elements.keys())
        store._tx_counter = store._scan_counter("t", (tx.id for tx in store.change_log))
        return store

    @staticmethod
    def load_file(path, session: str = "local", id_prefix: str = "") -> "ProjectStore":
        with open(path, encoding="utf-8") as fh:
            return ProjectStore.load(fh.read(), session=session, id_prefix=id_prefix)

    def _scan_counter(self, letter, ids) -> int:
        pattern = re.compile(rf"^{re.escape(self.id_prefix)}{letter}(\d+)$")
        best = 0
        for the_id in ids:
            m = pattern.match(the_id)
            if m:
                best = max(best, int(m.group(1)))
        return best
