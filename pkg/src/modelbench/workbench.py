"""Session façade: one store wired to the rule engine and validator.

Every user-level gesture runs as one undo group: the triggering transaction,
the rule cascade it causes, and the resulting marker updates all undo
together, so undo restores the exact pre-gesture snapshot.
"""

from __future__ import annotations

from . import views
from .lang import (
    ElementHandle,
    EvalContext,
    NodeHandle,
    ViewHandle,
    evaluate_source,
    execute_query,
)
from .errors import NotFoundError
from .meta import DObject
from .rules import RuleEngine, builtin_expression_semantics, grid_snap_rule
from .store import ProjectStore
from .validation import Validator


class Workbench:
    def __init__(self, store: ProjectStore | None = None, depth_cap: int = 100,
                 auto_validate: bool = True):
        self.store = store if store is not None else ProjectStore()
        self.engine = RuleEngine(self.store, depth_cap=depth_cap)
        self.validator = Validator(self.store)
        self.auto_validate = auto_validate

    # -- gesture orchestration -----------------------------------------

    def _gesture(self, fn):
        result = {}
        with self.store.group():
            result["value"] = fn()
            tx = result["value"][0] if isinstance(result["value"], tuple) else result["value"]
            if tx is not None:
                self.engine.cascade_after(tx)
            if self.auto_validate:
                self.validator.revalidate_all()
        return result["value"]

    # -- construction -----------------------------------------------------

    def create_metamodel(self, name):
        _, mid = self._gesture(lambda: self.store.create_metamodel(name))
        return mid

    def create_model(self, name, conforms_to):
        _, mid = self._gesture(lambda: self.store.create_model(name, conforms_to))
        return mid

    def add_package(self, model_id, name):
        _, pid = self._gesture(lambda: self.store.add_package(model_id, name))
        return pid

    def add_class(self, target_id, name, **flags):
        _, cid = self._gesture(lambda: self.store.add_class(target_id, name, **flags))
        return cid

    def add_enum(self, target_id, name, literals):
        _, eid = self._gesture(lambda: self.store.add_enum(target_id, name, literals))
        return eid

    def add_attribute(self, class_id, name, type="string", lower=0, upper=1, default=None):
        _, aid = self._gesture(
            lambda: self.store.add_attribute(class_id, name, type, lower, upper, default)
        )
        return aid

    def add_reference(self, class_id, name, target, lower=0, upper=1, containment=False):
        _, rid = self._gesture(
            lambda: self.store.add_reference(class_id, name, target, lower, upper, containment)
        )
        return rid

    def add_object(self, model_id, class_name, init=None):
        _, oid = self._gesture(lambda: self.store.add_object(model_id, class_name, init))
        return oid

    # -- mutation -----------------------------------------------------------

    def set_feature(self, object_id, feature_name, value):
        """Convenience set-edit; triggers the update cascade."""
        return self._gesture(
            lambda: self.store.mutate_feature(object_id, feature_name, ("set", value))
        )

    def mutate_feature(self, object_id, feature_name, edit):
        return self._gesture(lambda: self.store.mutate_feature(object_id, feature_name, edit))

    def delete(self, element_id):
        return self._gesture(lambda: self.store.delete_element(element_id))

    def co_evolve(self, edit: dict):
        return self._gesture(lambda: self.store.co_evolve(edit))

    def set_layout(self, element_id, x, y, width=None, height=None):
        return self._gesture(lambda: self.store.set_layout(element_id, x, y, width, height))

    def set_state(self, element_id, key, value):
        return self._gesture(lambda: self.store.set_state(element_id, key, value))

    def drag(self, element_id, path):
        """Full drag gesture through the engine (start, moves, end, snap)."""
        txs = {}
        with self.store.group():
            txs["all"] = self.engine.simulate_drag(element_id, path)
            if self.auto_validate:
                self.validator.revalidate_all()
        return txs["all"]

    def undo(self):
        tx = self.store.undo()
        self.engine.cascade_after(tx)
        if self.auto_validate:
            self.validator.revalidate_all()
        return tx

    def redo(self):
        tx = self.store.redo()
        self.engine.cascade_after(tx)
        if self.auto_validate:
            self.validator.revalidate_all()
        return tx

    def apply_remote(self, tx_record):
        """Apply a collaborator's transaction plus its local consequences."""
        applied = {}
        with self.store.group():
            applied["tx"] = self.store.apply_transaction(tx_record)
            applied["cascade"] = self.engine.cascade_after(applied["tx"])
            if self.auto_validate:
                self.validator.revalidate_all()
        return applied["tx"], applied["cascade"]

    # -- viewpoints, rules, validation ------------------------------------

    def put_viewpoint(self, record):
        views.check_viewpoint_record(record)
        return self.store.put_viewpoint(record)

    def register_rule(self, record, viewpoint_id="semantics"):
        return self.engine.register_rule(record, viewpoint_id)

    def register_validation_rule(self, record, viewpoint_id="validation"):
        rid = self.validator.register_rule(record, viewpoint_id)
        if self.auto_validate:
            self.validator.revalidate_all()
        return rid

    def enable_grid_snap(self):
        return self.engine.register_rule(grid_snap_rule())

    def enable_expression_semantics(self, model_id):
        return builtin_expression_semantics(self.engine, model_id)

    def validate(self, model_id=None):
        if model_id is not None:
            return self.validator.validate_model(model_id)
        return self.validator.revalidate_all()

    # -- rendering ----------------------------------------------------------

    def render(self, model_id=None, viewpoint=None):
        return views.render(self.store, model_id or self.first_model(), viewpoint)

    def render_svg(self, model_id=None, viewpoint=None):
        return views.render_svg(self.render(model_id, viewpoint))

    def apply_projectional_edit(self, affordance, new_value):
        return self._gesture(
            lambda: views.apply_projectional_edit(self.store, affordance, new_value)
        )

    def set_control_parameter(self, scope_element_id, name, value, viewpoint=None):
        vp = viewpoint if viewpoint is not None else views.default_viewpoint(self.store)
        if vp is None:
            raise NotFoundError("no viewpoint defines controls")
        return self._gesture(
            lambda: views.set_control_parameter(self.store, vp, scope_element_id, name, value)
        )

    # -- console helpers ------------------------------------------------------

    def first_model(self):
        if not self.store.models:
            raise NotFoundError("no instance model in the project")
        return self.store.models[0]

    def context_for(self, element_id=None) -> EvalContext:
        store = self.store
        if element_id is None:
            model_id = store.models[0] if store.models else None
            return EvalContext(store=store, model_id=model_id)
        el = store.resolve(element_id)
        model_id = store.registry.model_of(element_id)
        view = None
        vp = views.default_viewpoint(store)
        if vp is not None:
            try:
                view = views.resolve_view(store, element_id, vp)
            except Exception:
                view = None
        return EvalContext(
            store=store,
            model_id=model_id,
            data=ElementHandle(store, element_id),
            node=NodeHandle(store, element_id) if element_id in store.nodes else None,
            view=ViewHandle(view) if view is not None else None,
        )

    def eval(self, source, element_id=None):
        return evaluate_source(source, self.context_for(element_id))

    def query(self, source, model_id=None):
        return execute_query(source, self.store, model_id or self.first_model())

    def find_object(self, model_id, class_name, name):
        """Resolve an object by class and name, the console's addressing."""
        mm = self.store.metamodel_of(model_id)
        cls = self.store.registry.named_child(mm, class_name)
        for oid in self.store.registry.all_instances(cls.id, model_id):
            if self.store.registry.object_name(oid) == name:
                return oid
        raise NotFoundError(f"no {class_name} named '{name}'")
