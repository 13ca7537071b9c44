"""Meta-metamodel constructs and the reflective read API.

The schema side (models, packages, classes, enums, attributes, references)
and the instance side (objects, values) share one element space: every
record has a project-unique id and is reachable through a single registry.
Reflective queries — instance enumeration, feature collection, hierarchy
navigation, name-based child lookup — are methods on that registry so the
store, the expression language, and the console all go through one
implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import AmbiguousNameError, ConformanceError, NotFoundError

ElementId = str

PRIMITIVE_KINDS = ("integer", "real", "string", "boolean")

#: upperBound value meaning "no upper limit"
UNBOUNDED = None


@dataclass
class DOperation:
    """A stored operation signature. Signatures are data only, never executed."""

    name: str
    params: list = field(default_factory=list)
    returns: str | None = None


@dataclass
class DModel:
    id: ElementId
    name: str
    isMetamodel: bool
    conformsTo: ElementId | None = None
    packages: list = field(default_factory=list)
    rootObjects: list = field(default_factory=list)


@dataclass
class DPackage:
    id: ElementId
    name: str
    classifiers: list = field(default_factory=list)


@dataclass
class DClass:
    id: ElementId
    name: str
    isAbstract: bool = False
    isInterface: bool = False
    isFinal: bool = False
    isSingleton: bool = False
    isRootable: bool = True
    isPrimitive: bool = False
    extends: list = field(default_factory=list)
    attributes: list = field(default_factory=list)
    references: list = field(default_factory=list)
    operations: list = field(default_factory=list)


@dataclass
class DEnum:
    id: ElementId
    name: str
    literals: list = field(default_factory=list)


@dataclass
class DAttribute:
    id: ElementId
    name: str
    # a primitive kind string or the id of a DEnum
    type: str = "string"
    lowerBound: int = 0
    upperBound: int | None = 1
    defaultValue: object = None


@dataclass
class DReference:
    id: ElementId
    name: str
    target: ElementId = ""
    lowerBound: int = 0
    upperBound: int | None = 1
    isContainment: bool = False


@dataclass
class DObject:
    id: ElementId
    instanceOf: ElementId
    # feature id -> DValue id; one value record per declared feature
    features: dict = field(default_factory=dict)
    # (parent object id, containment reference id) or None for roots
    containerOf: tuple | None = None


@dataclass
class DValue:
    id: ElementId
    owner: ElementId
    feature: ElementId
    # scalars, enum literal strings, or target ElementIds
    values: list = field(default_factory=list)


ELEMENT_KINDS = {
    cls.__name__: cls
    for cls in (DModel, DPackage, DClass, DEnum, DAttribute, DReference, DObject, DValue)
}


def element_record(element) -> dict:
    """Serialize an element to a plain dict tagged with its kind."""
    rec = {"kind": type(element).__name__}
    for f in fields(element):
        v = getattr(element, f.name)
        if f.name == "containerOf":
            v = list(v) if v is not None else None
        elif f.name == "operations":
            v = [{"name": o.name, "params": o.params, "returns": o.returns} for o in v]
        elif isinstance(v, list):
            v = list(v)
        elif isinstance(v, dict):
            v = dict(v)
        rec[f.name] = v
    return rec


def element_from_record(rec: dict):
    kind = rec["kind"]
    cls = ELEMENT_KINDS[kind]
    kwargs = {}
    for f in fields(cls):
        if f.name not in rec:
            continue
        v = rec[f.name]
        if f.name == "containerOf":
            v = tuple(v) if v is not None else None
        elif f.name == "operations":
            v = [DOperation(o["name"], list(o.get("params", [])), o.get("returns")) for o in v]
        elif isinstance(v, list):
            v = list(v)
        elif isinstance(v, dict):
            v = dict(v)
        kwargs[f.name] = v
    return cls(**kwargs)


class ElementRegistry:
    """Id-indexed element table with per-model creation-order bookkeeping."""

    def __init__(self):
        self.elements: dict = {}
        # model id -> element ids in creation order (schema and instances alike)
        self.model_elements: dict = {}
        # element id -> owning model id (models map to themselves)
        self.element_model: dict = {}

    # -- basic access -------------------------------------------------

    def resolve(self, element_id: ElementId):
        el = self.elements.get(element_id)
        if el is None:
            raise NotFoundError(f"no element with id '{element_id}'")
        return el

    def maybe(self, element_id: ElementId):
        return self.elements.get(element_id)

    def contains(self, element_id: ElementId) -> bool:
        return element_id in self.elements

    def kind_of(self, element_id: ElementId) -> str:
        return type(self.resolve(element_id)).__name__

    def add(self, element, model_id: ElementId | None):
        if element.id in self.elements:
            raise NameClashError(f"id '{element.id}' already in use")
        self.elements[element.id] = element
        owner = model_id if model_id is not None else element.id
        self.element_model[element.id] = owner
        if model_id is not None:
            self.model_elements.setdefault(model_id, []).append(element.id)
        else:
            self.model_elements.setdefault(element.id, [])

    def remove(self, element_id: ElementId):
        el = self.resolve(element_id)
        model_id = self.element_model.pop(element_id)
        if model_id != element_id:
            self.model_elements[model_id].remove(element_id)
        else:
            self.model_elements.pop(element_id, None)
        del self.elements[element_id]
        return el

    def model_of(self, element_id: ElementId) -> ElementId:
        self.resolve(element_id)
        return self.element_model[element_id]

    def elements_of_model(self, model_id: ElementId) -> list:
        return list(self.model_elements.get(model_id, ()))

    def objects_of_model(self, model_id: ElementId) -> list:
        return [
            eid
            for eid in self.model_elements.get(model_id, ())
            if isinstance(self.elements[eid], DObject)
        ]

    # -- hierarchy ----------------------------------------------------

    def superclasses(self, class_id: ElementId) -> list:
        """Transitive supertypes, supers before subs, declaration order, deduped."""
        cls = self._class(class_id)
        seen, out = set(), []

        def walk(c: DClass):
            for sid in c.extends:
                walk(self._class(sid))
            if c.id not in seen:
                seen.add(c.id)
                out.append(c.id)

        walk(cls)
        out.remove(class_id)
        return out

    def direct_subclasses(self, class_id: ElementId) -> list:
        self._class(class_id)
        return [
            el.id
            for el in self.elements.values()
            if isinstance(el, DClass) and class_id in el.extends
        ]

    def all_subclasses(self, class_id: ElementId) -> list:
        out, queue = [], [class_id]
        seen = {class_id}
        while queue:
            for sub in self.direct_subclasses(queue.pop(0)):
                if sub not in seen:
                    seen.add(sub)
                    out.append(sub)
                    queue.append(sub)
        return out

    def hierarchy(self, class_id: ElementId):
        cls = self._class(class_id)
        return list(cls.extends), self.direct_subclasses(class_id)

    # -- features -----------------------------------------------------

    def features(self, class_id: ElementId):
        """Own plus inherited features, superclass features first.

        Returns (attribute ids, reference ids), each list in declaration
        order and free of duplicates.
        """
        attrs, refs, seen = [], [], set()
        for cid in self.superclasses(class_id) + [class_id]:
            c = self._class(cid)
            for aid in c.attributes:
                if aid not in seen:
                    seen.add(aid)
                    attrs.append(aid)
            for rid in c.references:
                if rid not in seen:
                    seen.add(rid)
                    refs.append(rid)
        return attrs, refs

    def find_feature(self, class_id: ElementId, name: str):
        attrs, refs = self.features(class_id)
        for fid in attrs + refs:
            if self.resolve(fid).name == name:
                return self.resolve(fid)
        return None

    def feature_owner_classes(self, feature_id: ElementId) -> list:
        """Classes declaring the feature directly."""
        return [
            el.id
            for el in self.elements.values()
            if isinstance(el, DClass)
            and (feature_id in el.attributes or feature_id in el.references)
        ]

    # -- instances ----------------------------------------------------

    def is_instance_of(self, object_id: ElementId, class_id: ElementId) -> bool:
        obj = self.resolve(object_id)
        if not isinstance(obj, DObject):
            return False
        if obj.instanceOf == class_id:
            return True
        return class_id in self.superclasses(obj.instanceOf)

    def all_instances(self, class_id: ElementId, model_id: ElementId) -> list:
        """Instances of the class and its transitive subclasses, creation order."""
        self._class(class_id)
        model = self.resolve(model_id)
        if not isinstance(model, DModel):
            raise NotFoundError(f"'{model_id}' is not a model")
        if not model.isMetamodel and model.conformsTo != self.element_model.get(class_id):
            raise ConformanceError(
                f"model '{model.name}' does not conform to the metamodel "
                f"declaring '{self.resolve(class_id).name}'"
            )
        accepted = {class_id, *self.all_subclasses(class_id)}
        return [
            oid
            for oid in self.objects_of_model(model_id)
            if self.elements[oid].instanceOf in accepted
        ]

    def object_name(self, object_id: ElementId):
        """Value of the object's literal 'name' feature, or None."""
        obj = self.resolve(object_id)
        feat = self.find_feature(obj.instanceOf, "name")
        if feat is None or feat.id not in obj.features:
            return None
        val = self.resolve(obj.features[feat.id])
        return val.values[0] if val.values else None

    def containment_children(self, object_id: ElementId) -> list:
        obj = self.resolve(object_id)
        out = []
        for fid, vid in obj.features.items():
            feat = self.resolve(fid)
            if isinstance(feat, DReference) and feat.isContainment:
                out.extend(self.resolve(vid).values)
        return out

    def referrers(self, element_id: ElementId) -> list:
        """Owners of reference values that point at the element, creation order."""
        out = []
        for el in self.elements.values():
            if isinstance(el, DValue) and element_id in el.values:
                feat = self.maybe(el.feature)
                if isinstance(feat, DReference) and el.owner not in out:
                    out.append(el.owner)
        return out

    # -- name lookup ----------------------------------------------------

    def named_child(self, parent_id: ElementId, name: str):
        """Child element or value reached from the parent by exact name.

        Models resolve packages, classifiers, and named instances; classes
        resolve declared or inherited features; objects resolve the value
        record of the feature with that name. Zero matches raise
        NotFoundError, several raise AmbiguousNameError.
        """
        parent = self.resolve(parent_id)
        if isinstance(parent, DModel):
            matches = []
            for pid in parent.packages:
                pkg = self.resolve(pid)
                if pkg.name == name:
                    matches.append(pkg)
                for cid in pkg.classifiers:
                    cl = self.resolve(cid)
                    if cl.name == name:
                        matches.append(cl)
            for oid in self.objects_of_model(parent_id):
                if self.object_name(oid) == name:
                    matches.append(self.elements[oid])
            return self._single(matches, parent, name)
        if isinstance(parent, DPackage):
            matches = [self.resolve(c) for c in parent.classifiers if self.resolve(c).name == name]
            return self._single(matches, parent, name)
        if isinstance(parent, DClass):
            feat = self.find_feature(parent_id, name)
            if feat is None:
                raise NotFoundError(f"class '{parent.name}' has no feature '{name}'")
            return feat
        if isinstance(parent, DObject):
            feat = self.find_feature(parent.instanceOf, name)
            if feat is None or feat.id not in parent.features:
                cls = self.resolve(parent.instanceOf)
                raise NotFoundError(f"'{cls.name}' object has no feature '{name}'")
            return self.resolve(parent.features[feat.id])
        raise NotFoundError(f"cannot look up names under a {type(parent).__name__}")

    def _single(self, matches, parent, name):
        if not matches:
            raise NotFoundError(f"no child named '{name}' under '{parent.name}'")
        if len(matches) > 1:
            raise AmbiguousNameError(
                f"name '{name}' is ambiguous under '{parent.name}' ({len(matches)} matches)"
            )
        return matches[0]

    def _class(self, class_id: ElementId) -> DClass:
        el = self.resolve(class_id)
        if not isinstance(el, DClass):
            raise NotFoundError(f"'{class_id}' is not a class")
        return el
