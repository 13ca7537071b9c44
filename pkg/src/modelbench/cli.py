"""Command-line console.

Reads commands from a script file or stdin, one per line. ``eval`` binds
``data`` to the selected element (``node`` and ``view`` alongside it) and
prints results in console notation. Blank lines and ``#`` comments are
skipped; in script mode the first failing command stops the run with exit
code 1 (2 when ``validate --strict`` found errors).

Element references accept, in order: ``root`` (first root object of the
current model), a raw element id, a node-state label, a ``/model/Class:name``
path, or a bare name resolved against the current model and its metamodel.
"""

from __future__ import annotations

import argparse
import json
import re
import sys

from . import fixtures
from .errors import KernelError, NotFoundError
from .lang import format_value
from .meta import DObject
from .store import ProjectStore
from .views import default_viewpoint
from .workbench import Workbench


class ConsoleError(KernelError):
    pass


class Console:
    def __init__(self, out=None):
        self.bench = Workbench()
        self.selection: str | None = None
        self.out = out if out is not None else sys.stdout
        self.exit_code = 0
        self.running = True

    def print(self, text=""):
        print(text, file=self.out)

    # -- element addressing ------------------------------------------------

    def current_model(self) -> str:
        store = self.bench.store
        if store.models:
            return store.models[0]
        if store.metamodels:
            return store.metamodels[0]
        raise ConsoleError("no project is open")

    def resolve_ref(self, text: str) -> str:
        store = self.bench.store
        if text == "root":
            roots = store.root_objects(self.current_model())
            if not roots:
                raise ConsoleError("the current model has no root objects")
            return roots[0]
        if store.registry.contains(text):
            return text
        for eid, info in store.nodes.items():
            if info.state.get("label") == text:
                return eid
        if text.startswith("/"):
            return self._resolve_path(text)
        model = self.current_model()
        for scope in (model, store.resolve(model).conformsTo):
            if scope is None:
                continue
            try:
                return store.registry.named_child(scope, text).id
            except KernelError:
                continue
        raise ConsoleError(f"cannot resolve element reference '{text}'")

    def _resolve_path(self, path: str) -> str:
        store = self.bench.store
        parts = [p for p in path.split("/") if p]
        if not parts:
            raise ConsoleError("empty element path")
        model_id = None
        for mid in store.models + store.metamodels:
            if store.resolve(mid).name == parts[0]:
                model_id = mid
                break
        if model_id is None:
            raise ConsoleError(f"no model named '{parts[0]}'")
        if len(parts) == 1:
            return model_id
        tail = parts[1]
        if ":" in tail:
            class_name, obj_name = tail.split(":", 1)
            return self.bench.find_object(model_id, class_name, obj_name)
        return store.registry.named_child(model_id, tail).id

    def element_path(self, element_id: str) -> str:
        store = self.bench.store
        el = store.registry.maybe(element_id)
        if el is None:
            return element_id
        model_id = store.registry.model_of(element_id)
        model_name = store.resolve(model_id).name
        if isinstance(el, DObject):
            name = store.registry.object_name(element_id)
            cls = store.resolve(el.instanceOf).name
            return f"/{model_name}/{cls}:{name or element_id}"
        name = getattr(el, "name", element_id)
        return f"/{model_name}/{name}"

    # -- command loop ----------------------------------------------------

    def execute(self, line: str) -> int:
        line = line.strip()
        if not line or line.startswith("#"):
            return 0
        try:
            self._dispatch(line)
            return 0
        except KernelError as err:
            print(f"error: {err}", file=sys.stderr)
            return 1

    def _dispatch(self, line: str):
        command, _, rest = line.partition(" ")
        rest = rest.strip()
        handler = getattr(self, f"cmd_{command.replace('-', '_')}", None)
        if handler is None:
            raise ConsoleError(f"unknown command '{command}'")
        handler(rest)

    # -- commands -----------------------------------------------------------

    def cmd_new(self, rest):
        self.bench = Workbench()
        self.selection = None

    def cmd_load(self, rest):
        if not rest:
            raise ConsoleError("load needs a file path")
        self.bench = Workbench(ProjectStore.load_file(rest))
        self.selection = None

    def cmd_save(self, rest):
        if not rest:
            raise ConsoleError("save needs a file path")
        self.bench.store.save(rest)

    def cmd_fixtures(self, rest):
        words = rest.split()
        if len(words) < 2 or words[0] != "load" or words[1] not in ("erd", "expr"):
            raise ConsoleError("usage: fixtures load {erd|expr} [mirrored]")
        self.bench = Workbench()
        self.selection = None
        if words[1] == "erd":
            fixtures.build_erd(self.bench)
        else:
            fixtures.build_expression(self.bench, mirrored="mirrored" in words[2:])

    def cmd_select(self, rest):
        if not rest:
            raise ConsoleError("select needs an element reference")
        self.selection = self.resolve_ref(rest)

    def cmd_eval(self, rest):
        if not rest:
            raise ConsoleError("eval needs an expression")
        element = self.selection
        m = re.match(r"^(\S+):\s+(.*)$", rest, re.S)
        source = rest
        if m:
            try:
                element = self.resolve_ref(m.group(1))
                source = m.group(2)
            except KernelError:
                element = self.selection
                source = rest
        value = self.bench.eval(source, element)
        self.print(format_value(value))

    def cmd_set(self, rest):
        target, _, literal = rest.partition(" ")
        if not literal or "." not in target:
            raise ConsoleError("usage: set <element>.<feature> <value>")
        ref, _, feature = target.rpartition(".")
        element = self.resolve_ref(ref)
        value = self.bench.eval(literal.strip())
        self.bench.set_feature(element, feature, value)

    def cmd_drag(self, rest):
        words = rest.split()
        if len(words) != 3:
            raise ConsoleError("usage: drag <element> <x> <y>")
        element = self.resolve_ref(words[0])
        x, y = float(words[1]), float(words[2])
        self.bench.drag(element, [(x, y)])
        info = self.bench.store.node(element)
        self.print(f"moved {words[0]} to ({format_value(info.x)}, {format_value(info.y)})")

    def cmd_undo(self, rest):
        self.bench.undo()

    def cmd_redo(self, rest):
        self.bench.redo()

    def cmd_trace(self, rest):
        if rest == "on":
            self.bench.engine.trace_sink = self.print
        elif rest == "off":
            self.bench.engine.trace_sink = None
        else:
            raise ConsoleError("usage: trace on|off")

    def cmd_render(self, rest):
        args = _parse_flags(rest, {"--out": str, "--level": int, "--grid": str,
                                   "--viewpoint": str})
        model = self.current_model()
        if args.get("--level") is not None:
            self.bench.set_state(model, "level", args["--level"])
        if args.get("--grid") is not None:
            if args["--grid"] not in ("on", "off"):
                raise ConsoleError("--grid takes on|off")
            self.bench.set_state(model, "grid", args["--grid"] == "on")
        viewpoint = None
        if args.get("--viewpoint"):
            viewpoint = self.bench.store.viewpoint(args["--viewpoint"])
        svg = self.bench.render_svg(model, viewpoint)
        if args.get("--out"):
            with open(args["--out"], "w", encoding="utf-8") as fh:
                fh.write(svg)
        else:
            self.print(svg.rstrip("\n"))

    def cmd_validate(self, rest):
        args = _parse_flags(rest, {"--report": str, "--strict": bool})
        markers = self.bench.validate(self.current_model())
        for m in markers:
            self.print(f"{m.severity} {self.element_path(m.elementId)} {m.sourceRule}: {m.message}")
        if not markers:
            self.print("no findings")
        if args.get("--report"):
            report = [
                {"element": self.element_path(m.elementId), "elementId": m.elementId,
                 "severity": m.severity, "rule": m.sourceRule, "message": m.message}
                for m in markers
            ]
            with open(args["--report"], "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=1, sort_keys=True)
                fh.write("\n")
        if args.get("--strict") and any(m.severity == "error" for m in markers):
            self.exit_code = 2

    def cmd_serve(self, rest):
        args = _parse_flags(rest, {"--port": int, "--data-dir": str, "--secret": str})
        from .service import DEFAULT_SECRET, ProjectRepository, create_app

        repo = ProjectRepository(args.get("--data-dir"))
        name = "project"
        if self.bench.store.models:
            name = self.bench.store.resolve(self.bench.store.models[0]).name
        rec = repo.create(name, self.bench.store.serialize())
        secret = args.get("--secret") or DEFAULT_SECRET
        app = create_app(repo, secret)
        port = args.get("--port") or 8000
        self.print(f"serving project {rec.projectId} on port {port}")
        import uvicorn

        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")

    def cmd_viewpoints(self, rest):
        for vp in self.bench.store.viewpoints:
            marker = "*" if vp.get("isDefault") else " "
            self.print(f"{marker} {vp['id']} ({len(vp.get('views', []))} views)")

    def cmd_quit(self, rest):
        self.running = False

    cmd_exit = cmd_quit

    def cmd_help(self, rest):
        self.print(
            "commands: new | load <file> | save <file> | fixtures load {erd|expr} "
            "[mirrored] | select <ref> | eval [<ref>:] <expr> | set <ref>.<feature> "
            "<value> | drag <ref> <x> <y> | render [--out f] [--level n] "
            "[--grid on|off] [--viewpoint id] | validate [--report f] [--strict] | "
            "undo | redo | trace on|off | viewpoints | serve [--port n] | quit"
        )


def _parse_flags(rest: str, spec: dict) -> dict:
    words = rest.split()
    out = {}
    i = 0
    while i < len(words):
        word = words[i]
        if word not in spec:
            raise ConsoleError(f"unknown flag '{word}'")
        if spec[word] is bool:
            out[word] = True
            i += 1
            continue
        if i + 1 >= len(words):
            raise ConsoleError(f"flag '{word}' needs a value")
        raw = words[i + 1]
        try:
            out[word] = spec[word](raw)
        except ValueError as err:
            raise ConsoleError(f"bad value for '{word}': {raw}") from err
        i += 2
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modelbench",
        description="Reflective model-workbench console.",
    )
    parser.add_argument("script", nargs="?", help="command script (stdin when omitted)")
    args = parser.parse_args(argv)

    console = Console()
    if args.script:
        with open(args.script, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        interactive = False
    else:
        lines = None
        interactive = sys.stdin.isatty()

    if lines is not None:
        for line in lines:
            code = console.execute(line)
            if code != 0:
                return code
            if not console.running:
                break
        return console.exit_code

    if interactive:
        console.print("modelbench console; 'help' lists commands, 'quit' leaves")
    while console.running:
        if interactive:
            print("> ", end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            break
        code = console.execute(line)
        if code != 0 and not interactive:
            return code
    return console.exit_code


if __name__ == "__main__":
    sys.exit(main())
