"""Project repository and real-time collaboration service.

The repository stores project records (one canonical document per project,
optionally persisted as a file each). Rooms wrap one authoritative workbench
per project: client transactions are applied in arrival order, rejected
with a resync when they no longer apply, and every committed transaction
(including rule-cascade and validation follow-ups) is appended to the room's
op log and broadcast to all members.

Wire protocol: one JSON WireMessage per text frame,
``{"kind", "room", "sequence", "payload"}`` with kinds
join | joined | op | ack | resync | presence | leave. Ops carry
``{"opId": {"session", "counter"}, "baseRevision", "transaction"}``;
retransmitted opIds are acknowledged with their original sequence and not
re-applied.
"""

from __future__ import annotations

import asyncio
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Request, WebSocket
from fastapi.responses import PlainTextResponse
from starlette.websockets import WebSocketDisconnect

from .errors import KernelError, NotFoundError, StaleRevisionError
from .store import ProjectStore
from .views import render
from .workbench import Workbench

DEFAULT_SECRET = "dev-secret"


@dataclass
class ProjectRecord:
    projectId: str
    name: str
    owner: str
    document: str
    revision: int = 0
    settings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "projectId": self.projectId,
            "name": self.name,
            "owner": self.owner,
            "revision": self.revision,
        }


class ProjectRepository:
    """Project CRUD with optional one-file-per-project persistence."""

    def __init__(self, data_dir: str | None = None):
        self.data_dir = Path(data_dir) if data_dir else None
        self.records: dict = {}
        self._counter = 0
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._load_existing()

    def _load_existing(self):
        for path in sorted(self.data_dir.glob("*.project.json")):
            wrapper = json.loads(path.read_text(encoding="utf-8"))
            rec = ProjectRecord(**wrapper)
            self.records[rec.projectId] = rec
            m = re.match(r"^p(\d+)$", rec.projectId)
            if m:
                self._counter = max(self._counter, int(m.group(1)))

    def create(self, name: str, document: str | None = None, owner: str = "anonymous",
               settings: dict | None = None) -> ProjectRecord:
        self._counter += 1
        pid = f"p{self._counter}"
        doc = document if document is not None else ProjectStore().serialize()
        rec = ProjectRecord(pid, name, owner, doc, 0, dict(settings or {}))
        self.records[pid] = rec
        self._persist(rec)
        return rec

    def get(self, project_id: str) -> ProjectRecord:
        rec = self.records.get(project_id)
        if rec is None:
            raise NotFoundError(f"no project '{project_id}'")
        return rec

    def list(self) -> list:
        return [self.records[pid].summary() for pid in sorted(self.records)]

    def save(self, project_id: str, document: str, base_revision: int) -> ProjectRecord:
        rec = self.get(project_id)
        if base_revision != rec.revision:
            raise StaleRevisionError(
                f"save based on revision {base_revision}, current is {rec.revision}"
            )
        rec.document = document
        rec.revision += 1
        self._persist(rec)
        return rec

    def write_through(self, project_id: str, document: str) -> ProjectRecord:
        """Room-side persistence: one revision bump per transaction batch."""
        rec = self.get(project_id)
        rec.document = document
        rec.revision += 1
        self._persist(rec)
        return rec

    def _persist(self, rec: ProjectRecord):
        if not self.data_dir:
            return
        path = self.data_dir / f"{rec.projectId}.project.json"
        path.write_text(json.dumps(rec.__dict__, sort_keys=True, indent=1) + "\n",
                        encoding="utf-8")


def wire_message(kind: str, room: str | None = None, sequence: int | None = None,
                 payload: dict | None = None) -> dict:
    return {"kind": kind, "room": room, "sequence": sequence, "payload": payload or {}}


class Room:
    """One collaborative session per project, with a server-ordered op log."""

    def __init__(self, repo: ProjectRepository, project_id: str):
        record = repo.get(project_id)
        self.repo = repo
        self.project_id = project_id
        self.room_id = f"room-{project_id}"
        store = ProjectStore.load(record.document, session="server", id_prefix="srv-")
        self.bench = Workbench(store)
        self.revision = record.revision
        self.op_log: list = []  # (sequence, transaction record)
        self.members: dict = {}  # session id -> callable(message dict)
        self.known_ops: dict = {}  # (session, counter) -> assigned sequence

    @property
    def sequence(self) -> int:
        return len(self.op_log)

    def _snapshot_payload(self) -> dict:
        model = self.bench.store.models[0] if self.bench.store.models else None
        tree = render(self.bench.store, model).to_record() if model else None
        return {
            "snapshot": self.bench.store.serialize(),
            "revision": self.revision,
            "render": tree,
        }

    def join(self, session_id: str, send) -> dict:
        self.members[session_id] = send
        joined = wire_message("joined", self.room_id, self.sequence, self._snapshot_payload())
        send(joined)
        self._broadcast_presence()
        return joined

    def leave(self, session_id: str):
        self.members.pop(session_id, None)
        self._broadcast_presence()

    def _broadcast_presence(self):
        msg = wire_message(
            "presence", self.room_id, self.sequence,
            {"members": sorted(self.members)},
        )
        for send in list(self.members.values()):
            send(msg)

    def submit(self, session_id: str, payload: dict):
        """Apply one client op; ack, broadcast, or reject with a resync."""
        if session_id not in self.members:
            raise NotFoundError(f"session '{session_id}' has not joined {self.room_id}")
        op_id = payload.get("opId") or {}
        key = (op_id.get("session"), op_id.get("counter"))
        send = self.members[session_id]
        if key in self.known_ops:
            send(wire_message("ack", self.room_id, self.known_ops[key], {"opId": op_id}))
            return
        tx_record = payload["transaction"]
        log_before = len(self.bench.store.change_log)
        try:
            self.bench.apply_remote(tx_record)
        except KernelError as err:
            resync = self._snapshot_payload()
            resync["reason"] = str(err)
            resync["opId"] = op_id
            send(wire_message("resync", self.room_id, self.sequence, resync))
            return
        batch = self.bench.store.change_log[log_before:]
        self.revision += 1
        ack_seq = None
        for i, tx in enumerate(batch):
            seq = self.sequence + 1
            rec = tx.record() if hasattr(tx, "record") else tx
            self.op_log.append((seq, rec))
            if i == 0:
                ack_seq = seq
                self.known_ops[key] = seq
            msg_payload = {"transaction": rec, "revision": self.revision}
            if i == len(batch) - 1:
                model = self.bench.store.models[0] if self.bench.store.models else None
                msg_payload["render"] = (
                    render(self.bench.store, model).to_record() if model else None
                )
            msg = wire_message("op", self.room_id, seq, msg_payload)
            for member_send in list(self.members.values()):
                member_send(msg)
        send(wire_message("ack", self.room_id, ack_seq, {"opId": op_id}))
        self.repo.write_through(self.project_id, self.bench.store.serialize())


class CollabService:
    """Rooms by project; the HTTP/socket app drives this directly."""

    def __init__(self, repo: ProjectRepository):
        self.repo = repo
        self.rooms: dict = {}

    def room(self, project_id: str) -> Room:
        self.repo.get(project_id)
        if project_id not in self.rooms:
            self.rooms[project_id] = Room(self.repo, project_id)
        return self.rooms[project_id]


def create_app(repo: ProjectRepository | None = None, secret: str = DEFAULT_SECRET):
    repo = repo if repo is not None else ProjectRepository()
    service = CollabService(repo)
    app = FastAPI(title="modelbench collaboration service")
    app.state.service = service
    app.state.secret = secret

    def authorized(x_auth_token: str | None = Header(default=None)):
        if x_auth_token != secret:
            raise HTTPException(status_code=401, detail="bad or missing token")

    @app.post("/projects", dependencies=[Depends(authorized)])
    def create_project(body: dict):
        name = body.get("name")
        if not name:
            raise HTTPException(status_code=422, detail="project name required")
        rec = repo.create(name, body.get("document"), body.get("owner", "anonymous"),
                          body.get("settings"))
        return rec.summary()

    @app.get("/projects", dependencies=[Depends(authorized)])
    def list_projects():
        return repo.list()

    @app.get("/projects/{project_id}", dependencies=[Depends(authorized)])
    def get_project(project_id: str):
        try:
            rec = repo.get(project_id)
        except NotFoundError as err:
            raise HTTPException(status_code=404, detail=str(err)) from err
        return PlainTextResponse(rec.document, headers={"x-revision": str(rec.revision)})

    @app.put("/projects/{project_id}", dependencies=[Depends(authorized)])
    async def put_project(project_id: str, request: Request,
                          x_base_revision: int | None = Header(default=None)):
        if x_base_revision is None:
            raise HTTPException(status_code=428, detail="x-base-revision header required")
        document = (await request.body()).decode("utf-8")
        try:
            rec = repo.save(project_id, document, x_base_revision)
        except NotFoundError as err:
            raise HTTPException(status_code=404, detail=str(err)) from err
        except StaleRevisionError as err:
            raise HTTPException(status_code=409, detail=str(err)) from err
        return rec.summary()

    @app.websocket("/socket")
    async def socket(ws: WebSocket):
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue()

        async def pump():
            while True:
                msg = await queue.get()
                await ws.send_text(json.dumps(msg, sort_keys=True))

        pump_task = asyncio.create_task(pump())
        session_id = None
        room = None
        try:
            while True:
                frame = await ws.receive_text()
                msg = json.loads(frame)
                kind = msg.get("kind")
                payload = msg.get("payload") or {}
                if kind == "join":
                    if payload.get("token") != secret:
                        await ws.close(code=1008, reason="bad token")
                        return
                    session_id = payload.get("session")
                    project_id = msg.get("room")
                    try:
                        room = service.room(project_id)
                    except NotFoundError:
                        await ws.close(code=1008, reason="unknown project")
                        return
                    room.join(session_id, queue.put_nowait)
                elif kind == "op":
                    if room is None or session_id is None:
                        await ws.close(code=1008, reason="op before join")
                        return
                    room.submit(session_id, payload)
                elif kind == "leave":
                    break
                # let queued sends drain before the next read
                while not queue.empty():
                    await asyncio.sleep(0)
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            if room is not None and session_id is not None:
                room.leave(session_id)

    return app
