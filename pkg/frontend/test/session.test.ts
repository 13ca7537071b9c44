import { beforeEach, describe, expect, it } from "vitest";

import { dragElement, resetTransactionCounter } from "../src/gestures.js";
import { findNode } from "../src/protocol.js";
import { EditorSession } from "../src/session.js";
import { FakeServer, loadFixture } from "./helpers.js";

const USER = "e18";

function makeSession(server: FakeServer, name: string, events = {}) {
  const socket = server.connect();
  const session = new EditorSession(socket, "p1", name, "dev-secret", events);
  return { socket, session };
}

beforeEach(() => resetTransactionCounter());

describe("session protocol", () => {
  it("joins, applies the snapshot, and tracks revision", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const { session } = makeSession(server, "c1");
    await session.join();
    expect(session.revision).toBe(0);
    const tree = session.tree()!;
    expect(findNode(tree, USER)).toBeDefined();
  });

  it("echoes a drag optimistically, then reconciles with the broadcast", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const { session } = makeSession(server, "c1");
    await session.join();
    const gesture = dragElement(session.tree()!, USER, 200, 210);
    session.submit(gesture);
    // FakeServer answers synchronously; the echo and the authoritative
    // render agree on the new position either way
    const node = findNode(session.tree()!, USER)!;
    expect([node.x, node.y]).toEqual([200, 210]);
    expect(session.revision).toBe(1);
    expect(session.sequence).toBe(1);
  });

  it("second session observes the first session's edit live", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const { session: s1 } = makeSession(server, "c1");
    const changes: string[] = [];
    const { session: s2 } = makeSession(server, "c2", {
      change: () => changes.push("change"),
    });
    await s1.join();
    await s2.join();
    s1.submit(dragElement(s1.tree()!, USER, 105, 90));
    const seen = findNode(s2.tree()!, USER)!;
    expect([seen.x, seen.y]).toEqual([105, 90]);
    expect(changes.length).toBeGreaterThan(0);
  });

  it("rolls optimistic echoes back on resync", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"), {
      rejectTargets: [USER],
    });
    const reasons: string[] = [];
    const { session } = makeSession(server, "c1", {
      resync: (reason: string) => reasons.push(reason),
    });
    await session.join();
    const before = findNode(session.tree()!, USER)!;
    session.submit(dragElement(session.tree()!, USER, 300, 300));
    expect(session.resyncCount).toBe(1);
    expect(reasons).toEqual(["op no longer applies"]);
    const after = findNode(session.tree()!, USER)!;
    expect([after.x, after.y]).toEqual([before.x, before.y]);
  });

  it("keeps pending echoes until the covering render arrives", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const { session } = makeSession(server, "c1");
    await session.join();
    session.submit(dragElement(session.tree()!, USER, 150, 150));
    // a later unrelated server change must not resurrect the old position
    server.pushServerTransaction((tree) => {
      const n = findNode(tree, "e33");
      if (n) n.x = 400;
    });
    const user = findNode(session.tree()!, USER)!;
    expect([user.x, user.y]).toEqual([150, 150]);
    const role = findNode(session.tree()!, "e33")!;
    expect(role.x).toBe(400);
  });

  it("tracks presence", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const members: string[][] = [];
    const { session: s1 } = makeSession(server, "c1", {
      presence: (m: string[]) => members.push(m),
    });
    await s1.join();
    const { session: s2 } = makeSession(server, "c2");
    await s2.join();
    expect(members.at(-1)).toEqual(["c1", "c2"]);
    s2.leave();
    expect(members.at(-1)).toEqual(["c1"]);
  });

  it("retransmission acks with the original sequence", async () => {
    const server = new FakeServer(loadFixture("erd_render.json"));
    const { socket, session } = makeSession(server, "c1");
    await session.join();
    const opId = session.submit(dragElement(session.tree()!, USER, 60, 60));
    const logLen = server.log.length;
    const sent = socket.sent.find((m) => m.kind === "op")!;
    session.resend(opId, (sent.payload as { transaction: never }).transaction);
    expect(server.log.length).toBe(logLen);
  });
});
