/**
 * In-memory test double of the collaboration service room protocol.
 *
 * It speaks the same frames as the real service (joined/op/ack/resync/
 * presence) and can be scripted to append follow-up transactions, such as a
 * snap after a layout change, so session and gesture behavior is testable
 * without a running kernel.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import type {
  OpPayload,
  PrimitiveOp,
  RenderNode,
  Transaction,
  WireMessage,
} from "../src/protocol.js";
import { findNode, wireMessage } from "../src/protocol.js";
import type { Socket } from "../src/session.js";

type Frame = WireMessage;

export class FakeSocket implements Socket {
  sent: Frame[] = [];
  private handler: ((text: string) => void) | null = null;
  closed = false;

  constructor(private server: FakeServer) {}

  send(text: string): void {
    const msg = JSON.parse(text) as Frame;
    this.sent.push(msg);
    this.server.receive(this, msg);
  }

  onMessage(handler: (text: string) => void): void {
    this.handler = handler;
  }

  close(): void {
    this.closed = true;
    this.server.drop(this);
  }

  deliver(msg: Frame): void {
    this.handler?.(JSON.stringify(msg));
  }
}

export interface FakeServerOptions {
  /** Snap accepted layout ops to the 15-unit grid, like the kernel rule. */
  gridSnap?: boolean;
  /** Element ids whose ops are rejected with a resync. */
  rejectTargets?: string[];
}

export class FakeServer {
  revision = 0;
  sequence = 0;
  tree: RenderNode;
  roomId = "room-p1";
  log: Array<[number, Transaction]> = [];
  private members = new Map<FakeSocket, string>();
  private known = new Map<string, number>();
  private options: FakeServerOptions;

  constructor(tree: RenderNode, options: FakeServerOptions = {}) {
    this.tree = JSON.parse(JSON.stringify(tree)) as RenderNode;
    this.options = options;
  }

  connect(): FakeSocket {
    return new FakeSocket(this);
  }

  drop(socket: FakeSocket): void {
    this.members.delete(socket);
    this.broadcastPresence();
  }

  receive(socket: FakeSocket, msg: Frame): void {
    if (msg.kind === "join") {
      const session = (msg.payload as { session: string }).session;
      this.members.set(socket, session);
      socket.deliver(
        wireMessage(
          "joined",
          this.roomId,
          { snapshot: "{}", revision: this.revision, render: this.tree },
          this.sequence,
        ),
      );
      this.broadcastPresence();
      return;
    }
    if (msg.kind === "op") {
      this.submit(socket, msg.payload as unknown as OpPayload);
      return;
    }
    if (msg.kind === "leave") {
      this.drop(socket);
    }
  }

  private submit(socket: FakeSocket, payload: OpPayload): void {
    const key = `${payload.opId.session}:${payload.opId.counter}`;
    const prior = this.known.get(key);
    if (prior !== undefined) {
      socket.deliver(wireMessage("ack", this.roomId, { opId: payload.opId }, prior));
      return;
    }
    const tx = payload.transaction;
    const rejected = tx.ops.some(
      (op) => this.options.rejectTargets?.includes(String(op.id ?? "")),
    );
    if (rejected) {
      socket.deliver(
        wireMessage(
          "resync",
          this.roomId,
          {
            snapshot: "{}",
            revision: this.revision,
            render: this.tree,
            reason: "op no longer applies",
            opId: payload.opId,
          },
          this.sequence,
        ),
      );
      return;
    }
    const batch: Transaction[] = [tx];
    for (const op of tx.ops) {
      this.applyOp(op);
    }
    const follow = this.followUps(tx);
    batch.push(...follow);
    this.revision += 1;
    let ackSeq = 0;
    batch.forEach((entry, i) => {
      this.sequence += 1;
      if (i === 0) {
        ackSeq = this.sequence;
        this.known.set(key, this.sequence);
      }
      this.log.push([this.sequence, entry]);
      const framePayload: Record<string, unknown> = {
        transaction: entry,
        revision: this.revision,
      };
      if (i === batch.length - 1) {
        framePayload.render = this.tree;
      }
      const frame = wireMessage("op", this.roomId, framePayload, this.sequence);
      for (const member of this.members.keys()) {
        member.deliver(frame);
      }
    });
    socket.deliver(wireMessage("ack", this.roomId, { opId: payload.opId }, ackSeq));
  }

  private applyOp(op: PrimitiveOp): void {
    if (op.op === "setLayout") {
      const node = findNode(this.tree, String(op.id));
      if (node) {
        node.x = Number(op.x);
        node.y = Number(op.y);
        node.width = Number(op.width);
        node.height = Number(op.height);
      }
    }
    if (op.op === "setValue") {
      for (const node of walk(this.tree)) {
        const aff = node.affordance as { valueId?: string } | undefined;
        if (aff?.valueId === op.id) {
          node.text = String((op.values as unknown[])[0]);
        }
      }
    }
  }

  private followUps(tx: Transaction): Transaction[] {
    if (!this.options.gridSnap) return [];
    const out: Transaction[] = [];
    for (const op of tx.ops) {
      if (op.op !== "setLayout") continue;
      const snap = (v: number) => Math.floor(v / 15 + 0.5) * 15;
      const sx = snap(Number(op.x));
      const sy = snap(Number(op.y));
      if (sx === op.x && sy === op.y) continue;
      const snapped: PrimitiveOp = { ...op, x: sx, y: sy };
      this.applyOp(snapped);
      out.push({
        id: `srv-t${this.sequence + out.length + 1}`,
        author: "server",
        group: tx.group,
        ops: [snapped],
        inverseOps: [],
      });
    }
    return out;
  }

  /** Scripted server-side change (another user, validation, and so on). */
  pushServerTransaction(mutate: (tree: RenderNode) => void, tx?: Transaction): void {
    mutate(this.tree);
    this.revision += 1;
    this.sequence += 1;
    const entry: Transaction = tx ?? {
      id: `srv-t${this.sequence}`,
      author: "server",
      group: `srv-t${this.sequence}`,
      ops: [],
      inverseOps: [],
    };
    this.log.push([this.sequence, entry]);
    const frame = wireMessage(
      "op",
      this.roomId,
      { transaction: entry, revision: this.revision, render: this.tree },
      this.sequence,
    );
    for (const member of this.members.keys()) {
      member.deliver(frame);
    }
  }

  private broadcastPresence(): void {
    const frame = wireMessage(
      "presence",
      this.roomId,
      { members: [...this.members.values()].sort() },
      this.sequence,
    );
    for (const member of this.members.keys()) {
      member.deliver(frame);
    }
  }
}

function* walk(node: RenderNode): Generator<RenderNode> {
  yield node;
  for (const child of node.children ?? []) {
    yield* walk(child);
  }
}

export function loadFixture(name: string): RenderNode {
  const path = fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
  return JSON.parse(readFileSync(path, "utf-8")) as RenderNode;
}

export function loadFixtureText(name: string): string {
  const path = fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));
  return readFileSync(path, "utf-8");
}
