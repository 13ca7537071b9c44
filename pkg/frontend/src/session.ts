/**
 * Live editing session over the collaboration socket.
 *
 * The session keeps the last authoritative render tree from the service and
 * a queue of optimistic gestures layered on top for immediate feedback. An
 * incoming op or resync replaces the authoritative tree; a resync (the
 * service rejecting an op) also rolls every optimistic echo back.
 */

import type {
  OpId,
  RenderNode,
  Transaction,
  WireMessage,
} from "./protocol.js";
import { wireMessage } from "./protocol.js";
import type { Gesture } from "./gestures.js";
import { buildTransaction } from "./gestures.js";

export interface Socket {
  send(text: string): void;
  onMessage(handler: (text: string) => void): void;
  close(): void;
}

interface Pending {
  opId: OpId;
  gesture: Gesture;
}

export interface SessionEvents {
  change?: () => void;
  resync?: (reason: string) => void;
  presence?: (members: string[]) => void;
}

export class EditorSession {
  readonly sessionId: string;
  readonly projectId: string;
  revision = 0;
  sequence = 0;
  resyncCount = 0;
  private counter = 0;
  private serverTree: RenderNode | null = null;
  private renderSequence = 0;
  private pending: Pending[] = [];
  private acked = new Map<number, number>(); // op counter -> assigned sequence
  private events: SessionEvents;
  private joinResolve: (() => void) | null = null;

  constructor(
    private socket: Socket,
    projectId: string,
    sessionId: string,
    private token: string,
    events: SessionEvents = {},
  ) {
    this.projectId = projectId;
    this.sessionId = sessionId;
    this.events = events;
    socket.onMessage((text) => this.handle(JSON.parse(text) as WireMessage));
  }

  join(): Promise<void> {
    const done = new Promise<void>((resolve) => {
      this.joinResolve = resolve;
    });
    this.socket.send(
      JSON.stringify(
        wireMessage("join", this.projectId, {
          token: this.token,
          session: this.sessionId,
        }),
      ),
    );
    return done;
  }

  leave(): void {
    this.socket.send(JSON.stringify(wireMessage("leave", this.projectId, {})));
    this.socket.close();
  }

  /** The on-screen tree: authoritative render plus optimistic echoes. */
  tree(): RenderNode | null {
    if (this.serverTree === null) return null;
    const clone = JSON.parse(JSON.stringify(this.serverTree)) as RenderNode;
    for (const p of this.pending) {
      p.gesture.patch(clone);
    }
    return clone;
  }

  submit(gesture: Gesture): OpId {
    this.counter += 1;
    const opId: OpId = { session: this.sessionId, counter: this.counter };
    const transaction: Transaction = buildTransaction(this.sessionId, gesture);
    this.pending.push({ opId, gesture });
    this.socket.send(
      JSON.stringify(
        wireMessage("op", this.projectId, {
          opId,
          baseRevision: this.revision,
          transaction,
        }),
      ),
    );
    this.events.change?.();
    return opId;
  }

  /** Retransmit an op verbatim (the service acks it with its original sequence). */
  resend(opId: OpId, transaction: Transaction): void {
    this.socket.send(
      JSON.stringify(
        wireMessage("op", this.projectId, {
          opId,
          baseRevision: this.revision,
          transaction,
        }),
      ),
    );
  }

  private handle(msg: WireMessage): void {
    if (msg.kind === "joined") {
      const payload = msg.payload as {
        revision: number;
        render: RenderNode | null;
      };
      this.revision = payload.revision;
      this.sequence = msg.sequence ?? 0;
      this.serverTree = payload.render;
      this.renderSequence = this.sequence;
      this.joinResolve?.();
      this.joinResolve = null;
      this.events.change?.();
      return;
    }
    if (msg.kind === "op") {
      const payload = msg.payload as {
        revision: number;
        render?: RenderNode | null;
      };
      this.revision = payload.revision;
      this.sequence = msg.sequence ?? this.sequence;
      if (payload.render) {
        this.serverTree = payload.render;
        this.renderSequence = this.sequence;
        this.prune();
      }
      this.events.change?.();
      return;
    }
    if (msg.kind === "ack") {
      const payload = msg.payload as { opId?: OpId };
      if (payload.opId && msg.sequence !== null) {
        this.acked.set(payload.opId.counter, msg.sequence);
        this.prune();
        this.events.change?.();
      }
      return;
    }
    if (msg.kind === "resync") {
      const payload = msg.payload as {
        revision: number;
        render: RenderNode | null;
        reason?: string;
      };
      this.resyncCount += 1;
      this.revision = payload.revision;
      this.sequence = msg.sequence ?? this.sequence;
      this.serverTree = payload.render;
      this.renderSequence = this.sequence;
      this.pending = []; // roll back every optimistic echo
      this.events.resync?.(payload.reason ?? "");
      this.events.change?.();
      return;
    }
    if (msg.kind === "presence") {
      const payload = msg.payload as { members?: string[] };
      this.events.presence?.(payload.members ?? []);
    }
  }

  /** Drop echoes whose op the authoritative render already covers. */
  private prune(): void {
    this.pending = this.pending.filter((p) => {
      const seq = this.acked.get(p.opId.counter);
      return !(seq !== undefined && seq <= this.renderSequence);
    });
  }
}
