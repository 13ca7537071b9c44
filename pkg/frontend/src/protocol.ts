/**
 * Wire protocol and shared record shapes.
 *
 * One JSON WireMessage per socket text frame. The client never interprets
 * model semantics: it applies whatever render tree the service sends and
 * emits primitive transactions built from gestures.
 */

export type WireKind =
  | "join"
  | "joined"
  | "op"
  | "ack"
  | "resync"
  | "presence"
  | "leave";

export interface WireMessage {
  kind: WireKind;
  room: string | null;
  sequence: number | null;
  payload: Record<string, unknown>;
}

export interface OpId {
  session: string;
  counter: number;
}

export type PrimitiveOp = Record<string, unknown> & { op: string };

export interface Transaction {
  id: string;
  author: string;
  group: string;
  ops: PrimitiveOp[];
  inverseOps: PrimitiveOp[];
}

export interface OpPayload {
  opId: OpId;
  baseRevision: number;
  transaction: Transaction;
}

/** Affordances attached to render nodes; each maps to one mutation path. */
export interface InputAffordance {
  kind: "input" | "selector";
  valueId: string;
  element: string;
  feature: string;
  attrType?: string;
  options?: string[];
}

export interface MoveAffordance {
  kind: "move";
  element: string;
}

export interface ControlAffordance {
  kind: "toggle" | "slider";
  name: string;
  scope: string;
  value?: unknown;
  min?: number;
  max?: number;
}

export type Affordance = InputAffordance | MoveAffordance | ControlAffordance;

/** Render tree node as serialized by the kernel (empty fields omitted). */
export interface RenderNode {
  kind: string;
  className?: string;
  elementId?: string;
  text?: string;
  x?: number;
  y?: number;
  width?: number;
  height?: number;
  affordance?: Affordance;
  points?: [number, number][];
  children?: RenderNode[];
}

export function wireMessage(
  kind: WireKind,
  room: string | null,
  payload: Record<string, unknown>,
  sequence: number | null = null,
): WireMessage {
  return { kind, room, sequence, payload };
}

export function* walk(node: RenderNode): Generator<RenderNode> {
  yield node;
  for (const child of node.children ?? []) {
    yield* walk(child);
  }
}

export function findNode(
  tree: RenderNode,
  elementId: string,
): RenderNode | undefined {
  for (const node of walk(tree)) {
    if (node.kind === "node" && node.elementId === elementId) {
      return node;
    }
  }
  return undefined;
}

export function findAffordance(
  tree: RenderNode,
  match: (aff: Affordance, node: RenderNode) => boolean,
): Affordance | undefined {
  for (const node of walk(tree)) {
    if (node.affordance && match(node.affordance, node)) {
      return node.affordance;
    }
  }
  return undefined;
}

/** Validation badges attached to an element by the service. */
export function markersOf(tree: RenderNode, elementId: string): RenderNode[] {
  const host = findNode(tree, elementId);
  if (!host) return [];
  return (host.children ?? []).filter((c) => c.kind === "marker");
}
