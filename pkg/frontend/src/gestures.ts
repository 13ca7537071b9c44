/**
 * Gesture-to-transaction translation.
 *
 * Every user interaction becomes one primitive transaction; semantics such
 * as grid snapping, cascading recomputation, and validation happen on the
 * service, which broadcasts the resulting transactions back. Each builder
 * also returns an optimistic patch: a local echo applied to the on-screen
 * tree until the authoritative render arrives.
 */

import type {
  ControlAffordance,
  InputAffordance,
  PrimitiveOp,
  RenderNode,
  Transaction,
} from "./protocol.js";
import { findNode } from "./protocol.js";

export interface Gesture {
  ops: PrimitiveOp[];
  /** Local echo; mutates a cloned render tree. */
  patch: (tree: RenderNode) => void;
}

export class GestureError extends Error {}

export function dragElement(tree: RenderNode, elementId: string, x: number, y: number): Gesture {
  const node = findNode(tree, elementId);
  if (!node) throw new GestureError(`no element '${elementId}' on the canvas`);
  const width = node.width ?? 0;
  const height = node.height ?? 0;
  return {
    ops: [{ op: "setLayout", id: elementId, x, y, width, height }],
    patch: (t) => {
      const n = findNode(t, elementId);
      if (n) {
        n.x = x;
        n.y = y;
      }
    },
  };
}

export function resizeElement(
  tree: RenderNode,
  elementId: string,
  width: number,
  height: number,
): Gesture {
  const node = findNode(tree, elementId);
  if (!node) throw new GestureError(`no element '${elementId}' on the canvas`);
  if (width < 0 || height < 0) throw new GestureError("extent must be non-negative");
  return {
    ops: [{ op: "setLayout", id: elementId, x: node.x ?? 0, y: node.y ?? 0, width, height }],
    patch: (t) => {
      const n = findNode(t, elementId);
      if (n) {
        n.width = width;
        n.height = height;
      }
    },
  };
}

function parseTyped(aff: InputAffordance, raw: string): unknown {
  const type = aff.attrType ?? "string";
  if (type === "integer") {
    if (!/^-?\d+$/.test(raw)) throw new GestureError(`'${raw}' is not an integer`);
    return parseInt(raw, 10);
  }
  if (type === "real") {
    const v = Number(raw);
    if (!Number.isFinite(v)) throw new GestureError(`'${raw}' is not a number`);
    return /^-?\d+$/.test(raw) ? parseInt(raw, 10) : v;
  }
  if (type === "boolean") {
    if (raw !== "true" && raw !== "false") throw new GestureError(`'${raw}' is not a boolean`);
    return raw === "true";
  }
  // strings and enum literals travel as-is; the service validates literals
  return raw;
}

export function editInput(aff: InputAffordance, raw: string): Gesture {
  if (aff.kind !== "input") throw new GestureError("editInput needs an input affordance");
  const value = parseTyped(aff, raw);
  return {
    ops: [{ op: "setValue", id: aff.valueId, values: [value], owner: aff.element }],
    patch: (t) => patchText(t, aff.valueId, raw),
  };
}

export function pickSelector(aff: InputAffordance, literal: string): Gesture {
  if (aff.kind !== "selector") throw new GestureError("pickSelector needs a selector affordance");
  if (aff.options && !aff.options.includes(literal)) {
    throw new GestureError(`'${literal}' is not one of ${aff.options.join(", ")}`);
  }
  return {
    ops: [{ op: "setValue", id: aff.valueId, values: [literal], owner: aff.element }],
    patch: (t) => patchText(t, aff.valueId, literal),
  };
}

export function toggleControl(aff: ControlAffordance): Gesture {
  if (aff.kind !== "toggle") throw new GestureError("toggleControl needs a toggle affordance");
  const next = !(aff.value ?? false);
  return {
    ops: [{ op: "setState", id: aff.scope, key: aff.name, value: next }],
    patch: () => undefined,
  };
}

export function slideControl(aff: ControlAffordance, value: number): Gesture {
  if (aff.kind !== "slider") throw new GestureError("slideControl needs a slider affordance");
  if (!Number.isInteger(value)) throw new GestureError("slider values are integers");
  if (value < (aff.min ?? -Infinity) || value > (aff.max ?? Infinity)) {
    throw new GestureError(
      `slider '${aff.name}' accepts ${aff.min}..${aff.max}, got ${value}`,
    );
  }
  return {
    ops: [{ op: "setState", id: aff.scope, key: aff.name, value }],
    patch: () => undefined,
  };
}

function patchText(tree: RenderNode, valueId: string, text: string): void {
  for (const node of walk(tree)) {
    const aff = node.affordance as InputAffordance | undefined;
    if (aff && "valueId" in (aff as object) && aff.valueId === valueId) {
      node.text = text;
    }
  }
}

function* walk(node: RenderNode): Generator<RenderNode> {
  yield node;
  for (const child of node.children ?? []) {
    yield* walk(child);
  }
}

let txCounter = 0;

export function buildTransaction(session: string, gesture: Gesture): Transaction {
  txCounter += 1;
  const id = `${session}-t${txCounter}`;
  return { id, author: session, group: id, ops: gesture.ops, inverseOps: [] };
}

/** Test hook: deterministic transaction ids per run. */
export function resetTransactionCounter(): void {
  txCounter = 0;
}
