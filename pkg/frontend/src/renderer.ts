/**
 * Render-tree drawing.
 *
 * Produces the same SVG markup as the service's headless renderer, byte for
 * byte, so the client never re-derives geometry: what the kernel computed is
 * what appears on screen. Layout constants must match the service.
 */

import type { RenderNode } from "./protocol.js";

const LINE_HEIGHT = 16;
const ROW_INSET = 6;
const GRID_SPACING = 15;

function fmt(v: number): string {
  // integral reals print without a decimal point, like the service
  if (Number.isInteger(v)) return String(v);
  return String(v);
}

function escapeAttr(s: string): string {
  return (s || "").replace(/&/g, "&amp;").replace(/"/g, "&quot;").replace(/</g, "&lt;");
}

function escapeText(s: string): string {
  return (s || "").replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function* walkAll(node: RenderNode): Generator<RenderNode> {
  yield node;
  for (const child of node.children ?? []) {
    yield* walkAll(child);
  }
}

export function renderSvg(tree: RenderNode): string {
  let minX = 0;
  let minY = 0;
  let maxX = 400;
  let maxY = 300;
  for (const node of walkAll(tree)) {
    if ((node.kind === "node" || node.kind === "canvas") && node.x !== undefined) {
      minX = Math.min(minX, node.x);
      minY = Math.min(minY, node.y ?? 0);
      maxX = Math.max(maxX, node.x + (node.width ?? 0));
      maxY = Math.max(maxY, (node.y ?? 0) + (node.height ?? 0));
    }
    for (const [px, py] of node.points ?? []) {
      minX = Math.min(minX, px);
      minY = Math.min(minY, py);
      maxX = Math.max(maxX, px);
      maxY = Math.max(maxY, py);
    }
  }
  const width = maxX - minX + 40;
  const height = maxY - minY + 40;
  const gridOn = (tree.className ?? "").split(" ").includes("grid");
  const out: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${fmt(width)}" ` +
      `height="${fmt(height)}" viewBox="${fmt(minX - 20)} ${fmt(minY - 20)} ` +
      `${fmt(width)} ${fmt(height)}">`,
  ];
  if (gridOn) {
    out.push(
      `<defs><pattern id="grid-dots" width="${GRID_SPACING}" ` +
        `height="${GRID_SPACING}" patternUnits="userSpaceOnUse">` +
        `<circle cx="1" cy="1" r="1" fill="silver"/></pattern></defs>`,
    );
    out.push(
      `<rect x="${fmt(minX - 20)}" y="${fmt(minY - 20)}" width="${fmt(width)}" ` +
        `height="${fmt(height)}" fill="url(#grid-dots)"/>`,
    );
  }
  out.push(`<g class="canvas ${escapeAttr(tree.className ?? "")}">`);
  for (const child of tree.children ?? []) {
    svgNode(child, out);
  }
  out.push("</g>");
  out.push("</svg>");
  return out.join("\n") + "\n";
}

function svgNode(node: RenderNode, out: string[]): void {
  if (node.kind === "edge") {
    const [[x1, y1], [x2, y2]] = node.points as [number, number][];
    out.push(
      `<path class="edge ${escapeAttr(node.className ?? "")}" ` +
        `d="M ${fmt(x1)} ${fmt(y1)} L ${fmt(x2)} ${fmt(y2)}" ` +
        `stroke="black" fill="none"/>`,
    );
    return;
  }
  if (node.kind === "node") {
    const x = node.x ?? 0;
    const y = node.y ?? 0;
    const w = node.width ?? 0;
    const h = node.height ?? 0;
    out.push(
      `<g class="element ${escapeAttr(node.className ?? "")}" ` +
        `data-element="${node.elementId}">`,
    );
    out.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
        `fill="white" stroke="black"/>`,
    );
    const cursor = { y: y + LINE_HEIGHT };
    for (const child of node.children ?? []) {
      svgContent(child, out, x + ROW_INSET, cursor, node);
    }
    out.push("</g>");
    return;
  }
  const cursor = { y: LINE_HEIGHT };
  svgContent(node, out, 4, cursor, null);
}

function svgContent(
  node: RenderNode,
  out: string[],
  x: number,
  cursor: { y: number },
  parent: RenderNode | null,
): void {
  if (node.kind === "node" || node.kind === "edge") {
    svgNode(node, out);
    return;
  }
  if (node.kind === "marker") {
    let mx = x;
    let my = cursor.y;
    if (parent && parent.x !== undefined) {
      mx = parent.x + (parent.width ?? 0);
      my = parent.y ?? 0;
    }
    out.push(
      `<g class="marker ${escapeAttr(node.className ?? "")}">` +
        `<circle cx="${fmt(mx)}" cy="${fmt(my)}" r="7" fill="gold" stroke="black"/>` +
        `<title>${escapeText(node.text ?? "")}</title></g>`,
    );
    return;
  }
  const textKinds = ["text", "input", "selector", "toggle", "slider", "error"];
  if (textKinds.includes(node.kind)) {
    const cls = node.kind === "text" ? "text" : node.kind;
    out.push(
      `<text class="${cls}" x="${fmt(x)}" y="${fmt(cursor.y)}">` +
        `${escapeText(node.text ?? "")}</text>`,
    );
    cursor.y += LINE_HEIGHT;
    for (const child of node.children ?? []) {
      svgContent(child, out, x + 4, cursor, parent);
    }
    return;
  }
  for (const child of node.children ?? []) {
    svgContent(child, out, x + 4, cursor, parent);
  }
}
