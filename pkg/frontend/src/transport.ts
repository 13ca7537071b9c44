/**
 * Socket adapters. The session only needs send/onMessage/close, so tests
 * inject fakes, browsers use the native WebSocket, and node tooling uses
 * the ws package.
 */

import type { Socket } from "./session.js";

interface WebSocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: { data?: unknown }) => void): void;
}

export function fromWebSocket(ws: WebSocketLike): Socket {
  let handler: ((text: string) => void) | null = null;
  ws.addEventListener("message", (ev) => {
    if (handler && ev.data != null) {
      // node's ws delivers Buffers for text frames in some configurations
      handler(typeof ev.data === "string" ? ev.data : String(ev.data));
    }
  });
  return {
    send: (text) => ws.send(text),
    onMessage: (h) => {
      handler = h;
    },
    close: () => ws.close(),
  };
}

export function openBrowserSocket(serverUrl: string): Promise<Socket> {
  const url = serverUrl.replace(/^http/, "ws").replace(/\/$/, "") + "/socket";
  const ws = new WebSocket(url);
  return new Promise((resolve, reject) => {
    ws.addEventListener("open", () => resolve(fromWebSocket(ws)));
    ws.addEventListener("error", () => reject(new Error(`cannot reach ${url}`)));
  });
}
