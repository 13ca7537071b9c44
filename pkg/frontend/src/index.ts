/**
 * Thin projectional editing client.
 *
 * The client holds no model semantics: it renders the tree the service
 * supplies and translates gestures into primitive transactions. Everything
 * else (snapping, update cascades, validation markers) arrives as further
 * broadcast transactions and refreshed render trees.
 */

export * from "./protocol.js";
export * from "./renderer.js";
export * from "./gestures.js";
export { EditorSession } from "./session.js";
export type { Socket, SessionEvents } from "./session.js";
export { fromWebSocket, openBrowserSocket } from "./transport.js";

import { EditorSession } from "./session.js";
import type { SessionEvents } from "./session.js";
import { openBrowserSocket } from "./transport.js";

export interface ConnectOptions {
  session?: string;
  token?: string;
  events?: SessionEvents;
}

/** Join a project's room from a browser and return the live session. */
export async function connect(
  serverUrl: string,
  projectId: string,
  options: ConnectOptions = {},
): Promise<EditorSession> {
  const socket = await openBrowserSocket(serverUrl);
  const session = new EditorSession(
    socket,
    projectId,
    options.session ?? `web-${Math.random().toString(36).slice(2, 8)}`,
    options.token ?? "dev-secret",
    options.events ?? {},
  );
  await session.join();
  return session;
}
