/** Test doubles: a scriptable fetch and a push-from-the-test feedback source. */

import type { EventSourceLike, FetchLike } from "../src/api.js";
import type { FeedbackDoc } from "../src/types.js";

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Records calls; replies via the supplied handler (default: echo ok). */
export function makeStubFetch(
  handler: (call: RecordedCall) => Promise<Response> | Response = () => jsonResponse({ ok: true }),
): { fetchImpl: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    calls.push(call);
    return handler(call);
  };
  return { fetchImpl, calls };
}

export class StubEventSource implements EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null = null;
  closed = false;

  emit(doc: FeedbackDoc): void {
    this.onmessage?.({ data: JSON.stringify(doc) });
  }

  close(): void {
    this.closed = true;
  }
}
