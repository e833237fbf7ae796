/** HTTP client for the trainer service.
 *
 * Event posts are serialized through a promise chain so user actions reach
 * the server in the order they happened (FIFO), even when responses lag.
 * The feedback stream is injectable: the browser uses EventSource, tests a stub.
 */

import type { FeedbackDoc, ReportDoc, SessionInfo } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface FeedbackSubscription {
  close(): void;
}

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ServiceClient {
  private postQueue: Promise<unknown> = Promise.resolve();

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private eventSourceFactory: EventSourceFactory = (url) =>
      new EventSource(url) as unknown as EventSourceLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const doc = await response.json();
    if (!response.ok) {
      throw new ServiceError(response.status, String((doc as { error?: string }).error ?? response.status));
    }
    return doc as T;
  }

  /** Serialize through the queue: strict user-action order on the wire. */
  private enqueue<T>(work: () => Promise<T>): Promise<T> {
    const next = this.postQueue.then(work, work);
    this.postQueue = next.catch(() => undefined);
    return next;
  }

  createSession(mode: string, trainee = "anon"): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { mode, trainee });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  postEvent(
    sessionId: string,
    kind: string,
    payload: Record<string, unknown> = {},
  ): Promise<{ feedback: FeedbackDoc[] }> {
    return this.enqueue(() => this.request("POST", `/sessions/${sessionId}/events`, { kind, payload }));
  }

  compress(sessionId: string, depth: number): Promise<{ ok: boolean }> {
    return this.enqueue(() => this.request("POST", `/sessions/${sessionId}/compress`, { depth }));
  }

  finish(sessionId: string, abort?: boolean): Promise<ReportDoc> {
    return this.enqueue(() =>
      this.request("POST", `/sessions/${sessionId}/finish`, abort === undefined ? {} : { abort }),
    );
  }

  debrief(sessionId: string): Promise<ReportDoc> {
    return this.request("GET", `/sessions/${sessionId}/debrief`);
  }

  scenarios(): Promise<{ scenarios: string[] }> {
    return this.request("GET", "/scenarios");
  }

  subscribeFeedback(sessionId: string, onFeedback: (fb: FeedbackDoc) => void): FeedbackSubscription {
    const source = this.eventSourceFactory(`${this.baseUrl}/sessions/${sessionId}/feedback`);
    source.onmessage = (ev) => {
      onFeedback(JSON.parse(ev.data) as FeedbackDoc);
    };
    return { close: () => source.close() };
  }
}
