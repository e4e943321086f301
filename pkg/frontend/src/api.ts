// Thin client for the capture service's consent endpoints. All authority is
// server-side; this only transports what the participant saw and decided.

import type { GrantResult, NoticePayload } from "./types.js";

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class GatekeeperUnreachable extends Error {}
export class GatekeeperRejected extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class GatekeeperClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async get(path: string): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`);
    } catch (err) {
      throw new GatekeeperUnreachable(String(err));
    }
    if (!response.ok) {
      throw new GatekeeperRejected(`GET ${path} -> ${response.status}`, response.status);
    }
    return response.json();
  }

  private async post(path: string, payload: unknown): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      throw new GatekeeperUnreachable(String(err));
    }
    const body = (await response.json()) as { error?: string };
    if (!response.ok) {
      throw new GatekeeperRejected(body.error ?? `POST ${path} -> ${response.status}`, response.status);
    }
    return body;
  }

  async activeVersion(): Promise<number> {
    const doc = (await this.get("/api/snapshot")) as { active_version: number };
    return doc.active_version;
  }

  async fetchNotice(version?: number): Promise<NoticePayload> {
    const suffix = version === undefined ? "" : `?version=${version}`;
    return (await this.get(`/api/notice${suffix}`)) as NoticePayload;
  }

  async postConsent(
    participantId: string,
    version: number,
    noticeHash: string,
  ): Promise<GrantResult> {
    const doc = (await this.post("/api/consent", {
      participant_id: participantId,
      version,
      notice_hash: noticeHash,
      // The affirmative act is the participant's click; this client never
      // sends a grant except from that code path.
      ack: true,
    })) as { granted: boolean; version: number };
    return { granted: doc.granted, version: doc.version };
  }

  async postRevoke(participantId: string): Promise<void> {
    await this.post("/api/revoke", { participant_id: participantId });
  }
}
