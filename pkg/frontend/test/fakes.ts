// Test doubles: an in-memory gatekeeper speaking the real wire format, a
// recording proxy-settings sink, and a scriptable consent view.

import { createHash } from "node:crypto";
import type { ConsentView } from "../src/consentFlow.js";
import type { ProxySettings } from "../src/routing.js";
import type { ConsentDecision, NoticePayload } from "../src/types.js";

export function sha256HexNode(text: string): string {
  return createHash("sha256").update(text, "utf-8").digest("hex");
}

export interface SnapshotFixture {
  version: number;
  categories: { category_id: string; name: string; description: string; entries: number }[];
}

export class FakeGatekeeper {
  noticeText = "Study notice: observed sites, filtering, coded identity, retention.\n";
  snapshots: SnapshotFixture[] = [];
  grants: { participant_id: string; version: number; notice_hash: string; ack: boolean }[] = [];
  revocations: string[] = [];
  reachable = true;

  get activeVersion(): number {
    const last = this.snapshots[this.snapshots.length - 1];
    return last ? last.version : 0;
  }

  publish(categories: SnapshotFixture["categories"]): number {
    const version = this.activeVersion + 1;
    this.snapshots.push({ version, categories });
    return version;
  }

  private snapshot(version: number): SnapshotFixture | undefined {
    return this.snapshots.find((snap) => snap.version === version);
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    if (!this.reachable) {
      throw new TypeError("fetch failed: connection refused");
    }
    const url = new URL(input, "http://service.local");
    const respond = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "Content-Type": "application/json" },
      });

    if (url.pathname === "/api/snapshot") {
      return respond(200, { active_version: this.activeVersion });
    }
    if (url.pathname === "/api/notice") {
      const requested = url.searchParams.get("version");
      const version = requested === null ? this.activeVersion : Number(requested);
      const snap = this.snapshot(version);
      if (!snap) {
        return respond(404, { error: `no snapshot v${version}` });
      }
      const payload: NoticePayload = {
        version: snap.version,
        notice_text: this.noticeText,
        notice_hash: sha256HexNode(this.noticeText),
        summary: { version: snap.version, categories: snap.categories },
      };
      return respond(200, payload);
    }
    if (url.pathname === "/api/consent" && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as (typeof this.grants)[number];
      if (!body.ack) {
        return respond(400, { error: "explicit affirmative action required" });
      }
      if (body.notice_hash !== sha256HexNode(this.noticeText)) {
        return respond(400, { error: "notice hash mismatch" });
      }
      if (!this.snapshot(body.version)) {
        return respond(400, { error: "unknown version" });
      }
      this.grants.push(body);
      return respond(200, { granted: true, version: body.version });
    }
    if (url.pathname === "/api/revoke" && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as { participant_id: string };
      this.revocations.push(body.participant_id);
      return respond(200, { revoked: true, noop: false });
    }
    return respond(404, { error: "unknown endpoint" });
  };
}

export class RecordingProxySettings implements ProxySettings {
  enabled = false;
  transitions: string[] = [];

  async enable(): Promise<void> {
    this.enabled = true;
    this.transitions.push("enable");
  }

  async disable(): Promise<void> {
    this.enabled = false;
    this.transitions.push("disable");
  }
}

export class ScriptedView implements ConsentView {
  shown: NoticePayload[] = [];
  unreachableCalls = 0;

  constructor(private readonly decisions: ConsentDecision[]) {}

  async present(notice: NoticePayload): Promise<ConsentDecision> {
    this.shown.push(notice);
    const next = this.decisions.shift();
    if (next === undefined) {
      throw new Error("view asked for a decision the test did not script");
    }
    return next;
  }

  unreachable(): void {
    this.unreachableCalls += 1;
  }
}
