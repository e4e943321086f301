// The consent flow itself. Two hard rules live here:
//   * the consent control starts unchecked, always - accepting takes an
//     explicit, affirmative act;
//   * nothing is posted on decline, and routing stays down until a grant
//     has been acknowledged by the service.

import type { GatekeeperClient } from "./api.js";
import { GatekeeperUnreachable } from "./api.js";
import { sha256Hex } from "./hash.js";
import type { RoutingController } from "./routing.js";
import type { StateStore } from "./storage.js";
import type { ConsentDecision, NoticePayload } from "./types.js";

export interface ConsentView {
  /** Render the notice and category summary verbatim; resolve with the
   * participant's decision. The checkbox/button the implementation renders
   * must start unchecked/disabled. */
  present(notice: NoticePayload): Promise<ConsentDecision>;
  unreachable(): void;
}

export class ConsentFlow {
  constructor(
    private readonly api: GatekeeperClient,
    private readonly view: ConsentView,
    private readonly stateStore: StateStore,
    private readonly routing: RoutingController,
    private readonly participantId: string,
  ) {}

  /** Run one consent pass for a snapshot version; returns the final state. */
  async run(version?: number) {
    const state = await this.stateStore.load();
    let notice: NoticePayload;
    try {
      notice = await this.api.fetchNotice(version);
    } catch (err) {
      if (err instanceof GatekeeperUnreachable) {
        // No service, no consent conversation - and no routing.
        state.repromptRequired = true;
        await this.stateStore.save(state);
        await this.routing.apply(state);
        this.view.unreachable();
        return state;
      }
      throw err;
    }

    const decision = await this.view.present(notice);
    if (decision === "declined") {
      // No POST on decline. The recorded consent (if any) stands, but a
      // pending re-prompt stays pending, so routing stays down.
      await this.stateStore.save(state);
      await this.routing.apply(state);
      return state;
    }

    // Hash what was displayed, not what was transmitted.
    const shownHash = await sha256Hex(notice.notice_text);
    const result = await this.api.postConsent(this.participantId, notice.version, shownHash);
    state.consentStatus = { kind: "granted", version: result.version };
    state.activeSnapshotVersion = notice.version;
    state.noticeHashShown = shownHash;
    state.consentedCategories = notice.summary.categories.map((row) => row.category_id);
    state.repromptRequired = false;
    await this.stateStore.save(state);
    await this.routing.apply(state);
    return state;
  }

  async revoke() {
    const state = await this.stateStore.load();
    await this.api.postRevoke(this.participantId);
    state.consentStatus = { kind: "revoked" };
    state.repromptRequired = false;
    await this.stateStore.save(state);
    await this.routing.apply(state);
    return state;
  }
}
