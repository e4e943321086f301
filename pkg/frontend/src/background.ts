// Background orchestration: watch the active snapshot version and force a
// re-prompt (routing down first) whenever a new version brings categories the
// participant never saw. Additions inside already-consented categories keep
// routing up - the service's gate remains the authority either way.

import type { GatekeeperClient } from "./api.js";
import type { RoutingController } from "./routing.js";
import type { StateStore } from "./storage.js";

export interface VersionCheckOutcome {
  repromptRequired: boolean;
  newCategories: string[];
}

export class SnapshotWatcher {
  constructor(
    private readonly api: GatekeeperClient,
    private readonly stateStore: StateStore,
    private readonly routing: RoutingController,
  ) {}

  async checkOnce(): Promise<VersionCheckOutcome> {
    const state = await this.stateStore.load();
    if (state.consentStatus.kind !== "granted") {
      await this.routing.apply(state);
      return { repromptRequired: false, newCategories: [] };
    }
    const activeVersion = await this.api.activeVersion();
    if (activeVersion === state.consentStatus.version) {
      await this.routing.apply(state);
      return { repromptRequired: false, newCategories: [] };
    }
    const notice = await this.api.fetchNotice(activeVersion);
    const known = new Set(state.consentedCategories);
    const newCategories = notice.summary.categories
      .map((row) => row.category_id)
      .filter((id) => !known.has(id));
    state.activeSnapshotVersion = activeVersion;
    if (newCategories.length > 0) {
      state.repromptRequired = true;
      await this.stateStore.save(state);
      await this.routing.apply(state); // down before anyone asks again
      return { repromptRequired: true, newCategories };
    }
    await this.stateStore.save(state);
    await this.routing.apply(state);
    return { repromptRequired: false, newCategories: [] };
  }
}
