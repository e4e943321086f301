// Proxy routing control. Default-off is structural: the only call site that
// enables routing first checks a granted, current consent, and every other
// transition disables it.

import type { ClientState } from "./types.js";

export interface ProxySettings {
  enable(): Promise<void>;
  disable(): Promise<void>;
}

export function routingPermitted(state: ClientState): boolean {
  return state.consentStatus.kind === "granted" && !state.repromptRequired;
}

export class RoutingController {
  private enabled = false;

  constructor(private readonly proxy: ProxySettings) {}

  get isEnabled(): boolean {
    return this.enabled;
  }

  /** Align the proxy setting with what the state permits. */
  async apply(state: ClientState): Promise<void> {
    if (routingPermitted(state)) {
      await this.proxy.enable();
      this.enabled = true;
    } else {
      await this.proxy.disable();
      this.enabled = false;
    }
  }
}
