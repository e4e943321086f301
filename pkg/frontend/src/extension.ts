// Adapters binding the client to the WebExtension APIs, plus the entry point
// used by the popup page. Kept thin: all behavior lives in the testable
// modules.

import { GatekeeperClient } from "./api.js";
import { SnapshotWatcher } from "./background.js";
import { ConsentFlow } from "./consentFlow.js";
import { PopupConsentView } from "./popup.js";
import { RoutingController, type ProxySettings } from "./routing.js";
import { StateStore, type KeyValueStorage } from "./storage.js";

export class ExtensionStorage implements KeyValueStorage {
  async get(key: string): Promise<string | null> {
    const items = await chrome.storage.local.get(key);
    const value = items[key];
    return typeof value === "string" ? value : null;
  }

  async set(key: string, value: string): Promise<void> {
    await chrome.storage.local.set({ [key]: value });
  }
}

export class ExtensionProxySettings implements ProxySettings {
  constructor(
    private readonly proxyHost: string,
    private readonly proxyPort: number,
  ) {}

  async enable(): Promise<void> {
    await chrome.proxy.settings.set({
      value: {
        mode: "fixed_servers",
        rules: {
          singleProxy: { scheme: "http", host: this.proxyHost, port: this.proxyPort },
        },
      },
      scope: "regular",
    });
  }

  async disable(): Promise<void> {
    await chrome.proxy.settings.clear({ scope: "regular" });
  }
}

export interface ClientConfig {
  gatekeeperUrl: string;
  proxyHost: string;
  proxyPort: number;
  participantId: string;
}

export function buildClient(config: ClientConfig, rootElement: HTMLElement) {
  const api = new GatekeeperClient(config.gatekeeperUrl);
  const stateStore = new StateStore(new ExtensionStorage());
  const routing = new RoutingController(
    new ExtensionProxySettings(config.proxyHost, config.proxyPort),
  );
  const view = new PopupConsentView(rootElement);
  return {
    flow: new ConsentFlow(api, view, stateStore, routing, config.participantId),
    watcher: new SnapshotWatcher(api, stateStore, routing),
  };
}
