// Persistence seam: the extension uses browser storage, tests use memory.

import { FRESH_STATE, type ClientState } from "./types.js";

export interface KeyValueStorage {
  get(key: string): Promise<string | null>;
  set(key: string, value: string): Promise<void>;
}

export class MemoryStorage implements KeyValueStorage {
  private values = new Map<string, string>();

  async get(key: string): Promise<string | null> {
    return this.values.get(key) ?? null;
  }

  async set(key: string, value: string): Promise<void> {
    this.values.set(key, value);
  }
}

const STATE_KEY = "consent-client-state";

export class StateStore {
  constructor(private readonly storage: KeyValueStorage) {}

  async load(): Promise<ClientState> {
    const raw = await this.storage.get(STATE_KEY);
    if (raw === null) {
      return { ...FRESH_STATE };
    }
    return JSON.parse(raw) as ClientState;
  }

  async save(state: ClientState): Promise<void> {
    await this.storage.set(STATE_KEY, JSON.stringify(state));
  }
}
