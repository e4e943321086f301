// Minimal ambient declarations for the WebExtension surface this client
// touches; avoids pulling full browser typings into the build.

declare namespace chrome {
  namespace storage {
    interface StorageArea {
      get(keys: string | string[]): Promise<Record<string, unknown>>;
      set(items: Record<string, unknown>): Promise<void>;
    }
    const local: StorageArea;
  }
  namespace proxy {
    interface ProxySettingsApi {
      set(details: { value: unknown; scope: string }): Promise<void>;
      clear(details: { scope: string }): Promise<void>;
    }
    const settings: ProxySettingsApi;
  }
}
