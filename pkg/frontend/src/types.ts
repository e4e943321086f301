// Shared types for the consent client.

export interface CategorySummaryRow {
  category_id: string;
  name: string;
  description: string;
  entries: number;
}

export interface NoticePayload {
  version: number;
  notice_text: string;
  notice_hash: string;
  summary: {
    version: number;
    categories: CategorySummaryRow[];
  };
}

export type ConsentStatus =
  | { kind: "none" }
  | { kind: "granted"; version: number }
  | { kind: "revoked" };

export interface ClientState {
  consentStatus: ConsentStatus;
  activeSnapshotVersion: number | null;
  noticeHashShown: string | null;
  // Category ids that were on the summary the participant actually saw;
  // a later snapshot introducing a category outside this set forces a re-prompt.
  consentedCategories: string[];
  repromptRequired: boolean;
}

export const FRESH_STATE: ClientState = {
  consentStatus: { kind: "none" },
  activeSnapshotVersion: null,
  noticeHashShown: null,
  consentedCategories: [],
  repromptRequired: false,
};

export interface GrantResult {
  granted: boolean;
  version: number;
}

export type ConsentDecision = "accepted" | "declined";
