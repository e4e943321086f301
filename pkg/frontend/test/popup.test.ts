// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import { PopupConsentView } from "../src/popup.js";
import type { NoticePayload } from "../src/types.js";

const NOTICE: NoticePayload = {
  version: 1,
  notice_text: "Study notice body shown verbatim.",
  notice_hash: "irrelevant-here",
  summary: {
    version: 1,
    categories: [
      { category_id: "news", name: "News", description: "what you read", entries: 10 },
    ],
  },
};

describe("popup consent form", () => {
  it("renders the notice verbatim with an unchecked control", () => {
    const root = document.createElement("div");
    const view = new PopupConsentView(root);
    void view.present(NOTICE);

    const text = root.querySelector("pre.notice-text")!;
    expect(text.textContent).toBe(NOTICE.notice_text);
    const box = root.querySelector<HTMLInputElement>("#consent-ack")!;
    expect(box.checked).toBe(false); // never pre-checked
    const accept = Array.from(root.querySelectorAll("button")).find(
      (button) => button.textContent === "Agree and participate",
    )!;
    expect(accept.disabled).toBe(true);
  });

  it("accept requires checking the box first, then resolves accepted", async () => {
    const root = document.createElement("div");
    const view = new PopupConsentView(root);
    const decision = view.present(NOTICE);

    const box = root.querySelector<HTMLInputElement>("#consent-ack")!;
    const accept = Array.from(root.querySelectorAll("button")).find(
      (button) => button.textContent === "Agree and participate",
    )!;

    accept.click(); // disabled + unchecked: no effect
    box.checked = true;
    box.dispatchEvent(new Event("change"));
    expect(accept.disabled).toBe(false);
    accept.click();
    await expect(decision).resolves.toBe("accepted");
  });

  it("decline resolves without touching the checkbox", async () => {
    const root = document.createElement("div");
    const view = new PopupConsentView(root);
    const decision = view.present(NOTICE);
    const decline = Array.from(root.querySelectorAll("button")).find(
      (button) => button.textContent === "Not now",
    )!;
    decline.click();
    await expect(decision).resolves.toBe("declined");
  });
});
