// DOM rendering of the consent form. The acknowledgement checkbox is created
// unchecked and the accept button disabled until the participant checks it -
// there is no code path that pre-checks it.

import type { ConsentView } from "./consentFlow.js";
import type { ConsentDecision, NoticePayload } from "./types.js";

export class PopupConsentView implements ConsentView {
  constructor(private readonly rootElement: HTMLElement) {}

  present(notice: NoticePayload): Promise<ConsentDecision> {
    return new Promise((resolve) => {
      const root = this.rootElement;
      root.replaceChildren();

      const noticeBlock = document.createElement("pre");
      noticeBlock.className = "notice-text";
      noticeBlock.textContent = notice.notice_text; // verbatim, no rewriting
      root.appendChild(noticeBlock);

      const list = document.createElement("ul");
      list.className = "category-summary";
      for (const row of notice.summary.categories) {
        const item = document.createElement("li");
        const title = document.createElement("strong");
        title.textContent = `${row.name} (${row.entries} sites)`;
        const description = document.createElement("p");
        description.textContent = row.description;
        item.append(title, description);
        list.appendChild(item);
      }
      root.appendChild(list);

      const ackLabel = document.createElement("label");
      const ackBox = document.createElement("input");
      ackBox.type = "checkbox";
      ackBox.checked = false;
      ackBox.id = "consent-ack";
      ackLabel.append(
        ackBox,
        document.createTextNode(
          " I have read the notice and agree to the observation it describes.",
        ),
      );
      root.appendChild(ackLabel);

      const accept = document.createElement("button");
      accept.textContent = "Agree and participate";
      accept.disabled = true;
      const decline = document.createElement("button");
      decline.textContent = "Not now";

      ackBox.addEventListener("change", () => {
        accept.disabled = !ackBox.checked;
      });
      accept.addEventListener("click", () => {
        if (ackBox.checked) {
          resolve("accepted");
        }
      });
      decline.addEventListener("click", () => resolve("declined"));
      root.append(accept, decline);
    });
  }

  unreachable(): void {
    const message = document.createElement("p");
    message.textContent =
      "The study service is not reachable. Observation stays off; try again later.";
    this.rootElement.replaceChildren(message);
  }
}
