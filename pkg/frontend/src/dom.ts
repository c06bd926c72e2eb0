// DOM rendering. Everything on screen derives from the store's state; this
// layer owns no truth of its own and re-renders wholesale on every change.

import { ApiClient, ReviewItem } from "./api.js";
import { captionViolations, MAX_CAPTION_WORDS, wordCount } from "./caption.js";
import { actionForKey } from "./keyboard.js";
import { QueueStore } from "./store.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export class ReviewApp {
  private root: HTMLElement;
  private correcting = false;
  private draftCaption = "";

  constructor(
    root: HTMLElement,
    readonly store: QueueStore,
    readonly api: ApiClient,
  ) {
    this.root = root;
    store.subscribe(() => this.render());
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    const inTextField =
      !!target && (target.tagName === "TEXTAREA" || target.tagName === "INPUT");
    const action = actionForKey(event.key, inTextField);
    if (!action) {
      return;
    }
    event.preventDefault();
    switch (action) {
      case "accept":
        void this.store.submitDecision("Accept");
        break;
      case "correct":
        this.correcting = true;
        this.draftCaption = this.store.selected()?.payload.caption ?? "";
        this.render();
        this.focusCaption();
        break;
      case "reject":
        void this.store.submitDecision("Reject");
        break;
      case "next":
        this.store.selectOffset(1);
        break;
      case "prev":
        this.store.selectOffset(-1);
        break;
      case "play": {
        const audio = this.root.querySelector<HTMLAudioElement>("audio");
        if (audio) {
          void (audio.paused ? audio.play() : audio.pause());
        }
        break;
      }
      case "escape":
        this.correcting = false;
        this.render();
        break;
    }
  }

  private focusCaption(): void {
    this.root.querySelector<HTMLTextAreaElement>("#caption-field")?.focus();
  }

  render(): void {
    const state = this.store.getState();
    this.root.replaceChildren();

    if (state.banner) {
      const banner = el("div", "banner", state.banner + " ");
      const retry = el("button", "", "Retry");
      retry.onclick = () => void this.store.loadQueue();
      banner.appendChild(retry);
      this.root.appendChild(banner);
    }

    const layout = el("div", "layout");
    layout.appendChild(this.renderList(state.items, state.selectedId));
    layout.appendChild(this.renderDetail());
    this.root.appendChild(layout);

    if (state.conflict) {
      this.root.appendChild(this.renderConflictDialog());
    }
  }

  private renderList(items: ReviewItem[], selectedId: string | null): HTMLElement {
    const pane = el("section", "list-pane");
    const head = el("header");
    head.appendChild(el("h1", "", "Review queue"));
    const refresh = el("button", "", "Refresh");
    refresh.onclick = () => void this.store.loadQueue();
    head.appendChild(refresh);
    pane.appendChild(head);

    if (items.length === 0) {
      pane.appendChild(el("p", "empty", "queue empty"));
      return pane;
    }
    const list = el("ul", "queue");
    for (const item of items) {
      const row = el("li", item.item_id === selectedId ? "row selected" : "row");
      row.appendChild(el("span", "entry", item.entry_id));
      row.appendChild(el("span", `reason ${item.reason}`, item.reason));
      row.appendChild(el("span", "status", item.status));
      row.onclick = () => this.store.select(item.item_id);
      list.appendChild(row);
    }
    pane.appendChild(list);
    return pane;
  }

  private renderDetail(): HTMLElement {
    const pane = el("section", "detail-pane");
    const item = this.store.selected();
    if (!item) {
      pane.appendChild(el("p", "empty", "nothing selected"));
      return pane;
    }

    pane.appendChild(el("h2", "", item.entry_id));
    const payload = item.payload;

    pane.appendChild(el("h3", "", "Caption"));
    pane.appendChild(el("blockquote", "caption", payload.caption ?? "(none)"));

    pane.appendChild(el("h3", "", "Labels"));
    const labels = el("ul", "labels");
    for (const label of payload.labels) {
      const row = el("li", "", `${label.name} [${label.modality}]`);
      if (payload.audit?.uncovered?.includes(label.name)) {
        row.classList.add("uncovered");
        row.textContent += ": not covered by the caption";
      }
      labels.appendChild(row);
    }
    pane.appendChild(labels);

    if (payload.visual_context) {
      pane.appendChild(el("h3", "", "Visual context"));
      pane.appendChild(el("p", "context", payload.visual_context));
    }

    if (payload.media?.audio_path) {
      pane.appendChild(el("h3", "", "Audio"));
      const audio = el("audio");
      audio.controls = true;
      audio.src = this.api.mediaUrl(payload.media.audio_path);
      pane.appendChild(audio);
    }

    pane.appendChild(this.renderActions(item));
    return pane;
  }

  private renderActions(item: ReviewItem): HTMLElement {
    const state = this.store.getState();
    const bar = el("div", "actions");
    const accept = el("button", "accept", "Accept (A)");
    accept.onclick = () => void this.store.submitDecision("Accept");
    const correct = el("button", "correct", "Correct (C)");
    correct.onclick = () => {
      this.correcting = true;
      this.draftCaption = item.payload.caption ?? "";
      this.render();
      this.focusCaption();
    };
    const reject = el("button", "reject", "Reject (R)");
    reject.onclick = () => void this.store.submitDecision("Reject");
    bar.append(accept, correct, reject);

    if (this.correcting) {
      const form = el("div", "correct-form");
      const field = el("textarea");
      field.id = "caption-field";
      field.value = this.draftCaption;
      field.rows = 3;
      const counter = el("p", "counter");
      const syncCounter = () => {
        const words = wordCount(field.value);
        counter.textContent = `${words}/${MAX_CAPTION_WORDS} words`;
        counter.classList.toggle("over", captionViolations(field.value).length > 0);
      };
      field.oninput = () => {
        this.draftCaption = field.value;
        syncCounter();
      };
      syncCounter();
      const submit = el("button", "", "Submit correction");
      submit.onclick = () => {
        void this.store.submitDecision("Correct", field.value).then((result) => {
          if (result) {
            this.correcting = false;
            this.draftCaption = "";
          }
        });
      };
      form.append(field, counter, submit);
      if (state.fieldError) {
        form.appendChild(el("p", "field-error", state.fieldError));
      }
      bar.appendChild(form);
    } else if (state.fieldError) {
      bar.appendChild(el("p", "field-error", state.fieldError));
    }
    return bar;
  }

  private renderConflictDialog(): HTMLElement {
    const state = this.store.getState();
    const overlay = el("div", "overlay");
    const dialog = el("div", "dialog conflict-dialog");
    dialog.appendChild(el("h2", "", "Conflict"));
    dialog.appendChild(el("p", "", state.conflict?.message ?? "stale action"));
    const server = state.conflict?.serverItem;
    if (server) {
      dialog.appendChild(
        el(
          "p",
          "server-state",
          `server state: ${server.status}` +
            (server.claimed_by ? ` (claimed by ${server.claimed_by})` : ""),
        ),
      );
    }
    const reload = el("button", "", "Reload queue");
    reload.onclick = () => {
      this.store.dismissConflict();
      void this.store.loadQueue();
    };
    const dismiss = el("button", "", "Dismiss");
    dismiss.onclick = () => this.store.dismissConflict();
    dialog.append(reload, dismiss);
    overlay.appendChild(dialog);
    return overlay;
  }
}
