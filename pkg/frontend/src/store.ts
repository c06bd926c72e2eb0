// Queue state machine. The server is the only source of truth: state changes
// land here exclusively from confirmed responses (or a fresh refetch after a
// conflict), never optimistically.

import {
  ApiClient,
  ApiError,
  DecisionAction,
  DecisionResponse,
  ReviewItem,
} from "./api.js";
import { captionViolations } from "./caption.js";

export interface ConflictInfo {
  itemId: string;
  message: string;
  // the server's current view, refetched when the conflict surfaced
  serverItem: ReviewItem | null;
}

export interface QueueState {
  items: ReviewItem[];
  filter: string;
  selectedId: string | null;
  reviewerId: string;
  loading: boolean;
  banner: string | null; // network-failure banner with retry
  conflict: ConflictInfo | null; // drives the conflict dialog
  fieldError: string | null; // inline error on the correction field
  lastResolved: DecisionResponse | null;
}

type Listener = (state: QueueState) => void;

export class QueueStore {
  private state: QueueState;
  private listeners: Listener[] = [];

  constructor(
    readonly api: ApiClient,
    reviewerId: string,
  ) {
    this.state = {
      items: [],
      filter: "pending",
      selectedId: null,
      reviewerId,
      loading: false,
      banner: null,
      conflict: null,
      fieldError: null,
      lastResolved: null,
    };
  }

  getState(): QueueState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private set(patch: Partial<QueueState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  selected(): ReviewItem | null {
    return this.state.items.find((i) => i.item_id === this.state.selectedId) ?? null;
  }

  select(itemId: string | null): void {
    this.set({ selectedId: itemId, fieldError: null });
  }

  selectOffset(delta: number): void {
    const { items, selectedId } = this.state;
    if (items.length === 0) {
      return;
    }
    const idx = items.findIndex((i) => i.item_id === selectedId);
    const next = idx < 0 ? 0 : Math.min(items.length - 1, Math.max(0, idx + delta));
    this.select(items[next].item_id);
  }

  async loadQueue(filter?: string): Promise<void> {
    const wanted = filter ?? this.state.filter;
    this.set({ loading: true, filter: wanted });
    try {
      const items = await this.api.listQueue(wanted);
      const selectedId =
        this.state.selectedId && items.some((i) => i.item_id === this.state.selectedId)
          ? this.state.selectedId
          : (items[0]?.item_id ?? null);
      this.set({ items, selectedId, loading: false, banner: null });
    } catch (err) {
      // leave the stale list visible and surface a retry banner
      this.set({ loading: false, banner: describeFailure(err) });
    }
  }

  async claimSelected(): Promise<ReviewItem | null> {
    const item = this.selected();
    if (!item) {
      return null;
    }
    try {
      const claimed = await this.api.claim(item.item_id, this.state.reviewerId);
      this.replaceItem(claimed);
      return claimed;
    } catch (err) {
      await this.surfaceError(item.item_id, err);
      return null;
    }
  }

  /** Claim (if needed) and submit one decision for the selected item. */
  async submitDecision(
    action: DecisionAction,
    correctedCaption?: string,
    note = "",
  ): Promise<DecisionResponse | null> {
    const item = this.selected();
    if (!item) {
      return null;
    }
    if (action === "Correct") {
      const violations = captionViolations(correctedCaption ?? "");
      if (violations.length > 0) {
        // fail in the form; no network call happens for an invalid caption
        this.set({ fieldError: `caption rejected: ${violations.join(", ")}` });
        return null;
      }
    }
    let current = item;
    if (current.status === "Pending") {
      try {
        current = await this.api.claim(current.item_id, this.state.reviewerId);
        this.replaceItem(current);
      } catch (err) {
        await this.surfaceError(item.item_id, err);
        return null;
      }
    }
    try {
      const result = await this.api.decide(current.item_id, {
        expected_revision: current.revision,
        action,
        corrected_caption: action === "Correct" ? correctedCaption : undefined,
        note,
        reviewer_id: this.state.reviewerId,
      });
      // confirmed by the server: drop the item from the pending view
      this.set({
        items: this.state.items.filter((i) => i.item_id !== current.item_id),
        selectedId: nextSelection(this.state, current.item_id),
        fieldError: null,
        lastResolved: result,
      });
      return result;
    } catch (err) {
      await this.surfaceError(current.item_id, err);
      return null;
    }
  }

  dismissConflict(): void {
    this.set({ conflict: null });
  }

  private replaceItem(item: ReviewItem): void {
    this.set({
      items: this.state.items.map((i) => (i.item_id === item.item_id ? item : i)),
    });
  }

  private async surfaceError(itemId: string, err: unknown): Promise<void> {
    if (err instanceof ApiError && err.isConflict) {
      // stale action: refetch the server's view and open the conflict dialog
      let serverItem: ReviewItem | null = null;
      try {
        serverItem = await this.api.getItem(itemId);
        this.replaceItem(serverItem);
      } catch {
        serverItem = null;
      }
      this.set({ conflict: { itemId, message: err.message, serverItem } });
      return;
    }
    if (err instanceof ApiError && err.isValidation) {
      this.set({ fieldError: err.message });
      return;
    }
    this.set({ banner: describeFailure(err) });
  }
}

function describeFailure(err: unknown): string {
  if (err instanceof ApiError) {
    return `request failed (${err.status}): ${err.message}`;
  }
  return `network failure: ${err instanceof Error ? err.message : String(err)}`;
}

function nextSelection(state: QueueState, removedId: string): string | null {
  const remaining = state.items.filter((i) => i.item_id !== removedId);
  if (remaining.length === 0) {
    return null;
  }
  const oldIdx = state.items.findIndex((i) => i.item_id === removedId);
  return remaining[Math.min(oldIdx, remaining.length - 1)].item_id;
}
