// Round trip against the live review service spawned by globalSetup:
// list three flagged items, resolve one with a valid correction, and drive
// a concurrent stale decision into the conflict dialog.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { QueueStore } from "../src/store.js";
import { SERVICE_URL } from "./globalSetup.js";

const api = new ApiClient(SERVICE_URL);

describe("live service round trip", () => {
  it("lists the three flagged items", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    const state = store.getState();
    expect(state.banner).toBeNull();
    expect(state.items).toHaveLength(3);
    expect(state.items.map((i) => i.entry_id)).toEqual(["ui0", "ui1", "ui2"]);
    expect(state.items.every((i) => i.reason === "CoverageMismatch")).toBe(true);
  });

  it("resolves an item with a valid correction", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    store.select("ui0::0");

    const caption = "a dog barks twice while a distant siren wails";
    const result = await store.submitDecision("Correct", caption);
    expect(result).not.toBeNull();
    expect(result?.entry.status).toBe("Reviewed");
    expect(result?.entry.caption?.agent_tier).toBe("Human");
    expect(result?.entry.caption?.text).toBe(caption);
    expect(result?.item.status).toBe("Resolved");

    // the item left the pending view locally and on a fresh reload
    expect(store.getState().items.map((i) => i.item_id)).not.toContain("ui0::0");
    await store.loadQueue();
    expect(store.getState().items).toHaveLength(2);
  });

  it("rejects an over-long correction client-side without touching the item", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    store.select("ui1::0");
    const result = await store.submitDecision("Correct", Array(41).fill("w").join(" "));
    expect(result).toBeNull();
    expect(store.getState().fieldError).toContain("TooLong");
    const fresh = await api.getItem("ui1::0");
    expect(fresh.status).toBe("Pending");
  });

  it("surfaces a conflict dialog for a concurrent stale decision", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    store.select("ui1::0");
    const claimed = await store.claimSelected();
    expect(claimed?.status).toBe("Claimed");

    // a second tab of the same reviewer resolves the item out from under us
    await api.decide("ui1::0", {
      expected_revision: claimed!.revision,
      action: "Accept",
      reviewer_id: "ui-reviewer",
    });

    // our cached revision is now stale; the decision must surface a conflict
    const result = await store.submitDecision("Reject");
    expect(result).toBeNull();
    const conflict = store.getState().conflict;
    expect(conflict).not.toBeNull();
    expect(conflict?.itemId).toBe("ui1::0");
    expect(conflict?.serverItem?.status).toBe("Resolved");

    // dismissing and reloading shows the server's truth: one pending item left
    store.dismissConflict();
    await store.loadQueue();
    expect(store.getState().conflict).toBeNull();
    expect(store.getState().items.map((i) => i.item_id)).toEqual(["ui2::0"]);
  });

  it("serves the clip referenced by the item payload", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    const item = store.getState().items[0];
    const resp = await fetch(api.mediaUrl(item.payload.media.audio_path));
    expect(resp.status).toBe(200);
    expect((await resp.arrayBuffer()).byteLength).toBeGreaterThan(1000);
  });

  it("rejecting the final item empties the queue", async () => {
    const store = new QueueStore(api, "ui-reviewer");
    await store.loadQueue();
    store.select("ui2::0");
    const result = await store.submitDecision("Reject");
    expect(result?.entry.status).toBe("Discarded");
    await store.loadQueue();
    expect(store.getState().items).toHaveLength(0);
  });
});
