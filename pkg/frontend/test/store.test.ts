// Store behavior against a faked fetch: confirmed-only mutations, the retry
// banner, the client-side caption gate, and conflict handling.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, type ReviewItem } from "../src/api.js";
import { QueueStore } from "../src/store.js";

function item(id: string, status: ReviewItem["status"] = "Pending", revision = 0): ReviewItem {
  return {
    item_id: id,
    entry_id: `entry-${id}`,
    reason: "CoverageMismatch",
    payload: {
      caption: "a dog barks",
      labels: [{ name: "dog_bark", modality: "AV" }],
      media: { audio_path: "clip.wav" },
      visual_context: null,
      audit: { uncovered: ["siren"] },
      style_violations: null,
    },
    status,
    claimed_by: status === "Claimed" ? "rev1" : null,
    revision,
    created_at: "2026-01-01T00:00:00+00:00",
    claimed_at: null,
  };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

const fetchMock = vi.fn();

beforeEach(() => {
  vi.stubGlobal("fetch", fetchMock);
  fetchMock.mockReset();
});

afterEach(() => {
  vi.unstubAllGlobals();
});

function makeStore(): QueueStore {
  return new QueueStore(new ApiClient("http://svc"), "rev1");
}

describe("loadQueue", () => {
  it("renders exactly what the server returned", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a"), item("b")] }));
    const store = makeStore();
    await store.loadQueue();
    expect(store.getState().items.map((i) => i.item_id)).toEqual(["a", "b"]);
    expect(store.getState().selectedId).toBe("a");
    expect(store.getState().banner).toBeNull();
  });

  it("keeps stale items and raises the retry banner on network failure", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a")] }));
    const store = makeStore();
    await store.loadQueue();
    fetchMock.mockRejectedValueOnce(new TypeError("connection refused"));
    await store.loadQueue();
    const state = store.getState();
    expect(state.banner).toContain("network failure");
    expect(state.items).toHaveLength(1);
  });
});

describe("submitDecision", () => {
  it("rejects an over-long correction before any network call", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a")] }));
    const store = makeStore();
    await store.loadQueue();
    fetchMock.mockClear();

    const result = await store.submitDecision("Correct", Array(41).fill("w").join(" "));
    expect(result).toBeNull();
    expect(store.getState().fieldError).toContain("TooLong");
    expect(fetchMock).not.toHaveBeenCalled();
  });

  it("claims then decides, and only removes the item after the 2xx", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a")] }));
    const store = makeStore();
    await store.loadQueue();

    fetchMock.mockResolvedValueOnce(jsonResponse(item("a", "Claimed", 1)));
    fetchMock.mockResolvedValueOnce(jsonResponse({
      item: item("a", "Resolved", 2),
      entry: { id: "entry-a", status: "Reviewed", revision: 2,
               caption: { text: "fixed", agent_tier: "Human" } },
    }));
    const result = await store.submitDecision("Correct", "a dog barks twice");
    expect(result?.entry.status).toBe("Reviewed");
    expect(store.getState().items).toHaveLength(0);
    expect(store.getState().lastResolved?.entry.caption?.agent_tier).toBe("Human");

    const decideCall = fetchMock.mock.calls[2];
    expect(decideCall[0]).toBe("http://svc/api/items/a/decision");
    expect(JSON.parse(decideCall[1].body)).toMatchObject({
      expected_revision: 1,
      action: "Correct",
      corrected_caption: "a dog barks twice",
      reviewer_id: "rev1",
    });
  });

  it("surfaces a conflict dialog and refetches on 409", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a", "Claimed", 1)] }));
    const store = makeStore();
    await store.loadQueue();

    fetchMock.mockResolvedValueOnce(jsonResponse(
      { code: "revision_conflict", message: "stale revision" }, 409));
    fetchMock.mockResolvedValueOnce(jsonResponse(item("a", "Resolved", 2)));
    const result = await store.submitDecision("Accept");
    expect(result).toBeNull();
    const conflict = store.getState().conflict;
    expect(conflict?.itemId).toBe("a");
    expect(conflict?.serverItem?.status).toBe("Resolved");
    // the refetched server view replaced the stale row
    expect(store.getState().items[0].status).toBe("Resolved");
  });

  it("shows a 422 as an inline field error", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a", "Claimed", 1)] }));
    const store = makeStore();
    await store.loadQueue();
    fetchMock.mockResolvedValueOnce(jsonResponse(
      { code: "style_violation", message: "caption style violations: TooLong" }, 422));
    const result = await store.submitDecision("Accept");
    expect(result).toBeNull();
    expect(store.getState().fieldError).toContain("TooLong");
  });
});

describe("selection", () => {
  it("moves with offsets and clamps at the ends", async () => {
    fetchMock.mockResolvedValueOnce(jsonResponse({ items: [item("a"), item("b"), item("c")] }));
    const store = makeStore();
    await store.loadQueue();
    store.selectOffset(1);
    expect(store.getState().selectedId).toBe("b");
    store.selectOffset(5);
    expect(store.getState().selectedId).toBe("c");
    store.selectOffset(-10);
    expect(store.getState().selectedId).toBe("a");
  });
});
