// Typed client for the review service JSON API. Every call maps 1:1 onto a
// documented endpoint; non-2xx responses become ApiError with the server's
// {code, message} body so the store can branch on conflicts vs validation.

export type ReviewItemStatus = "Pending" | "Claimed" | "Resolved";

export interface ReviewItem {
  item_id: string;
  entry_id: string;
  reason: string;
  payload: {
    caption: string | null;
    labels: Array<{ name: string; modality: string }>;
    media: { audio_path: string; video_path?: string | null };
    visual_context: string | null;
    audit: { uncovered?: string[]; error?: string } | null;
    style_violations: string[] | null;
  };
  status: ReviewItemStatus;
  claimed_by: string | null;
  revision: number;
  created_at: string;
  claimed_at: string | null;
}

export interface ManifestEntry {
  id: string;
  status: string;
  caption?: { text: string; agent_tier: string } | null;
  revision: number;
}

export type DecisionAction = "Accept" | "Correct" | "Reject";

export interface DecisionRequest {
  expected_revision: number;
  action: DecisionAction;
  corrected_caption?: string;
  note?: string;
  reviewer_id: string;
}

export interface DecisionResponse {
  item: ReviewItem;
  entry: ManifestEntry;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get isConflict(): boolean {
    return this.status === 409;
  }

  get isValidation(): boolean {
    return this.status === 422;
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "error";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!resp.ok) {
      throw await parseError(resp);
    }
    return (await resp.json()) as T;
  }

  async listQueue(status = "pending"): Promise<ReviewItem[]> {
    const body = await this.request<{ items: ReviewItem[] }>(
      `/api/queue?status=${encodeURIComponent(status)}`,
    );
    return body.items;
  }

  getItem(itemId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(`/api/items/${encodeURIComponent(itemId)}`);
  }

  claim(itemId: string, reviewerId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(
      `/api/items/${encodeURIComponent(itemId)}/claim`,
      { method: "POST", body: JSON.stringify({ reviewer_id: reviewerId }) },
    );
  }

  decide(itemId: string, body: DecisionRequest): Promise<DecisionResponse> {
    return this.request<DecisionResponse>(
      `/api/items/${encodeURIComponent(itemId)}/decision`,
      { method: "POST", body: JSON.stringify(body) },
    );
  }

  async refreshQueue(): Promise<number> {
    const body = await this.request<{ queue_size: number }>(
      "/api/queue/refresh",
      { method: "POST" },
    );
    return body.queue_size;
  }

  mediaUrl(path: string): string {
    const clean = path.replace(/^\/+/, "");
    return `${this.baseUrl}/media/${clean.split("/").map(encodeURIComponent).join("/")}`;
  }
}
