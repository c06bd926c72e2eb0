import { ApiClient } from "./api.js";
import { ReviewApp } from "./dom.js";
import { QueueStore } from "./store.js";

function config(): { apiBase: string; reviewerId: string } {
  const params = new URLSearchParams(window.location.search);
  const apiBase = params.get("api") ?? "";
  let reviewerId = params.get("reviewer") ?? localStorage.getItem("reviewer_id") ?? "";
  if (!reviewerId) {
    reviewerId = window.prompt("Reviewer id:")?.trim() || "anonymous";
  }
  localStorage.setItem("reviewer_id", reviewerId);
  return { apiBase, reviewerId };
}

const { apiBase, reviewerId } = config();
const api = new ApiClient(apiBase);
const store = new QueueStore(api, reviewerId);
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app root element");
}
new ReviewApp(root, store, api);
void store.loadQueue();
