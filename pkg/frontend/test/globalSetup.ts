// Spawns a real review service (Python) for the integration tests and tears
// it down afterwards. Unit tests ignore it.

import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

export const SERVICE_PORT = 8942;
export const SERVICE_URL = `http://127.0.0.1:${SERVICE_PORT}`;

let service: ChildProcess | null = null;

async function waitForService(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${url}/api/queue?status=all`);
      if (resp.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`review service did not come up on ${url}`);
}

export async function setup(): Promise<void> {
  const here = dirname(fileURLToPath(import.meta.url));
  service = spawn(
    "python3",
    [join(here, "fixture_service.py"), "--port", String(SERVICE_PORT)],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  service.on("exit", (code) => {
    if (code !== null && code !== 0) {
      console.error(`fixture service exited with code ${code}`);
    }
  });
  await waitForService(SERVICE_URL);
}

export async function teardown(): Promise<void> {
  if (service && !service.killed) {
    service.kill("SIGTERM");
  }
}
