import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    globalSetup: ["./test/globalSetup.ts"],
    hookTimeout: 60_000,
    testTimeout: 30_000,
    // integration tests share one live service; keep them sequential
    fileParallelism: false,
  },
});
