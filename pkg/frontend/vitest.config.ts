import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the integration test builds artifacts and boots the real engine
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
