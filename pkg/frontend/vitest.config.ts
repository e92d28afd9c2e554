import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the round-trip test boots a real server and two full annotators
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
