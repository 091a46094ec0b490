import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the round-trip test owns a live server; keep files sequential
    fileParallelism: false,
  },
});
