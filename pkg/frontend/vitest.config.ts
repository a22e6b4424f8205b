import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // The tests drive a real local fixture HTTP server on a random port.
      happyDOM: { settings: { fetch: { disableSameOriginPolicy: true } } },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 10_000,
  },
});
