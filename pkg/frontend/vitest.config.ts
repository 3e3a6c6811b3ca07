import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    globalSetup: ["tests/globalSetup.ts"],
    // the fixture service generates its scenario on boot; leave headroom
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
