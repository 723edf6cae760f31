import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // Integration files spawn the Python service and shell out to the CLI;
    // give them room well past the defaults.
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
