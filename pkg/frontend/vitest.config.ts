import { configDefaults, defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    exclude: process.env.UNIT_ONLY
      ? [...configDefaults.exclude, "**/*.integration.test.ts"]
      : [...configDefaults.exclude],
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
