import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // the acceptance suite boots the coordination server and walks a
    // full two-phase study over HTTP
    testTimeout: 180_000,
    hookTimeout: 60_000,
  },
});
