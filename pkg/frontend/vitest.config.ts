import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    globalSetup: ['tests/service_setup.ts'],
    testTimeout: 30000,
    hookTimeout: 60000,
    // the two flow suites share scripted mock state on the service;
    // keep execution single-file-at-a-time and in order
    fileParallelism: false,
    sequence: { shuffle: false },
  },
});
