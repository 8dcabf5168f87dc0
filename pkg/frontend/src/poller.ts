/**
 * Minimal promise-based polling: call `probe` every `intervalMs` until it
 * resolves non-null or `timeoutMs` elapses. Overlapping probes are
 * prevented; rejection of a single probe is treated as "not ready yet".
 */

export async function pollUntil<T>(
  probe: () => Promise<T | null>,
  intervalMs = 1000,
  timeoutMs = 120_000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const value = await probe();
      if (value !== null) return value;
    } catch {
      /* transient failure: keep polling */
    }
    if (Date.now() >= deadline) {
      throw new Error(`poll timed out after ${timeoutMs} ms`);
    }
    await sleep(intervalMs);
  }
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
