// Reconnect backoff: 0.5 s doubling to an 8 s cap, reset on success.

export const BACKOFF_BASE_MS = 500;
export const BACKOFF_CAP_MS = 8000;

export class Backoff {
  private attempt = 0;

  nextDelayMs(): number {
    const delay = Math.min(
      BACKOFF_BASE_MS * 2 ** this.attempt,
      BACKOFF_CAP_MS,
    );
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}
