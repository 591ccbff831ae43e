// Debounced live validation: at most one request in flight, the latest state
// wins, and an unreachable server leaves the previous diagnostics visible but
// flagged stale.

import type { ApiClient } from "./api.js";
import type { EditorState } from "./state.js";

export const VALIDATE_DEBOUNCE_MS = 250;

export class LiveValidator {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private pendingAgain = false;

  constructor(private api: ApiClient, private state: EditorState,
              private onUpdate: () => void,
              private debounceMs: number = VALIDATE_DEBOUNCE_MS) {}

  /** Call after every state mutation; coalesces into one request. */
  schedule() {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.debounceMs);
  }

  private async fire() {
    if (this.inFlight) {
      this.pendingAgain = true;
      return;
    }
    this.inFlight = true;
    const revision = this.state.revision;
    try {
      const report = await this.api.validate(this.state.exportText());
      this.state.applyDiagnostics(report, revision);
    } catch {
      this.state.markDiagnosticsUnreachable();
    } finally {
      this.inFlight = false;
    }
    this.onUpdate();
    if (this.pendingAgain || this.state.revision !== revision) {
      this.pendingAgain = false;
      this.schedule();
    }
  }
}
