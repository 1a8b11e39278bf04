// Live-view state: the latest per-channel min/max envelope, quality badges,
// and gap spans, built from the gateway's stream messages.
//
// The envelope is stored exactly as the gateway sent it - the browser never
// recomputes or resamples, so what renders is the server's decimation output.

import type { LiveMessage, MinMax, QualityEvent } from "./types.js";

export interface Badge {
  kind: string;
  severity: "info" | "warn" | "bad";
  onset: number;
  duration: number;
}

const SEVERITY_RANK = { info: 0, warn: 1, bad: 2 } as const;

export class LiveViewStore {
  series: Record<string, MinMax[]> = {};
  badges: Record<string, Badge> = {};
  gaps: Array<{ onset: number; duration: number }> = [];
  events: QualityEvent[] = [];
  state = "starting";
  streamSeconds = 0;
  artifactId: string | null = null;
  error: string | null = null;

  apply(message: LiveMessage): void {
    switch (message.type) {
      case "view": {
        this.streamSeconds = message.t;
        // exact copy of the decimated pairs, channel by channel
        this.series = {};
        for (const [channel, pairs] of Object.entries(message.channels)) {
          this.series[channel] = pairs.map(([lo, hi]) => [lo, hi]);
        }
        break;
      }
      case "quality": {
        const event = message.event;
        this.events.push(event);
        if (event.kind === "gap") {
          this.gaps.push({ onset: event.onset, duration: event.duration });
        }
        const existing = this.badges[event.channel];
        // a badge only downgrades once a newer event replaces it
        if (
          existing === undefined ||
          event.onset >= existing.onset ||
          SEVERITY_RANK[event.severity] >= SEVERITY_RANK[existing.severity]
        ) {
          this.badges[event.channel] = {
            kind: event.kind,
            severity: event.severity,
            onset: event.onset,
            duration: event.duration,
          };
        }
        break;
      }
      case "state":
        this.state = message.state;
        break;
      case "complete":
        this.artifactId = message.artifact_id;
        break;
      case "error":
        this.error = message.message;
        break;
    }
  }

  get reconnecting(): boolean {
    return this.state === "reconnecting";
  }

  badgeFor(channel: string): Badge | null {
    // channel-independent events ("all") apply everywhere
    return this.badges[channel] ?? this.badges["all"] ?? null;
  }

  channels(): string[] {
    return Object.keys(this.series);
  }
}
