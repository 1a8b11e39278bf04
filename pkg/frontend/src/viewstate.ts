// UI gating that mirrors the recording session's transition table: the
// interface never offers an action the engine would reject.

export type SessionState =
  | "idle"
  | "connected"
  | "mounted"
  | "recording"
  | "reconnecting"
  | "finalizing"
  | "complete"
  | "aborted";

export type SessionEvent =
  | "device-connected"
  | "sensor-mounted"
  | "start-recording"
  | "transport-lost"
  | "transport-restored"
  | "stop-recording"
  | "finalized"
  | "abort";

const TABLE: Record<string, SessionState> = {
  "idle:device-connected": "connected",
  "connected:sensor-mounted": "mounted",
  "mounted:start-recording": "recording",
  "recording:transport-lost": "reconnecting",
  "reconnecting:transport-restored": "recording",
  "recording:stop-recording": "finalizing",
  "finalizing:finalized": "complete",
};

export function transition(
  state: SessionState,
  event: SessionEvent,
): SessionState | null {
  if (event === "abort") {
    return state === "complete" ? null : "aborted";
  }
  return TABLE[`${state}:${event}`] ?? null;
}

export function eventAllowed(state: SessionState, event: SessionEvent): boolean {
  return transition(state, event) !== null;
}

export interface DeviceConnection {
  name: string;
  online: boolean;
}

export class ViewState {
  selectedPatient: string | null = null;
  device: DeviceConnection | null = null;
  sessionId: string | null = null;
  sessionState: SessionState | null = null;

  get deviceConnected(): boolean {
    return this.device !== null && this.device.online;
  }

  // Recording controls stay disabled until a device is connected AND a
  // patient is selected; start additionally requires the engine to accept it.
  get recordingControlsEnabled(): boolean {
    return this.deviceConnected && this.selectedPatient !== null;
  }

  get canStartRecording(): boolean {
    if (!this.recordingControlsEnabled) return false;
    // no session yet: starting one walks idle->connected->mounted->recording
    if (this.sessionState === null) return true;
    return eventAllowed(this.sessionState, "start-recording");
  }

  get canStopRecording(): boolean {
    return (
      this.sessionState !== null && eventAllowed(this.sessionState, "stop-recording")
    );
  }

  get reviewMode(): boolean {
    return this.sessionState === "complete";
  }
}
