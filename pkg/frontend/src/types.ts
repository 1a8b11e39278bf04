// Wire shapes shared with the gateway (see docs/http-api.md in the repo root).

export type MinMax = [number, number];

export interface ViewMessage {
  type: "view";
  t: number;
  channels: Record<string, MinMax[]>;
}

export interface QualityEvent {
  channel: string;
  kind: string; // flatline | clipping | out-of-range-rms | gap
  onset: number;
  duration: number;
  severity: "info" | "warn" | "bad";
}

export interface QualityMessage {
  type: "quality";
  event: QualityEvent;
}

export interface StateMessage {
  type: "state";
  state: string;
}

export interface CompleteMessage {
  type: "complete";
  artifact_id: string;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type LiveMessage =
  | ViewMessage
  | QualityMessage
  | StateMessage
  | CompleteMessage
  | ErrorMessage;

export interface Patient {
  patient_id: string;
  name: string;
  date_of_birth: string | null;
  sex_at_birth: string | null;
  created_at: string;
  archived?: boolean;
}

export interface DeviceEntry {
  name: string;
  host: string;
  port: number;
  online: boolean;
  profile?: {
    name: string;
    channel_count: number;
    electrode_labels: string[];
    supported_rates: number[];
    resolution_bits: number;
  };
}

export interface RiskResult {
  stage: string;
  score: number;
  tier: "low" | "medium" | "high";
  action: string;
}
