// Thin gateway client. All data flows through the HTTP/WS API; the browser
// never talks to devices directly.

import type { DeviceEntry, LiveMessage, Patient, RiskResult } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export class GatewayClient {
  constructor(
    public baseUrl: string,
    public token: string,
  ) {}

  private headers(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}` };
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: {
        ...this.headers(),
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = await response.json();
        detail = typeof parsed.detail === "string" ? parsed.detail : JSON.stringify(parsed.detail);
      } catch {
        // keep statusText
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listPatients(query?: string): Promise<{ patients: Patient[] }> {
    const suffix = query ? `?q=${encodeURIComponent(query)}` : "";
    return this.request("GET", `/patients${suffix}`);
  }

  createPatient(body: {
    name: string;
    date_of_birth?: string;
    sex_at_birth?: string;
  }): Promise<Patient> {
    return this.request("POST", "/patients", body);
  }

  getPatient(id: string): Promise<Patient> {
    return this.request("GET", `/patients/${id}`);
  }

  listArtifacts(patientId: string): Promise<{ artifacts: any[] }> {
    return this.request("GET", `/patients/${patientId}/artifacts`);
  }

  listDevices(): Promise<{ devices: DeviceEntry[] }> {
    return this.request("GET", "/devices");
  }

  listQuestionnaires(): Promise<{ questionnaires: { canonical_id: string; title: string }[] }> {
    return this.request("GET", "/questionnaires");
  }

  getQuestionnaire(canonicalId: string): Promise<any> {
    return this.request("GET", `/questionnaires/${canonicalId}`);
  }

  submitResponse(
    patientId: string,
    document: object,
  ): Promise<{ artifact: any; risk: RiskResult }> {
    return this.request("POST", `/patients/${patientId}/responses`, document);
  }

  createSession(body: {
    patient_id: string;
    device: string;
    duration?: number;
  }): Promise<{ session_id: string; state: string }> {
    return this.request("POST", "/sessions", body);
  }

  stopSession(sessionId: string): Promise<{ state: string; artifact_id: string | null }> {
    return this.request("POST", `/sessions/${sessionId}/stop`);
  }

  liveStream(sessionId: string, onMessage: (m: LiveMessage) => void): WebSocket {
    const ws = new WebSocket(
      `${this.baseUrl.replace(/^http/, "ws")}/sessions/${sessionId}/live?token=${this.token}`,
    );
    ws.onmessage = (event) => onMessage(JSON.parse(event.data) as LiveMessage);
    return ws;
  }
}
