// Single-page wiring: patient list, add-patient form, patient detail,
// device connect + live recording, questionnaire administration.
// Hash routes: #/patients, #/patients/new, #/patients/:id, #/record, #/screen

import { GatewayClient, ApiError } from "./api.js";
import { LiveViewStore } from "./envelope.js";
import { envelopePath, gapRects } from "./charts.js";
import {
  QuestionnaireFlow,
  parseQuestionnaire,
  type QuestionnaireModel,
} from "./questionnaire.js";
import { ViewState } from "./viewstate.js";
import type { LiveMessage } from "./types.js";

const state = new ViewState();
let client: GatewayClient | null = null;
let liveStore = new LiveViewStore();
let liveSocket: WebSocket | null = null;
let flow: QuestionnaireFlow | null = null;
let flowModel: QuestionnaireModel | null = null;
let pendingResponse: object | null = null;

function root(): HTMLElement {
  return document.getElementById("app")!;
}

function el(html: string): HTMLElement {
  const template = document.createElement("template");
  template.innerHTML = html.trim();
  return template.content.firstElementChild as HTMLElement;
}

function navigate(hash: string): void {
  window.location.hash = hash;
}

// -- login ------------------------------------------------------------------

function renderLogin(): void {
  const view = el(`
    <section class="card">
      <h1>Sign in</h1>
      <form id="login">
        <label>Gateway <input name="gateway" value="${window.location.origin}" /></label>
        <label>Provider id <input name="provider" required /></label>
        <label>Secret <input name="secret" type="password" required /></label>
        <button type="submit">Get token</button>
        <p class="error" id="login-error"></p>
      </form>
    </section>`);
  view.querySelector("form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(event.target as HTMLFormElement);
    const gateway = String(data.get("gateway"));
    try {
      const reply = await fetch(`${gateway}/auth/token`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          provider_id: data.get("provider"),
          secret: data.get("secret"),
        }),
      });
      if (!reply.ok) throw new Error(`sign-in rejected (${reply.status})`);
      const body = await reply.json();
      client = new GatewayClient(gateway, body.access_token);
      navigate("#/patients");
    } catch (error) {
      view.querySelector("#login-error")!.textContent = String(error);
    }
  });
  root().replaceChildren(view);
}

// -- patients ----------------------------------------------------------------

async function renderPatients(): Promise<void> {
  const { patients } = await client!.listPatients();
  const view = el(`
    <section>
      <header class="row">
        <h1>Patients</h1>
        <input id="search" placeholder="search name or id" />
        <a href="#/patients/new" class="button">Add patient</a>
      </header>
      <ul id="patient-list" class="cards"></ul>
    </section>`);
  const list = view.querySelector("#patient-list")!;
  const fill = (rows: typeof patients) => {
    list.replaceChildren(
      ...rows.map((p) => {
        const item = el(`
          <li class="card ${state.selectedPatient === p.patient_id ? "selected" : ""}">
            <a href="#/patients/${p.patient_id}"><strong>${p.name}</strong></a>
            <span>${p.patient_id}</span>
            <button>Select</button>
          </li>`);
        item.querySelector("button")!.addEventListener("click", () => {
          state.selectedPatient = p.patient_id;
          render();
        });
        return item;
      }),
    );
  };
  fill(patients);
  view.querySelector("#search")!.addEventListener("input", async (event) => {
    const q = (event.target as HTMLInputElement).value;
    const result = await client!.listPatients(q || undefined);
    fill(result.patients);
  });
  root().replaceChildren(view);
}

function renderAddPatient(): void {
  const view = el(`
    <section class="card">
      <h1>Add patient</h1>
      <form id="add">
        <label>Name <input name="name" required /></label>
        <label>Date of birth <input name="dob" type="date" /></label>
        <label>Sex at birth
          <select name="sex"><option value=""></option><option>F</option><option>M</option></select>
        </label>
        <button type="submit">Create</button>
        <p class="error" id="add-error"></p>
      </form>
    </section>`);
  view.querySelector("form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(event.target as HTMLFormElement);
    try {
      const patient = await client!.createPatient({
        name: String(data.get("name")),
        date_of_birth: String(data.get("dob")) || undefined,
        sex_at_birth: String(data.get("sex")) || undefined,
      });
      state.selectedPatient = patient.patient_id;
      navigate(`#/patients/${patient.patient_id}`);
    } catch (error) {
      view.querySelector("#add-error")!.textContent =
        error instanceof ApiError ? error.detail : String(error);
    }
  });
  root().replaceChildren(view);
}

async function renderPatientDetail(patientId: string): Promise<void> {
  const patient = await client!.getPatient(patientId);
  const { artifacts } = await client!.listArtifacts(patientId);
  const view = el(`
    <section>
      <h1>${patient.name}</h1>
      <dl class="card">
        <dt>Identifier</dt><dd>${patient.patient_id}</dd>
        <dt>Date of birth</dt><dd>${patient.date_of_birth ?? "unknown"}</dd>
        <dt>Sex at birth</dt><dd>${patient.sex_at_birth ?? "unknown"}</dd>
      </dl>
      <div class="row">
        <button id="select">Select for session</button>
        <a class="button" href="#/record">Record</a>
        <a class="button" href="#/screen">Screening</a>
      </div>
      <h2>Schedule</h2>
      <ul class="cards">
        <li class="card">EEG recording — due today</li>
        <li class="card">M-CHAT-R/F screening — due today</li>
      </ul>
      <h2>Artifacts</h2>
      <ul id="artifacts" class="cards"></ul>
    </section>`);
  view.querySelector("#select")!.addEventListener("click", () => {
    state.selectedPatient = patient.patient_id;
    render();
  });
  view.querySelector("#artifacts")!.replaceChildren(
    ...artifacts.map((a) =>
      el(
        `<li class="card"><strong>${a.kind}</strong> ${a.artifact_id}
         <span>${a.byte_size} bytes, ${a.created_at}</span></li>`,
      ),
    ),
  );
  root().replaceChildren(view);
}

// -- recording ----------------------------------------------------------------

function badgeClass(severity: string | undefined): string {
  return severity === "bad" ? "badge bad" : severity === "warn" ? "badge warn" : "badge ok";
}

function drawLive(view: HTMLElement): void {
  const scale = { width: 600, height: 80, yMin: -150, yMax: 150 };
  const charts = view.querySelector("#charts")!;
  charts.replaceChildren(
    ...liveStore.channels().map((channel) => {
      const badge = liveStore.badgeFor(channel);
      const pairs = liveStore.series[channel];
      const gaps = gapRects(
        liveStore.gaps,
        Math.max(0, liveStore.streamSeconds - 2),
        2,
        scale,
      );
      const wrapper = el(`
        <div class="channel">
          <header class="row">
            <strong>${channel}</strong>
            <span class="${badgeClass(badge?.severity)}">${badge ? `${badge.kind}` : "ok"}</span>
          </header>
          <svg viewBox="0 0 ${scale.width} ${scale.height}" preserveAspectRatio="none">
            ${gaps.map((g) => `<rect class="gap" x="${g.x}" y="0" width="${g.width}" height="${scale.height}" />`).join("")}
            <path class="envelope" d="${envelopePath(pairs, scale)}" />
          </svg>
        </div>`);
      return wrapper;
    }),
  );
  const status = view.querySelector("#live-status")!;
  status.textContent = liveStore.reconnecting
    ? "reconnecting..."
    : `state: ${liveStore.state}`;
  status.className = liveStore.reconnecting ? "error" : "";
}

async function renderRecord(): Promise<void> {
  const { devices } = await client!.listDevices();
  const view = el(`
    <section>
      <h1>Recording</h1>
      <p>Patient: <strong>${state.selectedPatient ?? "none selected"}</strong></p>
      <div class="row">
        <select id="device"></select>
        <button id="connect">Connect</button>
        <button id="start" disabled>Start recording</button>
        <button id="stop" disabled>Stop</button>
      </div>
      <p id="live-status"></p>
      <div id="charts"></div>
      <p id="review"></p>
    </section>`);
  const deviceSelect = view.querySelector("#device") as HTMLSelectElement;
  deviceSelect.replaceChildren(
    ...devices.map((d) =>
      el(`<option value="${d.name}" ${d.online ? "" : "disabled"}>
            ${d.name} ${d.online ? "" : "(offline)"}</option>`),
    ) as unknown as Node[],
  );
  const startButton = view.querySelector("#start") as HTMLButtonElement;
  const stopButton = view.querySelector("#stop") as HTMLButtonElement;
  const refreshControls = () => {
    startButton.disabled = !state.canStartRecording;
    stopButton.disabled = !state.canStopRecording;
  };

  view.querySelector("#connect")!.addEventListener("click", () => {
    const chosen = devices.find((d) => d.name === deviceSelect.value);
    state.device = chosen ? { name: chosen.name, online: chosen.online } : null;
    refreshControls();
  });

  startButton.addEventListener("click", async () => {
    if (!state.canStartRecording) return;
    const created = await client!.createSession({
      patient_id: state.selectedPatient!,
      device: state.device!.name,
    });
    state.sessionId = created.session_id;
    liveStore = new LiveViewStore();
    liveSocket?.close();
    liveSocket = client!.liveStream(created.session_id, (message: LiveMessage) => {
      liveStore.apply(message);
      state.sessionState = liveStore.state as any;
      drawLive(view);
      refreshControls();
      if (liveStore.artifactId) {
        view.querySelector("#review")!.textContent =
          `stored as ${liveStore.artifactId} — review in the patient's artifact list`;
      }
    });
    refreshControls();
  });

  stopButton.addEventListener("click", async () => {
    if (!state.canStopRecording || !state.sessionId) return;
    await client!.stopSession(state.sessionId);
  });

  refreshControls();
  root().replaceChildren(view);
}

// -- screening ----------------------------------------------------------------

function drawQuestion(view: HTMLElement): void {
  const host = view.querySelector("#question")!;
  const progress = view.querySelector("#progress")!;
  if (!flow) return;
  progress.textContent = `${flow.answers.size} answered`;
  if (flow.complete()) {
    const submit = el(`<button id="submit">Submit response</button>`);
    submit.addEventListener("click", submitResponse(view));
    host.replaceChildren(el(`<p>All questions answered.</p>`), submit);
    return;
  }
  const item = flow.current()!;
  const card = el(`
    <div class="card">
      <p>${item.text}</p>
      <div class="row" id="choices"></div>
    </div>`);
  const choices = card.querySelector("#choices")!;
  const options: Array<[string, boolean | string]> =
    item.type === "boolean"
      ? [
          ["Yes", true],
          ["No", false],
        ]
      : item.answerOptions.map((code) => [code, code]);
  for (const [label, value] of options) {
    const button = el(`<button>${label}</button>`);
    button.addEventListener("click", () => {
      flow!.answer(item.linkId, value);
      drawQuestion(view);
    });
    choices.appendChild(button);
  }
  host.replaceChildren(card);
}

function submitResponse(view: HTMLElement) {
  return async () => {
    if (!flow || !state.selectedPatient) return;
    const outcome = view.querySelector("#outcome")!;
    pendingResponse =
      pendingResponse ??
      flow.buildResponse(state.selectedPatient, new Date().toISOString());
    try {
      const reply = await client!.submitResponse(state.selectedPatient, pendingResponse);
      pendingResponse = null; // only clear once the gateway accepted it
      outcome.innerHTML = "";
      outcome.appendChild(
        el(`<p class="tier ${reply.risk.tier}">
              ${reply.risk.tier.toUpperCase()} — score ${reply.risk.score},
              ${reply.risk.action}</p>`),
      );
    } catch (error) {
      const retry = el(`<button>Retry submission</button>`);
      retry.addEventListener("click", submitResponse(view));
      outcome.replaceChildren(
        el(`<p class="error">submit failed: ${
          error instanceof ApiError ? error.detail : "network error"
        } (answers kept locally)</p>`),
        retry,
      );
    }
  };
}

async function renderScreen(): Promise<void> {
  if (!state.selectedPatient) {
    root().replaceChildren(el(`<p class="error">Select a patient first.</p>`));
    return;
  }
  const { questionnaires } = await client!.listQuestionnaires();
  const initial = questionnaires.find((q) => !q.canonical_id.endsWith("-followup"));
  const doc = await client!.getQuestionnaire(initial!.canonical_id);
  flowModel = parseQuestionnaire(doc);
  flow = new QuestionnaireFlow(flowModel);
  pendingResponse = null;
  const view = el(`
    <section>
      <h1>${flowModel.title}</h1>
      <p>Patient: <strong>${state.selectedPatient}</strong> — <span id="progress"></span></p>
      <div id="question"></div>
      <div id="outcome"></div>
    </section>`);
  drawQuestion(view);
  root().replaceChildren(view);
}

// -- router ----------------------------------------------------------------

async function render(): Promise<void> {
  if (!client) {
    renderLogin();
    return;
  }
  const hash = window.location.hash || "#/patients";
  const detail = hash.match(/^#\/patients\/(?!new$)([^/]+)$/);
  try {
    if (hash === "#/patients") await renderPatients();
    else if (hash === "#/patients/new") renderAddPatient();
    else if (detail) await renderPatientDetail(detail[1]);
    else if (hash === "#/record") await renderRecord();
    else if (hash === "#/screen") await renderScreen();
    else await renderPatients();
  } catch (error) {
    root().replaceChildren(
      el(`<p class="error">${error instanceof ApiError ? error.detail : error}</p>`),
    );
  }
}

window.addEventListener("hashchange", () => void render());
window.addEventListener("DOMContentLoaded", () => void render());

export { render };
