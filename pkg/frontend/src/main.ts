// Entry point: connect to an existing session (?api=…&session=…) or create
// one against a device emulator from the little setup form.

import { ApiClient, ApiError } from "./api.js";
import { RefereeConsole } from "./controller.js";
import { render } from "./dom.js";

const root = document.getElementById("app") as HTMLElement;
const params = new URLSearchParams(window.location.search);
const defaultApi = params.get("api") ?? "http://127.0.0.1:8750";

async function attach(api: ApiClient, sessionId: string): Promise<void> {
  const console_ = await RefereeConsole.connect(api, sessionId, (state) =>
    render(root, state, {
      onThrow: (player) => void console_.triggerThrow(player),
      onRemeasure: (bouleId) => void console_.triggerRemeasure(bouleId),
      onScore: () => void console_.triggerScore(),
    }),
  );
}

function setupForm(): void {
  root.textContent = "";
  const form = document.createElement("div");
  form.className = "setup";
  form.innerHTML = `
    <label>service <input id="api" value="${defaultApi}" size="28"></label>
    <label>session id <input id="session" size="14" placeholder="existing id"></label>
    <button id="connect">connect</button>
    <span class="sep">or</span>
    <label>device <input id="device" size="20" placeholder="127.0.0.1:9750"></label>
    <button id="create">new session</button>
    <div id="setup-error" class="banner error" hidden></div>
  `;
  root.appendChild(form);
  const fail = (msg: string) => {
    const box = document.getElementById("setup-error") as HTMLElement;
    box.textContent = msg;
    box.hidden = false;
  };
  const apiInput = document.getElementById("api") as HTMLInputElement;
  (document.getElementById("connect") as HTMLButtonElement).onclick = () => {
    const sid = (document.getElementById("session") as HTMLInputElement).value.trim();
    if (sid) {
      void attach(new ApiClient(apiInput.value.trim()), sid);
    }
  };
  (document.getElementById("create") as HTMLButtonElement).onclick = async () => {
    const device = (document.getElementById("device") as HTMLInputElement).value.trim();
    const api = new ApiClient(apiInput.value.trim());
    try {
      const created = await api.createSession({ device_address: device });
      await attach(api, created.session_id);
    } catch (err) {
      fail(err instanceof ApiError ? `${err.code}: ${err.detail}` : String(err));
    }
  };
}

const sessionParam = params.get("session");
if (sessionParam) {
  void attach(new ApiClient(defaultApi), sessionParam);
} else {
  setupForm();
}
