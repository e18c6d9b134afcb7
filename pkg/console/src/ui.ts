/**
 * DOM rendering: one render() per store change. All rows come straight
 * from store state; handlers call store actions and let the next render
 * show the server's answer.
 */

import type { ConsoleState, ConsoleStore } from "./state.js";
import type { Alert } from "./types.js";
import { decodeNetpbm, toRgba } from "./pgm.js";
import { levelName } from "./types.js";

const TABS = ["Alerts", "People", "Devices", "Access log", "Models"] as const;
type Tab = (typeof TABS)[number];

let activeTab: Tab = "Alerts";
const chipCache = new Map<string, HTMLCanvasElement>();

export function mountConsole(root: HTMLElement, store: ConsoleStore): void {
  root.innerHTML = "";
  const header = el("header", { class: "topbar" });
  const title = el("h1", {}, "SoF console");
  const status = el("span", { class: "status", id: "connection-status" });
  header.append(title, status);

  const tabbar = el("nav", { class: "tabbar" });
  const content = el("main", { class: "content", id: "content" });
  for (const tab of TABS) {
    const button = el("button", { class: "tab", "data-tab": tab }, tab);
    button.addEventListener("click", () => {
      activeTab = tab;
      render(root, store);
    });
    tabbar.append(button);
  }
  root.append(header, tabbar, content);

  store.subscribe(() => render(root, store));
  render(root, store);
}

export function render(root: HTMLElement, store: ConsoleStore): void {
  const state = store.state;
  const status = root.querySelector("#connection-status");
  if (status) {
    status.textContent = state.connection;
    status.className = `status status-${state.connection}`;
  }
  for (const button of root.querySelectorAll(".tab")) {
    button.classList.toggle("active",
      button.getAttribute("data-tab") === activeTab);
  }
  const content = root.querySelector("#content");
  if (!content) {
    return;
  }
  content.innerHTML = "";
  switch (activeTab) {
    case "Alerts":
      content.append(alertsView(store, state));
      break;
    case "People":
      content.append(peopleView(store, state));
      break;
    case "Devices":
      content.append(devicesView(store, state));
      break;
    case "Access log":
      content.append(accessLogView(store, state));
      break;
    case "Models":
      content.append(modelsView(state));
      break;
  }
}

// -- views ---------------------------------------------------------------

function alertsView(store: ConsoleStore, state: ConsoleState): HTMLElement {
  const section = el("section", { class: "alerts" });
  const pending = state.alerts.filter((a) => a.status === "PENDING");
  section.append(el("h2", {}, `Pending alerts (${pending.length})`));
  if (!pending.length) {
    section.append(el("p", { class: "empty" }, "No one is waiting."));
  }
  for (const alert of pending) {
    section.append(alertRow(store, state, alert));
  }
  const resolved = state.alerts.filter((a) => a.status !== "PENDING");
  if (resolved.length) {
    section.append(el("h2", {}, "Resolved"));
    for (const alert of resolved) {
      const row = el("div", { class: "alert-row resolved", "data-alert": alert.alert_id });
      row.append(
        el("span", {}, `${alert.alert_id} — ${alert.status}`),
        el("span", { class: "dim" },
          alert.labeled_as ? ` as ${alert.labeled_as}` : ""),
      );
      section.append(row);
    }
  }
  return section;
}

function alertRow(store: ConsoleStore, state: ConsoleState, alert: Alert): HTMLElement {
  const row = el("div", { class: "alert-row", "data-alert": alert.alert_id });
  const thumbs = el("div", { class: "thumbs" });
  for (const chip of alert.chips) {
    thumbs.append(chipThumb(store, chip));
  }
  const meta = el("div", { class: "meta" },
    `${alert.alert_id} from ${alert.node_id}`);

  const form = el("div", { class: "label-form" });
  const nameInput = el("input", {
    type: "text", placeholder: "person name", "data-role": "name",
  }) as HTMLInputElement;
  const levelSelect = levelSelector(1);
  const labelButton = el("button", { "data-role": "label" }, "Label") as HTMLButtonElement;
  const dismissButton = el("button", { "data-role": "dismiss" }, "Dismiss") as HTMLButtonElement;
  const busy = Boolean(state.pending[alert.alert_id]);
  labelButton.disabled = busy;
  dismissButton.disabled = busy;

  labelButton.addEventListener("click", () => {
    const name = nameInput.value.trim();
    if (!name) {
      return;
    }
    const known = Object.prototype.hasOwnProperty.call(state.persons, name);
    void store.labelAlert(alert.alert_id, known
      ? { existing: name }
      : { new: { display_name: name, permission_level: Number(levelSelect.value) } });
  });
  dismissButton.addEventListener("click", () => {
    void store.dismissAlert(alert.alert_id);
  });

  form.append(nameInput, levelSelect, labelButton, dismissButton);
  row.append(thumbs, meta, form);
  const error = state.alertErrors[alert.alert_id];
  if (error) {
    row.append(el("p", { class: "error", "data-role": "alert-error" }, error));
  }
  return row;
}

function chipThumb(store: ConsoleStore, file: string): HTMLElement {
  const cached = chipCache.get(file);
  if (cached) {
    return cached;
  }
  const canvas = el("canvas", {
    width: "96", height: "96", class: "chip", title: file,
  }) as HTMLCanvasElement;
  chipCache.set(file, canvas);
  void store.api.fetchChip(file).then((buffer) => {
    const decoded = decodeNetpbm(buffer);
    const ctx = canvas.getContext("2d");
    if (ctx) {
      const image = new ImageData(toRgba(decoded), decoded.width, decoded.height);
      ctx.putImageData(image, 0, 0);
    }
  }).catch(() => {
    canvas.classList.add("chip-missing");
  });
  return canvas;
}

function peopleView(store: ConsoleStore, state: ConsoleState): HTMLElement {
  const section = el("section", { class: "people" });
  section.append(el("h2", {}, "People"));
  const table = el("table", { class: "grid" });
  table.append(el("tr", {},
    el("th", {}, "person"), el("th", {}, "level"), el("th", {}, "")));
  for (const [pid, level] of Object.entries(state.persons)) {
    const select = levelSelector(level);
    const save = el("button", {}, "Save") as HTMLButtonElement;
    save.addEventListener("click", () => {
      void store.setPersonLevel(pid, Number(select.value));
    });
    table.append(el("tr", { "data-person": pid },
      el("td", {}, pid),
      el("td", {}, select),
      el("td", {}, save)));
  }
  section.append(table);
  return section;
}

function devicesView(store: ConsoleStore, state: ConsoleState): HTMLElement {
  const section = el("section", { class: "devices" });
  section.append(el("h2", {}, "Device policy"));
  if (state.policyError) {
    section.append(el("p", { class: "error", "data-role": "policy-error" },
      state.policyError));
  }
  if (!state.policy) {
    section.append(el("p", { class: "empty" }, "Loading policy..."));
    return section;
  }
  const table = el("table", { class: "grid" });
  table.append(el("tr", {},
    el("th", {}, "device"), el("th", {}, "min level"),
    el("th", {}, "restricted"), el("th", {}, "")));
  for (const [deviceId, rule] of Object.entries(state.policy.devices)) {
    const select = levelSelector(rule.min_level);
    const restricted = el("input", { type: "checkbox" }) as HTMLInputElement;
    restricted.checked = rule.restricted;
    const save = el("button", {}, "Save") as HTMLButtonElement;
    save.disabled = Boolean(state.pending[`policy:${deviceId}`]);
    save.addEventListener("click", () => {
      void store.saveDevice(deviceId, Number(select.value), restricted.checked);
    });
    table.append(el("tr", { "data-device": deviceId },
      el("td", {}, `${rule.name} (${deviceId})`),
      el("td", {}, select),
      el("td", {}, restricted),
      el("td", {}, save)));
  }
  section.append(table);
  return section;
}

function accessLogView(store: ConsoleStore, state: ConsoleState): HTMLElement {
  const section = el("section", { class: "access-log" });
  section.append(el("h2", {}, "Access log"));

  const form = el("div", { class: "check-form" });
  const person = el("input", {
    type: "text", placeholder: "person id", "data-role": "check-person",
  }) as HTMLInputElement;
  const device = el("input", {
    type: "text", placeholder: "device id", "data-role": "check-device",
  }) as HTMLInputElement;
  const go = el("button", { "data-role": "check" }, "Check access") as HTMLButtonElement;
  go.addEventListener("click", () => {
    void store.checkAccess(person.value.trim(), device.value.trim());
  });
  form.append(person, device, go);
  if (state.lastCheck) {
    form.append(el("span", { class: "check-result", "data-role": "check-result" },
      `${state.lastCheck.person} @ ${state.lastCheck.device}: ${state.lastCheck.outcome}`));
  }
  section.append(form);

  const table = el("table", { class: "grid" });
  table.append(el("tr", {},
    el("th", {}, "ts"), el("th", {}, "kind"), el("th", {}, "person"),
    el("th", {}, "device"), el("th", {}, "outcome")));
  for (const entry of state.accessLog.slice(-100).reverse()) {
    table.append(el("tr", {},
      el("td", {}, String(entry.ts)),
      el("td", {}, entry.kind),
      el("td", {}, entry.person ?? ""),
      el("td", {}, entry.device ?? entry.model_version?.toString() ?? ""),
      el("td", {}, entry.outcome)));
  }
  section.append(table);
  return section;
}

function modelsView(state: ConsoleState): HTMLElement {
  const section = el("section", { class: "models" });
  section.append(el("h2", {}, "Model versions"));
  const table = el("table", { class: "grid", "data-role": "models" });
  table.append(el("tr", {},
    el("th", {}, "version"), el("th", {}, "created"),
    el("th", {}, "identities"), el("th", {}, "threshold")));
  for (const model of [...state.models].reverse()) {
    table.append(el("tr", { "data-version": String(model.version) },
      el("td", {}, `v${model.version}`),
      el("td", {}, new Date(model.created_at).toISOString()),
      el("td", {}, String(model.gallery_size)),
      el("td", {}, model.tau_accept.toFixed(3))));
  }
  section.append(table);
  return section;
}

// -- helpers ------------------------------------------------------------

function levelSelector(selected: number): HTMLSelectElement {
  const select = el("select", { "data-role": "level" }) as HTMLSelectElement;
  for (let level = 0; level <= 3; level += 1) {
    const option = el("option", { value: String(level) },
      `${level} ${levelName(level)}`) as HTMLOptionElement;
    option.selected = level === selected;
    select.append(option);
  }
  return select;
}

function el(tag: string, attrs: Record<string, string> = {},
            ...children: (string | Node)[]): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}
