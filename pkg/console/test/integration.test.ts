// @vitest-environment happy-dom
/**
 * End-to-end against a live `sof serve`: the wire protocol pushes an
 * escalation, the console renders it within a second, labeling retrains
 * and surfaces the new model version, and a policy edit flips a simulated
 * access decision. Requires the Python package installed (pip install -e ..).
 */

import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { HubApi } from "../src/api.js";
import { EventStream } from "../src/sse.js";
import { ConsoleStore } from "../src/state.js";
import { mountConsole } from "../src/ui.js";
import type { HubEvent } from "../src/types.js";

const PYTHON = process.env.SOF_PYTHON ?? "python3";

let httpPort = 0;
let wirePort = 0;
let persistDir = "";
let serve: ChildProcess | null = null;

let api: HubApi;
let store: ConsoleStore;
let stream: EventStream;
let root: HTMLElement;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (typeof address === "object" && address) {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

function startServe(): Promise<ChildProcess> {
  const child = spawn(PYTHON, [
    "-m", "sof", "serve",
    "--persist", persistDir,
    "--http-port", String(httpPort),
    "--wire-port", String(wirePort),
    "--sse-heartbeat", "0.5",
  ], { stdio: ["ignore", "pipe", "pipe"] });
  return new Promise((resolve, reject) => {
    let out = "";
    const timer = setTimeout(
      () => reject(new Error(`sof serve did not come up:\n${out}`)), 30_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
      if (out.includes("ready")) {
        clearTimeout(timer);
        resolve(child);
      }
    });
    child.stderr!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`sof serve exited early (${code}):\n${out}`));
    });
  });
}

function runCli(args: string[]): Promise<void> {
  return new Promise((resolve, reject) => {
    const child = spawn(PYTHON, ["-m", "sof", ...args], { stdio: "pipe" });
    let err = "";
    child.stderr!.on("data", (c: Buffer) => {
      err += c.toString();
    });
    child.on("exit", (code) => {
      code === 0 ? resolve() : reject(new Error(`sof ${args[0]} failed: ${err}`));
    });
  });
}

async function waitFor(cond: () => boolean, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) {
      return;
    }
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error("condition not met in time");
}

beforeAll(async () => {
  httpPort = await freePort();
  wirePort = await freePort();
  persistDir = mkdtempSync(join(tmpdir(), "sof-console-it-"));
  serve = await startServe();

  // the console is served from the hub's own origin in production; mirror
  // that so happy-dom's same-origin policy allows the API and event stream
  interface HappyDomWindow { happyDOM?: { setURL(url: string): void } }
  (window as unknown as HappyDomWindow).happyDOM?.setURL(
    `http://127.0.0.1:${httpPort}/`);

  api = new HubApi(`http://127.0.0.1:${httpPort}`);
  store = new ConsoleStore(api);
  root = document.createElement("div");
  document.body.append(root);
  mountConsole(root, store);
  stream = new EventStream(`${api.base}/events`, {
    onEvent: (data) => store.applyEvent(JSON.parse(data) as HubEvent),
    onStatus: (status) => {
      store.setConnection(status);
      if (status === "connected") {
        void store.refreshAll();
      }
    },
  }, { retryDelayMs: 200, maxRetryDelayMs: 500, heartbeatTimeoutMs: 4000 });
  stream.start();
  await waitFor(() => store.state.connection === "connected");
}, 60_000);

afterAll(() => {
  stream?.stop();
  serve?.kill("SIGTERM");
});

describe("console against a live hub", () => {
  it("renders a pushed alert within one second", async () => {
    await runCli([
      "send-escalation", "--wire", `127.0.0.1:${wirePort}`,
      "--series-id", "it-visit-1", "--node-id", "it-node", "--chips", "3",
    ]);
    const sentAt = Date.now();
    await waitFor(
      () => root.querySelector('[data-alert="alert-it-visit-1"]') !== null,
      5000);
    expect(Date.now() - sentAt).toBeLessThan(1000);
    expect(root.textContent).toContain("Pending alerts (1)");
  }, 60_000);

  it("labeling removes the alert and the version history gains v2", async () => {
    const ok = await store.labelAlert("alert-it-visit-1", {
      new: { display_name: "Visitor One", permission_level: 2 },
    });
    expect(ok).toBe(true);
    expect(store.pendingAlerts()).toHaveLength(0);
    expect(root.textContent).toContain("Pending alerts (0)");
    expect(root.textContent).toContain("as visitor-one");

    // the job worker retrains and the version event refreshes the list
    await waitFor(() => store.state.models.some((m) => m.version === 2), 30_000);
    (root.querySelector('[data-tab="Models"]') as HTMLButtonElement).click();
    expect(root.querySelector('[data-version="2"]')).toBeTruthy();

    const persons = await api.getPersons();
    expect(persons["visitor-one"]).toBe(2);
  }, 60_000);

  it("double labeling surfaces the server's error inline", async () => {
    const ok = await store.labelAlert("alert-it-visit-1", { existing: "visitor-one" });
    expect(ok).toBe(false);
    expect(store.state.alertErrors["alert-it-visit-1"]).toMatch(/LABELED/);
  });

  it("policy edit changes a subsequent simulated access outcome", async () => {
    const before = await store.checkAccess("visitor-one", "front_door");
    expect(before).toBe("GRANT"); // resident level 2 vs min level 1

    const saved = await store.saveDevice("front_door", 3, false);
    expect(saved).toBe(true);

    const after = await store.checkAccess("visitor-one", "front_door");
    expect(after).toBe("DENY");

    const log = await api.getAccessLog();
    const checks = log.filter((e) => e.kind === "check");
    expect(checks.length).toBeGreaterThanOrEqual(2);
    expect(checks[checks.length - 1]!.outcome).toBe("DENY");
  });

  it("reconnects after a hub restart and refetches without duplicates", async () => {
    serve!.kill("SIGTERM");
    await waitFor(() => store.state.connection === "degraded", 15_000);

    serve = await startServe(); // same ports, same persist dir
    await waitFor(() => store.state.connection === "connected", 15_000);
    await waitFor(() => store.state.alerts.length > 0, 10_000);

    const ids = store.state.alerts.map((a) => a.alert_id);
    expect(new Set(ids).size).toBe(ids.length);
    const serverAlerts = await api.getAlerts();
    expect(ids.sort()).toEqual(serverAlerts.map((a) => a.alert_id).sort());
    (root.querySelector('[data-tab="Alerts"]') as HTMLButtonElement).click();
    expect(root.querySelectorAll('[data-alert="alert-it-visit-1"]')).toHaveLength(1);
  }, 60_000);
});
