/**
 * Server-authoritative console state. Every field mirrors a hub API
 * response or event payload; actions call the API and fold the server's
 * answer (or its error text) back in. Nothing is invented client-side and
 * no optimistic updates are kept.
 */

import { ApiError, HubApi } from "./api.js";
import type {
  AccessLogEntry,
  Alert,
  HubEvent,
  LabelSpec,
  ModelInfo,
  PolicyDoc,
} from "./types.js";

export type ConnectionStatus = "connecting" | "connected" | "degraded";

export interface ConsoleState {
  connection: ConnectionStatus;
  alerts: Alert[];
  persons: Record<string, number>;
  policy: PolicyDoc | null;
  models: ModelInfo[];
  accessLog: AccessLogEntry[];
  alertErrors: Record<string, string>;
  policyError: string | null;
  pending: Record<string, boolean>;
  lastCheck: { person: string; device: string; outcome: string } | null;
}

export function initialState(): ConsoleState {
  return {
    connection: "connecting",
    alerts: [],
    persons: {},
    policy: null,
    models: [],
    accessLog: [],
    alertErrors: {},
    policyError: null,
    pending: {},
    lastCheck: null,
  };
}

type Listener = (state: ConsoleState) => void;

export class ConsoleStore {
  state: ConsoleState = initialState();
  private listeners: Listener[] = [];

  constructor(public api: HubApi) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  // -- event/stream reducers -------------------------------------------

  setConnection(status: ConnectionStatus): void {
    this.update({ connection: status });
  }

  applyEvent(event: HubEvent): void {
    if (event.type === "alert") {
      this.upsertAlert(event.alert);
    } else if (event.type === "model_version") {
      void this.refreshModels();
    }
  }

  upsertAlert(alert: Alert): void {
    const alerts = this.state.alerts.slice();
    const index = alerts.findIndex((a) => a.alert_id === alert.alert_id);
    if (index >= 0) {
      alerts[index] = alert;
    } else {
      alerts.push(alert);
    }
    alerts.sort((a, b) => a.alert_id.localeCompare(b.alert_id));
    this.update({ alerts });
  }

  // -- fetches ------------------------------------------------------------

  async refreshAll(): Promise<void> {
    await Promise.all([
      this.refreshAlerts(),
      this.refreshPersons(),
      this.refreshPolicy(),
      this.refreshModels(),
      this.refreshAccessLog(),
    ]);
  }

  async refreshAlerts(): Promise<void> {
    this.update({ alerts: await this.api.getAlerts() });
  }

  async refreshPersons(): Promise<void> {
    this.update({ persons: await this.api.getPersons() });
  }

  async refreshPolicy(): Promise<void> {
    this.update({ policy: await this.api.getPolicy() });
  }

  async refreshModels(): Promise<void> {
    this.update({ models: await this.api.getModels() });
  }

  async refreshAccessLog(): Promise<void> {
    this.update({ accessLog: await this.api.getAccessLog() });
  }

  // -- derived views -------------------------------------------------------

  pendingAlerts(): Alert[] {
    return this.state.alerts.filter((a) => a.status === "PENDING");
  }

  // -- actions ------------------------------------------------------------

  private setPending(key: string, on: boolean): void {
    const pending = { ...this.state.pending };
    if (on) {
      pending[key] = true;
    } else {
      delete pending[key];
    }
    this.update({ pending });
  }

  async labelAlert(alertId: string, spec: LabelSpec): Promise<boolean> {
    this.setPending(alertId, true);
    try {
      const alert = await this.api.labelAlert(alertId, spec);
      this.upsertAlert(alert);
      const errors = { ...this.state.alertErrors };
      delete errors[alertId];
      this.update({ alertErrors: errors });
      await Promise.all([this.refreshPersons(), this.refreshPolicy()]);
      return true;
    } catch (err) {
      this.update({
        alertErrors: {
          ...this.state.alertErrors,
          [alertId]: errorText(err),
        },
      });
      await this.refreshAlerts(); // resync with the server's view
      return false;
    } finally {
      this.setPending(alertId, false);
    }
  }

  async dismissAlert(alertId: string): Promise<boolean> {
    this.setPending(alertId, true);
    try {
      this.upsertAlert(await this.api.dismissAlert(alertId));
      return true;
    } catch (err) {
      this.update({
        alertErrors: {
          ...this.state.alertErrors,
          [alertId]: errorText(err),
        },
      });
      await this.refreshAlerts();
      return false;
    } finally {
      this.setPending(alertId, false);
    }
  }

  async saveDevice(deviceId: string, minLevel: number,
                   restricted: boolean): Promise<boolean> {
    if (!this.state.policy) {
      return false;
    }
    const device = this.state.policy.devices[deviceId];
    if (!device) {
      this.update({ policyError: `no such device: ${deviceId}` });
      return false;
    }
    const doc: PolicyDoc = {
      persons: { ...this.state.policy.persons },
      devices: {
        ...this.state.policy.devices,
        [deviceId]: { ...device, min_level: minLevel, restricted },
      },
    };
    this.setPending(`policy:${deviceId}`, true);
    try {
      this.update({ policy: await this.api.putPolicy(doc), policyError: null });
      return true;
    } catch (err) {
      this.update({ policyError: errorText(err) });
      await this.refreshPolicy();
      return false;
    } finally {
      this.setPending(`policy:${deviceId}`, false);
    }
  }

  async setPersonLevel(personId: string, level: number): Promise<boolean> {
    if (!this.state.policy) {
      return false;
    }
    const doc: PolicyDoc = {
      devices: { ...this.state.policy.devices },
      persons: { ...this.state.policy.persons, [personId]: level },
    };
    try {
      this.update({ policy: await this.api.putPolicy(doc), policyError: null });
      await this.refreshPersons();
      return true;
    } catch (err) {
      this.update({ policyError: errorText(err) });
      return false;
    }
  }

  async checkAccess(person: string, device: string): Promise<string | null> {
    try {
      const outcome = await this.api.checkAccess(person, device);
      this.update({ lastCheck: { person, device, outcome } });
      await this.refreshAccessLog();
      return outcome;
    } catch (err) {
      this.update({ lastCheck: { person, device, outcome: errorText(err) } });
      return null;
    }
  }
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return err instanceof Error ? err.message : String(err);
}
