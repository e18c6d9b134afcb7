import type {
  AccessLogEntry,
  Alert,
  LabelSpec,
  ModelInfo,
  PolicyDoc,
} from "./types.js";

/** Error carrying the server's own message so it can surface inline. */
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const text = await resp.text();
  if (!resp.ok) {
    let message = `${resp.status}`;
    try {
      message = (JSON.parse(text) as { error?: string }).error ?? message;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, message);
  }
  return JSON.parse(text) as T;
}

function post<T>(url: string, body?: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? null : JSON.stringify(body),
  });
}

export class HubApi {
  constructor(public base: string) {}

  getAlerts(status?: string): Promise<Alert[]> {
    const qs = status ? `?status=${encodeURIComponent(status)}` : "";
    return request<{ alerts: Alert[] }>(`${this.base}/alerts${qs}`).then(
      (d) => d.alerts,
    );
  }

  labelAlert(alertId: string, spec: LabelSpec): Promise<Alert> {
    return post<{ alert: Alert }>(
      `${this.base}/alerts/${alertId}/label`,
      spec,
    ).then((d) => d.alert);
  }

  dismissAlert(alertId: string): Promise<Alert> {
    return post<{ alert: Alert }>(`${this.base}/alerts/${alertId}/dismiss`).then(
      (d) => d.alert,
    );
  }

  getPolicy(): Promise<PolicyDoc> {
    return request<PolicyDoc>(`${this.base}/policy`);
  }

  putPolicy(doc: PolicyDoc): Promise<PolicyDoc> {
    return request<PolicyDoc>(`${this.base}/policy`, {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  getPersons(): Promise<Record<string, number>> {
    return request<{ persons: Record<string, number> }>(
      `${this.base}/persons`,
    ).then((d) => d.persons);
  }

  getModels(): Promise<ModelInfo[]> {
    return request<{ models: ModelInfo[] }>(`${this.base}/models`).then(
      (d) => d.models,
    );
  }

  getAccessLog(): Promise<AccessLogEntry[]> {
    return request<{ log: AccessLogEntry[] }>(`${this.base}/log/access`).then(
      (d) => d.log,
    );
  }

  checkAccess(personId: string, deviceId: string): Promise<string> {
    return post<{ outcome: string }>(`${this.base}/access/check`, {
      person_id: personId,
      device_id: deviceId,
    }).then((d) => d.outcome);
  }

  async fetchChip(file: string): Promise<ArrayBuffer> {
    const resp = await fetch(`${this.base}/chips/${file}`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `chip ${file} not found`);
    }
    return resp.arrayBuffer();
  }
}
