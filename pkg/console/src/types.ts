export interface Alert {
  alert_id: string;
  series_id: string;
  node_id: string;
  chips: string[];
  created_at: number;
  status: "PENDING" | "LABELED" | "DISMISSED";
  labeled_as: string | null;
}

export interface DeviceRule {
  name: string;
  min_level: number;
  restricted: boolean;
}

export interface PolicyDoc {
  devices: Record<string, DeviceRule>;
  persons: Record<string, number>;
}

export interface ModelInfo {
  version: number;
  created_at: number;
  gallery_size: number;
  tau_accept: number;
}

export interface AccessLogEntry {
  ts: number;
  outcome: string;
  kind: string;
  person?: string;
  device?: string;
  confidence?: number;
  model_version?: number;
}

export type HubEvent =
  | { type: "alert"; alert: Alert }
  | { type: "model_version"; version: number };

export type LabelSpec =
  | { existing: string }
  | { new: { display_name: string; permission_level: number } };

export const LEVEL_NAMES = ["UNKNOWN", "GUEST", "RESIDENT", "OWNER"] as const;

export function levelName(level: number): string {
  return LEVEL_NAMES[level] ?? `L${level}`;
}
