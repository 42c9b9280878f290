/** JSON shapes served by an organization gateway. */

export interface ServiceEntry {
  service_name: string;
  provider: string;
  home_org: string;
}

export interface LatencyRecord {
  requester_org: string;
  service_name: string;
  path_class: "Local" | "SharedAlready" | "ExtendOverlap" | "NewOverlap";
  t_service_ms: number;
}

export interface OpenResult {
  ra_id: string;
  session: {
    service_name: string;
    provider: string;
    opened_at: number;
  };
  latency_record: LatencyRecord;
}

export interface TopologyLink {
  a: string;
  b: string;
  shared: string[];
}

export interface Topology {
  orgs: string[];
  links: TopologyLink[];
  generated_at: number;
}

export type SessionEvent =
  | { type: "session"; state: string; path_class?: string; t: number }
  | { type: "snapshot"; values: Record<string, number>; t: number }
  | { type: "value"; var: string; value: number; quality: string; t: number };

export interface SetpointVerdict {
  accepted: boolean;
  reason: string;
}
