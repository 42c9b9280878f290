import type { LatencyRecord, SessionEvent } from "./types.js";

export interface TrendPoint {
  t: number;
  value: number;
  quality: string;
}

/** Rolling per-variable history for the session panel's trend display. */
export class TrendBuffer {
  private series = new Map<string, TrendPoint[]>();

  constructor(public capacity = 300) {}

  push(variable: string, point: TrendPoint): void {
    let points = this.series.get(variable);
    if (!points) {
      points = [];
      this.series.set(variable, points);
    }
    points.push(point);
    if (points.length > this.capacity) points.splice(0, points.length - this.capacity);
  }

  get(variable: string): TrendPoint[] {
    return this.series.get(variable) ?? [];
  }

  variables(): string[] {
    return [...this.series.keys()].sort();
  }

  latest(variable: string): TrendPoint | undefined {
    const points = this.get(variable);
    return points[points.length - 1];
  }

  /** Fold one session event into the buffer; returns true if it changed. */
  apply(event: SessionEvent): boolean {
    if (event.type === "value") {
      this.push(event.var, { t: event.t, value: event.value, quality: event.quality });
      return true;
    }
    if (event.type === "snapshot") {
      for (const [variable, value] of Object.entries(event.values)) {
        this.push(variable, { t: event.t, value, quality: "Good" });
      }
      return true;
    }
    return false;
  }
}

const BADGES: Record<LatencyRecord["path_class"], string> = {
  Local: "badge-local",
  SharedAlready: "badge-shared",
  ExtendOverlap: "badge-extend",
  NewOverlap: "badge-new",
};

export interface LatencyStripEntry extends LatencyRecord {
  badge: string;
}

/** Recent service-open latencies with a CSS badge per resolution path. */
export class LatencyStrip {
  entries: LatencyStripEntry[] = [];

  constructor(public capacity = 20) {}

  push(record: LatencyRecord): LatencyStripEntry {
    const entry = { ...record, badge: BADGES[record.path_class] ?? "badge-unknown" };
    this.entries.push(entry);
    if (this.entries.length > this.capacity) this.entries.shift();
    return entry;
  }
}
