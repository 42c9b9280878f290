import { sseData } from "./sse.js";
import type {
  OpenResult,
  ServiceEntry,
  SessionEvent,
  SetpointVerdict,
  Topology,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`gateway ${status}: ${detail}`);
  }
}

async function fail(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    detail = (await response.json()).detail ?? detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new GatewayError(response.status, String(detail));
}

/** HTTP client for one organization's gateway. */
export class GatewayClient {
  constructor(
    public baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) await fail(response);
    return response.json();
  }

  listServices(scope: "local" | "reachable" = "reachable"): Promise<ServiceEntry[]> {
    return this.get(`/services?scope=${scope}`);
  }

  topology(): Promise<Topology> {
    return this.get("/topology");
  }

  async open(serviceName: string): Promise<OpenResult> {
    const response = await this.fetchFn(`${this.baseUrl}/operators`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ service_name: serviceName }),
    });
    if (!response.ok) await fail(response);
    return response.json();
  }

  async close(raId: string): Promise<void> {
    const response = await this.fetchFn(`${this.baseUrl}/operators/${raId}`, {
      method: "DELETE",
    });
    if (!response.ok && response.status !== 404) await fail(response);
  }

  /** Send a setpoint; rejections come back as a verdict, not an exception. */
  async setpoint(raId: string, variable: string, value: number): Promise<SetpointVerdict> {
    const response = await this.fetchFn(`${this.baseUrl}/operators/${raId}/setpoints`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ var: variable, value }),
    });
    if (response.ok) return { accepted: true, reason: "" };
    if (response.status === 422 || response.status === 409) {
      const body = await response.json().catch(() => ({ detail: "rejected" }));
      return { accepted: false, reason: String(body.detail ?? "rejected") };
    }
    return fail(response);
  }

  /** Stream session events until the session closes or the signal aborts. */
  async *events(raId: string, signal?: AbortSignal): AsyncGenerator<SessionEvent> {
    const response = await this.fetchFn(`${this.baseUrl}/operators/${raId}/events`, {
      signal,
    });
    if (!response.ok) await fail(response);
    if (!response.body) throw new GatewayError(0, "no response body");
    for await (const data of sseData(response.body)) {
      yield JSON.parse(data) as SessionEvent;
    }
  }
}
