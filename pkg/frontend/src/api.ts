/** Typed client over the kernel's HTTP API.
 *
 * The console holds no authoritative state: everything rendered comes out
 * of these calls, and writes carry X-Expected-Seq so a concurrent actor
 * surfaces as a 409 rather than a silent overwrite.
 */

import type {
  CatalogEntry,
  ErrorBody,
  EventRecordDoc,
  ItemRef,
  ItemState,
  Job,
  WorkflowDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ErrorBody,
  ) {
    super(`${body.error_code}: ${body.message}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export class ConsoleApi {
  constructor(
    private base: string = "",
    public token: string | null = null,
    public agent: string | null = null,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers = new Headers(init?.headers);
    if (this.token) headers.set("Authorization", `Bearer ${this.token}`);
    const response = await fetch(this.base + path, { ...init, headers });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, parsed as ErrorBody);
    }
    return parsed as T;
  }

  listItems(type?: string): Promise<ItemRef[]> {
    return this.request(`/items${type ? `?type=${type}` : ""}`);
  }

  getItem(uuid: string): Promise<ItemState> {
    return this.request(`/items/${uuid}`);
  }

  history(uuid: string, from?: number, to?: number): Promise<EventRecordDoc[]> {
    const params = new URLSearchParams();
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    const query = params.toString();
    return this.request(`/items/${uuid}/history${query ? `?${query}` : ""}`);
  }

  at(uuid: string, seq: number): Promise<ItemState> {
    return this.request(`/items/${uuid}/at/${seq}`);
  }

  jobs(agentUuid: string): Promise<Job[]> {
    return this.request(`/agents/${agentUuid}/jobs`);
  }

  catalog(): Promise<CatalogEntry[]> {
    return this.request(`/descriptions`);
  }

  /** Resolve the configured agent name to its item uuid. */
  async resolveAgent(): Promise<ItemRef> {
    if (!this.agent) throw new Error("no agent configured");
    const agents = await this.listItems("agent");
    const match = agents.find((a) => a.name === this.agent || a.uuid === this.agent);
    if (!match) throw new Error(`no agent named '${this.agent}'`);
    return match;
  }

  execute(
    item: string,
    expectedSeq: number,
    vertex: string,
    transition: string,
    outcome?: Record<string, unknown>,
  ): Promise<EventRecordDoc> {
    return this.request(`/items/${item}/execute`, {
      method: "POST",
      headers: { "X-Expected-Seq": String(expectedSeq), "Content-Type": "application/json" },
      body: JSON.stringify({
        vertex,
        transition,
        outcome: outcome ?? null,
        agent: this.agent,
      }),
    });
  }

  editWorkflow(item: string, expectedSeq: number, document: WorkflowDoc): Promise<EventRecordDoc> {
    return this.request(`/items/${item}/workflow/edit`, {
      method: "POST",
      headers: { "X-Expected-Seq": String(expectedSeq), "Content-Type": "application/json" },
      body: JSON.stringify({ document, agent: this.agent }),
    });
  }
}
