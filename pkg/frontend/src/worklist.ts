/** Worklist view model: the server's job list, in the server's order. */

import type { Job } from "./types";

export interface WorklistEntry {
  key: string;
  item: string;
  itemName: string;
  vertex: string;
  activity: string;
  transition: Job["transition"];
  requiredRole: string;
  /** Complete on a schema-bearing activity needs a form first. */
  needsForm: boolean;
}

export function worklistEntries(
  jobs: Job[],
  schemaByActivity: (item: string, vertex: string) => boolean,
): WorklistEntry[] {
  return jobs.map((job) => ({
    key: `${job.item}:${job.vertex}:${job.transition}`,
    item: job.item,
    itemName: job.item_name,
    vertex: job.vertex,
    activity: job.activity,
    transition: job.transition,
    requiredRole: job.required_role,
    needsForm: job.transition === "Complete" && schemaByActivity(job.item, job.vertex),
  }));
}

export interface PollState<T> {
  value: T | null;
  error: string | null;
}

/** Repeatedly fetch a resource; errors are surfaced, never swallowed. */
export class Poller<T> {
  private timer: ReturnType<typeof setInterval> | null = null;
  state: PollState<T> = { value: null, error: null };

  constructor(
    private fetcher: () => Promise<T>,
    private onChange: (state: PollState<T>) => void,
    private intervalMs = 2000,
  ) {}

  async tick(): Promise<void> {
    try {
      const value = await this.fetcher();
      this.state = { value, error: null };
    } catch (error) {
      this.state = { ...this.state, error: String(error) };
    }
    this.onChange(this.state);
  }

  start(): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
