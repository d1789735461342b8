/** Client-side mirror of the kernel's live-edit rules.
 *
 * Locking here is strictly a UX courtesy: the pending region (vertices still
 * WAITING or never reached) is editable, anything with a lifecycle state or
 * a token is locked. The server re-validates every submitted document and
 * its verdict is final; raw mode exists precisely to prove that.
 */

import type { WorkflowDoc, WorkflowStateDoc } from "./types";

export interface EditLocks {
  /** rule (a or b) mirror: vertex may not be removed or retyped */
  locked: Set<string>;
  /** rule (b) only: vertex currently holds a token */
  tokenHolders: Set<string>;
}

export function editLocks(wf: WorkflowStateDoc): EditLocks {
  const locked = new Set<string>(Object.keys(wf.states));
  const tokenHolders = new Set<string>();
  for (const [vertex, count] of Object.entries(wf.tokens)) {
    if (count > 0) {
      tokenHolders.add(vertex);
      locked.add(vertex);
    }
  }
  return { locked, tokenHolders };
}

export interface LocalViolation {
  rule: "a" | "b";
  vertex: string;
  message: string;
}

/** Pre-flight check mirroring the server's rules (a) and (b). */
export function checkEditLocally(wf: WorkflowStateDoc, next: WorkflowDoc): LocalViolation[] {
  const nextById = new Map(next.vertices.map((v) => [v.id, v]));
  const violations: LocalViolation[] = [];
  for (const [vertex, record] of Object.entries(wf.states)) {
    const old = wf.document.vertices.find((v) => v.id === vertex);
    const candidate = nextById.get(vertex);
    if (!candidate) {
      violations.push({
        rule: "a", vertex,
        message: `vertex '${vertex}' is ${record.state} and cannot be removed`,
      });
    } else if (
      candidate.vtype !== old?.vtype ||
      JSON.stringify(candidate.activity ?? null) !== JSON.stringify(old?.activity ?? null)
    ) {
      violations.push({
        rule: "a", vertex,
        message: `vertex '${vertex}' is ${record.state} and cannot change type or activity`,
      });
    }
  }
  for (const [vertex, count] of Object.entries(wf.tokens)) {
    if (count > 0 && !nextById.has(vertex)) {
      violations.push({
        rule: "b", vertex,
        message: `vertex '${vertex}' holds a token and cannot be removed`,
      });
    }
  }
  return violations;
}

/** A working copy of the graph document for pending-region editing. */
export class EditSession {
  document: WorkflowDoc;
  rawMode = false;

  constructor(private wf: WorkflowStateDoc) {
    this.document = JSON.parse(JSON.stringify(wf.document)) as WorkflowDoc;
  }

  get locks(): EditLocks {
    return editLocks(this.wf);
  }

  addActivityVertex(id: string, activityName: string, activityVersion: number): void {
    if (this.document.vertices.some((v) => v.id === id)) {
      throw new Error(`vertex '${id}' already exists`);
    }
    this.document.vertices.push({
      id,
      vtype: "activity",
      activity: { name: activityName, version: activityVersion },
    });
  }

  removeVertex(id: string): void {
    if (!this.rawMode && this.locks.locked.has(id)) {
      throw new Error(`vertex '${id}' is locked (lifecycle state or token)`);
    }
    this.document.vertices = this.document.vertices.filter((v) => v.id !== id);
    this.document.edges = this.document.edges.filter(
      (e) => e.from !== id && e.to !== id,
    );
  }

  addEdge(from: string, to: string, predicate?: string, isDefault?: boolean): void {
    const edge: WorkflowDoc["edges"][number] = { from, to };
    if (predicate !== undefined) edge.predicate = predicate;
    if (isDefault) edge.is_default = true;
    this.document.edges.push(edge);
  }

  removeEdge(from: string, to: string): void {
    const index = this.document.edges.findIndex((e) => e.from === from && e.to === to);
    if (index < 0) throw new Error(`no edge ${from} -> ${to}`);
    this.document.edges.splice(index, 1);
  }

  /** Splice a new vertex into an existing edge: from -> id -> to. */
  insertBetween(id: string, activityName: string, activityVersion: number,
                from: string, to: string): void {
    this.removeEdge(from, to);
    this.addActivityVertex(id, activityName, activityVersion);
    this.addEdge(from, id);
    this.addEdge(id, to);
  }

  localViolations(): LocalViolation[] {
    return checkEditLocally(this.wf, this.document);
  }
}
