/** History browsing view model: timeline entries plus time-travel lookups. */

import type { EventRecordDoc } from "./types";

export interface TimelineRow {
  seq: number;
  ts: string;
  agent: string;
  kind: string;
  caption: string;
}

export function timelineRows(records: EventRecordDoc[]): TimelineRow[] {
  return records.map((record) => ({
    seq: record.seq,
    ts: record.ts,
    agent: record.agent,
    kind: record.kind,
    caption: captionFor(record),
  }));
}

function captionFor(record: EventRecordDoc): string {
  const p = record.payload as Record<string, any>;
  switch (record.kind) {
    case "Created":
      return `item '${p.name}' created`;
    case "PropertySet":
      return `${p.name} = ${JSON.stringify(p.value)}`;
    case "OutcomeRecorded":
      return `outcome ${p.schema?.name} v${p.outcome_version}`;
    case "ViewSet":
      return `view ${p.view} -> ${p.schema} v${p.outcome_version}`;
    case "CollectionChanged":
      return `${p.edit} ${p.member} in ${p.collection}`;
    case "TransitionFired":
      return `${p.transition} at ${p.vertex}`;
    case "WorkflowEdited":
      return "workflow graph replaced";
    case "DescriptionPublished":
      return `${p.kind} '${p.name}' v${p.version} published`;
    default:
      return record.kind;
  }
}
