/** Wire types, mirroring the kernel's canonical JSON documents. */

export type Primitive = string | number | boolean;

export interface ItemRef {
  uuid: string;
  name: string;
  type: "instance" | "description" | "agent";
}

export interface PropertyEntry {
  value: Primitive;
  mutable: boolean;
}

export interface OutcomeEntry {
  schema_version: number;
  document: Record<string, unknown>;
}

export interface ActivityStateDoc {
  state: "STARTED" | "SUSPENDED" | "COMPLETED" | "SKIPPED";
  started_by: string | null;
  completed_by: string | null;
}

export interface VertexDoc {
  id: string;
  vtype: "start" | "end" | "activity" | "and_split" | "and_join" | "xor_split" | "xor_join";
  activity?: { name: string; version: number };
}

export interface EdgeDoc {
  from: string;
  to: string;
  predicate?: string;
  is_default?: boolean;
}

export interface WorkflowDoc {
  kind: "workflow";
  name: string;
  vertices: VertexDoc[];
  edges: EdgeDoc[];
}

export interface WorkflowStateDoc {
  document: WorkflowDoc;
  activities: Record<string, ActivityDoc>;
  schemas: Record<string, SchemaDoc>;
  pins: Record<string, { name: string; version: number }>;
  tokens: Record<string, number>;
  states: Record<string, ActivityStateDoc>;
  fired: { vertex: string; transition: string; agent: string }[];
  decisions: { xor: string; to: string }[];
  finished: boolean;
}

export interface ItemState {
  uuid: string;
  name: string;
  type: string;
  head: number;
  properties: Record<string, PropertyEntry>;
  outcomes: Record<string, Record<string, OutcomeEntry>>;
  views: Record<string, Record<string, number>>;
  collections: Record<string, { member: string; slots: Record<string, Primitive> }[]>;
  workflow: WorkflowStateDoc | null;
}

export interface Job {
  item: string;
  item_name: string;
  vertex: string;
  activity: string;
  transition: "Start" | "Complete" | "Suspend" | "Resume" | "Skip";
  required_role: string;
}

export interface EventRecordDoc {
  agent: string;
  item: string;
  kind: string;
  payload: Record<string, unknown>;
  prev_hash: string;
  seq: number;
  ts: string;
}

export interface FieldSpecDoc {
  name: string;
  type: "string" | "integer" | "number" | "boolean";
  required?: boolean;
  enum_values?: Primitive[];
  min?: number;
  max?: number;
}

export interface SchemaDoc {
  kind: "schema";
  name: string;
  fields: FieldSpecDoc[];
  groups: { name: string; fields: FieldSpecDoc[] }[];
}

export interface ActivityDoc {
  kind: "activity";
  name: string;
  role: string;
  schema?: { name: string; version: number } | null;
  on_complete?: { set: string; expr: string }[];
}

export interface ErrorBody {
  error_code: string;
  message: string;
  details: unknown;
}

export interface CatalogEntry {
  kind: string;
  name: string;
  versions: number[];
}
