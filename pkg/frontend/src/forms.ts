/** Outcome forms generated mechanically from schema documents.
 *
 * Each field spec maps to exactly one control: string -> text input,
 * integer/number -> numeric input with min/max, boolean -> checkbox, and
 * any enum -> select. Client-side checks mirror the kernel's validator for
 * immediacy only; the server's verdict always wins and is displayed as-is.
 */

import type { FieldSpecDoc, Primitive, SchemaDoc } from "./types";

export type ControlKind = "text" | "number" | "checkbox" | "select";

export interface FormField {
  path: string; // "field" or "group.field"
  group: string | null;
  name: string;
  type: FieldSpecDoc["type"];
  control: ControlKind;
  required: boolean;
  options: Primitive[] | null;
  min: number | null;
  max: number | null;
}

export interface FieldProblem {
  path: string;
  message: string;
}

function controlFor(spec: FieldSpecDoc): ControlKind {
  if (spec.enum_values) return "select";
  if (spec.type === "boolean") return "checkbox";
  if (spec.type === "integer" || spec.type === "number") return "number";
  return "text";
}

function fieldModel(spec: FieldSpecDoc, group: string | null): FormField {
  return {
    path: group ? `${group}.${spec.name}` : spec.name,
    group,
    name: spec.name,
    type: spec.type,
    control: controlFor(spec),
    required: spec.required ?? false,
    options: spec.enum_values ?? null,
    min: spec.min ?? null,
    max: spec.max ?? null,
  };
}

export function formModel(schema: SchemaDoc): FormField[] {
  const fields = schema.fields.map((f) => fieldModel(f, null));
  for (const group of schema.groups ?? []) {
    fields.push(...group.fields.map((f) => fieldModel(f, group.name)));
  }
  return fields;
}

/** Raw control values: strings (inputs/selects) or booleans (checkboxes),
 * keyed by field path. Empty string means "left blank". */
export type RawValues = Record<string, string | boolean>;

export function checkForm(model: FormField[], raw: RawValues): FieldProblem[] {
  const problems: FieldProblem[] = [];
  for (const field of model) {
    const value = raw[field.path];
    const blank = value === undefined || value === "";
    if (blank && field.control !== "checkbox") {
      if (field.required) {
        problems.push({ path: field.path, message: `${field.path} is required` });
      }
      continue;
    }
    if (field.control === "number") {
      const parsed = Number(value);
      if (typeof value !== "string" || value.trim() === "" || Number.isNaN(parsed)) {
        problems.push({ path: field.path, message: `${field.path} must be a number` });
        continue;
      }
      if (field.type === "integer" && !Number.isInteger(parsed)) {
        problems.push({ path: field.path, message: `${field.path} must be an integer` });
      }
      if (field.min !== null && parsed < field.min) {
        problems.push({ path: field.path, message: `${field.path} must be >= ${field.min}` });
      }
      if (field.max !== null && parsed > field.max) {
        problems.push({ path: field.path, message: `${field.path} must be <= ${field.max}` });
      }
    }
    if (field.control === "select" && field.options) {
      const candidates = field.options.map(String);
      if (!candidates.includes(String(value))) {
        problems.push({ path: field.path, message: `${field.path} must be one of ${candidates.join(", ")}` });
      }
    }
  }
  return problems;
}

/** Build the outcome document the kernel expects from raw control values.
 * Blank optional fields are omitted; checkboxes always contribute. */
export function buildDocument(model: FormField[], raw: RawValues): Record<string, unknown> {
  const doc: Record<string, unknown> = {};
  const groupDocs: Record<string, Record<string, unknown>> = {};
  for (const field of model) {
    const value = raw[field.path];
    let result: Primitive | undefined;
    if (field.control === "checkbox") {
      result = value === true || value === "true";
      if (raw[field.path] === undefined && !field.required) result = undefined;
    } else if (value === undefined || value === "") {
      result = undefined;
    } else if (field.control === "number") {
      const parsed = Number(value);
      result = field.type === "integer" ? Math.trunc(parsed) : parsed;
    } else if (field.control === "select" && field.options) {
      result = field.options.find((option) => String(option) === String(value));
    } else {
      result = String(value);
    }
    if (result === undefined) continue;
    if (field.group) {
      groupDocs[field.group] = groupDocs[field.group] ?? {};
      groupDocs[field.group][field.name] = result;
    } else {
      doc[field.name] = result;
    }
  }
  for (const [name, body] of Object.entries(groupDocs)) {
    doc[name] = body;
  }
  return doc;
}

/** DOM renderer: one labelled control per form field, grouped fieldsets. */
export function renderForm(model: FormField[], mount: HTMLElement): void {
  mount.textContent = "";
  const containers = new Map<string | null, HTMLElement>();
  containers.set(null, mount);
  for (const field of model) {
    if (field.group && !containers.has(field.group)) {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = field.group;
      fieldset.appendChild(legend);
      mount.appendChild(fieldset);
      containers.set(field.group, fieldset);
    }
    const row = document.createElement("label");
    row.className = "form-row";
    const caption = document.createElement("span");
    caption.textContent = field.required ? `${field.name} *` : field.name;
    row.appendChild(caption);
    row.appendChild(controlElement(field));
    containers.get(field.group)!.appendChild(row);
  }
}

function controlElement(field: FormField): HTMLElement {
  if (field.control === "select") {
    const select = document.createElement("select");
    select.name = field.path;
    if (!field.required) {
      select.appendChild(document.createElement("option"));
    }
    for (const option of field.options ?? []) {
      const el = document.createElement("option");
      el.value = String(option);
      el.textContent = String(option);
      select.appendChild(el);
    }
    return select;
  }
  const input = document.createElement("input");
  input.name = field.path;
  if (field.control === "checkbox") {
    input.type = "checkbox";
  } else if (field.control === "number") {
    input.type = "number";
    if (field.type === "number") input.step = "any";
    if (field.min !== null) input.min = String(field.min);
    if (field.max !== null) input.max = String(field.max);
  } else {
    input.type = "text";
  }
  if (field.required) input.required = true;
  return input;
}

/** Read raw values back out of a rendered form. */
export function collectValues(model: FormField[], mount: HTMLElement): RawValues {
  const raw: RawValues = {};
  for (const field of model) {
    const el = mount.querySelector<HTMLInputElement | HTMLSelectElement>(
      `[name="${field.path.replace(/"/g, '\\"')}"]`,
    );
    if (!el) continue;
    if (field.control === "checkbox") {
      raw[field.path] = (el as HTMLInputElement).checked;
    } else {
      raw[field.path] = el.value;
    }
  }
  return raw;
}
