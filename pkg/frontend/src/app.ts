/** Console shell: worklist, graph + live edit, and history time travel.
 *
 * All state shown here is fetched from the kernel server; reloading the
 * page reproduces the same view from the same store. Writes race via
 * X-Expected-Seq: on a 409 the console re-polls and tells the user someone
 * acted first.
 */

import { ApiError, ConsoleApi } from "./api";
import { EditSession } from "./editlock";
import { buildDocument, checkForm, collectValues, formModel, renderForm } from "./forms";
import { renderGraph } from "./graph";
import { timelineRows } from "./history";
import type { ItemState, Job, SchemaDoc, WorkflowDoc } from "./types";
import { Poller, worklistEntries } from "./worklist";

const api = new ConsoleApi("");

function save(key: string, value: string): void {
  window.sessionStorage.setItem(key, value);
}

function load(key: string): string | null {
  return window.sessionStorage.getItem(key);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

let agentUuid: string | null = null;
let jobsPoller: Poller<Job[]> | null = null;
let graphPoller: Poller<ItemState> | null = null;
let currentGraphItem: string | null = null;
let editSession: EditSession | null = null;

function flash(message: string, kind: "error" | "info" = "info"): void {
  const banner = byId("banner");
  banner.textContent = message;
  banner.className = `banner ${kind}`;
  banner.classList.remove("hidden");
  window.setTimeout(() => banner.classList.add("hidden"), 5000);
}

async function handleWriteError(error: unknown, repoll: () => void): Promise<void> {
  if (error instanceof ApiError && error.isConflict) {
    flash("someone acted first — refreshed", "info");
    repoll();
    return;
  }
  if (error instanceof ApiError) {
    flash(`${error.body.error_code}: ${error.body.message}`, "error");
    return;
  }
  flash(String(error), "error");
}

// -- session -------------------------------------------------------------------

async function connect(): Promise<void> {
  const agent = (byId("agent-input") as HTMLInputElement).value.trim();
  const token = (byId("token-input") as HTMLInputElement).value.trim();
  if (!agent) {
    flash("enter an agent name", "error");
    return;
  }
  api.agent = agent;
  api.token = token || null;
  save("ddk.agent", agent);
  save("ddk.token", token);
  try {
    const ref = await api.resolveAgent();
    agentUuid = ref.uuid;
    byId("session-state").textContent = `connected as ${ref.name}`;
    startWorklist();
    void refreshItemChoices();
  } catch (error) {
    flash(String(error), "error");
  }
}

// -- worklist --------------------------------------------------------------------

function schemaForVertex(state: ItemState, vertex: string): SchemaDoc | null {
  const wf = state.workflow;
  if (!wf) return null;
  const vdoc = wf.document.vertices.find((v) => v.id === vertex);
  if (!vdoc?.activity) return null;
  const activity = wf.activities[`${vdoc.activity.name}:${vdoc.activity.version}`];
  if (!activity?.schema) return null;
  return wf.schemas[`${activity.schema.name}:${activity.schema.version}`] ?? null;
}

function startWorklist(): void {
  if (!agentUuid) return;
  jobsPoller?.stop();
  jobsPoller = new Poller(
    () => api.jobs(agentUuid!),
    (state) => renderWorklist(state.value ?? [], state.error),
    2000,
  );
  jobsPoller.start();
}

function renderWorklist(jobs: Job[], error: string | null): void {
  const mount = byId("worklist");
  mount.textContent = "";
  if (error) {
    mount.appendChild(el("div", { class: "inline-error" }, `worklist unavailable: ${error}`));
    return;
  }
  const entries = worklistEntries(jobs, () => true);
  if (!entries.length) {
    mount.appendChild(el("div", { class: "empty" }, "no jobs for this agent"));
    return;
  }
  const table = el("table", { class: "worklist-table" });
  for (const entry of entries) {
    const row = el("tr", { "data-key": entry.key });
    row.appendChild(el("td", {}, entry.itemName));
    row.appendChild(el("td", {}, `${entry.vertex} (${entry.activity})`));
    row.appendChild(el("td", {}, entry.requiredRole));
    const action = el("td", {});
    const button = el("button", {}, entry.transition);
    button.addEventListener("click", () => void runJob(entry.item, entry.vertex, entry.transition));
    action.appendChild(button);
    row.appendChild(action);
    table.appendChild(row);
  }
  mount.appendChild(table);
}

async function runJob(item: string, vertex: string, transition: Job["transition"]): Promise<void> {
  const state = await api.getItem(item);
  const schema = transition === "Complete" ? schemaForVertex(state, vertex) : null;
  if (transition === "Complete" && schema) {
    openOutcomeForm(state, vertex, schema);
    return;
  }
  try {
    await api.execute(item, state.head + 1, vertex, transition);
    void jobsPoller?.tick();
    if (currentGraphItem === item) void graphPoller?.tick();
  } catch (error) {
    await handleWriteError(error, () => void jobsPoller?.tick());
  }
}

function openOutcomeForm(state: ItemState, vertex: string, schema: SchemaDoc): void {
  const dialog = byId("form-dialog");
  dialog.classList.remove("hidden");
  byId("form-title").textContent = `Complete ${vertex}: ${schema.name}`;
  const mount = byId("form-fields");
  const model = formModel(schema);
  renderForm(model, mount);
  const problems = byId("form-problems");
  problems.textContent = "";
  byId("form-submit").onclick = async () => {
    const raw = collectValues(model, mount);
    const clientProblems = checkForm(model, raw);
    problems.textContent = "";
    if (clientProblems.length) {
      for (const p of clientProblems) {
        problems.appendChild(el("div", { class: "inline-error" }, p.message));
      }
      return;
    }
    try {
      const fresh = await api.getItem(state.uuid);
      await api.execute(state.uuid, fresh.head + 1, vertex, "Complete",
        buildDocument(model, raw));
      dialog.classList.add("hidden");
      void jobsPoller?.tick();
      if (currentGraphItem === state.uuid) void graphPoller?.tick();
    } catch (error) {
      if (error instanceof ApiError && !error.isConflict) {
        // the server's verdict wins and is shown verbatim
        const details = Array.isArray(error.body.details) ? error.body.details : [];
        problems.appendChild(el("div", { class: "inline-error" },
          `${error.body.error_code}: ${error.body.message}`));
        for (const v of details as { path?: string; message?: string }[]) {
          problems.appendChild(el("div", { class: "inline-error" },
            `${v.path ?? ""}: ${v.message ?? JSON.stringify(v)}`));
        }
        return;
      }
      await handleWriteError(error, () => void jobsPoller?.tick());
      dialog.classList.add("hidden");
    }
  };
  byId("form-cancel").onclick = () => dialog.classList.add("hidden");
}

// -- graph + live edit ------------------------------------------------------------

async function refreshItemChoices(): Promise<void> {
  const refs = await api.listItems("instance");
  for (const selectId of ["graph-item", "history-item"]) {
    const select = byId(selectId) as HTMLSelectElement;
    const previous = select.value;
    select.textContent = "";
    select.appendChild(el("option", { value: "" }, "choose an item"));
    for (const ref of refs) {
      select.appendChild(el("option", { value: ref.uuid }, `${ref.name} (${ref.uuid.slice(0, 8)})`));
    }
    if (previous) select.value = previous;
  }
}

function watchGraph(uuid: string): void {
  currentGraphItem = uuid;
  graphPoller?.stop();
  graphPoller = new Poller(
    () => api.getItem(uuid),
    (state) => {
      if (state.error) {
        flash(`graph refresh failed: ${state.error}`, "error");
        return;
      }
      if (state.value) renderGraphTab(state.value);
    },
    2000,
  );
  graphPoller.start();
}

function renderGraphTab(state: ItemState): void {
  const mount = byId("graph-canvas");
  if (!state.workflow) {
    mount.textContent = "item has no workflow";
    return;
  }
  try {
    renderGraph(state.workflow.document, state.workflow, mount);
  } catch (error) {
    // render failure falls back to the raw document
    mount.textContent = JSON.stringify(state.workflow.document, null, 2);
    flash(`graph render failed: ${String(error)}`, "error");
  }
  byId("graph-meta").textContent =
    `head ${state.head} · ${state.workflow.finished ? "finished" : "running"}`;
  if (editSession) renderEditPanel(state);
}

function renderEditPanel(state: ItemState): void {
  const panel = byId("edit-panel");
  if (!editSession || !state.workflow) {
    panel.classList.add("hidden");
    return;
  }
  panel.classList.remove("hidden");
  const locks = editSession.locks;
  const list = byId("edit-vertices");
  list.textContent = "";
  for (const vertex of editSession.document.vertices) {
    const locked = locks.locked.has(vertex.id);
    const row = el("div", { class: "edit-row" });
    row.appendChild(el("span", {},
      `${vertex.id} [${vertex.vtype}]${locked ? " 🔒" : ""}`));
    if (!locked || editSession.rawMode) {
      const remove = el("button", { class: "small" }, "remove");
      remove.addEventListener("click", () => {
        try {
          editSession!.removeVertex(vertex.id);
          renderEditPanel(state);
        } catch (error) {
          flash(String(error), "error");
        }
      });
      row.appendChild(remove);
    }
    list.appendChild(row);
  }
  const edges = byId("edit-edges");
  edges.textContent = "";
  for (const edge of editSession.document.edges) {
    const row = el("div", { class: "edit-row" });
    row.appendChild(el("span", {},
      `${edge.from} → ${edge.to}${edge.predicate ? ` [${edge.predicate}]` : ""}${edge.is_default ? " [default]" : ""}`));
    const remove = el("button", { class: "small" }, "drop");
    remove.addEventListener("click", () => {
      editSession!.removeEdge(edge.from, edge.to);
      renderEditPanel(state);
    });
    row.appendChild(remove);
    edges.appendChild(row);
  }
  (byId("edit-raw") as HTMLTextAreaElement).value =
    JSON.stringify(editSession.document, null, 2);
}

function wireGraphTab(): void {
  (byId("graph-item") as HTMLSelectElement).addEventListener("change", (event) => {
    const uuid = (event.target as HTMLSelectElement).value;
    editSession = null;
    byId("edit-panel").classList.add("hidden");
    if (uuid) watchGraph(uuid);
  });
  byId("edit-start").addEventListener("click", () => {
    void (async () => {
      if (!currentGraphItem) return;
      const state = await api.getItem(currentGraphItem);
      if (!state.workflow) return;
      editSession = new EditSession(state.workflow);
      editSession.rawMode = (byId("edit-rawmode") as HTMLInputElement).checked;
      renderEditPanel(state);
    })();
  });
  byId("edit-rawmode").addEventListener("change", (event) => {
    if (editSession) {
      editSession.rawMode = (event.target as HTMLInputElement).checked;
    }
  });
  byId("edit-add").addEventListener("click", () => {
    if (!editSession) return;
    const id = (byId("edit-new-id") as HTMLInputElement).value.trim();
    const activity = (byId("edit-new-activity") as HTMLInputElement).value.trim();
    const version = Number((byId("edit-new-version") as HTMLInputElement).value || "0");
    const from = (byId("edit-splice-from") as HTMLInputElement).value.trim();
    const to = (byId("edit-splice-to") as HTMLInputElement).value.trim();
    try {
      if (from && to) {
        editSession.insertBetween(id, activity, version, from, to);
      } else {
        editSession.addActivityVertex(id, activity, version);
      }
      if (currentGraphItem) void api.getItem(currentGraphItem).then(renderEditPanel);
    } catch (error) {
      flash(String(error), "error");
    }
  });
  byId("edit-submit").addEventListener("click", () => void submitEdit(false));
  byId("edit-submit-raw").addEventListener("click", () => void submitEdit(true));
}

async function submitEdit(fromRawText: boolean): Promise<void> {
  if (!editSession || !currentGraphItem) return;
  let document_: WorkflowDoc = editSession.document;
  if (fromRawText) {
    try {
      document_ = JSON.parse((byId("edit-raw") as HTMLTextAreaElement).value);
    } catch (error) {
      flash(`raw document is not JSON: ${String(error)}`, "error");
      return;
    }
  }
  const problems = byId("edit-problems");
  problems.textContent = "";
  if (!editSession.rawMode && !fromRawText) {
    const local = editSession.localViolations();
    if (local.length) {
      for (const violation of local) {
        problems.appendChild(el("div", { class: "inline-error" },
          `(${violation.rule}) ${violation.message}`));
      }
      return;
    }
  }
  try {
    const fresh = await api.getItem(currentGraphItem);
    await api.editWorkflow(currentGraphItem, fresh.head + 1, document_);
    editSession = null;
    byId("edit-panel").classList.add("hidden");
    flash("workflow edited", "info");
    void graphPoller?.tick();
    void jobsPoller?.tick();
  } catch (error) {
    if (error instanceof ApiError && error.body.error_code === "edit-invalid") {
      const details = Array.isArray(error.body.details) ? error.body.details : [];
      for (const violation of details as { rule?: string; message?: string }[]) {
        problems.appendChild(el("div", { class: "inline-error" },
          `(${violation.rule ?? "?"}) ${violation.message ?? ""}`));
      }
      return;
    }
    await handleWriteError(error, () => void graphPoller?.tick());
  }
}

// -- history ------------------------------------------------------------------------

function wireHistoryTab(): void {
  const select = byId("history-item") as HTMLSelectElement;
  select.addEventListener("change", () => void loadHistory(select.value));
  (byId("history-slider") as HTMLInputElement).addEventListener("input", (event) => {
    const seq = Number((event.target as HTMLInputElement).value);
    if (select.value) void showAt(select.value, seq);
  });
}

async function loadHistory(uuid: string): Promise<void> {
  if (!uuid) return;
  const records = await api.history(uuid);
  const rows = timelineRows(records);
  const mount = byId("history-timeline");
  mount.textContent = "";
  const table = el("table", { class: "timeline-table" });
  for (const row of rows) {
    const tr = el("tr", { "data-seq": String(row.seq) });
    tr.appendChild(el("td", {}, String(row.seq)));
    tr.appendChild(el("td", {}, row.ts));
    tr.appendChild(el("td", {}, row.kind));
    tr.appendChild(el("td", {}, row.caption));
    tr.addEventListener("click", () => void showAt(uuid, row.seq));
    table.appendChild(tr);
  }
  mount.appendChild(table);
  const slider = byId("history-slider") as HTMLInputElement;
  slider.min = "0";
  slider.max = String(records.length - 1);
  slider.value = String(records.length - 1);
  await showAt(uuid, records.length - 1);
}

async function showAt(uuid: string, seq: number): Promise<void> {
  const state = await api.at(uuid, seq);
  byId("history-caption").textContent = `state as of seq ${seq} (read-only)`;
  const props = byId("history-props");
  props.textContent = "";
  for (const [name, prop] of Object.entries(state.properties)) {
    props.appendChild(el("div", {},
      `${name} = ${JSON.stringify(prop.value)}${prop.mutable ? "" : " 🔒"}`));
  }
  const mount = byId("history-graph");
  if (state.workflow) {
    renderGraph(state.workflow.document, state.workflow, mount);
  } else {
    mount.textContent = "(no workflow)";
  }
}

// -- boot ---------------------------------------------------------------------------

function wireTabs(): void {
  for (const button of Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tab]"))) {
    button.addEventListener("click", () => {
      for (const section of Array.from(document.querySelectorAll<HTMLElement>(".tab-body"))) {
        section.classList.add("hidden");
      }
      byId(`tab-${button.dataset.tab}`).classList.remove("hidden");
    });
  }
}

export function boot(): void {
  wireTabs();
  wireGraphTab();
  wireHistoryTab();
  byId("connect").addEventListener("click", () => void connect());
  (byId("agent-input") as HTMLInputElement).value = load("ddk.agent") ?? "";
  (byId("token-input") as HTMLInputElement).value = load("ddk.token") ?? "";
  if (load("ddk.agent")) void connect();
}

if (typeof document !== "undefined" && document.getElementById("banner")) {
  boot();
}
