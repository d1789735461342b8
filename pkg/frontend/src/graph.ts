/** SVG rendering of a workflow graph with per-vertex lifecycle colors. */

import { CELL_H, CELL_W, layoutGraph } from "./layout";
import type { WorkflowDoc, WorkflowStateDoc } from "./types";

export type DisplayState =
  | "WAITING"
  | "STARTED"
  | "SUSPENDED"
  | "COMPLETED"
  | "SKIPPED"
  | null;

export const STATE_FILL: Record<string, string> = {
  WAITING: "#f0ad4e", // amber
  STARTED: "#3b82f6", // blue
  SUSPENDED: "#9ca3af", // grey
  COMPLETED: "#22c55e", // green
  SKIPPED: "url(#hatch)", // hatched
};

const NEUTRAL_FILL = "#e5e7eb";
const SVG_NS = "http://www.w3.org/2000/svg";
const BOX_W = 110;
const BOX_H = 46;

export function displayState(wf: WorkflowStateDoc, vertexId: string): DisplayState {
  const explicit = wf.states[vertexId];
  if (explicit) return explicit.state;
  const vertex = wf.document.vertices.find((v) => v.id === vertexId);
  if (vertex?.vtype === "activity" && (wf.tokens[vertexId] ?? 0) > 0) {
    return "WAITING";
  }
  return null;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

/** Draw the graph; wf may be null for a plain document preview. */
export function renderGraph(
  doc: WorkflowDoc,
  wf: WorkflowStateDoc | null,
  mount: HTMLElement,
  onSelect?: (vertexId: string) => void,
): void {
  mount.textContent = "";
  const layout = layoutGraph(doc);
  const svg = svgEl("svg", {
    width: String(layout.width),
    height: String(layout.height),
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    class: "wf-graph",
  }) as SVGSVGElement;

  const defs = svgEl("defs", {});
  const hatch = svgEl("pattern", {
    id: "hatch", width: "8", height: "8", patternUnits: "userSpaceOnUse",
    patternTransform: "rotate(45)",
  });
  hatch.appendChild(svgEl("rect", { width: "8", height: "8", fill: "#e5e7eb" }));
  hatch.appendChild(svgEl("line", { x1: "0", y1: "0", x2: "0", y2: "8", stroke: "#6b7280", "stroke-width": "3" }));
  defs.appendChild(hatch);
  const arrow = svgEl("marker", {
    id: "arrow", viewBox: "0 0 10 10", refX: "9", refY: "5",
    markerWidth: "7", markerHeight: "7", orient: "auto-start-reverse",
  });
  arrow.appendChild(svgEl("path", { d: "M 0 0 L 10 5 L 0 10 z", fill: "#374151" }));
  defs.appendChild(arrow);
  svg.appendChild(defs);

  const center = (id: string) => {
    const p = layout.positions.get(id)!;
    return { cx: p.x + CELL_W / 2, cy: p.y + CELL_H / 2 };
  };

  for (const edge of doc.edges) {
    const a = center(edge.from);
    const b = center(edge.to);
    svg.appendChild(svgEl("line", {
      x1: String(a.cx), y1: String(a.cy), x2: String(b.cx), y2: String(b.cy),
      stroke: "#374151", "stroke-width": "1.5", "marker-end": "url(#arrow)",
      "stroke-dasharray": edge.is_default ? "6 3" : "",
    }));
    if (edge.predicate) {
      const label = svgEl("text", {
        x: String((a.cx + b.cx) / 2),
        y: String((a.cy + b.cy) / 2 - 6),
        class: "edge-label",
        "text-anchor": "middle",
      });
      label.textContent = edge.predicate;
      svg.appendChild(label);
    }
  }

  for (const vertex of doc.vertices) {
    const { cx, cy } = center(vertex.id);
    const group = svgEl("g", { "data-vertex": vertex.id, class: "vertex" });
    const state = wf ? displayState(wf, vertex.id) : null;
    const fill = state ? STATE_FILL[state] : NEUTRAL_FILL;
    if (vertex.vtype === "activity") {
      group.appendChild(svgEl("rect", {
        x: String(cx - BOX_W / 2), y: String(cy - BOX_H / 2),
        width: String(BOX_W), height: String(BOX_H),
        rx: "6", fill, stroke: "#111827",
      }));
    } else if (vertex.vtype === "start" || vertex.vtype === "end") {
      group.appendChild(svgEl("circle", {
        cx: String(cx), cy: String(cy), r: "18",
        fill: vertex.vtype === "start" ? "#111827" : "#ffffff",
        stroke: "#111827", "stroke-width": vertex.vtype === "end" ? "4" : "1",
      }));
    } else {
      // gateways render as diamonds
      const r = 26;
      group.appendChild(svgEl("polygon", {
        points: `${cx},${cy - r} ${cx + r},${cy} ${cx},${cy + r} ${cx - r},${cy}`,
        fill: NEUTRAL_FILL, stroke: "#111827", class: "gateway",
      }));
      const mark = svgEl("text", {
        x: String(cx), y: String(cy + 5), "text-anchor": "middle", class: "gateway-mark",
      });
      mark.textContent = vertex.vtype.startsWith("and") ? "+" : "×";
      group.appendChild(mark);
    }
    const label = svgEl("text", {
      x: String(cx), y: String(cy + BOX_H / 2 + 14),
      "text-anchor": "middle", class: "vertex-label",
    });
    label.textContent = vertex.vtype === "activity" && vertex.activity
      ? `${vertex.id}: ${vertex.activity.name}`
      : vertex.id;
    group.appendChild(label);
    if (wf && (wf.tokens[vertex.id] ?? 0) > 0) {
      group.appendChild(svgEl("circle", {
        cx: String(cx + BOX_W / 2 - 8), cy: String(cy - BOX_H / 2 + 8),
        r: "6", fill: "#111827", class: "token-dot",
      }));
    }
    if (onSelect) {
      group.addEventListener("click", () => onSelect(vertex.id));
    }
    svg.appendChild(group);
  }
  mount.appendChild(svg);
}
