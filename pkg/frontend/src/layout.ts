/** Deterministic layered graph layout: left-to-right by longest-path rank.
 *
 * Edges whose target can already reach their source (loop-backs) are
 * excluded from ranking so the layout terminates; within a rank, vertices
 * sit in id order. The same document always yields the same coordinates.
 */

import type { WorkflowDoc } from "./types";

export interface VertexPosition {
  x: number;
  y: number;
  rank: number;
  row: number;
}

export interface GraphLayout {
  positions: Map<string, VertexPosition>;
  width: number;
  height: number;
}

export const CELL_W = 150;
export const CELL_H = 90;
const MARGIN = 60;

function forwardEdges(doc: WorkflowDoc): { from: string; to: string }[] {
  // depth-first walk in document order; an edge is a loop-back iff its
  // target is an ancestor on the current DFS stack
  const successors = new Map<string, { from: string; to: string }[]>();
  for (const edge of doc.edges) {
    const list = successors.get(edge.from) ?? [];
    list.push(edge);
    successors.set(edge.from, list);
  }
  const backEdges = new Set<{ from: string; to: string }>();
  const visited = new Set<string>();
  const onStack = new Set<string>();

  const visit = (vertex: string): void => {
    visited.add(vertex);
    onStack.add(vertex);
    for (const edge of successors.get(vertex) ?? []) {
      if (onStack.has(edge.to)) {
        backEdges.add(edge);
      } else if (!visited.has(edge.to)) {
        visit(edge.to);
      }
    }
    onStack.delete(vertex);
  };

  const start = doc.vertices.find((v) => v.vtype === "start");
  if (start) visit(start.id);
  for (const vertex of [...doc.vertices].sort((a, b) => a.id.localeCompare(b.id))) {
    if (!visited.has(vertex.id)) visit(vertex.id);
  }
  return doc.edges.filter((edge) => !backEdges.has(edge));
}

export function layoutGraph(doc: WorkflowDoc): GraphLayout {
  const ids = doc.vertices.map((v) => v.id);
  const rank = new Map<string, number>(ids.map((id) => [id, 0]));
  const edges = forwardEdges(doc);
  // longest-path relaxation over the acyclic forward edges
  for (let pass = 0; pass < ids.length + 1; pass += 1) {
    let changed = false;
    for (const edge of edges) {
      const needed = (rank.get(edge.from) ?? 0) + 1;
      if ((rank.get(edge.to) ?? 0) < needed) {
        rank.set(edge.to, needed);
        changed = true;
      }
    }
    if (!changed) break;
  }
  const byRank = new Map<number, string[]>();
  for (const id of [...ids].sort()) {
    const r = rank.get(id) ?? 0;
    const bucket = byRank.get(r) ?? [];
    bucket.push(id);
    byRank.set(r, bucket);
  }
  const positions = new Map<string, VertexPosition>();
  let maxRank = 0;
  let maxRow = 0;
  for (const [r, bucket] of byRank) {
    maxRank = Math.max(maxRank, r);
    bucket.forEach((id, row) => {
      maxRow = Math.max(maxRow, row);
      positions.set(id, {
        rank: r,
        row,
        x: MARGIN + r * CELL_W,
        y: MARGIN + row * CELL_H,
      });
    });
  }
  return {
    positions,
    width: MARGIN * 2 + (maxRank + 1) * CELL_W,
    height: MARGIN * 2 + (maxRow + 1) * CELL_H,
  };
}
