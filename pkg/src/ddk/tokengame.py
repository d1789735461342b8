"""Workflow execution semantics: the token game over a directed activity graph.

Everything in this module is pure: functions take a workflow state (or a
document) and return results or mutate only the state object handed in.
Persistence, roles, and event appending live elsewhere.

Graph semantics
---------------
Tokens rest on activity and end vertices (and on partially-filled and_join
vertices). All other vertex kinds pass tokens through:

* ``start`` and ``xor_join`` forward along their single outgoing edge;
* ``and_split`` replicates the token to every successor;
* ``and_join`` holds arriving tokens and emits one once every incoming edge
  has delivered (count reaches the join's in-degree);
* ``xor_split`` routes along the first outgoing edge (document order) whose
  predicate holds, else along its default edge.

Per-vertex lifecycle: WAITING -> STARTED -> COMPLETED, with STARTED <->
SUSPENDED and an administrative WAITING -> SKIPPED. COMPLETED and SKIPPED
are terminal. WAITING is implicit: an activity vertex is WAITING iff a
token rests on it and it has no recorded lifecycle state.

Routing choices made at xor gateways are recorded in the state (the
``decisions`` list). When a live edit replaces the graph, token positions
are recomputed by replaying the recorded transition sequence over the new
graph, re-using recorded xor decisions wherever the chosen edge still
exists. This keeps an identity edit a strict no-op and makes the inserted-
activity case come out right: a vertex spliced between a completed vertex
and its former successor picks up the token.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field

from . import errors, expr
from .errors import err

VTYPES = ("start", "end", "activity", "and_split", "and_join", "xor_split", "xor_join")
TRANSITIONS = ("Complete", "Resume", "Skip", "Start", "Suspend")
TERMINAL_STATES = ("COMPLETED", "SKIPPED")

# transitions legal from each explicit or implicit lifecycle state
LEGAL = {
    "WAITING": ("Skip", "Start"),
    "STARTED": ("Complete", "Suspend"),
    "SUSPENDED": ("Resume",),
    "COMPLETED": (),
    "SKIPPED": (),
}

_PASS_THROUGH = ("start", "xor_join", "and_split", "xor_split")
_CASCADE_LIMIT = 100_000


def activity_key(name: str, version: int) -> str:
    return f"{name}:{version}"


class Graph:
    """Parsed view of a workflow document. Does not validate; see validate_graph."""

    def __init__(self, document: dict):
        self.document = document
        self.vertices: dict[str, dict] = {}
        for v in document.get("vertices", []):
            self.vertices[v["id"]] = v
        self.out: dict[str, list[dict]] = {vid: [] for vid in self.vertices}
        self.in_degree: dict[str, int] = {vid: 0 for vid in self.vertices}
        for e in document.get("edges", []):
            if e.get("from") in self.out:
                self.out[e["from"]].append(e)
            if e.get("to") in self.in_degree:
                self.in_degree[e["to"]] += 1

    def vtype(self, vid: str) -> str:
        return self.vertices[vid]["vtype"]

    def activity_ref(self, vid: str) -> dict | None:
        return self.vertices[vid].get("activity")

    def single_successor(self, vid: str) -> str:
        edges = self.out[vid]
        if len(edges) != 1:
            raise err(errors.MALFORMED_GRAPH,
                      f"vertex {vid!r} must have exactly one outgoing edge")
        return edges[0]["to"]

    @property
    def start_id(self) -> str:
        for vid, v in self.vertices.items():
            if v["vtype"] == "start":
                return vid
        raise err(errors.MALFORMED_GRAPH, "graph has no start vertex")

    def end_ids(self) -> list[str]:
        return [vid for vid, v in self.vertices.items() if v["vtype"] == "end"]


def _reachable_from(graph: Graph, root: str) -> set[str]:
    seen = {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for e in graph.out.get(v, []):
            t = e["to"]
            if t in graph.vertices and t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def _strict_reach(graph: Graph) -> dict[str, set[str]]:
    """Vertices reachable in one or more steps, per vertex."""
    reach: dict[str, set[str]] = {}
    for vid in graph.vertices:
        seen: set[str] = set()
        queue = deque(e["to"] for e in graph.out.get(vid, []) if e["to"] in graph.vertices)
        while queue:
            v = queue.popleft()
            if v in seen:
                continue
            seen.add(v)
            for e in graph.out.get(v, []):
                if e["to"] in graph.vertices:
                    queue.append(e["to"])
        reach[vid] = seen
    return reach


def validate_graph(document: object) -> list[dict]:
    """Static validation of a workflow document. Returns every violation found."""
    out: list[dict] = []

    def bad(code: str, message: str) -> None:
        out.append({"code": code, "message": message})

    if not isinstance(document, dict):
        return [{"code": "bad-structure", "message": "workflow document must be an object"}]
    if document.get("kind") not in (None, "workflow"):
        bad("bad-structure", "kind must be 'workflow'")
    if not isinstance(document.get("name"), str) or not document.get("name"):
        bad("bad-structure", "workflow name must be a non-empty string")

    vdocs = document.get("vertices")
    edocs = document.get("edges")
    if not isinstance(vdocs, list) or not isinstance(edocs, list):
        bad("bad-structure", "vertices and edges must be lists")
        return out

    ids: list[str] = []
    for v in vdocs:
        if not isinstance(v, dict) or not isinstance(v.get("id"), str) or not v["id"]:
            bad("bad-structure", f"vertex {v!r} must have a non-empty string id")
            continue
        vid = v["id"]
        if vid in ids:
            bad("duplicate-vertex", f"vertex id {vid!r} declared twice")
            continue
        ids.append(vid)
        vt = v.get("vtype")
        if vt not in VTYPES:
            bad("bad-vtype", f"vertex {vid!r} has unknown vtype {vt!r}")
            continue
        ref = v.get("activity")
        if vt == "activity":
            if (not isinstance(ref, dict) or not isinstance(ref.get("name"), str)
                    or not isinstance(ref.get("version"), int) or isinstance(ref.get("version"), bool)
                    or ref["version"] < 0):
                bad("bad-activity-ref", f"activity vertex {vid!r} needs activity {{name, version}}")
        elif ref is not None:
            bad("bad-activity-ref", f"non-activity vertex {vid!r} must not carry an activity ref")
        extra = set(v) - {"id", "vtype", "activity"}
        if extra:
            bad("bad-structure", f"vertex {vid!r}: unknown keys {sorted(extra)}")

    known = set(ids)
    for i, e in enumerate(edocs):
        if not isinstance(e, dict) or e.get("from") not in known or e.get("to") not in known:
            bad("bad-edge", f"edge #{i} must join two declared vertices")
            continue
        extra = set(e) - {"from", "to", "predicate", "is_default"}
        if extra:
            bad("bad-edge", f"edge #{i}: unknown keys {sorted(extra)}")
    if out:
        return out

    graph = Graph(document)

    starts = [vid for vid in ids if graph.vtype(vid) == "start"]
    if len(starts) != 1:
        bad("start-count", f"graph must have exactly one start vertex, found {len(starts)}")
    if not any(graph.vtype(vid) == "end" for vid in ids):
        bad("end-count", "graph must have at least one end vertex")

    for vid in ids:
        vt = graph.vtype(vid)
        outdeg = len(graph.out[vid])
        indeg = graph.in_degree[vid]
        if vt == "end":
            if outdeg != 0:
                bad("end-outgoing", f"end vertex {vid!r} must have no outgoing edges")
            continue
        if outdeg < 1:
            bad("no-outgoing", f"vertex {vid!r} has no outgoing edge")
        if vt in ("start", "activity", "and_join", "xor_join") and outdeg > 1:
            bad("out-degree", f"{vt} vertex {vid!r} must have exactly one outgoing edge")
        if vt in ("and_split", "xor_split") and outdeg < 2:
            bad("out-degree", f"{vt} vertex {vid!r} must have at least two outgoing edges")
        if vt == "start" and indeg != 0:
            bad("start-incoming", f"start vertex {vid!r} must have no incoming edges")
        if vt == "activity" and indeg < 1:
            bad("no-incoming", f"activity vertex {vid!r} has no incoming edge")

    for vid in ids:
        vt = graph.vtype(vid)
        edges = graph.out[vid]
        if vt == "xor_split":
            defaults = [e for e in edges if e.get("is_default")]
            if len(defaults) != 1:
                bad("xor-default", f"xor_split {vid!r} must have exactly one default edge")
            for e in edges:
                if e.get("is_default"):
                    if "predicate" in e:
                        bad("xor-default", f"xor_split {vid!r}: default edge must not carry a predicate")
                    continue
                pred = e.get("predicate")
                if not isinstance(pred, str):
                    bad("xor-predicate", f"xor_split {vid!r}: non-default edge to {e['to']!r} needs a predicate")
                    continue
                try:
                    expr.parse(pred)
                except Exception:
                    bad("xor-predicate", f"xor_split {vid!r}: predicate {pred!r} does not parse")
        else:
            for e in edges:
                if "predicate" in e or "is_default" in e:
                    bad("bad-edge", f"edge from non-xor vertex {vid!r} must not carry predicate/is_default")

    if starts:
        unreachable = known - _reachable_from(graph, starts[0])
        for vid in sorted(unreachable):
            bad("unreachable", f"vertex {vid!r} is not reachable from start")

    # cycle rules: a loop's entry point (where flow from outside the cycle
    # merges into it) must be an xor_join, and every cycle must contain an
    # activity vertex so a token cascade settles
    reach = _strict_reach(graph)
    cyclic = {vid for vid in ids if vid in reach[vid]}
    seen_groups: set[frozenset] = set()
    for vid in cyclic:
        group = frozenset({vid} | {u for u in cyclic if u in reach[vid] and vid in reach[u]})
        if group in seen_groups:
            continue
        seen_groups.add(group)
        if not any(graph.vtype(u) == "activity" for u in group):
            bad("gateway-cycle", f"cycle through {sorted(group)} contains no activity vertex")
        for u in ids:
            if u in group:
                continue
            for e in graph.out[u]:
                if e["to"] in group and graph.vtype(e["to"]) != "xor_join":
                    bad("cycle-target",
                        f"loop entry {u!r}->{e['to']!r} must target an xor_join")

    return out


@dataclass
class WorkflowState:
    """Execution state of one workflow instance, embedded in its item."""

    document: dict
    activities: dict = field(default_factory=dict)
    schemas: dict = field(default_factory=dict)
    pins: dict = field(default_factory=dict)
    tokens: dict = field(default_factory=dict)
    states: dict = field(default_factory=dict)
    fired: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    finished: bool = False

    def to_doc(self) -> dict:
        return {
            "document": self.document,
            "activities": self.activities,
            "schemas": self.schemas,
            "pins": self.pins,
            "tokens": dict(sorted(self.tokens.items())),
            "states": {v: dict(s) for v, s in sorted(self.states.items())},
            "fired": list(self.fired),
            "decisions": list(self.decisions),
            "finished": self.finished,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "WorkflowState":
        return cls(
            document=doc["document"],
            activities=doc.get("activities", {}),
            schemas=doc.get("schemas", {}),
            pins=doc.get("pins", {}),
            tokens=dict(doc.get("tokens", {})),
            states={v: dict(s) for v, s in doc.get("states", {}).items()},
            fired=list(doc.get("fired", [])),
            decisions=list(doc.get("decisions", [])),
            finished=doc.get("finished", False),
        )

    def clone(self) -> "WorkflowState":
        return WorkflowState.from_doc(copy.deepcopy(self.to_doc()))

    def graph(self) -> Graph:
        return Graph(self.document)

    def vertex_state(self, vid: str) -> str | None:
        rec = self.states.get(vid)
        if rec is not None:
            return rec["state"]
        if self.tokens.get(vid, 0) > 0 and self.graph().vtype(vid) == "activity":
            return "WAITING"
        return None

    def activity_doc(self, vid: str) -> dict:
        ref = self.graph().activity_ref(vid)
        if ref is None:
            raise err(errors.MALFORMED_GRAPH, f"vertex {vid!r} is not an activity")
        return self.activities[activity_key(ref["name"], ref["version"])]


def _add_token(state: WorkflowState, vid: str, n: int = 1) -> None:
    state.tokens[vid] = state.tokens.get(vid, 0) + n
    if state.tokens[vid] <= 0:
        del state.tokens[vid]


def route(state: WorkflowState, graph: Graph, xor_vertex: str, ctx: expr.EvalContext) -> tuple[int, str]:
    """Pick the outgoing edge of an xor_split: first predicate-true edge in
    document order, else the default edge. Returns (edge index, target id)."""
    default: tuple[int, str] | None = None
    for i, e in enumerate(graph.out[xor_vertex]):
        if e.get("is_default"):
            default = (i, e["to"])
            continue
        if expr.holds(e["predicate"], ctx):
            return i, e["to"]
    if default is None:
        raise err(errors.MALFORMED_GRAPH, f"xor_split {xor_vertex!r} has no default edge")
    return default


def _cascade(state: WorkflowState, graph: Graph, entries: list[str],
             ctx: expr.EvalContext, decision_queues: dict | None = None) -> None:
    """Push tokens into ``entries`` and let them flow until they rest."""
    queue = deque(entries)
    steps = 0
    while queue:
        steps += 1
        if steps > _CASCADE_LIMIT:
            raise err(errors.MALFORMED_GRAPH, "token cascade did not settle")
        vid = queue.popleft()
        vt = graph.vtype(vid)
        if vt in ("activity", "end"):
            _add_token(state, vid)
        elif vt in ("start", "xor_join"):
            queue.append(graph.single_successor(vid))
        elif vt == "and_split":
            for e in graph.out[vid]:
                queue.append(e["to"])
        elif vt == "and_join":
            _add_token(state, vid)
            if state.tokens.get(vid, 0) >= graph.in_degree[vid]:
                _add_token(state, vid, -graph.in_degree[vid])
                queue.append(graph.single_successor(vid))
        elif vt == "xor_split":
            target: str | None = None
            if decision_queues:
                pending = decision_queues.get(vid)
                if pending:
                    candidate = pending[0]
                    if any(e["to"] == candidate for e in graph.out[vid]):
                        target = pending.popleft()
                    else:
                        pending.popleft()  # edge gone; re-evaluate below
            if target is None:
                _, target = route(state, graph, vid, ctx)
            state.decisions.append({"xor": vid, "to": target})
            queue.append(target)
        else:  # pragma: no cover
            raise err(errors.MALFORMED_GRAPH, f"unknown vtype {vt!r}")


def _refresh_finished(state: WorkflowState, graph: Graph) -> None:
    at_end = any(state.tokens.get(e, 0) > 0 for e in graph.end_ids())
    in_flight = any(s["state"] in ("STARTED", "SUSPENDED") for s in state.states.values())
    state.finished = at_end and not in_flight


def init_state(document: dict, activities: dict, schemas: dict, pins: dict,
               ctx: expr.EvalContext) -> WorkflowState:
    """Fresh instance state: one token enters at start and flows to rest."""
    state = WorkflowState(document=document, activities=activities,
                          schemas=schemas, pins=pins)
    graph = state.graph()
    _cascade(state, graph, [graph.start_id], ctx)
    _refresh_finished(state, graph)
    return state


def legal_transitions(state: WorkflowState, vid: str) -> tuple[str, ...]:
    vstate = state.vertex_state(vid)
    if vstate is None:
        return ()
    return LEGAL[vstate]


def legal_moves(state: WorkflowState) -> list[tuple[str, str]]:
    """All (vertex, transition) pairs currently legal, sorted."""
    if state.finished:
        return []
    moves = []
    graph = state.graph()
    for vid in sorted(graph.vertices):
        if graph.vtype(vid) != "activity":
            continue
        for t in legal_transitions(state, vid):
            moves.append((vid, t))
    return sorted(moves)


def required_role(state: WorkflowState, vid: str, transition: str) -> str:
    if transition == "Skip":
        return "admin"
    return state.activity_doc(vid)["role"]


def apply_transition(state: WorkflowState, vid: str, transition: str,
                     agent: str, ctx: expr.EvalContext) -> None:
    """Advance the lifecycle state machine and move tokens. Raises bad-event
    if the transition is not legal from the vertex's current state."""
    graph = state.graph()
    if vid not in graph.vertices or graph.vtype(vid) != "activity":
        raise err(errors.STALE_JOB, f"vertex {vid!r} is not an activity vertex of this graph")
    if state.finished or transition not in legal_transitions(state, vid):
        raise err(errors.STALE_JOB,
                  f"transition {transition} illegal from state {state.vertex_state(vid)!r} at {vid!r}")
    _apply_unchecked(state, graph, vid, transition, agent, ctx, None)
    _refresh_finished(state, graph)


def _apply_unchecked(state: WorkflowState, graph: Graph, vid: str, transition: str,
                     agent: str, ctx: expr.EvalContext, decision_queues: dict | None) -> None:
    rec = state.states.get(vid, {"state": None, "started_by": None, "completed_by": None})
    if transition == "Start":
        rec.update(state="STARTED", started_by=agent)
    elif transition == "Suspend":
        rec.update(state="SUSPENDED")
    elif transition == "Resume":
        rec.update(state="STARTED")
    elif transition == "Complete":
        rec.update(state="COMPLETED", completed_by=agent)
    elif transition == "Skip":
        rec.update(state="SKIPPED", completed_by=agent)
    else:
        raise err(errors.BAD_EVENT, f"unknown transition {transition!r}")
    state.states[vid] = rec
    state.fired.append({"vertex": vid, "transition": transition, "agent": agent})
    if transition in ("Complete", "Skip") and state.tokens.get(vid, 0) > 0:
        _add_token(state, vid, -1)
        _cascade(state, graph, [graph.single_successor(vid)], ctx, decision_queues)


def validate_edit(state: WorkflowState, new_document: object) -> list[dict]:
    """Check a replacement graph against a running instance.

    Rules: (a) vertices with an explicit lifecycle state must persist with
    identical id, vtype, and activity ref; (b) vertices holding tokens must
    persist; (c) the new document is statically valid.
    """
    violations = [dict(v, rule="c") for v in validate_graph(new_document)]
    new_vertices = {}
    if isinstance(new_document, dict) and isinstance(new_document.get("vertices"), list):
        for v in new_document["vertices"]:
            if isinstance(v, dict) and isinstance(v.get("id"), str):
                new_vertices[v["id"]] = v
    old_graph = state.graph()
    for vid in sorted(state.states):
        nv = new_vertices.get(vid)
        old = old_graph.vertices[vid]
        if nv is None:
            violations.append({
                "rule": "a", "code": "vertex-removed",
                "message": f"vertex {vid!r} has lifecycle state {state.states[vid]['state']} and cannot be removed",
            })
        elif nv.get("vtype") != old["vtype"] or nv.get("activity") != old.get("activity"):
            violations.append({
                "rule": "a", "code": "vertex-changed",
                "message": f"vertex {vid!r} has lifecycle state {state.states[vid]['state']} and cannot change vtype/activity",
            })
    for vid in sorted(state.tokens):
        if state.tokens[vid] > 0 and vid not in new_vertices:
            violations.append({
                "rule": "b", "code": "token-vertex-removed",
                "message": f"vertex {vid!r} holds a token and cannot be removed",
            })
    return violations


def recompute_after_edit(state: WorkflowState, new_document: dict,
                         activities: dict, schemas: dict, ctx: expr.EvalContext) -> None:
    """Replace the pinned graph and recompute token positions.

    The recorded transition sequence is replayed over the new graph. Recorded
    xor decisions are reused where the chosen edge still exists, so routing
    only changes where the edit changed the graph. Lifecycle states of fired
    vertices are reproduced verbatim (guarded by validate_edit rule (a)).
    """
    old_fired = list(state.fired)
    queues: dict[str, deque] = {}
    for d in state.decisions:
        queues.setdefault(d["xor"], deque()).append(d["to"])

    state.document = new_document
    state.activities = activities
    state.schemas = schemas
    state.tokens = {}
    state.states = {}
    state.fired = []
    state.decisions = []
    graph = state.graph()
    _cascade(state, graph, [graph.start_id], ctx, queues)
    for entry in old_fired:
        _apply_unchecked(state, graph, entry["vertex"], entry["transition"],
                         entry["agent"], ctx, queues)
    _refresh_finished(state, graph)
