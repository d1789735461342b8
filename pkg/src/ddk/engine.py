"""Work dispatch and execution: role-filtered jobs, transitions, live edits.

All mutations here reduce to a single event append on the target item, so
concurrent agents racing for the same job see exactly one winner; the loser
gets ``stale-job`` (state moved) or ``seq-conflict`` (sequence moved).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import descriptions, errors, expr, schema, tokengame
from .canonical import is_primitive
from .errors import err
from .store import EventRecord, ItemState, StateEvalContext, Store


@dataclass(frozen=True)
class Job:
    """An executable (item, vertex, transition) offer."""

    item: str
    item_name: str
    vertex: str
    activity: str
    transition: str
    required_role: str

    def to_doc(self) -> dict:
        return {
            "item": self.item,
            "item_name": self.item_name,
            "vertex": self.vertex,
            "activity": self.activity,
            "transition": self.transition,
            "required_role": self.required_role,
        }


def _instance_jobs(state: ItemState) -> list[Job]:
    wf = state.workflow
    jobs = []
    for vertex, transition in tokengame.legal_moves(wf):
        jobs.append(Job(
            item=state.uuid,
            item_name=state.name,
            vertex=vertex,
            activity=wf.activity_doc(vertex)["name"],
            transition=transition,
            required_role=tokengame.required_role(wf, vertex, transition),
        ))
    return jobs


def jobs_for(store: Store, agent: str) -> list[Job]:
    """Exactly the jobs this agent's roles allow, over all unfinished
    instances, ordered by (item uuid, vertex id, transition)."""
    agent_uuid = descriptions.resolve_agent(store, agent)
    roles = descriptions.agent_roles(store, agent_uuid)
    jobs: list[Job] = []
    for ref in store.items("instance"):
        state = store.get_state(ref.uuid)
        if state.workflow is None or state.workflow.finished:
            continue
        jobs.extend(j for j in _instance_jobs(state) if j.required_role in roles)
    return jobs


class _OverlayContext:
    """Evaluation context that sees not-yet-appended completion effects:
    the pending outcome and the assignments applied so far."""

    def __init__(self, state: ItemState, pending_outcome: tuple[str, dict] | None):
        self._base = StateEvalContext(state)
        self._pending = pending_outcome
        self.assigned: dict[str, object] = {}

    def property_value(self, name: str):
        if name in self.assigned:
            return self.assigned[name]
        return self._base.property_value(name)

    def outcome_field(self, schema_name: str, path: tuple[str, ...]):
        if self._pending is not None and self._pending[0] == schema_name:
            node: object = self._pending[1]
            for part in path:
                if not isinstance(node, dict) or part not in node:
                    return expr.ABSENT
                node = node[part]
            return node if is_primitive(node) else expr.ABSENT
        return self._base.outcome_field(schema_name, path)


def _completion_outcome(state: ItemState, activity_doc: dict,
                        outcome_document: dict | None) -> dict | None:
    sref = activity_doc.get("schema")
    if not sref:
        if outcome_document is not None:
            raise err(errors.VALIDATION_FAILURE,
                      f"activity {activity_doc['name']!r} records no outcome")
        return None
    if outcome_document is None:
        raise err(errors.MISSING_OUTCOME,
                  f"completing {activity_doc['name']!r} requires a "
                  f"{sref['name']} v{sref['version']} outcome document")
    key = tokengame.activity_key(sref["name"], sref["version"])
    schema_doc = state.workflow.schemas.get(key)
    if schema_doc is None:
        raise err(errors.UNKNOWN_SCHEMA, f"pinned schema {key!r} missing from instance")
    report = schema.validate(schema.parse_schema(schema_doc), outcome_document)
    if not report.valid:
        raise err(errors.VALIDATION_FAILURE,
                  f"outcome violates schema {sref['name']!r} v{sref['version']}",
                  report.to_doc())
    latest = state.latest_outcome_version(sref["name"])
    return {
        "schema": {"name": sref["name"], "version": sref["version"]},
        "outcome_version": 0 if latest is None else latest + 1,
        "document": outcome_document,
    }


def _completion_assignments(state: ItemState, activity_doc: dict,
                            outcome: dict | None) -> list[dict]:
    rules = activity_doc.get("on_complete") or []
    if not rules:
        return []
    pending = (outcome["schema"]["name"], outcome["document"]) if outcome else None
    ctx = _OverlayContext(state, pending)
    assignments: list[dict] = []
    for rule in rules:
        value = expr.evaluate(expr.parse(rule["expr"]), ctx)
        if value is expr.ABSENT:
            continue  # unresolvable reference: assignment quietly does not fire
        existing = state.properties.get(rule["set"])
        if existing is not None and not existing["mutable"]:
            raise err(errors.IMMUTABLE_PROPERTY,
                      f"on_complete targets immutable property {rule['set']!r}")
        ctx.assigned[rule["set"]] = value
        assignments.append({"name": rule["set"], "value": value})
    return assignments


def execute(store: Store, agent: str, item: str, vertex: str, transition: str,
            outcome_document: dict | None = None,
            expected_seq: int | None = None) -> EventRecord:
    """Fire one transition as one TransitionFired event.

    Start: WAITING->STARTED. Complete: STARTED->COMPLETED, recording the
    outcome (validated against the pinned schema version) and the activity's
    on_complete property assignments in the same event, then stepping tokens.
    Suspend/Resume pause and continue. Skip: WAITING->SKIPPED, admin only.
    """
    agent_uuid = descriptions.resolve_agent(store, agent)
    ref = store.resolve_item(item)
    state = store.get_state(ref.uuid)
    if state.workflow is None:
        raise err(errors.STALE_JOB, f"item {ref.name!r} has no workflow instance")
    if transition not in tokengame.TRANSITIONS:
        raise err(errors.BAD_REQUEST, f"unknown transition {transition!r}")
    wf = state.workflow
    if wf.finished or transition not in tokengame.legal_transitions(wf, vertex):
        raise err(errors.STALE_JOB,
                  f"{transition} is not currently legal at vertex {vertex!r}")
    descriptions.require_role(store, agent_uuid,
                              tokengame.required_role(wf, vertex, transition))

    outcome = None
    assignments: list[dict] = []
    if transition == "Complete":
        activity_doc = wf.activity_doc(vertex)
        outcome = _completion_outcome(state, activity_doc, outcome_document)
        assignments = _completion_assignments(state, activity_doc, outcome)
    elif outcome_document is not None:
        raise err(errors.VALIDATION_FAILURE,
                  f"transition {transition} does not take an outcome document")

    payload = {
        "vertex": vertex,
        "transition": transition,
        "outcome": outcome,
        "assignments": assignments,
    }
    return store.append_event(ref.uuid, "TransitionFired", payload, agent_uuid,
                              expected_seq)


def validate_edit(store: Store, item: str, new_document: object) -> list[dict]:
    """Edit validity rules against the current instance state; [] means OK."""
    ref = store.resolve_item(item)
    state = store.get_state(ref.uuid)
    if state.workflow is None:
        raise err(errors.BAD_REQUEST, f"item {ref.name!r} has no workflow instance")
    return tokengame.validate_edit(state.workflow, new_document)


def _pinned_defs_for(store: Store, wf: tokengame.WorkflowState,
                     new_document: dict) -> tuple[dict, dict]:
    """Union of already-pinned definitions and the ones the new graph adds."""
    activities = dict(wf.activities)
    schemas = dict(wf.schemas)
    for vertex in new_document.get("vertices", []):
        if vertex.get("vtype") != "activity":
            continue
        aref = vertex["activity"]
        akey = tokengame.activity_key(aref["name"], aref["version"])
        if akey not in activities:
            try:
                activities[akey] = descriptions.resolve(
                    store, "activity", aref["name"], aref["version"])
            except Exception as exc:
                raise err(errors.DANGLING_REFERENCE,
                          f"edit references unresolved activity {akey!r}") from exc
        sref = activities[akey].get("schema")
        if sref:
            skey = tokengame.activity_key(sref["name"], sref["version"])
            if skey not in schemas:
                try:
                    schemas[skey] = descriptions.resolve(
                        store, "schema", sref["name"], sref["version"])
                except Exception as exc:
                    raise err(errors.DANGLING_REFERENCE,
                              f"edit references unresolved schema {skey!r}") from exc
    return activities, schemas


def apply_live_edit(store: Store, item: str, new_document: dict, agent: str,
                    expected_seq: int | None = None) -> EventRecord:
    """Replace the pending region of a running instance's graph.

    The appended WorkflowEdited event embeds the complete new document and
    every pinned definition it needs, so a replay of the log is
    self-contained. The log before the edit is untouched (append-only) and
    terminal vertex states survive verbatim.
    """
    agent_uuid = descriptions.resolve_agent(store, agent)
    descriptions.require_role(store, agent_uuid, descriptions.ADMIN_ROLE)
    ref = store.resolve_item(item)
    state = store.get_state(ref.uuid)
    if state.workflow is None:
        raise err(errors.BAD_REQUEST, f"item {ref.name!r} has no workflow instance")
    violations = tokengame.validate_edit(state.workflow, new_document)
    if violations:
        raise err(errors.EDIT_INVALID, "workflow edit rejected", violations)
    activities, schemas = _pinned_defs_for(store, state.workflow, new_document)
    payload = {"document": new_document, "activities": activities, "schemas": schemas}
    return store.append_event(ref.uuid, "WorkflowEdited", payload, agent_uuid,
                              expected_seq)
