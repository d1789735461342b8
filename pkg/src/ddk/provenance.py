"""Read-only queries over event logs: timelines, time travel, version diffs.

Nothing in this module writes; every result is derived on demand from the
stored records. Timeline summary strings are presentation only and excluded
from all equality semantics.
"""

from __future__ import annotations

import copy

from . import descriptions, errors
from .errors import err
from .store import EventRecord, ItemState, Store
from .store import replay as _replay


def reconstruct_at(store: Store, item: str, seq: int) -> ItemState:
    """The item's state as of event ``seq``: a pure replay of the prefix."""
    ref = store.resolve_item(item)
    records = store.history(ref.uuid, 0, seq)
    return _replay(records)


def summarize(rec: EventRecord) -> str:
    p = rec.payload
    if rec.kind == "Created":
        return f"created {p.get('item_type')} item {p.get('name')!r}"
    if rec.kind == "PropertySet":
        return f"property {p.get('name')!r} set to {p.get('value')!r}"
    if rec.kind == "OutcomeRecorded":
        s = p.get("schema", {})
        return f"outcome {s.get('name')!r} recorded as version {p.get('outcome_version')}"
    if rec.kind == "ViewSet":
        return f"view {p.get('view')!r} points at {p.get('schema')!r} v{p.get('outcome_version')}"
    if rec.kind == "CollectionChanged":
        return f"collection {p.get('collection')!r}: {p.get('edit')} member {p.get('member')!r}"
    if rec.kind == "TransitionFired":
        return f"{p.get('transition')} fired at vertex {p.get('vertex')!r}"
    if rec.kind == "WorkflowEdited":
        return "workflow graph replaced by live edit"
    if rec.kind == "DescriptionPublished":
        return f"{p.get('kind')} {p.get('name')!r} published as version {p.get('version')}"
    return rec.kind  # pragma: no cover


def timeline(store: Store, item: str, kinds: list[str] | None = None,
             agent: str | None = None, from_seq: int | None = None,
             to_seq: int | None = None) -> dict:
    """Ordered, filtered view of an item's history. Filters compose
    conjunctively; summaries are derived, never stored."""
    ref = store.resolve_item(item)
    agent_uuid = None
    if agent is not None:
        agent_uuid = descriptions.resolve_agent(store, agent)
    entries = []
    for rec in store.history(ref.uuid):
        if kinds is not None and rec.kind not in kinds:
            continue
        if agent_uuid is not None and rec.agent != agent_uuid:
            continue
        if from_seq is not None and rec.seq < from_seq:
            continue
        if to_seq is not None and rec.seq > to_seq:
            continue
        entries.append({
            "seq": rec.seq,
            "ts": rec.ts,
            "agent": rec.agent,
            "kind": rec.kind,
            "summary": summarize(rec),
        })
    return {"item": ref.uuid, "entries": entries}


# -- structural document diffs -------------------------------------------------


def diff_documents(a: object, b: object) -> dict:
    """Path-level structural diff. Applying the result to ``a`` reproduces
    ``b`` exactly; swapping added/removed and from/to gives the reverse
    diff. Paths are lists of object keys and list indexes."""
    added: list[dict] = []
    removed: list[dict] = []
    changed: list[dict] = []

    def walk(x: object, y: object, path: list) -> None:
        if x == y:
            return
        if isinstance(x, dict) and isinstance(y, dict):
            for key in sorted(set(x) | set(y), key=str):
                if key not in y:
                    removed.append({"path": path + [key], "value": copy.deepcopy(x[key])})
                elif key not in x:
                    added.append({"path": path + [key], "value": copy.deepcopy(y[key])})
                else:
                    walk(x[key], y[key], path + [key])
            return
        if isinstance(x, list) and isinstance(y, list):
            for i in range(min(len(x), len(y))):
                walk(x[i], y[i], path + [i])
            for i in range(len(y), len(x)):
                removed.append({"path": path + [i], "value": copy.deepcopy(x[i])})
            for i in range(len(x), len(y)):
                added.append({"path": path + [i], "value": copy.deepcopy(y[i])})
            return
        changed.append({"path": path, "from": copy.deepcopy(x), "to": copy.deepcopy(y)})

    walk(a, b, [])
    return {"added": added, "removed": removed, "changed": changed}


def apply_diff(document: object, diff: dict) -> object:
    """Apply a diff_documents result; the inverse of the diff construction."""
    doc = copy.deepcopy(document)

    def parent_of(path: list):
        node = doc
        for seg in path[:-1]:
            node = node[seg]
        return node

    for entry in sorted(diff["removed"], key=lambda e: _removal_key(e["path"]), reverse=True):
        parent = parent_of(entry["path"])
        seg = entry["path"][-1]
        if isinstance(parent, list):
            parent.pop(seg)
        else:
            parent.pop(seg)
    for entry in sorted(diff["added"], key=lambda e: _removal_key(e["path"])):
        parent = parent_of(entry["path"])
        seg = entry["path"][-1]
        if isinstance(parent, list):
            parent.insert(seg, copy.deepcopy(entry["value"]))
        else:
            parent[seg] = copy.deepcopy(entry["value"])
    for entry in diff["changed"]:
        if not entry["path"]:
            doc = copy.deepcopy(entry["to"])
            continue
        parent_of(entry["path"])[entry["path"][-1]] = copy.deepcopy(entry["to"])
    return doc


def _removal_key(path: list) -> tuple:
    return tuple((0, seg) if isinstance(seg, int) else (1, seg) for seg in path)


def diff_descriptions(store: Store, kind: str, name: str,
                      v_from: int, v_to: int) -> dict:
    """Structural diff between two published versions of one description."""
    doc_from = descriptions.resolve(store, kind, name, v_from)
    doc_to = descriptions.resolve(store, kind, name, v_to)
    body = diff_documents(doc_from, doc_to)
    return {
        "kind": kind,
        "name": name,
        "from_version": v_from,
        "to_version": v_to,
        "added": body["added"],
        "removed": body["removed"],
        "changed": body["changed"],
    }
