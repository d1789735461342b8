"""Item storage: append-only, hash-chained event logs with replayable state.

Every item is a log of immutable event records plus an in-memory state that
is always exactly the fold of its log. All mutations funnel through
``append_event``: the new record is applied to a copy of the state, and only
if application succeeds is the record persisted and the copy swapped in, so
a rejected operation leaves both the log and the state untouched.

Record wire format: one canonical-JSON record per line with fields exactly
{"agent","item","kind","payload","prev_hash","seq","ts"}. ``prev_hash`` is
the SHA-256 (lower-case hex) of the previous record's canonical bytes; the
first record uses 64 zeros. A per-item head file carries the digest of the
newest record so truncation and tail tampering are detectable. Snapshot
files are a pure cache and may be deleted at any time.

Concurrency: a per-item mutex makes the expected_seq check and the append
atomic, so per-item operations are linearizable; racing writers for the same
seq see exactly one winner and a ``seq-conflict`` for the loser.
"""

from __future__ import annotations

import copy
import os
import threading
import uuid as uuid_mod
from dataclasses import dataclass, field
from pathlib import Path

from . import errors, schema, tokengame
from .canonical import (
    GENESIS_HASH,
    canonical_bytes,
    digest_hex,
    from_canonical,
    is_primitive,
    now_timestamp,
)
from .errors import err
from .expr import ABSENT
from .tokengame import WorkflowState

ITEM_TYPES = ("instance", "description", "agent")
EVENT_KINDS = (
    "Created",
    "PropertySet",
    "OutcomeRecorded",
    "ViewSet",
    "CollectionChanged",
    "TransitionFired",
    "WorkflowEdited",
    "DescriptionPublished",
)

LAST_VIEW = "last"
STORE_MARKER = "ddk.json"


@dataclass(frozen=True)
class ItemRef:
    uuid: str
    name: str
    item_type: str

    def to_doc(self) -> dict:
        return {"uuid": self.uuid, "name": self.name, "type": self.item_type}


@dataclass(frozen=True)
class EventRecord:
    item: str
    seq: int
    ts: str
    agent: str
    kind: str
    payload: dict
    prev_hash: str

    def to_doc(self) -> dict:
        return {
            "agent": self.agent,
            "item": self.item,
            "kind": self.kind,
            "payload": copy.deepcopy(self.payload),
            "prev_hash": self.prev_hash,
            "seq": self.seq,
            "ts": self.ts,
        }

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_doc())

    def digest(self) -> str:
        return digest_hex(self.canonical())

    @classmethod
    def from_doc(cls, doc: dict) -> "EventRecord":
        try:
            return cls(
                item=doc["item"], seq=doc["seq"], ts=doc["ts"], agent=doc["agent"],
                kind=doc["kind"], payload=doc["payload"], prev_hash=doc["prev_hash"],
            )
        except (KeyError, TypeError) as exc:
            raise err(errors.BAD_EVENT, f"malformed event record: {exc}") from exc


@dataclass
class ItemState:
    """The fold of one item's event log."""

    uuid: str
    name: str = ""
    item_type: str = "instance"
    head: int = -1
    properties: dict = field(default_factory=dict)
    outcomes: dict = field(default_factory=dict)
    views: dict = field(default_factory=dict)
    collections: dict = field(default_factory=dict)
    workflow: WorkflowState | None = None

    def to_doc(self) -> dict:
        return {
            "uuid": self.uuid,
            "name": self.name,
            "type": self.item_type,
            "head": self.head,
            "properties": {k: dict(v) for k, v in sorted(self.properties.items())},
            "outcomes": {
                name: {str(v): copy.deepcopy(entry) for v, entry in sorted(vers.items())}
                for name, vers in sorted(self.outcomes.items())
            },
            "views": {k: dict(sorted(v.items())) for k, v in sorted(self.views.items())},
            "collections": {
                k: [dict(m) for m in members] for k, members in sorted(self.collections.items())
            },
            "workflow": self.workflow.to_doc() if self.workflow is not None else None,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ItemState":
        wf = doc.get("workflow")
        return cls(
            uuid=doc["uuid"],
            name=doc["name"],
            item_type=doc["type"],
            head=doc["head"],
            properties={k: dict(v) for k, v in doc.get("properties", {}).items()},
            outcomes={
                name: {int(v): copy.deepcopy(entry) for v, entry in vers.items()}
                for name, vers in doc.get("outcomes", {}).items()
            },
            views={k: dict(v) for k, v in doc.get("views", {}).items()},
            collections={k: [dict(m) for m in ms] for k, ms in doc.get("collections", {}).items()},
            workflow=WorkflowState.from_doc(wf) if wf is not None else None,
        )

    def clone(self) -> "ItemState":
        return ItemState.from_doc(copy.deepcopy(self.to_doc()))

    def ref(self) -> ItemRef:
        return ItemRef(self.uuid, self.name, self.item_type)

    def latest_outcome_version(self, schema_name: str) -> int | None:
        versions = self.outcomes.get(schema_name)
        return max(versions) if versions else None


class StateEvalContext:
    """Expression evaluation view over an item state."""

    def __init__(self, state: ItemState):
        self._state = state

    def property_value(self, name: str):
        prop = self._state.properties.get(name)
        return prop["value"] if prop is not None else ABSENT

    def outcome_field(self, schema_name: str, path: tuple[str, ...]):
        latest = self._state.latest_outcome_version(schema_name)
        if latest is None:
            return ABSENT
        node = self._state.outcomes[schema_name][latest]["document"]
        for part in path:
            if not isinstance(node, dict) or part not in node:
                return ABSENT
            node = node[part]
        return node if is_primitive(node) else ABSENT


# ---------------------------------------------------------------------------
# event application (shared by live appends and replay)
# ---------------------------------------------------------------------------


def _norm_properties(raw: object) -> dict:
    if not isinstance(raw, dict):
        raise err(errors.BAD_EVENT, "properties must be an object")
    props = {}
    for name, entry in raw.items():
        if not isinstance(name, str) or not name:
            raise err(errors.BAD_EVENT, "property names must be non-empty strings")
        if isinstance(entry, dict):
            value, mutable = entry.get("value"), entry.get("mutable", True)
        else:
            value, mutable = entry, True
        if not is_primitive(value):
            raise err(errors.BAD_EVENT, f"property {name!r} value must be primitive")
        if not isinstance(mutable, bool):
            raise err(errors.BAD_EVENT, f"property {name!r} mutable flag must be boolean")
        props[name] = {"value": value, "mutable": mutable}
    return props


def _apply_created(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    name = p.get("name")
    if not isinstance(name, str) or not name:
        raise err(errors.EMPTY_NAME, "item name must be a non-empty string")
    if p.get("item_type") not in ITEM_TYPES:
        raise err(errors.BAD_EVENT, f"unknown item type {p.get('item_type')!r}")
    state.name = name
    state.item_type = p["item_type"]
    state.properties = _norm_properties(p.get("properties", {}))
    wf = p.get("workflow")
    if wf is not None:
        violations = tokengame.validate_graph(wf["document"])
        if violations:
            raise err(errors.MALFORMED_GRAPH, "pinned workflow document is invalid", violations)
        state.workflow = tokengame.init_state(
            wf["document"], wf.get("activities", {}), wf.get("schemas", {}),
            wf.get("pins", {}), StateEvalContext(state),
        )


def _apply_property_set(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    name, value = p.get("name"), p.get("value")
    if not isinstance(name, str) or not name:
        raise err(errors.BAD_EVENT, "property name must be a non-empty string")
    if not is_primitive(value):
        raise err(errors.BAD_EVENT, f"property {name!r} value must be primitive")
    existing = state.properties.get(name)
    if existing is not None and not existing["mutable"]:
        raise err(errors.IMMUTABLE_PROPERTY, f"property {name!r} is immutable")
    mutable = existing["mutable"] if existing is not None else bool(p.get("mutable", True))
    state.properties[name] = {"value": value, "mutable": mutable}


def _record_outcome_state(state: ItemState, schema_name: str, schema_version: int,
                          outcome_version: int, document: dict) -> None:
    versions = state.outcomes.setdefault(schema_name, {})
    if outcome_version in versions:
        raise err(errors.BAD_EVENT,
                  f"outcome {schema_name} v{outcome_version} already recorded")
    versions[outcome_version] = {"schema_version": schema_version,
                                 "document": copy.deepcopy(document)}
    state.views.setdefault(schema_name, {})[LAST_VIEW] = max(versions)


def _apply_outcome_recorded(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    ref = p.get("schema")
    if (not isinstance(ref, dict) or not isinstance(ref.get("name"), str)
            or not isinstance(ref.get("version"), int)):
        raise err(errors.BAD_EVENT, "outcome payload needs schema {name, version}")
    if not isinstance(p.get("outcome_version"), int) or not isinstance(p.get("document"), dict):
        raise err(errors.BAD_EVENT, "outcome payload needs outcome_version and document")
    _record_outcome_state(state, ref["name"], ref["version"], p["outcome_version"], p["document"])


def _apply_view_set(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    view, schema_name, version = p.get("view"), p.get("schema"), p.get("outcome_version")
    if not isinstance(view, str) or not view or not isinstance(schema_name, str):
        raise err(errors.BAD_EVENT, "view payload needs view and schema names")
    if view == LAST_VIEW:
        raise err(errors.RESERVED_NAME, f"view name {LAST_VIEW!r} is reserved")
    if not isinstance(version, int) or version not in state.outcomes.get(schema_name, {}):
        raise err(errors.DANGLING_TARGET,
                  f"no outcome {schema_name} v{version} on item {state.uuid}")
    state.views.setdefault(schema_name, {})[view] = version


def _apply_collection_changed(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    name, edit, member = p.get("collection"), p.get("edit"), p.get("member")
    if not isinstance(name, str) or not name or not isinstance(member, str):
        raise err(errors.BAD_EVENT, "collection payload needs collection and member")
    position = p.get("position")
    members = state.collections.setdefault(name, [])
    if edit == "add":
        slots = p.get("slots") or {}
        if not isinstance(slots, dict) or any(not is_primitive(v) for v in slots.values()):
            raise err(errors.BAD_EVENT, "slot properties must be primitive-valued")
        entry = {"member": member, "slots": slots}
        if position is None:
            members.append(entry)
        elif isinstance(position, int) and 0 <= position <= len(members):
            members.insert(position, entry)
        else:
            raise err(errors.BAD_EVENT, f"bad position {position!r}")
        return
    idx = next((i for i, m in enumerate(members) if m["member"] == member), None)
    if idx is None:
        raise err(errors.UNKNOWN_MEMBER, f"member {member!r} not in collection {name!r}")
    if edit == "remove":
        members.pop(idx)
        if not members:
            del state.collections[name]
    elif edit == "reorder":
        if not isinstance(position, int) or not 0 <= position < len(members):
            raise err(errors.BAD_EVENT, f"bad position {position!r}")
        members.insert(position, members.pop(idx))
    else:
        raise err(errors.BAD_EVENT, f"unknown collection edit {edit!r}")


def _apply_transition_fired(state: ItemState, rec: EventRecord) -> None:
    if state.workflow is None:
        raise err(errors.BAD_EVENT, "item has no workflow instance")
    p = rec.payload
    vertex, transition = p.get("vertex"), p.get("transition")
    if not isinstance(vertex, str) or transition not in tokengame.TRANSITIONS:
        raise err(errors.BAD_EVENT, "transition payload needs vertex and transition")
    outcome = p.get("outcome")
    if outcome is not None:
        ref = outcome.get("schema", {})
        _record_outcome_state(state, ref["name"], ref["version"],
                              outcome["outcome_version"], outcome["document"])
    for assignment in p.get("assignments") or []:
        name, value = assignment.get("name"), assignment.get("value")
        if not isinstance(name, str) or not is_primitive(value):
            raise err(errors.BAD_EVENT, "assignments must set primitive values")
        existing = state.properties.get(name)
        if existing is not None and not existing["mutable"]:
            raise err(errors.IMMUTABLE_PROPERTY,
                      f"assignment targets immutable property {name!r}")
        mutable = existing["mutable"] if existing is not None else True
        state.properties[name] = {"value": value, "mutable": mutable}
    tokengame.apply_transition(state.workflow, vertex, transition, rec.agent,
                               StateEvalContext(state))


def _apply_workflow_edited(state: ItemState, rec: EventRecord) -> None:
    if state.workflow is None:
        raise err(errors.BAD_EVENT, "item has no workflow instance")
    p = rec.payload
    document = p.get("document")
    violations = tokengame.validate_edit(state.workflow, document)
    if violations:
        raise err(errors.EDIT_INVALID, "workflow edit rejected", violations)
    tokengame.recompute_after_edit(
        state.workflow, document, p.get("activities", {}), p.get("schemas", {}),
        StateEvalContext(state),
    )


def _apply_description_published(state: ItemState, rec: EventRecord) -> None:
    p = rec.payload
    meta = p.get("meta")
    envelope = p.get("envelope")
    if (not isinstance(meta, dict) or not isinstance(envelope, dict)
            or not isinstance(p.get("version"), int)):
        raise err(errors.BAD_EVENT, "publish payload needs meta, envelope, version")
    _record_outcome_state(state, meta["name"], meta["version"], p["version"], envelope)


_APPLIERS = {
    "Created": _apply_created,
    "PropertySet": _apply_property_set,
    "OutcomeRecorded": _apply_outcome_recorded,
    "ViewSet": _apply_view_set,
    "CollectionChanged": _apply_collection_changed,
    "TransitionFired": _apply_transition_fired,
    "WorkflowEdited": _apply_workflow_edited,
    "DescriptionPublished": _apply_description_published,
}


def apply_event(state: ItemState, rec: EventRecord) -> None:
    """Fold one record into a state. Raises KernelError on any malformed or
    inapplicable payload, leaving partially-applied changes to the caller's
    copy (Store always applies to a scratch clone)."""
    if rec.kind not in _APPLIERS:
        raise err(errors.BAD_EVENT, f"unknown event kind {rec.kind!r}")
    if rec.kind == "Created":
        if state.head != -1:
            raise err(errors.BAD_EVENT, "Created must be the first event")
    elif state.head == -1:
        raise err(errors.BAD_EVENT, "first event must be Created")
    _APPLIERS[rec.kind](state, rec)
    state.head = rec.seq


def replay(records: list[EventRecord], expected_head_digest: str | None = None) -> ItemState:
    """Rebuild state from a contiguous, hash-valid event prefix.

    Pure: no store access. Verifies seq contiguity and the prev_hash chain
    over canonical record bytes; optionally pins the digest of the final
    record (tail tampering / truncation detection).
    """
    if not records:
        raise err(errors.GAP_IN_SEQUENCE, "empty event list")
    state = ItemState(uuid=records[0].item)
    prev = GENESIS_HASH
    for i, rec in enumerate(records):
        if rec.seq != i:
            raise err(errors.GAP_IN_SEQUENCE, f"expected seq {i}, found {rec.seq}")
        if rec.item != state.uuid:
            raise err(errors.BAD_EVENT, "records mix multiple items")
        if rec.prev_hash != prev:
            raise err(errors.HASH_CHAIN_BROKEN, f"prev_hash mismatch at seq {i}")
        apply_event(state, rec)
        prev = rec.digest()
    if expected_head_digest is not None and prev != expected_head_digest:
        raise err(errors.HASH_CHAIN_BROKEN, "head digest does not match the log tail")
    return state


# ---------------------------------------------------------------------------
# the store
# ---------------------------------------------------------------------------


class _Slot:
    __slots__ = ("records", "state", "lock")

    def __init__(self) -> None:
        self.records: list[EventRecord] = []
        self.state: ItemState | None = None
        self.lock = threading.Lock()


class Store:
    """All items of one kernel instance, in memory and (optionally) on disk."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._slots: dict[str, _Slot] = {}
        self._registry_lock = threading.Lock()
        # injected by the kernel facade: (name, version|'latest') -> (doc, version)
        self.schema_resolver = None
        if self.directory is not None:
            self._load()

    # -- filesystem layout --------------------------------------------------

    @staticmethod
    def initialize(directory: str | os.PathLike) -> "Store":
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        marker = path / STORE_MARKER
        if marker.exists():
            raise err(errors.NOT_A_STORE, f"{path} is already an initialized store")
        if any(path.iterdir()):
            raise err(errors.NOT_A_STORE, f"{path} is not empty")
        (path / "items").mkdir()
        (path / "snapshots").mkdir()
        marker.write_bytes(canonical_bytes({"format": 1}) + b"\n")
        return Store(path)

    def _log_path(self, uuid: str) -> Path:
        return self.directory / "items" / f"{uuid}.log"

    def _head_path(self, uuid: str) -> Path:
        return self.directory / "items" / f"{uuid}.head"

    def _snapshot_path(self, uuid: str) -> Path:
        return self.directory / "snapshots" / f"{uuid}.json"

    def _load(self) -> None:
        if not (self.directory / STORE_MARKER).exists():
            raise err(errors.NOT_A_STORE, f"{self.directory} is not a ddk store")
        items_dir = self.directory / "items"
        items_dir.mkdir(exist_ok=True)
        (self.directory / "snapshots").mkdir(exist_ok=True)
        for log_path in sorted(items_dir.glob("*.log")):
            uuid = log_path.stem
            records = self._read_log(uuid)
            state = None
            snap = self._read_snapshot(uuid)
            if snap is not None and 0 <= snap["seq"] < len(records):
                state = ItemState.from_doc(snap["state"])
                for rec in records[snap["seq"] + 1:]:
                    apply_event(state, rec)
            if state is None or state.head != len(records) - 1:
                state = replay(records)
            slot = _Slot()
            slot.records = records
            slot.state = state
            self._slots[uuid] = slot

    def _read_log(self, uuid: str) -> list[EventRecord]:
        """Read and chain-verify one item's log from disk."""
        raw = self._log_path(uuid).read_bytes()
        lines = raw.split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        records: list[EventRecord] = []
        prev = GENESIS_HASH
        for i, line in enumerate(lines):
            try:
                doc = from_canonical(line)
                rec = EventRecord.from_doc(doc)
            except Exception as exc:
                raise err(errors.HASH_CHAIN_BROKEN,
                          f"item {uuid}: record {i} is unreadable: {exc}") from exc
            if rec.canonical() != line:
                raise err(errors.HASH_CHAIN_BROKEN,
                          f"item {uuid}: record {i} is not in canonical form")
            if rec.seq != i:
                raise err(errors.GAP_IN_SEQUENCE,
                          f"item {uuid}: expected seq {i}, found {rec.seq}")
            if rec.prev_hash != prev:
                raise err(errors.HASH_CHAIN_BROKEN,
                          f"item {uuid}: prev_hash mismatch at seq {i}")
            prev = digest_hex(line)
            records.append(rec)
        head_path = self._head_path(uuid)
        if head_path.exists():
            head = from_canonical(head_path.read_bytes())
            if head.get("digest") != prev or head.get("seq") != len(records) - 1:
                raise err(errors.HASH_CHAIN_BROKEN,
                          f"item {uuid}: head file does not match the log tail")
        else:
            self._write_head(uuid, len(records) - 1, prev)
        return records

    def _read_snapshot(self, uuid: str) -> dict | None:
        path = self._snapshot_path(uuid)
        if not path.exists():
            return None
        try:
            doc = from_canonical(path.read_bytes())
            if doc.get("item") == uuid and isinstance(doc.get("seq"), int):
                return doc
        except Exception:
            pass
        return None  # snapshots are a cache; ignore anything unreadable

    def _write_head(self, uuid: str, seq: int, digest: str) -> None:
        if self.directory is None:
            return
        tmp = self._head_path(uuid).with_suffix(".head.tmp")
        tmp.write_bytes(canonical_bytes({"digest": digest, "item": uuid, "seq": seq}) + b"\n")
        os.replace(tmp, self._head_path(uuid))

    def _persist(self, rec: EventRecord, line: bytes) -> None:
        if self.directory is None:
            return
        with open(self._log_path(rec.item), "ab") as fh:
            fh.write(line + b"\n")
            fh.flush()
        self._write_head(rec.item, rec.seq, digest_hex(line))

    def save_snapshot(self, uuid: str) -> Path | None:
        """Write the snapshot cache for an item (no-op for memory stores)."""
        if self.directory is None:
            return None
        state = self.get_state(uuid)
        doc = {"item": uuid, "seq": state.head, "state": state.to_doc()}
        path = self._snapshot_path(uuid)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_bytes(canonical_bytes(doc) + b"\n")
        os.replace(tmp, path)
        return path

    # -- reads ----------------------------------------------------------------

    def __contains__(self, uuid: str) -> bool:
        return uuid in self._slots

    def items(self, item_type: str | None = None) -> list[ItemRef]:
        refs = [slot.state.ref() for slot in self._slots.values()]
        if item_type is not None:
            refs = [r for r in refs if r.item_type == item_type]
        return sorted(refs, key=lambda r: r.uuid)

    def _slot(self, uuid: str) -> _Slot:
        slot = self._slots.get(uuid)
        if slot is None:
            raise err(errors.UNKNOWN_ITEM, f"no item {uuid!r}")
        return slot

    def get_state(self, uuid: str) -> ItemState:
        return self._slot(uuid).state

    def state_doc(self, uuid: str) -> dict:
        return self.get_state(uuid).to_doc()

    def head(self, uuid: str) -> int:
        return self._slot(uuid).state.head

    def history(self, uuid: str, from_seq: int = 0, to_seq: int | None = None) -> list[EventRecord]:
        records = self._slot(uuid).records
        head = len(records) - 1
        if to_seq is None:
            to_seq = head
        if not (0 <= from_seq <= to_seq <= head):
            raise err(errors.RANGE_OUT_OF_BOUNDS,
                      f"range [{from_seq}, {to_seq}] outside [0, {head}]")
        return records[from_seq:to_seq + 1]

    def records(self, uuid: str) -> list[EventRecord]:
        return list(self._slot(uuid).records)

    def replay_item(self, uuid: str) -> ItemState:
        """Replay an item from its authoritative bytes (disk when present)."""
        if self.directory is not None:
            records = self._read_log(uuid)
            head = from_canonical(self._head_path(uuid).read_bytes())
            return replay(records, expected_head_digest=head["digest"])
        slot = self._slot(uuid)
        return replay(slot.records)

    def verify_item(self, uuid: str) -> int:
        """Verify the full hash chain; returns the head seq."""
        return self.replay_item(uuid).head

    def find_by_name(self, name: str, item_type: str | None = None) -> ItemRef:
        matches = [r for r in self.items(item_type) if r.name == name]
        if not matches:
            raise err(errors.UNKNOWN_ITEM, f"no item named {name!r}")
        if len(matches) > 1:
            raise err(errors.AMBIGUOUS_NAME,
                      f"{len(matches)} items named {name!r}; use a uuid",
                      [m.to_doc() for m in matches])
        return matches[0]

    def resolve_item(self, name_or_uuid: str, item_type: str | None = None) -> ItemRef:
        slot = self._slots.get(name_or_uuid)
        if slot is not None:
            return slot.state.ref()
        return self.find_by_name(name_or_uuid, item_type)

    # -- writes ---------------------------------------------------------------

    def _check_agent(self, agent: str, new_item_uuid: str | None = None) -> None:
        if agent == new_item_uuid:
            return  # an agent item's own Created event is self-attributed
        slot = self._slots.get(agent)
        if slot is None or slot.state.item_type != "agent":
            raise err(errors.UNKNOWN_AGENT, f"no agent {agent!r}")

    def create_item(self, name: str, item_type: str, properties: dict | None = None,
                    agent: str | None = None, workflow: dict | None = None) -> ItemRef:
        if not isinstance(name, str) or not name:
            raise err(errors.EMPTY_NAME, "item name must be a non-empty string")
        if item_type not in ITEM_TYPES:
            raise err(errors.BAD_EVENT, f"unknown item type {item_type!r}")
        with self._registry_lock:
            uuid = uuid_mod.uuid4().hex
            while uuid in self._slots:  # duplicate uuid: retry with a fresh one
                uuid = uuid_mod.uuid4().hex
            if agent is None:
                if item_type != "agent":
                    raise err(errors.UNKNOWN_AGENT, "creating agent is required")
                agent = uuid
            self._check_agent(agent, new_item_uuid=uuid)
            payload = {
                "name": name,
                "item_type": item_type,
                "properties": _norm_properties(properties or {}),
                "workflow": copy.deepcopy(workflow),
            }
            rec = EventRecord(item=uuid, seq=0, ts=now_timestamp(), agent=agent,
                              kind="Created", payload=payload, prev_hash=GENESIS_HASH)
            state = ItemState(uuid=uuid)
            apply_event(state, rec)  # may raise; nothing registered yet
            slot = _Slot()
            slot.records = [rec]
            slot.state = state
            self._persist(rec, rec.canonical())
            self._slots[uuid] = slot
            return state.ref()

    def append_event(self, item: str, kind: str, payload: dict, agent: str,
                     expected_seq: int | None = None) -> EventRecord:
        """Append one event with optimistic concurrency control.

        ``expected_seq`` must equal head+1 (None means "whatever head+1 is
        right now"). The payload is validated by applying it to a scratch
        copy of the state; a failing payload appends nothing.
        """
        slot = self._slot(item)
        self._check_agent(agent)
        if kind == "Created":
            raise err(errors.BAD_EVENT, "Created can only be appended via create_item")
        with slot.lock:
            head = slot.state.head
            if expected_seq is None:
                expected_seq = head + 1
            if expected_seq != head + 1:
                raise err(errors.SEQ_CONFLICT,
                          f"expected_seq {expected_seq} but next seq is {head + 1}")
            prev = slot.records[-1].digest()
            rec = EventRecord(item=item, seq=expected_seq, ts=now_timestamp(),
                              agent=agent, kind=kind, payload=copy.deepcopy(payload),
                              prev_hash=prev)
            line = rec.canonical()  # also rejects non-serializable payloads
            scratch = slot.state.clone()
            apply_event(scratch, rec)
            self._persist(rec, line)
            slot.records.append(rec)
            slot.state = scratch
            return rec

    # convenience wrappers that build well-formed payloads ---------------------

    def set_property(self, item: str, name: str, value, agent: str,
                     expected_seq: int | None = None) -> EventRecord:
        return self.append_event(item, "PropertySet",
                                 {"name": name, "value": value, "mutable": True},
                                 agent, expected_seq)

    def record_outcome(self, item: str, schema_ref: tuple, document: dict, agent: str,
                       expected_seq: int | None = None) -> EventRecord:
        """Validate a document against its schema and record it as the next
        outcome version for (item, schema name)."""
        schema_name, want_version = schema_ref
        state = self.get_state(item)
        doc_version = self._resolve_schema(state, schema_name, want_version)
        if doc_version is None:
            raise err(errors.UNKNOWN_SCHEMA, f"cannot resolve schema {schema_name!r} v{want_version}")
        schema_doc, version = doc_version
        parsed = schema.parse_schema(schema_doc)
        report = schema.validate(parsed, document)
        if not report.valid:
            raise err(errors.VALIDATION_FAILURE,
                      f"document violates schema {schema_name!r} v{version}",
                      report.to_doc())
        latest = state.latest_outcome_version(schema_name)
        next_version = 0 if latest is None else latest + 1
        payload = {
            "schema": {"name": schema_name, "version": version},
            "outcome_version": next_version,
            "document": document,
        }
        return self.append_event(item, "OutcomeRecorded", payload, agent, expected_seq)

    def _resolve_schema(self, state: ItemState, name: str, version) -> tuple[dict, int] | None:
        if state.workflow is not None and isinstance(version, int):
            pinned = state.workflow.schemas.get(tokengame.activity_key(name, version))
            if pinned is not None:
                return pinned, version
        if self.schema_resolver is not None:
            return self.schema_resolver(name, version)
        return None

    def set_view(self, item: str, view_name: str, schema_name: str, outcome_version: int,
                 agent: str, expected_seq: int | None = None) -> EventRecord:
        return self.append_event(item, "ViewSet",
                                 {"view": view_name, "schema": schema_name,
                                  "outcome_version": outcome_version},
                                 agent, expected_seq)

    def change_collection(self, item: str, collection: str, edit: str, member: str,
                          agent: str, expected_seq: int | None = None,
                          slots: dict | None = None, position: int | None = None) -> EventRecord:
        if edit == "add" and member not in self._slots:
            raise err(errors.UNKNOWN_ITEM, f"member item {member!r} does not exist")
        return self.append_event(item, "CollectionChanged",
                                 {"collection": collection, "edit": edit, "member": member,
                                  "slots": slots, "position": position},
                                 agent, expected_seq)
