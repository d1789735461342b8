"""Versioned descriptions stored as ordinary items.

A description of kind K (schema | activity | workflow | item) and name N is
one item of type ``description`` named ``K:N``. Publishing version v records
an outcome under the meta-schema named K: the outcome document is a small
envelope {kind, name, body} whose ``body`` is the canonical text of the full
definition document. The envelope validates against the meta-schema through
the ordinary schema validator; the array-structured interior of a definition
(vertices, field specs, ...) is checked by the kind-specific structural
validators in this module. Everything here goes through the public store
operations only: descriptions get zero special-case storage.

The meta layer bootstraps itself: the meta-schema for schemas is a schema
document whose own envelope validates against itself, and the other three
meta-schemas validate against it.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import errors, expr, schema, tokengame
from .canonical import canonical_text, from_canonical, is_primitive
from .errors import KernelError, err
from .store import Store

KINDS = ("schema", "activity", "workflow", "item")
ADMIN_ROLE = "admin"
ADMIN_AGENT_NAME = "admin"
_ROLE_PREFIX = "role:"
_PUBLISH_RETRIES = 16


@dataclass(frozen=True)
class DescriptionRef:
    kind: str
    name: str
    version: int

    def to_doc(self) -> dict:
        return {"kind": self.kind, "name": self.name, "version": self.version}


def meta_schema_doc(kind: str) -> dict:
    """The built-in meta-schema describing envelopes of one description kind."""
    return {
        "kind": "schema",
        "name": kind,
        "fields": [
            {"name": "kind", "type": "string", "required": True, "enum_values": [kind]},
            {"name": "name", "type": "string", "required": True},
            {"name": "body", "type": "string", "required": True},
        ],
        "groups": [],
    }


def envelope_for(kind: str, name: str, document: dict) -> dict:
    return {"kind": kind, "name": name, "body": canonical_text(document)}


def desc_item_name(kind: str, name: str) -> str:
    return f"{kind}:{name}"


# -- roles -------------------------------------------------------------------


def agent_roles(store: Store, agent_uuid: str) -> set[str]:
    state = store.get_state(agent_uuid)
    if state.item_type != "agent":
        raise err(errors.UNKNOWN_AGENT, f"item {agent_uuid!r} is not an agent")
    return {
        name[len(_ROLE_PREFIX):]
        for name, prop in state.properties.items()
        if name.startswith(_ROLE_PREFIX) and prop["value"] is True
    }


def require_role(store: Store, agent_uuid: str, role: str) -> None:
    if role not in agent_roles(store, agent_uuid):
        name = store.get_state(agent_uuid).name
        raise err(errors.ROLE_DENIED, f"agent {name!r} does not hold role {role!r}")


def resolve_agent(store: Store, agent: str) -> str:
    """Accepts an agent uuid or name; returns the uuid."""
    ref = store.resolve_item(agent, "agent")
    if ref.item_type != "agent":
        raise err(errors.UNKNOWN_AGENT, f"item {agent!r} is not an agent")
    return ref.uuid


# -- structural validation of definition documents ----------------------------


def _check_ref(value: object, where: str, problems: list[dict]) -> None:
    if (not isinstance(value, dict) or set(value) != {"name", "version"}
            or not isinstance(value.get("name"), str) or not value["name"]
            or not isinstance(value.get("version"), int) or isinstance(value["version"], bool)
            or value["version"] < 0):
        problems.append({"path": where, "code": "bad-reference",
                         "message": f"{where} must be {{name, version}} with version ≥ 0"})


def _validate_activity_doc(document: dict) -> list[dict]:
    problems: list[dict] = []
    if document.get("role") is None or not isinstance(document.get("role"), str) or not document["role"]:
        problems.append({"path": "role", "code": "bad-structure",
                         "message": "activity role must be a non-empty string"})
    if "schema" in document and document["schema"] is not None:
        _check_ref(document["schema"], "schema", problems)
    on_complete = document.get("on_complete", [])
    if not isinstance(on_complete, list):
        problems.append({"path": "on_complete", "code": "bad-structure",
                         "message": "on_complete must be a list of assignments"})
        on_complete = []
    for i, a in enumerate(on_complete):
        where = f"on_complete[{i}]"
        if not isinstance(a, dict) or set(a) != {"set", "expr"} \
                or not isinstance(a.get("set"), str) or not a["set"] \
                or not isinstance(a.get("expr"), str):
            problems.append({"path": where, "code": "bad-structure",
                             "message": "assignment must be {set, expr}"})
            continue
        try:
            expr.parse(a["expr"])
        except KernelError as exc:
            problems.append({"path": where, "code": "bad-expression", "message": exc.message})
    unknown = set(document) - {"kind", "name", "role", "schema", "on_complete"}
    if unknown:
        problems.append({"path": "", "code": "bad-structure",
                         "message": f"unknown keys {sorted(unknown)}"})
    return problems


def _validate_item_doc(document: dict) -> list[dict]:
    problems: list[dict] = []
    _check_ref(document.get("workflow"), "workflow", problems)
    props = document.get("properties", [])
    if not isinstance(props, list):
        problems.append({"path": "properties", "code": "bad-structure",
                         "message": "properties must be a list"})
        props = []
    seen: set[str] = set()
    for i, p in enumerate(props):
        where = f"properties[{i}]"
        if not isinstance(p, dict) or set(p) != {"name", "default", "mutable"} \
                or not isinstance(p.get("name"), str) or not p["name"] \
                or not is_primitive(p.get("default")) \
                or not isinstance(p.get("mutable"), bool):
            problems.append({"path": where, "code": "bad-structure",
                             "message": "property must be {name, default, mutable}"})
            continue
        if p["name"] in seen:
            problems.append({"path": where, "code": "duplicate-property",
                             "message": f"duplicate property {p['name']!r}"})
        seen.add(p["name"])
    unknown = set(document) - {"kind", "name", "workflow", "properties"}
    if unknown:
        problems.append({"path": "", "code": "bad-structure",
                         "message": f"unknown keys {sorted(unknown)}"})
    return problems


def validate_document(kind: str, document: object) -> list[dict]:
    """Kind-specific structural validation; returns all problems found."""
    if not isinstance(document, dict):
        return [{"path": "", "code": "bad-structure", "message": "document must be an object"}]
    problems: list[dict] = []
    if document.get("kind") != kind:
        problems.append({"path": "kind", "code": "bad-structure",
                         "message": f"document kind must be {kind!r}"})
    if not isinstance(document.get("name"), str) or not document["name"]:
        problems.append({"path": "name", "code": "bad-structure",
                         "message": "document name must be a non-empty string"})
    if problems:
        return problems
    if kind == "schema":
        try:
            schema.parse_schema(document)
        except schema.SchemaParseError as exc:
            problems.extend(exc.schema_errors)
    elif kind == "workflow":
        problems.extend(dict(v, path="") for v in tokengame.validate_graph(document))
    elif kind == "activity":
        problems.extend(_validate_activity_doc(document))
    elif kind == "item":
        problems.extend(_validate_item_doc(document))
    else:
        problems.append({"path": "kind", "code": "bad-structure",
                         "message": f"unknown description kind {kind!r}"})
    return problems


def _referenced_descriptions(kind: str, document: dict) -> list[tuple[str, str, int]]:
    refs: list[tuple[str, str, int]] = []
    if kind == "activity" and document.get("schema"):
        ref = document["schema"]
        refs.append(("schema", ref["name"], ref["version"]))
    elif kind == "workflow":
        for v in document.get("vertices", []):
            if v.get("vtype") == "activity":
                ref = v["activity"]
                refs.append(("activity", ref["name"], ref["version"]))
    elif kind == "item":
        ref = document["workflow"]
        refs.append(("workflow", ref["name"], ref["version"]))
    return refs


# -- core operations -----------------------------------------------------------


def _find_description_item(store: Store, kind: str, name: str):
    for ref in store.items("description"):
        if ref.name == desc_item_name(kind, name):
            return ref
    return None


def resolve_full(store: Store, kind: str, name: str, version: int | str) -> tuple[dict, int, str]:
    """Resolve to (document, concrete version, description item uuid)."""
    if kind not in KINDS:
        raise err(errors.UNKNOWN_DESCRIPTION, f"unknown description kind {kind!r}")
    ref = _find_description_item(store, kind, name)
    if ref is None:
        raise err(errors.UNKNOWN_DESCRIPTION, f"no {kind} description named {name!r}")
    state = store.get_state(ref.uuid)
    versions = state.outcomes.get(kind, {})
    if version == "latest":
        concrete = state.views.get(kind, {}).get("last")
        if concrete is None:
            raise err(errors.UNKNOWN_VERSION, f"{kind} {name!r} has no published versions")
    else:
        if not isinstance(version, int) or isinstance(version, bool):
            raise err(errors.UNKNOWN_VERSION, f"bad version {version!r}")
        concrete = version
    entry = versions.get(concrete)
    if entry is None:
        raise err(errors.UNKNOWN_VERSION, f"{kind} {name!r} has no version {concrete}")
    document = from_canonical(entry["document"]["body"])
    return document, concrete, ref.uuid


def resolve(store: Store, kind: str, name: str, version: int | str) -> dict:
    return resolve_full(store, kind, name, version)[0]


def list_versions(store: Store, kind: str, name: str) -> list[dict]:
    """Every published version of a description, from its event history."""
    if kind not in KINDS:
        raise err(errors.UNKNOWN_DESCRIPTION, f"unknown description kind {kind!r}")
    ref = _find_description_item(store, kind, name)
    if ref is None:
        raise err(errors.UNKNOWN_DESCRIPTION, f"no {kind} description named {name!r}")
    entries = []
    for rec in store.history(ref.uuid):
        if rec.kind == "DescriptionPublished":
            entries.append({
                "version": rec.payload["version"],
                "published_at": rec.ts,
                "publisher": rec.agent,
            })
    return sorted(entries, key=lambda e: e["version"])


def catalog(store: Store, kind: str | None = None, name: str | None = None) -> list[dict]:
    """All published descriptions as (kind, name, versions) entries."""
    entries = []
    for ref in store.items("description"):
        state = store.get_state(ref.uuid)
        for k in KINDS:
            if kind is not None and k != kind:
                continue
            versions = sorted(state.outcomes.get(k, {}))
            if not versions:
                continue
            dname = state.properties.get("DescriptionName", {}).get("value")
            if dname is None:
                dname = ref.name.split(":", 1)[1] if ":" in ref.name else ref.name
            if name is not None and dname != name:
                continue
            entries.append({"kind": k, "name": dname, "versions": versions})
    return sorted(entries, key=lambda e: (e["kind"], e["name"]))


def _validate_envelope(store: Store, kind: str, envelope: dict,
                       meta_override: dict | None = None) -> tuple[str, int]:
    if meta_override is not None:
        meta_doc, meta_version = meta_override, 0
    else:
        try:
            meta_doc, meta_version, _ = resolve_full(store, "schema", kind, "latest")
        except KernelError as exc:
            raise err(errors.UNKNOWN_SCHEMA,
                      f"meta-schema for kind {kind!r} is not published (bootstrap first)",
                      exc.to_doc()) from exc
    parsed = schema.parse_schema(meta_doc)
    report = schema.validate(parsed, envelope)
    if not report.valid:
        raise err(errors.VALIDATION_FAILURE,
                  f"envelope violates meta-schema {kind!r}", report.to_doc())
    return kind, meta_version


def publish_description(store: Store, kind: str, name: str, document: dict, agent: str,
                        at_version: int | None = None,
                        _bootstrap_meta: dict | None = None) -> DescriptionRef:
    """Publish the next version of a description (or a pinned coordinate when
    importing a bundle). Prior versions stay readable forever."""
    if kind not in KINDS:
        raise err(errors.UNKNOWN_DESCRIPTION, f"unknown description kind {kind!r}")
    agent_uuid = resolve_agent(store, agent)
    require_role(store, agent_uuid, ADMIN_ROLE)
    if not isinstance(document, dict) or document.get("name") != name:
        raise err(errors.VALIDATION_FAILURE,
                  f"document name must equal the published name {name!r}")
    problems = validate_document(kind, document)
    if problems:
        raise err(errors.VALIDATION_FAILURE,
                  f"{kind} document {name!r} is structurally invalid", problems)
    for rkind, rname, rversion in _referenced_descriptions(kind, document):
        try:
            resolve_full(store, rkind, rname, rversion)
        except KernelError as exc:
            raise err(errors.DANGLING_REFERENCE,
                      f"{kind} {name!r} references unresolved {rkind} {rname!r} v{rversion}",
                      exc.to_doc()) from exc

    envelope = envelope_for(kind, name, document)
    meta_name, meta_version = _validate_envelope(store, kind, envelope, _bootstrap_meta)

    item_ref = _find_description_item(store, kind, name)
    if item_ref is None:
        item_ref = store.create_item(
            desc_item_name(kind, name), "description",
            {"DescriptionName": {"value": name, "mutable": False},
             "DescriptionKind": {"value": kind, "mutable": False}},
            agent_uuid)

    last_error: KernelError | None = None
    for _ in range(_PUBLISH_RETRIES):
        state = store.get_state(item_ref.uuid)
        if at_version is not None:
            version = at_version
            if version in state.outcomes.get(kind, {}):
                raise err(errors.SEQ_CONFLICT,
                          f"{kind} {name!r} v{version} already published")
        else:
            latest = state.latest_outcome_version(kind)
            version = 0 if latest is None else latest + 1
        payload = {
            "kind": kind, "name": name, "version": version,
            "meta": {"name": meta_name, "version": meta_version},
            "envelope": envelope,
        }
        try:
            store.append_event(item_ref.uuid, "DescriptionPublished", payload,
                               agent_uuid, state.head + 1)
            return DescriptionRef(kind, name, version)
        except KernelError as exc:
            if exc.code != errors.SEQ_CONFLICT:
                raise
            last_error = exc  # concurrent publisher won; recompute and retry
    raise last_error


def instantiate(store: Store, description_name: str, version: int | str,
                item_name: str, agent: str):
    """Create an instance item pinned to concrete description versions.

    "latest" is frozen to the version current right now; later publishes
    never affect the new instance.
    """
    agent_uuid = resolve_agent(store, agent)
    require_role(store, agent_uuid, ADMIN_ROLE)
    item_doc, item_version, _ = resolve_full(store, "item", description_name, version)
    wf_ref = item_doc["workflow"]
    wf_doc, wf_version, _ = resolve_full(store, "workflow", wf_ref["name"], wf_ref["version"])

    activities: dict[str, dict] = {}
    schemas: dict[str, dict] = {}
    for vertex in wf_doc.get("vertices", []):
        if vertex.get("vtype") != "activity":
            continue
        aref = vertex["activity"]
        akey = tokengame.activity_key(aref["name"], aref["version"])
        if akey in activities:
            continue
        adoc, _, _ = resolve_full(store, "activity", aref["name"], aref["version"])
        activities[akey] = adoc
        sref = adoc.get("schema")
        if sref:
            skey = tokengame.activity_key(sref["name"], sref["version"])
            if skey not in schemas:
                sdoc, _, _ = resolve_full(store, "schema", sref["name"], sref["version"])
                schemas[skey] = sdoc

    properties = {
        p["name"]: {"value": p["default"], "mutable": p["mutable"]}
        for p in item_doc.get("properties", [])
    }
    properties.setdefault("Type", {"value": description_name, "mutable": False})

    workflow_block = {
        "document": wf_doc,
        "activities": activities,
        "schemas": schemas,
        "pins": {
            "item_description": {"name": description_name, "version": item_version},
            "workflow": {"name": wf_ref["name"], "version": wf_version},
        },
    }
    return store.create_item(item_name, "instance", properties, agent_uuid,
                             workflow=workflow_block)


@dataclass
class BootstrapReport:
    created: bool
    admin_agent: str
    meta_versions: dict

    def to_doc(self) -> dict:
        return {"created": self.created, "admin_agent": self.admin_agent,
                "meta_versions": self.meta_versions}


def bootstrap(store: Store) -> BootstrapReport:
    """Create the meta layer: the four meta-schemas (published as ordinary
    schema descriptions at version 0) and the bootstrap admin agent.
    Idempotent over an already-bootstrapped store; anything in between is a
    mismatch error."""
    existing_admin = [r for r in store.items("agent") if r.name == ADMIN_AGENT_NAME]
    existing_meta = {
        kind: _find_description_item(store, "schema", kind) for kind in KINDS
    }

    if not store.items():
        admin = store.create_item(
            ADMIN_AGENT_NAME, "agent",
            {f"{_ROLE_PREFIX}{ADMIN_ROLE}": {"value": True, "mutable": True}})
        for kind in KINDS:
            doc = meta_schema_doc(kind)
            publish_description(
                store, "schema", kind, doc, admin.uuid,
                _bootstrap_meta=meta_schema_doc("schema") if kind == "schema" else None)
        return BootstrapReport(True, admin.uuid, {k: 0 for k in KINDS})

    complete = bool(existing_admin) and all(existing_meta.values())
    if complete:
        admin_uuid = existing_admin[0].uuid
        if ADMIN_ROLE not in agent_roles(store, admin_uuid):
            raise err(errors.NON_EMPTY_STORE_MISMATCH,
                      "existing admin agent does not hold the admin role")
        for kind in KINDS:
            state = store.get_state(existing_meta[kind].uuid)
            entry = state.outcomes.get("schema", {}).get(0)
            expected = envelope_for("schema", kind, meta_schema_doc(kind))
            if entry is None or entry["document"] != expected:
                raise err(errors.NON_EMPTY_STORE_MISMATCH,
                          f"meta-schema {kind!r} v0 differs from the built-in document")
        return BootstrapReport(False, admin_uuid, {k: 0 for k in KINDS})

    raise err(errors.NON_EMPTY_STORE_MISMATCH,
              "store is neither empty nor completely bootstrapped")
