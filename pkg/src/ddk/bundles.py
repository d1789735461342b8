"""Description exchange between kernel instances: dependency-closed bundles.

A bundle carries a root description plus everything it references
(item -> workflow -> activities -> schemas), each entry pinned by a digest
of its canonical document bytes. Import preserves version coordinates so
cross-instance references stay stable; conflicting content at the same
coordinates is surfaced, never silently renumbered.
"""

from __future__ import annotations

from . import descriptions, errors
from .canonical import document_digest
from .descriptions import DescriptionRef
from .errors import err
from .store import Store

BUNDLE_VERSION = 1


def _closure(store: Store, kind: str, name: str, version: int | str) -> dict:
    """All descriptions reachable from the root, keyed by (kind, name, ver)."""
    out: dict[tuple, dict] = {}
    stack = [(kind, name, version)]
    while stack:
        k, n, v = stack.pop()
        doc, concrete, _ = descriptions.resolve_full(store, k, n, v)
        key = (k, n, concrete)
        if key in out:
            continue
        out[key] = doc
        stack.extend(descriptions._referenced_descriptions(k, doc))
    return out


def export_bundle(store: Store, kind: str, name: str, version: int | str) -> dict:
    """Bundle the root and its full dependency closure, digest per entry,
    deterministically ordered by (kind, name, version)."""
    members = _closure(store, kind, name, version)
    entries = []
    for (k, n, v), doc in sorted(members.items()):
        entries.append({
            "kind": k,
            "name": n,
            "version": v,
            "document": doc,
            "digest": document_digest(doc),
        })
    return {"bundle_version": BUNDLE_VERSION, "descriptions": entries}


_KIND_ORDER = {"schema": 0, "activity": 1, "workflow": 2, "item": 3}


def import_bundle(store: Store, bundle: dict, policy: str, agent: str) -> dict:
    """Publish a bundle's entries at their original coordinates.

    Entries already present with identical digests are skipped; a differing
    digest at the same coordinates is a conflict. Under reject_on_conflict
    any conflict aborts the whole import before a single event is appended.
    Returns an ImportReport partitioning the bundle's entries.
    """
    if policy not in ("reject_on_conflict", "skip_existing"):
        raise err(errors.BAD_REQUEST, f"unknown import policy {policy!r}")
    agent_uuid = descriptions.resolve_agent(store, agent)
    descriptions.require_role(store, agent_uuid, descriptions.ADMIN_ROLE)
    if not isinstance(bundle, dict) or bundle.get("bundle_version") != BUNDLE_VERSION:
        raise err(errors.BAD_BUNDLE, "unsupported or missing bundle_version")
    entries = bundle.get("descriptions")
    if not isinstance(entries, list):
        raise err(errors.BAD_BUNDLE, "bundle has no descriptions list")

    to_import: list[dict] = []
    skipped: list[DescriptionRef] = []
    conflicted: list[DescriptionRef] = []
    seen: set[tuple] = set()
    for entry in entries:
        if not isinstance(entry, dict) or not {"kind", "name", "version", "document", "digest"} <= set(entry):
            raise err(errors.BAD_BUNDLE, f"malformed bundle entry: {entry!r}")
        kind, name, version = entry["kind"], entry["name"], entry["version"]
        if kind not in descriptions.KINDS or not isinstance(version, int):
            raise err(errors.BAD_BUNDLE, f"bad coordinates ({kind!r}, {name!r}, {version!r})")
        if (kind, name, version) in seen:
            raise err(errors.BAD_BUNDLE, f"duplicate entry ({kind}, {name}, {version})")
        seen.add((kind, name, version))
        if document_digest(entry["document"]) != entry["digest"]:
            raise err(errors.BAD_DIGEST,
                      f"digest mismatch for ({kind}, {name}, {version})")
        ref = DescriptionRef(kind, name, version)
        try:
            local_doc, _, _ = descriptions.resolve_full(store, kind, name, version)
        except Exception:
            local_doc = None
        if local_doc is None:
            to_import.append(entry)
        elif document_digest(local_doc) == entry["digest"]:
            skipped.append(ref)
        else:
            conflicted.append(ref)

    if conflicted and policy == "reject_on_conflict":
        raise err(errors.CONFLICT_ABORT,
                  "bundle conflicts with local descriptions; nothing imported",
                  [r.to_doc() for r in conflicted])

    imported: list[DescriptionRef] = []
    # dependency order: schemas, then activities, workflows, item descriptions
    to_import.sort(key=lambda e: (_KIND_ORDER[e["kind"]], e["name"], e["version"]))
    for entry in to_import:
        ref = descriptions.publish_description(
            store, entry["kind"], entry["name"], entry["document"], agent_uuid,
            at_version=entry["version"])
        imported.append(ref)

    def refs_doc(refs: list[DescriptionRef]) -> list[dict]:
        return [r.to_doc() for r in sorted(refs, key=lambda r: (r.kind, r.name, r.version))]

    return {
        "imported": refs_doc(imported),
        "skipped": refs_doc(skipped),
        "conflicted": refs_doc(conflicted),
    }
