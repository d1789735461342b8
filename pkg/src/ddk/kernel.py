"""Kernel facade: one store wired together with every operation layer,
plus the cross-process store lock used by the CLI and server."""

from __future__ import annotations

import os
from pathlib import Path

from . import bundles, descriptions, engine, errors, provenance
from .errors import err
from .store import Store

LOCK_FILE = "store.lock"


class StoreLock:
    """Single-writer lock for a store directory; the file holds the pid."""

    def __init__(self, directory: str | os.PathLike):
        self.path = Path(directory) / LOCK_FILE
        self._held = False

    def acquire(self) -> "StoreLock":
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                holder = self._holder_pid()
                if holder is not None and _pid_alive(holder):
                    raise err(errors.STORE_LOCKED,
                              f"store is locked by running process {holder}")
                try:  # stale lock from a dead process
                    self.path.unlink()
                except FileNotFoundError:
                    pass
                continue
            with os.fdopen(fd, "w") as fh:
                fh.write(str(os.getpid()))
            self._held = True
            return self

    def _holder_pid(self) -> int | None:
        try:
            return int(self.path.read_text().strip())
        except (OSError, ValueError):
            return None

    def release(self) -> None:
        if self._held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
            self._held = False

    def __enter__(self) -> "StoreLock":
        return self.acquire()

    def __exit__(self, *exc) -> None:
        self.release()


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class Kernel:
    """A store plus resolver wiring; the object the CLI and server hold."""

    def __init__(self, store: Store):
        self.store = store
        store.schema_resolver = self._resolve_schema

    @classmethod
    def open(cls, directory: str | os.PathLike) -> "Kernel":
        return cls(Store(directory))

    @classmethod
    def in_memory(cls) -> "Kernel":
        return cls(Store(None))

    def _resolve_schema(self, name: str, version):
        doc, concrete, _ = descriptions.resolve_full(self.store, "schema", name, version)
        return doc, concrete

    def save_snapshots(self) -> None:
        for ref in self.store.items():
            self.store.save_snapshot(ref.uuid)

    # thin delegation, so callers need only the facade -------------------------

    def bootstrap(self):
        return descriptions.bootstrap(self.store)

    def publish(self, kind, name, document, agent, at_version=None):
        return descriptions.publish_description(self.store, kind, name, document,
                                                agent, at_version=at_version)

    def resolve(self, kind, name, version):
        return descriptions.resolve(self.store, kind, name, version)

    def resolve_full(self, kind, name, version):
        return descriptions.resolve_full(self.store, kind, name, version)

    def list_versions(self, kind, name):
        return descriptions.list_versions(self.store, kind, name)

    def catalog(self, kind=None, name=None):
        return descriptions.catalog(self.store, kind, name)

    def instantiate(self, description_name, version, item_name, agent):
        return descriptions.instantiate(self.store, description_name, version,
                                        item_name, agent)

    def jobs_for(self, agent):
        return engine.jobs_for(self.store, agent)

    def execute(self, agent, item, vertex, transition, outcome_document=None,
                expected_seq=None):
        return engine.execute(self.store, agent, item, vertex, transition,
                              outcome_document, expected_seq)

    def apply_live_edit(self, item, new_document, agent, expected_seq=None):
        return engine.apply_live_edit(self.store, item, new_document, agent,
                                      expected_seq)

    def reconstruct_at(self, item, seq):
        return provenance.reconstruct_at(self.store, item, seq)

    def timeline(self, item, **filters):
        return provenance.timeline(self.store, item, **filters)

    def diff_descriptions(self, kind, name, v_from, v_to):
        return provenance.diff_descriptions(self.store, kind, name, v_from, v_to)

    def export_bundle(self, kind, name, version):
        return bundles.export_bundle(self.store, kind, name, version)

    def import_bundle(self, bundle, policy, agent):
        return bundles.import_bundle(self.store, bundle, policy, agent)
