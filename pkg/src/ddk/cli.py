"""Operator command line.

Exit codes: 0 success, 1 domain error (validation, conflicts, unknown
names), 2 usage error. With --json every read subcommand prints exactly the
canonical bytes the HTTP API would serve for the same request, so outputs
can be byte-compared across the two surfaces. Error bodies go to stderr
with the same error codes the API uses.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from . import errors, provenance
from .canonical import canonical_bytes
from .errors import KernelError, err
from .kernel import Kernel, StoreLock
from .store import Store

_STORE_ENVVAR = "DDK_STORE"


def _emit(doc, as_json: bool, human) -> None:
    if as_json:
        sys.stdout.buffer.write(canonical_bytes(doc))
        if sys.stdout.isatty():
            sys.stdout.write("\n")
        sys.stdout.flush()
    else:
        human(doc)


def _pretty(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False))


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except KernelError as exc:
            sys.stderr.write(canonical_bytes(exc.to_doc()).decode("utf-8") + "\n")
            sys.exit(1)
    return wrapper


def _store_dir(store: str | None) -> Path:
    if store is None:
        raise click.UsageError(
            f"no store directory: pass --store or set {_STORE_ENVVAR}")
    return Path(store)


def _open(store: str | None) -> Kernel:
    return Kernel.open(_store_dir(store))


def _load_doc(source: str):
    raw = sys.stdin.read() if source == "-" else Path(source).read_text()
    try:
        return json.loads(raw)
    except ValueError as exc:
        raise err(errors.BAD_REQUEST, f"not valid JSON: {exc}") from exc


def _require_agent(agent: str | None) -> str:
    if agent is None:
        raise click.UsageError("this command needs --agent")
    return agent


store_option = click.option("--store", envvar=_STORE_ENVVAR,
                            help="Store directory (or DDK_STORE).")
agent_option = click.option("--agent", help="Acting agent (name or uuid).")
json_option = click.option("--json", "as_json", is_flag=True,
                           help="Canonical JSON output (machine mode).")


@click.group()
@click.version_option(package_name="ddk", prog_name="ddk")
def main():
    """Event-sourced, description-driven workflow kernel."""


@main.command()
@click.argument("directory", required=False)
@store_option
@_handle_errors
def init(directory, store):
    """Create an empty store."""
    path = _store_dir(directory or store)
    Store.initialize(path)
    click.echo(f"initialized store at {path}")


@main.command()
@click.argument("directory", required=False)
@store_option
@json_option
@_handle_errors
def bootstrap(directory, store, as_json):
    """Create the meta layer (idempotent)."""
    path = _store_dir(directory or store)
    with StoreLock(path):
        report = Kernel.open(path).bootstrap()
    _emit(report.to_doc(), as_json, lambda d: click.echo(
        ("bootstrapped" if d["created"] else "already bootstrapped")
        + f"; admin agent {d['admin_agent']}"))


@main.command()
@click.option("--listen", default="127.0.0.1:7707", show_default=True,
              help="Bind address as host:port.")
@click.option("--console", "console_dir", envvar="DDK_CONSOLE",
              help="Directory of built console assets to serve at /console.")
@store_option
@_handle_errors
def serve(listen, console_dir, store):
    """Run the HTTP server (holds the store lock while running)."""
    import signal

    import uvicorn

    from .server import create_app, load_tokens

    path = _store_dir(store)
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.UsageError(f"bad --listen value {listen!r} (want host:port)")
    def _terminate(signum, frame):
        raise SystemExit(0)

    # SIGTERM must unwind the lock context even when uvicorn leaves the
    # default disposition in place
    signal.signal(signal.SIGTERM, _terminate)
    with StoreLock(path):
        kernel = Kernel.open(path)
        app = create_app(kernel, tokens=load_tokens(path), console_dir=console_dir)
        uvicorn.run(app, host=host, port=int(port), log_level="warning")


@main.command()
@click.option("--kind", required=True,
              type=click.Choice(["schema", "activity", "workflow", "item"]))
@click.option("--file", "source", required=True,
              help="Document file ('-' for stdin).")
@store_option
@agent_option
@json_option
@_handle_errors
def publish(kind, source, store, agent, as_json):
    """Publish the next version of a description."""
    document = _load_doc(source)
    name = document.get("name") if isinstance(document, dict) else None
    if not isinstance(name, str) or not name:
        raise err(errors.VALIDATION_FAILURE, "document must carry a name")
    path = _store_dir(store)
    with StoreLock(path):
        ref = Kernel.open(path).publish(kind, name, document, _require_agent(agent))
    _emit(ref.to_doc(), as_json,
          lambda d: click.echo(f"published {d['kind']} {d['name']} v{d['version']}"))


def _version_arg(raw: str):
    if raw == "latest":
        return "latest"
    try:
        return int(raw)
    except ValueError:
        raise click.UsageError(f"bad version {raw!r} (an integer or 'latest')") from None


@main.command()
@click.argument("kind")
@click.argument("name")
@click.argument("version", default="latest")
@store_option
@json_option
@_handle_errors
def resolve(kind, name, version, store, as_json):
    """Print one published description document."""
    doc = _open(store).resolve(kind, name, _version_arg(version))
    _emit(doc, as_json, _pretty)


@main.command()
@click.argument("kind")
@click.argument("name")
@store_option
@json_option
@_handle_errors
def versions(kind, name, store, as_json):
    """List published versions of a description."""
    entries = _open(store).list_versions(kind, name)
    _emit(entries, as_json, lambda es: [
        click.echo(f"v{e['version']}  {e['published_at']}  by {e['publisher']}")
        for e in es])


@main.command()
@click.argument("description")
@click.option("--version", default="latest", show_default=True)
@click.option("--name", "item_name", required=True, help="Name of the new item.")
@store_option
@agent_option
@json_option
@_handle_errors
def instantiate(description, version, item_name, store, agent, as_json):
    """Create an instance of an item description (versions pin now)."""
    path = _store_dir(store)
    with StoreLock(path):
        ref = Kernel.open(path).instantiate(
            description, _version_arg(version), item_name, _require_agent(agent))
    _emit(ref.to_doc(), as_json,
          lambda d: click.echo(f"created {d['name']} ({d['uuid']})"))


@main.command()
@click.option("--type", "item_type",
              type=click.Choice(["instance", "description", "agent"]))
@store_option
@json_option
@_handle_errors
def items(item_type, store, as_json):
    """List items."""
    refs = [r.to_doc() for r in _open(store).store.items(item_type)]
    _emit(refs, as_json, lambda rs: [
        click.echo(f"{r['uuid']}  {r['type']:<11}  {r['name']}") for r in rs])


def _human_state(doc) -> None:
    click.echo(f"{doc['name']} ({doc['type']}) uuid={doc['uuid']} head={doc['head']}")
    for name, prop in doc["properties"].items():
        lock = "" if prop["mutable"] else " [immutable]"
        click.echo(f"  property {name} = {prop['value']!r}{lock}")
    for schema_name, versions_ in doc["outcomes"].items():
        click.echo(f"  outcomes {schema_name}: versions {sorted(versions_)}")
    wf = doc.get("workflow")
    if wf:
        click.echo(f"  workflow {wf['pins']['workflow']['name']} "
                   f"v{wf['pins']['workflow']['version']}"
                   f"{' [finished]' if wf['finished'] else ''}")
        for vid, rec in wf["states"].items():
            click.echo(f"    {vid}: {rec['state']}")
        for vid, count in wf["tokens"].items():
            click.echo(f"    token on {vid} x{count}")


@main.command()
@click.argument("item")
@store_option
@json_option
@_handle_errors
def show(item, store, as_json):
    """Show an item's current state."""
    kernel = _open(store)
    ref = kernel.store.resolve_item(item)
    _emit(kernel.store.state_doc(ref.uuid), as_json, _human_state)


@main.command()
@click.argument("item")
@click.option("--from", "from_seq", type=int, default=0, show_default=True)
@click.option("--to", "to_seq", type=int, default=None)
@store_option
@json_option
@_handle_errors
def history(item, from_seq, to_seq, store, as_json):
    """Print an item's event records."""
    kernel = _open(store)
    ref = kernel.store.resolve_item(item)
    records = kernel.store.history(ref.uuid, from_seq, to_seq)
    docs = [r.to_doc() for r in records]
    def human(ds):
        for rec, doc in zip(records, ds):
            click.echo(f"{doc['seq']:>4}  {doc['ts']}  {doc['kind']:<20} "
                       f"{provenance.summarize(rec)}")
    _emit(docs, as_json, human)


@main.command()
@click.argument("item")
@click.argument("seq", type=int)
@store_option
@json_option
@_handle_errors
def at(item, seq, store, as_json):
    """Reconstruct an item's state as of a sequence number."""
    kernel = _open(store)
    state = kernel.reconstruct_at(item, seq)
    _emit(state.to_doc(), as_json, _human_state)


@main.command()
@store_option
@agent_option
@json_option
@_handle_errors
def jobs(store, agent, as_json):
    """List the acting agent's executable jobs."""
    kernel = _open(store)
    docs = [j.to_doc() for j in kernel.jobs_for(_require_agent(agent))]
    _emit(docs, as_json, lambda js: [
        click.echo(f"{j['item_name']:<16} {j['vertex']:<12} {j['transition']:<9} "
                   f"(activity {j['activity']}, role {j['required_role']})")
        for j in js] or [click.echo("no jobs")])


@main.command("exec")
@click.option("--item", required=True)
@click.option("--vertex", required=True)
@click.option("--transition", required=True,
              type=click.Choice(["Start", "Complete", "Suspend", "Resume", "Skip"]))
@click.option("--outcome", "outcome_source",
              help="Outcome document file ('-' for stdin).")
@click.option("--expected-seq", type=int, default=None)
@store_option
@agent_option
@json_option
@_handle_errors
def exec_cmd(item, vertex, transition, outcome_source, expected_seq, store, agent, as_json):
    """Fire one workflow transition."""
    outcome = _load_doc(outcome_source) if outcome_source else None
    path = _store_dir(store)
    with StoreLock(path):
        record = Kernel.open(path).execute(
            _require_agent(agent), item, vertex, transition, outcome,
            expected_seq=expected_seq)
    _emit(record.to_doc(), as_json, lambda d: click.echo(
        f"{d['payload']['transition']} fired at {d['payload']['vertex']} (seq {d['seq']})"))


@main.command()
@click.option("--item", required=True)
@click.option("--file", "source", required=True,
              help="New workflow document ('-' for stdin).")
@click.option("--expected-seq", type=int, default=None)
@store_option
@agent_option
@json_option
@_handle_errors
def edit(item, source, expected_seq, store, agent, as_json):
    """Live-edit a running instance's workflow graph."""
    document = _load_doc(source)
    path = _store_dir(store)
    with StoreLock(path):
        record = Kernel.open(path).apply_live_edit(
            item, document, _require_agent(agent), expected_seq=expected_seq)
    _emit(record.to_doc(), as_json,
          lambda d: click.echo(f"workflow edited (seq {d['seq']})"))


@main.command()
@click.argument("kind")
@click.argument("name")
@click.argument("v_from", type=int)
@click.argument("v_to", type=int)
@store_option
@json_option
@_handle_errors
def diff(kind, name, v_from, v_to, store, as_json):
    """Structural diff between two description versions."""
    doc = _open(store).diff_descriptions(kind, name, v_from, v_to)
    def human(d):
        for entry in d["added"]:
            click.echo(f"+ {_path_str(entry['path'])}: {entry['value']!r}")
        for entry in d["removed"]:
            click.echo(f"- {_path_str(entry['path'])}: {entry['value']!r}")
        for entry in d["changed"]:
            click.echo(f"~ {_path_str(entry['path'])}: "
                       f"{entry['from']!r} -> {entry['to']!r}")
        if not (d["added"] or d["removed"] or d["changed"]):
            click.echo("no changes")
    _emit(doc, as_json, human)


def _path_str(path) -> str:
    out = ""
    for seg in path:
        out += f"[{seg}]" if isinstance(seg, int) else ("." + seg if out else seg)
    return out or "(root)"


@main.command()
@click.option("--kind", required=True)
@click.option("--name", required=True)
@click.option("--version", default="latest", show_default=True)
@click.option("--out", "out_path", help="Write the bundle to a file.")
@store_option
@json_option
@_handle_errors
def export(kind, name, version, out_path, store, as_json):
    """Export a description and its dependency closure as a bundle."""
    bundle = _open(store).export_bundle(kind, name, _version_arg(version))
    if out_path:
        Path(out_path).write_bytes(canonical_bytes(bundle))
        click.echo(f"wrote bundle with {len(bundle['descriptions'])} descriptions "
                   f"to {out_path}")
        return
    _emit(bundle, as_json, _pretty)


@main.command("import")
@click.argument("source")
@click.option("--policy", default="reject_on_conflict", show_default=True,
              type=click.Choice(["reject_on_conflict", "skip_existing"]))
@store_option
@agent_option
@json_option
@_handle_errors
def import_cmd(source, policy, store, agent, as_json):
    """Import a bundle at its original version coordinates."""
    bundle = _load_doc(source)
    path = _store_dir(store)
    with StoreLock(path):
        report = Kernel.open(path).import_bundle(bundle, policy, _require_agent(agent))
    _emit(report, as_json, lambda r: click.echo(
        f"imported {len(r['imported'])}, skipped {len(r['skipped'])}, "
        f"conflicted {len(r['conflicted'])}"))


if __name__ == "__main__":
    main()
