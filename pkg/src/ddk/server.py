"""HTTP/JSON facade over the kernel.

Every response body is canonical JSON (so the CLI's --json output can be
byte-compared against it) and every error uses the uniform body
{error_code, message, details}. State-changing endpoints on items require
the X-Expected-Seq header and answer 409 on a sequence conflict.

Agent authentication is a deliberate stub: a static tokens file maps bearer
tokens to agent names; when a request carries no token, the agent named in
the body is trusted.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.staticfiles import StaticFiles

from . import descriptions, errors
from .canonical import canonical_bytes
from .errors import KernelError, err
from .kernel import Kernel

_STATUS = {
    errors.UNKNOWN_ITEM: 404,
    errors.UNKNOWN_DESCRIPTION: 404,
    errors.UNKNOWN_VERSION: 404,
    errors.UNKNOWN_SCHEMA: 404,
    errors.UNKNOWN_MEMBER: 404,
    errors.UNKNOWN_AGENT: 404,
    errors.RANGE_OUT_OF_BOUNDS: 404,
    errors.SEQ_CONFLICT: 409,
    errors.CONFLICT_ABORT: 409,
    errors.STALE_JOB: 409,
    errors.ROLE_DENIED: 403,
    errors.AUTH_FAILED: 403,
    errors.BAD_REQUEST: 400,
    errors.BAD_BUNDLE: 400,
    errors.AMBIGUOUS_NAME: 400,
    errors.EMPTY_NAME: 400,
}
_DEFAULT_STATUS = 422


def _canonical_response(doc, status: int = 200) -> Response:
    return Response(content=canonical_bytes(doc), status_code=status,
                    media_type="application/json")


def create_app(kernel: Kernel, tokens: dict | None = None,
               console_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="ddk", docs_url=None, redoc_url=None, openapi_url=None)
    store = kernel.store
    token_map = dict(tokens or {})

    @app.exception_handler(KernelError)
    def _kernel_error(_request, exc: KernelError):
        return _canonical_response(exc.to_doc(), _STATUS.get(exc.code, _DEFAULT_STATUS))

    @app.exception_handler(Exception)
    def _unexpected(_request, exc: Exception):
        body = {"error_code": "internal", "message": str(exc), "details": {}}
        return _canonical_response(body, 500)

    async def _body(request: Request) -> dict:
        try:
            parsed = json.loads(await request.body())
        except Exception as exc:
            raise err(errors.BAD_REQUEST, f"request body is not JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise err(errors.BAD_REQUEST, "request body must be a JSON object")
        return parsed

    def _agent_from(request: Request, body_agent) -> str:
        auth = request.headers.get("authorization")
        if auth is not None:
            scheme, _, token = auth.partition(" ")
            if scheme.lower() != "bearer" or not token.strip():
                raise err(errors.AUTH_FAILED, "authorization must be 'Bearer <token>'")
            mapped = token_map.get(token.strip())
            if mapped is None:
                raise err(errors.AUTH_FAILED, "unknown bearer token")
            mapped_uuid = descriptions.resolve_agent(store, mapped)
            if body_agent is not None:
                if descriptions.resolve_agent(store, body_agent) != mapped_uuid:
                    raise err(errors.AUTH_FAILED,
                              "request agent does not match the bearer token")
            return mapped_uuid
        if body_agent is None:
            raise err(errors.BAD_REQUEST, "request must name an agent")
        return body_agent

    def _expected_seq(request: Request) -> int:
        raw = request.headers.get("x-expected-seq")
        if raw is None:
            raise err(errors.BAD_REQUEST, "X-Expected-Seq header is required")
        try:
            return int(raw)
        except ValueError:
            raise err(errors.BAD_REQUEST, f"bad X-Expected-Seq value {raw!r}") from None

    def _version_param(raw: str):
        if raw == "latest":
            return "latest"
        try:
            return int(raw)
        except ValueError:
            raise err(errors.UNKNOWN_VERSION, f"bad version {raw!r}") from None

    # -- items -----------------------------------------------------------------

    @app.get("/items")
    def list_items(type: str | None = None):
        return _canonical_response([r.to_doc() for r in store.items(type)])

    @app.get("/items/{uuid}")
    def get_item(uuid: str):
        return _canonical_response(store.state_doc(store.resolve_item(uuid).uuid))

    @app.get("/items/{uuid}/history")
    def get_history(uuid: str, request: Request):
        ref = store.resolve_item(uuid)
        params = request.query_params
        from_seq = int(params["from"]) if "from" in params else 0
        to_seq = int(params["to"]) if "to" in params else None
        records = store.history(ref.uuid, from_seq, to_seq)
        return _canonical_response([r.to_doc() for r in records])

    @app.get("/items/{uuid}/at/{seq}")
    def get_at(uuid: str, seq: int):
        return _canonical_response(kernel.reconstruct_at(uuid, seq).to_doc())

    @app.post("/items/{uuid}/execute")
    async def post_execute(uuid: str, request: Request):
        body = await _body(request)
        agent = _agent_from(request, body.get("agent"))
        record = kernel.execute(
            agent, uuid, body.get("vertex"), body.get("transition"),
            body.get("outcome"), expected_seq=_expected_seq(request))
        return _canonical_response(record.to_doc())

    @app.post("/items/{uuid}/workflow/edit")
    async def post_edit(uuid: str, request: Request):
        body = await _body(request)
        agent = _agent_from(request, body.get("agent"))
        record = kernel.apply_live_edit(
            uuid, body.get("document"), agent, expected_seq=_expected_seq(request))
        return _canonical_response(record.to_doc())

    # -- agents ------------------------------------------------------------------

    @app.get("/agents/{uuid}/jobs")
    def get_jobs(uuid: str):
        return _canonical_response([j.to_doc() for j in kernel.jobs_for(uuid)])

    # -- descriptions --------------------------------------------------------------

    @app.get("/descriptions")
    def get_catalog(kind: str | None = None, name: str | None = None):
        return _canonical_response(kernel.catalog(kind, name))

    @app.get("/descriptions/{kind}/{name}/{version}")
    def get_description(kind: str, name: str, version: str):
        return _canonical_response(kernel.resolve(kind, name, _version_param(version)))

    @app.get("/descriptions/{kind}/{name}")
    def get_versions(kind: str, name: str):
        return _canonical_response(kernel.list_versions(kind, name))

    @app.post("/descriptions")
    async def post_description(request: Request):
        body = await _body(request)
        agent = _agent_from(request, body.get("agent"))
        document = body.get("document")
        if not isinstance(document, dict) or not isinstance(document.get("name"), str):
            raise err(errors.BAD_REQUEST, "document with a name is required")
        ref = kernel.publish(body.get("kind"), document["name"], document, agent)
        return _canonical_response(ref.to_doc())

    @app.post("/instantiate")
    async def post_instantiate(request: Request):
        body = await _body(request)
        agent = _agent_from(request, body.get("agent"))
        desc = body.get("item_description")
        if not isinstance(desc, dict) or "name" not in desc:
            raise err(errors.BAD_REQUEST, "item_description {name, version} is required")
        version = desc.get("version", "latest")
        if not (version == "latest" or isinstance(version, int)):
            raise err(errors.UNKNOWN_VERSION, f"bad version {version!r}")
        ref = kernel.instantiate(desc["name"], version, body.get("item_name"), agent)
        return _canonical_response(ref.to_doc())

    # -- interop --------------------------------------------------------------------

    @app.get("/interop/bundle")
    def get_bundle(kind: str, name: str, version: str = "latest"):
        return _canonical_response(
            kernel.export_bundle(kind, name, _version_param(version)))

    @app.post("/interop/bundle")
    async def post_bundle(request: Request, policy: str = "reject_on_conflict",
                          agent: str | None = None):
        body = await _body(request)
        acting = _agent_from(request, agent)
        return _canonical_response(kernel.import_bundle(body, policy, acting))

    if console_dir is not None and Path(console_dir).is_dir():
        app.mount("/console", StaticFiles(directory=console_dir, html=True),
                  name="console")

    return app


def load_tokens(store_dir: str | Path) -> dict:
    """Read the static token -> agent map (the authentication stub)."""
    path = Path(store_dir) / "tokens.json"
    if not path.exists():
        return {}
    try:
        parsed = json.loads(path.read_text())
    except ValueError as exc:
        raise err(errors.BAD_REQUEST, f"tokens.json is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise err(errors.BAD_REQUEST, "tokens.json must map token -> agent")
    return parsed
