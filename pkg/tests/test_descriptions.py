import pytest

from ddk import descriptions, schema
from ddk.canonical import canonical_bytes, from_canonical
from ddk.errors import KernelError
from ddk.kernel import Kernel
from ddk.store import Store

from .conftest import make_agent, po_form_schema, po_workflow_doc, publish_po_pack


class TestBootstrap:
    def test_empty_store_gets_meta_layer(self):
        k = Kernel.in_memory()
        report = k.bootstrap()
        assert report.created
        descs = k.store.items("description")
        assert sorted(r.name for r in descs) == [
            "schema:activity", "schema:item", "schema:schema", "schema:workflow"]
        for kind in descriptions.KINDS:
            doc = k.resolve("schema", kind, 0)
            assert doc == descriptions.meta_schema_doc(kind)

    def test_rerun_appends_zero_events(self, kernel):
        heads = {r.uuid: kernel.store.head(r.uuid) for r in kernel.store.items()}
        report = kernel.bootstrap()
        assert not report.created
        assert {r.uuid: kernel.store.head(r.uuid)
                for r in kernel.store.items()} == heads

    def test_meta_schemas_self_validate(self, kernel):
        meta_for_schemas = kernel.resolve("schema", "schema", "latest")
        parsed = schema.parse_schema(meta_for_schemas)
        for kind in descriptions.KINDS:
            item = kernel.store.find_by_name(f"schema:{kind}", "description")
            envelope = kernel.store.get_state(item.uuid).outcomes["schema"][0]["document"]
            assert schema.validate(parsed, envelope).valid

    def test_conflicting_store_is_a_mismatch(self, kernel, admin):
        # republish a meta name at v1, then damage v0 detection by rebuilding
        k2 = Kernel.in_memory()
        k2.store.create_item("admin", "agent", {"role:admin": True})
        with pytest.raises(KernelError) as exc:
            k2.bootstrap()
        assert exc.value.code == "non-empty-store-mismatch"


class TestPublishResolve:
    def test_two_versions_both_retrievable(self, kernel, admin):
        doc0 = po_form_schema()
        ref0 = kernel.publish("schema", "POForm", doc0, admin)
        doc1 = po_form_schema()
        doc1["fields"].append({"name": "note", "type": "string", "required": False})
        ref1 = kernel.publish("schema", "POForm", doc1, admin)
        assert (ref0.version, ref1.version) == (0, 1)
        assert kernel.resolve("schema", "POForm", 0) == doc0
        assert kernel.resolve("schema", "POForm", 1) == doc1

    def test_latest_pins_at_call_time(self, kernel, admin):
        doc0 = po_form_schema()
        kernel.publish("schema", "POForm", doc0, admin)
        assert kernel.resolve("schema", "POForm", "latest") == doc0
        doc1 = po_form_schema()
        doc1["name"] = "POForm"
        doc1["fields"] = doc1["fields"][:1]
        kernel.publish("schema", "POForm", doc1, admin)
        assert kernel.resolve("schema", "POForm", 0) == doc0
        assert kernel.resolve("schema", "POForm", "latest") == doc1

    def test_dangling_reference(self, kernel, admin):
        wf = po_workflow_doc()
        with pytest.raises(KernelError) as exc:
            kernel.publish("workflow", "POFlow", wf, admin)
        assert exc.value.code == "dangling-reference"

    def test_role_denied(self, kernel):
        peon = make_agent(kernel, "peon", ["clerk"])
        with pytest.raises(KernelError) as exc:
            kernel.publish("schema", "POForm", po_form_schema(), peon.uuid)
        assert exc.value.code == "role-denied"

    def test_validation_failure_lists_problems(self, kernel, admin):
        bad = {"kind": "schema", "name": "Broken", "fields": [
            {"name": "a", "type": "integer", "min": 9, "max": 1}], "groups": []}
        with pytest.raises(KernelError) as exc:
            kernel.publish("schema", "Broken", bad, admin)
        assert exc.value.code == "validation-failure"
        assert any(p["code"] == "bad-bound" for p in exc.value.details)

    def test_random_publishes_round_trip_byte_identically(self, kernel, admin):
        import random
        rng = random.Random(123)
        published = []
        for i in range(10):
            doc = {
                "kind": "schema", "name": "R",
                "fields": [{"name": f"f{j}", "type": rng.choice(
                    ["string", "integer", "number", "boolean"]),
                    "required": rng.random() < 0.5} for j in range(rng.randint(1, 4))],
                "groups": [],
            }
            ref = kernel.publish("schema", "R", doc, admin)
            published.append((ref.version, canonical_bytes(doc)))
        for version, raw in published:
            assert canonical_bytes(kernel.resolve("schema", "R", version)) == raw


class TestListVersions:
    def test_versions_with_publishers(self, kernel, admin):
        for _ in range(3):
            kernel.publish("schema", "POForm", po_form_schema(), admin)
        entries = kernel.list_versions("schema", "POForm")
        assert [e["version"] for e in entries] == [0, 1, 2]
        assert all(e["publisher"] == admin for e in entries)

    def test_unknown_description(self, kernel):
        with pytest.raises(KernelError) as exc:
            kernel.list_versions("schema", "Ghost")
        assert exc.value.code == "unknown-description"

    def test_versions_match_log_replay(self, kernel, admin):
        for _ in range(3):
            kernel.publish("schema", "POForm", po_form_schema(), admin)
        item = kernel.store.find_by_name("schema:POForm", "description")
        from ddk.store import replay
        state = replay(kernel.store.records(item.uuid))
        assert sorted(state.outcomes["schema"]) == [
            e["version"] for e in kernel.list_versions("schema", "POForm")]


class TestInstantiate:
    def test_pinning_survives_later_publishes(self, kernel, admin, po_pack):
        i1 = kernel.instantiate("PurchaseOrder", 0, "po-001", admin)
        i2 = kernel.instantiate("PurchaseOrder", 0, "po-002", admin)
        # publish v1 with a different workflow name reference
        kernel.publish("workflow", "POFlow2", po_workflow_doc("POFlow2"), admin)
        item_doc = kernel.resolve("item", "PurchaseOrder", 0)
        item_doc["workflow"] = {"name": "POFlow2", "version": 0}
        kernel.publish("item", "PurchaseOrder", item_doc, admin)
        for ref in (i1, i2):
            wf = kernel.store.get_state(ref.uuid).workflow
            assert wf.pins["item_description"] == {"name": "PurchaseOrder", "version": 0}
            assert wf.pins["workflow"] == {"name": "POFlow", "version": 0}

    def test_latest_frozen_in_created_payload(self, kernel, admin, po_pack):
        item_doc = kernel.resolve("item", "PurchaseOrder", 0)
        kernel.publish("item", "PurchaseOrder", item_doc, admin)  # v1
        ref = kernel.instantiate("PurchaseOrder", "latest", "po-003", admin)
        created = kernel.store.history(ref.uuid)[0]
        assert created.payload["workflow"]["pins"]["item_description"]["version"] == 1

    def test_three_activity_sequence_waits_on_first(self, kernel, admin, po_pack):
        ref = kernel.instantiate("PurchaseOrder", 0, "po-004", admin)
        wf = kernel.store.get_state(ref.uuid).workflow
        assert wf.tokens == {"prepare": 1}
        assert wf.vertex_state("prepare") == "WAITING"
        assert not wf.finished

    def test_properties_from_description(self, kernel, admin, po_pack):
        ref = kernel.instantiate("PurchaseOrder", 0, "po-005", admin)
        props = kernel.store.get_state(ref.uuid).properties
        assert props["status"] == {"value": "new", "mutable": True}
        assert props["Type"] == {"value": "PurchaseOrder", "mutable": False}

    def test_role_denied(self, kernel, po_pack):
        peon = make_agent(kernel, "peon", ["clerk"])
        with pytest.raises(KernelError) as exc:
            kernel.instantiate("PurchaseOrder", 0, "po-x", peon.uuid)
        assert exc.value.code == "role-denied"

    def test_unknown_description(self, kernel, admin):
        with pytest.raises(KernelError) as exc:
            kernel.instantiate("Ghost", 0, "po-x", admin)
        assert exc.value.code == "unknown-description"


class _PublicStoreProxy:
    """Exposes only the documented public surface of Store; any private
    access is an AttributeError."""

    _PUBLIC = (
        "create_item", "append_event", "set_property", "record_outcome",
        "set_view", "change_collection", "history", "records", "get_state",
        "state_doc", "head", "items", "find_by_name", "resolve_item",
        "schema_resolver", "replay_item", "verify_item", "save_snapshot",
    )

    def __init__(self, store):
        object.__setattr__(self, "_store", store)

    def __getattr__(self, name):
        if name not in self._PUBLIC:
            raise AttributeError(f"private access to Store.{name}")
        return getattr(self._store, name)

    def __setattr__(self, name, value):
        if name != "schema_resolver":
            raise AttributeError(f"private write to Store.{name}")
        setattr(self._store, name, value)


def test_descriptions_use_only_public_store_operations():
    """Same-internal-model, by construction: the whole description layer runs
    against a proxy that refuses any non-public store access."""
    proxy = _PublicStoreProxy(Store(None))
    report = descriptions.bootstrap(proxy)
    admin = report.admin_agent
    refs = publish_po_pack(_KernelShim(proxy), admin)
    assert refs["PurchaseOrder"].version == 0
    descriptions.instantiate(proxy, "PurchaseOrder", "latest", "po-1", admin)
    assert descriptions.resolve(proxy, "workflow", "POFlow", 0)["name"] == "POFlow"
    assert [e["version"] for e in descriptions.list_versions(proxy, "schema", "POForm")] == [0]
    # every description is an ordinary item visible through plain reads
    desc_items = proxy.items("description")
    assert len(desc_items) == 4 + 7  # 4 meta + the PO pack


class _KernelShim:
    def __init__(self, store):
        self.store = store

    def publish(self, kind, name, doc, agent):
        return descriptions.publish_description(self.store, kind, name, doc, agent)


def test_description_count_equals_items_of_type_description(kernel, admin, po_pack):
    catalog = kernel.catalog()
    assert len(catalog) == len(kernel.store.items("description"))
