import random

import pytest

from ddk import provenance
from ddk.canonical import canonical_bytes
from ddk.errors import KernelError
from ddk.store import replay

from .conftest import po_form_schema


@pytest.fixture
def busy_item(kernel, admin):
    ref = kernel.store.create_item("subject", "instance", {"n": 0}, admin)
    for i in range(1, 6):
        kernel.store.set_property(ref.uuid, "n", i, admin)
    kernel.store.change_collection(ref.uuid, "c", "add", ref.uuid, admin)
    return ref


class TestReconstructAt:
    def test_head_equals_live(self, kernel, admin, busy_item):
        head = kernel.store.head(busy_item.uuid)
        state = kernel.reconstruct_at(busy_item.uuid, head)
        assert state.to_doc() == kernel.store.state_doc(busy_item.uuid)

    def test_zero_is_post_created(self, kernel, admin, busy_item):
        state = kernel.reconstruct_at(busy_item.uuid, 0)
        assert state.properties["n"]["value"] == 0
        assert state.head == 0

    def test_out_of_range(self, kernel, admin, busy_item):
        with pytest.raises(KernelError) as exc:
            kernel.reconstruct_at(busy_item.uuid, 99)
        assert exc.value.code == "range-out-of-bounds"

    def test_prefix_suffix_composition(self, kernel, admin, busy_item):
        rng = random.Random(13)
        head = kernel.store.head(busy_item.uuid)
        records = kernel.store.records(busy_item.uuid)
        for _ in range(5):
            k = rng.randint(0, head)
            partial = kernel.reconstruct_at(busy_item.uuid, k)
            # continue the fold over the remaining events
            from ddk.store import apply_event
            for rec in records[k + 1:]:
                apply_event(partial, rec)
            assert partial.to_doc() == kernel.store.state_doc(busy_item.uuid)

    def test_pure_read(self, kernel, admin, busy_item):
        before = [r.canonical() for r in kernel.store.records(busy_item.uuid)]
        for seq in range(kernel.store.head(busy_item.uuid) + 1):
            kernel.reconstruct_at(busy_item.uuid, seq)
        after = [r.canonical() for r in kernel.store.records(busy_item.uuid)]
        assert before == after


class TestTimeline:
    def test_one_entry_per_event(self, kernel, admin, busy_item):
        t = kernel.timeline(busy_item.uuid)
        assert len(t["entries"]) == kernel.store.head(busy_item.uuid) + 1
        assert [e["seq"] for e in t["entries"]] == list(range(len(t["entries"])))

    def test_kind_filter(self, kernel, admin, busy_item):
        t = kernel.timeline(busy_item.uuid, kinds=["PropertySet"])
        assert all(e["kind"] == "PropertySet" for e in t["entries"])
        assert len(t["entries"]) == 5

    def test_kind_partition(self, kernel, admin, busy_item):
        whole = kernel.timeline(busy_item.uuid)["entries"]
        kinds = {e["kind"] for e in whole}
        pieces = []
        for k in kinds:
            pieces.extend(kernel.timeline(busy_item.uuid, kinds=[k])["entries"])
        assert sorted(e["seq"] for e in pieces) == [e["seq"] for e in whole]

    def test_agent_and_range_filters_compose(self, kernel, admin, busy_item):
        t = kernel.timeline(busy_item.uuid, agent=admin, from_seq=2, to_seq=4)
        assert [e["seq"] for e in t["entries"]] == [2, 3, 4]

    def test_export_is_canonical_array(self, kernel, admin, busy_item):
        entries = kernel.timeline(busy_item.uuid)["entries"]
        data = canonical_bytes(entries)
        assert data.startswith(b"[")


class TestDiff:
    def test_identity_diff_is_empty(self, kernel, admin, po_pack):
        d = kernel.diff_descriptions("schema", "POForm", 0, 0)
        assert d["added"] == [] and d["removed"] == [] and d["changed"] == []

    def test_added_vertex_is_one_entry(self, kernel, admin, po_pack):
        from .conftest import po_workflow_doc
        doc = po_workflow_doc()
        doc["vertices"].append({"id": "extra", "vtype": "activity",
                                "activity": {"name": "Dispatch", "version": 0}})
        doc["edges"][-1] = {"from": "dispatch", "to": "extra"}
        doc["edges"].append({"from": "extra", "to": "end"})
        kernel.publish("workflow", "POFlow", doc, admin)
        d = kernel.diff_descriptions("workflow", "POFlow", 0, 1)
        vertex_adds = [e for e in d["added"] if e["path"][0] == "vertices"]
        assert len(vertex_adds) == 1
        assert vertex_adds[0]["path"] == ["vertices", 5]
        assert vertex_adds[0]["value"]["id"] == "extra"

    def test_antisymmetry(self, kernel, admin, po_pack):
        doc = po_form_schema()
        doc["fields"][0]["min"] = 10
        doc["fields"].pop()
        kernel.publish("schema", "POForm", doc, admin)
        fwd = kernel.diff_descriptions("schema", "POForm", 0, 1)
        rev = kernel.diff_descriptions("schema", "POForm", 1, 0)
        assert fwd["added"] == rev["removed"]
        assert fwd["removed"] == rev["added"]
        assert [(c["path"], c["from"], c["to"]) for c in fwd["changed"]] == \
               [(c["path"], c["to"], c["from"]) for c in rev["changed"]]

    def test_unknown_version(self, kernel, admin, po_pack):
        with pytest.raises(KernelError) as exc:
            kernel.diff_descriptions("schema", "POForm", 0, 9)
        assert exc.value.code == "unknown-version"

    def test_patch_round_trip_on_random_documents(self):
        rng = random.Random(2024)

        def rand_doc(depth=0):
            roll = rng.random()
            if depth >= 3 or roll < 0.35:
                return rng.choice([1, 2.5, "x", "y", True, False, None])
            if roll < 0.7:
                return {f"k{i}": rand_doc(depth + 1) for i in range(rng.randint(0, 4))}
            return [rand_doc(depth + 1) for _ in range(rng.randint(0, 4))]

        for _ in range(300):
            a, b = rand_doc(), rand_doc()
            diff = provenance.diff_documents(a, b)
            patched = provenance.apply_diff(a, diff)
            assert canonical_bytes(patched) == canonical_bytes(b), (a, b, diff)
            inverse = {
                "added": diff["removed"],
                "removed": diff["added"],
                "changed": [{"path": c["path"], "from": c["to"], "to": c["from"]}
                            for c in diff["changed"]],
            }
            assert canonical_bytes(provenance.apply_diff(b, inverse)) == canonical_bytes(a)


def test_full_log_replay_equals_live_after_provenance_reads(kernel, admin, busy_item):
    for seq in range(kernel.store.head(busy_item.uuid) + 1):
        kernel.reconstruct_at(busy_item.uuid, seq)
    kernel.timeline(busy_item.uuid)
    assert replay(kernel.store.records(busy_item.uuid)).to_doc() == \
        kernel.store.state_doc(busy_item.uuid)
