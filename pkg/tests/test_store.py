import random
import threading

import pytest

from ddk import store as store_mod
from ddk.canonical import GENESIS_HASH, canonical_bytes, from_canonical
from ddk.errors import KernelError
from ddk.store import EventRecord, Store, replay


@pytest.fixture
def mem():
    s = Store(None)
    s.create_item("admin", "agent", {"role:admin": True})
    return s


def admin_of(s):
    return s.find_by_name("admin", "agent").uuid


class TestCreateItem:
    def test_created_event_at_seq_zero(self, mem):
        ref = mem.create_item("po-001", "instance", {"status": "new"}, admin_of(mem))
        records = mem.history(ref.uuid)
        assert len(records) == 1
        assert records[0].kind == "Created"
        assert records[0].seq == 0
        assert records[0].prev_hash == GENESIS_HASH
        assert mem.get_state(ref.uuid).properties["status"]["value"] == "new"

    def test_empty_name_rejected(self, mem):
        with pytest.raises(KernelError) as exc:
            mem.create_item("", "instance", {}, admin_of(mem))
        assert exc.value.code == "empty-name"

    def test_hundred_distinct_uuids(self, mem):
        uuids = {mem.create_item(f"i{i}", "instance", {}, admin_of(mem)).uuid
                 for i in range(100)}
        assert len(uuids) == 100

    def test_unknown_agent_rejected(self, mem):
        with pytest.raises(KernelError) as exc:
            mem.create_item("x", "instance", {}, "nope")
        assert exc.value.code == "unknown-agent"

    def test_item_type_immutable_by_construction(self, mem):
        ref = mem.create_item("x", "instance", {}, admin_of(mem))
        assert mem.get_state(ref.uuid).item_type == "instance"
        # no operation exists that changes item_type; Created is append-only
        with pytest.raises(KernelError):
            mem.append_event(ref.uuid, "Created", {"name": "y", "item_type": "agent"},
                             admin_of(mem))


class TestAppendEvent:
    def test_seq_and_prev_hash_chain(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        r1 = mem.append_event(ref.uuid, "PropertySet",
                              {"name": "p", "value": 1, "mutable": True}, a, 1)
        r0 = mem.history(ref.uuid)[0]
        assert r1.seq == 1
        assert r1.prev_hash == r0.digest()

    def test_seq_conflict_leaves_log_unchanged(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        with pytest.raises(KernelError) as exc:
            mem.append_event(ref.uuid, "PropertySet",
                             {"name": "p", "value": 1, "mutable": True}, a, 7)
        assert exc.value.code == "seq-conflict"
        assert mem.head(ref.uuid) == 0

    def test_unknown_item(self, mem):
        with pytest.raises(KernelError) as exc:
            mem.append_event("missing", "PropertySet", {}, admin_of(mem), 1)
        assert exc.value.code == "unknown-item"

    def test_racing_appends_have_exactly_one_winner(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        for round_no in range(1000):
            expected = mem.head(ref.uuid) + 1
            results = []
            barrier = threading.Barrier(2)

            def contender(tag):
                barrier.wait()
                try:
                    mem.append_event(ref.uuid, "PropertySet",
                                     {"name": "p", "value": tag, "mutable": True},
                                     a, expected)
                    results.append(("win", tag))
                except KernelError as exc:
                    results.append((exc.code, tag))

            threads = [threading.Thread(target=contender, args=(f"t{i}",)) for i in range(2)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            outcomes = sorted(r[0] for r in results)
            assert outcomes == ["seq-conflict", "win"], f"round {round_no}: {results}"
            assert mem.head(ref.uuid) == expected


class TestProperties:
    def test_set_and_read_back(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {"status": "new"}, a)
        mem.set_property(ref.uuid, "status", "done", a)
        assert mem.get_state(ref.uuid).properties["status"]["value"] == "done"

    def test_immutable_property_rejected_without_event(self, mem):
        a = admin_of(mem)
        ref = mem.create_item(
            "x", "instance", {"Type": {"value": "PO", "mutable": False}}, a)
        with pytest.raises(KernelError) as exc:
            mem.set_property(ref.uuid, "Type", "other", a)
        assert exc.value.code == "immutable-property"
        assert mem.head(ref.uuid) == 0
        assert mem.get_state(ref.uuid).properties["Type"]["value"] == "PO"

    def test_random_interleavings_match_replay(self, mem):
        a = admin_of(mem)
        rng = random.Random(42)
        ref = mem.create_item("x", "instance", {}, a)
        names = ["alpha", "beta", "gamma"]
        for _ in range(50):
            mem.set_property(ref.uuid, rng.choice(names),
                             rng.choice([1, "x", True, 2.5]), a)
        replayed = replay(mem.records(ref.uuid))
        assert replayed.to_doc() == mem.state_doc(ref.uuid)


SCHEMA_DOC = {
    "kind": "schema", "name": "F",
    "fields": [{"name": "qty", "type": "integer", "required": True, "min": 1}],
    "groups": [],
}


@pytest.fixture
def with_schema(mem):
    mem.schema_resolver = lambda name, version: (SCHEMA_DOC, 0) if name == "F" else None
    return mem


class TestOutcomes:
    def test_versions_count_up_and_last_view_follows(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        s.record_outcome(ref.uuid, ("F", 0), {"qty": 1}, a)
        state = s.get_state(ref.uuid)
        assert state.outcomes["F"][0]["document"] == {"qty": 1}
        assert state.views["F"]["last"] == 0
        s.record_outcome(ref.uuid, ("F", 0), {"qty": 2}, a)
        state = s.get_state(ref.uuid)
        assert sorted(state.outcomes["F"]) == [0, 1]
        assert state.views["F"]["last"] == 1

    def test_invalid_document_appends_nothing(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        with pytest.raises(KernelError) as exc:
            s.record_outcome(ref.uuid, ("F", 0), {"qty": "three"}, a)
        assert exc.value.code == "validation-failure"
        assert exc.value.details[0]["path"] == "qty"
        assert s.head(ref.uuid) == 0

    def test_unknown_schema(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        with pytest.raises(KernelError) as exc:
            s.record_outcome(ref.uuid, ("Nope", 0), {"qty": 1}, a)
        assert exc.value.code == "unknown-schema"


class TestViews:
    def test_set_view_resolves(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        s.record_outcome(ref.uuid, ("F", 0), {"qty": 1}, a)
        s.set_view(ref.uuid, "approved", "F", 0, a)
        assert s.get_state(ref.uuid).views["F"]["approved"] == 0

    def test_reserved_name(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        s.record_outcome(ref.uuid, ("F", 0), {"qty": 1}, a)
        with pytest.raises(KernelError) as exc:
            s.set_view(ref.uuid, "last", "F", 0, a)
        assert exc.value.code == "reserved-name"

    def test_dangling_target(self, with_schema):
        s = with_schema
        a = admin_of(s)
        ref = s.create_item("x", "instance", {}, a)
        s.record_outcome(ref.uuid, ("F", 0), {"qty": 1}, a)
        with pytest.raises(KernelError) as exc:
            s.set_view(ref.uuid, "approved", "F", 9, a)
        assert exc.value.code == "dangling-target"


class TestCollections:
    def test_add_remove(self, mem):
        a = admin_of(mem)
        box = mem.create_item("box", "instance", {}, a)
        part = mem.create_item("part", "instance", {}, a)
        mem.change_collection(box.uuid, "parts", "add", part.uuid, a)
        assert mem.get_state(box.uuid).collections["parts"] == [
            {"member": part.uuid, "slots": {}}]
        mem.change_collection(box.uuid, "parts", "remove", part.uuid, a)
        assert "parts" not in mem.get_state(box.uuid).collections

    def test_add_unknown_member(self, mem):
        a = admin_of(mem)
        box = mem.create_item("box", "instance", {}, a)
        with pytest.raises(KernelError) as exc:
            mem.change_collection(box.uuid, "parts", "add", "ghost", a)
        assert exc.value.code == "unknown-item"

    def test_remove_absent_member(self, mem):
        a = admin_of(mem)
        box = mem.create_item("box", "instance", {}, a)
        part = mem.create_item("part", "instance", {}, a)
        with pytest.raises(KernelError) as exc:
            mem.change_collection(box.uuid, "parts", "remove", part.uuid, a)
        assert exc.value.code == "unknown-member"

    def test_random_edit_sequence_matches_replay(self, mem):
        a = admin_of(mem)
        rng = random.Random(7)
        box = mem.create_item("box", "instance", {}, a)
        members = [mem.create_item(f"m{i}", "instance", {}, a).uuid for i in range(5)]
        for _ in range(200):
            current = [m["member"] for m in
                       mem.get_state(box.uuid).collections.get("c", [])]
            action = rng.choice(["add", "remove", "reorder"])
            try:
                if action == "add":
                    mem.change_collection(box.uuid, "c", "add", rng.choice(members), a,
                                          slots={"n": rng.randint(0, 9)})
                elif action == "remove" and current:
                    mem.change_collection(box.uuid, "c", "remove", rng.choice(current), a)
                elif action == "reorder" and current:
                    mem.change_collection(box.uuid, "c", "reorder", rng.choice(current), a,
                                          position=rng.randrange(len(current)))
            except KernelError as exc:
                assert exc.value.code == "unknown-member"
        replayed = replay(mem.records(box.uuid))
        assert replayed.to_doc() == mem.state_doc(box.uuid)


class TestReplay:
    def test_created_only(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {"p": 1}, a)
        state = replay(mem.records(ref.uuid))
        assert state.properties == {"p": {"value": 1, "mutable": True}}
        assert state.head == 0

    def test_tampered_payload_breaks_chain(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        mem.set_property(ref.uuid, "p", 1, a)
        mem.set_property(ref.uuid, "p", 2, a)
        records = mem.records(ref.uuid)
        bad = records[1].to_doc()
        bad["payload"]["value"] = 999
        records[1] = EventRecord.from_doc(bad)
        with pytest.raises(KernelError) as exc:
            replay(records)
        assert exc.value.code == "hash-chain-broken"

    def test_gap_in_sequence(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        mem.set_property(ref.uuid, "p", 1, a)
        mem.set_property(ref.uuid, "p", 2, a)
        records = mem.records(ref.uuid)
        with pytest.raises(KernelError) as exc:
            replay([records[0], records[2]])
        assert exc.value.code == "gap-in-sequence"

    def test_randomized_session_replays_exactly(self, mem):
        a = admin_of(mem)
        mem.schema_resolver = lambda name, version: (SCHEMA_DOC, 0) if name == "F" else None
        rng = random.Random(99)
        refs = [mem.create_item(f"i{i}", "instance", {"n": i}, a) for i in range(5)]
        for _ in range(300):
            ref = rng.choice(refs)
            op = rng.random()
            try:
                if op < 0.4:
                    mem.set_property(ref.uuid, rng.choice("abc"), rng.randint(0, 9), a)
                elif op < 0.6:
                    mem.record_outcome(ref.uuid, ("F", 0), {"qty": rng.randint(1, 5)}, a)
                elif op < 0.8:
                    mem.change_collection(ref.uuid, "c", "add", rng.choice(refs).uuid, a)
                else:
                    state = mem.get_state(ref.uuid)
                    if state.outcomes.get("F"):
                        mem.set_view(ref.uuid, f"v{rng.randint(0, 3)}", "F",
                                     rng.choice(sorted(state.outcomes["F"])), a)
            except KernelError:
                pass
        for ref in refs:
            assert replay(mem.records(ref.uuid)).to_doc() == mem.state_doc(ref.uuid)


class TestHistory:
    def test_full_and_single(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        for i in range(4):
            mem.set_property(ref.uuid, "p", i, a)
        assert [r.seq for r in mem.history(ref.uuid, 0, 4)] == [0, 1, 2, 3, 4]
        only = mem.history(ref.uuid, 2, 2)
        assert len(only) == 1 and only[0].seq == 2

    def test_concatenation_property(self, mem):
        a = admin_of(mem)
        rng = random.Random(3)
        ref = mem.create_item("x", "instance", {}, a)
        for i in range(9):
            mem.set_property(ref.uuid, "p", i, a)
        head = mem.head(ref.uuid)
        for _ in range(10):
            k = rng.randint(0, head - 1)
            joined = mem.history(ref.uuid, 0, k) + mem.history(ref.uuid, k + 1, head)
            assert [r.to_doc() for r in joined] == [r.to_doc() for r in mem.history(ref.uuid)]

    def test_range_out_of_bounds(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        for bad in [(0, 5), (3, 3), (-1, 0)]:
            with pytest.raises(KernelError) as exc:
                mem.history(ref.uuid, *bad)
            assert exc.value.code == "range-out-of-bounds"

    def test_reread_gives_identical_bytes(self, mem):
        a = admin_of(mem)
        ref = mem.create_item("x", "instance", {}, a)
        mem.set_property(ref.uuid, "p", 1, a)
        first = [r.canonical() for r in mem.history(ref.uuid)]
        mem.set_property(ref.uuid, "p", 2, a)
        again = [r.canonical() for r in mem.history(ref.uuid)]
        assert again[:2] == first


class TestPersistence:
    def test_reopen_reproduces_state(self, tmp_path):
        s = Store.initialize(tmp_path / "st")
        a = s.create_item("admin", "agent", {"role:admin": True}).uuid
        ref = s.create_item("x", "instance", {"p": 1}, a)
        s.set_property(ref.uuid, "p", 2, a)
        docs = {r.uuid: s.state_doc(r.uuid) for r in s.items()}
        s2 = Store(tmp_path / "st")
        assert {r.uuid: s2.state_doc(r.uuid) for r in s2.items()} == docs

    def test_snapshot_used_and_disposable(self, tmp_path):
        s = Store.initialize(tmp_path / "st")
        a = s.create_item("admin", "agent", {"role:admin": True}).uuid
        ref = s.create_item("x", "instance", {"p": 1}, a)
        for i in range(5):
            s.set_property(ref.uuid, "p", i, a)
        snap_path = s.save_snapshot(ref.uuid)
        assert snap_path.exists()
        doc = s.state_doc(ref.uuid)
        s.set_property(ref.uuid, "p", 99, a)  # snapshot now stale
        final = s.state_doc(ref.uuid)
        assert Store(tmp_path / "st").state_doc(ref.uuid) == final
        snap_path.unlink()  # snapshots are a cache: deletable at any time
        assert Store(tmp_path / "st").state_doc(ref.uuid) == final
        assert doc["head"] == 5

    def test_disk_byte_flip_detected(self, tmp_path):
        s = Store.initialize(tmp_path / "st")
        a = s.create_item("admin", "agent", {"role:admin": True}).uuid
        ref = s.create_item("x", "instance", {"p": 1}, a)
        for i in range(5):
            s.set_property(ref.uuid, "p", i, a)
        log = tmp_path / "st" / "items" / f"{ref.uuid}.log"
        raw = bytearray(log.read_bytes())
        rng = random.Random(11)
        pos = rng.randrange(len(raw))
        raw[pos] ^= 0x01
        log.write_bytes(bytes(raw))
        with pytest.raises(KernelError) as exc:
            s.replay_item(ref.uuid)
        assert exc.value.code in ("hash-chain-broken", "gap-in-sequence")

    def test_truncated_log_detected_via_head_file(self, tmp_path):
        s = Store.initialize(tmp_path / "st")
        a = s.create_item("admin", "agent", {"role:admin": True}).uuid
        ref = s.create_item("x", "instance", {}, a)
        for i in range(3):
            s.set_property(ref.uuid, "p", i, a)
        log = tmp_path / "st" / "items" / f"{ref.uuid}.log"
        lines = log.read_bytes().splitlines(keepends=True)
        log.write_bytes(b"".join(lines[:-1]))
        with pytest.raises(KernelError) as exc:
            s.replay_item(ref.uuid)
        assert exc.value.code == "hash-chain-broken"

    def test_log_lines_are_canonical_json_with_exact_fields(self, tmp_path):
        s = Store.initialize(tmp_path / "st")
        a = s.create_item("admin", "agent", {"role:admin": True}).uuid
        log = tmp_path / "st" / "items" / f"{a}.log"
        for line in log.read_bytes().splitlines():
            doc = from_canonical(line)
            assert list(doc) == ["agent", "item", "kind", "payload", "prev_hash", "seq", "ts"]
            assert canonical_bytes(doc) == line
            assert doc["prev_hash"] == doc["prev_hash"].lower()
