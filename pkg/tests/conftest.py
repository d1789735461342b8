from __future__ import annotations

import pytest

from ddk.kernel import Kernel


@pytest.fixture
def kernel():
    """In-memory kernel with the meta layer bootstrapped."""
    k = Kernel.in_memory()
    k.bootstrap()
    return k


@pytest.fixture
def admin(kernel):
    return kernel.store.find_by_name("admin", "agent").uuid


def make_agent(kernel, name, roles):
    props = {f"role:{r}": {"value": True, "mutable": True} for r in roles}
    admin_uuid = kernel.store.find_by_name("admin", "agent").uuid
    return kernel.store.create_item(name, "agent", props, admin_uuid)


def po_form_schema():
    return {
        "kind": "schema",
        "name": "POForm",
        "fields": [
            {"name": "total", "type": "number", "required": True, "min": 0},
            {"name": "description", "type": "string", "required": False},
            {"name": "urgent", "type": "boolean", "required": False},
        ],
        "groups": [],
    }


def approval_schema():
    return {
        "kind": "schema",
        "name": "ApprovalForm",
        "fields": [
            {"name": "decision", "type": "string", "required": True,
             "enum_values": ["approved", "rejected"]},
            {"name": "comment", "type": "string", "required": False},
        ],
        "groups": [],
    }


def po_workflow_doc(name="POFlow"):
    return {
        "kind": "workflow",
        "name": name,
        "vertices": [
            {"id": "start", "vtype": "start"},
            {"id": "prepare", "vtype": "activity",
             "activity": {"name": "Prepare", "version": 0}},
            {"id": "approve", "vtype": "activity",
             "activity": {"name": "Approve", "version": 0}},
            {"id": "dispatch", "vtype": "activity",
             "activity": {"name": "Dispatch", "version": 0}},
            {"id": "end", "vtype": "end"},
        ],
        "edges": [
            {"from": "start", "to": "prepare"},
            {"from": "prepare", "to": "approve"},
            {"from": "approve", "to": "dispatch"},
            {"from": "dispatch", "to": "end"},
        ],
    }


def publish_po_pack(kernel, admin_uuid):
    """Publish the purchase-order description set; returns name -> ref."""
    refs = {}
    refs["POForm"] = kernel.publish("schema", "POForm", po_form_schema(), admin_uuid)
    refs["ApprovalForm"] = kernel.publish("schema", "ApprovalForm", approval_schema(), admin_uuid)
    refs["Prepare"] = kernel.publish("activity", "Prepare", {
        "kind": "activity", "name": "Prepare", "role": "buyer",
        "schema": {"name": "POForm", "version": 0},
        "on_complete": [
            {"set": "status", "expr": "'prepared'"},
            {"set": "total", "expr": "outcome.POForm.total"},
        ],
    }, admin_uuid)
    refs["Approve"] = kernel.publish("activity", "Approve", {
        "kind": "activity", "name": "Approve", "role": "manager",
        "schema": {"name": "ApprovalForm", "version": 0},
        "on_complete": [{"set": "status", "expr": "outcome.ApprovalForm.decision"}],
    }, admin_uuid)
    refs["Dispatch"] = kernel.publish("activity", "Dispatch", {
        "kind": "activity", "name": "Dispatch", "role": "clerk",
        "on_complete": [{"set": "status", "expr": "'dispatched'"}],
    }, admin_uuid)
    refs["POFlow"] = kernel.publish("workflow", "POFlow", po_workflow_doc(), admin_uuid)
    refs["PurchaseOrder"] = kernel.publish("item", "PurchaseOrder", {
        "kind": "item", "name": "PurchaseOrder",
        "workflow": {"name": "POFlow", "version": 0},
        "properties": [
            {"name": "status", "default": "new", "mutable": True},
            {"name": "priority", "default": 1, "mutable": True},
        ],
    }, admin_uuid)
    return refs


@pytest.fixture
def po_pack(kernel, admin):
    return publish_po_pack(kernel, admin)


@pytest.fixture
def crew(kernel):
    """buyer / manager / clerk agents."""
    return {
        "buyer": make_agent(kernel, "buyer1", ["buyer"]).uuid,
        "manager": make_agent(kernel, "mgr1", ["manager"]).uuid,
        "clerk": make_agent(kernel, "clerk1", ["clerk"]).uuid,
    }
