"""ddk: an event-sourced, description-driven workflow kernel.

Definitions (schemas, activities, workflows, item descriptions) are
versioned items stored with the same internal model as their instances.
Running workflow instances can be edited live; every state change is an
immutable, hash-chained event; state is always reproducible by replay.
"""

from .descriptions import DescriptionRef, bootstrap, publish_description, resolve
from .engine import Job, apply_live_edit, execute, jobs_for
from .errors import KernelError
from .kernel import Kernel, StoreLock
from .store import EventRecord, ItemRef, ItemState, Store, replay

__version__ = "0.1.0"

__all__ = [
    "DescriptionRef",
    "EventRecord",
    "ItemRef",
    "ItemState",
    "Job",
    "Kernel",
    "KernelError",
    "Store",
    "StoreLock",
    "apply_live_edit",
    "bootstrap",
    "execute",
    "jobs_for",
    "publish_description",
    "replay",
    "resolve",
]
