"""Shared-object implementations and the preamble-iterating transformation."""

from __future__ import annotations

from .abd import ABDRegister, max_reply, quorum, ts_less
from .atomic import AtomicRegister
from .audit import AuditReport, audit_effect_free, audit_execution, driver_programs
from .base import (
    CALL_LABEL,
    OK,
    PICK_LABEL,
    Frame,
    NonPositiveK,
    ObjectImpl,
    UnknownMethod,
    WrongWriter,
    transform_k,
)
from .registers import ILRegister, VARegister
from .snapshot import Snapshot
from .specs import RegisterSpec, SnapshotSpec, spec_for

KINDS = ("atomic", "abd", "abd-k", "snapshot", "va", "il")


def make_impl(kind: str, k: int = 1, **options) -> ObjectImpl:
    """Unbound implementation for an object-kind name from the CLI vocabulary."""
    if kind == "atomic":
        return AtomicRegister()
    if kind == "abd":
        return ABDRegister()
    if kind == "abd-k":
        return transform_k(ABDRegister(), k)
    if kind == "snapshot":
        impl = Snapshot(extended_update=options.get("extended_update", False))
    elif kind == "va":
        impl = VARegister()
    elif kind == "il":
        impl = ILRegister(writer=options.get("writer", 0))
    else:
        raise ValueError(f"unknown object kind {kind!r}; expected one of {', '.join(KINDS)}")
    return transform_k(impl, k) if options.get("iterate") else impl


__all__ = [
    "ABDRegister", "AtomicRegister", "AuditReport", "audit_effect_free", "audit_execution", "driver_programs", "CALL_LABEL", "Frame", "ILRegister", "KINDS", "NonPositiveK",
    "OK", "ObjectImpl", "PICK_LABEL", "RegisterSpec", "Snapshot", "SnapshotSpec", "UnknownMethod",
    "VARegister", "WrongWriter", "make_impl", "max_reply", "quorum", "spec_for", "transform_k",
    "ts_less",
]
