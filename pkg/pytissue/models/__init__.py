"""Data models for pytissue.

Uses lazy imports to avoid loading pydantic until models are actually needed.
"""

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .params import CellTypeParams, TissueParams
    from .policy import EvaluationRow, Policy, PolicyStats, Provenance, SyscallStats
    from .records import (
        AntigenValue,
        DatasetGroup,
        DatasetLabel,
        EventKind,
        ReplayEvent,
        ResponseRecord,
        RunTranscript,
        SignalLevel,
        TickReport,
    )
    from .tissue import Cell, CompartmentView, TissueCompartment, new_cell, new_compartment

__all__ = [
    "CellTypeParams",
    "TissueParams",
    "EvaluationRow",
    "Policy",
    "PolicyStats",
    "Provenance",
    "SyscallStats",
    "AntigenValue",
    "DatasetGroup",
    "DatasetLabel",
    "EventKind",
    "ReplayEvent",
    "ResponseRecord",
    "RunTranscript",
    "SignalLevel",
    "TickReport",
    "Cell",
    "CompartmentView",
    "TissueCompartment",
    "new_cell",
    "new_compartment",
]

_MODULES = {
    "params": ("CellTypeParams", "TissueParams"),
    "policy": ("EvaluationRow", "Policy", "PolicyStats", "Provenance", "SyscallStats"),
    "records": (
        "AntigenValue",
        "DatasetGroup",
        "DatasetLabel",
        "EventKind",
        "ReplayEvent",
        "ResponseRecord",
        "RunTranscript",
        "SignalLevel",
        "TickReport",
    ),
    "tissue": ("Cell", "CompartmentView", "TissueCompartment", "new_cell", "new_compartment"),
}


def __getattr__(name: str):
    """Lazy import of model classes to speed up CLI startup."""
    import importlib

    for module_name, names in _MODULES.items():
        if name in names:
            module = importlib.import_module(f".{module_name}", __name__)
            return getattr(module, name)

    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
