"""Flight node, ground client and the simulation harness that connects
them over a simulated (or live UDP) link, with the security layer
selectable per run."""

from . import schemas
from .ground import CommandHandle, CommandOutcome, GroundNode, NotConnected, TransferFailed
from .harness import SimHarness
from .modes import LinkKeys, MODES, keys_from_config, parse_kv_file, seeded_rand
from .node import FlightNode

__all__ = [
    "schemas",
    "CommandHandle",
    "CommandOutcome",
    "GroundNode",
    "NotConnected",
    "TransferFailed",
    "SimHarness",
    "LinkKeys",
    "MODES",
    "keys_from_config",
    "parse_kv_file",
    "seeded_rand",
    "FlightNode",
]
