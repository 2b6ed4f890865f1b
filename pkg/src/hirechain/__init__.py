"""Permissioned hiring/HR ledger with round-robin consensus and a
deterministic multi-node simulator."""

# Importing the payload-defining modules registers their codecs with the ledger.
from . import hrm, ledger, recruit, registry  # noqa: F401

__version__ = "0.1.0"
