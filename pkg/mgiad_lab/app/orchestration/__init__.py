"""
Command orchestration for the MGiaD toolkit.

This package contains the LabCommands class that wires experiment configs
to the library for every CLI subcommand.
"""

from .commands import LabCommands, apply_overrides

__all__ = ["LabCommands", "apply_overrides"]
