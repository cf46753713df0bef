"""
Core configuration and utilities for the MGiaD toolkit.
"""

from .config import get_settings, setup_logging
from .seeding import substream

__all__ = ["get_settings", "setup_logging", "substream"]
