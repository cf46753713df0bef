"""
Weight counting, channel-scaling fits and weight tables.
"""

from .complexity import conv_count, count_weights
from .scaling import BlockFamily, ScalingReport, family_count, scaling_fit
from .tables import detail_frame, emit_table, role_totals, table_frame

__all__ = [
    "BlockFamily",
    "ScalingReport",
    "conv_count",
    "count_weights",
    "detail_frame",
    "emit_table",
    "family_count",
    "role_totals",
    "scaling_fit",
    "table_frame",
]
