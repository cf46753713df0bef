"""
Weight tables as CSV or plain text.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from app.models.schemas import WeightBreakdown

COLUMNS = ["model", "c_K", "g_s", "lambda", "weights"]
DETAIL_COLUMNS = ["name", "role", "level", "channel_level", "count"]


def table_frame(breakdowns: Sequence[WeightBreakdown]) -> pd.DataFrame:
    rows = [
        {
            "model": b.model,
            "c_K": b.c_K,
            "g_s": b.g_s,
            "lambda": b.channel_scale,
            "weights": b.total,
        }
        for b in breakdowns
    ]
    frame = pd.DataFrame(rows, columns=COLUMNS)
    for column in ("c_K", "g_s"):
        frame[column] = frame[column].astype("Int64")
    return frame


def detail_frame(breakdown: WeightBreakdown) -> pd.DataFrame:
    """One row per operator, in construction order."""
    frame = pd.DataFrame([op.model_dump() for op in breakdown.operators], columns=DETAIL_COLUMNS)
    for column in ("level", "channel_level"):
        frame[column] = frame[column].astype("Int64")
    return frame


def emit_table(
    breakdowns: Sequence[WeightBreakdown],
    path: Optional[Union[str, Path]] = None,
    fmt: str = "csv",
) -> str:
    """Render breakdowns with columns ``model, c_K, g_s, lambda, weights``."""
    frame = table_frame(breakdowns)
    text = frame.to_csv(index=False) if fmt == "csv" else frame.to_string(index=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def role_totals(breakdowns: List[WeightBreakdown]) -> pd.DataFrame:
    """Per-role totals, one row per model."""
    frame = pd.DataFrame([b.by_role() for b in breakdowns]).fillna(0).astype(int)
    frame.insert(0, "model", [b.model for b in breakdowns])
    return frame
