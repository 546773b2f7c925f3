"""
Correlation analyses
Pearson coefficients between per-landmark uncertainty and either inter-rater
variability (binned) or detection error (unbinned).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.utils.exceptions import DataError, KeyAlignmentError, UndefinedCorrelationError

logger = logging.getLogger(__name__)

KEY_COLUMNS = ["scan_id", "landmark_id"]


class BinningMode(Enum):
    CONSECUTIVE = "consecutive"
    SORTED = "sorted"


@dataclass(frozen=True)
class PairedSeries:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DataError(f"Paired series need two 1D arrays of equal length, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("Paired series contain non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, float]]) -> "PairedSeries":
        if not pairs:
            return cls(np.empty(0), np.empty(0))
        array = np.asarray(pairs, dtype=float)
        return cls(array[:, 0], array[:, 1])

    def __len__(self) -> int:
        return int(self.x.size)


def pearson(series: PairedSeries) -> float:
    """Product-moment correlation; raises when it is undefined"""
    if len(series) < 2:
        raise UndefinedCorrelationError(f"Pearson correlation needs at least 2 pairs, got {len(series)}")
    if np.ptp(series.x) == 0 or np.ptp(series.y) == 0:
        raise UndefinedCorrelationError("Pearson correlation is undefined for a zero-variance series")
    r, _ = stats.pearsonr(series.x, series.y)
    return float(r)


def binned_series(
    per_landmark_x: Sequence[float],
    per_landmark_y: Sequence[float],
    bin_size: int,
    mode: BinningMode = BinningMode.CONSECUTIVE,
) -> PairedSeries:
    """
    Average consecutive groups of bin_size pairs

    Input is expected in (scan_id, landmark_id) order. In sorted mode pairs are
    first ordered by x (stable). A trailing partial bin is kept when it holds at
    least half of bin_size items.
    """
    x = np.asarray(per_landmark_x, dtype=float)
    y = np.asarray(per_landmark_y, dtype=float)
    if x.shape != y.shape:
        raise DataError(f"Cannot bin {x.size} x-values against {y.size} y-values")
    if bin_size < 1:
        raise DataError(f"bin_size must be >= 1, got {bin_size}")
    if BinningMode(mode) is BinningMode.SORTED:
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]

    binned_x: List[float] = []
    binned_y: List[float] = []
    for start in range(0, x.size, bin_size):
        stop = min(start + bin_size, x.size)
        if 2 * (stop - start) < bin_size:
            break
        binned_x.append(float(np.mean(x[start:stop])))
        binned_y.append(float(np.mean(y[start:stop])))
    return PairedSeries(np.array(binned_x), np.array(binned_y))


def align_tables(left: pd.DataFrame, right: pd.DataFrame, context: str) -> pd.DataFrame:
    """Inner-join two per-landmark tables, failing on any key present in only one"""
    left_keys = set(map(tuple, left[KEY_COLUMNS].itertuples(index=False)))
    right_keys = set(map(tuple, right[KEY_COLUMNS].itertuples(index=False)))
    missing = left_keys ^ right_keys
    if missing:
        raise KeyAlignmentError(f"{context}: per-landmark keys differ", missing)
    merged = left.merge(right, on=KEY_COLUMNS, suffixes=("_unc", "_ref"), validate="one_to_one")
    return merged.sort_values(KEY_COLUMNS, kind="mergesort").reset_index(drop=True)


def correlation_report(
    uncertainty: pd.DataFrame,
    reference: pd.DataFrame,
    metric_pairs: Dict[str, Tuple[str, str]],
    bin_size: Optional[int] = None,
    mode: BinningMode = BinningMode.CONSECUTIVE,
) -> pd.DataFrame:
    """
    One Pearson coefficient per metric pair

    Args:
        uncertainty: per-landmark table with scan_id, landmark_id and metric columns
        reference: per-landmark variability metrics or errors
        metric_pairs: report label -> (uncertainty column, reference column)
        bin_size: None for an unbinned correlation
        mode: ordering used before binning

    Returns:
        DataFrame with metric, r (NaN when undefined), n_pairs and defined
    """
    renamed_unc = uncertainty[KEY_COLUMNS + sorted({u for u, _ in metric_pairs.values()})]
    renamed_unc = renamed_unc.rename(columns={c: f"{c}__unc" for c in renamed_unc.columns if c not in KEY_COLUMNS})
    renamed_ref = reference[KEY_COLUMNS + sorted({r for _, r in metric_pairs.values()})]
    renamed_ref = renamed_ref.rename(columns={c: f"{c}__ref" for c in renamed_ref.columns if c not in KEY_COLUMNS})
    merged = align_tables(renamed_unc, renamed_ref, "correlation")

    rows = []
    for label, (unc_column, ref_column) in metric_pairs.items():
        x = merged[f"{ref_column}__ref"].to_numpy()
        y = merged[f"{unc_column}__unc"].to_numpy()
        series = binned_series(x, y, bin_size, mode) if bin_size is not None else PairedSeries(x, y)
        try:
            r: float = pearson(series)
            defined = True
        except UndefinedCorrelationError as e:
            logger.warning(f"⚠️ Correlation for {label} undefined: {e}")
            r, defined = float("nan"), False
        rows.append({"metric": label, "r": r, "n_pairs": len(series), "defined": defined})
    return pd.DataFrame(rows, columns=["metric", "r", "n_pairs", "defined"])


def coefficient_matrix(report: pd.DataFrame, row_order: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Pivot a long coefficient table to one row per strategy

    Args:
        report: rows with strategy, metric and r (correlation_report output tagged by strategy)
        row_order: strategy order of the result; first appearance when omitted

    Returns:
        DataFrame with strategy followed by one r_<metric> column per metric
    """
    strategies = list(row_order) if row_order is not None else list(dict.fromkeys(report["strategy"]))
    metrics = list(dict.fromkeys(report["metric"]))
    wide = report.pivot(index="strategy", columns="metric", values="r").reindex(index=strategies, columns=metrics)
    wide.columns = [f"r_{metric}" for metric in metrics]
    return wide.rename_axis("strategy").reset_index()
