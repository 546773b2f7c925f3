"""
Annotation cloud plots
Scatter of the rater points of one landmark with its k-sigma covariance
ellipse, axes in mm, written as a byte-stable SVG.
"""

import io
import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Ellipse  # noqa: E402

from src.geometry.covariance import EllipseParams, PointCloud, ellipse_params, summarize  # noqa: E402
from src.utils.io_utils import atomic_write_bytes  # noqa: E402

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "landmark-variability"


def cloud_ellipse(points_mm: np.ndarray, k_sigma: float) -> Optional[EllipseParams]:
    """Ellipse of a 2D cloud, or None when fewer than 2 points are available"""
    points_mm = np.asarray(points_mm, dtype=float)
    if points_mm.shape[0] < 2:
        return None
    return ellipse_params(summarize(PointCloud(points_mm)), k_sigma)


def _draw_ellipse(ax, ellipse: EllipseParams) -> None:
    major, minor = (float(v) for v in ellipse.semi_axes)
    if major == 0.0:
        return
    if minor == 0.0:
        # zero minor axis: the ellipse collapses onto its major axis
        direction = ellipse.orientation[:, 0] * major
        ends = np.vstack([ellipse.center - direction, ellipse.center + direction])
        ax.plot(ends[:, 0], ends[:, 1], color="tab:red", lw=1.5, label="ellipse (degenerate)")
        return
    patch = Ellipse(
        xy=tuple(ellipse.center),
        width=2.0 * major,
        height=2.0 * minor,
        angle=ellipse.angle_deg,
        edgecolor="tab:red",
        facecolor="none",
        lw=1.5,
        label="ellipse",
    )
    ax.add_patch(patch)


def plot_annotation_cloud(
    points_mm: np.ndarray,
    k_sigma: float,
    path: Union[str, Path],
    title: str = "",
) -> Path:
    """
    Write an SVG scatter of the points with their k-sigma ellipse

    Clouds with fewer than 2 points get a scatter only and a warning.
    """
    points_mm = np.asarray(points_mm, dtype=float)
    ellipse = cloud_ellipse(points_mm, k_sigma)
    if ellipse is None:
        logger.warning(f"⚠️ {title or path}: fewer than 2 points, ellipse skipped")

    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(points_mm[:, 0], points_mm[:, 1], s=18, color="tab:blue", label="raters")
        if ellipse is not None:
            ax.scatter([ellipse.center[0]], [ellipse.center[1]], marker="x", color="black", label="mean")
            _draw_ellipse(ax, ellipse)
        ax.set_xlabel("x (mm)")
        ax.set_ylabel("y (mm)")
        ax.set_aspect("equal", adjustable="datalim")
        ax.invert_yaxis()
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize="small")

        buffer = io.BytesIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        plt.close(fig)

    return atomic_write_bytes(path, buffer.getvalue())
