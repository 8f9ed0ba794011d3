"""Redundancy statistics: node correlations, PCA spectra, intensity tails.

These are the diagnostics that motivate pruning in the first place: how
similar the node series are, how few principal components carry the
variance along each axis, and how long-tailed the per-window dynamic
intensity is. Results are emitted as a plot-ready long-format CSV.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import RawSeries, WindowedSample
from .numerics import sym_eig


@dataclass
class RedundancyReport:
    """Plot-ready redundancy statistics for one series.

    ``corr_matrix`` is N x N with NaN rows/columns for constant nodes
    (their pairs are missing, not zero). Explained-variance sequences
    are cumulative fractions, non-decreasing and ending at 1.
    """

    corr_matrix: np.ndarray
    kept_nodes: list[int]
    frac_pairs_ge_08: float
    spatial_explained: np.ndarray
    temporal_explained: np.ndarray
    intensity_edges: np.ndarray
    intensity_counts: np.ndarray


def correlation_matrix(series: RawSeries, feature: int = 0) -> np.ndarray:
    """Pearson correlation matrix across nodes for one feature.

    Constant nodes are excluded with a warning; their rows and columns
    are NaN (reported as missing downstream). The valid block is
    symmetric with a unit diagonal.
    """
    vals = series.values[:, :, feature]
    frames, n = vals.shape
    if frames < 2:
        raise ValueError("need at least 2 frames for correlations")
    spans = vals.max(axis=0) - vals.min(axis=0)
    kept = np.flatnonzero(spans > 0.0)
    if kept.size == 0:
        raise ValueError("all nodes are constant")
    if kept.size < n:
        dropped = sorted(set(range(n)) - set(kept.tolist()))
        warnings.warn(
            f"excluding {len(dropped)} constant node(s) from correlations: {dropped}",
            stacklevel=2,
        )
    centered = vals[:, kept] - vals[:, kept].mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    z = centered / norms
    block = np.clip(z.T @ z, -1.0, 1.0)
    block = 0.5 * (block + block.T)
    np.fill_diagonal(block, 1.0)
    corr = np.full((n, n), np.nan)
    corr[np.ix_(kept, kept)] = block
    return corr


def frac_high_pairs(corr: np.ndarray, cutoff: float = 0.8) -> float:
    """Fraction of valid off-diagonal unordered pairs with corr >= cutoff."""
    n = corr.shape[0]
    iu = np.triu_indices(n, k=1)
    vals = corr[iu]
    valid = vals[~np.isnan(vals)]
    if valid.size == 0:
        return 0.0
    return float((valid >= cutoff).sum() / valid.size)


def pca_explained(
    series: RawSeries,
    axis: str,
    period: int | None = None,
    feature: int = 0,
) -> np.ndarray:
    """Cumulative explained-variance fractions along one axis.

    ``axis="spatial"`` treats nodes as variables observed across frames.
    ``axis="temporal"`` folds the series into day-length profiles (one
    observation per node per complete period) and treats time-of-day
    positions as variables, which is what makes periodic structure show
    up as a low-rank spectrum.
    """
    vals = series.values[:, :, feature]
    frames, n = vals.shape
    if axis == "spatial":
        if n < 2:
            raise ValueError("spatial axis needs at least 2 nodes")
        obs = vals
    elif axis == "temporal":
        p = period if period is not None else series.period
        if p is None:
            raise ValueError("temporal axis needs a period")
        if p < 2:
            raise ValueError("period must be >= 2")
        days = frames // p
        if days < 1 or days * n < 2:
            raise ValueError(
                f"temporal axis needs at least one complete period of {p} frames "
                f"and 2 or more profiles (frames={frames}, nodes={n})"
            )
        obs = vals[: days * p].reshape(days, p, n).transpose(0, 2, 1).reshape(days * n, p)
    else:
        raise ValueError(f"unknown axis {axis!r}, expected 'spatial' or 'temporal'")

    centered = obs - obs.mean(axis=0)
    cov = (centered.T @ centered) / obs.shape[0]
    eigvals, _ = sym_eig(cov)
    eigvals = np.maximum(eigvals, 0.0)
    total = eigvals.sum()
    if total <= 0.0:
        raise ValueError("zero total variance")
    return np.cumsum(eigvals) / total


def intensity_histogram(
    samples: list[WindowedSample], bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram of dynamic intensities over [0, max].

    Returns (edges, counts) with len(edges) == bins + 1 and counts
    summing to the sample count. An all-zero intensity list collapses
    into the first bin.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not samples:
        raise ValueError("no samples")
    deltas = np.array([s.dynamic_intensity for s in samples])
    top = float(deltas.max())
    if top == 0.0:
        counts = np.zeros(bins, dtype=np.int64)
        counts[0] = deltas.size
        return np.zeros(bins + 1), counts
    counts, edges = np.histogram(deltas, bins=bins, range=(0.0, top))
    return edges, counts.astype(np.int64)


def build_redundancy_report(
    series: RawSeries,
    samples: list[WindowedSample],
    bins: int = 30,
    period: int | None = None,
    feature: int = 0,
) -> RedundancyReport:
    corr = correlation_matrix(series, feature=feature)
    kept = [int(i) for i in np.flatnonzero(~np.isnan(corr.diagonal()))]
    edges, counts = intensity_histogram(samples, bins)
    return RedundancyReport(
        corr_matrix=corr,
        kept_nodes=kept,
        frac_pairs_ge_08=frac_high_pairs(corr),
        spatial_explained=pca_explained(series, "spatial", feature=feature),
        temporal_explained=pca_explained(series, "temporal", period=period, feature=feature),
        intensity_edges=edges,
        intensity_counts=counts,
    )


def write_redundancy_csv(report: RedundancyReport, path) -> None:
    """Emit the report as long-format rows (statistic, index, value).

    Pairs involving a constant node are omitted (missing), matching the
    NaN convention of the in-memory matrix.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "index", "value"])
        writer.writerow(["frac_pairs_ge_08", "", repr(report.frac_pairs_ge_08)])
        n = report.corr_matrix.shape[0]
        for i in range(n):
            for j in range(i + 1, n):
                v = report.corr_matrix[i, j]
                if not np.isnan(v):
                    writer.writerow(["corr", f"{i}:{j}", repr(float(v))])
        for k, v in enumerate(report.spatial_explained):
            writer.writerow(["spatial_explained", str(k + 1), repr(float(v))])
        for k, v in enumerate(report.temporal_explained):
            writer.writerow(["temporal_explained", str(k + 1), repr(float(v))])
        for k, e in enumerate(report.intensity_edges[:-1]):
            writer.writerow(["intensity_bin_edge", str(k), repr(float(e))])
        for k, c in enumerate(report.intensity_counts):
            writer.writerow(["intensity_count", str(k), str(int(c))])
