"""Measurement-series ingestion, windowing, splitting and synthesis.

A dataset enters as a node-by-time matrix (CSV, the STB1 binary format,
or the built-in generator), gets cut into sliding (input, target) window
pairs, and is split chronologically 6:2:2 before training. Inputs are
z-scored with statistics of the training portion only; targets are kept
in original units so error metrics stay interpretable.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import SeededRng

STB_MAGIC = b"STB1"


@dataclass
class RawSeries:
    """A frame-major measurement array of shape (frames, nodes, features).

    ``distances`` optionally carries the pairwise sensor distances used
    for graph construction; ``period`` the number of frames per seasonal
    cycle when known (daily period for traffic-style data).
    """

    values: np.ndarray
    distances: np.ndarray | None = None
    period: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"values must be 3-D, got shape {self.values.shape}")

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def num_features(self) -> int:
        return self.values.shape[2]

    def slice_frames(self, start: int, stop: int) -> "RawSeries":
        return RawSeries(self.values[start:stop], self.distances, self.period)


@dataclass
class WindowedSample:
    """One sliding-window pair.

    ``index`` is the position inside the owning list, ``start`` the
    absolute frame index of the first input frame in the source series
    (used to derive time-of-day features). ``dynamic_intensity`` is the
    mean over (node, feature) of the temporal population variance of the
    target block, always computed on raw target units.
    """

    index: int
    start: int
    x: np.ndarray  # (nodes, t_past, features)
    y: np.ndarray  # (nodes, t_future, features)
    dynamic_intensity: float


@dataclass
class NormStats:
    """Per-feature z-score statistics taken from the training portion."""

    mean: np.ndarray
    std: np.ndarray  # floored, never zero

    def normalize(self, arr: np.ndarray) -> np.ndarray:
        return (arr - self.mean) / self.std

    def denormalize(self, arr: np.ndarray) -> np.ndarray:
        return arr * self.std + self.mean


@dataclass
class DatasetSplit:
    """Chronological train/val/test windows plus normalization stats.

    Sample inputs are normalized; targets raw. No window crosses a split
    boundary.
    """

    train: list[WindowedSample]
    val: list[WindowedSample]
    test: list[WindowedSample]
    stats: NormStats
    num_nodes: int
    t_past: int
    t_future: int
    num_features: int
    period: int | None = None


@dataclass
class Adjacency:
    """Thresholded Gaussian-kernel graph over sensor distances."""

    matrix: np.ndarray
    threshold: float
    kernel_width: float


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for the synthetic generator.

    The series is a sum of three parts:

    * ``rank`` shared periodic latent signals (harmonics of the base
      period with decaying amplitudes) mixed through per-node loadings,
      on top of ``base_level``;
    * white Gaussian noise of scale ``noise_level``;
    * sparse localized bursts: ``anomaly_rate`` is the target fraction
      of frames covered by bursts, each burst lasting ``burst_len``
      frames on a single random node with a triangular ramp peaking at
      ``anomaly_mag`` (random sign).

    Node coordinates are drawn uniformly in a 100x100 box and converted
    to a pairwise distance matrix.
    """

    num_nodes: int
    frames: int
    rank: int
    period: int = 96
    noise_level: float = 0.5
    anomaly_rate: float = 0.0
    anomaly_mag: float = 8.0
    burst_len: int = 6
    base_level: float = 50.0
    amplitude: float = 10.0

    def validate(self):
        if self.num_nodes < 1:
            raise ValueError("num_nodes must be >= 1")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.rank > self.num_nodes:
            raise ValueError(
                f"rank {self.rank} exceeds node count {self.num_nodes}"
            )
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if self.burst_len < 1:
            raise ValueError("burst_len must be >= 1")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ValueError("anomaly_rate must be in [0, 1]")
        if self.noise_level < 0 or self.anomaly_mag < 0:
            raise ValueError("noise_level and anomaly_mag must be >= 0")


def load_csv(path) -> RawSeries:
    """Parse a single-feature CSV: header of node ids, one row per frame.

    Raises:
        ValueError: with the offending row number for ragged rows or
            non-numeric cells; "no frames" for empty input.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if len(rows) <= 1:
        raise ValueError(f"{path}: no frames (need a header plus at least 2 data rows)")
    header = rows[0]
    n = len(header)
    frames = []
    for k, row in enumerate(rows[1:], start=1):
        if len(row) != n:
            raise ValueError(
                f"{path}: row {k} (line {k + 1}): expected {n} values, found {len(row)}"
            )
        try:
            frames.append([float(cell) for cell in row])
        except ValueError:
            bad = next(c for c in row if not _is_float(c))
            raise ValueError(
                f"{path}: row {k} (line {k + 1}): non-numeric cell {bad!r}"
            ) from None
    if len(frames) < 2:
        raise ValueError(f"{path}: no frames (need at least 2 data rows, found {len(frames)})")
    values = np.asarray(frames, dtype=np.float64)[:, :, np.newaxis]
    return RawSeries(values)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_stb(path, series: RawSeries) -> None:
    """Write the STB1 binary format.

    Layout: magic "STB1", little-endian u32 nodes, u32 frames,
    u32 features, frames*nodes*features float64 values (frame-major),
    u8 flag, and when the flag is 1 an N x N float64 distance matrix.
    """
    vals = np.ascontiguousarray(series.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(STB_MAGIC)
        fh.write(struct.pack("<III", series.num_nodes, series.num_frames, series.num_features))
        fh.write(vals.tobytes())
        if series.distances is not None:
            d = np.ascontiguousarray(series.distances, dtype="<f8")
            if d.shape != (series.num_nodes, series.num_nodes):
                raise ValueError("distance matrix shape does not match node count")
            fh.write(struct.pack("<B", 1))
            fh.write(d.tobytes())
        else:
            fh.write(struct.pack("<B", 0))


def read_stb(path) -> RawSeries:
    """Read the STB1 binary format written by :func:`write_stb`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != STB_MAGIC:
        raise ValueError(f"{path}: bad magic, not an STB1 file")
    if len(blob) < 17:
        raise ValueError(f"{path}: truncated STB1 header")
    n, frames, f = struct.unpack_from("<III", blob, 4)
    off = 16
    need = frames * n * f * 8
    if len(blob) < off + need + 1:
        raise ValueError(f"{path}: truncated STB1 payload")
    values = np.frombuffer(blob, dtype="<f8", count=frames * n * f, offset=off)
    values = values.reshape(frames, n, f).astype(np.float64)
    off += need
    (flag,) = struct.unpack_from("<B", blob, off)
    off += 1
    distances = None
    if flag == 1:
        if len(blob) < off + n * n * 8:
            raise ValueError(f"{path}: truncated distance matrix")
        distances = np.frombuffer(blob, dtype="<f8", count=n * n, offset=off)
        distances = distances.reshape(n, n).astype(np.float64)
    elif flag != 0:
        raise ValueError(f"{path}: invalid distance flag {flag}")
    return RawSeries(values, distances)


def make_windows(
    series: RawSeries, t_past: int, t_future: int, frame_offset: int = 0
) -> list[WindowedSample]:
    """Cut a series into all in-bounds sliding (input, target) pairs.

    Window i uses frames [i, i+t_past) as input and the following
    t_future frames as target; the count is therefore
    frames - t_past - t_future + 1.
    """
    if t_past < 1 or t_future < 1:
        raise ValueError("t_past and t_future must be >= 1")
    frames = series.num_frames
    if frames < t_past + t_future:
        raise ValueError(
            f"insufficient frames: need >= {t_past + t_future}, got {frames}"
        )
    count = frames - t_past - t_future + 1
    vals = series.values
    samples = []
    for i in range(count):
        x = np.ascontiguousarray(vals[i : i + t_past].transpose(1, 0, 2))
        y = np.ascontiguousarray(
            vals[i + t_past : i + t_past + t_future].transpose(1, 0, 2)
        )
        delta = float(np.var(y, axis=1).mean())
        samples.append(
            WindowedSample(
                index=i,
                start=frame_offset + i,
                x=x,
                y=y,
                dynamic_intensity=delta,
            )
        )
    return samples


def chrono_split(
    series: RawSeries,
    t_past: int,
    t_future: int,
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> DatasetSplit:
    """Chronological split with train-only z-score normalization.

    Frame boundaries sit at floor(r_train * frames) and
    floor((r_train + r_val) * frames); windows are built inside each
    portion so none crosses a boundary. Inputs of all three portions are
    normalized with the train-portion statistics (std floored at 1e-8);
    targets stay in original units.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    if min(ratios) <= 0:
        raise ValueError("all split ratios must be positive")
    frames = series.num_frames
    b1 = int(np.floor(ratios[0] * frames))
    b2 = int(np.floor((ratios[0] + ratios[1]) * frames))
    bounds = [(0, b1, "train"), (b1, b2, "val"), (b2, frames, "test")]
    need = t_past + t_future
    for lo, hi, name in bounds:
        if hi - lo < need:
            raise ValueError(
                f"{name} portion too short: {hi - lo} frames, need >= {need}"
            )

    train_vals = series.values[0:b1]
    mu = train_vals.mean(axis=(0, 1))
    sd = np.maximum(train_vals.std(axis=(0, 1)), 1e-8)
    stats = NormStats(mean=mu, std=sd)

    portions = {}
    for lo, hi, name in bounds:
        samples = make_windows(series.slice_frames(lo, hi), t_past, t_future, frame_offset=lo)
        for s in samples:
            s.x = stats.normalize(s.x)
        portions[name] = samples

    return DatasetSplit(
        train=portions["train"],
        val=portions["val"],
        test=portions["test"],
        stats=stats,
        num_nodes=series.num_nodes,
        t_past=t_past,
        t_future=t_future,
        num_features=series.num_features,
        period=series.period,
    )


def build_adjacency(distances, threshold: float) -> Adjacency:
    """Thresholded Gaussian-kernel adjacency over pairwise distances.

    The kernel width is the population std of all off-diagonal
    distances; entries below ``threshold`` and the diagonal are zeroed,
    so every kept weight lies in [threshold, 1].
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite distance")
    if np.any(d < 0):
        raise ValueError("negative distance")
    if float(np.abs(d - d.T).max(initial=0.0)) > 1e-9 * max(1.0, float(d.max(initial=0.0))):
        raise ValueError("distance matrix must be symmetric")
    if float(np.abs(d.diagonal()).max(initial=0.0)) != 0.0:
        raise ValueError("distance matrix must have a zero diagonal")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    sigma = float(d[off].std()) if n > 1 else 0.0
    if sigma == 0.0:
        raise ValueError("degenerate distances: zero spread")
    a = np.exp(-((d / sigma) ** 2))
    a[a < threshold] = 0.0
    np.fill_diagonal(a, 0.0)
    return Adjacency(matrix=a, threshold=threshold, kernel_width=sigma)


def synth_components(
    spec: SynthSpec, rng: SeededRng
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate the (clean, noise, burst) parts of a synthetic series.

    Each part is a (frames, nodes) array; :func:`synthesize` returns
    their sum. Separate substreams per part keep the draw sequences
    independent of each other and of any feature toggles.
    """
    spec.validate()
    n, frames, k = spec.num_nodes, spec.frames, spec.rank

    t = np.arange(frames, dtype=np.float64)
    phases = rng.split("phases").uniform(k) * 2.0 * np.pi
    loadings = 1.0 + 0.35 * rng.split("loadings").normal((n, k))
    latents = np.empty((k, frames))
    for j in range(k):
        amp = spec.amplitude * (0.6**j)
        latents[j] = amp * np.sin(2.0 * np.pi * (j + 1) * t / spec.period + phases[j])
    clean = spec.base_level + loadings @ latents  # (n, frames)
    clean = clean.T.copy()  # (frames, n)

    if spec.noise_level > 0:
        noise = spec.noise_level * rng.split("noise").normal((frames, n))
    else:
        noise = np.zeros((frames, n))

    bursts = np.zeros((frames, n))
    if spec.anomaly_rate > 0 and spec.anomaly_mag > 0:
        length = min(spec.burst_len, frames)
        n_events = max(1, int(round(spec.anomaly_rate * frames / length)))
        if length > 1:
            ramp = 1.0 - np.abs(2.0 * np.arange(length) - (length - 1)) / (length - 1)
        else:
            ramp = np.ones(1)
        arng = rng.split("anomalies")
        starts = arng.integers(0, frames - length + 1, n_events)
        nodes = arng.integers(0, n, n_events)
        signs = np.where(arng.bernoulli(0.5, n_events), 1.0, -1.0)
        for s, node, sign in zip(starts, nodes, signs):
            bursts[s : s + length, node] += sign * spec.anomaly_mag * ramp
    return clean, noise, bursts


def synthesize(spec: SynthSpec, rng: SeededRng) -> RawSeries:
    """Build a synthetic series (single feature) plus sensor distances."""
    clean, noise, bursts = synth_components(spec, rng)
    values = (clean + noise + bursts)[:, :, np.newaxis]
    coords = rng.split("coords").uniform((spec.num_nodes, 2)) * 100.0
    diff = coords[:, np.newaxis, :] - coords[np.newaxis, :, :]
    distances = np.sqrt((diff**2).sum(axis=2))
    return RawSeries(values, distances=distances, period=spec.period)
