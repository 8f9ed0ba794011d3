"""Dense-array statistics kernel shared by every other module.

Everything operates on plain float64 numpy arrays; 2-D arrays play the
role of matrices (row-major, as numpy defaults). Conventions used across
the package:

* variance and standard deviation always use the population form
  (divide by n, not n-1);
* eigendecomposition is restricted to symmetric matrices and uses cyclic
  Jacobi rotations, trading raw speed for robustness at the matrix sizes
  seen here (up to a few hundred columns);
* randomness comes from :class:`SeededRng`, a Philox counter-based
  generator with labelled substreams, so that one subsystem consuming
  draws can never shift another subsystem's sequence.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = [
    "mean",
    "pop_var",
    "pop_std",
    "pearson",
    "sym_eig",
    "SeededRng",
]


def _as_series(values, what: str = "input") -> np.ndarray:
    """Coerce a 1-D float sequence, rejecting empty or non-finite data."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"empty {what}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite value in {what}")
    return arr


def mean(values) -> float:
    """Arithmetic mean of a non-empty sequence of finite floats."""
    return float(_as_series(values).mean())


def pop_var(values) -> float:
    """Population variance (divide by n) of a non-empty sequence."""
    return float(_as_series(values).var())


def pop_std(values) -> float:
    """Population standard deviation, sqrt of :func:`pop_var`."""
    return float(_as_series(values).std())


def pearson(a, b) -> float:
    """Pearson correlation coefficient of two equal-length series.

    Both series must contain at least two points, and neither may be
    constant (that would make the coefficient undefined).

    Raises:
        ValueError: on length mismatch, fewer than two points, or a
            degenerate (constant) series.
    """
    xa = _as_series(a, "first series")
    xb = _as_series(b, "second series")
    if xa.size != xb.size:
        raise ValueError(f"length mismatch: {xa.size} vs {xb.size}")
    if xa.size < 2:
        raise ValueError("need at least 2 points")
    if np.ptp(xa) == 0.0 or np.ptp(xb) == 0.0:
        raise ValueError("degenerate series")
    da = xa - xa.mean()
    db = xb - xb.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0.0:
        raise ValueError("degenerate series")
    r = float((da * db).sum() / denom)
    return min(1.0, max(-1.0, r))


def sym_eig(m, sym_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the matching columns of an
    orthogonal matrix. Intended for covariance-style matrices (positive
    semi-definite up to rounding); tiny negative eigenvalues from
    round-off are returned as-is and left to the caller.

    Raises:
        ValueError: if ``m`` is not square or deviates from symmetry by
            more than ``sym_tol`` times the magnitude scale.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entry in matrix")
    scale = max(1.0, float(np.abs(a).max()))
    if float(np.abs(a - a.T).max()) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)

    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v

    fro = float(np.sqrt((a * a).sum()))
    stop = 1e-14 * max(1.0, fro)
    for _ in range(100):
        off = np.sqrt((a * a).sum() - (a.diagonal() ** 2).sum())
        if off <= stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= stop / n:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # Two-sided rotation in the (p, q) plane.
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    order = np.argsort(-a.diagonal(), kind="stable")
    return a.diagonal()[order].copy(), v[:, order].copy()


class SeededRng:
    """Reproducible random source with labelled substreams.

    Backed by numpy's Philox bit generator (a documented 64-bit
    counter-based generator). A stream is identified by the root seed
    plus a path of label hashes; :meth:`split` derives a child stream
    whose draws are independent of the parent's and of every sibling's.
    Enabling or disabling one consumer therefore never perturbs the
    sequence seen by another.

    Instances own their state and must not be shared between concurrent
    tasks; hand each task its own split instead.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = seed
        self._path = tuple(int(x) for x in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self._path)
        self._bitgen = np.random.Philox(ss)
        self.gen = np.random.Generator(self._bitgen)

    def split(self, *labels) -> "SeededRng":
        """Derive the child stream addressed by ``labels``.

        Labels are hashed with CRC-32 (stable across runs and
        platforms), so the same root seed and label path always name the
        same stream.
        """
        suffix = tuple(zlib.crc32(str(lbl).encode("utf-8")) for lbl in labels)
        return SeededRng(self.seed, self._path + suffix)

    # Convenience draw helpers; all delegate to the numpy Generator.

    def uniform(self, size=None):
        """Uniform draws in [0, 1)."""
        return self.gen.random(size)

    def normal(self, size=None):
        """Standard normal draws."""
        return self.gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        """Integer draws in [low, high)."""
        return self.gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def bernoulli(self, p: float, size=None):
        """Boolean draws, True with probability ``p``."""
        return self.gen.random(size) < p

    def subset(self, n: int, k: int) -> np.ndarray:
        """Sorted k-subset of range(n), drawn without replacement."""
        return np.sort(self.gen.choice(n, size=k, replace=False))

    def state_dict(self) -> dict:
        """JSON-serialisable snapshot of seed, path and generator state."""
        return {
            "seed": self.seed,
            "path": list(self._path),
            "bitgen": _jsonable(self._bitgen.state),
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "SeededRng":
        rng = cls(state["seed"], tuple(state["path"]))
        rng._bitgen.state = _unjsonable(state["bitgen"])
        return rng

    def __repr__(self) -> str:  # pragma: no cover
        return f"SeededRng(seed={self.seed}, path={self._path})"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _unjsonable(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _unjsonable(v) for k, v in obj.items()}
    return obj
