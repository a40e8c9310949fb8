"""Material database with nearest-neighbour search in the energy metric.

States are whitened once at construction so that metric nearest-neighbour
queries become Euclidean ones, answered by a kd-tree. A brute-force scan over
the same whitened coordinates is kept alongside for verification.

Binary file layout (little-endian)::

    magic    8s   b"DDGANDB\\0"
    version  u32
    reserved u32
    n_e      u64
    seed     i64
    metric   9 x f64   (row-major C)
    params   4 x f64   (E, nu, a, p)
    crc32    u32       (over every preceding header byte and the payload)
    payload  n_e x 6 x f64  (e_xx, e_yy, g_xy, s_xx, s_yy, s_xy)
"""
from __future__ import annotations

import csv
import logging
import struct
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .material import EmptyDatasetError, MaterialParams
from .phase_space import MetricMatrix, PhaseState, _check_finite, whiten

log = logging.getLogger(__name__)

MAGIC = b"DDGANDB\0"
VERSION = 1
_HEADER = struct.Struct("<8sIIQq9d4d")
_CRC = struct.Struct("<I")
CSV_COLUMNS = ("e_xx", "e_yy", "g_xy", "s_xx", "s_yy", "s_xy")


class DatasetIOError(IOError):
    pass


class DatasetFormatError(DatasetIOError):
    """Bad magic, unknown version or an inconsistent header."""


class DatasetTruncatedError(DatasetIOError):
    pass


class DatasetChecksumError(DatasetIOError):
    pass


@dataclass(frozen=True)
class Nearest:
    index: int
    state: PhaseState
    sq_dist: float


def _row_sq_dist(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    # fixed summation order so tree and brute force produce identical floats
    d = (w - q) ** 2
    return ((d[..., 0] + d[..., 1]) + (d[..., 2] + d[..., 3])) + (d[..., 4] + d[..., 5])


class MaterialDatabase:
    """Immutable set of strain-stress states with metric nearest-neighbour queries."""

    # candidates fetched from the tree before exact tie-breaking
    _K_CANDIDATES = 4

    def __init__(self, states, metric: MetricMatrix, seed: int | None = None,
                 params: MaterialParams | None = None):
        states = np.array(states, dtype=float, order="C")
        if states.ndim != 2 or states.shape[1] != 6:
            raise ValueError(f"states must have shape (n, 6), got {states.shape}")
        if len(states) == 0:
            raise EmptyDatasetError("material database is empty")
        _check_finite(states)
        states.setflags(write=False)
        self.states = states
        self.metric = metric
        self.seed = seed
        self.params = params
        w = whiten(states, metric)
        w.setflags(write=False)
        self.whitened = w
        self._tree = cKDTree(w, leafsize=16, balanced_tree=True, compact_nodes=True)

    def __len__(self) -> int:
        return len(self.states)

    def state(self, i: int) -> PhaseState:
        return PhaseState.from_array(self.states[i])

    def _query(self, zs: np.ndarray):
        q = whiten(zs, self.metric)
        k = min(self._K_CANDIDATES, len(self))
        _, idx = self._tree.query(q, k=k)
        idx = np.asarray(idx).reshape(len(q), k)
        sq = _row_sq_dist(self.whitened[idx], q[:, None, :])
        # lexicographic (sq_dist, index) minimum among the candidates
        order = np.lexsort((idx, sq), axis=-1)[:, 0]
        rows = np.arange(len(q))
        return idx[rows, order], sq[rows, order]

    def nearest(self, z) -> Nearest:
        zs = np.asarray(z.as_array() if isinstance(z, PhaseState) else z, dtype=float)
        idx, sq = self._query(zs.reshape(1, 6))
        i = int(idx[0])
        return Nearest(i, self.state(i), float(sq[0]))

    def nearest_batch(self, zs) -> list[Nearest]:
        idx, sq = self.query_arrays(zs)
        return [Nearest(int(i), self.state(int(i)), float(d)) for i, d in zip(idx, sq)]

    def query_arrays(self, zs) -> tuple[np.ndarray, np.ndarray]:
        """Array form of :meth:`nearest_batch`: ``(indices, sq_dists)``."""
        if isinstance(zs, (list, tuple)):
            if len(zs) == 0:
                return np.zeros(0, dtype=np.intp), np.zeros(0)
            zs = np.stack([z.as_array() if isinstance(z, PhaseState) else np.asarray(z, float) for z in zs])
        zs = np.asarray(zs, dtype=float).reshape(-1, 6)
        if len(zs) == 0:
            return np.zeros(0, dtype=np.intp), np.zeros(0)
        t0 = time.perf_counter()
        idx, sq = self._query(zs)
        dt = time.perf_counter() - t0
        log.debug("nearest: %d queries in %.3fs (%.0f q/s)", len(zs), dt, len(zs) / max(dt, 1e-12))
        return idx, sq

    def nearest_brute(self, zs, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
        """Exhaustive scan; ties resolve to the smallest index."""
        q = whiten(np.asarray(zs, dtype=float).reshape(-1, 6), self.metric)
        idx = np.empty(len(q), dtype=np.intp)
        sq = np.empty(len(q))
        for s in range(0, len(q), chunk):
            d = _row_sq_dist(self.whitened[None, :, :], q[s:s + chunk, None, :])
            i = np.argmin(d, axis=1)
            idx[s:s + chunk] = i
            sq[s:s + chunk] = d[np.arange(len(i)), i]
        return idx, sq

    # -- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        mp = self.params or MaterialParams()
        header = _HEADER.pack(
            MAGIC, VERSION, 0, len(self), -1 if self.seed is None else int(self.seed),
            *self.metric.c.ravel(), mp.E, mp.nu, mp.a, mp.p,
        )
        payload = self.states.astype("<f8").tobytes()
        crc = zlib.crc32(payload, zlib.crc32(header))
        return header + _CRC.pack(crc) + payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "MaterialDatabase":
        if len(blob) < 8 or blob[:8] != MAGIC:
            raise DatasetFormatError("not a material database file (bad magic)")
        if len(blob) < _HEADER.size + _CRC.size:
            raise DatasetTruncatedError("file ends inside the header")
        fields = _HEADER.unpack_from(blob)
        _, version, _, n, seed = fields[:5]
        if version != VERSION:
            raise DatasetFormatError(f"unsupported version {version}")
        metric_c = np.array(fields[5:14]).reshape(3, 3)
        E, nu, a, p = fields[14:18]
        if n == 0 or not np.all(np.isfinite(metric_c)):
            raise DatasetFormatError("malformed header")
        (crc,) = _CRC.unpack_from(blob, _HEADER.size)
        start = _HEADER.size + _CRC.size
        payload = blob[start:]
        if len(payload) < n * 48:
            raise DatasetTruncatedError(f"payload holds {len(payload)} bytes, expected {n * 48}")
        if len(payload) > n * 48:
            raise DatasetFormatError("trailing bytes after payload")
        if zlib.crc32(payload, zlib.crc32(blob[:_HEADER.size])) != crc:
            raise DatasetChecksumError("checksum mismatch")
        states = np.frombuffer(payload, dtype="<f8").reshape(n, 6).astype(float)
        try:
            metric = MetricMatrix(metric_c)
            params = MaterialParams(E, nu, a, p)
        except ValueError as exc:
            raise DatasetFormatError(f"malformed header: {exc}") from exc
        return cls(states, metric, seed=None if seed < 0 else seed, params=params)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "MaterialDatabase":
        return cls.from_bytes(Path(path).read_bytes())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.states:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, metric: MetricMatrix, **kwargs) -> "MaterialDatabase":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
                raise DatasetFormatError(f"CSV header must be {','.join(CSV_COLUMNS)}")
            rows = [[float(v) for v in r] for r in reader if r]
        if any(len(r) != 6 for r in rows):
            raise DatasetFormatError("every CSV row needs 6 values")
        if not rows:
            raise EmptyDatasetError("CSV holds no states")
        return cls(np.array(rows), metric, **kwargs)


save = MaterialDatabase.save
load = MaterialDatabase.load
