"""Truncated cylindrical Wiener increments keyed by (seed, sample, mode, interval).

Every increment is a pure function of its key: the Philox counter-based
generator is keyed by ``(seed, sample)`` and its counter is positioned at
``(interval // 2, mode)``, so any block of the increment table can be
regenerated independently of generation order or worker count.  Each
interval consumes two uniforms, turned into one standard normal by the
Box-Muller transform.

All discretization levels of a study read one fine table: coarser time grids
sum disjoint blocks of fine increments and smaller noise truncations take a
prefix of the modes.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError

_MASK64 = (1 << 64) - 1
_HEADER = struct.Struct("<QQQQd")


def standard_normals(seed, sample, mode, start, count):
    """Standard normals for intervals ``start .. start + count - 1`` of one mode."""
    first = start // 2
    skip = start - 2 * first
    bitgen = np.random.Philox(
        key=[seed & _MASK64, sample & _MASK64], counter=[first, mode, 0, 0]
    )
    u = np.random.Generator(bitgen).random(2 * (count + skip))[2 * skip:]
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def block_sum(fine, ratio):
    """Sum consecutive blocks of ``ratio`` entries along the last axis.

    Power-of-two ratios are summed by repeated pairwise halving, so nested
    dyadic coarsenings produce bit-identical results.
    """
    if fine.shape[-1] % ratio:
        raise ConfigurationError(f"{fine.shape[-1]} intervals are not divisible by {ratio}")
    out = fine
    while ratio > 1 and ratio % 2 == 0:
        out = out[..., 0::2] + out[..., 1::2]
        ratio //= 2
    if ratio > 1:
        out = out.reshape(out.shape[:-1] + (-1, ratio)).sum(axis=-1)
    return out


@dataclass(frozen=True, eq=False)
class NoisePath:
    """Increment table ``increments[..., j, i]`` of the truncated Wiener process.

    ``j`` runs over modes 1..k (0-based storage), ``i`` over the ``n`` intervals
    of length ``T / n``.  Leading axes (if any) index samples listed in
    ``sample_index``.  ``n_max`` and ``k_max`` describe the table the path was
    cut from; ``fine`` keeps that table so repeated coarsening is exact.
    """

    seed: int
    sample_index: object
    n_max: int
    k_max: int
    T: float
    increments: np.ndarray
    fine: Optional["NoisePath"] = None

    @property
    def n(self):
        return self.increments.shape[-1]

    @property
    def k(self):
        return self.increments.shape[-2]

    @property
    def dt(self):
        return self.T / self.n

    def values(self):
        """Wiener process at the grid times ``t_0 .. t_n`` (first entry zero)."""
        w = np.cumsum(self.increments, axis=-1)
        return np.concatenate([np.zeros(w.shape[:-1] + (1,)), w], axis=-1)


def _fill(seed, samples, k, n_max, T, start=0, stop=None):
    stop = n_max if stop is None else stop
    scale = np.sqrt(T / n_max)
    samples = np.atleast_1d(samples)
    out = np.empty((len(samples), k, stop - start))
    for s, sample in enumerate(samples):
        for j in range(k):
            out[s, j] = standard_normals(seed, int(sample), j, start, stop - start)
    out *= scale
    return out


def sample_path(seed, sample_index, n_max, k_max, T=1.0):
    """The full increment table for one sample (or a sequence of samples)."""
    if n_max < 1 or k_max < 1:
        raise ConfigurationError("n_max and k_max must be >= 1")
    if not T > 0:
        raise ConfigurationError(f"horizon T must be positive, got {T}")
    table = _fill(seed, sample_index, k_max, n_max, T)
    if np.ndim(sample_index) == 0:
        table = table[0]
    return NoisePath(int(seed), sample_index, int(n_max), int(k_max), float(T), table)


def coarsen(path, n):
    """Path at resolution ``n`` (``n`` must divide the finest resolution)."""
    base = path.fine if path.fine is not None else path
    if n < 1 or base.n % n:
        raise ConfigurationError(f"n={n} does not divide n_max={base.n}")
    inc = block_sum(base.increments, base.n // n)[..., : path.k, :]
    return NoisePath(path.seed, path.sample_index, path.n_max, path.k_max, path.T, inc,
                     fine=base if n != base.n else None)


def truncate_modes(path, k):
    """View restricted to modes ``1..k``; lower truncations are prefixes."""
    if k < 1 or k > path.k:
        raise ConfigurationError(f"k={k} outside 1..{path.k}")
    if k == path.k:
        return path
    fine = path.fine
    if fine is not None:
        fine = truncate_modes(fine, k)
    return NoisePath(path.seed, path.sample_index, path.n_max, path.k_max, path.T,
                     path.increments[..., :k, :], fine=fine)


class NoiseSource:
    """Lazily generated, chunked access to the increment tables of many samples.

    Used by the integrators to stream increments for long horizons without
    holding the whole ``(samples, k, n_max)`` table in memory.
    """

    def __init__(self, seed, samples, n_max, k_max, T=1.0):
        if n_max < 1 or k_max < 1:
            raise ConfigurationError("n_max and k_max must be >= 1")
        self.seed = int(seed)
        self.samples = np.atleast_1d(np.asarray(samples, dtype=np.int64))
        self.n_max = int(n_max)
        self.k_max = int(k_max)
        self.T = float(T)

    def increments(self, k, n, start, stop):
        """Increments at resolution ``n`` for coarse intervals ``start .. stop - 1``."""
        if k > self.k_max:
            raise ConfigurationError(f"k={k} exceeds k_max={self.k_max}")
        if self.n_max % n:
            raise ConfigurationError(f"n={n} does not divide n_max={self.n_max}")
        r = self.n_max // n
        fine = _fill(self.seed, self.samples, k, self.n_max, self.T, start * r, stop * r)
        return block_sum(fine, r)

    def path(self):
        return NoisePath(self.seed, self.samples, self.n_max, self.k_max, self.T,
                         _fill(self.seed, self.samples, self.k_max, self.n_max, self.T))


def dump_path(path, file):
    """Write a single-sample path: little-endian header then row-major float64 payload."""
    if path.increments.ndim != 2:
        raise ConfigurationError("only single-sample paths can be dumped")
    header = _HEADER.pack(path.seed & _MASK64, int(path.sample_index) & _MASK64,
                          path.n, path.k, path.T)
    payload = np.ascontiguousarray(path.increments, dtype="<f8").tobytes()
    if hasattr(file, "write"):
        file.write(header + payload)
    else:
        with open(file, "wb") as fh:
            fh.write(header + payload)


def load_path(file):
    if hasattr(file, "read"):
        raw = file.read()
    else:
        with open(file, "rb") as fh:
            raw = fh.read()
    seed, sample, n, k, T = _HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != n * k:
        raise ConfigurationError(f"payload holds {data.size} values, header promises {n * k}")
    return NoisePath(seed, sample, n, k, T, data.reshape(k, n).astype(float))
