"""Flat parameter vectors, deterministic reductions, and derived random streams.

A parameter point is a plain 1-D float64 numpy array everywhere in this
package; the helpers here enforce that contract. The two reductions have
bit-level guarantees the algorithm and harness tests rely on:

* ``mean_reduce`` always accumulates in ascending index order, so results are
  independent of how many workers produced the inputs, and the mean of n
  identical vectors is bit-equal to that vector.
* ``SeededStream`` derives child streams as a pure function of
  (master_seed, lineage) via a counter-based generator, so any two runs (or
  thread schedules) that ask for the same stream get the same samples.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError, UsageError

__all__ = ["as_params", "axpy", "mean_reduce", "SeededStream", "derive_stream"]

_U64 = (1 << 64) - 1


def as_params(values) -> np.ndarray:
    """Coerce ``values`` to a 1-D float64 vector, rejecting NaN/Inf entries."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"parameter vector must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError("parameter vector contains non-finite entries")
    return v


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Return ``a*x + y`` as a new vector; inputs are not modified."""
    if x.shape != y.shape:
        raise DimensionError(f"axpy length mismatch: {x.shape} vs {y.shape}")
    if not np.isfinite(a):
        raise NumericError(f"axpy scale is not finite: {a!r}")
    return a * x + y


def mean_reduce(vs) -> np.ndarray:
    """Arithmetic mean of equal-length vectors in fixed ascending order.

    Computed as ``vs[0] + mean(vs[i] - vs[0])`` so the mean of n copies of a
    vector is that vector exactly. Parallel callers write results into their
    own slots; this reduction itself is always serial.
    """
    vs = list(vs)
    if not vs:
        raise UsageError("mean_reduce requires a nonempty list")
    first = vs[0]
    if len(vs) == 1:
        return first.copy()
    acc = np.zeros_like(first)
    for v in vs[1:]:
        if v.shape != first.shape:
            raise DimensionError(f"mean_reduce length mismatch: {v.shape} vs {first.shape}")
        acc += v - first
    return first + acc / len(vs)


@dataclass(frozen=True)
class SeededStream:
    """Reproducible random stream addressed by a master seed plus lineage.

    ``derive`` is pure: the same (master_seed, lineage) always yields the
    same generator, and sibling streams are statistically independent
    (Philox keyed on a blake2b digest of the address).
    """

    master_seed: int
    lineage: tuple[tuple[str, int], ...] = ()

    def derive(self, label: str, index: int) -> "SeededStream":
        return SeededStream(self.master_seed, self.lineage + ((str(label), int(index)),))

    def _key(self) -> int:
        h = hashlib.blake2b(digest_size=16)
        h.update((int(self.master_seed) & _U64).to_bytes(8, "little"))
        for label, index in self.lineage:
            h.update(label.encode("utf-8"))
            h.update(b"\x00")
            h.update((int(index) & _U64).to_bytes(8, "little"))
            h.update(b"\x01")
        return int.from_bytes(h.digest(), "little")

    def generator(self) -> np.random.Generator:
        """Fresh generator for this stream; the caller owns its state."""
        return np.random.Generator(np.random.Philox(key=self._key()))


def derive_stream(parent: SeededStream, label: str, index: int) -> SeededStream:
    """Child stream of ``parent``; deterministic function of all inputs."""
    return parent.derive(label, index)
