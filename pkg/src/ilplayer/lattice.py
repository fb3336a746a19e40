"""Integer boxes and the affine frame the learnable constraints live in."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Lattice:
    """Integer box ``[low, high]`` seen through the map ``z = (y - center) / scale``.

    ``Lattice.identity`` keeps integer coordinates; ``Lattice.normalized``
    sends the box onto ``[-0.5, 0.5]^n``.
    """

    low: np.ndarray
    high: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, low, high) -> "Lattice":
        low, high = _int_pair(low, high)
        return cls(low, high, np.zeros(low.size), np.ones(low.size))

    @classmethod
    def normalized(cls, low, high) -> "Lattice":
        low, high = _int_pair(low, high)
        width = (high - low).astype(float)
        return cls(low, high, (low + high) / 2.0, np.where(width > 0, width, 1.0))

    @property
    def n(self) -> int:
        return self.low.size

    @property
    def size(self) -> int:
        return int(np.prod(self.high - self.low + 1, dtype=object))

    def to_frame(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.center) / self.scale

    def from_frame(self, z) -> np.ndarray:
        return np.round(np.asarray(z, dtype=float) * self.scale + self.center).astype(np.int64)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y)
        return np.all((y >= self.low) & (y <= self.high), axis=-1)

    def constraints_to_integer(self, A, b):
        """Rewrite ``A z <= b`` (frame) as ``A' y <= b'`` (integer coordinates)."""
        A = np.asarray(A, dtype=float)
        A_int = A / self.scale
        b_int = np.asarray(b, dtype=float) + A @ (self.center / self.scale)
        return A_int, b_int

    def cost_to_integer(self, c):
        return np.asarray(c, dtype=float) / self.scale


def _int_pair(low, high):
    low = np.asarray(low, dtype=np.int64).reshape(-1)
    high = np.asarray(high, dtype=np.int64).reshape(-1)
    if low.shape != high.shape or np.any(low > high):
        raise ValueError("invalid box")
    return low, high
