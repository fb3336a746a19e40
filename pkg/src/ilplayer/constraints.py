"""Learnable hyperplane constraints.

Each constraint is stored as a normal ``a``, a radius ``r`` and an origin
``o``; the matrix form is ``a . y <= r - a . o``.  Rotating ``a`` therefore
turns the hyperplane around its own origin rather than the global one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

NORM_EPS = 1e-8
INIT_RADIUS = 0.2


class Parametrization(str, enum.Enum):
    LEARNABLE_ORIGINS = "learnable_origins"
    DIRECT_CORNER = "direct_corner"
    DIRECT_CENTER = "direct_center"


def fixed_origin(mode: Parametrization, n: int) -> np.ndarray | None:
    """Origin used by the direct modes, in the normalized box [-0.5, 0.5]^n."""
    if mode == Parametrization.DIRECT_CORNER:
        return np.full(n, -0.5)
    if mode == Parametrization.DIRECT_CENTER:
        return np.zeros(n)
    return None


@dataclass
class ConstraintSet:
    normals: np.ndarray  # (m, n)
    radii: np.ndarray  # (m,)
    origins: np.ndarray  # (m, n)
    mode: Parametrization = Parametrization.LEARNABLE_ORIGINS

    def __post_init__(self):
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        m, n = self.normals.shape
        self.radii = np.asarray(self.radii, dtype=float).reshape(m)
        self.origins = np.asarray(self.origins, dtype=float).reshape(m, n)
        self.mode = Parametrization(self.mode)

    @property
    def m(self) -> int:
        return self.normals.shape[0]

    @property
    def n(self) -> int:
        return self.normals.shape[1]

    def parameters(self) -> list[np.ndarray]:
        """Arrays updated by the optimizer (origins only when learnable)."""
        if self.mode == Parametrization.LEARNABLE_ORIGINS:
            return [self.normals, self.radii, self.origins]
        return [self.normals, self.radii]

    def check(self):
        norms = np.linalg.norm(self.normals, axis=1)
        if not np.all(np.isfinite(self.normals)) or not np.all(np.isfinite(self.radii)):
            raise FloatingPointError("constraint parameters became non-finite")
        if np.any(norms <= NORM_EPS):
            raise FloatingPointError("constraint normal collapsed to zero")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "normals": self.normals.tolist(),
            "radii": self.radii.tolist(),
            "origins": self.origins.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstraintSet":
        return cls(data["normals"], data["radii"], data["origins"], data["mode"])


def to_matrix_form(cs: ConstraintSet) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, b)`` with ``A[k] = a_k`` and ``b[k] = r_k - a_k . o_k``."""
    A = cs.normals.copy()
    b = cs.radii - np.einsum("kn,kn->k", cs.normals, cs.origins)
    return A, b


def pull_back_gradients(cs: ConstraintSet, dA, db) -> list[np.ndarray]:
    """Chain rule through ``b = r - a . o``.

    Returns gradients aligned with :meth:`ConstraintSet.parameters`.
    """
    dA = np.asarray(dA, dtype=float).reshape(cs.normals.shape)
    db = np.asarray(db, dtype=float).reshape(cs.radii.shape)
    d_normals = dA - db[:, None] * cs.origins
    d_radii = db.copy()
    if cs.mode == Parametrization.LEARNABLE_ORIGINS:
        return [d_normals, d_radii, -db[:, None] * cs.normals]
    return [d_normals, d_radii]


def random_unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    while np.any(norms < 1e-12):
        bad = norms[:, 0] < 1e-12
        v[bad] = rng.standard_normal((bad.sum(), n))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / norms


def random_init(
    n: int,
    m: int,
    mode: Parametrization | str = Parametrization.LEARNABLE_ORIGINS,
    rng: np.random.Generator | None = None,
) -> ConstraintSet:
    """Random unit normals, origins in the centre subcube [-0.25, 0.25]^n, radius 0.2.

    Direct modes pin the origin; their radius is chosen so that the initial
    ``(A, b)`` has the same distribution as in the learnable-origins mode.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    mode = Parametrization(mode)
    rng = np.random.default_rng() if rng is None else rng
    normals = random_unit_vectors(rng, m, n)
    origins = rng.uniform(-0.25, 0.25, size=(m, n))
    radii = np.full(m, INIT_RADIUS)
    pinned = fixed_origin(mode, n)
    if pinned is not None:
        b = radii - np.einsum("kn,kn->k", normals, origins)
        origins = np.tile(pinned, (m, 1))
        radii = b + normals @ pinned
    return ConstraintSet(normals, radii, origins, mode)
