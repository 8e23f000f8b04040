"""Honeycomb lattice geometry.

Primitive and dual bases, Brillouin-zone reduction, the 2*pi/3 rotation,
and the permutation that rotation induces on dual-lattice indices.

Conventions: the primitive vectors are v1 = a(sqrt3/2, 1/2) and
v2 = a(sqrt3/2, -1/2); the dual vectors satisfy k_i . v_j = 2*pi*delta_ij,
which gives k1 = q(1/2, sqrt3/2), k2 = q(1/2, -sqrt3/2) with q = 4*pi/(a*sqrt3).
The zone vertex is K = (k1 - k2)/3 and its partner is K' = -K.  Quasi-momenta
are reduced into the K-centered hexagon (the vertex-centered copy of the
Brillouin zone), which keeps the vertex an interior point of the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT3 = float(np.sqrt(3.0))

# Clockwise rotation by 2*pi/3.  Orthogonal, det = +1, order 3.
ROT = np.array([[-0.5, SQRT3 / 2.0], [-SQRT3 / 2.0, -0.5]])


@dataclass(frozen=True)
class LatticeBasis:
    """Primitive basis of the triangular period lattice."""

    a: float
    v1: np.ndarray
    v2: np.ndarray

    @property
    def cell_area(self) -> float:
        return abs(self.v1[0] * self.v2[1] - self.v1[1] * self.v2[0])


@dataclass(frozen=True)
class DualBasis:
    """Dual basis, scaled so k_i . v_j = 2*pi*delta_ij."""

    q: float
    k1: np.ndarray
    k2: np.ndarray

    def vector(self, m1: int, m2: int) -> np.ndarray:
        return m1 * self.k1 + m2 * self.k2


@dataclass(frozen=True)
class QuasiMomentum:
    """A point of the momentum plane; `reduced` marks membership in the
    K-centered fundamental hexagon."""

    k: np.ndarray
    reduced: bool = False


def as_kvec(k) -> np.ndarray:
    """Accept a QuasiMomentum or a bare 2-vector."""
    return np.asarray(getattr(k, "k", k), dtype=float)


def honeycomb_basis(a: float) -> tuple[LatticeBasis, DualBasis]:
    """Build the primitive and dual bases for lattice constant a."""
    if not (np.isfinite(a) and a > 0):
        raise ValueError(f"lattice constant must be positive, got {a!r}")
    a = float(a)
    v1 = a * np.array([SQRT3 / 2.0, 0.5])
    v2 = a * np.array([SQRT3 / 2.0, -0.5])
    q = 4.0 * np.pi / (a * SQRT3)
    k1 = q * np.array([0.5, SQRT3 / 2.0])
    k2 = q * np.array([0.5, -SQRT3 / 2.0])
    return LatticeBasis(a=a, v1=v1, v2=v2), DualBasis(q=q, k1=k1, k2=k2)


def vertex_K(dual: DualBasis) -> tuple[QuasiMomentum, QuasiMomentum]:
    """The two inequivalent zone vertices K and K' = -K."""
    K = (dual.k1 - dual.k2) / 3.0
    return QuasiMomentum(K, reduced=True), QuasiMomentum(-K, reduced=False)


def rotate_R(v) -> np.ndarray:
    """Apply the clockwise 2*pi/3 rotation."""
    return ROT @ as_kvec(v)


def reduce_to_bz(k, dual: DualBasis) -> QuasiMomentum:
    """Translate k by a dual-lattice vector into the K-centered hexagon.

    The hexagon is the Voronoi cell of the dual lattice translated to K, so
    reduction subtracts the dual-lattice point nearest to k - K.  Boundary
    ties are broken toward the lexicographically smaller reduced vector,
    which makes the map deterministic and idempotent.
    """
    kv = as_kvec(k)
    if not np.all(np.isfinite(kv)):
        raise ValueError("quasi-momentum must be finite")
    K = (dual.k1 - dual.k2) / 3.0
    u = kv - K
    B = np.column_stack([dual.k1, dual.k2])
    frac = np.linalg.solve(B, u)
    n0 = np.rint(frac).astype(int)
    best = None
    best_n2 = np.inf
    # Rounding in an oblique basis can miss the nearest point by one step
    # per coordinate, so scan a small window of candidates.
    tol_n2 = 1e-9 * dual.q**2
    tol_lex = 1e-12 * dual.q
    for d1 in (-1, 0, 1):
        for d2 in (-1, 0, 1):
            g = (n0[0] + d1) * dual.k1 + (n0[1] + d2) * dual.k2
            w = u - g
            n2 = w[0] * w[0] + w[1] * w[1]
            if n2 < best_n2 - tol_n2:
                best, best_n2 = w, n2
            elif n2 < best_n2 + tol_n2:
                r_new, r_old = K + w, K + best
                if (r_new[0] < r_old[0] - tol_lex) or (
                    abs(r_new[0] - r_old[0]) <= tol_lex and r_new[1] < r_old[1] - tol_lex
                ):
                    best, best_n2 = w, n2
    return QuasiMomentum(K + best, reduced=True)


@lru_cache(maxsize=1)
def _rotation_affine_map() -> tuple[np.ndarray, np.ndarray]:
    """Integer affine map (A, b) with R(K + m.k) = K + (A m + b).k.

    Derived numerically from the unit-scale basis; scale drops out because
    both K and the dual vectors carry the same factor of q.
    """
    _, dual = honeycomb_basis(1.0)
    B = np.column_stack([dual.k1, dual.k2])
    K = (dual.k1 - dual.k2) / 3.0
    cols = np.linalg.solve(B, ROT @ B)
    b = np.linalg.solve(B, ROT @ K - K)
    A_int = np.rint(cols).astype(int)
    b_int = np.rint(b).astype(int)
    if np.max(np.abs(cols - A_int)) > 1e-12 or np.max(np.abs(b - b_int)) > 1e-12:
        raise RuntimeError("rotation does not act integrally on the dual basis")
    return A_int, b_int


def index_rotation(m: tuple[int, int]) -> tuple[tuple[int, int], tuple[int, int]]:
    """Index image of the rotation on K-pseudo-periodic plane waves.

    Returns (m', shift) where R(K + m1 k1 + m2 k2) = K + m1' k1 + m2' k2 and
    shift is the affine offset coming from R K = K + k2; m' - shift recovers
    the purely linear action used for cell-periodic (potential) indices.
    """
    A, b = _rotation_affine_map()
    m1, m2 = int(m[0]), int(m[1])
    mp = (A[0, 0] * m1 + A[0, 1] * m2 + b[0], A[1, 0] * m1 + A[1, 1] * m2 + b[1])
    return mp, (int(b[0]), int(b[1]))
