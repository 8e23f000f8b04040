"""Plane-wave Galerkin discretization of the Floquet-Bloch eigenproblem.

For a quasi-momentum k the operator -(grad + ik)^2 + V acts on cell-periodic
functions; in the dual plane-wave basis indexed by m = (m1, m2) with
|m1|, |m2| <= M its matrix is diagonal kinetic energy |m1 k1 + m2 k2 + k|^2
plus the convolution by the potential coefficients.  For real honeycomb
potentials the matrix is real symmetric and banded, which the solvers here
exploit.  The module also builds the rotation action on coefficients and the
character projectors used to split degenerate levels at the zone vertex.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, NumericalError, SymmetryViolation
from .lattice import DualBasis, QuasiMomentum, as_kvec, index_rotation
from .potential import FourierPotential

TAU = complex(np.exp(2j * np.pi / 3.0))
SIGMA_VALUES = {"1": 1.0 + 0.0j, "tau": TAU, "taubar": np.conj(TAU)}
SIGMA_ORDER = ("1", "tau", "taubar")

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Truncated dual-index set, row-major by m1 then m2."""

    M: int
    indices: np.ndarray  # (D, 2) int

    @property
    def D(self) -> int:
        return len(self.indices)

    @property
    def L(self) -> int:
        return 2 * self.M + 1

    def index_of(self, m1: int, m2: int) -> int:
        M = self.M
        if abs(m1) > M or abs(m2) > M:
            raise IndexError(f"({m1},{m2}) outside cutoff {M}")
        return (m1 + M) * self.L + (m2 + M)


@lru_cache(maxsize=None)
def plane_wave_basis(M: int) -> PlaneWaveBasis:
    if M < 1:
        raise ValueError("cutoff M must be >= 1")
    r = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    idx = np.column_stack([m1.ravel(), m2.ravel()])
    idx.setflags(write=False)
    return PlaneWaveBasis(M=M, indices=idx)


@dataclass(frozen=True)
class BlochEigenpair:
    mu: float
    coeffs: np.ndarray  # (D,)
    k: np.ndarray
    b: int  # 1-based band index


def _kinetic_diagonal(k, basis: PlaneWaveBasis, dual: DualBasis) -> np.ndarray:
    pts = basis.indices @ np.stack([dual.k1, dual.k2]) + as_kvec(k)
    return np.einsum("ij,ij->i", pts, pts)


def _potential_is_real(V: FourierPotential) -> bool:
    return all(complex(v).imag == 0.0 for v in V.coeffs.values())


def assemble_hamiltonian(
    V: FourierPotential, k, basis: PlaneWaveBasis, dual: DualBasis
) -> np.ndarray:
    """Dense matrix of the Bloch fiber operator at quasi-momentum k."""
    if basis.M < V.cutoff:
        raise ValueError(f"basis cutoff {basis.M} < potential cutoff {V.cutoff}")
    D, L, M = basis.D, basis.L, basis.M
    dtype = float if _potential_is_real(V) else complex
    H = np.zeros((D, D), dtype=dtype)
    d = np.arange(D)
    H[d, d] = _kinetic_diagonal(k, basis, dual)
    mj = basis.indices
    for (dm1, dm2), v in V.coeffs.items():
        # H[i, j] = V_{m_i - m_j}; flat offset of dm is dm1*L + dm2
        mask = (np.abs(mj[:, 0] + dm1) <= M) & (np.abs(mj[:, 1] + dm2) <= M)
        j = np.nonzero(mask)[0]
        H[j + dm1 * L + dm2, j] += v if dtype is complex else complex(v).real
    return H


def solve_bands(H: np.ndarray, nbands: int, k=None) -> list[BlochEigenpair]:
    """Lowest nbands eigenpairs in ascending order, residual-checked."""
    D = H.shape[0]
    if not 1 <= nbands <= D:
        raise ValueError(f"nbands={nbands} outside [1, {D}]")
    try:
        w, P = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed on {D}x{D} fiber matrix: {exc}") from exc
    w, P = w[:nbands], P[:, :nbands]
    resid = np.linalg.norm(H @ P - P * w, axis=0)
    if np.max(resid) > RESIDUAL_TOL:
        raise NumericalError(
            f"eigenpair residual {np.max(resid):.3e} exceeds {RESIDUAL_TOL:.1e} "
            f"(D={D}, spread={w[-1] - w[0]:.3e})"
        )
    kv = as_kvec(k) if k is not None else np.zeros(2)
    return [BlochEigenpair(mu=float(w[i]), coeffs=P[:, i], k=kv, b=i + 1) for i in range(nbands)]


def eigenvalues_banded(
    V: FourierPotential, k, basis: PlaneWaveBasis, dual: DualBasis, nbands: int
) -> np.ndarray:
    """Lowest nbands eigenvalues via the banded structure of the fiber matrix.

    The flat offset of a coefficient at dm is dm1*L + dm2, so the bandwidth
    is cutoff*(L+1).  Only the upper triangle is stored; Hermiticity of the
    assembled operator is implied by the admissible coefficient symmetry.
    """
    if basis.M < V.cutoff:
        raise ValueError(f"basis cutoff {basis.M} < potential cutoff {V.cutoff}")
    D, L, M = basis.D, basis.L, basis.M
    u = V.cutoff * (L + 1) if V.coeffs else 0
    dtype = float if _potential_is_real(V) else complex
    ab = np.zeros((u + 1, D), dtype=dtype)
    ab[u, :] = _kinetic_diagonal(k, basis, dual)
    mj = basis.indices
    for (dm1, dm2), v in V.coeffs.items():
        off = dm1 * L + dm2
        if off > 0:
            continue  # upper triangle only; partner coefficient covers it
        mask = (np.abs(mj[:, 0] + dm1) <= M) & (np.abs(mj[:, 1] + dm2) <= M)
        j = np.nonzero(mask)[0]
        val = v if dtype is complex else complex(v).real
        if off == 0:
            ab[u, j] += val
        else:
            ab[u + off, j] += val
    try:
        w = scipy.linalg.eig_banded(
            ab, lower=False, eigvals_only=True, select="i", select_range=(0, nbands - 1)
        )
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"banded eigensolver failed (D={D}, u={u}): {exc}") from exc
    return w


# ---------------------------------------------------------------------------
# band surfaces over k-grids
# ---------------------------------------------------------------------------

@dataclass
class BandStructure:
    kpoints: np.ndarray  # (n, 2)
    mu: np.ndarray  # (n, nbands)
    M: int
    vectors: list[np.ndarray] | None = None  # per point (D, nbands)

    def to_csv(self, path) -> None:
        lines = ["kx,ky,b,mu"]
        for i, (kx, ky) in enumerate(self.kpoints):
            for b in range(self.mu.shape[1]):
                lines.append(f"{kx:.17g},{ky:.17g},{b + 1},{self.mu[i, b]:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")


def grid_hash(kgrid: np.ndarray, nbands: int, M: int, pot_hash: str) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(np.asarray(kgrid, dtype=float)).tobytes())
    h.update(f"|{nbands}|{M}|{pot_hash}".encode())
    return h.hexdigest()[:16]


def band_grid(
    V: FourierPotential,
    kgrid: np.ndarray,
    nbands: int,
    M: int,
    dual: DualBasis,
    with_vectors: bool = False,
    cache_dir=None,
) -> BandStructure:
    """Solve the fiber problem on each grid point.

    Points are independent; the reduction is by grid index, so results do not
    depend on evaluation order.  Eigenvalue-only sweeps use the banded solver.
    A cache keyed by (potential hash, M, grid hash) short-circuits repeat sweeps.
    """
    kgrid = np.atleast_2d(np.asarray(kgrid, dtype=float))
    basis = plane_wave_basis(M)
    cache_file = None
    if cache_dir is not None and not with_vectors:
        key = grid_hash(kgrid, nbands, M, V.content_hash())
        cache_file = Path(cache_dir) / f"bands_{key}.npz"
        if cache_file.exists():
            data = np.load(cache_file)
            if data["mu"].shape == (len(kgrid), nbands):
                return BandStructure(kpoints=kgrid, mu=data["mu"], M=M)
    mu = np.empty((len(kgrid), nbands))
    vectors = [] if with_vectors else None
    for i, k in enumerate(kgrid):
        if with_vectors:
            pairs = solve_bands(assemble_hamiltonian(V, k, basis, dual), nbands, k=k)
            mu[i] = [p.mu for p in pairs]
            vectors.append(np.column_stack([p.coeffs for p in pairs]))
        else:
            mu[i] = eigenvalues_banded(V, k, basis, dual, nbands)
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        np.savez(cache_file, mu=mu)
    return BandStructure(kpoints=kgrid, mu=mu, M=M, vectors=vectors)


# ---------------------------------------------------------------------------
# rotation action and symmetry labels at the vertex
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _rotation_targets(M: int) -> np.ndarray:
    """Flat index of the rotated dual index, wrapped mod L into the box.

    The affine index map has no fixed points and order 3; reducing it mod
    L = 2M+1 keeps it a bijection of the box with order exactly 3, at the
    price of wrapping a rim of indices whose coefficients are negligible for
    the low-lying states this is applied to.
    """
    basis = plane_wave_basis(M)
    A = np.array([[0, -1], [1, -1]])
    (_, _), shift = index_rotation((0, 0))
    mp = basis.indices @ A.T + np.asarray(shift)
    L = basis.L
    mp = ((mp + M) % L) - M
    return np.ascontiguousarray((mp[:, 0] + M) * L + (mp[:, 1] + M))


def apply_rotation(c: np.ndarray, basis: PlaneWaveBasis) -> np.ndarray:
    """Coefficient action of composing with the counter-clockwise rotation:
    the coefficient at m moves to the rotated index."""
    tgt = _rotation_targets(basis.M)
    out = np.empty_like(c)
    out[tgt, ...] = c
    return out


def project_sigma(c: np.ndarray, basis: PlaneWaveBasis, label: str) -> np.ndarray:
    """Character projector onto the sector where the rotation acts as sigma."""
    sigma = SIGMA_VALUES[label]
    c = np.asarray(c, dtype=complex)
    rc = apply_rotation(c, basis)
    rrc = apply_rotation(rc, basis)
    return (c + np.conj(sigma) * rc + np.conj(sigma) ** 2 * rrc) / 3.0


def fix_gauge(c: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    i = int(np.argmax(np.abs(c)))
    z = c[i]
    if abs(z) == 0:
        return c
    return c * (np.conj(z) / abs(z))


def cluster_eigenvalues(mus, tol: float = 1e-8) -> list[list[int]]:
    """Group consecutive sorted eigenvalues within tol*(1+|mu|)."""
    clusters: list[list[int]] = []
    for i, mu in enumerate(mus):
        if clusters and abs(mu - mus[clusters[-1][-1]]) < tol * (1.0 + abs(mu)):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def symmetry_decompose_at_K(
    pairs: list[BlochEigenpair],
    basis: PlaneWaveBasis,
    cluster_tol: float = 1e-8,
    purity_tol: float = 1e-8,
) -> tuple[list[BlochEigenpair], list[str]]:
    """Assign a rotation character to each eigenvector at the vertex.

    Degenerate clusters are re-diagonalized inside the character sectors
    first, because a generic eigensolver returns arbitrary mixtures there.
    """
    mus = [p.mu for p in pairs]
    out_pairs = list(pairs)
    labels = [""] * len(pairs)
    for cluster in cluster_eigenvalues(mus, tol=cluster_tol):
        if len(cluster) == 1:
            i = cluster[0]
            v = np.asarray(pairs[i].coeffs, dtype=complex)
            norms = {lab: np.linalg.norm(project_sigma(v, basis, lab)) for lab in SIGMA_ORDER}
            lab = max(norms, key=norms.get)
            if norms[lab] < 1.0 - purity_tol:
                raise SymmetryViolation(
                    f"band {pairs[i].b}: impure character, |P v| = {norms[lab]:.12f}"
                )
            labels[i] = lab
            continue
        cols = np.column_stack([np.asarray(pairs[i].coeffs, dtype=complex) for i in cluster])
        found: list[tuple[np.ndarray, str]] = []
        for lab in SIGMA_ORDER:
            proj = project_sigma(cols, basis, lab)
            U, s, _ = np.linalg.svd(proj, full_matrices=False)
            for j, sv in enumerate(s):
                if sv > 0.5:  # singular values of projected orthonormal sets are near 0 or 1
                    found.append((fix_gauge(U[:, j]), lab))
        if len(found) != len(cluster):
            raise SymmetryViolation(
                f"cluster at mu={mus[cluster[0]]:.6f}: sector ranks sum to "
                f"{len(found)}, expected {len(cluster)}"
            )
        for i, (vec, lab) in zip(cluster, found):
            p = pairs[i]
            out_pairs[i] = BlochEigenpair(mu=p.mu, coeffs=vec, k=p.k, b=p.b)
            labels[i] = lab
    return out_pairs, labels


# ---------------------------------------------------------------------------
# dispersion derivatives
# ---------------------------------------------------------------------------

def _band_value(V, k, basis, dual, b: int) -> float:
    return float(eigenvalues_banded(V, k, basis, dual, b)[b - 1])


def group_velocity(
    V: FourierPotential, k, b: int, M: int, dual: DualBasis, h: float | None = None
) -> np.ndarray:
    """Central-difference gradient of the band b dispersion at k.

    Requires the band to be simple across the stencil; near a conical
    degeneracy the one-sided slopes disagree and the result is meaningless.
    """
    basis = plane_wave_basis(M)
    kv = as_kvec(k)
    if h is None:
        h = 1e-4 * dual.q

    def grad(hh: float) -> np.ndarray:
        g = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = hh
            g[i] = (_band_value(V, kv + e, basis, dual, b) - _band_value(V, kv - e, basis, dual, b)) / (2 * hh)
        return g

    g1, g2 = grad(h), grad(h / 2)
    nb = b + 1
    w = eigenvalues_banded(V, kv, basis, dual, nb)
    gap = w[b] - w[b - 1]
    if b > 1:
        gap = min(gap, w[b - 1] - w[b - 2])
    slope = max(float(np.linalg.norm(g2)), 1.0)
    if gap <= 10.0 * h * slope:
        raise DegeneracyError(
            f"band {b} gap {gap:.3e} within finite-difference window at k={kv}; "
            "use the conical slope fit near vertex degeneracies"
        )
    if np.max(np.abs(g1 - g2)) > 1e-5 * max(float(np.linalg.norm(g2)), 1.0):
        raise NumericalError(
            f"gradient step-halving mismatch {np.max(np.abs(g1 - g2)):.3e} at k={kv}"
        )
    return g2


@dataclass(frozen=True)
class EffectiveMass:
    tensor: np.ndarray  # (2,2), half the dispersion Hessian
    gradient: np.ndarray
    critical: bool
    h: float


def effective_mass_tensor(
    V: FourierPotential,
    k,
    b: int,
    M: int,
    dual: DualBasis,
    h: float | None = None,
    crit_tol: float = 1e-5,
) -> EffectiveMass:
    """Half the Hessian of the band dispersion, by central second differences."""
    basis = plane_wave_basis(M)
    kv = as_kvec(k)
    if h is None:
        h = 1e-3 * dual.q

    def mu(dk1: float, dk2: float) -> float:
        return _band_value(V, kv + np.array([dk1, dk2]), basis, dual, b)

    m00 = mu(0, 0)
    mp0, mm0 = mu(h, 0), mu(-h, 0)
    m0p, m0m = mu(0, h), mu(0, -h)
    mpp, mpm = mu(h, h), mu(h, -h)
    mmp, mmm = mu(-h, h), mu(-h, -h)
    grad = np.array([(mp0 - mm0) / (2 * h), (m0p - m0m) / (2 * h)])
    h11 = (mp0 - 2 * m00 + mm0) / h**2
    h22 = (m0p - 2 * m00 + m0m) / h**2
    h12 = (mpp - mpm - mmp + mmm) / (4 * h**2)
    hess = np.array([[h11, h12], [h12, h22]])
    return EffectiveMass(
        tensor=0.5 * hess,
        gradient=grad,
        critical=bool(np.linalg.norm(grad) < crit_tol),
        h=h,
    )
