"""Vertex degeneracy detection and the conical-velocity coefficient.

`detect` certifies the two-fold crossing at the zone vertex: exactly two
eigenvalues coincide, their eigenvectors split as one tau and one taubar
state under the rotation character, and no trivial-character state shares the
level.  The distinguished pair (phi1, phi2) is gauge-fixed and tied together
by conjugate inversion.  The velocity coefficient is then estimated three
independent ways: a Fourier-space inner product (authoritative), a fit of the
cone opening from eigenvalue rings, and a coefficient-series sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bloch import (
    BlochEigenpair,
    PlaneWaveBasis,
    assemble_hamiltonian,
    cluster_eigenvalues,
    eigenvalues_banded,
    fix_gauge,
    plane_wave_basis,
    project_sigma,
    solve_bands,
    symmetry_decompose_at_K,
)
from .errors import ConeFitFailure, NotADiracPoint, NumericalError, SymmetryViolation
from .lattice import DualBasis, LatticeBasis, honeycomb_basis, vertex_K
from .potential import FourierPotential, symmetry_report

# Ring radii in units of q.  The 2-ring quadratic fit has a slope bias of
# order (cubic coefficient)*r1*r2, so the small end keeps the fit inside the
# 1e-3 agreement tolerance against the inner-product estimator.
DEFAULT_RADII_FRAC = (0.00075, 0.0015, 0.003, 0.006, 0.012)
AGREEMENT_RTOL = 1e-3


@lru_cache(maxsize=None)
def _conjugate_inversion_index_map(M: int) -> np.ndarray:
    """Index map iota of conjugation composed with x -> -x.

    Both operations flip the sign of the plane-wave phase, so the composite
    fixes every index; derived numerically so a convention change would be
    caught instead of silently miscomputing phi2.
    """
    basis = plane_wave_basis(M)
    _, dual = honeycomb_basis(1.0)
    K = (dual.k1 - dual.k2) / 3.0
    B = np.column_stack([dual.k1, dual.k2])
    kvecs = basis.indices @ np.stack([dual.k1, dual.k2]) + K
    # conj(e^{i w.(-x)}) has wave vector +w; solve w = K + iota.k for iota
    frac = np.linalg.solve(B, (kvecs - K).T).T
    iota = np.rint(frac).astype(int)
    if np.max(np.abs(frac - iota)) > 1e-9:
        raise RuntimeError("conjugate-inversion index map is not integral")
    L = basis.L
    return np.ascontiguousarray((iota[:, 0] + M) * L + (iota[:, 1] + M))


def conjugate_inversion(c: np.ndarray, basis: PlaneWaveBasis) -> np.ndarray:
    tgt = _conjugate_inversion_index_map(basis.M)
    out = np.empty(basis.D, dtype=complex)
    out[tgt] = np.conj(np.asarray(c, dtype=complex))
    return out


@dataclass
class ConeFit:
    slope: float
    quad: float
    per_angle: np.ndarray
    samples: np.ndarray  # columns: r, theta, E_plus, E_minus
    C: float
    radii: np.ndarray
    nangles: int

    @property
    def isotropy_spread(self) -> float:
        return float((self.per_angle.max() - self.per_angle.min()) / self.slope)


@dataclass
class DiracPointData:
    mu_star: float
    b1: int
    phi1: np.ndarray
    phi2: np.ndarray
    lambda_sharp: complex
    estimates: dict
    cone: ConeFit
    gap: float
    tol_used: float
    M: int
    potential_hash: str

    @property
    def cone_residuals(self) -> np.ndarray:
        return self.cone.samples

    def summary_dict(self) -> dict:
        return {
            "mu_star": self.mu_star,
            "b1": self.b1,
            "gap": self.gap,
            "tol_used": self.tol_used,
            "M": self.M,
            "potential_hash": self.potential_hash,
            "lambda_sharp": {"re": self.lambda_sharp.real, "im": self.lambda_sharp.imag},
            "estimates": {
                "inner_product": {
                    "re": self.estimates["inner_product"].real,
                    "im": self.estimates["inner_product"].imag,
                    "abs": abs(self.estimates["inner_product"]),
                },
                "cone_fit": self.estimates["cone_fit"],
                "fourier_sum": {
                    "re": self.estimates["fourier_sum"].real,
                    "im": self.estimates["fourier_sum"].imag,
                    "abs": abs(self.estimates["fourier_sum"]),
                },
            },
            "cone": {
                "slope": self.cone.slope,
                "quad": self.cone.quad,
                "isotropy_spread": self.cone.isotropy_spread,
                "C": self.cone.C,
                "radii": list(map(float, self.cone.radii)),
                "nangles": self.cone.nangles,
                "samples": [list(map(float, row)) for row in self.cone.samples],
            },
        }


def write_report(path, data: DiracPointData) -> None:
    Path(path).write_text(json.dumps(data.summary_dict(), indent=2, sort_keys=True) + "\n")


def lambda_sharp_inner_product(
    phi1: np.ndarray, phi2: np.ndarray, basis: PlaneWaveBasis, dual: DualBasis
) -> complex:
    """Velocity coefficient from the overlap of phi2 with the gradient of phi1.

    The x1 component defines lambda; the x2 component and the diagonal
    overlaps are structural identities of the tau/taubar pair and are used
    as built-in cross-checks.
    """
    K = vertex_K(dual)[0].k
    kvecs = basis.indices @ np.stack([dual.k1, dual.k2]) + K
    c = np.asarray(phi1, dtype=complex)
    d = np.asarray(phi2, dtype=complex)
    lam = 2.0 * np.sum(np.conj(d) * kvecs[:, 0] * c)
    cross = -2.0 * np.sum(np.conj(d) * kvecs[:, 1] * c)  # equals 2i<phi2, d2 phi1>
    if abs(cross - 1j * lam) > 1e-10 * (1.0 + abs(lam)):
        raise SymmetryViolation(
            f"direction cross-check failed: |{cross:.3e} - i*lambda| = {abs(cross - 1j * lam):.3e}"
        )
    for vec, name in ((c, "phi1"), (d, "phi2")):
        w = np.abs(vec) ** 2
        mom = w @ kvecs
        if np.max(np.abs(mom)) > 1e-10:
            raise SymmetryViolation(f"self gradient overlap of {name} is {mom}, expected 0")
    return complex(lam)


def lambda_sharp_fourier_sum(
    phi1: np.ndarray, basis: PlaneWaveBasis, dual: DualBasis, lat: LatticeBasis
) -> complex:
    """Coefficient-series estimate: 3*area * sum of ctilde(m)^2 (1,i).K^m.

    With the unit-normalized coefficients stored here the cell area cancels,
    leaving 3 * sum c(m)^2 (K^m_1 + i K^m_2) over the whole index box.
    """
    K = vertex_K(dual)[0].k
    kvecs = basis.indices @ np.stack([dual.k1, dual.k2]) + K
    c = np.asarray(phi1, dtype=complex)
    return complex(3.0 * np.sum(c * c * (kvecs[:, 0] + 1j * kvecs[:, 1])))


def cone_slope_fit(
    V: FourierPotential,
    b1: int,
    mu_star: float,
    M: int,
    dual: DualBasis,
    radii=None,
    nangles: int = 12,
) -> ConeFit:
    """Fit the opening slope of the conical crossing from eigenvalue rings.

    The two smallest rings feed a per-angle fit of mu_plus - mu_star against
    s*r + c*r^2; the pooled slope then normalizes the deviation measure
    E_pm = (mu_pm - mu_star)/(pm s r) - 1 for every sample.
    """
    K = vertex_K(dual)[0].k
    basis = plane_wave_basis(M)
    if radii is None:
        radii = dual.q * np.asarray(DEFAULT_RADII_FRAC)
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii[-1] > 0.05 * dual.q + 1e-12:
        raise ValueError(f"largest ring {radii[-1]:.3g} beyond cone-validity cap 0.05*q")
    thetas = np.linspace(0.0, 2 * np.pi, nangles, endpoint=False)
    mu_p = np.empty((len(radii), nangles))
    mu_m = np.empty((len(radii), nangles))
    for i, r in enumerate(radii):
        for j, th in enumerate(thetas):
            k = K + r * np.array([np.cos(th), np.sin(th)])
            w = eigenvalues_banded(V, k, basis, dual, b1 + 1)
            mu_m[i, j], mu_p[i, j] = w[b1 - 1], w[b1]
    fit_rows = radii[:2]
    per_angle = np.empty(nangles)
    quads = np.empty(nangles)
    for j in range(nangles):
        A = np.column_stack([fit_rows, fit_rows**2])
        y = mu_p[:2, j] - mu_star
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        per_angle[j], quads[j] = coef[0], coef[1]
    slope = float(per_angle.mean())
    if slope <= 0:
        raise ConeFitFailure(f"nonpositive fitted slope {slope:.3e}")
    model = slope * fit_rows[:, None] + quads[None, :] * fit_rows[:, None] ** 2
    fit_resid = np.max(np.abs((mu_p[:2] - mu_star) - model) / (slope * fit_rows[:, None]))
    if fit_resid > 0.1:
        raise ConeFitFailure(f"cone fit residual {fit_resid:.3f} exceeds 10%")
    samples = []
    for i, r in enumerate(radii):
        for j, th in enumerate(thetas):
            ep = (mu_p[i, j] - mu_star) / (slope * r) - 1.0
            em = (mu_m[i, j] - mu_star) / (-slope * r) - 1.0
            samples.append((r, th, ep, em))
    samples = np.array(samples)
    C = float(np.max(np.abs(samples[:, 2:4]) / samples[:, :1]))
    return ConeFit(
        slope=slope,
        quad=float(quads.mean()),
        per_angle=per_angle,
        samples=samples,
        C=C,
        radii=radii,
        nangles=nangles,
    )


def detect(
    V: FourierPotential,
    lat: LatticeBasis,
    dual: DualBasis,
    M: int = 12,
    tol: float | None = None,
) -> DiracPointData:
    """Certify the conical degeneracy at the vertex and extract its data."""
    rep = symmetry_report(V)
    if not rep.admissible:
        raise SymmetryViolation(
            f"potential fails admissibility: real={rep.real} even={rep.even} "
            f"r_invariant={rep.r_invariant}"
        )
    Kq = vertex_K(dual)[0]
    basis = plane_wave_basis(M)
    nbands = 8
    pairs = solve_bands(assemble_hamiltonian(V, Kq, basis, dual), nbands, k=Kq)
    mus = np.array([p.mu for p in pairs])

    def tol_at(mu: float) -> float:
        base = tol if tol is not None else 1e-7 * (1.0 + abs(mu))
        return base * (10.0 if M <= 8 else 1.0)  # coarser basis, looser match

    clusters = cluster_eigenvalues(list(mus), tol=1e-8)
    target = None
    for cl in clusters:
        if len(cl) >= 2 and abs(mus[cl[-1]] - mus[cl[0]]) < tol_at(mus[cl[0]]):
            target = cl
            break
    if target is None:
        gaps = np.diff(mus)
        raise NotADiracPoint(
            f"no degenerate pair at the vertex within tolerance; lowest gaps {gaps[:4]}"
        )
    if len(target) != 2:
        raise NotADiracPoint(
            f"vertex level at mu={mus[target[0]]:.9f} has multiplicity {len(target)}, need 2"
        )
    b1 = target[0] + 1
    mu_star = float(0.5 * (mus[target[0]] + mus[target[1]]))
    gap = float(abs(mus[target[1]] - mus[target[0]]))
    used_tol = tol_at(mu_star)
    neighbors = [mus[i] for i in (target[0] - 1, target[1] + 1) if 0 <= i < nbands]
    for mu_n in neighbors:
        if abs(mu_n - mu_star) < 1e3 * used_tol:
            raise NotADiracPoint(
                f"third level at distance {abs(mu_n - mu_star):.3e} < 1e3 * tol {used_tol:.3e}"
            )
    cluster_pairs = [pairs[i] for i in target]
    new_pairs, labels = symmetry_decompose_at_K(cluster_pairs, basis)
    if sorted(labels) != ["tau", "taubar"]:
        raise SymmetryViolation(
            f"vertex pair carries characters {labels}, need one tau and one taubar"
        )
    phi1 = fix_gauge(np.asarray(new_pairs[labels.index("tau")].coeffs, dtype=complex))
    phi2 = conjugate_inversion(phi1, basis)
    ortho = abs(np.vdot(phi1, phi2))
    if ortho > 1e-12:
        raise SymmetryViolation(f"<phi1, phi2> = {ortho:.3e}, expected 0")
    resid2 = np.linalg.norm(
        assemble_hamiltonian(V, Kq, basis, dual) @ phi2 - mu_star * phi2
    )
    if resid2 > 1e-8 * (1.0 + abs(mu_star)):
        raise NumericalError(f"phi2 eigen-residual {resid2:.3e}")
    lam = lambda_sharp_inner_product(phi1, phi2, basis, dual)
    if abs(lam) < 1e-8:
        raise NotADiracPoint(f"vanishing velocity coefficient |lambda| = {abs(lam):.3e}")
    # Ring radii scaled to the cone-validity radius: the fit bias grows like
    # (r / r_c)^2 with r_c = distance to the nearest spectator level over the
    # slope, so a fixed fraction of r_c keeps the bias below AGREEMENT_RTOL.
    delta3 = min(abs(mu_n - mu_star) for mu_n in neighbors)
    r_c = delta3 / abs(lam)
    r1 = max(0.006 * r_c, 1e-5 * dual.q)
    radii = r1 * 2.0 ** np.arange(5)
    radii = radii[radii <= 0.05 * dual.q]
    if len(radii) < 2:
        radii = np.array([0.025, 0.05]) * dual.q
    cone = cone_slope_fit(V, b1, mu_star, M, dual, radii=radii)
    fsum = lambda_sharp_fourier_sum(phi1, basis, dual, lat)
    if abs(abs(lam) - cone.slope) > AGREEMENT_RTOL * cone.slope:
        raise NumericalError(
            f"estimator disagreement: |inner|={abs(lam):.8f} cone={cone.slope:.8f}"
        )
    return DiracPointData(
        mu_star=mu_star,
        b1=b1,
        phi1=phi1,
        phi2=phi2,
        lambda_sharp=lam,
        estimates={"inner_product": lam, "cone_fit": cone.slope, "fourier_sum": fsum},
        cone=cone,
        gap=gap,
        tol_used=used_tol,
        M=M,
        potential_hash=V.content_hash(),
    )


@dataclass
class ExpansionResidual:
    kappa: np.ndarray
    alpha: complex
    a_plus: tuple[complex, float]  # (p1 component, real p2 component), upper state
    a_minus: tuple[complex, float]
    err_plus: float
    err_minus: float
    out_of_span: float


def eigenvector_expansion_residual(
    V: FourierPotential,
    data: DiracPointData,
    kappa,
    dual: DualBasis,
    M: int | None = None,
) -> ExpansionResidual:
    """Compare eigenvectors near the vertex against the leading pair mixture.

    The upper/lower states at K + kappa are projected on span{phi1, phi2};
    after fixing the free phase so the phi2 component is real (positive for
    the upper state, negative for the lower) the components must approach
    (alpha(kappa)/sqrt2, +-1/sqrt2) linearly in |kappa|.
    """
    M = data.M if M is None else M
    basis = plane_wave_basis(M)
    kv = np.asarray(kappa, dtype=float)
    r = float(np.linalg.norm(kv))
    if r == 0:
        raise ValueError("kappa must be nonzero")
    K = vertex_K(dual)[0].k
    k = K + kv
    pairs = solve_bands(assemble_hamiltonian(V, k, basis, dual), data.b1 + 1, k=k)
    lam = data.lambda_sharp
    alpha = (np.conj(lam) / abs(lam)) * (kv[0] + 1j * kv[1]) / r
    results = {}
    oos = 0.0
    for state, sign in (("plus", +1.0), ("minus", -1.0)):
        p = np.asarray(pairs[data.b1 - 1 + (sign > 0)].coeffs, dtype=complex)
        a1 = np.vdot(data.phi1, p)
        a2 = np.vdot(data.phi2, p)
        mass = abs(a1) ** 2 + abs(a2) ** 2
        if mass < 0.5:
            raise NumericalError(
                f"projection mass {mass:.3f} on the vertex pair; wrong band pairing"
            )
        oos = max(oos, 1.0 - mass)
        if abs(a2) == 0:
            raise NumericalError("vanishing phi2 component; cannot fix the phase")
        phase = sign * a2 / abs(a2)
        a1f = a1 * np.conj(phase)
        a2f = sign * abs(a2)
        err = max(abs(a1f - alpha / np.sqrt(2)), abs(a2f - sign / np.sqrt(2)))
        results[state] = (complex(a1f), float(a2f), float(err))
    return ExpansionResidual(
        kappa=kv,
        alpha=complex(alpha),
        a_plus=results["plus"][:2],
        a_minus=results["minus"][:2],
        err_plus=results["plus"][2],
        err_minus=results["minus"][2],
        out_of_span=float(oos),
    )
