"""Honeycomb lattice potentials as dual-lattice Fourier data.

A potential is stored as a finite map from integer dual indices (m1, m2) to
complex amplitudes.  The admissible class is real, even, and invariant under
the 2*pi/3 rotation; `symmetry_report` checks all three and potentials that
fail are accepted only for negative testing.  Real-space fields are derived
views, the coefficients are the single source of truth.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .lattice import DualBasis, LatticeBasis, index_rotation

Coeffs = dict[tuple[int, int], complex]


def _rotate_index(m: tuple[int, int]) -> tuple[int, int]:
    # linear part of the dual-index rotation (no vertex offset)
    mp, shift = index_rotation(m)
    return (mp[0] - shift[0], mp[1] - shift[1])


@dataclass(frozen=True)
class FourierPotential:
    coeffs: Coeffs = field(default_factory=dict)
    cutoff: int = 0

    def coefficient(self, m: tuple[int, int]) -> complex:
        return self.coeffs.get((int(m[0]), int(m[1])), 0.0 + 0.0j)

    def max_abs(self) -> float:
        if not self.coeffs:
            return 0.0
        return max(abs(v) for v in self.coeffs.values())

    def content_hash(self) -> str:
        """Stable hex digest of the coefficient table, for cache keys."""
        items = sorted((m, complex(v)) for m, v in self.coeffs.items())
        text = ";".join(f"{m1},{m2},{v.real:.17g},{v.imag:.17g}" for (m1, m2), v in items)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def potential_from_coeffs(coeffs: Coeffs) -> FourierPotential:
    clean = {(int(m1), int(m2)): complex(v) for (m1, m2), v in coeffs.items() if v != 0}
    cutoff = max((max(abs(m1), abs(m2)) for m1, m2 in clean), default=0)
    return FourierPotential(coeffs=clean, cutoff=cutoff)


def three_cosine_potential(eps: float, dual: DualBasis | None = None) -> FourierPotential:
    """Minimal admissible trigonometric potential with nonzero (1,1) coefficient.

    V(x) = eps * [cos(k1.x) + cos(k2.x) + cos((k1+k2).x)].  The three index
    pairs +/-(1,0), +/-(0,1), +/-(1,1) form one rotation orbit and its
    negative, so all three symmetries hold by construction.
    """
    if eps == 0 or not np.isfinite(eps):
        raise ValueError("amplitude eps must be nonzero and finite")
    half = 0.5 * float(eps)
    coeffs = {}
    for m in [(1, 0), (0, 1), (1, 1)]:
        coeffs[m] = half
        coeffs[(-m[0], -m[1])] = half
    return potential_from_coeffs(coeffs)


@dataclass(frozen=True)
class SymmetryReport:
    real: bool
    even: bool
    r_invariant: bool
    residual_real: float
    residual_even: float
    residual_r: float
    tol: float

    @property
    def admissible(self) -> bool:
        return self.real and self.even and self.r_invariant


def symmetry_report(V: FourierPotential, tol: float = 1e-12) -> SymmetryReport:
    """Residuals of the reality, evenness, and rotation-invariance conditions."""
    keys = set(V.coeffs)
    keys |= {(-m1, -m2) for m1, m2 in keys}
    keys |= {_rotate_index(m) for m in keys}
    r_real = r_even = r_rot = 0.0
    for m in keys:
        vm = V.coefficient(m)
        vneg = V.coefficient((-m[0], -m[1]))
        vrot = V.coefficient(_rotate_index(m))
        r_real = max(r_real, abs(vneg - np.conj(vm)))
        r_even = max(r_even, abs(vneg - vm))
        r_rot = max(r_rot, abs(vrot - vm))
    return SymmetryReport(
        real=r_real < tol,
        even=r_even < tol,
        r_invariant=r_rot < tol,
        residual_real=r_real,
        residual_even=r_even,
        residual_r=r_rot,
        tol=tol,
    )


def v11_coefficient(V: FourierPotential, lat: LatticeBasis) -> complex:
    """Cell integral of e^{-i(k1+k2).x} V(x), i.e. area * V_(1,1).

    Its sign (for real admissible V) selects which pair of dispersion
    surfaces touches conically at the zone vertex.
    """
    return lat.cell_area * V.coefficient((1, 1))


def evaluate_grid(
    V: FourierPotential, lat: LatticeBasis, dual: DualBasis, N: int
) -> np.ndarray:
    """Sample V on the N x N fractional grid x = (i/N) v1 + (j/N) v2.

    By biorthogonality the phase at a grid point is 2*pi*(m1*i + m2*j)/N,
    so the field is an inverse DFT of the coefficient table.
    """
    if N < 2 * V.cutoff + 2:
        raise ValueError(f"grid N={N} aliases coefficients with cutoff {V.cutoff}")
    C = np.zeros((N, N), dtype=complex)
    for (m1, m2), v in V.coeffs.items():
        C[m1 % N, m2 % N] += v
    field_c = np.fft.ifft2(C) * N * N
    resid = np.max(np.abs(field_c.imag)) if V.coeffs else 0.0
    if resid > 1e-12 * max(1.0, V.max_abs()):
        raise ValueError(f"field has imaginary residue {resid:.3e}; potential not real")
    return field_c.real


def evaluate_points(V: FourierPotential, dual: DualBasis, pts: np.ndarray) -> np.ndarray:
    """Evaluate V at arbitrary points (n, 2) by direct coefficient summation."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    for (m1, m2), v in V.coeffs.items():
        out += v * np.exp(1j * pts @ (m1 * dual.k1 + m2 * dual.k2))
    return out


# ---------------------------------------------------------------------------
# text config format: [potential] section with eps and whitespace rows
# ---------------------------------------------------------------------------

def parse_coeff_rows(text: str) -> list[tuple[int, int, float, float]]:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"coefficient row needs 'm1 m2 re im', got {line!r}")
        rows.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
    return rows


def format_coeff_rows(rows) -> str:
    return "\n".join(f"{m1} {m2} {re:.17g} {im:.17g}" for m1, m2, re, im in rows)


def potential_from_rows(eps: float, rows) -> FourierPotential:
    coeffs: Coeffs = {}
    for m1, m2, re, im in rows:
        coeffs[(m1, m2)] = coeffs.get((m1, m2), 0.0) + eps * complex(re, im)
    return potential_from_coeffs(coeffs)


def read_potential_config(path) -> tuple[float, FourierPotential]:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if "potential" not in cp:
        raise ValueError(f"{path}: missing [potential] section")
    sec = cp["potential"]
    eps = float(sec.get("eps", "1.0"))
    rows = parse_coeff_rows(sec.get("coefficients", ""))
    return eps, potential_from_rows(eps, rows)


def write_potential_config(path, eps: float, rows) -> None:
    cp = configparser.ConfigParser()
    cp["potential"] = {
        "eps": f"{eps:.17g}",
        "coefficients": "\n" + format_coeff_rows(rows),
    }
    buf = io.StringIO()
    cp.write(buf)
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


THREE_COSINE_ROWS = [
    (1, 0, 0.5, 0.0),
    (0, 1, 0.5, 0.0),
    (1, 1, 0.5, 0.0),
    (-1, 0, 0.5, 0.0),
    (0, -1, 0.5, 0.0),
    (-1, -1, 0.5, 0.0),
]
