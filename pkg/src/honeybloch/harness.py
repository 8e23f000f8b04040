"""Experiment drivers: scaling study, transport regimes, Lipschitz sweep.

Each driver builds its own supercell from a :class:`RunConfig`, runs the
evolution backends from :mod:`.schrodinger`, and returns a frozen report
carrying full provenance (config hash, potential hash, grid sizes, dt).
Report writers at the bottom emit the CSV/JSON artifacts the command line
uses; all CSV output is formatted with %.17g so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .bloch import (
    assemble_hamiltonian,
    effective_mass_tensor,
    eigenvalues_banded,
    group_velocity,
    plane_wave_basis,
    solve_bands,
)
from .dirac_env import EnvelopePair, apply_step
from .dirac_point import DiracPointData, detect
from .errors import ConfigError, DegeneracyError, NumericalError
from .lattice import DualBasis, LatticeBasis, honeycomb_basis, reduce_to_bz, vertex_K
from .potential import (
    THREE_COSINE_ROWS,
    FourierPotential,
    format_coeff_rows,
    parse_coeff_rows,
    potential_from_rows,
)
from .schrodinger import (
    Supercell,
    WavePacket,
    _fiber_window_ops,
    build_wavepacket,
    fiber_mass,
    grid_norm,
    packet_moments,
    sample_envelopes,
    split_step_evolve,
    synthesize_mode,
)

SAMPLES_PER_RUN = 32
ENVELOPE_PRESETS = ("gaussian", "vortex")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Parsed experiment configuration plus the raw text it came from."""

    a: float = 1.0
    eps: float = 1.0
    rows: tuple = tuple(THREE_COSINE_ROWS)
    M: int = 12
    p: int = 12
    n1: int = 42
    n2: int = 42
    dt: float = 4e-3
    kind: str = "scaling"
    deltas: tuple = (0.5, 0.25, 0.125)
    rho: float = 1.0
    eps1: float = 1.0
    envelope: str = "gaussian"
    width: float = 2.0
    seed: int = 0
    t_final: float | None = None
    t_cap: float | None = None
    tau_final: float = 0.5
    ktilde: str = "K/2"
    band: int = 1
    grid: int = 30
    npairs: int = 2000
    bands: int = 8
    text: str = ""

    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def basis_pair(self) -> tuple[LatticeBasis, DualBasis]:
        return honeycomb_basis(self.a)

    def potential(self) -> FourierPotential:
        return potential_from_rows(self.eps, self.rows)


def default_config() -> RunConfig:
    cfg = RunConfig()
    return dataclasses.replace(cfg, text=render_config(cfg))


def render_config(cfg: RunConfig) -> str:
    """Canonical INI text for a RunConfig, re-parseable by parse_config."""
    cp = configparser.ConfigParser()
    cp["lattice"] = {"a": repr(cfg.a)}
    cp["potential"] = {
        "eps": repr(cfg.eps),
        "coefficients": "\n" + format_coeff_rows(cfg.rows),
    }
    cp["discretization"] = {
        "M": str(cfg.M),
        "p": str(cfg.p),
        "n1": str(cfg.n1),
        "n2": str(cfg.n2),
        "dt": repr(cfg.dt),
    }
    exp = {
        "kind": cfg.kind,
        "deltas": ", ".join(repr(d) for d in cfg.deltas),
        "rho": repr(cfg.rho),
        "eps1": repr(cfg.eps1),
        "envelope": cfg.envelope,
        "width": repr(cfg.width),
        "seed": str(cfg.seed),
        "tau_final": repr(cfg.tau_final),
        "ktilde": cfg.ktilde,
        "band": str(cfg.band),
        "grid": str(cfg.grid),
        "npairs": str(cfg.npairs),
        "bands": str(cfg.bands),
    }
    if cfg.t_final is not None:
        exp["t_final"] = repr(cfg.t_final)
    if cfg.t_cap is not None:
        exp["t_cap"] = repr(cfg.t_cap)
    cp["experiment"] = exp
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(path) -> RunConfig:
    """Read an INI experiment file; unknown keys raise, absent ones default."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    known = {
        "lattice": {"a"},
        "potential": {"eps", "coefficients"},
        "discretization": {"m", "p", "n1", "n2", "dt"},
        "experiment": {
            "kind", "deltas", "rho", "eps1", "envelope", "width", "seed",
            "t_final", "t_cap", "tau_final", "ktilde", "band", "grid",
            "npairs", "bands",
        },
    }
    for section in cp.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ConfigError(
                f"unknown keys {sorted(extra)} in [{section}] of {path}"
            )

    base = RunConfig()
    kw: dict = {"text": text}
    try:
        if cp.has_option("lattice", "a"):
            kw["a"] = cp.getfloat("lattice", "a")
        if cp.has_option("potential", "eps"):
            kw["eps"] = cp.getfloat("potential", "eps")
        if cp.has_option("potential", "coefficients"):
            kw["rows"] = tuple(parse_coeff_rows(cp.get("potential", "coefficients")))
        for name, key in (("M", "m"), ("p", "p"), ("n1", "n1"), ("n2", "n2")):
            if cp.has_option("discretization", key):
                kw[name] = cp.getint("discretization", key)
        if cp.has_option("discretization", "dt"):
            kw["dt"] = cp.getfloat("discretization", "dt")
        exp = cp["experiment"] if cp.has_section("experiment") else {}
        if "kind" in exp:
            kw["kind"] = exp["kind"].strip()
        if "deltas" in exp:
            kw["deltas"] = tuple(float(tok) for tok in exp["deltas"].split(","))
        for name in ("rho", "eps1", "width", "t_final", "t_cap", "tau_final"):
            if name in exp:
                kw[name] = float(exp[name])
        for name in ("seed", "band", "grid", "npairs", "bands"):
            if name in exp:
                kw[name] = int(exp[name])
        if "envelope" in exp:
            kw["envelope"] = exp["envelope"].strip()
        if "ktilde" in exp:
            kw["ktilde"] = exp["ktilde"].strip()
    except ValueError as exc:
        raise ConfigError(f"bad value in config {path}: {exc}") from exc

    cfg = dataclasses.replace(base, **kw)
    if cfg.envelope not in ENVELOPE_PRESETS:
        raise ConfigError(
            f"unknown envelope preset {cfg.envelope!r}; choose from {ENVELOPE_PRESETS}"
        )
    if not (cfg.p > 0 and cfg.M > 0 and cfg.n1 > 0 and cfg.n2 > 0):
        raise ConfigError("discretization sizes must be positive")
    if cfg.dt <= 0:
        raise ConfigError("dt must be positive")
    if cfg.width <= 0:
        raise ConfigError("envelope width must be positive")
    return cfg


def resolve_ktilde(token: str, dual: DualBasis) -> np.ndarray:
    """Quasi-momentum from a config token: Gamma, K, K/2, M, or 'f1,f2'
    fractional coordinates in the dual basis."""
    t = token.strip().lower()
    K = vertex_K(dual)[0].k
    if t in ("gamma", "g", "0"):
        return np.zeros(2)
    if t == "k":
        return K.copy()
    if t == "k/2":
        return K / 2.0
    if t == "m":
        return 0.5 * dual.k1
    try:
        f1, f2 = (float(tok) for tok in token.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse quasi-momentum token {token!r}") from None
    return f1 * dual.k1 + f2 * dual.k2


def preset_callables(preset: str, width: float):
    """Closed-form envelope pair for a named preset, matching make_envelope."""
    if preset not in ENVELOPE_PRESETS:
        raise ConfigError(f"unknown envelope preset {preset!r}")
    w = float(width)

    def bump(X, Y):
        return np.exp(-(X ** 2 + Y ** 2) / (2.0 * w ** 2))

    if preset == "gaussian":
        return bump, lambda X, Y: np.zeros_like(X)
    return bump, lambda X, Y: (X + 1j * Y) * bump(X, Y) / (2.0 * w)


# ---------------------------------------------------------------------------
# effective dynamics error


@dataclass(frozen=True)
class EtaNorms:
    """L2 and first-derivative norms of the ansatz defect."""

    absolute: float
    relative: float
    grad_absolute: tuple
    h1_relative: float


def effective_dynamics_error(
    packet: WavePacket,
    env_T: EnvelopePair,
    dp: DiracPointData,
    delta: float,
    t: float,
) -> EtaNorms:
    """Defect of the two-mode ansatz against an evolved field.

    ``packet`` holds the true field at physical time t; ``env_T`` must be the
    envelope pair already advanced to slow time T = delta * t with the same
    Dirac velocity as ``dp``.  The defect is

        eta = exp(i mu* t) psi(t) - delta * sum_j alpha_j(delta(x - xc)) Phi_j(x),

    reported in L2 absolutely, relative to the conserved packet norm, and
    through spectral first derivatives.
    """
    lam = dp.lambda_sharp
    if hasattr(env_T, "lambda_sharp"):
        # closed-form callable pairs carry no velocity provenance; grid pairs do
        if abs(env_T.lambda_sharp - lam) > 1e-10 * (1.0 + abs(lam)):
            raise ConfigError(
                "envelope was propagated with a different Dirac velocity than "
                "the detection supplying Phi_1, Phi_2"
            )
    mu0 = packet.meta.get("mu_star")
    if mu0 is not None and abs(mu0 - dp.mu_star) > 1e-12 * (1.0 + abs(dp.mu_star)):
        raise ConfigError("packet was built from a different Dirac point than dp")
    if abs(packet.delta - delta) > 1e-15:
        raise ConfigError(
            f"packet carries delta={packet.delta} but the error is requested "
            f"at delta={delta}"
        )
    cell = packet.cell
    a1, a2, _, _ = sample_envelopes(env_T, cell, delta)
    basis = plane_wave_basis(dp.M)
    K = (cell.dual.k1 - cell.dual.k2) / 3.0
    phi1 = synthesize_mode(cell, dp.phi1, basis, K)
    phi2 = synthesize_mode(cell, dp.phi2, basis, K)
    ansatz = delta * (a1 * phi1 + a2 * phi2)
    if t == 0.0:
        eta = packet.psi - ansatz
    else:
        eta = np.exp(1j * dp.mu_star * t) * packet.psi - ansatz
    n0 = grid_norm(packet.psi, cell)
    if n0 == 0.0:
        raise ConfigError("cannot normalize against a zero packet")
    absolute = grid_norm(eta, cell)
    gx, gy = cell.wavevectors()
    hat = np.fft.fft2(eta)
    g1 = grid_norm(np.fft.ifft2(1j * gx * hat), cell)
    g2 = grid_norm(np.fft.ifft2(1j * gy * hat), cell)
    h1 = float(np.sqrt(absolute ** 2 + g1 ** 2 + g2 ** 2))
    return EtaNorms(
        absolute=absolute,
        relative=absolute / n0,
        grad_absolute=(g1, g2),
        h1_relative=h1 / n0,
    )


# ---------------------------------------------------------------------------
# scaling study


@dataclass(frozen=True)
class ScalingRow:
    delta: float
    n1: int
    n2: int
    t_horizon: float
    t_final: float
    capped: bool
    err_t0: float
    sup_abs: float
    sup_rel: float
    runtime_s: float
    samples: tuple  # ((t, rel), ...)


@dataclass(frozen=True)
class SimulationReport:
    kind: str
    config_hash: str
    potential_hash: str
    M: int
    p: int
    dt: float
    rho: float
    eps1: float
    rows: tuple
    tau_star: float | None
    passed: bool
    diagnostics: str

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _round_up_multiple(x: float, m: int) -> int:
    return int(np.ceil(x / m)) * m


def _scaling_cells(deltas, cfg: RunConfig):
    """Cell counts per delta: the configured counts belong to the largest
    delta and grow inversely, kept on multiples of 6 so the vertex fiber
    stays admissible."""
    d0 = deltas[0]
    out = []
    for d in deltas:
        f = d0 / d
        out.append((_round_up_multiple(cfg.n1 * f, 6), _round_up_multiple(cfg.n2 * f, 6)))
    return out


def scaling_study(deltas, rho, eps1, config: RunConfig) -> SimulationReport:
    """Measure the ansatz defect across a halving sequence of delta.

    For each delta the packet is marched to the horizon
    t_final = rho * delta**(-2 + eps1), optionally capped by config.t_cap
    (the cap is recorded in the row), and the relative defect is sampled at
    SAMPLES_PER_RUN logarithmically spaced times.  The verdict asks for
    strictly decreasing sup errors and a positive fitted decay exponent.
    """
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    if not deltas:
        raise ConfigError("need at least one delta")
    for a, b in zip(deltas, deltas[1:]):
        if abs(b - a / 2.0) > 1e-9 * a:
            raise ConfigError(
                f"deltas must halve consecutively, got {a} followed by {b}"
            )
    lat, dual = config.basis_pair()
    V = config.potential()
    dp = detect(V, lat, dual, M=config.M)
    a1f, a2f = preset_callables(config.envelope, config.width)
    rows = []
    for (n1, n2), delta in zip(_scaling_cells(deltas, config), deltas):
        start = time.time()
        t_horizon = rho * delta ** (-2.0 + eps1)
        t_final = t_horizon
        capped = False
        if config.t_cap is not None and t_final > config.t_cap:
            t_final = config.t_cap
            capped = True
        cell = Supercell(lat, dual, n1, n2, config.p)
        pk = build_wavepacket((a1f, a2f), dp, delta, cell)
        n0 = grid_norm(pk.psi, cell)
        basis = plane_wave_basis(dp.M)
        K = vertex_K(dual)[0].k
        phi1 = synthesize_mode(cell, dp.phi1, basis, K)
        phi2 = synthesize_mode(cell, dp.phi2, basis, K)
        a1s, a2s, _, _ = sample_envelopes((a1f, a2f), cell, delta)
        # t = 0 defect: same arithmetic as the packet build, so exactly zero
        err_t0 = grid_norm(pk.psi - delta * (a1s * phi1 + a2s * phi2), cell) / n0
        gX, gY = cell.natural_wavevectors()
        Xi1, Xi2 = gX / delta, gY / delta
        h10 = np.fft.fft2(a1s.astype(complex))
        h20 = np.fft.fft2(a2s.astype(complex))
        times = np.geomspace(t_final / SAMPLES_PER_RUN, t_final, SAMPLES_PER_RUN)
        psi = pk.psi
        tprev = 0.0
        samples = []
        sup_abs = 0.0
        for ts in times:
            res = split_step_evolve(psi, cell, V, ts - tprev, config.dt)
            psi = res.psi
            tprev = ts
            b1, b2 = apply_step(h10, h20, Xi1, Xi2, dp.lambda_sharp, delta * ts)
            ansatz = delta * (np.fft.ifft2(b1) * phi1 + np.fft.ifft2(b2) * phi2)
            err = grid_norm(np.exp(1j * dp.mu_star * ts) * psi - ansatz, cell)
            sup_abs = max(sup_abs, err)
            samples.append((float(ts), float(err / n0)))
        rows.append(
            ScalingRow(
                delta=delta,
                n1=n1,
                n2=n2,
                t_horizon=t_horizon,
                t_final=float(t_final),
                capped=capped,
                err_t0=float(err_t0),
                sup_abs=float(sup_abs),
                sup_rel=float(sup_abs / n0),
                runtime_s=time.time() - start,
                samples=tuple(samples),
            )
        )

    sups = [r.sup_rel for r in rows]
    tau_star = None
    if len(rows) >= 3:
        slope = np.polyfit(np.log(np.array(deltas)), np.log(np.array(sups)), 1)[0]
        tau_star = float(slope)
    monotone = all(b < a for a, b in zip(sups, sups[1:]))
    if len(rows) < 3:
        passed = False
        diagnostics = "fewer than 3 deltas: exponent not fitted, no verdict"
    elif not monotone:
        passed = False
        diagnostics = (
            "relative errors not strictly decreasing: "
            + ", ".join(f"{r.delta}:{r.sup_rel:.4f}" for r in rows)
            + "; suspect supercell too small or dt too large"
        )
    elif tau_star <= 0:
        passed = False
        diagnostics = f"fitted exponent {tau_star:.4f} is not positive"
    else:
        passed = True
        diagnostics = "ok"
    return SimulationReport(
        kind="scaling",
        config_hash=config.config_hash(),
        potential_hash=V.content_hash(),
        M=config.M,
        p=config.p,
        dt=config.dt,
        rho=float(rho),
        eps1=float(eps1),
        rows=tuple(rows),
        tau_star=tau_star,
        passed=passed,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# single-band transport experiments


def _commensurate_denominator(ktilde, dual: DualBasis, limit: int = 720) -> int:
    B = np.column_stack([dual.k1, dual.k2])
    frac = np.linalg.solve(B, np.asarray(ktilde, dtype=float))
    for n in range(1, limit + 1):
        if np.max(np.abs(n * frac - np.rint(n * frac))) < 1e-9:
            return n
    raise ConfigError(
        f"quasi-momentum {ktilde} is not commensurate with any cell count "
        f"up to {limit}"
    )


def _transport_cell(ktilde, delta, width, lat, dual, p) -> Supercell:
    n0 = _commensurate_denominator(ktilde, dual)
    n0 = int(np.lcm(n0, 6))
    n = _round_up_multiple(max(11.0 * width / delta, 12.0), n0)
    return Supercell(lat, dual, n, n, p)


def _band_mode(V, ktilde, b, cell, dual):
    """Eigenpair of band b at ktilde, synthesized on the cell.

    The expansion box is the largest symmetric one inside the fiber window,
    which keeps the synthesized mode an exact grid-model eigenfunction."""
    Mfit = (cell.p - 2) // 2
    basis = plane_wave_basis(Mfit)
    H = assemble_hamiltonian(V, ktilde, basis, dual)
    pairs = solve_bands(H, b + 1, k=np.asarray(ktilde, dtype=float))
    gap_lo = abs(pairs[b - 1].mu - pairs[b - 2].mu) if b >= 2 else np.inf
    gap_hi = abs(pairs[b].mu - pairs[b - 1].mu)
    if min(gap_lo, gap_hi) < 1e-6:
        raise DegeneracyError(
            f"band {b} is degenerate at the requested quasi-momentum"
        )
    mode = pairs[b - 1]
    fld = synthesize_mode(cell, mode.coeffs, basis, ktilde)
    return mode.mu, fld


def _single_band_packet(a1f, mode_field, delta, cell, exterior_tol=1e-8):
    a1, _, X1, X2 = sample_envelopes((a1f, lambda X, Y: np.zeros_like(X)), cell, delta)
    total = np.sum(np.abs(a1) ** 2)
    if total == 0.0:
        raise ConfigError("envelope is identically zero")
    area = cell.area
    r_in = delta * 0.5 * min(
        area / np.linalg.norm(cell.n1 * cell.lat.v1),
        area / np.linalg.norm(cell.n2 * cell.lat.v2),
    )
    r = np.hypot(X1, X2)
    outside = np.sum(np.abs(a1[r > r_in]) ** 2)
    if outside > exterior_tol * total:
        raise ConfigError(
            f"envelope keeps {outside / total:.2e} of its mass outside the "
            "supercell's inscribed circle; increase the cell count"
        )
    return delta * a1 * mode_field


def _band_contamination(psi, cell, V, b) -> float:
    """Mass fraction outside window band b, over the occupied fibers."""
    nn1, nn2 = cell.shape
    C = np.fft.fft2(psi) / (nn1 * nn2)
    fm = fiber_mass(psi, cell)
    total = fm.sum()
    occupied = np.argwhere(fm > 1e-8 * total)
    tt1, tt2, Vmat = _fiber_window_ops(cell, V)
    B = np.column_stack([cell.dual.k1, cell.dual.k2])
    p = cell.p
    on_band = 0.0
    mass = 0.0
    for f1, f2 in occupied:
        kf = (f1 / cell.n1) * cell.dual.k1 + (f2 / cell.n2) * cell.dual.k2
        kr = reduce_to_bz(kf, cell.dual).k
        d = np.rint(np.linalg.solve(B, kf - kr)).astype(int)
        m1 = (tt1 + d[0] + p // 2) % p - p // 2
        m2 = (tt2 + d[1] + p // 2) % p - p // 2
        gx = kr[0] + m1 * cell.dual.k1[0] + m2 * cell.dual.k2[0]
        gy = kr[1] + m1 * cell.dual.k1[1] + m2 * cell.dual.k2[1]
        mu, U = np.linalg.eigh(Vmat + np.diag(gx ** 2 + gy ** 2))
        u = C[f1 :: cell.n1, f2 :: cell.n2].reshape(p * p)
        mass += float(np.vdot(u, u).real)
        on_band += abs(np.vdot(U[:, b - 1], u)) ** 2
    if mass == 0.0:
        raise NumericalError("packet has no mass on any fiber")
    return 1.0 - on_band / mass


def _min_image_displacement(d, cell) -> np.ndarray:
    e1 = cell.n1 * cell.lat.v1
    e2 = cell.n2 * cell.lat.v2
    best = None
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            cand = d + i * e1 + j * e2
            if best is None or cand @ cand < best @ best:
                best = cand
    return best


@dataclass(frozen=True)
class BallisticReport:
    kind: str
    config_hash: str
    potential_hash: str
    M: int
    p: int
    dt: float
    delta: float
    band: int
    ktilde: tuple
    n1: int
    n2: int
    t_final: float
    velocity_measured: tuple
    velocity_predicted: tuple
    rel_deviation: float | None
    extremum: bool
    drift_fraction: float
    width_change_rel: float
    contamination: float
    trajectory: tuple  # ((t, x1, x2), ...)
    passed: bool
    runtime_s: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def ballistic_experiment(
    V: FourierPotential,
    ktilde,
    b: int,
    delta: float,
    t_final: float,
    config: RunConfig | None = None,
) -> BallisticReport:
    """Transport check: a single-band packet's center of mass moves at the
    group velocity of its band.

    At an extremum (tiny group velocity) the velocity ratio is meaningless,
    so the report switches to the center drift as a fraction of the envelope
    width.  Mass leaking off the carrier band beyond 1% aborts the run.
    """
    cfg = config if config is not None else default_config()
    start = time.time()
    lat, dual = cfg.basis_pair()
    kt = np.asarray(ktilde, dtype=float)
    cell = _transport_cell(kt, delta, cfg.width, lat, dual, cfg.p)
    a1f, _ = preset_callables("gaussian", cfg.width)
    _, mode = _band_mode(V, kt, b, cell, dual)
    psi0 = _single_band_packet(a1f, mode, delta, cell)
    contamination = _band_contamination(psi0, cell, V, b)
    if contamination > 0.01:
        raise NumericalError(
            f"packet puts {contamination:.2%} of its mass off band {b}; "
            "the single-band transport picture does not apply"
        )
    vel_pred = group_velocity(V, kt, b, cfg.M, dual)
    nsamp = 13
    times = np.linspace(0.0, t_final, nsamp)
    psi = psi0
    tprev = 0.0
    centers = []
    widths = []
    for ts in times:
        if ts > tprev:
            psi = split_step_evolve(psi, cell, V, ts - tprev, cfg.dt).psi
            tprev = ts
        c, cov = packet_moments(psi, cell)
        centers.append(c)
        widths.append(float(np.sqrt(np.trace(cov))))
    # unwrap the torus trajectory: each consecutive displacement is taken in
    # its minimal image, valid while the drift per sample stays under half a
    # supercell diameter
    unwrapped = [centers[0]]
    for prev, c in zip(centers, centers[1:]):
        unwrapped.append(unwrapped[-1] + _min_image_displacement(c - prev, cell))
    traj = np.array(unwrapped)
    A = np.column_stack([times, np.ones_like(times)])
    sol, *_ = np.linalg.lstsq(A, traj, rcond=None)
    vel_meas = sol[0]
    speed = float(np.linalg.norm(vel_pred))
    env_width_x = cfg.width / delta
    drift = float(np.linalg.norm(traj[-1] - traj[0]))
    extremum = speed * t_final < 0.05 * env_width_x
    rel_dev = None if extremum else float(np.linalg.norm(vel_meas - vel_pred) / speed)
    width_change = float(max(abs(w - widths[0]) for w in widths) / widths[0])
    if extremum:
        passed = drift < 0.02 * env_width_x and width_change < 0.05
    else:
        passed = rel_dev < 0.02
    return BallisticReport(
        kind="ballistic",
        config_hash=cfg.config_hash(),
        potential_hash=V.content_hash(),
        M=cfg.M,
        p=cfg.p,
        dt=cfg.dt,
        delta=float(delta),
        band=int(b),
        ktilde=(float(kt[0]), float(kt[1])),
        n1=cell.n1,
        n2=cell.n2,
        t_final=float(t_final),
        velocity_measured=(float(vel_meas[0]), float(vel_meas[1])),
        velocity_predicted=(float(vel_pred[0]), float(vel_pred[1])),
        rel_deviation=rel_dev,
        extremum=extremum,
        drift_fraction=float(drift / env_width_x),
        width_change_rel=width_change,
        contamination=float(contamination),
        trajectory=tuple(
            (float(t), float(x[0]), float(x[1])) for t, x in zip(times, traj)
        ),
        passed=bool(passed),
        runtime_s=time.time() - start,
    )


@dataclass(frozen=True)
class EffectiveMassReport:
    kind: str
    config_hash: str
    potential_hash: str
    M: int
    p: int
    dt: float
    delta: float
    band: int
    ktilde: tuple
    n1: int
    n2: int
    tau_final: float
    t_final: float
    tensor: tuple
    isotropy: float
    eccentricity: float
    rel_l2_deviation: float
    variance_growth_true: float
    variance_growth_pred: float
    variance_ratio: float
    passed: bool
    runtime_s: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def effective_mass_experiment(
    V: FourierPotential,
    ktilde,
    b: int,
    delta: float,
    tau_final: float,
    config: RunConfig | None = None,
) -> EffectiveMassReport:
    """Band-edge packet against the homogenized constant-coefficient flow.

    The envelope prediction applies the spectral multiplier
    exp(-i (Xi . A Xi) tau) with A half the dispersion Hessian and
    tau = delta^2 t; the packet is compared in L2 and through its second
    moments after the fast evolution to t = tau_final / delta^2.
    """
    cfg = config if config is not None else default_config()
    start = time.time()
    lat, dual = cfg.basis_pair()
    kt = np.asarray(ktilde, dtype=float)
    em = effective_mass_tensor(V, kt, b, cfg.M, dual)
    if not em.critical:
        raise ConfigError(
            f"gradient {em.gradient} is not negligible: ktilde is not a band "
            "edge, so the effective-mass reduction does not apply"
        )
    A = em.tensor
    scale = float(np.abs(A).max())
    if abs(np.linalg.det(A)) < 1e-8 * scale ** 2:
        raise DegeneracyError(
            "dispersion Hessian is degenerate here; pick a different band edge"
        )
    iso = float(abs(A[0, 1]) / np.trace(A))
    cell = _transport_cell(kt, delta, cfg.width, lat, dual, cfg.p)
    a1f, _ = preset_callables("gaussian", cfg.width)
    mu_t, mode = _band_mode(V, kt, b, cell, dual)
    psi0 = _single_band_packet(a1f, mode, delta, cell)
    t_final = tau_final / delta ** 2
    res = split_step_evolve(psi0, cell, V, t_final, cfg.dt)
    psi_t = res.psi

    a1s, _, _, _ = sample_envelopes(
        (a1f, lambda X, Y: np.zeros_like(X)), cell, delta
    )
    gX, gY = cell.natural_wavevectors()
    Xi1, Xi2 = gX / delta, gY / delta
    quad = A[0, 0] * Xi1 ** 2 + 2.0 * A[0, 1] * Xi1 * Xi2 + A[1, 1] * Xi2 ** 2
    hat = np.fft.fft2(a1s.astype(complex))
    a_pred = np.fft.ifft2(np.exp(-1j * quad * tau_final) * hat)
    ansatz0 = delta * a1s * mode
    ansatz_t = delta * np.exp(-1j * mu_t * t_final) * a_pred * mode
    n0 = grid_norm(psi0, cell)
    rel_dev = grid_norm(psi_t - ansatz_t, cell) / n0

    _, cov_true0 = packet_moments(psi0, cell)
    _, cov_true1 = packet_moments(psi_t, cell)
    _, cov_pred1 = packet_moments(ansatz_t, cell)
    _, cov_pred0 = packet_moments(ansatz0, cell)
    gr_true = float(np.trace(cov_true1) - np.trace(cov_true0))
    gr_pred = float(np.trace(cov_pred1) - np.trace(cov_pred0))
    ratio = gr_true / gr_pred if gr_pred != 0 else np.inf
    # spread ellipse shape: at an isotropic edge the evolved cloud stays round
    ew = np.linalg.eigvalsh(cov_true1)
    ecc = float((ew[1] - ew[0]) / (ew[1] + ew[0]))
    passed = abs(ratio - 1.0) < 0.05 and iso < 1e-6
    return EffectiveMassReport(
        kind="effmass",
        config_hash=cfg.config_hash(),
        potential_hash=V.content_hash(),
        M=cfg.M,
        p=cfg.p,
        dt=cfg.dt,
        delta=float(delta),
        band=int(b),
        ktilde=(float(kt[0]), float(kt[1])),
        n1=cell.n1,
        n2=cell.n2,
        tau_final=float(tau_final),
        t_final=float(t_final),
        tensor=tuple(map(tuple, A.tolist())),
        isotropy=iso,
        eccentricity=ecc,
        rel_l2_deviation=float(rel_dev),
        variance_growth_true=gr_true,
        variance_growth_pred=gr_pred,
        variance_ratio=float(ratio),
        passed=bool(passed),
        runtime_s=time.time() - start,
    )


# ---------------------------------------------------------------------------
# Lipschitz sweep


@dataclass(frozen=True)
class LipschitzReport:
    kind: str
    potential_hash: str
    M: int
    npairs: int
    bands: int
    cap: float
    floor: float
    seed: int
    max_quotient: float
    per_band_max: tuple
    crosscheck_max: float | None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def lipschitz_check(
    V: FourierPotential,
    M: int,
    npairs: int,
    bands: int,
    dual: DualBasis | None = None,
    seed: int = 0,
    cap_frac: float = 0.25,
    floor: float = 1e-8,
) -> LipschitzReport:
    """Empirical relative Lipschitz quotient of the low bands.

    Random base points are drawn uniformly from the Brillouin zone; partners
    sit at log-uniform distances between the absolute floor (which excludes
    the 0/0 coincident pair) and cap_frac of the dual scale.  For the free
    potential the eigenvalues have a closed form, which is compared bin by
    bin as a cross-check.
    """
    if dual is None:
        _, dual = honeycomb_basis(1.0)
    if npairs < 1 or bands < 1:
        raise ConfigError("npairs and bands must be positive")
    q = dual.q
    cap = cap_frac * q
    if not 0.0 < floor < cap:
        raise ConfigError("radius floor must sit below the pair-distance cap")
    basis = plane_wave_basis(M)
    rng = np.random.default_rng(seed)
    free = len(V.coeffs) == 0
    kin_idx = None
    if free:
        kin_idx = np.array(
            [(m1, m2) for m1, m2 in basis.indices], dtype=float
        )
    per_band = np.zeros(bands)
    crosscheck = 0.0 if free else None
    for _ in range(npairs):
        u = rng.uniform(-0.5, 0.5, size=2)
        k1 = reduce_to_bz(u[0] * dual.k1 + u[1] * dual.k2, dual).k
        r = np.exp(rng.uniform(np.log(floor), np.log(cap)))
        th = rng.uniform(0.0, 2.0 * np.pi)
        k2 = k1 + r * np.array([np.cos(th), np.sin(th)])
        mu1 = eigenvalues_banded(V, k1, basis, dual, bands)
        mu2 = eigenvalues_banded(V, k2, basis, dual, bands)
        if free:
            for kk, mm in ((k1, mu1), (k2, mu2)):
                pts = kk[None, :] + kin_idx @ np.stack([dual.k1, dual.k2])
                exact = np.sort(np.einsum("ij,ij->i", pts, pts))[:bands]
                crosscheck = max(
                    crosscheck, float(np.max(np.abs(exact - mm) / (1.0 + exact)))
                )
        qt = np.abs(mu1 - mu2) / ((mu1 + 1.0) * r)
        per_band = np.maximum(per_band, qt)
    return LipschitzReport(
        kind="lipschitz",
        potential_hash=V.content_hash(),
        M=M,
        npairs=npairs,
        bands=bands,
        cap=float(cap),
        floor=float(floor),
        seed=seed,
        max_quotient=float(per_band.max()),
        per_band_max=tuple(float(x) for x in per_band),
        crosscheck_max=crosscheck,
    )


# ---------------------------------------------------------------------------
# artifact writers


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_scaling_csv(report: SimulationReport, path) -> None:
    lines = ["delta,t_final,sup_rel_err"]
    for r in report.rows:
        lines.append(",".join([_fmt(r.delta), _fmt(r.t_final), _fmt(r.sup_rel)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_bands_csv(ks: np.ndarray, mus: np.ndarray, path) -> None:
    """ks (npts, 2), mus (npts, nbands) -> rows kx,ky,b,mu with b 1-based."""
    lines = ["kx,ky,b,mu"]
    for i in range(ks.shape[0]):
        for b in range(mus.shape[1]):
            lines.append(
                ",".join([_fmt(ks[i, 0]), _fmt(ks[i, 1]), str(b + 1), _fmt(mus[i, b])])
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report_json(report, path) -> None:
    d = report.as_dict() if hasattr(report, "as_dict") else dict(report)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
