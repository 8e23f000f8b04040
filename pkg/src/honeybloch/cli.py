"""Command-line entry point.

Every subcommand takes an INI config file (see harness.parse_config for the
schema) and an output directory, writes its CSV/JSON artifacts there, and
exits 0 on pass, 1 on an acceptance failure, 2 on usage or configuration
errors, 3 on numerical failures.  CSV content is deterministic for a given
config and seed; wall-clock timings only ever appear in the JSON reports.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import harness
from .bloch import band_grid
from .dirac_env import dirac_propagate, make_envelope
from .dirac_point import detect
from .errors import ConfigError
from .lattice import vertex_K

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _provenance(cfg: harness.RunConfig, V) -> dict:
    return {
        "config_hash": cfg.config_hash(),
        "potential_hash": V.content_hash(),
        "M": cfg.M,
        "p": cfg.p,
        "n1": cfg.n1,
        "n2": cfg.n2,
        "dt": cfg.dt,
    }


def _write_json(payload: dict, outdir: str, name: str) -> None:
    with open(os.path.join(outdir, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _bz_path(dual, npts: int) -> np.ndarray:
    """Gamma -> K -> M -> Gamma with npts samples per leg."""
    G = np.zeros(2)
    K = vertex_K(dual)[0].k
    Mpt = 0.5 * dual.k1
    legs = []
    for a, b in ((G, K), (K, Mpt), (Mpt, G)):
        s = np.linspace(0.0, 1.0, npts, endpoint=False)[:, None]
        legs.append(a + s * (b - a))
    legs.append(G[None, :])
    return np.vstack(legs)


def cmd_bands(cfg: harness.RunConfig, outdir: str) -> int:
    lat, dual = cfg.basis_pair()
    V = cfg.potential()
    ks = _bz_path(dual, cfg.grid)
    t0 = time.time()
    mus = band_grid(V, ks, cfg.bands, cfg.M, dual).mu
    harness.write_bands_csv(ks, mus, os.path.join(outdir, "bands.csv"))
    report = _provenance(cfg, V)
    report.update(
        kind="bands",
        npoints=int(ks.shape[0]),
        nbands=int(mus.shape[1]),
        mu_min=float(mus.min()),
        mu_max=float(mus.max()),
        runtime_s=time.time() - t0,
    )
    _write_json(report, outdir, "report.json")
    return EXIT_PASS


def cmd_dirac_point(cfg: harness.RunConfig, outdir: str) -> int:
    from .bloch import assemble_hamiltonian, plane_wave_basis

    lat, dual = cfg.basis_pair()
    V = cfg.potential()
    t0 = time.time()
    dp = detect(V, lat, dual, M=cfg.M)
    basis = plane_wave_basis(cfg.M)
    K = vertex_K(dual)[0]
    H = assemble_hamiltonian(V, K, basis, dual)
    residuals = [
        float(np.linalg.norm(H @ v - dp.mu_star * v)) for v in (dp.phi1, dp.phi2)
    ]
    payload = _provenance(cfg, V)
    payload.update(dp.summary_dict())
    payload.update(
        kind="dirac-point",
        residual_table=[
            {"mode": i + 1, "residual": r} for i, r in enumerate(residuals)
        ],
        runtime_s=time.time() - t0,
    )
    _write_json(payload, outdir, "dirac_point.json")
    _write_json(payload, outdir, "report.json")
    return EXIT_PASS


def cmd_dirac_evolve(cfg: harness.RunConfig, outdir: str) -> int:
    lat, dual = cfg.basis_pair()
    V = cfg.potential()
    t0 = time.time()
    dp = detect(V, lat, dual, M=cfg.M)
    npoints, length = 128, 16.0 * cfg.width
    env0 = make_envelope(npoints, length, dp.lambda_sharp, cfg.envelope, cfg.width)
    t_final = cfg.t_final if cfg.t_final is not None else 10.0
    dx2 = (length / npoints) ** 2
    h10 = np.abs(np.fft.fft2(env0.alpha1))
    h20 = np.abs(np.fft.fft2(env0.alpha2))
    dens0 = np.sqrt(h10 ** 2 + h20 ** 2)
    times = np.geomspace(t_final / harness.SAMPLES_PER_RUN, t_final,
                         harness.SAMPLES_PER_RUN)
    lines = ["t,l2_alpha1,l2_alpha2,conservation_defect"]
    worst = 0.0
    for ts in times:
        env = dirac_propagate(env0, float(ts))
        l1 = float(np.sqrt(np.sum(np.abs(env.alpha1) ** 2) * dx2))
        l2 = float(np.sqrt(np.sum(np.abs(env.alpha2) ** 2) * dx2))
        h1 = np.abs(np.fft.fft2(env.alpha1))
        h2 = np.abs(np.fft.fft2(env.alpha2))
        defect = float(np.max(np.abs(np.sqrt(h1 ** 2 + h2 ** 2) - dens0)))
        defect /= max(1.0, float(dens0.max()))
        worst = max(worst, defect)
        lines.append(",".join([
            harness._fmt(ts), harness._fmt(l1), harness._fmt(l2),
            harness._fmt(defect),
        ]))
    with open(os.path.join(outdir, "dirac_evolve.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    report = _provenance(cfg, V)
    report.update(
        kind="dirac-evolve",
        envelope=cfg.envelope,
        width=cfg.width,
        npoints=npoints,
        length=length,
        t_final=float(t_final),
        worst_conservation_defect=worst,
        runtime_s=time.time() - t0,
    )
    _write_json(report, outdir, "report.json")
    return EXIT_PASS if worst < 1e-10 else EXIT_FAIL


def cmd_evolve(cfg: harness.RunConfig, outdir: str) -> int:
    delta = cfg.deltas[0]
    run_cfg = cfg
    if cfg.t_final is not None:
        run_cfg = dataclasses.replace(cfg, t_cap=cfg.t_final)
    rep = harness.scaling_study([delta], cfg.rho, cfg.eps1, run_cfg)
    row = rep.rows[0]
    lines = ["t,rel_err"]
    for ts, rel in row.samples:
        lines.append(harness._fmt(ts) + "," + harness._fmt(rel))
    with open(os.path.join(outdir, "evolve.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    report = _provenance(cfg, cfg.potential())
    report.update(
        kind="evolve",
        delta=row.delta,
        cells=[row.n1, row.n2],
        t_horizon=row.t_horizon,
        t_final=row.t_final,
        capped=row.capped,
        err_t0=row.err_t0,
        sup_rel_err=row.sup_rel,
        runtime_s=row.runtime_s,
    )
    _write_json(report, outdir, "report.json")
    return EXIT_PASS


def cmd_validate(cfg: harness.RunConfig, outdir: str) -> int:
    rep = harness.scaling_study(cfg.deltas, cfg.rho, cfg.eps1, cfg)
    harness.write_scaling_csv(rep, os.path.join(outdir, "scaling.csv"))
    harness.write_report_json(rep, os.path.join(outdir, "report.json"))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_ballistic(cfg: harness.RunConfig, outdir: str) -> int:
    lat, dual = cfg.basis_pair()
    V = cfg.potential()
    kt = harness.resolve_ktilde(cfg.ktilde, dual)
    t_final = cfg.t_final if cfg.t_final is not None else 2.0
    rep = harness.ballistic_experiment(V, kt, cfg.band, cfg.deltas[0], t_final, cfg)
    lines = ["t,x1,x2"]
    for ts, x1, x2 in rep.trajectory:
        lines.append(",".join([harness._fmt(ts), harness._fmt(x1), harness._fmt(x2)]))
    with open(os.path.join(outdir, "trajectory.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    harness.write_report_json(rep, os.path.join(outdir, "report.json"))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_effmass(cfg: harness.RunConfig, outdir: str) -> int:
    lat, dual = cfg.basis_pair()
    V = cfg.potential()
    kt = harness.resolve_ktilde(cfg.ktilde, dual)
    rep = harness.effective_mass_experiment(
        V, kt, cfg.band, cfg.deltas[0], cfg.tau_final, cfg
    )
    harness.write_report_json(rep, os.path.join(outdir, "report.json"))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_lipschitz(cfg: harness.RunConfig, outdir: str) -> int:
    # an empty coefficient list in the config selects the free operator
    _, dual = cfg.basis_pair()
    V = cfg.potential()
    t0 = time.time()
    rep = harness.lipschitz_check(
        V, cfg.M, cfg.npairs, cfg.bands, dual=dual, seed=cfg.seed
    )
    lines = ["band,max_quotient"]
    for i, qmax in enumerate(rep.per_band_max):
        lines.append(f"{i + 1}," + harness._fmt(qmax))
    with open(os.path.join(outdir, "lipschitz.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    payload = rep.as_dict()
    payload.update(
        config_hash=cfg.config_hash(),
        p=cfg.p,
        n1=cfg.n1,
        n2=cfg.n2,
        dt=cfg.dt,
        runtime_s=time.time() - t0,
    )
    _write_json(payload, outdir, "report.json")
    finite = np.isfinite(rep.max_quotient)
    return EXIT_PASS if finite else EXIT_FAIL


COMMANDS = {
    "bands": cmd_bands,
    "dirac-point": cmd_dirac_point,
    "dirac-evolve": cmd_dirac_evolve,
    "evolve": cmd_evolve,
    "validate": cmd_validate,
    "ballistic": cmd_ballistic,
    "effmass": cmd_effmass,
    "lipschitz": cmd_lipschitz,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="honeybloch",
        description="Band structures, Dirac points, and wave-packet "
        "experiments for honeycomb Schrodinger operators.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "bands": "band structure along Gamma-K-M-Gamma, written to bands.csv",
        "dirac-point": "certify the vertex degeneracy; writes dirac_point.json",
        "dirac-evolve": "free envelope evolution conservation diagnostics",
        "evolve": "single supercell packet run against the two-mode ansatz",
        "validate": "scaling study over the configured delta sequence",
        "ballistic": "group-velocity transport check for one band",
        "effmass": "band-edge homogenization check",
        "lipschitz": "empirical eigenvalue Lipschitz quotients",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h)
        p.add_argument("config", help="INI experiment configuration file")
        p.add_argument(
            "-o", "--out", default=".", help="output directory (default: cwd)"
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.parse_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.subcommand](cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
