"""Batch driver: validate a config, run one experiment, emit CSV/JSON reports.

Every run is deterministic for a fixed config and seed (byte-identical CSV);
reports embed the resolved config and the volume/Green convention constants.
All numbers in the reports come from module operations, never from CLI-side
math.  Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import density, geometry, hypersurface, potential, spaces
from .errors import (ConfigError, CoverageError, DomainError, FDFailure,
                     FlatnessViolation, IntegrabilityError, QuadratureError,
                     SweepError, WeightError)

NUMERICAL_ERRORS = (QuadratureError, FDFailure, SweepError, CoverageError,
                    FlatnessViolation, np.linalg.LinAlgError, RuntimeError)

COMMANDS = ("selftest", "density-map", "potential-check", "flatness",
            "seip-sweep", "restriction-check")

_KNOWN_KEYS = {
    "selftest": {"seed"},
    "density-map": {"n", "polynomial", "weight", "r_ladder", "grid", "h_fd", "seed"},
    "potential-check": {"n", "polynomial", "r", "count", "seed", "sample_count",
                        "region_radius", "min_distance"},
    "flatness": {"n", "polynomial", "eps0", "count", "seed", "region_radius"},
    "seip-sweep": {"beta", "degree", "separations", "seed", "r_ladder"},
    "restriction-check": {"n", "polynomial", "weight", "degree", "eps_list",
                          "seed", "region_radius", "sample_count"},
}


@dataclass
class RunConfig:
    """One validated run: the command plus its resolved parameter map."""

    command: str
    params: dict = field(default_factory=dict)
    out_dir: Path = Path(".")

    def resolved(self):
        return {"command": self.command, **self.params}


def _constants(n):
    return {
        "volume_normalization": "omega_E^n = 2^n n! Lebesgue",
        "volume_density_at_0": geometry.volume_density(np.zeros(n, complex)),
        "green_constant": geometry.green_constant(n),
        "ball_volume_formula": "(2 pi (n+1) r^2 / (1 - r^2))^n",
    }


def _workers():
    try:
        return max(1, int(os.environ.get("BERGMAN_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def build_config(command, config_path, overrides, out_dir) -> RunConfig:
    params = {}
    if config_path:
        with open(config_path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        cmd_in_file = raw.pop("command", command)
        if cmd_in_file != command:
            raise ConfigError(f"config is for {cmd_in_file!r}, not {command!r}")
        params.update(raw)
    params.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(params) - _KNOWN_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    return RunConfig(command=command, params=params, out_dir=Path(out_dir))


def _polynomial_from_spec(spec, n) -> hypersurface.DefiningPolynomial:
    if spec is None:
        raise ConfigError("a polynomial spec is required")
    if isinstance(spec, str):
        with open(spec) as fh:
            spec = json.load(fh)
    if isinstance(spec, list):
        spec = {"records": spec}
    if not isinstance(spec, dict):
        raise ConfigError("polynomial spec must be a mapping or a record list")
    if "constant" in spec:
        return hypersurface.DefiningPolynomial.constant(spec["constant"], n)
    if "records" in spec:
        T = hypersurface.DefiningPolynomial.from_records(spec["records"], n)
        if T.nvars != n:
            raise ConfigError("polynomial dimension does not match n")
        return T
    if "roots" in spec:
        if n != 1:
            raise ConfigError("root lists define dimension-1 polynomials")
        roots = [complex(re, im) for re, im in spec["roots"]]
        return hypersurface.DefiningPolynomial.from_roots(roots)
    if "lattice" in spec:
        if n != 1:
            raise ConfigError("lattices are dimension-1 hypersurfaces")
        lat = spaces.pseudohyperbolic_lattice(**spec["lattice"])
        return spaces.lattice_polynomial(lat)
    raise ConfigError(f"unrecognized polynomial spec keys {sorted(spec)}")


def _weight_from_spec(spec) -> density.Weight:
    if spec is None:
        raise ConfigError("a weight spec is required")
    if isinstance(spec, (int, float)):
        spec = {"kind": "log_family", "beta": float(spec)}
    kind = spec.get("kind", "log_family")
    beta = float(spec.get("beta", 0.0))
    if kind == "log_family":
        return density.Weight(beta=beta)
    if kind == "polynomial_perturbation":
        p = hypersurface.DefiningPolynomial.from_records(spec["records"])
        return density.Weight(beta=beta, perturbation=p,
                              perturbation_mode=spec.get("mode", "re"))
    raise ConfigError(f"unknown weight kind {kind!r}")


def _grid_from_spec(spec, n):
    if spec is None:
        spec = {"radial": 4, "angular": 6}
    if "points" in spec:
        return np.array([[complex(p[2 * i], p[2 * i + 1]) for i in range(n)]
                         for p in spec["points"]])
    return density.density_grid(n, int(spec.get("radial", 4)),
                                int(spec.get("angular", 6)),
                                float(spec.get("max_pseudoradius", 0.9)))


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, config: RunConfig, n, results):
    doc = {"config": config.resolved(), "constants": _constants(n),
           "results": results}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _point_header(n, prefix="z"):
    cols = []
    for i in range(n):
        cols += [f"{prefix}{i}_re", f"{prefix}{i}_im"]
    return cols


def _point_row(z):
    out = []
    for c in np.atleast_1d(z):
        out += [float(c.real), float(c.imag)]
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _run_selftest(cfg: RunConfig):
    rng = np.random.default_rng(int(cfg.params.get("seed", 0)))
    lines = []
    for n in (1, 2, 3):
        worst_inv, worst_id = 0.0, 0.0
        for _ in range(200):
            a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            a *= rng.uniform(0.0, 0.95) / np.linalg.norm(a)
            z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            z *= rng.uniform(0.0, 0.95) / np.linalg.norm(z)
            m = geometry.MobiusMap.at(a)
            fz = geometry.mobius_apply(m, z)
            worst_inv = max(worst_inv, float(np.abs(geometry.mobius_apply(m, fz) - z).max()))
            lhs = 1.0 - np.vdot(fz, fz).real
            rhs = ((1.0 - np.vdot(z, z).real) * (1.0 - np.vdot(a, a).real)
                   / abs(1.0 - z @ a.conj()) ** 2)
            worst_id = max(worst_id, abs(lhs - rhs))
        if worst_inv > 1e-12 or worst_id > 1e-12:
            raise RuntimeError(f"selftest: Moebius identities failed at n={n}")
        lines.append(f"PASS moebius involution+identity n={n} "
                     f"(max {max(worst_inv, worst_id):.2e})")
    for n in (1, 2):
        r = 0.7
        got = geometry.quad_ball(lambda p: np.ones(len(p)), np.zeros(n, complex), r)
        want = geometry.ball_volume(n, r)
        if abs(got / want - 1.0) > 1e-6:
            raise RuntimeError(f"selftest: volume quadrature failed at n={n}")
        lines.append(f"PASS volume quadrature n={n} (rel {abs(got / want - 1):.2e})")
    t = np.linspace(0.05, 0.999, 40)
    f = geometry.green_radial_profile(2, t)
    if not np.all(np.diff(f) > 0):
        raise RuntimeError("selftest: Green profile is not increasing")
    lines.append("PASS green profile monotone")
    for line in lines:
        print(line)
    _write_json(cfg.out_dir / "selftest.json", cfg, 1,
                {"checks": [ln.removeprefix("PASS ") for ln in lines]})
    return 0


def _run_density_map(cfg: RunConfig):
    p = cfg.params
    n = int(p.get("n", 1))
    T = _polynomial_from_spec(p.get("polynomial"), n)
    kappa = _weight_from_spec(p.get("weight"))
    grid = _grid_from_spec(p.get("grid"), n)
    r_ladder = np.asarray(p.get("r_ladder", [0.5, 0.6, 0.7, 0.8, 0.9]), float)
    report = density.density_sweep(T, kappa, grid, r_ladder,
                                   h_fd=float(p.get("h_fd", 1e-3)),
                                   workers=_workers())
    header = _point_header(n) + ["r", "D"]
    rows = [_point_row(z) + [r, v] for z, r, v in report.rows()]
    _write_csv(cfg.out_dir / "density_map.csv", header, rows)
    _write_json(cfg.out_dir / "density_map.json", cfg, n, report.summary())
    return 0


def _run_potential_check(cfg: RunConfig):
    p = cfg.params
    n = int(p.get("n", 1))
    T = _polynomial_from_spec(p.get("polynomial"), n)
    r = float(p.get("r", 0.5))
    count = int(p.get("count", 40))
    seed = int(p.get("seed", 0))
    region = float(p.get("region_radius", 0.92))
    min_dist = float(p.get("min_distance", 0.12))
    sample = (hypersurface.sample_W(T, region, int(p.get("sample_count", 4000)), seed)
              if n > 1 else hypersurface.sample_W(T, region, 8, seed))
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        z *= rng.uniform(0.05, 0.55) / np.linalg.norm(z)
        if sample.size == 0 or float(np.min(geometry.pseudo_distance(z, sample.points))) >= min_dist:
            pts.append(z)
    rows, maxdiff = [], 0.0
    for z in pts:
        sp = potential.s_r_potential(T, z, r)
        sg = potential.s_r_green(T, sample, z, r)
        if sg == 0.0 and abs(sp) > 1e-6:
            raise CoverageError("green-form sample does not cover W cap E(z,r)")
        diff = abs(sp - sg)
        maxdiff = max(maxdiff, diff)
        rows.append(_point_row(z) + [sp, sg, diff])
    header = _point_header(n) + ["s_r_potential", "s_r_green", "abs_diff"]
    _write_csv(cfg.out_dir / "potential_check.csv", header, rows)
    _write_json(cfg.out_dir / "potential_check.json", cfg, n,
                {"r": r, "count": count, "max_abs_diff": maxdiff,
                 "sample_size": int(sample.size)})
    return 0


def _run_flatness(cfg: RunConfig):
    p = cfg.params
    n = int(p.get("n", 2))
    T = _polynomial_from_spec(p.get("polynomial"), n)
    eps0 = float(p.get("eps0", 0.1))
    count = int(p.get("count", 12))
    sample = hypersurface.sample_W(T, float(p.get("region_radius", 0.7)),
                                   max(count * 8, 256), int(p.get("seed", 0)))
    idx = np.linspace(0, max(sample.size - 1, 0), min(count, sample.size)).astype(int)
    rows, violations = [], 0
    for i in idx:
        w = sample.points[i]
        try:
            C = hypersurface.flatness_profile(T, w, eps0)
        except FlatnessViolation:
            violations += 1
            C = math.nan
        rows.append(_point_row(w) + [C])
    header = _point_header(n, "w") + ["C_estimate"]
    _write_csv(cfg.out_dir / "flatness.csv", header, rows)
    finite = [row[-1] for row in rows if not math.isnan(row[-1])]
    _write_json(cfg.out_dir / "flatness.json", cfg, n,
                {"eps0": eps0, "violations": violations,
                 "C_max": max(finite) if finite else None,
                 "C_min": min(finite) if finite else None})
    return 0 if violations == 0 else 3


def _run_seip_sweep(cfg: RunConfig):
    p = cfg.params
    beta = float(p.get("beta", 3.0))
    degree = int(p.get("degree", 12))
    seps = p.get("separations", [0.90, 0.78, 0.70, 0.62, 0.55])
    if isinstance(seps, str):
        seps = [float(s) for s in seps.split(",")]
    rows = spaces.seip_sweep(beta, degree, seps, seed=int(p.get("seed", 0)),
                             r_ladder=tuple(p.get("r_ladder", (0.5, 0.6, 0.7, 0.8, 0.9))))
    header = ["separation", "density_estimate", "lambda_min", "lambda_max",
              "extension_norm_ratio"]
    table = [[row[k] for k in header] for row in rows]
    _write_csv(cfg.out_dir / "seip_sweep.csv", header, table)
    _write_json(cfg.out_dir / "seip_sweep.json", cfg, 1,
                {"beta": beta, "degree": degree, "rows": rows})
    return 0


def _run_restriction_check(cfg: RunConfig):
    p = cfg.params
    n = int(p.get("n", 2))
    T = _polynomial_from_spec(p.get("polynomial"), n)
    kappa = _weight_from_spec(p.get("weight", {"kind": "log_family", "beta": 4.0}))
    degree = int(p.get("degree", 4))
    eps_list = [float(e) for e in p.get("eps_list", [0.05, 0.1])]
    space = spaces.build_space(n, degree, kappa)
    sample = hypersurface.sample_W(T, float(p.get("region_radius", 0.7)),
                                   int(p.get("sample_count", 3000)),
                                   int(p.get("seed", 0)))
    results, rows = {}, []
    for eps in eps_list:
        chk = spaces.restriction_inequality_check(space, T, sample, eps,
                                                  seed=int(p.get("seed", 0)))
        results[str(eps)] = {
            "measured_C": chk.measured_C,
            "lambda_max": chk.lambda_max,
            "lambda_max_quotient": chk.lambda_max_quotient,
        }
        rows.append([eps, chk.measured_C])
    cs = [v["measured_C"] for v in results.values()]
    results["stability_ratio"] = max(cs) / min(cs) if min(cs) > 0 else math.inf
    _write_csv(cfg.out_dir / "restriction_check.csv", ["eps", "measured_C"], rows)
    _write_json(cfg.out_dir / "restriction_check.json", cfg, n, results)
    return 0


_RUNNERS = {
    "selftest": _run_selftest,
    "density-map": _run_density_map,
    "potential-check": _run_potential_check,
    "flatness": _run_flatness,
    "seip-sweep": _run_seip_sweep,
    "restriction-check": _run_restriction_check,
}


def run(config: RunConfig) -> int:
    """Execute a validated config; exit status semantics as in main()."""
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[config.command](config)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="bergmanball",
                                 description="Bergman-ball density and sampling "
                                             "experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None)

    sub.add_parser("selftest", parents=[common])
    dm = sub.add_parser("density-map", parents=[common])
    dm.add_argument("--n", type=int, default=None)
    dm.add_argument("--beta", type=float, default=None)
    pc = sub.add_parser("potential-check", parents=[common])
    pc.add_argument("--n", type=int, default=None)
    pc.add_argument("--r", type=float, default=None)
    pc.add_argument("--count", type=int, default=None)
    fl = sub.add_parser("flatness", parents=[common])
    fl.add_argument("--n", type=int, default=None)
    fl.add_argument("--eps0", type=float, default=None)
    ss = sub.add_parser("seip-sweep", parents=[common])
    ss.add_argument("--beta", type=float, default=None)
    ss.add_argument("--degree", type=int, default=None)
    ss.add_argument("--separations", type=str, default=None)
    rc = sub.add_parser("restriction-check", parents=[common])
    rc.add_argument("--degree", type=int, default=None)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "out") and v is not None}
    if args.command == "density-map" and "beta" in overrides:
        overrides["weight"] = {"kind": "log_family", "beta": overrides.pop("beta")}
    try:
        cfg = build_config(args.command, args.config, overrides, args.out)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except (ConfigError, WeightError, IntegrabilityError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
