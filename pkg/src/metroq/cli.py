"""Batch runner emitting the paper-figure sweeps as CSV tables.

Each subcommand reads its parameters from an optional config file (flat
``key = value`` lines, with optional ``[subcommand]`` sections) overridden
by command-line flags, runs its grid on a small worker pool, and writes a
deterministic CSV: one comment line recording version, seed and config
hash, then a header row, then rows sorted by the leading columns with 12
significant digits.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(results are still written, flagged in the ``converged`` column).
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .ce_bounds import (
    SolverSettings,
    asymptotic_ce_bound,
    bitflip_ce_closed_form,
    finite_ce_bound,
    photonic_ce_closed_form,
)
from .collective import (
    brute_force_imperfect_qfi,
    jx_mse,
    one_axis_squeezed,
    parity_fi_opt,
    squeezing_strength,
)
from .covariance import phase_cov_feasible, phase_cov_qfi, seesaw_channel_qfi, SeesawSettings
from .fisher import GammaSettings, gamma_coefficient
from .global_control import exact_fn_ghz, ghz_lower_bound, werner_exact_fi, werner_lower_bound
from .photonics import gamma_photonic_opt, noon_fi, single_photon_channel
from .qcore import (
    DetectionChannel,
    ProjectiveMeasurement,
    UnitaryEncoding,
    conjugate_map_compact,
    conjugate_map_qc,
    povm_from_detection,
)
from .readout import (
    PoissonReadout,
    f2bin_bar,
    max_fi_over_angle,
    nv_exact_fi,
    nv_moment_bound,
    nv_sweep_row,
    optimize_binning,
    poisson_detection_channel,
    two_bin_rates,
)


class ConfigError(ValueError):
    pass


def parse_config(path: str, section: str) -> dict:
    """Flat key = value config with optional [section] headers."""
    values = {}
    current = None
    try:
        with open(path) as fh:
            for ln, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if line.startswith("[") and line.endswith("]"):
                    current = line[1:-1].strip()
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{ln}: expected key = value")
                key, val = (s.strip() for s in line.split("=", 1))
                if current in (None, section):
                    values[key] = val
    except OSError as exc:
        raise ConfigError(str(exc))
    return values


def _coerce(spec: dict, values: dict) -> dict:
    out = {}
    for key, val in values.items():
        if key not in spec:
            raise ConfigError(f"unknown config key: {key}")
        kind = spec[key][0]
        try:
            if kind is list:
                out[key] = [float(v) for v in val.replace(",", " ").split()]
            elif kind is bool:
                out[key] = val.lower() in ("1", "true", "yes")
            else:
                out[key] = kind(val)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {val!r}")
    return out


def _config_hash(params: dict) -> str:
    canon = ";".join(f"{k}={params[k]!r}" for k in sorted(params))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return f"{float(v):.12g}"


def write_csv(path, columns, rows, params, seed):
    rows = sorted(rows, key=lambda r: tuple(_fmt(r.get(c)) for c in columns))
    lines = [f"# metroq {__version__} seed={seed} config={_config_hash(params)}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in columns))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _pool_map(fn, items):
    workers = int(os.environ.get("METROQ_THREADS", "0") or 0)
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _bitflip_povm(p, q):
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    proj = ProjectiveMeasurement.from_basis(np.stack([plus, minus], axis=1))
    return povm_from_detection(DetectionChannel.bit_flip(p, q), proj)


def _qubit_encoding():
    return UnitaryEncoding(np.diag([0.5, -0.5]).astype(complex))


# ---------------------------------------------------------------------------
# subcommands: each entry is (param spec, runner)
# param spec maps key -> (type, default, help)

def run_gamma(params, seed):
    ps = params["p_grid"]
    qs = params["q_grid"]
    cfg = GammaSettings(restarts=int(params["restarts"]), seed=seed)

    def one(pq):
        p, q = pq
        value, _ = gamma_coefficient(_bitflip_povm(p, q), cfg)
        closed, _ = f2bin_bar(p, q)
        return {"p": p, "q": q, "gamma": value, "gamma_closed_form": closed,
                "abs_err": abs(value - closed)}

    rows = _pool_map(one, [(p, q) for p in ps for q in qs])
    return ["p", "q", "gamma", "gamma_closed_form", "abs_err"], rows, 0


def run_nv_fi(params, seed):
    r = PoissonReadout(params["lambda0"], params["ratio"] * params["lambda0"],
                       int(params["cutoff"]))
    channel = poisson_detection_channel(r)
    _, x_star = _best_threshold(channel)
    phis = np.linspace(-np.pi / 2, np.pi / 2, int(params["angles"]))

    def one(ph):
        pp, qq = two_bin_rates(channel, x_star)
        eta, delta = pp + qq - 1, pp - qq
        den = 1 - (delta + eta * np.sin(ph)) ** 2
        f2 = eta**2 * np.cos(ph) ** 2 / den if den > 1e-14 else 0.0
        return {"varphi": ph, "f_exact": nv_exact_fi(r, ph), "f_2bin": f2,
                "f_down_1": nv_moment_bound(r, ph, 1)}

    rows = _pool_map(one, phis)
    return ["varphi", "f_exact", "f_2bin", "f_down_1"], rows, 0


def _best_threshold(channel):
    best = (-1.0, 0)
    for xs in range(channel.n_outcomes - 1):
        v, _ = f2bin_bar(*two_bin_rates(channel, xs))
        if v > best[0]:
            best = (v, xs)
    return best


def run_binning(params, seed):
    lam0s = params["lambda0_grid"]
    ratio = params["ratio"]
    cutoff = int(params["cutoff"])
    rows = _pool_map(lambda l0: nv_sweep_row(l0, ratio, cutoff), lam0s)
    return ["lambda0", "lambda1", "F_exact", "F_2bin", "F_3bin",
            "ratio_2bin", "ratio_3bin", "x_star"], rows, 0


def run_moments(params, seed):
    r = PoissonReadout(params["lambda0"], params["ratio"] * params["lambda0"],
                       int(params["cutoff"]))
    phis = np.linspace(-np.pi / 2, np.pi / 2, int(params["angles"]))
    kmax = int(params["k_max"])

    def one(ph):
        row = {"varphi": ph, "f_exact": nv_exact_fi(r, ph)}
        for k in range(1, kmax + 1):
            row[f"f_down_{k}"] = nv_moment_bound(r, ph, k)
        return row

    rows = _pool_map(one, phis)
    return ["varphi", "f_exact"] + [f"f_down_{k}" for k in range(1, kmax + 1)], rows, 0


def run_ghz_sweep(params, seed):
    p, q, r = params["p"], params["q"], params["r"]

    def one(N):
        rep = ghz_lower_bound(N, p, q)
        row = {"N": N, "f_lower": rep.f_lower, "f_exact": exact_fn_ghz(N, p, q),
               "f_perfect": N**2, "r": r}
        if 0 < r < 1:
            row["werner_lower"] = werner_lower_bound(N, p, q, r)
            row["werner_exact"] = werner_exact_fi(N, p, q, r)
        return row

    rows = _pool_map(one, range(1, int(params["n_max"]) + 1))
    return ["N", "f_lower", "f_exact", "f_perfect", "r",
            "werner_lower", "werner_exact"], rows, 0


def run_ce_sweep(params, seed):
    p, q = params["p"], params["q"]
    povm = _bitflip_povm(p, q)
    enc = _qubit_encoding()
    cfg = SolverSettings(seed=seed)
    asym = asymptotic_ce_bound(povm, enc, cfg=cfg)
    status = 0

    def one(N):
        res = finite_ce_bound(povm, enc, int(N), cfg=cfg)
        return {"N": int(N), "bound_finite": res.bound,
                "bound_asymptotic": 4 * N * asym.per_probe_c,
                "per_probe_c": asym.per_probe_c,
                "solver_iters": res.iterations, "converged": res.converged}

    rows = _pool_map(one, params["n_grid"])
    if not all(r["converged"] for r in rows) or not asym.converged:
        status = 3
    return ["N", "bound_finite", "bound_asymptotic", "per_probe_c",
            "solver_iters", "converged"], rows, status


def run_local_sweep(params, seed):
    p, q = params["p"], params["q"]
    povm = _bitflip_povm(p, q)
    enc = _qubit_encoding()
    cfg = SolverSettings(seed=seed)
    asym = asymptotic_ce_bound(povm, enc, cfg=cfg)
    _, varphi = f2bin_bar(p, q)
    gam, _ = f2bin_bar(p, q)
    prefactor = params["mu_prefactor"]
    status = 0

    def one(N):
        N = int(N)
        state = one_axis_squeezed(N, squeezing_strength(N, prefactor))
        mse_s = jx_mse(state, 0.0, p, q, varphi)
        fi_par, _ = parity_fi_opt(N, p, q)
        fin = finite_ce_bound(povm, enc, N, cfg=cfg)
        row = {"N": N, "mse_squeezed": mse_s, "mse_parity": 1 / fi_par,
               "inv_ce_finite": 1 / fin.bound,
               "inv_ce_asymptotic": 1 / (4 * N * asym.per_probe_c),
               "uncorrelated_baseline": 1 / (N * gam)}
        if N <= 6:
            bf, _ = brute_force_imperfect_qfi(N, DetectionChannel.bit_flip(p, q),
                                              restarts=int(params["restarts"]), seed=seed)
            row["brute_force"] = bf
        return row

    rows = _pool_map(one, params["n_grid"])
    return ["N", "mse_squeezed", "mse_parity", "inv_ce_finite",
            "inv_ce_asymptotic", "brute_force", "uncorrelated_baseline"], rows, status


def run_covariance_audit(params, seed):
    p = params["p"]
    qs = params["q_grid"]
    enc = _qubit_encoding()
    see = SeesawSettings(seed=seed)

    def one(q):
        povm = _bitflip_povm(p, q)
        eta = p + q - 1
        intervals = phase_cov_feasible(p, q)
        if intervals:
            qfi_min = min(phase_cov_qfi(eta, ph)
                          for lo, hi in intervals
                          for ph in np.linspace(lo, hi, 51) if np.sin(ph) != 0)
        else:
            qfi_min = None
        imperfect, _ = f2bin_bar(p, q)
        h = enc.generator
        qc = seesaw_channel_qfi(h, conjugate_map_qc(povm), see).value
        compact = seesaw_channel_qfi(h, conjugate_map_compact(povm), see).value
        return {"p": p, "q": q, "feasible": intervals is not None,
                "phase_cov_qfi_min": qfi_min, "imperfect_qfi": imperfect,
                "qc_channel_qfi": qc, "compact_channel_qfi": compact}

    rows = _pool_map(one, qs)
    return ["p", "q", "feasible", "phase_cov_qfi_min", "imperfect_qfi",
            "qc_channel_qfi", "compact_channel_qfi"], rows, 0


def run_photon_sweep(params, seed):
    eta, p_dark = params["eta"], params["p_dark"]

    def one(N):
        N = int(N)
        gam, phi = gamma_photonic_opt(eta, p_dark, N)
        return {"N": N, "eta": eta, "p_dark": p_dark, "gamma": gam,
                "noon_fi": noon_fi(N, eta), "phi_opt": phi}

    rows = _pool_map(one, params["n_grid"])
    return ["N", "eta", "p_dark", "gamma", "noon_fi", "phi_opt"], rows, 0


SUBCOMMANDS = {
    "gamma": (
        {"p_grid": (list, [0.95, 0.9], "flip fidelities p"),
         "q_grid": (list, [0.9, 0.8], "flip fidelities q"),
         "restarts": (int, 8, "optimizer restarts")},
        run_gamma,
    ),
    "nv-fi": (
        {"lambda0": (float, 27.0, "bright mean count"),
         "ratio": (float, 0.65, "lambda1 / lambda0"),
         "cutoff": (int, 100, "count cutoff"),
         "angles": (int, 61, "angle grid size")},
        run_nv_fi,
    ),
    "binning": (
        {"lambda0_grid": (list, [10.0, 20.0, 27.0, 40.0, 50.0], "bright means"),
         "ratio": (float, 0.65, "lambda1 / lambda0"),
         "cutoff": (int, 100, "count cutoff")},
        run_binning,
    ),
    "moments": (
        {"lambda0": (float, 27.0, "bright mean count"),
         "ratio": (float, 0.65, "lambda1 / lambda0"),
         "cutoff": (int, 100, "count cutoff"),
         "angles": (int, 31, "angle grid size"),
         "k_max": (int, 2, "highest moment order")},
        run_moments,
    ),
    "ghz-sweep": (
        {"p": (float, 0.95, "flip fidelity p"),
         "q": (float, 0.9, "flip fidelity q"),
         "r": (float, 0.7, "white-noise weight (0 disables)"),
         "n_max": (int, 50, "largest probe number")},
        run_ghz_sweep,
    ),
    "ce-sweep": (
        {"p": (float, 0.95, "flip fidelity p"),
         "q": (float, 0.9, "flip fidelity q"),
         "n_grid": (list, [1, 2, 5, 10, 100], "probe numbers")},
        run_ce_sweep,
    ),
    "local-sweep": (
        {"p": (float, 0.95, "flip fidelity p"),
         "q": (float, 0.9, "flip fidelity q"),
         "n_grid": (list, [2, 3, 4, 50, 100], "probe numbers"),
         "mu_prefactor": (float, 4.0, "squeezing prefactor"),
         "restarts": (int, 16, "brute-force restarts")},
        run_local_sweep,
    ),
    "covariance-audit": (
        {"p": (float, 0.9, "flip fidelity p"),
         "q_grid": (list, [0.2, 0.5, 0.7, 0.9], "flip fidelities q")},
        run_covariance_audit,
    ),
    "photon-sweep": (
        {"eta": (float, 0.1, "detector efficiency"),
         "p_dark": (float, 0.0, "dark-count rate"),
         "n_grid": (list, [1, 2, 5, 10, 20, 50], "photon numbers")},
        run_photon_sweep,
    ),
}


def run(subcommand: str, config_path: str = None, overrides: dict = None,
        seed: int = 0, out: str = "-") -> int:
    """Execute one subcommand; returns the process exit code."""
    if subcommand not in SUBCOMMANDS:
        print(f"unknown subcommand: {subcommand}", file=sys.stderr)
        return 2
    spec, runner = SUBCOMMANDS[subcommand]
    params = {k: v[1] for k, v in spec.items()}
    try:
        if config_path:
            params.update(_coerce(spec, parse_config(config_path, subcommand)))
        if overrides:
            params.update(_coerce(spec, overrides))
        for key, val in params.items():
            if isinstance(val, list) and not val:
                raise ConfigError(f"grid {key} must be nonempty")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    np.random.seed(seed % 2**32)
    columns, rows, status = runner(params, seed)
    write_csv(out, columns, rows, params, seed)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="metroq",
        description="Fisher-information sweeps for metrology with noisy readout",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (spec, _) in SUBCOMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="config file path")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="-", help="output CSV path (- for stdout)")
        for key, (kind, default, help_) in spec.items():
            flag = "--" + key.replace("_", "-")
            if kind is list:
                sp.add_argument(flag, default=None, help=f"{help_} (space/comma list)")
            else:
                sp.add_argument(flag, default=None, help=help_)
    args = parser.parse_args(argv)
    spec, _ = SUBCOMMANDS[args.subcommand]
    overrides = {}
    for key in spec:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return run(args.subcommand, config_path=args.config, overrides=overrides,
               seed=args.seed, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
