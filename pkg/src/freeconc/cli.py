"""``freeconc`` command line.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
non-convergence, 4 failed verification.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bmc as _bmc
from .cumulants import verify_identities
from .dependence import FiniteChain, capital_psi, mixing_time, psipi_bound, stationary_distribution
from .dyson import DysonSystem, density_grid, singular_value_cdf, support_edge
from .errors import ConfigError, DomainError, NumericError, ShapeError
from .models import GnmSpec, SubWeibullSpec, baiyin_epsilon, baiyin_tail
from .montecarlo import (TrialConfig, fmt, histogram, histogram_csv, ks_distance, report_json, run_trials,
                         samples_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
SEED_ENV = "FREECONC_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    return args.seed


def _bmc_spec(args):
    return _bmc.BmcSpec.from_dict(_load_json(args.config))


def _system(spec) -> DysonSystem:
    return DysonSystem.from_chain(spec.alpha_hat, spec.p)


def _flag_config(args, names):
    return {n: getattr(args, n) for n in names}


# subcommand bodies -------------------------------------------------------

def cmd_bmc_simulate(args):
    spec = _bmc_spec(args)
    if args.emit_config:
        return report_json(spec.to_dict())
    cfg = TrialConfig("bmc", spec, args.trials, _seed(args), n_values=args.singular_values,
                      moments=args.moments, threads=args.threads)
    samples = run_trials(cfg)
    if args.histogram or args.format == "json":
        sys_ = _system(spec)
        edge = support_edge(sys_)
        pooled = np.concatenate([s.values for s in samples])
    if args.histogram:
        edges, mass = histogram(pooled, edge, bins=args.bins)
        Path(args.histogram).write_text(histogram_csv(edges, mass))
    if args.format == "csv":
        return samples_csv(samples)
    norms = np.array([s.norm for s in samples])
    mh = _bmc.mhat(spec).value
    doc = {"config": spec.to_dict(), "trials": cfg.trials, "seed": cfg.base_seed,
           "norm_mean": norms.mean(), "norm_max": norms.max(), "mhat": mh, "support_edge": edge,
           "relative_norm_gap": norms.mean() / mh - 1.0}
    if cfg.n_values is None:
        doc["ks"] = ks_distance(pooled, singular_value_cdf(sys_))
    return report_json(doc)


def cmd_bmc_bound(args):
    spec = _bmc_spec(args)
    if args.emit_config:
        return report_json(spec.to_dict())
    rep = _bmc.bound_report(spec, p_max=args.p_max)
    return report_json({"config": spec.to_dict(), **rep.as_dict()})


def cmd_bmc_density(args):
    spec = _bmc_spec(args)
    if args.emit_config:
        return report_json(spec.to_dict())
    if args.points < 2 or not args.grid_max > args.grid_min:
        raise ConfigError("need points >= 2 and grid-max > grid-min")
    xs = np.linspace(args.grid_min, args.grid_max, args.points)
    rho = density_grid(_system(spec), xs, args.epsilon)
    lines = ["x,density"] + [f"{fmt(x)},{fmt(r)}" for x, r in zip(xs, rho)]
    return "\n".join(lines) + "\n"


def cmd_bmc_mlimit(args):
    spec = _bmc_spec(args)
    if args.emit_config:
        return report_json(spec.to_dict())
    return f"{_bmc.limiting_m(spec.alpha_hat, spec.pi, spec.p):.6f}\n"


def cmd_graph_semicircle(args):
    if args.emit_config:
        return report_json(_flag_config(args, ["d", "m", "trials", "seed"]))
    try:
        spec = GnmSpec(args.d, args.m)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = TrialConfig("gnm", spec, args.trials, _seed(args), n_values=0, moments=6, threads=args.threads)
    samples = run_trials(cfg)
    if args.format == "csv":
        return samples_csv(samples)
    mom = np.mean([s.moments for s in samples], axis=0)
    catalan = [1, 2, 5]
    doc = {"d": spec.d, "m": spec.m, "p": spec.p, "trials": cfg.trials, "seed": cfg.base_seed,
           "even_moments": [{"k": k, "mean": mom[2 * k - 1], "catalan": catalan[k - 1],
                             "relative_error": mom[2 * k - 1] / catalan[k - 1] - 1.0} for k in (1, 2, 3)],
           "norm_mean": float(np.mean([s.norm for s in samples]))}
    return report_json(doc)


def cmd_wigner_baiyin(args):
    keys = ["d", "theta", "scale", "delta", "x", "cprime", "trials", "seed"]
    if args.emit_config:
        return report_json(_flag_config(args, keys))
    try:
        spec = SubWeibullSpec(args.d, args.theta, args.scale)
        eps = baiyin_epsilon(args.d, args.theta, args.delta, args.x, args.cprime)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    cfg = TrialConfig("wigner", spec, args.trials, _seed(args), n_values=0, threads=args.threads)
    samples = run_trials(cfg)
    if args.format == "csv":
        return samples_csv(samples)
    norms = np.array([s.norm for s in samples])
    doc = {**_flag_config(args, keys), "seed": cfg.base_seed, "epsilon": eps,
           "threshold": 2.0 + eps, "tail_bound": baiyin_tail(args.d, args.delta, args.x),
           "fraction_below_threshold": float(np.mean(norms <= 2.0 + eps)),
           "norm_mean": norms.mean(), "norm_min": norms.min(), "norm_max": norms.max()}
    return report_json(doc)


def cmd_cumulant_verify(args):
    if args.emit_config:
        return report_json(_flag_config(args, ["kmax", "oracles", "seed"]))
    if not 3 <= args.kmax <= 8 or args.oracles < 1:
        raise ConfigError("need 3 <= kmax <= 8 and oracles >= 1")
    res = verify_identities(args.kmax, args.oracles, _seed(args))
    text = report_json(res)
    if not res["passed"]:
        raise _VerificationFailed(text)
    return text


def _psi_chain(doc):
    if isinstance(doc, dict) and "P" in doc:
        extra = set(doc) - {"spec_version", "P", "n"}
        if extra:
            raise ConfigError(f"unknown keys: {sorted(extra)}")
        try:
            P = np.asarray(doc["P"], dtype=float)
            n = int(doc.get("n", 10**6))
        except (TypeError, ValueError) as exc:
            raise ConfigError("P must be a square list of numbers") from exc
        return {"spec_version": 1, "P": P.tolist(), "n": n}, P, n
    spec = _bmc.BmcSpec.from_dict(doc)
    return spec.to_dict(), spec.p, spec.n


def cmd_psi_chain(args):
    norm, P, n = _psi_chain(_load_json(args.config))
    if args.emit_config:
        return report_json(norm)
    try:
        chain = FiniteChain(P, stationary_distribution(P), n)
    except (DomainError, ShapeError) as exc:
        raise ConfigError(str(exc)) from exc
    doc = {"Psi": capital_psi(chain), "t_mix": mixing_time(chain), "psipi_bound": psipi_bound(chain),
           "pi": chain.mu0, "n": n}
    return report_json(doc)


class _VerificationFailed(Exception):
    pass


# parser ------------------------------------------------------------------

def _common(p, seed=True, out=True, fmt_default=None):
    p.add_argument("--threads", type=int, default=1, help="worker threads (0 = all CPUs)")
    p.add_argument("--emit-config", action="store_true", help="print the normalized configuration and exit")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if out:
        p.add_argument("--out", default=None, help="output file (default stdout)")
    if fmt_default:
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="freeconc", description="Free-probability concentration toolkit")
    groups = root.add_subparsers(dest="group", required=True, parser_class=_Parser)

    g = groups.add_parser("bmc", help="block Markov chains").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("simulate")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--singular-values", type=int, default=None, help="keep the top k singular values")
    p.add_argument("--moments", type=int, default=0)
    p.add_argument("--histogram", default=None, help="also write a histogram CSV here")
    p.add_argument("--bins", type=int, default=100)
    _common(p, fmt_default="csv")
    p.set_defaults(func=cmd_bmc_simulate)
    p = g.add_parser("bound")
    p.add_argument("--config", required=True)
    p.add_argument("--p-max", type=int, default=10)
    _common(p, seed=False)
    p.set_defaults(func=cmd_bmc_bound)
    p = g.add_parser("density")
    p.add_argument("--config", required=True)
    p.add_argument("--grid-min", type=float, default=-3.0)
    p.add_argument("--grid-max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=601)
    p.add_argument("--epsilon", type=float, default=1e-4)
    _common(p, seed=False)
    p.set_defaults(func=cmd_bmc_density)
    p = g.add_parser("mlimit")
    p.add_argument("--config", required=True)
    _common(p, seed=False)
    p.set_defaults(func=cmd_bmc_mlimit)

    g = groups.add_parser("graph", help="G(d, m) random graphs").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("semicircle")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, default=50)
    _common(p, fmt_default="json")
    p.set_defaults(func=cmd_graph_semicircle)

    g = groups.add_parser("wigner", help="sub-Weibull Wigner matrices").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("baiyin")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--cprime", type=float, required=True)
    p.add_argument("--trials", type=int, default=200)
    _common(p, fmt_default="json")
    p.set_defaults(func=cmd_wigner_baiyin)

    g = groups.add_parser("cumulant", help="cumulant identities").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("verify")
    p.add_argument("--kmax", type=int, default=6)
    p.add_argument("--oracles", type=int, default=50)
    _common(p)
    p.set_defaults(func=cmd_cumulant_verify)

    g = groups.add_parser("psi", help="psi-dependence of a chain").add_subparsers(dest="cmd", required=True)
    p = g.add_parser("chain")
    p.add_argument("--config", required=True)
    _common(p, seed=False)
    p.set_defaults(func=cmd_psi_chain)
    return root


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 0:
            raise ConfigError("--threads must be nonnegative")
        text = args.func(args)
        _emit(text, getattr(args, "out", None))
        return EXIT_OK
    except _VerificationFailed as exc:
        sys.stdout.write(str(exc))
        return EXIT_VERIFY
    except (ConfigError, DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
