"""Command-line front end: every subcommand prints a JSON summary to stdout.

``--output PATH`` additionally writes the result table (``--format csv``) or
the same JSON summary (``--format json``) to PATH. Settings come from the
built-in defaults, then ``--config FILE``, then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import exact, limits, phase, rcgraph
from .core import ModelParams, critical_field, critical_point_from_z, phase_boundaries

DEFAULT_SCHEDULE = [100, 200, 400, 800]


@dataclass
class ExperimentConfig:
    command: str = ""
    q: int = 3
    beta: float | None = None
    h: float = 0.0
    n: list[int] = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    z: float | None = None
    gamma: float = 0.0
    lam: float = 0.0
    nu: float = 0.0
    eps: float | None = None
    window: float | None = None
    z_points: int = 21
    threshold: float | None = None
    seed: int = 0
    replicas: int = 400
    threads: int = 1
    output: str | None = None
    format: str = "json"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.n = [int(v) for v in cfg.n]
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


class Result:
    def __init__(self, summary: dict, header: list[str] | None = None, rows: list | None = None):
        self.summary = summary
        self.header = header or []
        self.rows = rows or []

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _params(cfg: ExperimentConfig) -> ModelParams:
    if cfg.z is not None:
        return critical_point_from_z(cfg.q, cfg.z).params()
    if cfg.beta is None:
        raise ValueError("either --beta or --z is required")
    return ModelParams(cfg.q, cfg.beta, cfg.h)


def _perturbed(params: ModelParams, cfg: ExperimentConfig, n: int) -> ModelParams:
    return ModelParams(params.q, params.beta + cfg.lam / n, params.h + cfg.nu / n)


def _params_dict(p: ModelParams) -> dict:
    return {"q": p.q, "beta": p.beta, "h": p.h}


def cmd_phase(cfg: ExperimentConfig) -> Result:
    params = _params(cfg)
    ms = phase.find_global_minimizers(params)
    pb = phase_boundaries(params.q)
    summary = {
        "params": _params_dict(params),
        "boundaries": pb._asdict(),
        **ms.to_dict(),
        "residuals": [phase.stationarity_residual(params, x) if x.min() > 0 else None for x in ms.minimizers],
    }
    rows = [[k, z, *x.tolist()] for k, (x, z) in enumerate(zip(ms.minimizers, ms.z_values))]
    return Result(summary, ["state", "z", *[f"x{i + 1}" for i in range(params.q)]], rows)


def cmd_critical_line(cfg: ExperimentConfig) -> Result:
    q = cfg.q
    if q <= 2:
        raise ValueError("the coexistence line is empty for q <= 2")
    zmax = (q - 2) / q
    zs = np.linspace(0.0, zmax, cfg.z_points + 2)[1:-1]
    rows = []
    for z in zs:
        cp = critical_point_from_z(q, float(z))
        rows.append([cp.z, cp.beta_z, cp.h_z, critical_field(q, cp.beta_z).h])
    pb = phase_boundaries(q)
    summary = {"q": q, "boundaries": pb._asdict(), "points": len(rows), "table": rows}
    return Result(summary, ["z", "beta_z", "h_z", "h_T"], rows)


def cmd_exact_dist(cfg: ExperimentConfig) -> Result:
    params = _params(cfg)
    n = cfg.n[0]
    dist = exact.exact_distribution(params, n)
    probs = dist.probs
    mean = probs @ dist.densities
    summary = {
        "params": _params_dict(params),
        "n": n,
        "support_size": int(dist.support.shape[0]),
        "log_Z": dist.log_Z,
        "mean_density": mean,
    }
    header = [f"n{i + 1}" for i in range(params.q)] + ["log_weight", "prob"]
    rows = [[*s.tolist(), repr(float(lw)), repr(float(p))] for s, lw, p in zip(dist.support, dist.log_weights, probs)]
    return Result(summary, header, rows)


def _rel_error(exact_cov: np.ndarray, limit: np.ndarray) -> float:
    nz = np.abs(limit) > 1e-12
    return float(np.max(np.abs(exact_cov[nz] - limit[nz]) / np.abs(limit[nz])))


def cmd_fluct(cfg: ExperimentConfig) -> Result:
    params = _params(cfg)
    ms = phase.find_global_minimizers(params)
    if ms.regime is phase.Regime.TRICRITICAL:
        raise ValueError("Gaussian limit is degenerate at the tricritical point; use the tricritical command")
    window = cfg.window
    if window is None and len(ms) > 1:
        window = exact.default_radius(ms.minimizers)
    limits_ = [limits.covariance_matrix(x, params.beta).entries for x in ms.minimizers]
    table, rows = [], []
    for n in cfg.n:
        pn = _perturbed(params, cfg, n)
        dist = exact.exact_distribution(pn, n)
        for k, x in enumerate(ms.minimizers):
            d = None
            if cfg.lam or cfg.nu:
                d = phase.refine_local_minimizer(pn, x).d
            st = exact.fluctuation_statistics(dist, x, d, window=window)
            err = _rel_error(st.covariance, limits_[k])
            table.append({"n": n, "state": k, "max_rel_error": err, "mass": st.mass, "covariance": st.covariance})
            q = params.q
            for i in range(q):
                for j in range(q):
                    rows.append([n, k, i + 1, j + 1, float(st.covariance[i, j]), float(limits_[k][i, j])])
    summary = {
        "params": _params_dict(params),
        "regime": ms.regime.value,
        "window": window,
        "limit_covariances": limits_,
        "results": table,
    }
    return Result(summary, ["n", "state", "i", "j", "exact", "limit"], rows)


def cmd_coexist(cfg: ExperimentConfig) -> Result:
    params = _params(cfg)
    ms = phase.find_global_minimizers(params)
    if len(ms) < 2:
        raise ValueError(f"(q, beta, h) = {_params_dict(params)} has a single minimizer; nothing coexists")
    eps = cfg.eps if cfg.eps is not None else exact.default_radius(ms.minimizers)
    pred = limits.coexistence_probabilities(ms, params.beta, cfg.lam, cfg.nu)
    table, rows = [], []
    for n in cfg.n:
        dist = exact.exact_distribution(_perturbed(params, cfg, n), n)
        masses = [exact.ball_probability(dist, x, eps) for x in ms.minimizers]
        table.append({"n": n, "ball_masses": masses, "errors": [m - p for m, p in zip(masses, pred.probs)]})
        rows.extend([n, k, m, float(p)] for k, (m, p) in enumerate(zip(masses, pred.probs)))
    summary = {
        "params": _params_dict(params),
        "minimizers": [x.tolist() for x in ms.minimizers],
        "eps": eps,
        "taus": pred.taus,
        "predicted": pred.probs,
        "results": table,
    }
    return Result(summary, ["n", "state", "ball_mass", "predicted"], rows)


def cmd_tricritical(cfg: ExperimentConfig) -> Result:
    q = cfg.q
    pb = phase_boundaries(q)
    params = ModelParams(q, pb.beta_0, max(pb.h_0, 0.0))
    x0 = phase.find_global_minimizers(params).minimizers[0]
    law = limits.quartic_law(q)
    vlim = limits.tricritical_V_covariance(q)
    table, rows = [], []
    for n in cfg.n:
        dist = exact.exact_distribution(params, n)
        st = exact.fluctuation_statistics(dist, x0, mode="tricritical")
        ks = exact.ks_distance(st.t_values, st.t_probs, law.cdf)
        corr = st.t_v_correlation[np.isfinite(st.t_v_correlation)]
        table.append({
            "n": n,
            "ks": ks,
            "t_var": st.t_var,
            "t_var_limit": law.moment(2),
            "max_abs_corr_TV": float(np.max(np.abs(corr))) if corr.size else 0.0,
            "v_covariance": st.v_covariance,
        })
        rows.extend([n, float(t), float(p), float(law.cdf(t))] for t, p in zip(st.t_values, st.t_probs))
    summary = {
        "q": q,
        "params": _params_dict(params),
        "quartic_coefficient": law.coefficient,
        "v_covariance_limit": vlim.entries,
        "results": table,
    }
    return Result(summary, ["n", "t", "prob", "limit_cdf"], rows)


def cmd_rc_giant(cfg: ExperimentConfig) -> Result:
    table, rows = [], []
    for n in cfg.n:
        s = rcgraph.giant_monte_carlo(
            cfg.q, n, cfg.gamma, cfg.replicas, cfg.seed, cfg.threshold, threads=cfg.threads
        )
        table.append({**s.to_dict(), "bias": s.estimate - s.prediction})
        rows.extend(
            [r.seed, n, r.replica, *r.counts, repr(r.giant_fraction), r.component_count] for r in s.results
        )
    summary = {"prediction": rcgraph.giant_component_probability(cfg.q, cfg.gamma), "results": table}
    header = ["seed", "n", "replica", *[f"N{i + 1}" for i in range(cfg.q)], "giant_fraction", "component_count"]
    return Result(summary, header, rows)


def cmd_rc_z(cfg: ExperimentConfig) -> Result:
    if cfg.beta is None:
        raise ValueError("--beta is required")
    table, rows = [], []
    for n in cfg.n:
        p = rcgraph.RCParams.from_beta_gamma(cfg.q, n, cfg.beta, cfg.gamma).p
        ex = rcgraph.zrc_exact(p, cfg.q, n)
        asym = rcgraph.zrc_asymptotic(cfg.beta, cfg.gamma, cfg.q, n)
        table.append({"n": n, "p": p, "log_exact": ex, "log_asymptotic": asym, "difference": ex - asym})
        rows.append([n, p, ex, asym, ex - asym])
    summary = {
        "q": cfg.q,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "ll_discrepancy_ratio": rcgraph.ll_discrepancy_ratio(cfg.beta, cfg.q),
        "results": table,
    }
    return Result(summary, ["n", "p", "log_exact", "log_asymptotic", "difference"], rows)


def cmd_selftest(cfg: ExperimentConfig) -> Result:
    from .selftest import run_all

    checks = run_all(seed=cfg.seed)
    summary = {
        "passed": all(c.ok for c in checks),
        "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail} for c in checks],
    }
    return Result(summary, ["name", "ok", "detail"], [[c.name, c.ok, c.detail] for c in checks])


COMMANDS = {
    "phase": (cmd_phase, "global minimizers and regime; CSV: state,z,x1..xq"),
    "critical-line": (cmd_critical_line, "tabulate the coexistence line; CSV: z,beta_z,h_z,h_T"),
    "exact-dist": (cmd_exact_dist, "exact count law at n (first value of --n); CSV: n1..nq,log_weight,prob"),
    "fluct": (cmd_fluct, "exact W covariance vs the limit; CSV: n,state,i,j,exact,limit"),
    "coexist": (cmd_coexist, "ball masses vs coexistence probabilities; CSV: n,state,ball_mass,predicted"),
    "tricritical": (cmd_tricritical, "T marginal vs the quartic law; CSV: n,t,prob,limit_cdf"),
    "rc-giant": (
        cmd_rc_giant,
        "Monte Carlo giant-component frequency; CSV: seed,n,replica,N1..Nq,giant_fraction,component_count",
    ),
    "rc-z": (cmd_rc_z, "exact vs asymptotic random-cluster log Z; CSV: n,p,log_exact,log_asymptotic,difference"),
    "selftest": (cmd_selftest, "run the invariant checks; CSV: name,ok,detail"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cwpotts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="JSON config file; explicit flags override it")
        p.add_argument("--q", type=int)
        p.add_argument("--beta", type=float)
        p.add_argument("--h", type=float)
        p.add_argument("--z", type=float, help="pick the coexistence point with this z (q > 2)")
        p.add_argument("--n", type=int, nargs="+", help="system size schedule")
        p.add_argument("--gamma", type=float)
        p.add_argument("--lambda", dest="lam", type=float, help="beta_n = beta + lambda/n")
        p.add_argument("--nu", type=float, help="h_n = h + nu/n")
        p.add_argument("--eps", type=float, help="ball radius (default: a third of the minimal distance)")
        p.add_argument("--window", type=float, help="conditioning radius for fluct")
        p.add_argument("--z-points", dest="z_points", type=int)
        p.add_argument("--threshold", type=float, help="giant-component cutoff on the largest fraction")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--threads", type=int, help="worker cap; results do not depend on it")
        p.add_argument("--output", help="write the table (csv) or summary (json) here")
        p.add_argument("--format", choices=["json", "csv"])
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data.update(json.load(fh))
    data.update({k: v for k, v in vars(args).items() if k != "config"})
    return ExperimentConfig.from_dict(data)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = COMMANDS[cfg.command][0](cfg)
    except (ValueError, OverflowError, RuntimeError, ZeroDivisionError, OSError) as exc:
        print(f"cwpotts {args.command}: error: {exc}", file=sys.stderr)
        return 2
    payload = json.dumps(_jsonable({"config": asdict(cfg), **result.summary}), indent=2)
    print(payload)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(result.csv_text() if cfg.format == "csv" else payload + "\n")
    if cfg.command == "selftest" and not result.summary["passed"]:
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
