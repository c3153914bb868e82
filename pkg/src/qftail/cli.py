"""Command-line front end.

Exit codes: 0 success or certified, 1 certification failure, 2 input error,
3 domain error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import bounds, montecarlo, regression
from .errors import DomainError, InputError
from .samplers import SubgaussianSpec
from .spectral import read_matrix_csv, read_vector_csv, summarize

EXIT_OK, EXIT_FAILED, EXIT_INPUT, EXIT_DOMAIN = 0, 1, 2, 3
SEED_ENV = "QFT_SEED"

DEFAULTS: Dict[str, Any] = {
    "sigma": None,
    "scale": 1.0,
    "family": "gaussian",
    "t": list(montecarlo.DEFAULT_T_GRID),
    "trials": None,
    "streams": 1,
    "format": "csv",
    "convention": "standard",
    "n": 50,
    "d": 2,
}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _float_list(value) -> List[float]:
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [v for v in str(value).split(",") if v.strip()]
    try:
        return [float(v) for v in items]
    except ValueError:
        raise InputError(f"cannot parse number list {value!r}") from None


class Config:
    """Flags override the JSON config file, which overrides built-in defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file: Dict[str, Any] = {}
        if getattr(args, "config", None):
            try:
                self.file = json.loads(Path(args.config).read_text())
            except OSError as exc:
                raise InputError(f"cannot read config {args.config}: {exc}") from None
            except json.JSONDecodeError as exc:
                raise InputError(f"config {args.config} is not valid JSON: {exc}") from None
            if not isinstance(self.file, dict):
                raise InputError("config file must hold a JSON object")

    def get(self, name: str, default: Any = None) -> Any:
        value = getattr(self.args, name, None)
        if value is None:
            value = self.file.get(name)
        if value is None:
            value = DEFAULTS.get(name, default) if default is None else default
        return value

    def seed(self) -> int:
        value = self.get("seed")
        if value is None:
            value = os.environ.get(SEED_ENV, 0)
        try:
            seed = int(value)
        except (TypeError, ValueError):
            raise InputError(f"seed must be an integer, got {value!r}") from None
        if not 0 <= seed < 2**64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
        return seed

    def path(self, name: str, required: bool = True) -> Optional[str]:
        value = self.get(name)
        if value is None and required:
            raise InputError(f"--{name} is required")
        return value


def _emit(text: str, cfg: Config) -> None:
    out = cfg.get("out")
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise InputError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _rows_to_text(header: Sequence[str], rows: List[Sequence[Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    if fmt != "csv":
        raise InputError(f"unknown format {fmt!r}")
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def _load_problem(cfg: Config):
    A = read_matrix_csv(cfg.path("matrix"))
    mu_path = cfg.path("mu", required=False)
    mu = read_vector_csv(mu_path) if mu_path else None
    if mu is not None and mu.shape[0] != A.shape[1]:
        raise InputError(f"mu has length {mu.shape[0]} but the matrix has {A.shape[1]} columns")
    return A, mu


def _spec_and_params(cfg: Config, A, mu):
    spec = SubgaussianSpec(cfg.get("family"), A.shape[1], mu=mu, scale=float(cfg.get("scale")))
    sigma = cfg.get("sigma")
    sigma = spec.declared_sigma if sigma is None else float(sigma)
    return spec, bounds.SubgaussianParams(sigma, mu_supplied=mu is not None)


def cmd_bound(cfg: Config) -> int:
    A, mu = _load_problem(cfg)
    summary = summarize(A, mu)
    sigma = cfg.get("sigma")
    params = bounds.SubgaussianParams(1.0 if sigma is None else float(sigma), mu_supplied=mu is not None)
    rows = []
    for t in _float_list(cfg.get("t")):
        tb = bounds.subgaussian_quadratic_bound(summary, params, t)
        rows.append([tb.t, tb.epsilon, tb.term_trace, tb.term_deviation, tb.term_mean, tb.probability])
    header = ["t", "epsilon", "term_trace", "term_deviation", "term_mean", "probability"]
    _emit(_rows_to_text(header, rows, cfg.get("format")), cfg)
    return EXIT_OK


def cmd_simulate(cfg: Config) -> int:
    A, mu = _load_problem(cfg)
    spec, params = _spec_and_params(cfg, A, mu)
    tail = montecarlo.estimate_tail(
        A, spec, params,
        t_grid=_float_list(cfg.get("t")),
        n_trials=int(cfg.get("trials", 100_000)),
        master_seed=cfg.seed(),
        n_streams=int(cfg.get("streams")),
    )
    report = montecarlo.certify(tail)
    if cfg.get("format") == "json":
        rows = []
        for i, t in enumerate(tail.t_grid):
            rows.append({
                "t": float(t), "threshold": float(tail.thresholds[i]),
                "exceed_count": int(tail.exceed_counts[i]), "n_trials": tail.n_trials,
                "empirical_rate": float(tail.empirical_rate[i]), "ci_upper": float(tail.ci_upper[i]),
                "target": float(tail.target[i]), "certifying": bool(tail.certifying[i]),
                "pass": bool(report.passed[i]),
            })
        _emit(json.dumps(rows, indent=2) + "\n", cfg)
    else:
        _emit(montecarlo.tail_to_csv(tail, report), cfg)
    return EXIT_OK if report.all_passed else EXIT_FAILED


def cmd_mgf(cfg: Config) -> int:
    A, mu = _load_problem(cfg)
    spec, params = _spec_and_params(cfg, A, mu)
    etas = cfg.get("eta")
    if etas is None:
        raise InputError("--eta is required")
    check = montecarlo.estimate_mgf(
        A, spec, params, _float_list(etas),
        n_trials=int(cfg.get("trials", 1_000_000)),
        master_seed=cfg.seed(),
    )
    ok = check.chain_holds()
    if cfg.get("format") == "json":
        rows = [
            {"eta": float(check.eta_grid[i]), "empirical": float(check.empirical[i]),
             "empirical_se": float(check.empirical_se[i]),
             "decoupled_empirical": float(check.decoupled_empirical[i]),
             "decoupled_se": float(check.decoupled_se[i]), "bound": float(check.bound[i]),
             "chain_ok": bool(ok[i])}
            for i in range(check.eta_grid.size)
        ]
        _emit(json.dumps(rows, indent=2) + "\n", cfg)
    else:
        _emit(montecarlo.mgf_to_csv(check), cfg)
    return EXIT_OK if bool(np.all(ok)) else EXIT_FAILED


def cmd_ols(cfg: Config) -> int:
    seed = cfg.seed()
    matrix = cfg.get("matrix")
    if matrix:
        design = regression.FixedDesign(read_matrix_csv(matrix))
    else:
        design = regression.random_design(int(cfg.get("n")), int(cfg.get("d")), seed)
    beta_path = cfg.get("beta")
    beta = read_vector_csv(beta_path) if beta_path else np.ones(design.d)
    noise = SubgaussianSpec(cfg.get("family"), design.n, scale=float(cfg.get("scale")))
    report = regression.run_experiment(
        design, beta, noise,
        replicates=int(cfg.get("trials", 10_000)),
        t_grid=_float_list(cfg.get("t")),
        master_seed=seed,
        convention=cfg.get("convention"),
        n_streams=int(cfg.get("streams")),
    )
    if cfg.get("format") == "json":
        _emit(report.to_json() + "\n", cfg)
    else:
        _emit(report.to_csv(), cfg)
    summary_path = cfg.get("summary")
    if summary_path:
        Path(summary_path).write_text(report.to_json() + "\n")
    return EXIT_OK if bool(np.all(report.passed)) else EXIT_FAILED


def cmd_compare(cfg: Config) -> int:
    A, _ = _load_problem(cfg)
    summary = summarize(A)
    norms = np.linalg.norm(A, axis=0)
    rows = []
    for t in _float_list(cfg.get("t")):
        c = bounds.compare_bounds(summary, norms, t)
        rows.append([c.t, c.theorem_bound, c.bernstein_squared, c.ratio])
    _emit(_rows_to_text(["t", "theorem_bound", "bernstein_squared", "ratio"], rows, cfg.get("format")), cfg)
    return EXIT_OK


def cmd_acceptance(cfg: Config) -> int:
    from . import acceptance

    only = cfg.get("only")
    selected = [int(x) for x in _float_list(only)] if only else None
    results = acceptance.run_all(selected, seed=cfg.get("seed"))
    for r in results:
        print(r.line(), flush=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "mgf": cmd_mgf,
    "ols": cmd_ols,
    "compare": cmd_compare,
    "acceptance": cmd_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qft", description="Tail bounds for quadratic forms in subgaussian vectors")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, matrix=True):
        p.add_argument("--config", help="JSON file with the same field names as the flags")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=["csv", "json"])
        if matrix:
            p.add_argument("--matrix", help="CSV matrix, one row per line")
            p.add_argument("--mu", help="single-line CSV mean vector")
        p.add_argument("--t", help="comma-separated t grid")

    def sampling(p):
        p.add_argument("--family", choices=["gaussian", "rademacher", "uniform", "uniform_symmetric"])
        p.add_argument("--scale", type=float)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")

    p = sub.add_parser("bound", help="evaluate the tail bound per t")
    common(p)
    p.add_argument("--sigma", type=float)

    p = sub.add_parser("simulate", help="Monte Carlo exceedance certification")
    common(p)
    sampling(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--streams", type=int)

    p = sub.add_parser("mgf", help="Monte Carlo check of the MGF bound chain")
    common(p)
    sampling(p)
    p.add_argument("--sigma", type=float)
    p.add_argument("--eta", help="comma-separated eta grid")

    p = sub.add_parser("ols", help="fixed-design OLS excess-risk experiment")
    common(p, matrix=False)
    sampling(p)
    p.add_argument("--matrix", help="design CSV (rows are x_i); omit for a seeded Gaussian design")
    p.add_argument("--beta", help="single-line CSV of the true coefficients (default all ones)")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--streams", type=int)
    p.add_argument("--convention", choices=list(regression.CONVENTIONS))
    p.add_argument("--summary", help="also write the JSON summary here")

    p = sub.add_parser("compare", help="quadratic-form bound vs squared vector Bernstein bound")
    common(p)

    p = sub.add_parser("acceptance", help="run the acceptance criteria")
    p.add_argument("--config")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--seed", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args)
        return COMMANDS[args.command](cfg)
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
