"""Monte Carlo estimation of tails and MGFs with exact binomial upper
confidence bounds.

Trials are generated in fixed chunks of ``CHUNK_SIZE``; chunk ``c`` always
draws from ``SeededStream(master_seed, c)``.  ``n_streams`` workers each take
a contiguous block of ``n_trials // n_streams`` trials (the last takes the
remainder) and regenerate the chunks overlapping their block, so results are
bit-identical for any number of streams.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats

from .bounds import SubgaussianParams, mgf_upper_bound, subgaussian_quadratic_bound, vector_bernstein_bound
from .errors import DomainError, InputError
from .samplers import MartingaleSpec, SeededStream, SubgaussianSpec, martingale_sums, sample_vectors
from .spectral import as_matrix, summarize

CHUNK_SIZE = 4096
CONFIDENCE = 0.99
MIN_TRIALS = 1000
# grid points with fewer expected exceedances than this are not certified
MIN_EXPECTED_EXCEEDANCES = 10.0
MGF_SAFETY = 0.9
DEFAULT_T_GRID = (0.5, 1.0, 2.0, 3.0, 5.0)

StatFn = Callable[[SeededStream, int], np.ndarray]


def binomial_upper(k: int, n: int, confidence: float = CONFIDENCE) -> float:
    """One-sided exact (Clopper-Pearson) upper confidence bound for a
    binomial proportion with ``k`` successes in ``n`` trials."""
    if n <= 0 or k < 0 or k > n:
        raise InputError(f"invalid binomial counts k={k}, n={n}")
    if k == n:
        return 1.0
    if k == 0:
        # closed form of the beta quantile at k = 0
        return -math.expm1(math.log1p(-confidence) / n)
    return float(stats.beta.ppf(confidence, k + 1, n - k))


def stream_blocks(n_trials: int, n_streams: int) -> List[tuple]:
    """Contiguous [start, stop) trial blocks, one per stream."""
    if n_streams < 1:
        raise InputError(f"n_streams must be >= 1, got {n_streams}")
    n_streams = min(n_streams, n_trials)
    width = n_trials // n_streams
    blocks = [(k * width, (k + 1) * width) for k in range(n_streams)]
    blocks[-1] = (blocks[-1][0], n_trials)
    return blocks


def _run_block(stat_fn: StatFn, master_seed: int, lane: int, start: int, stop: int) -> np.ndarray:
    pieces = []
    for chunk in range(start // CHUNK_SIZE, -(-stop // CHUNK_SIZE)):
        base = chunk * CHUNK_SIZE
        values = np.asarray(stat_fn(SeededStream(master_seed, chunk, lane), CHUNK_SIZE))
        pieces.append(values[max(start, base) - base : min(stop, base + CHUNK_SIZE) - base])
    return np.concatenate(pieces, axis=0)


def run_trials(stat_fn: StatFn, n_trials: int, master_seed: int, n_streams: int = 1, lane: int = 0) -> np.ndarray:
    """Evaluate ``stat_fn`` over ``n_trials`` seeded trials.

    ``stat_fn(stream, size)`` must return an array with leading dimension
    ``size`` computed only from draws of ``stream``.
    """
    if n_trials < 1:
        raise InputError(f"n_trials must be >= 1, got {n_trials}")
    blocks = stream_blocks(int(n_trials), int(n_streams))
    if len(blocks) == 1:
        return _run_block(stat_fn, master_seed, lane, *blocks[0])
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        parts = list(pool.map(lambda b: _run_block(stat_fn, master_seed, lane, *b), blocks))
    return np.concatenate(parts, axis=0)


def _check_t_grid(t_grid: Sequence[float]) -> np.ndarray:
    ts = np.asarray([float(t) for t in t_grid])
    if ts.size == 0:
        raise InputError("t grid is empty")
    if np.any(~(ts > 0)) or np.any(~np.isfinite(ts)):
        raise DomainError("every t must be finite and > 0")
    if np.any(np.diff(ts) <= 0):
        raise InputError("t grid must be strictly increasing")
    return ts


@dataclass(frozen=True)
class EmpiricalTail:
    """Exceedance counts of a statistic against bound thresholds.

    ``stat_mean``/``stat_se`` summarize the squared statistic (||Ax||^2, or
    ||sum u_i||^2 for martingale runs).
    """

    t_grid: np.ndarray
    thresholds: np.ndarray
    exceed_counts: np.ndarray
    n_trials: int
    ci_upper: np.ndarray
    target: np.ndarray
    certifying: np.ndarray
    stat_mean: float = float("nan")
    stat_se: float = float("nan")

    @property
    def empirical_rate(self) -> np.ndarray:
        return self.exceed_counts / self.n_trials


def _tail_from_stat(ts: np.ndarray, thresholds: np.ndarray, stat: np.ndarray, squared: np.ndarray) -> EmpiricalTail:
    n = int(stat.shape[0])
    counts = np.array([int(np.count_nonzero(stat > thr)) for thr in thresholds], dtype=np.int64)
    target = np.exp(-ts)
    return EmpiricalTail(
        t_grid=ts,
        thresholds=np.asarray(thresholds, dtype=np.float64),
        exceed_counts=counts,
        n_trials=n,
        ci_upper=np.array([binomial_upper(int(k), n) for k in counts]),
        target=target,
        certifying=target * n >= MIN_EXPECTED_EXCEEDANCES,
        stat_mean=float(np.mean(squared)),
        stat_se=float(np.std(squared, ddof=1) / math.sqrt(n)) if n > 1 else float("nan"),
    )


def estimate_tail(
    A,
    spec: SubgaussianSpec,
    params: SubgaussianParams,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    n_trials: int = 100_000,
    master_seed: int = 0,
    n_streams: int = 1,
) -> EmpiricalTail:
    """Count trials with ||Ax||^2 above the subgaussian bound at each t."""
    A = as_matrix(A)
    if A.shape[1] != spec.dimension:
        raise InputError(f"matrix has {A.shape[1]} columns but the spec has dimension {spec.dimension}")
    if n_trials < MIN_TRIALS:
        raise InputError(f"n_trials must be >= {MIN_TRIALS}, got {n_trials}")
    if spec.declared_sigma > params.sigma:
        raise InputError(f"sigma={params.sigma} is below the family's certified proxy {spec.declared_sigma}")
    if spec.has_mean and not params.mu_supplied:
        raise InputError("the sampled distribution has nonzero mean; the bound needs mu_supplied=True")
    ts = _check_t_grid(t_grid)
    summary = summarize(A, spec.mu if params.mu_supplied else None)
    thresholds = np.array([subgaussian_quadratic_bound(summary, params, t).epsilon for t in ts])
    AT = A.T.copy()

    def stat_fn(stream: SeededStream, size: int) -> np.ndarray:
        y = sample_vectors(spec, stream, size) @ AT
        return np.einsum("ij,ij->i", y, y)

    sq = run_trials(stat_fn, n_trials, master_seed, n_streams)
    return _tail_from_stat(ts, thresholds, sq, sq)


def martingale_experiment(
    spec: MartingaleSpec,
    t_grid: Sequence[float] = DEFAULT_T_GRID,
    n_trials: int = 100_000,
    master_seed: int = 0,
    n_streams: int = 1,
) -> EmpiricalTail:
    """Count trials with ||sum u_i|| above sqrt(v) + sqrt(8vt) + (4/3) b t."""
    if n_trials < MIN_TRIALS:
        raise InputError(f"n_trials must be >= {MIN_TRIALS}, got {n_trials}")
    ts = _check_t_grid(t_grid)
    v, b = spec.v_bound, spec.b_bound
    thresholds = np.array([vector_bernstein_bound(v, b, t) for t in ts])

    def stat_fn(stream: SeededStream, size: int) -> np.ndarray:
        s = martingale_sums(spec, stream, size)
        return np.einsum("ij,ij->i", s, s)

    sq = run_trials(stat_fn, n_trials, master_seed, n_streams)
    return _tail_from_stat(ts, thresholds, np.sqrt(sq), sq)


@dataclass(frozen=True)
class CertificationReport:
    passed: np.ndarray
    certifying: np.ndarray
    margin: np.ndarray  # target - ci_upper
    worst_margin: float

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))


def certify(tail: EmpiricalTail) -> CertificationReport:
    """Point i passes when ci_upper[i] <= target[i] or it is not certifying."""
    margin = tail.target - tail.ci_upper
    passed = (tail.ci_upper <= tail.target) | ~tail.certifying
    cert = margin[tail.certifying]
    worst = float(cert.min()) if cert.size else float("nan")
    return CertificationReport(passed=passed, certifying=tail.certifying.copy(), margin=margin, worst_margin=worst)


@dataclass(frozen=True)
class MgfCheck:
    eta_grid: np.ndarray
    empirical: np.ndarray
    empirical_se: np.ndarray
    bound: np.ndarray
    decoupled_empirical: np.ndarray
    decoupled_se: np.ndarray
    n_trials: int

    def chain_holds(self, k: float = 3.0) -> np.ndarray:
        """Per-point check of empirical <= decoupled <= bound up to k SE."""
        combined = np.sqrt(self.empirical_se**2 + self.decoupled_se**2)
        first = self.empirical <= self.decoupled_empirical + k * combined
        rel = np.divide(self.decoupled_se, self.decoupled_empirical, out=np.zeros_like(self.decoupled_se), where=self.decoupled_empirical > 0)
        second = self.decoupled_empirical <= self.bound * (1.0 + k * rel)
        return first & second


def _mean_se(values: np.ndarray) -> tuple:
    n = values.shape[0]
    return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(n)


def estimate_mgf(
    A,
    spec: SubgaussianSpec,
    params: SubgaussianParams,
    eta_grid: Sequence[float],
    n_trials: int = 1_000_000,
    master_seed: int = 0,
) -> MgfCheck:
    """Empirical E exp(eta ||Ax||^2) next to the Gaussian-decoupled expectation
    E exp(sigma^2 ||A^T z||^2 eta + mu^T A^T z sqrt(2 eta)) and the closed-form bound."""
    A = as_matrix(A)
    if A.shape[1] != spec.dimension:
        raise InputError(f"matrix has {A.shape[1]} columns but the spec has dimension {spec.dimension}")
    if spec.declared_sigma > params.sigma:
        raise InputError(f"sigma={params.sigma} is below the family's certified proxy {spec.declared_sigma}")
    if n_trials < 2:
        raise InputError("n_trials must be >= 2")
    etas = np.asarray([float(e) for e in eta_grid])
    summary = summarize(A, spec.mu)
    var = params.sigma**2
    scale = var * summary.op_norm
    if scale > 0:
        limit = MGF_SAFETY / (2.0 * scale)
        bad = etas[(etas > limit) | (etas < 0)]
        if bad.size:
            raise DomainError(f"eta={bad[0]} rejected: eta must lie in [0, {limit}] (0.9 of the boundary 1/(2 sigma^2 ||Sigma||) = {1.0 / (2.0 * scale)})")
    elif np.any(etas < 0):
        raise DomainError("eta must be >= 0")
    bound_params = SubgaussianParams(params.sigma, mu_supplied=True)
    bounds = np.array([mgf_upper_bound(summary, bound_params, e) for e in etas])
    AT = A.T.copy()
    image_mu = A @ spec.mu

    def x_stat(stream: SeededStream, size: int) -> np.ndarray:
        y = sample_vectors(spec, stream, size) @ AT
        return np.einsum("ij,ij->i", y, y)

    def z_stat(stream: SeededStream, size: int) -> np.ndarray:
        z = stream.rng.standard_normal((size, A.shape[0]))
        w = z @ A
        return np.column_stack([np.einsum("ij,ij->i", w, w), z @ image_mu])

    sq = run_trials(x_stat, n_trials, master_seed, lane=0)
    zq = run_trials(z_stat, n_trials, master_seed, lane=1)
    emp, emp_se = _mean_se(np.exp(np.outer(sq, etas)))
    dec_vals = np.exp(var * np.outer(zq[:, 0], etas) + np.outer(zq[:, 1], np.sqrt(2.0 * etas)))
    dec, dec_se = _mean_se(dec_vals)
    return MgfCheck(
        eta_grid=etas,
        empirical=emp,
        empirical_se=emp_se,
        bound=bounds,
        decoupled_empirical=dec,
        decoupled_se=dec_se,
        n_trials=int(n_trials),
    )


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def tail_to_csv(tail: EmpiricalTail, report: Optional[CertificationReport] = None) -> str:
    report = report or certify(tail)
    buf = io.StringIO()
    buf.write("t,threshold,exceed_count,n_trials,empirical_rate,ci_upper,target,pass\n")
    for i in range(tail.t_grid.size):
        row = [
            _fmt(tail.t_grid[i]),
            _fmt(tail.thresholds[i]),
            str(int(tail.exceed_counts[i])),
            str(tail.n_trials),
            _fmt(tail.empirical_rate[i]),
            _fmt(tail.ci_upper[i]),
            _fmt(tail.target[i]),
            ("true" if report.passed[i] else "false") if tail.certifying[i] else "uncertified",
        ]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def mgf_to_csv(check: MgfCheck) -> str:
    buf = io.StringIO()
    buf.write("eta,empirical,empirical_se,decoupled_empirical,decoupled_se,bound,chain_ok\n")
    ok = check.chain_holds()
    for i in range(check.eta_grid.size):
        row = [_fmt(v[i]) for v in (check.eta_grid, check.empirical, check.empirical_se, check.decoupled_empirical, check.decoupled_se, check.bound)]
        buf.write(",".join(row + ["true" if ok[i] else "false"]) + "\n")
    return buf.getvalue()
