"""Acceptance criteria, runnable from the CLI (``qft acceptance``) and from
``tests/test_acceptance.py``.

Each criterion returns a :class:`CriterionResult`; nothing here raises on a
failed check.
"""

from __future__ import annotations

import contextlib
import io
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from . import bounds, montecarlo, regression
from .samplers import MartingaleSpec, SeededStream, SubgaussianSpec
from .spectral import summarize, write_matrix_csv

ACCEPTANCE_SEED = 1234
VALIDITY_T = (0.5, 1.0, 2.0, 3.0)
VALIDITY_TRIALS = 100_000


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.detail}"


def _rng(seed: int, lane: int) -> np.random.Generator:
    return SeededStream(seed, 0, lane=lane).rng


def validity_matrices(seed: int = ACCEPTANCE_SEED) -> Dict[str, np.ndarray]:
    return {
        "I10": np.eye(10),
        "diag(1..10)": np.diag(np.arange(1.0, 11.0)),
        "rank1 [3,4]": np.outer([3.0, 4.0], [3.0, 4.0]),
        "random 5x20": _rng(seed, 11).standard_normal((5, 20)),
    }


def validity_families(n: int):
    """(label, spec, params) for the four sampling configurations."""
    return [
        ("gaussian", SubgaussianSpec("gaussian", n), bounds.SubgaussianParams(1.0)),
        ("rademacher", SubgaussianSpec("rademacher", n), bounds.SubgaussianParams(1.0)),
        ("uniform", SubgaussianSpec("uniform_symmetric", n), bounds.SubgaussianParams(1.0 / math.sqrt(3.0))),
        ("gaussian+mu", SubgaussianSpec("gaussian", n, mu=np.full(n, 0.5)), bounds.SubgaussianParams(1.0, True)),
    ]


def criterion_1(seed: int) -> CriterionResult:
    failures, worst, points = [], math.inf, 0
    for mname, A in validity_matrices(seed).items():
        for k, (fname, spec, params) in enumerate(validity_families(A.shape[1])):
            tail = montecarlo.estimate_tail(A, spec, params, VALIDITY_T, VALIDITY_TRIALS, seed + k, n_streams=4)
            rep = montecarlo.certify(tail)
            points += int(np.count_nonzero(tail.certifying))
            worst = min(worst, rep.worst_margin)
            if not rep.all_passed:
                failures.append(f"{mname}/{fname}")
    detail = f"{points} certified points, worst margin target-ci_upper={worst:.4g}"
    if failures:
        detail += "; failed: " + ", ".join(failures)
    return CriterionResult(1, "validity suite", not failures, detail)


def criterion_2(seed: int) -> CriterionResult:
    rng = _rng(seed, 20)
    ts = np.linspace(0.1, 10.0, 100)
    mismatches = 0
    for _ in range(100):
        m, n = rng.integers(1, 9, size=2)
        s = summarize(rng.standard_normal((m, n)) * rng.uniform(0.1, 5.0))
        for t in ts:
            a = bounds.subgaussian_quadratic_bound(s, bounds.SubgaussianParams(1.0, False), t)
            b = bounds.gaussian_quadratic_bound(s, t)
            if a != b:
                mismatches += 1
    return CriterionResult(2, "sigma=1, mu=0 reduction", mismatches == 0, f"{mismatches} mismatches over 100 matrices x {ts.size} t values")


def criterion_3(seed: int) -> CriterionResult:
    rng = _rng(seed, 30)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 21))
        rho = rng.lognormal(0.0, 1.5, size=k)
        s = bounds.SpectralSummary.from_rho(rho)
        sigma = float(rng.uniform(0.1, 3.0))
        t = float(math.exp(rng.uniform(math.log(0.01), math.log(20.0))))
        eps = bounds.subgaussian_quadratic_bound(s, bounds.SubgaussianParams(sigma), t).epsilon
        p = bounds.tail_probability_at(s, sigma, eps)
        worst = max(worst, abs(p - math.exp(-t)) / math.exp(-t))
    return CriterionResult(3, "Chernoff round trip", worst <= 1e-12, f"max relative error {worst:.3g} (tol 1e-12)")


def criterion_4(seed: int) -> CriterionResult:
    ok, parts = True, []
    for t in (0.5, 1.0, 2.0, 5.0):
        level = bounds.chi2_tail_bound([1.0], t)
        oracle = math.erfc(math.sqrt(level / 2.0))  # P[chi2_1 > level] = 2 Phi-bar(sqrt(level))
        direct = 1.0 + 2.0 * math.sqrt(t) + 2.0 * t
        ok &= oracle <= math.exp(-t) and abs(level - direct) <= 1e-12 * direct
        parts.append(f"t={t:g}: {oracle:.3g}<={math.exp(-t):.3g}")
    level = bounds.gaussian_quadratic_bound(summarize(np.eye(100)), 1.0).epsilon
    sf = float(stats.chi2.sf(level, 100))
    ok &= abs(level - 122.0) <= 1e-12 * 122.0 and sf <= math.exp(-1.0)
    parts.append(f"P[chi2_100>{level:g}]={sf:.3g}")
    return CriterionResult(4, "chi-square oracle", bool(ok), "; ".join(parts))


def criterion_5(seed: int) -> CriterionResult:
    etas = np.round(np.arange(1, 9) * 0.05, 10)
    s = summarize(np.eye(1))
    closed_ok = all(1.0 / math.sqrt(1.0 - 2.0 * e) <= bounds.mgf_upper_bound(s, bounds.SubgaussianParams(1.0), e) for e in etas)
    check = montecarlo.estimate_mgf(np.eye(1), SubgaussianSpec("gaussian", 1), bounds.SubgaussianParams(1.0), etas, 1_000_000, seed)
    chain1 = check.chain_holds()
    # nonzero-mean chain: A = I_2, ||A mu||^2 = 1
    check2 = montecarlo.estimate_mgf(np.eye(2), SubgaussianSpec("gaussian", 2, mu=[1.0, 0.0]), bounds.SubgaussianParams(1.0), [0.0, 0.1, 0.2], 1_000_000, seed + 1)
    chain2 = check2.chain_holds()
    ok = closed_ok and bool(np.all(chain1)) and bool(np.all(chain2))
    detail = f"closed form {'ok' if closed_ok else 'violated'}; chain A=[1]: {int(chain1.sum())}/{chain1.size}, A=I2 mu: {int(chain2.sum())}/{chain2.size}"
    return CriterionResult(5, "MGF domination", ok, detail)


def exact_gaussian_cgf(alpha, beta, lam: float) -> float:
    """log E exp(lam sum a_i z_i^2 + sum b_i z_i), coordinatewise Gaussian integrals."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    return float(np.sum(0.5 * b * b / (1.0 - 2.0 * a * lam) - 0.5 * np.log1p(-2.0 * a * lam)))


def criterion_6(seed: int) -> CriterionResult:
    rng = _rng(seed, 60)
    violations, small, worst_gap = 0, 0, 0.0
    for _ in range(50):
        m = int(rng.integers(1, 4))
        alpha = rng.uniform(0.0, 1.0, size=m)
        beta = rng.standard_normal(m)
        lam = float(rng.uniform(0.0, 1.0 / (2.0 * alpha.max())))
        exact = exact_gaussian_cgf(alpha, beta, lam)
        bound = bounds.gaussian_cgf_bound(alpha, beta, lam)
        if exact > bound * (1.0 + 1e-12):
            violations += 1
        if lam <= 0.1 / alpha.max():
            small += 1
            worst_gap = max(worst_gap, (bound - exact) / exact)
    ok = violations == 0 and worst_gap < 0.10
    detail = f"{violations} bound violations; worst relative gap {worst_gap:.3%} over {small} small-lambda triples (limit 10%)"
    return CriterionResult(6, "Gaussian CGF oracle", ok, detail)


def criterion_7(seed: int) -> CriterionResult:
    design = regression.random_design(50, 2, seed)
    beta = np.ones(2)
    g = regression.run_experiment(design, beta, SubgaussianSpec("gaussian", 50), 10_000, (0.5, 1.0, 2.0), seed)
    r = regression.run_experiment(design, beta, SubgaussianSpec("rademacher", 50), 10_000, (0.5, 1.0, 2.0), seed + 1)
    rel = abs(g.mean_loss - 0.04) / 0.04
    ok = rel <= 0.05 and bool(np.all(g.passed)) and bool(np.all(r.passed))
    detail = (
        f"mean loss {g.mean_loss:.5f} vs 0.04 ({rel:.2%}); gaussian violations {g.violation_counts.tolist()}, "
        f"rademacher violations {r.violation_counts.tolist()} of 10000"
    )
    return CriterionResult(7, "OLS excess risk", ok, detail)


def criterion_8(seed: int) -> CriterionResult:
    s = summarize(np.eye(100))
    norms = np.ones(100)
    ts = np.concatenate([np.linspace(1.0, 100.0, 397), [1e3, 1e4]])
    smaller = all(bounds.compare_bounds(s, norms, t).ratio < 1.0 for t in ts)
    c = bounds.compare_bounds(s, norms, 25.0)
    hand = 250.0 / (10.0 + math.sqrt(8.0 * 100.0 * 25.0) + (4.0 / 3.0) * 25.0) ** 2
    ok = smaller and abs(c.ratio - hand) <= 1e-12 * hand and round(c.ratio, 4) == 0.0073
    return CriterionResult(8, "suboptimality of vector Bernstein", ok, f"theorem smaller on all {ts.size} t>=1; ratio(t=25)={c.ratio:.6f}")


def criterion_9(seed: int) -> CriterionResult:
    ts = (0.5, 1.0, 2.0)
    parts, ok = [], True
    for k, gain in enumerate((False, True)):
        spec = MartingaleSpec(np.eye(100), adapted_gain=gain)
        tail = montecarlo.martingale_experiment(spec, ts, 100_000, seed + k)
        passed = montecarlo.certify(tail).all_passed
        ok &= passed
        parts.append(f"{'gain' if gain else 'plain'}: counts {tail.exceed_counts.tolist()}")
        if not gain:
            ok &= abs(tail.stat_mean - spec.v_bound) <= 3.0 * tail.stat_se
    # nontrivial identity check with non-orthogonal increments
    cols = _rng(seed, 90).standard_normal((5, 10))
    spec = MartingaleSpec(cols)
    tail = montecarlo.martingale_experiment(spec, ts, 100_000, seed + 2)
    z = (tail.stat_mean - spec.v_bound) / tail.stat_se
    ok &= abs(z) <= 3.0 and montecarlo.certify(tail).all_passed
    parts.append(f"E||s||^2 vs sum||a_i||^2: z={z:.2f}")
    return CriterionResult(9, "vector Bernstein validity", bool(ok), "; ".join(parts))


def _cli_output(argv: List[str]) -> tuple:
    from .cli import main

    with contextlib.redirect_stdout(io.StringIO()):
        code = main(argv)
    return code, Path(argv[argv.index("--out") + 1]).read_bytes()


def criterion_10(seed: int) -> CriterionResult:
    with tempfile.TemporaryDirectory() as tmp:
        tmpdir = Path(tmp)
        write_matrix_csv(tmpdir / "I10.csv", np.eye(10))
        write_matrix_csv(tmpdir / "A1.csv", np.eye(1))
        runs = {
            "simulate": ["simulate", "--matrix", str(tmpdir / "I10.csv"), "--trials", "100000", "--streams", "4"],
            "ols": ["ols", "--n", "50", "--d", "2", "--trials", "10000", "--streams", "4"],
            "mgf": ["mgf", "--matrix", str(tmpdir / "A1.csv"), "--eta", "0,0.1,0.2", "--trials", "100000"],
        }
        same = {}
        for name, argv in runs.items():
            outs = []
            for rep in range(2):
                out = str(tmpdir / f"{name}{rep}.csv")
                outs.append(_cli_output(argv + ["--seed", str(seed), "--out", out])[1])
            same[name] = outs[0] == outs[1]
    spec = SubgaussianSpec("rademacher", 10)
    A = validity_matrices(seed)["diag(1..10)"]
    one = montecarlo.estimate_tail(A, spec, bounds.SubgaussianParams(1.0), VALIDITY_T, VALIDITY_TRIALS, seed, n_streams=1)
    many = montecarlo.estimate_tail(A, spec, bounds.SubgaussianParams(1.0), VALIDITY_T, VALIDITY_TRIALS, seed, n_streams=16)
    counts_same = bool(np.array_equal(one.exceed_counts, many.exceed_counts))
    ok = all(same.values()) and counts_same
    detail = ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items())
    detail += f"; 1 vs 16 streams counts {'equal' if counts_same else 'differ'}"
    return CriterionResult(10, "determinism", ok, detail)


CRITERIA: Dict[int, Callable[[int], CriterionResult]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(selected: Optional[Sequence[int]] = None, seed: Optional[int] = None) -> List[CriterionResult]:
    seed = ACCEPTANCE_SEED if seed is None else int(seed)
    numbers = sorted(CRITERIA) if not selected else list(selected)
    return [CRITERIA[n](seed) for n in numbers]
