"""Closed-form tail and MGF bounds for ||Ax||^2 and the auxiliary
martingale and chi-square inequalities.

Every function here is pure float64 arithmetic on already-computed spectral
functionals.  Domain violations raise :class:`DomainError` with the
violated boundary in the message; malformed inputs raise
:class:`InputError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError
from .spectral import SpectralSummary, as_vector


@dataclass(frozen=True)
class SubgaussianParams:
    """Subgaussian proxy ``sigma``: E exp(a^T (x - mu)) <= exp(|a|^2 sigma^2 / 2).

    ``mu_supplied`` selects whether the bound includes the ||A mu||^2 term.
    """

    sigma: float = 1.0
    mu_supplied: bool = False

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise InputError(f"sigma must be finite and >= 0, got {self.sigma}")


@dataclass(frozen=True)
class TailBound:
    """Value ``epsilon`` with P[||Ax||^2 > epsilon] <= exp(-t), split into
    its trace, deviation and mean parts."""

    t: float
    epsilon: float
    term_trace: float
    term_deviation: float
    term_mean: float

    @property
    def probability(self) -> float:
        return math.exp(-self.t)


def _check_t(t: float) -> float:
    t = float(t)
    if not t > 0 or not math.isfinite(t):
        raise DomainError(f"t must be finite and > 0, got {t}")
    return t


def _check_nonneg(**values: float) -> None:
    for name, v in values.items():
        if not (v >= 0 and math.isfinite(v)):
            raise InputError(f"{name} must be finite and >= 0, got {v}")


def h1(a: float) -> float:
    """h1(a) = 1 + a - sqrt(1 + 2a) for a >= 0.

    Evaluated as a^2 / (1 + a + sqrt(1 + 2a)), which is the same quantity
    without the cancellation at small a.
    """
    a = float(a)
    if not a >= 0:
        raise DomainError(f"h1 is defined for a >= 0, got {a}")
    if math.isinf(a):
        return math.inf
    return a * a / (1.0 + a + math.sqrt(1.0 + 2.0 * a))


def h1_inverse(b: float) -> float:
    """Inverse of :func:`h1`: sqrt(2b) + b."""
    b = float(b)
    if not b >= 0:
        raise DomainError(f"h1_inverse is defined for b >= 0, got {b}")
    return math.sqrt(2.0 * b) + b


def _mean_factor(s: SpectralSummary, t: float) -> float:
    # (1 + 4 (r t)^(1/2) + 4 r t)^(1/2) with r = ||Sigma||^2 / tr(Sigma^2)
    r = s.op_norm * s.op_norm / s.trace_sigma_sq
    return math.sqrt(1.0 + 4.0 * math.sqrt(r * t) + 4.0 * r * t)


def subgaussian_quadratic_bound(s: SpectralSummary, p: SubgaussianParams, t: float) -> TailBound:
    """Upper tail bound for ||Ax||^2 when x is subgaussian with proxy sigma.

    epsilon = sigma^2 (tr S + 2 sqrt(tr S^2 t) + 2 ||S|| t)
              + ||A mu||^2 (1 + 4 sqrt(||S||^2 t / tr S^2) + 4 ||S||^2 t / tr S^2)^(1/2)

    When tr(Sigma^2) = 0 the matrix is zero and the mean term is 0.
    """
    t = _check_t(t)
    var = p.sigma * p.sigma
    term_trace = var * s.trace_sigma
    term_deviation = var * (2.0 * math.sqrt(s.trace_sigma_sq * t) + 2.0 * s.op_norm * t)
    term_mean = 0.0
    if p.mu_supplied:
        if s.mean_image_sq is None:
            raise InputError("mean term requested but the summary carries no ||A mu||^2")
        if s.trace_sigma_sq > 0:
            term_mean = s.mean_image_sq * _mean_factor(s, t)
    return TailBound(
        t=t,
        epsilon=term_trace + term_deviation + term_mean,
        term_trace=term_trace,
        term_deviation=term_deviation,
        term_mean=term_mean,
    )


def gaussian_quadratic_bound(s: SpectralSummary, t: float) -> TailBound:
    """tr S + 2 sqrt(tr S^2 t) + 2 ||S|| t, the isotropic standard Gaussian case."""
    return subgaussian_quadratic_bound(s, SubgaussianParams(1.0, False), t)


def tail_probability_at(s: SpectralSummary, sigma: float, epsilon: float) -> float:
    """Chernoff bound on P[||Ax||^2 > epsilon] for mean-zero x (proxy sigma).

    Returns exp(-(tr S^2 / (2 ||S||^2)) h1(||S|| tau / tr S^2)) with
    tau = epsilon / sigma^2 - tr S, and 1 when tau <= 0.
    """
    _check_nonneg(sigma=sigma)
    epsilon = float(epsilon)
    if sigma == 0 or s.trace_sigma_sq == 0:
        # ||Ax||^2 = 0 almost surely
        return 0.0 if epsilon > 0 else 1.0
    tau = epsilon / (sigma * sigma) - s.trace_sigma
    if tau <= 0:
        return 1.0
    exponent = s.trace_sigma_sq / (2.0 * s.op_norm * s.op_norm) * h1(s.op_norm * tau / s.trace_sigma_sq)
    return math.exp(-exponent)


def mgf_upper_bound(s: SpectralSummary, p: SubgaussianParams, eta: float) -> float:
    """Bound on E exp(eta ||Ax||^2) for 0 <= eta < 1/(2 sigma^2 ||S||)."""
    eta = float(eta)
    var = p.sigma * p.sigma
    scale = var * s.op_norm
    if not eta >= 0:
        raise DomainError(f"eta must be >= 0, got {eta}")
    if scale > 0 and not eta < 1.0 / (2.0 * scale):
        raise DomainError(f"eta={eta} outside domain: requires eta < 1/(2 sigma^2 ||Sigma||) = {1.0 / (2.0 * scale)}")
    mean_sq = s.mean_image_sq if (p.mu_supplied and s.mean_image_sq is not None) else 0.0
    num = var * var * s.trace_sigma_sq * eta * eta + mean_sq * eta
    return math.exp(var * s.trace_sigma * eta + num / (1.0 - 2.0 * scale * eta))


def gaussian_cgf_bound(alpha: Sequence[float], beta: Sequence[float], lam: float) -> float:
    """Upper bound on log E exp(lam sum alpha_i z_i^2 + sum beta_i z_i), z ~ N(0, I).

    ||alpha||_1 lam + (||alpha||_2^2 lam^2 + ||beta||_2^2 / 2) / (1 - 2 ||alpha||_inf lam)
    """
    a = as_vector(alpha, name="alpha")
    b = as_vector(beta, a.shape[0], name="beta")
    if np.any(a < 0):
        raise InputError("alpha must be nonnegative")
    lam = float(lam)
    amax = float(a.max()) if a.size else 0.0
    if not lam >= 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if amax > 0 and not lam < 1.0 / (2.0 * amax):
        raise DomainError(f"lambda={lam} outside domain: requires lambda < 1/(2 max alpha) = {1.0 / (2.0 * amax)}")
    return float(np.sum(a)) * lam + (float(a @ a) * lam * lam + float(b @ b) / 2.0) / (1.0 - 2.0 * amax * lam)


def chi2_tail_bound(gamma: Sequence[float], t: float) -> float:
    """Bound on weighted sums of independent chi-square(1) variables:
    ||g||_1 + 2 sqrt(||g||_2^2 t) + 2 ||g||_inf t."""
    g = as_vector(gamma, name="gamma")
    if np.any(g < 0):
        raise InputError("gamma must be nonnegative")
    t = _check_t(t)
    gmax = float(g.max()) if g.size else 0.0
    return float(np.sum(g)) + 2.0 * math.sqrt(float(g @ g) * t) + 2.0 * gmax * t


def bernstein_bound(v: float, b: float, t: float) -> float:
    """Scalar martingale Bernstein deviation sqrt(2 v t) + (2/3) b t."""
    _check_nonneg(v=v, b=b)
    t = _check_t(t)
    return math.sqrt(2.0 * v * t) + (2.0 / 3.0) * b * t


def centered_norm_bound(v: float, b: float, t: float) -> float:
    """Deviation of ||sum u_i|| above its mean: sqrt(8 v t) + (4/3) b t."""
    _check_nonneg(v=v, b=b)
    t = _check_t(t)
    return math.sqrt(8.0 * v * t) + (4.0 / 3.0) * b * t


def vector_bernstein_bound(v: float, b: float, t: float) -> float:
    """sqrt(v) + sqrt(8 v t) + (4/3) b t for martingale difference vectors."""
    dev = centered_norm_bound(v, b, t)
    return math.sqrt(v) + dev


@dataclass(frozen=True)
class BoundComparison:
    t: float
    theorem_bound: float
    bernstein_squared: float

    @property
    def ratio(self) -> float:
        return self.theorem_bound / self.bernstein_squared if self.bernstein_squared > 0 else 1.0


def compare_bounds(s: SpectralSummary, column_norms: Sequence[float], t: float) -> BoundComparison:
    """Quadratic-form bound (sigma=1, mu=0) against the squared vector
    Bernstein bound with v = sum ||a_i||^2 and b = max ||a_i||."""
    norms = as_vector(column_norms, name="column_norms")
    if np.any(norms < 0):
        raise InputError("column norms must be nonnegative")
    v = float(norms @ norms)
    scale = max(abs(v), abs(s.trace_sigma))
    if scale > 0 and abs(v - s.trace_sigma) > 1e-8 * scale:
        raise InputError(f"sum of squared column norms {v} disagrees with tr(Sigma) {s.trace_sigma}")
    b = float(norms.max()) if norms.size else 0.0
    theorem = gaussian_quadratic_bound(s, t).epsilon
    bern = vector_bernstein_bound(v, b, t)
    return BoundComparison(t=float(t), theorem_bound=theorem, bernstein_squared=bern * bern)
