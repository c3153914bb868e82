"""Subgaussian vector families, martingale-difference sums, and seeded
random streams.

Every family here carries a proxy sigma for which
E exp(a^T (x - mu)) <= exp(|a|^2 sigma^2 / 2) is known to hold:

    gaussian           N(mu, scale^2 I)           sigma = scale
    rademacher         mu + scale * {-1, +1}^n    sigma = scale     (cosh u <= exp(u^2/2))
    uniform_symmetric  mu + U[-scale, scale]^n    sigma = scale/sqrt(3)
                                                  (sinh u / u <= exp(u^2/6))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import InputError
from .spectral import as_matrix, as_vector

FAMILIES = ("gaussian", "rademacher", "uniform_symmetric")
FAMILY_ALIASES = {"uniform": "uniform_symmetric"}

_PROXY_FACTOR = {
    "gaussian": 1.0,
    "rademacher": 1.0,
    "uniform_symmetric": 1.0 / math.sqrt(3.0),
}


@dataclass
class SeededStream:
    """Generator for stream ``stream_index`` of ``master_seed``.

    Child seeds come from :class:`numpy.random.SeedSequence` with
    ``spawn_key=(stream_index, lane)``, so distinct indices give independent
    sequences and the same ``(master_seed, stream_index, lane)`` always
    replays the same output.  ``lane`` separates unrelated consumers that
    share an index (e.g. the x draws and the auxiliary Gaussian draws of an
    MGF check).  A stream owns its state and must not be shared between
    threads.
    """

    master_seed: int
    stream_index: int = 0
    lane: int = 0
    _rng: Optional[np.random.Generator] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise InputError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if self.stream_index < 0 or self.lane < 0:
            raise InputError("stream_index and lane must be >= 0")

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index), int(self.lane)))
            self._rng = np.random.Generator(np.random.PCG64(seq))
        return self._rng


@dataclass(frozen=True)
class SubgaussianSpec:
    family: str
    dimension: int
    mu: Optional[np.ndarray] = None
    scale: float = 1.0
    declared_sigma: float = field(init=False)

    def __post_init__(self):
        family = FAMILY_ALIASES.get(self.family, self.family)
        if family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        object.__setattr__(self, "family", family)
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dimension}")
        object.__setattr__(self, "dimension", int(self.dimension))
        # scale 0 is the degenerate point mass at mu (used for noiseless runs)
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise InputError(f"scale must be finite and >= 0, got {self.scale}")
        mu = np.zeros(self.dimension) if self.mu is None else as_vector(self.mu, self.dimension, name="mu")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "declared_sigma", float(self.scale) * _PROXY_FACTOR[family])

    @property
    def has_mean(self) -> bool:
        return bool(np.any(self.mu != 0))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "dimension": self.dimension,
            "mu": self.mu.tolist(),
            "scale": self.scale,
            "declared_sigma": self.declared_sigma,
        }


def sample_vectors(spec: SubgaussianSpec, stream: SeededStream, size: int) -> np.ndarray:
    """Draw ``size`` independent vectors as a (size, dimension) array."""
    rng = stream.rng
    shape = (int(size), spec.dimension)
    if spec.family == "gaussian":
        draw = rng.standard_normal(shape)
    elif spec.family == "rademacher":
        draw = 2.0 * rng.integers(0, 2, size=shape).astype(np.float64) - 1.0
    elif spec.family == "uniform_symmetric":
        draw = rng.uniform(-1.0, 1.0, size=shape)
    else:  # pragma: no cover - rejected at construction
        raise InputError(f"unknown family {spec.family!r}")
    return spec.mu + spec.scale * draw


def sample_vector(spec: SubgaussianSpec, stream: SeededStream) -> np.ndarray:
    return sample_vectors(spec, stream, 1)[0]


def _gain(walk: np.ndarray) -> np.ndarray:
    # past-measurable gain in [-1, 1]; the offset keeps g_1 != 0
    return np.clip(np.tanh(0.5 + walk), -1.0, 1.0)


@dataclass(frozen=True)
class MartingaleSpec:
    """Increments u_i = a_i x_i g_i with Rademacher x_i.

    ``columns`` is a (dim, n) array whose i-th column is a_i.  With
    ``adapted_gain`` the gain is g_i = tanh(0.5 + x_1 + ... + x_{i-1}),
    otherwise g_i = 1.
    """

    columns: np.ndarray
    adapted_gain: bool = False

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2 or cols.shape[1] == 0:
            raise InputError("martingale spec needs a nonempty (dim, n) column array")
        object.__setattr__(self, "columns", as_matrix(cols))

    @classmethod
    def from_vectors(cls, vectors, adapted_gain: bool = False) -> "MartingaleSpec":
        vecs = [as_vector(v, name="column") for v in vectors]
        if not vecs:
            raise InputError("martingale spec needs at least one column")
        return cls(np.column_stack(vecs), adapted_gain)

    @property
    def n_steps(self) -> int:
        return self.columns.shape[1]

    @property
    def v_bound(self) -> float:
        return float(np.sum(self.columns * self.columns))

    @property
    def b_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.columns, axis=0)))


def martingale_sums(spec: MartingaleSpec, stream: SeededStream, size: int) -> np.ndarray:
    """Draw ``size`` sums sum_i u_i as a (size, dim) array."""
    rng = stream.rng
    x = 2.0 * rng.integers(0, 2, size=(int(size), spec.n_steps)).astype(np.float64) - 1.0
    if not spec.adapted_gain:
        return x @ spec.columns.T
    total = np.zeros((int(size), spec.columns.shape[0]))
    walk = np.zeros(int(size))
    for i in range(spec.n_steps):
        coeff = x[:, i] * _gain(walk)
        total += coeff[:, None] * spec.columns[:, i][None, :]
        walk += x[:, i]
    return total


def sample_martingale_sum(spec: MartingaleSpec, stream: SeededStream) -> Tuple[np.ndarray, float]:
    s = martingale_sums(spec, stream, 1)[0]
    return s, float(np.linalg.norm(s))
