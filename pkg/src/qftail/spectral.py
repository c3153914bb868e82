"""Spectral functionals of a real matrix A used by every bound.

All bounds depend on A only through the eigenvalues of Sigma = A^T A,
i.e. the squared singular values of A, and (when a mean is given) on
||A mu||^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError

# squared singular values below this multiple of eps * ||Sigma|| are set to 0
CLIP_FACTOR = 64.0


def as_matrix(A) -> np.ndarray:
    """Validate and return ``A`` as a dense 2-D float64 array."""
    try:
        arr = np.asarray(A, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"matrix is not numeric: {exc}") from None
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError(f"matrix must be 2-D and nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("matrix has non-finite entries")
    return arr


def as_vector(v, length: Optional[int] = None, name: str = "vector") -> np.ndarray:
    try:
        arr = np.asarray(v, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} is not numeric: {exc}") from None
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if length is not None and arr.shape[0] != length:
        raise InputError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalues ``rho`` of A^T A (nonincreasing) and the functionals
    tr(Sigma), tr(Sigma^2), ||Sigma|| and optionally ||A mu||^2."""

    rho: np.ndarray
    trace_sigma: float
    trace_sigma_sq: float
    op_norm: float
    mean_image_sq: Optional[float] = None

    @classmethod
    def from_rho(cls, rho: Sequence[float], mean_image_sq: Optional[float] = None) -> "SpectralSummary":
        """Build a summary directly from eigenvalues of Sigma."""
        r = np.sort(as_vector(rho, name="rho"))[::-1]
        if r.size and r[-1] < 0:
            raise InputError("rho must be nonnegative")
        if mean_image_sq is not None and (mean_image_sq < 0 or not np.isfinite(mean_image_sq)):
            raise InputError("mean_image_sq must be finite and nonnegative")
        return cls(
            rho=r,
            trace_sigma=float(np.sum(r)),
            trace_sigma_sq=float(np.sum(r * r)),
            op_norm=float(r[0]) if r.size else 0.0,
            mean_image_sq=None if mean_image_sq is None else float(mean_image_sq),
        )

    @property
    def has_mean(self) -> bool:
        return self.mean_image_sq is not None

    def with_mean_image_sq(self, value: float) -> "SpectralSummary":
        return SpectralSummary.from_rho(self.rho, value)


def summarize(A, mu=None) -> SpectralSummary:
    """Compute the spectral summary of ``A``.

    ``rho`` holds the squared singular values of A (computed from the SVD
    of A itself, not from A^T A) with values below 64 * eps * max(rho)
    clipped to exactly zero.  When ``mu`` is given, ``mean_image_sq`` is
    ||A mu||^2.
    """
    arr = as_matrix(A)
    sv = np.linalg.svd(arr, compute_uv=False)
    rho = sv * sv
    top = float(rho.max()) if rho.size else 0.0
    rho[rho < CLIP_FACTOR * np.finfo(np.float64).eps * top] = 0.0
    mean_sq = None
    if mu is not None:
        m = as_vector(mu, arr.shape[1], name="mu")
        image = arr @ m
        mean_sq = float(image @ image)
    return SpectralSummary.from_rho(rho, mean_sq)


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless CSV matrix, one row per line."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read matrix file {p}: {exc}") from None
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError:
            raise InputError(f"{p}:{lineno}: malformed numeric entry") from None
    if not rows:
        raise InputError(f"{p}: empty matrix file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InputError(f"{p}: ragged rows (widths {sorted(widths)})")
    return as_matrix(rows)


def read_vector_csv(path) -> np.ndarray:
    """Read a single-line CSV vector (a one-column file is also accepted)."""
    M = read_matrix_csv(path)
    if M.shape[0] != 1 and M.shape[1] != 1:
        raise InputError(f"{path}: expected a single row, got shape {M.shape}")
    return M.reshape(-1)


def write_matrix_csv(path, A) -> None:
    arr = as_matrix(A)
    lines = [",".join(f"{x:.17g}" for x in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")
