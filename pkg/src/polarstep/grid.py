"""Periodic-grid finite differences and dense linear solves.

Everything implicit in the time steppers reduces to dense LU solves of
per-step matrices; the spatial operators themselves are banded circulants
applied via cyclic index shifts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


def _lu_factor(A):
    # we detect singularity ourselves via the pivot threshold
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return scipy.linalg.lu_factor(A, check_finite=False)


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a pivot falls below the singularity threshold."""


#: Pivot threshold, relative to the max row sum of the matrix.
SINGULARITY_RTOL = 1e-13


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on [0, L) with K points and periodic wrap."""

    num_points: int
    length: float

    def __post_init__(self):
        if self.num_points < 3:
            raise ValueError(f"need at least 3 grid points, got {self.num_points}")
        if not self.length > 0:
            raise ValueError(f"domain length must be positive, got {self.length}")

    @property
    def dx(self) -> float:
        return self.length / self.num_points

    def nodes(self) -> np.ndarray:
        return self.dx * np.arange(self.num_points)


@dataclass(frozen=True)
class BandedCirculantOperator:
    """Circulant operator given by a short stencil of (offset, coefficient).

    Entry (i, j) of the matrix form depends on (j - i) mod K only.
    """

    stencil: tuple[tuple[int, float], ...]
    size: int
    _dense: list = field(default_factory=list, repr=False, compare=False)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.size:
            raise ValueError(f"operator size {self.size}, vector size {v.shape[-1]}")
        out = np.zeros_like(v, dtype=float)
        for off, c in self.stencil:
            out += c * np.roll(v, -off, axis=-1)
        return out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)

    def matmat(self, X: np.ndarray) -> np.ndarray:
        """self @ X for a dense K x m array X, via row shifts."""
        X = np.asarray(X, dtype=float)
        if X.shape[0] != self.size:
            raise ValueError(f"operator size {self.size}, matrix rows {X.shape[0]}")
        out = np.zeros_like(X)
        for off, c in self.stencil:
            out += c * np.roll(X, -off, axis=0)
        return out

    def rmatmat(self, X: np.ndarray) -> np.ndarray:
        """X @ self for a dense m x K array X, via column shifts."""
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.size:
            raise ValueError(f"operator size {self.size}, matrix cols {X.shape[1]}")
        out = np.zeros_like(X)
        for off, c in self.stencil:
            out += c * np.roll(X, off, axis=1)
        return out

    def as_dense(self) -> np.ndarray:
        if not self._dense:
            A = np.zeros((self.size, self.size))
            for off, c in self.stencil:
                for i in range(self.size):
                    A[i, (i + off) % self.size] += c
            self._dense.append(A)
        return self._dense[0]

    def scaled(self, factor: float) -> "BandedCirculantOperator":
        return BandedCirculantOperator(
            tuple((off, factor * c) for off, c in self.stencil), self.size
        )

    def eigenvalues(self) -> np.ndarray:
        """Circulant eigenvalues sum_s c_s exp(2 pi i m off_s / K)."""
        m = np.arange(self.size)
        lam = np.zeros(self.size, dtype=complex)
        for off, c in self.stencil:
            lam += c * np.exp(2j * np.pi * m * off / self.size)
        return lam


_STENCILS = {
    "Dplus": lambda dx: ((1, 1.0 / dx), (0, -1.0 / dx)),
    "Dminus": lambda dx: ((0, 1.0 / dx), (-1, -1.0 / dx)),
    "Dcentral": lambda dx: ((1, 0.5 / dx), (-1, -0.5 / dx)),
    "D2central": lambda dx: ((1, 1.0 / dx**2), (0, -2.0 / dx**2), (-1, 1.0 / dx**2)),
    "Mplus": lambda dx: ((1, 0.5), (0, 0.5)),
    "Mminus": lambda dx: ((0, 0.5), (-1, 0.5)),
}


def make_operator(kind: str, grid: PeriodicGrid) -> BandedCirculantOperator:
    """Build one of the standard periodic difference/averaging operators."""
    try:
        stencil = _STENCILS[kind](grid.dx)
    except KeyError:
        raise ValueError(f"unknown operator kind {kind!r}") from None
    return BandedCirculantOperator(stencil, grid.num_points)


def solve_dense(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b by LU with partial pivoting.

    Raises SingularMatrixError when a pivot magnitude falls below
    SINGULARITY_RTOL times the max row sum of A.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"matrix size {A.shape[0]}, rhs size {b.shape[0]}")
    lu, piv = _lu_factor(A)
    row_norm = np.abs(A).sum(axis=1).max()
    pivots = np.abs(np.diag(lu))
    if (
        not np.isfinite(row_norm)
        or row_norm == 0.0
        or np.any(pivots < SINGULARITY_RTOL * row_norm)
    ):
        raise SingularMatrixError(
            f"matrix singular to working precision "
            f"(min pivot {pivots.min():.3e}, row norm {row_norm:.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


class LUSolver:
    """Reusable LU factorization of one per-step matrix."""

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        self.lu, self.piv = _lu_factor(A)
        row_norm = np.abs(A).sum(axis=1).max()
        pivots = np.abs(np.diag(self.lu))
        if (
            not np.isfinite(row_norm)
            or row_norm == 0.0
            or np.any(pivots < SINGULARITY_RTOL * row_norm)
        ):
            raise SingularMatrixError(
                f"matrix singular to working precision "
                f"(min pivot {pivots.min():.3e}, row norm {row_norm:.3e})"
            )

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve((self.lu, self.piv), b, check_finite=False)
