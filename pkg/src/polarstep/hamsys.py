"""Hamiltonian ODE systems x' = S grad H(x) with cubic H.

The Hamiltonian is carried in split form

    H(x) = H3(x) + 1/2 x^T Q x + c^T x,

where H3 is homogeneous cubic with Hessian C(x) linear in x, so that

    grad H(x) = 1/2 C(x) x + Q x + c,      hess H(x) = C(x) + Q.

The structure matrix may be given as S = M^{-1} B with a symmetric mass
matrix M, which is how the Camassa-Holm semi-discretization arrives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .grid import BandedCirculantOperator, LUSolver, solve_dense

Operator = Union[np.ndarray, BandedCirculantOperator]


def _as_dense(op: Operator, dim: int) -> np.ndarray:
    if isinstance(op, BandedCirculantOperator):
        return op.as_dense()
    return np.asarray(op, dtype=float)


def _apply(op: Operator, v: np.ndarray) -> np.ndarray:
    if isinstance(op, BandedCirculantOperator):
        return op.apply(v)
    return op @ v


def _matmat(op: Operator, X: np.ndarray) -> np.ndarray:
    if isinstance(op, BandedCirculantOperator):
        return op.matmat(X)
    return op @ X


@dataclass
class CubicHamiltonianSystem:
    """ODE x' = S grad H(x) with cubic H and constant skew-symmetric S.

    cubic_hessian maps x to C(x), the Hessian of the homogeneous cubic part;
    it must be linear in x and satisfy C(x) y = C(y) x.
    """

    dim: int
    cubic_hessian: Callable[[np.ndarray], np.ndarray]
    structure: Operator
    mass: Optional[Operator] = None
    quadratic_part: Optional[np.ndarray] = None
    linear_part: Optional[np.ndarray] = None
    _mass_lu: Optional[LUSolver] = field(default=None, repr=False, compare=False)
    _mass_dense: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.quadratic_part is None:
            self.quadratic_part = np.zeros((self.dim, self.dim))
        if self.linear_part is None:
            self.linear_part = np.zeros(self.dim)
        self.quadratic_part = np.asarray(self.quadratic_part, dtype=float)
        self.linear_part = np.asarray(self.linear_part, dtype=float)

    # -- Hamiltonian ---------------------------------------------------

    @property
    def is_homogeneous(self) -> bool:
        return not np.any(self.quadratic_part) and not np.any(self.linear_part)

    def energy(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        C = self.cubic_hessian(x)
        return float(
            x @ C @ x / 6.0
            + 0.5 * x @ self.quadratic_part @ x
            + self.linear_part @ x
        )

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check_dim(x)
        return 0.5 * self.cubic_hessian(x) @ x + self.quadratic_part @ x + self.linear_part

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.cubic_hessian(x) + self.quadratic_part

    # -- structure -----------------------------------------------------

    def mass_dense(self) -> np.ndarray:
        if self._mass_dense is None:
            if self.mass is None:
                self._mass_dense = np.eye(self.dim)
            else:
                self._mass_dense = _as_dense(self.mass, self.dim)
        return self._mass_dense

    def apply_mass(self, v: np.ndarray) -> np.ndarray:
        if self.mass is None:
            return np.asarray(v, dtype=float)
        return _apply(self.mass, v)

    def solve_mass(self, v: np.ndarray) -> np.ndarray:
        if self.mass is None:
            return np.asarray(v, dtype=float)
        if self._mass_lu is None:
            self._mass_lu = LUSolver(self.mass_dense())
        return self._mass_lu.solve(v)

    def apply_structure(self, v: np.ndarray) -> np.ndarray:
        """B v, where S = M^{-1} B."""
        return _apply(self.structure, v)

    def structure_matmat(self, X: np.ndarray) -> np.ndarray:
        return _matmat(self.structure, X)

    def structure_dense(self) -> np.ndarray:
        return _as_dense(self.structure, self.dim)

    def skew_matrix(self) -> np.ndarray:
        """Explicit S = M^{-1} B. Intended for small systems and tests."""
        if self.mass is None:
            return self.structure_dense()
        return np.linalg.solve(self.mass_dense(), self.structure_dense())

    def apply_S(self, v: np.ndarray) -> np.ndarray:
        return self.solve_mass(self.apply_structure(v))

    def vector_field(self, x: np.ndarray) -> np.ndarray:
        self._check_dim(x)
        return self.apply_S(self.grad(x))

    def _check_dim(self, x: np.ndarray):
        if np.shape(x)[-1] != self.dim:
            raise ValueError(f"state dim {np.shape(x)[-1]}, system dim {self.dim}")

    # -- homogenization --------------------------------------------------

    def homogenize(self) -> "CubicHamiltonianSystem":
        """Extend by an auxiliary first coordinate frozen at 1.

        The extended Hamiltonian Hbar(x0, x) = H3(x) + x0 (1/2 x^T Q x)
        + x0^2 (c^T x) is homogeneous cubic with Hbar(1, x) = H(x); the
        extended structure gets a zero first row and column, so x0 stays
        exactly 1 along trajectories.
        """
        d = self.dim
        Q = self.quadratic_part
        c = self.linear_part
        base_cubic = self.cubic_hessian

        def ext_cubic(xbar: np.ndarray) -> np.ndarray:
            x0, x = xbar[0], xbar[1:]
            C = np.zeros((d + 1, d + 1))
            C[0, 0] = 2.0 * (c @ x)
            cross = Q @ x + 2.0 * x0 * c
            C[0, 1:] = cross
            C[1:, 0] = cross
            C[1:, 1:] = base_cubic(x) + x0 * Q
            return C

        Bd = self.structure_dense()
        Bbar = np.zeros((d + 1, d + 1))
        Bbar[1:, 1:] = Bd
        if self.mass is None:
            Mbar = None
        else:
            Mbar = np.zeros((d + 1, d + 1))
            Mbar[0, 0] = 1.0
            Mbar[1:, 1:] = self.mass_dense()
        return CubicHamiltonianSystem(
            dim=d + 1, cubic_hessian=ext_cubic, structure=Bbar, mass=Mbar
        )

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Lift a base state into the homogenized system (x0 = 1)."""
        return np.concatenate([[1.0], np.asarray(x, dtype=float)])

    @staticmethod
    def project(xbar: np.ndarray) -> np.ndarray:
        """Drop the auxiliary coordinate of a homogenized state."""
        return np.asarray(xbar, dtype=float)[..., 1:]


def from_cubic_tensor(
    T: np.ndarray,
    S: np.ndarray,
    Q: Optional[np.ndarray] = None,
    c: Optional[np.ndarray] = None,
) -> CubicHamiltonianSystem:
    """System with H3(x) = (1/6) sum T_ijk x_i x_j x_k for symmetric T."""
    T = np.asarray(T, dtype=float)
    d = T.shape[0]

    def cubic_hessian(x: np.ndarray) -> np.ndarray:
        return T @ np.asarray(x, dtype=float)

    return CubicHamiltonianSystem(
        dim=d, cubic_hessian=cubic_hessian, structure=np.asarray(S, dtype=float),
        quadratic_part=Q, linear_part=c,
    )


def random_cubic_system(
    dim: int,
    rng: np.random.Generator,
    homogeneous: bool = True,
    scale: float = 1.0,
) -> CubicHamiltonianSystem:
    """Random test system with a symmetric cubic tensor and skew S."""
    T = rng.standard_normal((dim, dim, dim)) * scale
    T = (
        T
        + T.transpose(0, 2, 1)
        + T.transpose(1, 0, 2)
        + T.transpose(1, 2, 0)
        + T.transpose(2, 0, 1)
        + T.transpose(2, 1, 0)
    ) / 6.0
    A = rng.standard_normal((dim, dim))
    S = A - A.T
    if homogeneous:
        return from_cubic_tensor(T, S)
    Q = rng.standard_normal((dim, dim)) * scale
    Q = 0.5 * (Q + Q.T)
    c = rng.standard_normal(dim) * scale
    return from_cubic_tensor(T, S, Q=Q, c=c)


def reference_trajectory(
    sys: CubicHamiltonianSystem,
    x0: np.ndarray,
    t_eval: np.ndarray,
    rtol: float = 1e-11,
    atol: float = 1e-12,
) -> np.ndarray:
    """High-accuracy reference solution, used only as a sanity oracle."""
    from scipy.integrate import solve_ivp

    sol = solve_ivp(
        lambda t, x: sys.vector_field(x),
        (float(t_eval[0]), float(t_eval[-1])),
        np.asarray(x0, dtype=float),
        t_eval=np.asarray(t_eval, dtype=float),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"reference integration failed: {sol.message}")
    return sol.y.T
