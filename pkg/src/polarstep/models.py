"""Periodic finite-difference semi-discretizations of the Camassa-Holm and
KdV equations as cubic Hamiltonian systems.

Energies are stored without the dx factor; relative energy errors are
unaffected. Grids are 0-based with x_k = k dx and periodic wrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import BandedCirculantOperator, PeriodicGrid, make_operator
from .hamsys import CubicHamiltonianSystem
from .integrators import PolarizedEnergy


@dataclass
class _OperatorSet:
    Dp: BandedCirculantOperator
    Dm: BandedCirculantOperator
    Dc: BandedCirculantOperator
    D2c: BandedCirculantOperator
    Mp: BandedCirculantOperator
    Mm: BandedCirculantOperator


def _ops(grid: PeriodicGrid) -> _OperatorSet:
    return _OperatorSet(
        Dp=make_operator("Dplus", grid),
        Dm=make_operator("Dminus", grid),
        Dc=make_operator("Dcentral", grid),
        D2c=make_operator("D2central", grid),
        Mp=make_operator("Mplus", grid),
        Mm=make_operator("Mminus", grid),
    )


@dataclass
class CamassaHolmModel:
    """Semi-discrete Camassa-Holm: (I - D2c) dU/dt = -Dc grad H2(U) with

        H2(U) = 1/2 sum_k ( u_k^3 + u_k ((d+ u_k)^2 + (d- u_k)^2) / 2 ),

    a homogeneous cubic energy.
    """

    grid: PeriodicGrid
    a_param: float = 0.5
    ops: _OperatorSet = field(init=False, repr=False)

    def __post_init__(self):
        self.ops = _ops(self.grid)

    def energy(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        dp = self.ops.Dp(U)
        dm = self.ops.Dm(U)
        return float(0.5 * np.sum(U**3 + U * (dp**2 + dm**2) / 2.0))

    def gradient(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        dp = self.ops.Dp(U)
        return 1.5 * U**2 + 0.5 * self.ops.Mm(dp**2) - 0.5 * self.ops.D2c(U**2)

    def hessian(self, U: np.ndarray) -> np.ndarray:
        """H2''(U) = 3 diag(U) + M- diag(D+ U) D+ - D2c diag(U)."""
        U = np.asarray(U, dtype=float)
        dp = self.ops.Dp(U)
        H = np.diag(3.0 * U)
        H += self.ops.Mm.matmat(dp[:, None] * self.ops.Dp.as_dense())
        H -= self.ops.D2c.matmat(np.diag(U))
        return H

    def polarized_value(self, U: np.ndarray, V: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        a = self.a_param
        dpu, dpv = self.ops.Dp(U), self.ops.Dp(V)
        mpu, mpv = self.ops.Mp(U), self.ops.Mp(V)
        cubic = U * V * (U + V) / 2.0
        mixed = a * self.ops.Mp(0.5 * (U + V)) * dpu * dpv
        split = (1.0 - a) * (mpu * dpv**2 + mpv * dpu**2) / 2.0
        return float(0.5 * np.sum(cubic + mixed + split))

    def polarized_grad_x(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        a = self.a_param
        dpu, dpv = self.ops.Dp(U), self.ops.Dp(V)
        g = 0.5 * U * V + 0.25 * V**2
        g += (a / 4.0) * self.ops.Mm(dpu * dpv)
        g -= (a / 2.0) * self.ops.Dm(self.ops.Mp(0.5 * (U + V)) * dpv)
        g += ((1.0 - a) / 4.0) * self.ops.Mm(dpv**2)
        g -= ((1.0 - a) / 2.0) * self.ops.Dm(self.ops.Mp(V) * dpu)
        return g

    def polarized_grad_x_jacobian(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        a = self.a_param
        dpv = self.ops.Dp(V)
        Dp_dense = self.ops.Dp.as_dense()
        Mp_dense = self.ops.Mp.as_dense()
        L = np.diag(0.5 * V)
        L += (a / 4.0) * self.ops.Mm.matmat(dpv[:, None] * Dp_dense)
        L -= (a / 4.0) * self.ops.Dm.matmat(dpv[:, None] * Mp_dense)
        L -= ((1.0 - a) / 2.0) * self.ops.Dm.matmat(self.ops.Mp(V)[:, None] * Dp_dense)
        return L

    def polarized_energy(self) -> PolarizedEnergy:
        return PolarizedEnergy(
            value=self.polarized_value,
            grad_x=self.polarized_grad_x,
            quadratic_each_arg=True,
            grad_x_jacobian=self.polarized_grad_x_jacobian,
        )

    def system(self) -> CubicHamiltonianSystem:
        K = self.grid.num_points
        mass = BandedCirculantOperator(
            tuple(
                [(0, 1.0)]
                + [(off, -c) for off, c in self.ops.D2c.stencil]
            ),
            K,
        )
        return CubicHamiltonianSystem(
            dim=K,
            cubic_hessian=self.hessian,
            structure=self.ops.Dc.scaled(-1.0),
            mass=mass,
        )

    def h1_invariant(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        return float(0.5 * np.sum(U**2 + self.ops.Dp(U) ** 2))


@dataclass
class KdVModel:
    """Semi-discrete KdV: dU/dt = Dc grad H2(U) with

        H2(U) = sum_k ( -u_k^3 + ((d+ u_k)^2 + (d- u_k)^2) / 4 ),

    split as cubic part -sum u^3 and quadratic part with Hessian -D2c.
    """

    grid: PeriodicGrid
    a_param: float = -0.5
    ops: _OperatorSet = field(init=False, repr=False)

    def __post_init__(self):
        self.ops = _ops(self.grid)

    def energy(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        dp = self.ops.Dp(U)
        dm = self.ops.Dm(U)
        return float(np.sum(-(U**3) + (dp**2 + dm**2) / 4.0))

    def gradient(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        return -3.0 * U**2 - self.ops.D2c(U)

    def cubic_hessian(self, U: np.ndarray) -> np.ndarray:
        return np.diag(-6.0 * np.asarray(U, dtype=float))

    def hessian(self, U: np.ndarray) -> np.ndarray:
        return self.cubic_hessian(U) - self.ops.D2c.as_dense()

    def polarized_value(self, U: np.ndarray, V: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        a = self.a_param
        dpu, dpv = self.ops.Dp(U), self.ops.Dp(V)
        cubic = -U * V * (U + V) / 2.0
        mixed = (a / 2.0) * dpu * dpv
        split = ((1.0 - a) / 2.0) * (dpu**2 + dpv**2) / 2.0
        return float(np.sum(cubic + mixed + split))

    def polarized_grad_x(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        a = self.a_param
        g = -U * V - 0.5 * V**2
        g -= (a / 2.0) * self.ops.D2c(V)
        g -= ((1.0 - a) / 2.0) * self.ops.D2c(U)
        return g

    def polarized_grad_x_jacobian(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        a = self.a_param
        return np.diag(-V) - ((1.0 - a) / 2.0) * self.ops.D2c.as_dense()

    def polarized_energy(self) -> PolarizedEnergy:
        return PolarizedEnergy(
            value=self.polarized_value,
            grad_x=self.polarized_grad_x,
            quadratic_each_arg=True,
            grad_x_jacobian=self.polarized_grad_x_jacobian,
        )

    def system(self) -> CubicHamiltonianSystem:
        return CubicHamiltonianSystem(
            dim=self.grid.num_points,
            cubic_hessian=self.cubic_hessian,
            structure=self.ops.Dc,
            quadratic_part=-self.ops.D2c.as_dense(),
        )

    def h1_invariant(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        return float(0.5 * np.sum(U**2))
