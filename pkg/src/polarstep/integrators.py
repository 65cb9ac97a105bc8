"""Time-stepping schemes: Kahan's method (one- and two-step form), the
two-step alpha-tableau family, polarised discrete gradient schemes, and
fully implicit one-step baselines (midpoint, trapezoidal, AVF).

All linearly implicit steps reduce to one dense LU solve; the fully
implicit baselines and non-quadratic PDG kinds use damped Newton.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import SingularMatrixError, solve_dense
from .hamsys import CubicHamiltonianSystem

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
BLOWUP_THRESHOLD = 1e8


class NewtonError(RuntimeError):
    """Newton iteration failed to converge."""


# ---------------------------------------------------------------------------
# two-step tableau family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoStepTableau:
    """Coefficients alpha[i, j] of the two-step family

        (x^{n+2} - x^n) / (2 dt)
            = S sum_ij alpha[i,j] (H''(x^{n-1+i}) x^{n-1+j} + beta(x^{n-1+i})),

    with beta(x) = 2 grad H(x) - H''(x) x = Q x + 2 c for split cubic H.
    """

    alpha: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"tableau must be 3x3, got {a.shape}")
        object.__setattr__(self, "alpha", a)

    @property
    def is_consistent(self) -> bool:
        return abs(self.alpha.sum() - 0.5) < 1e-12

    @property
    def linearly_implicit(self) -> bool:
        return self.alpha[2, 2] == 0.0


def _tab(entries, name):
    a = np.zeros((3, 3))
    for (i, j), v in entries.items():
        a[i - 1, j - 1] = v
    return TwoStepTableau(a, name)


KAHAN_TABLEAU = _tab({(2, 1): 0.25, (2, 3): 0.25}, "kahan")
PDG_TABLEAU = _tab({(2, 1): 1 / 6, (2, 2): 1 / 6, (2, 3): 1 / 6}, "pdg")
MIDPOINT_TABLEAU = _tab(
    {(1, 1): 1 / 16, (3, 3): 1 / 16, (2, 1): 1 / 8, (2, 2): 1 / 8, (2, 3): 1 / 8},
    "midpoint",
)
TRAPEZOIDAL_TABLEAU = _tab({(1, 1): 1 / 8, (3, 3): 1 / 8, (2, 2): 1 / 4}, "trapezoidal")
AVF_TABLEAU = _tab(
    {(1, 1): 1 / 12, (2, 1): 1 / 12, (2, 3): 1 / 12, (3, 3): 1 / 12, (2, 2): 1 / 6},
    "avf",
)

NAMED_TABLEAUS = {
    t.name: t
    for t in (KAHAN_TABLEAU, PDG_TABLEAU, MIDPOINT_TABLEAU, TRAPEZOIDAL_TABLEAU, AVF_TABLEAU)
}


# ---------------------------------------------------------------------------
# polarised energies and discrete gradients
# ---------------------------------------------------------------------------


@dataclass
class PolarizedEnergy:
    """Symmetric two-argument energy with value(x, x) = H(x).

    grad_x is the gradient in the first argument. grad_x_jacobian, when
    given, maps y to the (constant, for energies quadratic in each
    argument) Jacobian of grad_x(., y).
    """

    value: Callable[[np.ndarray, np.ndarray], float]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    quadratic_each_arg: bool = False
    grad_x_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def jacobian_x(self, y: np.ndarray) -> np.ndarray:
        """Jacobian of grad_x(., y); exact for affine grad_x."""
        if self.grad_x_jacobian is not None:
            return self.grad_x_jacobian(y)
        y = np.asarray(y, dtype=float)
        d = y.shape[0]
        g0 = self.grad_x(np.zeros(d), y)
        L = np.empty((d, d))
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            L[:, i] = self.grad_x(e, y) - g0
        return L


def canonical_polarized_energy(sys: CubicHamiltonianSystem) -> PolarizedEnergy:
    """H~(x, y) = (1/6) x^T H''((x+y)/2) y for homogeneous cubic H."""
    if not sys.is_homogeneous:
        raise ValueError("canonical polarised energy requires a homogeneous cubic H")
    C = sys.cubic_hessian

    def value(x, y):
        return float(x @ C(0.5 * (x + y)) @ y) / 6.0

    def grad_x(x, y):
        return C(2.0 * np.asarray(x) + np.asarray(y)) @ y / 12.0

    def jac(y):
        return C(np.asarray(y)) / 6.0

    return PolarizedEnergy(value, grad_x, quadratic_each_arg=True, grad_x_jacobian=jac)


def pdg_quadratic(pe: PolarizedEnergy, x, y, z) -> np.ndarray:
    """PDG 2 grad_x((x+z)/2, y); valid for H~ quadratic in each argument."""
    if not pe.quadratic_each_arg:
        raise ValueError("pdg_quadratic needs an energy quadratic in each argument")
    return 2.0 * pe.grad_x(0.5 * (np.asarray(x) + np.asarray(z)), y)


def pdg_avf(pe: PolarizedEnergy, x, y, z, order: int = 2) -> np.ndarray:
    """PDG 2 int_0^1 grad_x(xi x + (1-xi) z, y) dxi by Gauss-Legendre."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    # map from [-1, 1] to [0, 1]
    xi = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    out = np.zeros_like(x)
    for xi_i, w_i in zip(xi, w):
        out += w_i * pe.grad_x(xi_i * x + (1.0 - xi_i) * z, y)
    return 2.0 * out


def pdg_itoh_abe(pe: PolarizedEnergy, x, y, z) -> np.ndarray:
    """Coordinate-increment PDG; equal coordinates fall back to the partial
    derivative of the first argument."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    d = x.shape[0]
    out = np.empty(d)
    w = x.copy()  # walks from x to z one coordinate at a time
    for i in range(d):
        if x[i] != z[i]:
            lo = pe.value(w, y)
            w[i] = z[i]
            hi = pe.value(w, y)
            out[i] = 2.0 * (hi - lo) / (z[i] - x[i])
        else:
            out[i] = 2.0 * pe.grad_x(w, y)[i]
            w[i] = z[i]
    return out


def pdg_itoh_abe_symmetrized(pe: PolarizedEnergy, x, y, z) -> np.ndarray:
    return 0.5 * (pdg_itoh_abe(pe, x, y, z) + pdg_itoh_abe(pe, z, y, x))


PDG_KINDS = {
    "quadratic": pdg_quadratic,
    "avf": pdg_avf,
    "ia": pdg_itoh_abe,
    "sia": pdg_itoh_abe_symmetrized,
}


# ---------------------------------------------------------------------------
# Newton helper
# ---------------------------------------------------------------------------


def _newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    scale: float,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> np.ndarray:
    """Damped Newton with step halving on residual increase."""
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    rnorm = np.max(np.abs(r))
    for _ in range(max_iter):
        if rnorm <= tol * scale:
            return x
        step = solve_dense(jacobian(x), -r)
        lam = 1.0
        for _ in range(30):
            x_new = x + lam * step
            r_new = residual(x_new)
            rnorm_new = np.max(np.abs(r_new))
            if rnorm_new < rnorm or not np.isfinite(rnorm_new):
                break
            lam *= 0.5
        x, r, rnorm = x_new, r_new, rnorm_new
        if not np.isfinite(rnorm):
            raise NewtonError("Newton iteration produced non-finite values")
    if rnorm <= tol * scale:
        return x
    raise NewtonError(
        f"Newton did not converge in {max_iter} iterations (residual {rnorm:.3e})"
    )


def _newton_scale(sys: CubicHamiltonianSystem, x: np.ndarray) -> float:
    return 1.0 + float(np.max(np.abs(sys.apply_mass(x))))


# ---------------------------------------------------------------------------
# one-step methods
# ---------------------------------------------------------------------------


def kahan_step(sys: CubicHamiltonianSystem, x: np.ndarray, dt: float) -> np.ndarray:
    """One step of Kahan's method: a single linear solve

        (M - dt/2 B (C(x) + Q)) x' = M x + dt/2 B (Q x + 2 c).
    """
    x = np.asarray(x, dtype=float)
    Q = sys.quadratic_part
    A = sys.mass_dense() - (dt / 2.0) * sys.structure_matmat(sys.cubic_hessian(x) + Q)
    rhs = sys.apply_mass(x) + (dt / 2.0) * sys.apply_structure(
        Q @ x + 2.0 * sys.linear_part
    )
    return solve_dense(A, rhs)


def midpoint_step(sys: CubicHamiltonianSystem, x: np.ndarray, dt: float) -> np.ndarray:
    """Implicit midpoint step, solved by damped Newton."""
    x = np.asarray(x, dtype=float)
    M = sys.mass_dense()
    Mx = sys.apply_mass(x)

    def residual(xp):
        return M @ xp - Mx - dt * sys.apply_structure(sys.grad(0.5 * (x + xp)))

    def jacobian(xp):
        return M - (dt / 2.0) * sys.structure_matmat(sys.hessian(0.5 * (x + xp)))

    guess = x + dt * sys.vector_field(x)
    return _newton(residual, jacobian, guess, _newton_scale(sys, x))


def trapezoidal_step(sys: CubicHamiltonianSystem, x: np.ndarray, dt: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    M = sys.mass_dense()
    rhs = sys.apply_mass(x) + (dt / 2.0) * sys.apply_structure(sys.grad(x))

    def residual(xp):
        return M @ xp - (dt / 2.0) * sys.apply_structure(sys.grad(xp)) - rhs

    def jacobian(xp):
        return M - (dt / 2.0) * sys.structure_matmat(sys.hessian(xp))

    guess = x + dt * sys.vector_field(x)
    return _newton(residual, jacobian, guess, _newton_scale(sys, x))


def avf_step(sys: CubicHamiltonianSystem, x: np.ndarray, dt: float) -> np.ndarray:
    """Average vector field step; Simpson is exact for cubic H."""
    x = np.asarray(x, dtype=float)
    M = sys.mass_dense()
    Mx = sys.apply_mass(x)
    gx = sys.grad(x)

    def residual(xp):
        avg = (gx + sys.grad(xp) + 4.0 * sys.grad(0.5 * (x + xp))) / 6.0
        return M @ xp - Mx - dt * sys.apply_structure(avg)

    def jacobian(xp):
        J = sys.hessian(xp) / 6.0 + sys.hessian(0.5 * (x + xp)) / 3.0
        return M - dt * sys.structure_matmat(J)

    guess = x + dt * sys.vector_field(x)
    return _newton(residual, jacobian, guess, _newton_scale(sys, x))


# ---------------------------------------------------------------------------
# two-step methods
# ---------------------------------------------------------------------------


def kahan_two_step(
    sys: CubicHamiltonianSystem, x_n: np.ndarray, x_np1: np.ndarray, dt: float
) -> np.ndarray:
    """Two-step form of Kahan's method for homogeneous cubic H:

        (x^{n+2} - x^n) / (2 dt) = 1/4 S H''(x^{n+1}) (x^n + x^{n+2}).
    """
    if not sys.is_homogeneous:
        raise ValueError(
            "kahan_two_step requires homogeneous cubic H; homogenize() the system first"
        )
    x_n = np.asarray(x_n, dtype=float)
    C1 = sys.cubic_hessian(np.asarray(x_np1, dtype=float))
    A = sys.mass_dense() - (dt / 2.0) * sys.structure_matmat(C1)
    rhs = sys.apply_mass(x_n) + (dt / 2.0) * sys.apply_structure(C1 @ x_n)
    return solve_dense(A, rhs)


def general_two_step(
    sys: CubicHamiltonianSystem,
    tableau: TwoStepTableau,
    x_n: np.ndarray,
    x_np1: np.ndarray,
    dt: float,
    allow_newton: bool = False,
) -> np.ndarray:
    """One step of the alpha-tableau two-step family.

    Linear solve when alpha[3,3] = 0; damped Newton otherwise (must be
    enabled explicitly).
    """
    a = tableau.alpha
    x_n = np.asarray(x_n, dtype=float)
    x_np1 = np.asarray(x_np1, dtype=float)
    known = (x_n, x_np1)
    Q = sys.quadratic_part
    c2 = 2.0 * sys.linear_part
    C_known = [sys.cubic_hessian(v) for v in known]
    M = sys.mass_dense()

    # terms linear in the unknown z = x^{n+2}
    G = np.zeros((sys.dim, sys.dim))
    r0 = np.zeros(sys.dim)
    for i in range(2):
        if a[i, 2] != 0.0:  # H''(x_i) z + beta(x_i)
            G += a[i, 2] * (C_known[i] + Q)
            r0 += a[i, 2] * (Q @ known[i] + c2)
    for j in range(2):
        if a[2, j] != 0.0:  # H''(z) x_j + beta(z) = (C(x_j) + Q) z + Q x_j + 2c
            G += a[2, j] * (C_known[j] + Q)
            r0 += a[2, j] * (Q @ known[j] + c2)
    for i in range(2):
        for j in range(2):
            if a[i, j] != 0.0:
                r0 += a[i, j] * (C_known[i] @ known[j] + Q @ known[j] + Q @ known[i] + c2)

    a33 = a[2, 2]
    if a33 == 0.0:
        A = M - 2.0 * dt * sys.structure_matmat(G)
        rhs = sys.apply_mass(x_n) + 2.0 * dt * sys.apply_structure(r0)
        return solve_dense(A, rhs)

    if not allow_newton:
        raise ValueError(
            f"tableau {tableau.name or a} has alpha[3,3] != 0; "
            "pass allow_newton=True for the nonlinear solve"
        )
    Mx = sys.apply_mass(x_n)

    def residual(z):
        F = G @ z + r0 + a33 * (sys.cubic_hessian(z) @ z + 2.0 * (Q @ z) + c2)
        return M @ z - Mx - 2.0 * dt * sys.apply_structure(F)

    def jacobian(z):
        Fp = G + a33 * (2.0 * sys.cubic_hessian(z) + 2.0 * Q)
        return M - 2.0 * dt * sys.structure_matmat(Fp)

    guess = 2.0 * x_np1 - x_n
    return _newton(residual, jacobian, guess, _newton_scale(sys, x_n))


def pdg_scheme_step(
    sys: CubicHamiltonianSystem,
    pe: PolarizedEnergy,
    pdg_kind: str,
    x_n: np.ndarray,
    x_np1: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One step of the PDG scheme

        (x^{n+2} - x^n) / (2 dt) = S pdg(x^n, x^{n+1}, x^{n+2}).

    A single linear solve for the quadratic/AVF discrete gradients on
    energies quadratic in each argument; Newton otherwise.
    """
    if pdg_kind not in PDG_KINDS:
        raise ValueError(f"unknown PDG kind {pdg_kind!r}; choose from {sorted(PDG_KINDS)}")
    x_n = np.asarray(x_n, dtype=float)
    x_np1 = np.asarray(x_np1, dtype=float)
    M = sys.mass_dense()
    Mx = sys.apply_mass(x_n)

    if pdg_kind in ("quadratic", "avf") and pe.quadratic_each_arg:
        # pdg(x, y, z) = L z + r with L the first-argument Jacobian of grad_x
        L = pe.jacobian_x(x_np1)
        r = 2.0 * pe.grad_x(0.5 * x_n, x_np1)
        A = M - 2.0 * dt * sys.structure_matmat(L)
        rhs = Mx + 2.0 * dt * sys.apply_structure(r)
        return solve_dense(A, rhs)

    pdg = PDG_KINDS[pdg_kind]

    def residual(z):
        return M @ z - Mx - 2.0 * dt * sys.apply_structure(pdg(pe, x_n, x_np1, z))

    def jacobian(z):
        # forward-difference Jacobian of the PDG in its third argument
        d = z.shape[0]
        base = pdg(pe, x_n, x_np1, z)
        J = np.empty((d, d))
        for i in range(d):
            h = 1e-7 * (1.0 + abs(z[i]))
            zp = z.copy()
            zp[i] += h
            J[:, i] = (pdg(pe, x_n, x_np1, zp) - base) / h
        return M - 2.0 * dt * sys.structure_matmat(J)

    guess = 2.0 * x_np1 - x_n
    # finite-difference Jacobian limits attainable residual; relax slightly
    return _newton(residual, jacobian, guess, _newton_scale(sys, x_n), tol=1e-11)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

ONE_STEP_SCHEMES = {
    "kahan": kahan_step,
    "midpoint": midpoint_step,
    "trapezoidal": trapezoidal_step,
    "avf": avf_step,
}

TWO_STEP_SCHEMES = ("kahan2", "pdgm", "tableau")


@dataclass
class TrajectoryRecord:
    """Fixed-step trajectory with per-step diagnostics.

    states holds every record_stride-th state (always including the initial
    and final ones); diagnostics are evaluated at every step.
    """

    dt: float
    times: np.ndarray
    states: np.ndarray
    diag_times: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    pair_diagnostics: dict = field(default_factory=dict)
    blow_up_time: Optional[float] = None
    n_steps_completed: int = 0

    @property
    def blew_up(self) -> bool:
        return self.blow_up_time is not None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _blown_up(x: np.ndarray, threshold: float) -> bool:
    m = np.max(np.abs(x))
    return not np.isfinite(m) or m > threshold


def integrate(
    scheme: str,
    sys: CubicHamiltonianSystem,
    x0: np.ndarray,
    dt: float,
    n_steps: int,
    *,
    pe: Optional[PolarizedEnergy] = None,
    pdg_kind: str = "quadratic",
    tableau: Optional[TwoStepTableau] = None,
    startup: str = "kahan",
    x1: Optional[np.ndarray] = None,
    allow_newton: bool = False,
    record_stride: int = 1,
    point_diagnostics: Optional[dict] = None,
    pair_diagnostics: Optional[dict] = None,
    blowup_threshold: float = BLOWUP_THRESHOLD,
    t0: float = 0.0,
) -> TrajectoryRecord:
    """Fixed-step integration loop with blow-up detection.

    Blow-up (non-finite state or max-norm above the threshold) truncates
    the trajectory and records the time; it is a result, not an error.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be >= 1, got {record_stride}")
    x0 = np.asarray(x0, dtype=float)
    point_diagnostics = point_diagnostics or {}
    pair_diagnostics = pair_diagnostics or {}

    two_step = scheme in TWO_STEP_SCHEMES
    if not two_step and scheme not in ONE_STEP_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "pdgm" and pe is None:
        raise ValueError("pdgm scheme requires a polarised energy")
    if scheme == "tableau" and tableau is None:
        raise ValueError("tableau scheme requires a tableau")

    rec_states = [x0]
    rec_times = [t0]
    diag_times = []
    point_vals = {k: [fn(x0)] for k, fn in point_diagnostics.items()}
    pair_vals = {k: [] for k in pair_diagnostics}
    blow_up_time = None

    def record(n, x):
        if n % record_stride == 0:
            rec_states.append(x)
            rec_times.append(t0 + n * dt)

    def step_failed(n, exc):
        raise SingularMatrixError(
            f"singular step matrix at step {n} (t = {t0 + n * dt:.6g}, dt = {dt}): {exc}"
        ) from exc

    states = [x0]
    if two_step:
        if x1 is not None:
            xs = np.asarray(x1, dtype=float)
        elif startup == "kahan":
            xs = kahan_step(sys, x0, dt)
        elif startup == "midpoint":
            xs = midpoint_step(sys, x0, dt)
        else:
            raise ValueError(f"unknown startup {startup!r}")
        states.append(xs)

    def advance(n, prev, cur):
        if scheme == "kahan2":
            return kahan_two_step(sys, prev, cur, dt)
        if scheme == "pdgm":
            return pdg_scheme_step(sys, pe, pdg_kind, prev, cur, dt)
        if scheme == "tableau":
            return general_two_step(sys, tableau, prev, cur, dt, allow_newton=allow_newton)
        return ONE_STEP_SCHEMES[scheme](sys, cur, dt)

    n_done = 0
    x_prev = None
    x_cur = x0
    if two_step:
        # the startup state counts as step 1
        x_prev, x_cur = x0, states[1]
        if _blown_up(x_cur, blowup_threshold):
            blow_up_time = t0 + dt
        else:
            n_done = 1
            record(1, x_cur)
            diag_times.append(t0 + dt)
            for k, fn in point_diagnostics.items():
                point_vals[k].append(fn(x_cur))
            for k, fn in pair_diagnostics.items():
                pair_vals[k].append(fn(x_prev, x_cur))

    while n_done < n_steps and blow_up_time is None:
        n = n_done + 1
        try:
            x_next = advance(n, x_prev, x_cur)
        except (SingularMatrixError, NewtonError) as exc:
            if np.max(np.abs(x_cur)) > 1e6 or not np.all(np.isfinite(x_cur)):
                blow_up_time = t0 + n * dt
                break
            step_failed(n, exc)
        if _blown_up(x_next, blowup_threshold):
            blow_up_time = t0 + n * dt
            break
        n_done = n
        record(n, x_next)
        diag_times.append(t0 + n * dt)
        for k, fn in point_diagnostics.items():
            point_vals[k].append(fn(x_next))
        for k, fn in pair_diagnostics.items():
            pair_vals[k].append(fn(x_cur, x_next))
        x_prev, x_cur = x_cur, x_next

    if rec_times[-1] != t0 + n_done * dt:
        rec_states.append(x_cur)
        rec_times.append(t0 + n_done * dt)

    return TrajectoryRecord(
        dt=dt,
        times=np.asarray(rec_times),
        states=np.asarray(rec_states),
        diag_times=np.asarray(diag_times),
        diagnostics={k: np.asarray(v) for k, v in point_vals.items()},
        pair_diagnostics={k: np.asarray(v) for k, v in pair_vals.items()},
        blow_up_time=blow_up_time,
        n_steps_completed=n_done,
    )
