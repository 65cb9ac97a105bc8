"""Error metrics, von Neumann amplification factors, and dispersion
relations for the KdV schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import PeriodicGrid


# ---------------------------------------------------------------------------
# shape / phase / global errors
# ---------------------------------------------------------------------------


def _fractional_shift(profile: np.ndarray, tau: float, dx: float) -> np.ndarray:
    """Circularly shift a grid profile by tau (in x units), linear interpolation."""
    m = math.floor(tau / dx)
    frac = tau / dx - m
    lo = np.roll(profile, m)
    hi = np.roll(profile, m + 1)
    return (1.0 - frac) * lo + frac * hi


def shape_phase_error(
    U: np.ndarray,
    reference_profile: np.ndarray,
    wave_speed: float,
    t: float,
    grid: PeriodicGrid,
) -> tuple[float, float, float]:
    """Minimize ||U - shift(reference, tau)||_2^2 over circular shifts.

    The best grid shift is refined by a parabolic fit through its two
    neighbours. Returns (shape_error, tau_star, phase_error) with the
    phase error |tau_star - c t| reduced modulo L into [0, L/2].
    """
    U = np.asarray(U, dtype=float)
    ref = np.asarray(reference_profile, dtype=float)
    if U.shape != ref.shape or U.shape[0] != grid.num_points:
        raise ValueError("state, reference and grid sizes must match")
    K = grid.num_points
    dx = grid.dx
    # ||U - roll(ref, m)||^2 = ||U||^2 + ||ref||^2 - 2 <U, roll(ref, m)>
    # cross-correlation over all m at once
    corr = np.array([U @ np.roll(ref, m) for m in range(K)])
    err = U @ U + ref @ ref - 2.0 * corr
    m_star = int(np.argmin(err))
    e0 = err[(m_star - 1) % K]
    e1 = err[m_star]
    e2 = err[(m_star + 1) % K]
    denom = e0 - 2.0 * e1 + e2
    delta = 0.0 if denom <= 0 else 0.5 * (e0 - e2) / denom
    delta = min(max(delta, -0.5), 0.5)
    tau_star = (m_star + delta) * dx
    shape = float(np.sum((U - _fractional_shift(ref, tau_star, dx)) ** 2))
    phase = abs(tau_star - wave_speed * t) % grid.length
    if phase > grid.length / 2.0:
        phase = grid.length - phase
    return shape, tau_star % grid.length, phase


def global_error(U: np.ndarray, reference: np.ndarray) -> float:
    """Unweighted coordinate 2-norm distance to the reference state."""
    return float(np.linalg.norm(np.asarray(U) - np.asarray(reference)))


# ---------------------------------------------------------------------------
# von Neumann amplification factors (linearized KdV u_t + u_xxx = 0)
# ---------------------------------------------------------------------------


def amplification_kahan(lam: float, theta: float) -> complex:
    """Amplification factor g = (1 - i s) / (1 + i s), s = lam (cos t - 1) sin t."""
    s = lam * (math.cos(theta) - 1.0) * math.sin(theta)
    return complex(1.0, -s) / complex(1.0, s)


def amplification_pdgm(lam: float, theta: float) -> tuple[complex, complex]:
    """The two roots of g^2 - 1 + i lam (3 g^2 - 2 g + 3)(cos t - 1) sin t = 0."""
    b = lam * (1.0 - math.cos(theta)) * math.sin(theta)
    root = math.sqrt(1.0 + 8.0 * b * b)
    denom = 1.0 + 9.0 * b * b
    g1 = complex(3.0 * b * b + root, b * (3.0 * root - 1.0)) / denom
    g2 = complex(3.0 * b * b - root, -b * (3.0 * root + 1.0)) / denom
    return g1, g2


def pdgm_amplification_residual(g: complex, lam: float, theta: float) -> float:
    """|g^2 - 1 + i lam (3 g^2 - 2 g + 3)(cos t - 1) sin t|."""
    s = lam * (math.cos(theta) - 1.0) * math.sin(theta)
    return abs(g * g - 1.0 + 1j * s * (3.0 * g * g - 2.0 * g + 3.0))


def kahan_amplification_residual(g: complex, lam: float, theta: float) -> float:
    """|(1 + i s) g + i s - 1|, s = lam (cos t - 1) sin t."""
    s = lam * (math.cos(theta) - 1.0) * math.sin(theta)
    return abs((1.0 + 1j * s) * g + 1j * s - 1.0)


def stability_grid(
    method: str, n_lambda: int = 100, n_theta: int = 100, lambda_max: float = 10.0
) -> list[tuple[float, float, list[complex]]]:
    """Sample the amplification roots over lambda in (0, lambda_max],
    theta in [0, 2 pi)."""
    rows = []
    lams = lambda_max * (np.arange(1, n_lambda + 1) / n_lambda)
    thetas = 2.0 * np.pi * np.arange(n_theta) / n_theta
    for lam in lams:
        for theta in thetas:
            if method == "kahan":
                roots = [amplification_kahan(lam, theta)]
            elif method == "pdgm":
                roots = list(amplification_pdgm(lam, theta))
            else:
                raise ValueError(f"unknown method {method!r}")
            rows.append((float(lam), float(theta), roots))
    return rows


# ---------------------------------------------------------------------------
# dispersion relations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DispersionSample:
    xi: float
    omega_exact: float
    omega_kahan: float
    omega_pdgm: Optional[float]  # None when the bisection bracket fails


def omega_kahan(lam: float, xi: float) -> float:
    """sin w / (1 + cos w) = lam (1 - cos xi) sin xi, principal branch."""
    return 2.0 * math.atan(lam * (1.0 - math.cos(xi)) * math.sin(xi))


def omega_pdgm(lam: float, xi: float, tol: float = 1e-14) -> Optional[float]:
    """Solve sin w = lam (1 - cos xi)(3 cos w - 1) sin xi for w in [0, pi].

    Bisection on the principal branch, continuous in xi from w(0) = 0.
    Returns None on bracket failure.
    """
    r = lam * (1.0 - math.cos(xi)) * math.sin(xi)
    if r == 0.0:
        return 0.0

    def f(w):
        return math.sin(w) - r * (3.0 * math.cos(w) - 1.0)

    lo, hi = 0.0, math.pi
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if flo * fhi > 0.0:
        return None
    w = 0.5 * (lo + hi)
    for _ in range(200):
        fm = f(w)
        if fm == 0.0 or hi - lo < tol:
            break
        if flo * fm < 0.0:
            hi = w
        else:
            lo, flo = w, fm
        w = 0.5 * (lo + hi)
    # Newton polish to bring the root to full precision
    for _ in range(3):
        df = math.cos(w) + 3.0 * r * math.sin(w)
        if df == 0.0:
            break
        w -= f(w) / df
    return min(max(w, 0.0), math.pi)


def dispersion_curves(lam: float, xi_samples: np.ndarray) -> list[DispersionSample]:
    """Exact, Kahan and PDGM dispersion curves at the given wavenumbers."""
    out = []
    for xi in np.asarray(xi_samples, dtype=float):
        if not 0.0 <= xi <= math.pi:
            raise ValueError(f"wavenumber must lie in [0, pi], got {xi}")
        out.append(
            DispersionSample(
                xi=float(xi),
                omega_exact=float(xi) ** 3,
                omega_kahan=omega_kahan(lam, xi),
                omega_pdgm=omega_pdgm(lam, xi),
            )
        )
    return out
