import numpy as np
import numpy.testing as npt
import pytest

from polarstep.hamsys import (
    CubicHamiltonianSystem,
    from_cubic_tensor,
    random_cubic_system,
    reference_trajectory,
)
from polarstep.integrators import kahan_step


def planar_system():
    # H(x) = x1^2 x2, S the canonical 2x2 skew matrix
    T = np.zeros((2, 2, 2))
    for idx in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
        T[idx] = 2.0
    return from_cubic_tensor(T, np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_planar_vector_field():
    sys = planar_system()
    # grad = (2 x1 x2, x1^2); at (1,1) the field is (1, -2)
    npt.assert_allclose(sys.vector_field(np.array([1.0, 1.0])), [1.0, -2.0])


def test_vector_field_vanishes_at_critical_point():
    sys = planar_system()
    x = np.zeros(2)
    assert np.all(sys.grad(x) == 0.0)
    npt.assert_allclose(sys.vector_field(x), np.zeros(2))


def test_energy_orthogonality():
    rng = np.random.default_rng(2)
    sys = random_cubic_system(5, rng, homogeneous=False)
    for _ in range(5):
        x = rng.standard_normal(5)
        assert abs(sys.grad(x) @ sys.vector_field(x)) < 1e-12


def test_vector_field_dimension_mismatch():
    with pytest.raises(ValueError):
        planar_system().vector_field(np.zeros(3))


def test_structure_skew():
    rng = np.random.default_rng(3)
    sys = random_cubic_system(6, rng)
    S = sys.skew_matrix()
    npt.assert_allclose(S + S.T, np.zeros_like(S), atol=1e-14)


def test_hessian_decomposition():
    rng = np.random.default_rng(4)
    sys = random_cubic_system(4, rng, homogeneous=False)
    for _ in range(5):
        x = rng.standard_normal(4)
        npt.assert_allclose(
            sys.hessian(x), sys.cubic_hessian(x) + sys.quadratic_part, atol=1e-13
        )
        npt.assert_allclose(
            sys.grad(x),
            0.5 * sys.cubic_hessian(x) @ x + sys.quadratic_part @ x + sys.linear_part,
            atol=1e-13,
        )


def test_cubic_form_symmetry():
    rng = np.random.default_rng(5)
    sys = random_cubic_system(4, rng)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    npt.assert_allclose(sys.cubic_hessian(x) @ y, sys.cubic_hessian(y) @ x, atol=1e-13)


def test_gradient_matches_directional_derivative():
    rng = np.random.default_rng(6)
    sys = random_cubic_system(5, rng, homogeneous=False)
    x = rng.standard_normal(5)
    v = rng.standard_normal(5)
    eps = 1e-6
    fd = (sys.energy(x + eps * v) - sys.energy(x - eps * v)) / (2.0 * eps)
    npt.assert_allclose(fd, sys.grad(x) @ v, rtol=1e-7, atol=1e-9)


def test_finite_difference_jacobian_of_gradient():
    rng = np.random.default_rng(7)
    sys = random_cubic_system(4, rng, homogeneous=False)
    x = rng.standard_normal(4)
    eps = 1e-6 * (1.0 + np.linalg.norm(x))
    H = sys.hessian(x)
    J = np.empty((4, 4))
    for i in range(4):
        e = np.zeros(4)
        e[i] = eps
        J[:, i] = (sys.grad(x + e) - sys.grad(x - e)) / (2.0 * eps)
    npt.assert_allclose(J, H, rtol=1e-5, atol=1e-7)


class TestHomogenize:
    def test_extended_energy_is_homogeneous_cubic(self):
        rng = np.random.default_rng(8)
        sys = random_cubic_system(3, rng, homogeneous=False)
        ext = sys.homogenize()
        for _ in range(5):
            xbar = rng.standard_normal(4)
            lam = rng.uniform(0.2, 3.0)
            npt.assert_allclose(
                ext.energy(lam * xbar), lam**3 * ext.energy(xbar), rtol=1e-11
            )

    def test_matches_base_energy_on_slice(self):
        rng = np.random.default_rng(9)
        sys = random_cubic_system(3, rng, homogeneous=False)
        ext = sys.homogenize()
        for _ in range(5):
            x = rng.standard_normal(3)
            npt.assert_allclose(ext.energy(sys.embed(x)), sys.energy(x), rtol=1e-12)

    def test_scalar_example(self):
        # H(x) = x1^2 x2 + x1^2 + x1 at x = (1, 1) gives 3, matched by the lift
        T = np.zeros((2, 2, 2))
        for idx in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
            T[idx] = 2.0
        sys = from_cubic_tensor(
            T,
            np.array([[0.0, 1.0], [-1.0, 0.0]]),
            Q=np.array([[2.0, 0.0], [0.0, 0.0]]),
            c=np.array([1.0, 0.0]),
        )
        x = np.array([1.0, 1.0])
        assert sys.energy(x) == pytest.approx(3.0)
        ext = sys.homogenize()
        assert ext.energy(sys.embed(x)) == pytest.approx(3.0)

    def test_already_homogeneous_is_x0_independent(self):
        rng = np.random.default_rng(10)
        sys = random_cubic_system(3, rng, homogeneous=True)
        ext = sys.homogenize()
        x = rng.standard_normal(3)
        vals = [ext.energy(np.concatenate([[x0], x])) for x0 in (0.3, 1.0, 2.5)]
        npt.assert_allclose(vals, vals[0], atol=1e-12)

    def test_extended_structure_zero_border_and_skew(self):
        rng = np.random.default_rng(11)
        sys = random_cubic_system(3, rng, homogeneous=False)
        ext = sys.homogenize()
        S = ext.skew_matrix()
        npt.assert_array_equal(S[0], np.zeros(4))
        npt.assert_array_equal(S[:, 0], np.zeros(4))
        npt.assert_allclose(S + S.T, np.zeros_like(S), atol=1e-14)

    def test_auxiliary_coordinate_frozen(self):
        rng = np.random.default_rng(12)
        sys = random_cubic_system(2, rng, homogeneous=False, scale=0.5)
        ext = sys.homogenize()
        xbar = sys.embed(rng.standard_normal(2) * 0.3)
        for _ in range(100):
            xbar = kahan_step(ext, xbar, 0.01)
        assert xbar[0] == 1.0

    def test_kahan_trajectory_equivalence(self):
        rng = np.random.default_rng(13)
        sys = random_cubic_system(2, rng, homogeneous=False, scale=0.5)
        ext = sys.homogenize()
        x = rng.standard_normal(2) * 0.3
        xbar = sys.embed(x)
        for _ in range(100):
            x = kahan_step(sys, x, 0.01)
            xbar = kahan_step(ext, xbar, 0.01)
        npt.assert_allclose(CubicHamiltonianSystem.project(xbar), x, atol=1e-12)


def test_reference_trajectory_conserves_energy():
    rng = np.random.default_rng(14)
    sys = random_cubic_system(4, rng, homogeneous=False, scale=0.3)
    x0 = rng.standard_normal(4) * 0.3
    t = np.linspace(0.0, 2.0, 11)
    traj = reference_trajectory(sys, x0, t)
    H = np.array([sys.energy(x) for x in traj])
    assert np.max(np.abs(H - H[0])) < 1e-8
