import numpy as np
import pytest

from hfbgas.errors import GridMismatchError, SpectralTailError
from hfbgas.grid import (Grid, Field, TrapSpec, apply_h, boundary_mass_fraction,
                         fourier_transform, inverse_fourier_transform, inner,
                         lowest_eigenpairs, heat_kernel_fourier_check,
                         heat_kernel_diagonal_origin)


def test_grid_invariants():
    g = Grid(1, 64, 8.0)
    assert g.spacing * g.points_per_axis == 2 * g.box_half_length
    k = g.momentum_axis()
    assert np.isclose(sorted(k)[0], -np.pi / g.spacing)
    with pytest.raises(ValueError):
        Grid(1, 48, 8.0)  # not a power of two
    with pytest.raises(ValueError):
        Grid(4, 32, 8.0)


def test_parseval_and_roundtrip():
    g = Grid(1, 64, 8.0)
    rng = np.random.default_rng(3)
    f = Field(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    fh = fourier_transform(f)
    assert abs(np.sum(np.abs(fh) ** 2) * g.momentum_measure - f.norm() ** 2) < 1e-12
    back = inverse_fourier_transform(g, fh)
    assert np.abs(back.values - f.values).max() < 1e-12


def test_apply_h_constant_in_kernel():
    g = Grid(1, 64, 8.0)
    f = Field(g, np.ones(g.shape, dtype=complex))
    out = apply_h(g, TrapSpec(2.0, 1e-300), f)
    assert np.abs(out.values).max() < 1e-10


def test_apply_h_plane_wave():
    g = Grid(1, 64, 8.0)
    k = g.momentum_axis()[5]
    f = Field(g, np.exp(1j * k * g.axis()))
    out = apply_h(g, TrapSpec(2.0, 1e-300), f)
    assert np.abs(out.values - k**2 * f.values).max() < 1e-10


def test_apply_h_harmonic_ground_state():
    # oracle: (-f'' + x^2 f) = 1 * f for f = e^{-x^2/2}
    g = Grid(1, 128, 9.0)
    f = Field(g, np.exp(-g.axis() ** 2 / 2).astype(complex))
    out = apply_h(g, TrapSpec(2.0, 1.0), f)
    assert np.abs(out.values - f.values).max() < 1e-10


def test_apply_h_grid_mismatch():
    g = Grid(1, 64, 8.0)
    f = Field(Grid(1, 32, 8.0), np.zeros(32, dtype=complex))
    with pytest.raises(GridMismatchError):
        apply_h(g, TrapSpec(2.0, 1.0), f)


def test_self_adjointness_random_fields():
    g = Grid(1, 64, 8.0)
    trap = TrapSpec(1.5, 1.0)
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = Field(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
        h = Field(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
        lhs = inner(h, apply_h(g, trap, f))
        rhs = inner(apply_h(g, trap, h), f)
        assert abs(lhs - rhs) <= 1e-10 * f.norm() * h.norm()


def test_harmonic_spectrum_1d(spec64):
    assert np.allclose(spec64.eigenvalues[:5], [1, 3, 5, 7, 9], atol=1e-6)
    assert np.all(np.diff(spec64.eigenvalues) > -1e-12)
    assert spec64.residuals.max() < 1e-9
    for i in range(4):
        for j in range(i + 1, 4):
            ov = inner(spec64.eigenfunctions[i], spec64.eigenfunctions[j])
            assert abs(ov) < 1e-10


def test_linear_trap_vs_finite_difference_oracle():
    # dense tridiagonal FD diagonalisation on a fine reference grid; the
    # kink of |x| limits both methods to algebraic convergence, so the
    # comparison grid is fine and the tolerance matches its h^2 accuracy
    L, n = 12.0, 6000
    h = 2 * L / n
    x = -L + h * np.arange(1, n)
    main = 2.0 / h**2 + np.abs(x)
    off = -np.ones(n - 2) / h**2
    from scipy.linalg import eigh_tridiagonal
    ref = eigh_tridiagonal(main, off, select="i", select_range=(0, 0))[0][0]
    g = Grid(1, 1024, 12.0)
    spec = lowest_eigenpairs(g, TrapSpec(1.0, 1.0), 3)
    assert abs(spec.eigenvalues[0] - ref) < 2e-4


def test_boundary_mass_warning():
    g = Grid(1, 32, 3.0)  # box too small for excited harmonic modes
    spec = lowest_eigenpairs(g, TrapSpec(2.0, 1.0), 10)
    assert spec.boundary_warning
    f = Field(g, np.ones(32, dtype=complex))
    assert 0 < boundary_mass_fraction(f) < 1


def test_heat_kernel_1d_positivity_and_bound(grid64, harmonic, spec64):
    rep = heat_kernel_fourier_check(grid64, harmonic, spec64, 1.0)
    assert rep.min_kernel_value >= -max(rep.tail_estimate, 1e-12)
    assert rep.l1_mass <= rep.bound * 1.001
    assert rep.bound == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    # diag identity: int int k_t = (2 pi) K_t(0,0)
    assert rep.diag_mass == pytest.approx(rep.l1_mass, rel=1e-3)


def test_heat_kernel_mehler_oracle(grid64, harmonic, spec64):
    # for h = -d^2/dx^2 + x^2 the Fourier-space kernel equals the Mehler
    # kernel itself; its lattice L^1 mass is an independent quadrature value
    t = 2.0
    rep = heat_kernel_fourier_check(grid64, harmonic, spec64, t)
    p = np.linspace(-12, 12, 2001)
    dp = p[1] - p[0]
    P, Q = np.meshgrid(p, p, indexing="ij")
    s2t = np.sinh(2 * t)
    mehler = (2 * np.pi * s2t) ** -0.5 * np.exp(
        -((P**2 + Q**2) * np.cosh(2 * t) - 2 * P * Q) / (2 * s2t))
    oracle = np.sum(np.abs(mehler)) * dp * dp
    assert rep.l1_mass == pytest.approx(oracle, rel=1e-4)


def test_heat_kernel_tail_error():
    g = Grid(1, 64, 8.0)
    trap = TrapSpec(2.0, 1.0)
    spec = lowest_eigenpairs(g, trap, 4)
    with pytest.raises(SpectralTailError) as err:
        heat_kernel_fourier_check(g, trap, spec, 0.05)
    assert err.value.required_count > 4


def test_heat_kernel_diag_mehler():
    # K_t(0,0) = (2 pi sinh 2t)^{-1/2} for the 1d harmonic trap
    g = Grid(1, 128, 10.0)
    val = heat_kernel_diagonal_origin(g, TrapSpec(2.0, 1.0), 1.0, steps=400)
    assert val == pytest.approx((2 * np.pi * np.sinh(2.0)) ** -0.5, rel=1e-4)


def test_sobolev_trap_operator_inequality():
    # numeric check of (1-Delta)^3 <= C (kappa+h)^3: the smallest constant on
    # the grid stays modest for the power-law traps used here
    g = Grid(1, 64, 8.0)
    for s in (1.0, 2.0):
        spec = lowest_eigenpairs(g, TrapSpec(s, 1.0), 3)
        npts = g.size
        eye = np.eye(npts, dtype=complex)
        from hfbgas.hartree import _dense_laplacian
        lap = _dense_laplacian(g) * g.measure
        w = np.diag(TrapSpec(s, 1.0).values(g).reshape(-1))
        hmat = (lap + w).real
        hmat = (hmat + hmat.T) / 2
        one_minus = np.eye(npts) + lap.real
        lhs = np.linalg.matrix_power(one_minus, 3)
        kappa = 1.0
        rhs = np.linalg.matrix_power(kappa * np.eye(npts) + hmat, 3)
        evals = np.linalg.eigvalsh(np.linalg.solve(rhs, lhs))
        c_best = evals.max()
        assert np.isfinite(c_best) and 0 < c_best < 100


def test_lanczos_nonconvergence_carries_residual():
    from hfbgas.errors import ConvergenceError
    g = Grid(1, 2048, 10.0)  # large enough to route through block Lanczos
    with pytest.raises(ConvergenceError) as err:
        lowest_eigenpairs(g, TrapSpec(2.0, 1.0), 4, eig_tol=1e-14, max_iter=2)
    assert err.value.best_residual is not None


@pytest.mark.parametrize("s", [1.0, 1.5, 2.0])
def test_heat_kernel_bound_all_traps_1d(s):
    g = Grid(1, 128, 10.0)
    trap = TrapSpec(s, 1.0)
    spec = lowest_eigenpairs(g, trap, 40)
    for t in (0.5, 1.0, 2.0):
        rep = heat_kernel_fourier_check(g, trap, spec, t, diag_steps=150)
        assert rep.l1_mass <= rep.bound * 1.001, (s, t, rep.l1_mass, rep.bound)
        assert rep.min_kernel_value >= -max(rep.tail_estimate, 1e-12), (s, t)
