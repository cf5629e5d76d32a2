import numpy as np
import pytest

from hfbgas.grid import Grid, Field, TrapSpec, inner, fourier_l1_norm
from hfbgas.hartree import (InteractionSpec, fourier_l1_trajectory,
                            hartree_energy, minimize_hartree,
                            propagate_hartree, propagate_onebody_hartree,
                            _dense_laplacian)


def _normalized_gaussian(grid, sigma2=1.0):
    vals = np.exp(-grid.radius2() / (2 * sigma2)).astype(complex)
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2) * grid.measure)
    return Field(grid, vals)


def test_interaction_even_symmetry_validation(grid64):
    vals = np.exp(-(grid64.axis() - 0.5) ** 2)  # off-centre: not even
    with pytest.raises(ValueError):
        InteractionSpec(shape="table", table=vals, N_scale=1.0).values(grid64)


def test_hartree_energy_linear_case(grid64, harmonic, spec64):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    e = hartree_energy(spec64.eigenfunctions[0], harmonic, v, g=0.0)
    assert e == pytest.approx(1.0, abs=1e-8)


def test_hartree_energy_gaussian(grid64, harmonic):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    phi = _normalized_gaussian(grid64)
    assert hartree_energy(phi, harmonic, v, g=0.0) == pytest.approx(1.0, abs=1e-10)


def test_hartree_energy_rejects_unnormalised(grid64, harmonic):
    v = InteractionSpec()
    phi = Field(grid64, 2.0 * np.ones(grid64.shape, dtype=complex))
    with pytest.raises(ValueError):
        hartree_energy(phi, harmonic, v, 0.0)


def test_hartree_energy_quartic_double_sum_oracle(grid64, harmonic):
    # O(n^2) double sum of the interaction term vs the spectral convolution
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    phi = _normalized_gaussian(grid64)
    e_fast = hartree_energy(phi, harmonic, v, g=1.0)
    x = grid64.axis()
    L = grid64.box_half_length
    d = (x[:, None] - x[None, :] + L) % (2 * L) - L
    vmat = np.exp(-d**2 / 2.0)
    rho = np.abs(phi.values) ** 2
    quart = rho @ vmat @ rho * grid64.measure**2
    e_slow = (hartree_energy(phi, harmonic, v, g=0.0) + 0.5 * quart)
    assert e_fast == pytest.approx(e_slow, rel=1e-12)


def test_minimize_free_case(grid64, harmonic, spec64):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    res = minimize_hartree(grid64, harmonic, v, g=0.0, grad_tol=1e-10)
    assert res.energy == pytest.approx(1.0, abs=1e-8)
    overlap = abs(inner(res.minimizer, spec64.eigenfunctions[0]))
    assert overlap >= 1 - 1e-8


def test_minimize_variational_ordering(grid64, harmonic):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    res = minimize_hartree(grid64, harmonic, v, g=0.8, grad_tol=1e-9)
    assert res.energy >= 1.0
    assert res.mu_H >= res.energy  # mu = E + (g/2) quartic for v >= 0


def test_minimize_scf_oracle(grid64, harmonic):
    # independent self-consistent-field fixed point on the same grid
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    res = minimize_hartree(grid64, harmonic, v, g=1.0, grad_tol=1e-11)
    npts = grid64.size
    lap = _dense_laplacian(grid64) * grid64.measure
    w = np.diag(harmonic.values(grid64).reshape(-1))
    phi = _normalized_gaussian(grid64).values.reshape(-1)
    for _ in range(400):
        rho = (np.abs(phi) ** 2).reshape(grid64.shape)
        pot = np.diag(np.real(v.convolve(grid64, rho)).reshape(-1))
        H = np.real(lap) + w + pot
        evals, vecs = np.linalg.eigh((H + H.T) / 2)
        ground = vecs[:, 0] / np.sqrt(grid64.measure)
        new = 0.7 * phi + 0.3 * ground * np.sign(np.vdot(ground, phi).real or 1.0)
        new /= np.sqrt(np.sum(np.abs(new) ** 2) * grid64.measure)
        if np.abs(new - phi).max() < 1e-12:
            phi = new
            break
        phi = new
    e_scf = hartree_energy(Field(grid64, phi.reshape(grid64.shape)), harmonic, v, 1.0)
    assert res.energy == pytest.approx(e_scf, abs=1e-8)


def test_free_gaussian_dispersion(grid64):
    # free evolution: width law sigma(t)^2 = sigma0^2 + t^2 / sigma0^2
    v = InteractionSpec(v0=0.0, sigma=1.0, N_scale=1.0)
    sigma2 = 1.5
    phi0 = _normalized_gaussian(grid64, sigma2=sigma2)
    traj = propagate_hartree(phi0, v, dt=1e-3, t_end=0.5, n_frames=6)
    x2 = grid64.radius2()
    var0 = sigma2 / 2  # <x^2> of the initial density
    for t, f in traj:
        var = np.sum(x2 * np.abs(f.values) ** 2) * grid64.measure
        assert var == pytest.approx(var0 + t**2 / var0, rel=1e-6)


def test_norm_conservation_interacting(grid64):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=10.0)
    phi0 = Field(grid64, 3.0 * _normalized_gaussian(grid64).values)
    traj = propagate_hartree(phi0, v, dt=1e-3, t_end=1.0, n_frames=5)
    for _, f in traj:
        assert abs(f.norm() - phi0.norm()) < 1e-10


def test_strang_self_convergence(grid64):
    # Richardson: halving dt should reduce the error about fourfold
    v = InteractionSpec(v0=2.0, sigma=1.0, N_scale=5.0)
    phi0 = Field(grid64, 2.0 * _normalized_gaussian(grid64).values)
    ref = propagate_hartree(phi0, v, dt=2.5e-5, t_end=0.2, n_frames=2).fields[-1]

    def err(dt):
        out = propagate_hartree(phi0, v, dt=dt, t_end=0.2, n_frames=2).fields[-1]
        return np.sqrt(np.sum(np.abs(out.values - ref.values) ** 2) * grid64.measure)

    e1, e2 = err(8e-4), err(4e-4)
    assert 3.0 < e1 / e2 < 5.2


def test_energy_conservation_trap_off(grid64):
    from hfbgas.grid import apply_laplacian_spectral
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=10.0)
    phi0 = Field(grid64, 3.0 * _normalized_gaussian(grid64).values)

    def energy(f):
        kin = np.real(np.vdot(f.values, apply_laplacian_spectral(grid64, f.values)))
        kin *= grid64.measure
        rho = np.abs(f.values) ** 2
        quart = np.real(np.sum(rho * v.convolve(grid64, rho))) * grid64.measure
        return kin + quart / (2 * v.N_scale)

    traj = propagate_hartree(phi0, v, dt=5e-4, t_end=1.0, n_frames=5)
    e0 = energy(traj.fields[0])
    for _, f in traj:
        assert abs(energy(f) - e0) / abs(e0) < 1e-6


def test_onebody_free_conjugation(grid32):
    v = InteractionSpec(v0=0.0, sigma=1.0, N_scale=1.0)
    rng = np.random.default_rng(5)
    npts = grid32.size
    M = rng.standard_normal((npts, 3)) + 1j * rng.standard_normal((npts, 3))
    omega0 = M @ M.conj().T / npts
    times, kernels = propagate_onebody_hartree(grid32, omega0, v, dt=2e-3, t_end=0.3)
    # oracle: spectral free conjugation of the kernel
    ph = np.exp(-1j * times[-1] * grid32.momentum2())
    eye = np.eye(npts, dtype=complex)
    U = np.fft.ifft(ph[:, None] * np.fft.fft(eye, axis=0), axis=0)
    expected = U @ omega0 @ U.conj().T
    assert np.abs(kernels[-1] - expected).max() < 1e-10


def test_onebody_rank1_matches_hartree(grid32):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=4.0)
    phi0 = _normalized_gaussian(grid32)
    phi0 = Field(grid32, 2.0 * phi0.values)  # norm^2 = 4 = N_scale
    omega0 = np.outer(phi0.values, phi0.values.conj())
    dt, t_end = 1e-4, 0.25
    times, kernels = propagate_onebody_hartree(grid32, omega0, v, dt, t_end,
                                               n_frames=2)
    traj = propagate_hartree(phi0, v, dt, t_end, n_frames=2)
    target = np.outer(traj.fields[-1].values, traj.fields[-1].values.conj())
    diff = (kernels[-1] - target) * grid32.measure
    evals = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    assert np.sum(np.abs(evals)) < 1e-8


def test_onebody_isospectrality(grid32):
    v = InteractionSpec(v0=1.5, sigma=1.0, N_scale=3.0)
    rng = np.random.default_rng(6)
    npts = grid32.size
    M = rng.standard_normal((npts, 4)) + 1j * rng.standard_normal((npts, 4))
    omega0 = M @ M.conj().T / npts
    _, kernels = propagate_onebody_hartree(grid32, omega0, v, dt=1e-3, t_end=0.2,
                                           n_frames=2)
    e0 = np.linalg.eigvalsh(omega0 * grid32.measure)
    e1 = np.linalg.eigvalsh(kernels[-1] * grid32.measure)
    assert np.abs(e0 - e1).max() < 1e-8
    end = kernels[-1]
    assert np.abs(end - end.conj().T).max() < 1e-10
    assert e1[0] >= -1e-10


def test_fourier_l1_free_constant(grid64):
    v = InteractionSpec(v0=0.0, sigma=1.0, N_scale=1.0)
    phi0 = _normalized_gaussian(grid64)
    traj = propagate_hartree(phi0, v, dt=1e-3, t_end=1.0, n_frames=6)
    vals = fourier_l1_trajectory(traj)
    assert vals[0] == pytest.approx(fourier_l1_norm(phi0), rel=1e-12)
    assert np.abs(vals - vals[0]).max() < 1e-6 * vals[0]


def test_fourier_l1_interacting_growth_is_mild(grid64):
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=10.0)
    phi0 = Field(grid64, 3.0 * _normalized_gaussian(grid64).values)
    traj = propagate_hartree(phi0, v, dt=1e-3, t_end=1.0, n_frames=11)
    vals = fourier_l1_trajectory(traj)
    slope = np.polyfit(traj.times, np.log(vals), 1)[0]
    assert np.isfinite(slope)


def test_sobolev3_ratio_reported(grid64, harmonic):
    from hfbgas.hartree import sobolev3_ratio
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    res = minimize_hartree(grid64, harmonic, v, g=0.5, grad_tol=1e-9)
    ratio = sobolev3_ratio(res, v)
    assert np.isfinite(ratio) and ratio > 0


def test_minimizer_stationary_with_trap_on(grid64, harmonic):
    # the minimiser evolved with the trap kept on is stationary up to phase
    v = InteractionSpec(v0=1.0, sigma=1.0, N_scale=1.0)
    res = minimize_hartree(grid64, harmonic, v, g=1.0, grad_tol=1e-11)
    traj = propagate_hartree(res.minimizer, v, dt=5e-4, t_end=0.5, n_frames=3,
                             keep_trap=True, trap=harmonic)
    for t, f in traj:
        overlap = abs(inner(res.minimizer, f))
        assert overlap > 1 - 1e-8
