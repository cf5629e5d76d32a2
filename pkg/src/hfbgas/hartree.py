"""Hartree functional, constrained minimiser, and Hartree-type flows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, GridMismatchError, IntegratorError
from .grid import (Field, Grid, TrapSpec, apply_laplacian_spectral,
                   fourier_l1_norm)


@dataclass
class InteractionSpec:
    """Even interaction potential with the 1/N mean-field prefactor.

    shape is either "gaussian" (v0 * exp(-x^2 / 2 sigma^2)) or "table"
    (explicit values on the grid, validated for even symmetry).
    """

    shape: str = "gaussian"
    v0: float = 1.0
    sigma: float = 1.0
    table: np.ndarray | None = None
    N_scale: float = 1.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "table"):
            raise ValueError(f"unknown interaction shape {self.shape!r}")
        if self.shape == "table" and self.table is None:
            raise ValueError("table shape requires values")
        if self.N_scale <= 0:
            raise ValueError("N_scale must be positive")
        if self.shape == "gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def values(self, grid: Grid) -> np.ndarray:
        """v sampled on the grid, centred at the origin."""
        if self.shape == "gaussian":
            vals = self.v0 * np.exp(-grid.radius2() / (2.0 * self.sigma**2))
        else:
            vals = np.asarray(self.table, dtype=float)
            if vals.shape != grid.shape:
                raise GridMismatchError("interaction table does not match grid")
        flipped = vals
        for ax in range(grid.dim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        if not np.allclose(vals, flipped, atol=1e-12 * max(1.0, np.abs(vals).max())):
            raise ValueError("interaction must satisfy v(x) = v(-x) on the grid")
        return vals

    def kernel_matrix(self, grid: Grid) -> np.ndarray:
        """Matrix v(x_i - x_j) with periodic wrapping (dense representations)."""
        ax = grid.axis()
        L = grid.box_half_length
        vals = self.values(grid)
        if grid.dim == 1:
            d = (ax[:, None] - ax[None, :] + L) % (2 * L) - L
            idx = np.rint((d + L) / grid.spacing).astype(int) % grid.points_per_axis
            return vals[idx]
        # generic: index displacement per axis, wrapped
        coords = np.indices(grid.shape).reshape(grid.dim, -1)
        n = grid.points_per_axis
        out_idx = []
        for axn in range(grid.dim):
            d = (coords[axn][:, None] - coords[axn][None, :]) % n
            out_idx.append(d)
        flat = np.ravel_multi_index(out_idx, grid.shape)
        centered = np.fft.ifftshift(vals)
        return centered.reshape(-1)[flat]

    def convolve(self, grid: Grid, rho: np.ndarray) -> np.ndarray:
        """(v * rho)(x) on the periodic box via FFT."""
        v0_at_origin = np.fft.ifftshift(self.values(grid))
        return np.fft.ifftn(np.fft.fftn(v0_at_origin) * np.fft.fftn(rho)) * grid.measure

    def fourier_l1(self, grid: Grid) -> float:
        vhat = np.fft.fftn(np.fft.ifftshift(self.values(grid))) * grid.measure
        return float(np.sum(np.abs(vhat)) * grid.momentum_measure / (2 * np.pi) ** (grid.dim / 2))

    def l1_norm(self, grid: Grid) -> float:
        return float(np.sum(np.abs(self.values(grid))) * grid.measure)


@dataclass
class HartreeResult:
    minimizer: Field
    energy: float
    mu_H: float
    g_coupling: float
    iterations: int
    residual: float
    initial_step: float = 0.0  # imaginary-time step 0.5/e_max used at start


def hartree_energy(phi: Field, trap: TrapSpec, v: InteractionSpec, g: float) -> float:
    """E(phi) = <phi,(-Delta+w)phi> + (g/2) intint |phi|^2 v |phi|^2 for unit-norm phi."""
    if abs(phi.norm() - 1.0) > 1e-8:
        raise ValueError(f"hartree_energy expects a normalised field, norm={phi.norm():.3e}")
    grid = phi.grid
    kin = np.real(np.vdot(phi.values, apply_laplacian_spectral(grid, phi.values))) * grid.measure
    pot = np.sum(trap.values(grid) * np.abs(phi.values) ** 2) * grid.measure
    rho = np.abs(phi.values) ** 2
    quartic = np.real(np.sum(rho * v.convolve(grid, rho))) * grid.measure
    return float(kin + pot + 0.5 * g * quartic)


def _mean_field_h(grid, trap, v, g, phi_values):
    rho = np.abs(phi_values) ** 2
    pot = trap.values(grid) + g * np.real(v.convolve(grid, rho))

    def apply(vals):
        return apply_laplacian_spectral(grid, vals) + pot * vals

    return apply, pot


def minimize_hartree(grid: Grid, trap: TrapSpec, v: InteractionSpec, g: float,
                     grad_tol: float = 1e-9, max_iter: int = 20000,
                     max_halvings: int = 40) -> HartreeResult:
    """Unit-norm minimiser of the Hartree functional by projected descent.

    Normalised imaginary-time gradient flow: step along the residual
    (H[phi] - mu) phi, renormalise, and halve the step whenever the energy
    fails to decrease.  Stops when the eigen-residual drops below grad_tol.
    """
    if not 0.0 <= g <= 1.0:
        raise ValueError("g must lie in [0, 1]")
    if v.shape == "gaussian" and v.v0 < 0 and abs(v.v0) * (2 * np.pi * v.sigma**2) ** (grid.dim / 2) > 1.0:
        raise ValueError("attractive interaction too strong for a bounded functional")
    x2max = grid.dim * grid.box_half_length**2
    e_max = float(grid.momentum2().max() + trap.prefactor * x2max ** (trap.exponent_s / 2))
    tau0 = 0.5 / e_max
    tau = tau0
    vals = np.exp(-grid.radius2() / 2.0).astype(complex)
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2) * grid.measure)
    phi = Field(grid, vals)
    energy = hartree_energy(phi, trap, v, g)
    last_energy = energy
    for it in range(max_iter):
        apply, _ = _mean_field_h(grid, trap, v, g, phi.values)
        hphi = apply(phi.values)
        mu = float(np.real(np.vdot(phi.values, hphi)) * grid.measure)
        resid = hphi - mu * phi.values
        rnorm = float(np.sqrt(np.sum(np.abs(resid) ** 2) * grid.measure))
        if rnorm <= grad_tol:
            return HartreeResult(phi, energy, mu, g, it, rnorm, initial_step=tau0)
        halvings = 0
        while True:
            cand = phi.values - tau * resid
            cand /= np.sqrt(np.sum(np.abs(cand) ** 2) * grid.measure)
            cand_f = Field(grid, cand)
            cand_e = hartree_energy(cand_f, trap, v, g)
            if cand_e <= energy + 1e-15 * abs(energy):
                break
            tau /= 2.0
            halvings += 1
            if halvings > max_halvings:
                raise ConvergenceError(
                    f"energy would not decrease (E_k={last_energy:.12g}, "
                    f"E_k+1={cand_e:.12g})",
                    best_residual=rnorm,
                )
        last_energy = energy
        phi, energy = cand_f, cand_e
        if halvings == 0:
            tau = min(tau * 1.5, 0.5 / e_max * 4)
    raise ConvergenceError(f"no convergence in {max_iter} iterations", best_residual=rnorm)


# ---------------------------------------------------------------------------
# Time-dependent flows (trap released unless keep_trap is set)
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    fields: list  # list of Field

    def __iter__(self):
        return iter(zip(self.times, self.fields))


def propagate_hartree(phi0: Field, v: InteractionSpec, dt: float, t_end: float,
                      n_frames: int = 11, keep_trap: bool = False,
                      trap: TrapSpec | None = None,
                      stability_budget: float = 200.0) -> Trajectory:
    """Strang split-step solution of i d_t phi = (-Delta + v*|phi|^2/N) phi.

    Potential half-step, exact Fourier kinetic step, potential half-step with
    the refreshed density; the l^2 norm must stay within 1e-8 per unit time
    or the run aborts advising a smaller dt.
    """
    grid = phi0.grid
    k2 = grid.momentum2()
    if dt * float(k2.max()) > stability_budget:
        raise ValueError("dt too large for the splitting accuracy budget")
    w = trap.values(grid) if (keep_trap and trap is not None) else 0.0
    steps = int(round(t_end / dt))
    frame_idx = np.unique(np.linspace(0, steps, n_frames).round().astype(int))
    kin = np.exp(-1j * dt * k2)
    phi = phi0.values.copy()
    norm0 = phi0.norm()
    times, fields = [0.0], [phi0.copy()]
    inv_n = 1.0 / v.N_scale
    for step in range(1, steps + 1):
        pot = inv_n * np.real(v.convolve(grid, np.abs(phi) ** 2)) + w
        phi = np.exp(-0.5j * dt * pot) * phi
        phi = np.fft.ifftn(kin * np.fft.fftn(phi))
        pot = inv_n * np.real(v.convolve(grid, np.abs(phi) ** 2)) + w
        phi = np.exp(-0.5j * dt * pot) * phi
        if step in frame_idx:
            f = Field(grid, phi.copy())
            drift = abs(f.norm() - norm0)
            if drift > 1e-8 * max(step * dt, 1.0) * max(norm0, 1.0):
                raise IntegratorError(
                    f"norm drift {drift:.3e} at t={step * dt:.3f}; reduce dt",
                    step_index=step,
                )
            times.append(step * dt)
            fields.append(f)
    return Trajectory(np.array(times), fields)


def propagate_onebody_hartree(grid: Grid, omega0: np.ndarray, v: InteractionSpec,
                              dt: float, t_end: float, n_frames: int = 11):
    """Unitary-conjugation splitting for i d_t w = [-Delta + v*rho_w/N, w].

    The kernel is conjugated with e^{-i H dt}, H frozen at the midpoint
    density, so Hermiticity, positivity and the spectrum are preserved
    exactly per step.  Returns (times, list of kernels).
    """
    npts = grid.size
    if npts > 16384:
        raise ValueError("dense one-body flow restricted to small grids")
    omega = np.asarray(omega0, dtype=complex).copy()
    if omega.shape != (npts, npts):
        raise GridMismatchError("omega kernel shape does not match grid")
    steps = int(round(t_end / dt))
    frame_idx = np.unique(np.linspace(0, steps, n_frames).round().astype(int))
    eye = np.eye(npts)
    lap = _dense_laplacian(grid)
    meas = grid.measure
    trace0 = float(np.real(np.trace(omega)) * meas)
    inv_n = 1.0 / v.N_scale
    times, kernels = [0.0], [omega.copy()]

    def propagator(om, step_dt):
        rho = np.real(np.diagonal(om))
        pot = inv_n * np.real(v.convolve(grid, rho.reshape(grid.shape))).reshape(-1)
        H = (lap + np.diag(pot / meas)) * meas   # matrix in the orthonormal basis
        H = (H + H.conj().T) / 2.0
        evals, vecs = np.linalg.eigh(H)
        return (vecs * np.exp(-1j * step_dt * evals)) @ vecs.conj().T

    for step in range(1, steps + 1):
        U_half = propagator(omega, dt / 2.0)
        om_mid = U_half @ omega @ U_half.conj().T
        U_full = propagator(om_mid, dt)
        omega = U_full @ omega @ U_full.conj().T
        if step in frame_idx:
            drift = abs(float(np.real(np.trace(omega)) * meas) - trace0)
            if drift > 1e-7 * max(1.0, trace0):
                raise IntegratorError(f"trace drift {drift:.3e}", step_index=step)
            times.append(step * dt)
            kernels.append(omega.copy())
    _ = eye
    return np.array(times), kernels


def _dense_laplacian(grid: Grid) -> np.ndarray:
    """Kernel matrix of -Delta: (-Delta f)_i = sum_j D[i,j] f_j dx^d."""
    npts = grid.size
    eye = np.eye(npts, dtype=complex)
    cols = eye.T.reshape((npts,) + grid.shape)
    k2 = grid.momentum2()
    axes = tuple(range(1, grid.dim + 1))
    out = np.fft.ifftn(k2[None, ...] * np.fft.fftn(cols, axes=axes), axes=axes)
    return out.reshape(npts, npts).T / grid.measure


def fourier_l1_trajectory(traj: Trajectory) -> np.ndarray:
    """||phihat_t||_1 per saved frame."""
    return np.array([fourier_l1_norm(f) for f in traj.fields])


def sobolev3_ratio(result: HartreeResult, v: InteractionSpec) -> float:
    """Reported ratio ||phi||_{H^3} / (1 + ||v||_inf + mu)^{3/2}.

    The regularity bound for Hartree minimisers carries an unspecified
    constant, so this is a diagnostic value, never an asserted inequality.
    """
    grid = result.minimizer.grid
    k2 = grid.momentum2()
    fh = np.fft.fftn(result.minimizer.values)
    h3 = np.sqrt(np.sum((1 + k2) ** 3 * np.abs(fh) ** 2)
                 / result.minimizer.values.size * grid.measure)
    v_inf = float(np.abs(v.values(grid)).max())
    return float(h3 / (1.0 + v_inf + result.mu_H) ** 1.5)
