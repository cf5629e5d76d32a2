"""HFB state representations and propagators.

Two interchangeable representations of the pair (gamma, alpha):

* ``DensePDM`` stores kernels gamma(x,y), alpha(x,y) on a small grid and is
  stepped with classical RK4 (the oracle).
* ``ModeState`` stores weighted mode pairs (lam_j, a_j, b_j).  The pair ODEs

      i d_t a_j = h(gamma^phi) a_j + k(alpha^phi) conj(b_j)
      i d_t b_j = h(gamma^phi) b_j + k(alpha^phi) conj(a_j)

  with a_j(0) = psi_j, b_j(0) = 0 reproduce the full flow through

      gamma = sum_j lam_j a_j (x) conj(a_j) + (1+lam_j) b_j (x) conj(b_j)
      alpha = sum_j lam_j a_j (x) b_j + (1+lam_j) b_j (x) a_j

  provided the mode list spans the whole retained basis: pairing activates
  the b-channel of every basis mode, including thermally unoccupied ones,
  so those are carried with lam_j = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, IntegratorError
from .grid import Field, Grid, apply_laplacian_spectral
from .hartree import InteractionSpec, _dense_laplacian
from .thermal import ThermalPDM

DENSE_SIZE_CAP = 16384  # matrix kernels only below this point count


# ---------------------------------------------------------------------------
# Representations
# ---------------------------------------------------------------------------

@dataclass
class DensePDM:
    """Kernel-form pair (gamma, alpha) on a small grid."""

    grid: Grid
    gamma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        npts = self.grid.size
        if npts > DENSE_SIZE_CAP:
            raise ValueError(f"grid too large for dense kernels ({npts} points)")
        self.gamma = np.asarray(self.gamma, dtype=complex).reshape(npts, npts)
        self.alpha = np.asarray(self.alpha, dtype=complex).reshape(npts, npts)
        scale = max(1.0, np.abs(self.gamma).max())
        if np.abs(self.gamma - self.gamma.conj().T).max() > 1e-8 * scale:
            raise ValueError("gamma kernel is not Hermitian")
        ascale = max(1.0, np.abs(self.alpha).max())
        if np.abs(self.alpha - self.alpha.T).max() > 1e-8 * ascale:
            raise ValueError("alpha kernel is not symmetric")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.gamma)) * self.grid.measure)

    def copy(self) -> "DensePDM":
        return DensePDM(self.grid, self.gamma.copy(), self.alpha.copy())


@dataclass
class DenseState:
    phi: Field
    pdm: DensePDM
    interaction: InteractionSpec

    def copy(self) -> "DenseState":
        return DenseState(self.phi.copy(), self.pdm.copy(), self.interaction)

    @property
    def grid(self) -> Grid:
        return self.phi.grid


@dataclass
class ModeState:
    """Weighted mode pairs; a and b are stacked (n_modes, *grid.shape)."""

    phi: Field
    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    interaction: InteractionSpec

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.a = np.asarray(self.a, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)
        if self.a.shape != self.b.shape or self.a.shape[0] != len(self.weights):
            raise ValueError("modes_a/modes_b/weights shapes disagree")
        if self.a.shape[1:] != self.phi.grid.shape:
            raise GridMismatchError("mode fields do not live on phi's grid")

    @property
    def grid(self) -> Grid:
        return self.phi.grid

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    def copy(self) -> "ModeState":
        return ModeState(self.phi.copy(), self.weights.copy(), self.a.copy(),
                         self.b.copy(), self.interaction)

    def modes_a(self) -> list:
        return [Field(self.grid, self.a[j]) for j in range(self.n_modes)]

    def modes_b(self) -> list:
        return [Field(self.grid, self.b[j]) for j in range(self.n_modes)]

    def gamma_factors(self):
        """(coefficients, fields) with gamma = sum c_m u_m (x) conj(u_m)."""
        meas = self.grid.measure
        npts = self.grid.size
        cols_a = self.a.reshape(self.n_modes, npts).T
        cols_b = self.b.reshape(self.n_modes, npts).T
        coeffs = np.concatenate([self.weights, 1.0 + self.weights])
        return coeffs, np.hstack([cols_a, cols_b]), meas

    def gamma_dense(self) -> np.ndarray:
        c, U, _ = self.gamma_factors()
        return (U * c) @ U.conj().T

    def alpha_dense(self) -> np.ndarray:
        npts = self.grid.size
        A = self.a.reshape(self.n_modes, npts)
        B = self.b.reshape(self.n_modes, npts)
        alp = (A.T * self.weights) @ B + (B.T * (1.0 + self.weights)) @ A
        return (alp + alp.T) / 2.0

    def to_dense(self) -> DenseState:
        return DenseState(self.phi.copy(),
                          DensePDM(self.grid, self.gamma_dense(), self.alpha_dense()),
                          self.interaction)


def thermal_to_mode_state(pdm: ThermalPDM, phi0: Field, interaction: InteractionSpec,
                          include_full_basis: bool = True) -> ModeState:
    """Initial ModeState a_j = psi_j, b_j = 0 from a thermal 1-pdm.

    With ``include_full_basis`` the whole retained spectral basis enters the
    mode list (zero weight where unoccupied); required for oracle-grade
    agreement with the dense flow, since pairing populates every b-channel.
    """
    spec = pdm.modes
    grid = spec.grid
    if include_full_basis:
        n_modes = spec.count
        weights = np.zeros(n_modes)
        weights[pdm.mode_indices] = pdm.weights
        fields = spec.eigenfunctions
    else:
        n_modes = len(pdm.weights)
        weights = pdm.weights
        fields = pdm.mode_fields()
    a = np.stack([f.values for f in fields[:n_modes]])
    return ModeState(phi0.copy(), weights, a, np.zeros_like(a), interaction)


def thermal_to_dense_state(pdm: ThermalPDM, phi0: Field,
                           interaction: InteractionSpec) -> DenseState:
    grid = pdm.modes.grid
    npts = grid.size
    gam = np.zeros((npts, npts), dtype=complex)
    for lam, i in zip(pdm.weights, pdm.mode_indices):
        col = pdm.modes.eigenfunctions[i].values.reshape(-1)
        gam += lam * np.outer(col, col.conj())
    return DenseState(phi0.copy(), DensePDM(grid, gam, np.zeros_like(gam)), interaction)


# ---------------------------------------------------------------------------
# Mean-field building blocks
# ---------------------------------------------------------------------------

def mean_field_direct(grid: Grid, rho: np.ndarray, v: InteractionSpec) -> np.ndarray:
    """(1/N) (v * rho)(x); linear in rho."""
    if np.min(rho) < -1e-10 * max(1.0, np.max(np.abs(rho))):
        raise ValueError("density has a significantly negative part")
    return np.real(v.convolve(grid, rho)) / v.N_scale


def mean_field_exchange_apply(rep, v: InteractionSpec, f: Field) -> Field:
    """(1/N) (v # gamma) f for either representation of gamma."""
    grid = f.grid
    if isinstance(rep, DensePDM):
        if rep.grid != grid:
            raise GridMismatchError("exchange: representation grid mismatch")
        kern = v.kernel_matrix(grid) * rep.gamma / v.N_scale
        out = kern @ f.values.reshape(-1) * grid.measure
        return Field(grid, out.reshape(grid.shape))
    if isinstance(rep, ModeState):
        out = np.zeros(grid.shape, dtype=complex)
        for lam, aj, bj in zip(rep.weights, rep.a, rep.b):
            out += lam * aj * v.convolve(grid, np.conj(aj) * f.values)
            out += (1.0 + lam) * bj * v.convolve(grid, np.conj(bj) * f.values)
        return Field(grid, out / v.N_scale)
    raise TypeError(f"unsupported representation {type(rep)!r}")


def pairing_apply(rep, v: InteractionSpec, f: Field, phi: Field | None = None) -> Field:
    """(1/N) v # (alpha + |phi><conj phi|) applied to f.

    ``rep`` supplies alpha (DensePDM or ModeState); the condensate pairing
    phi(x) phi(y) is added when phi is given.
    """
    grid = f.grid
    add_phi = phi.values if phi is not None else None
    if isinstance(rep, DensePDM):
        kern = rep.alpha.copy()
        if add_phi is not None:
            kern = kern + np.outer(add_phi.reshape(-1), add_phi.reshape(-1))
        kern = v.kernel_matrix(grid) * kern / v.N_scale
        out = kern @ f.values.reshape(-1) * grid.measure
        return Field(grid, out.reshape(grid.shape))
    if isinstance(rep, ModeState):
        out = np.zeros(grid.shape, dtype=complex)
        for lam, aj, bj in zip(rep.weights, rep.a, rep.b):
            out += lam * aj * v.convolve(grid, bj * f.values)
            out += (1.0 + lam) * bj * v.convolve(grid, aj * f.values)
        if add_phi is not None:
            out += add_phi * v.convolve(grid, add_phi * f.values)
        return Field(grid, out / v.N_scale)
    raise TypeError(f"unsupported representation {type(rep)!r}")


# ---------------------------------------------------------------------------
# Dense RK4 stepper
# ---------------------------------------------------------------------------

class _DenseWork:
    """Precomputed kernels for the dense right-hand side."""

    def __init__(self, grid: Grid, v: InteractionSpec):
        self.grid = grid
        self.v = v
        self.meas = grid.measure
        self.lap = _dense_laplacian(grid)
        self.vmat = v.kernel_matrix(grid)

    def rhs(self, phi, gam, alp):
        grid, meas, inv_n = self.grid, self.meas, 1.0 / self.v.N_scale
        rho_g = np.real(np.diagonal(gam)).reshape(grid.shape)
        rho_p = np.abs(phi) ** 2
        Wg = inv_n * np.real(self.v.convolve(grid, rho_g))
        Wp = inv_n * np.real(self.v.convolve(grid, rho_p))
        Xg = inv_n * self.vmat * gam
        phicol = phi.reshape(-1)
        Xp = inv_n * self.vmat * np.outer(phicol, phicol.conj())
        K = inv_n * self.vmat * (alp + np.outer(phicol, phicol))
        H = self.lap + np.diag((Wg + Wp).reshape(-1)) / meas + Xg + Xp
        hphi = (apply_laplacian_spectral(grid, phi) + Wg * phi
                + (Xg @ phicol * meas).reshape(grid.shape))
        dphi = -1j * (hphi + (K @ phicol.conj() * meas).reshape(grid.shape))
        dgam = -1j * ((H @ gam - gam @ H) * meas
                      + (K @ alp.conj() - alp @ K.conj()) * meas)
        dalp = -1j * ((H @ alp + alp @ H.conj()) * meas
                      + (K @ gam.conj() + gam @ K) * meas + K)
        return dphi, dgam, dalp


def step_dense(state: DenseState, dt: float, work: _DenseWork | None = None,
               symmetry_tol: float = 1e-8) -> tuple:
    """One RK4 step of the coupled (phi, gamma, alpha) system.

    Hermiticity of gamma and symmetry of alpha are re-enforced by averaging
    after the step; the recorded drift must stay below ``symmetry_tol``.
    Returns (new_state, drift).
    """
    grid = state.grid
    if work is None:
        work = _DenseWork(grid, state.interaction)
    e_max = float(grid.momentum2().max())
    if dt * e_max > 2.5:
        raise ValueError(f"dt={dt} outside RK4 stability for spectral Laplacian "
                         f"(dt * e_max = {dt * e_max:.2f} > 2.5)")
    phi, gam, alp = state.phi.values, state.pdm.gamma, state.pdm.alpha
    k1 = work.rhs(phi, gam, alp)
    k2 = work.rhs(phi + dt / 2 * k1[0], gam + dt / 2 * k1[1], alp + dt / 2 * k1[2])
    k3 = work.rhs(phi + dt / 2 * k2[0], gam + dt / 2 * k2[1], alp + dt / 2 * k2[2])
    k4 = work.rhs(phi + dt * k3[0], gam + dt * k3[1], alp + dt * k3[2])
    phi = phi + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    gam = gam + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    alp = alp + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    scale = max(1.0, np.abs(gam).max())
    drift = max(np.abs(gam - gam.conj().T).max(), np.abs(alp - alp.T).max()) / scale
    if drift > symmetry_tol:
        raise IntegratorError(f"symmetry drift {drift:.3e} in one step")
    gam = (gam + gam.conj().T) / 2
    alp = (alp + alp.T) / 2
    new = DenseState(Field(grid, phi), DensePDM(grid, gam, alp), state.interaction)
    return new, float(drift)


# ---------------------------------------------------------------------------
# Mode stepper: Strang splitting with midpoint-frozen interaction substep
# ---------------------------------------------------------------------------

class _ModeWork:
    def __init__(self, grid: Grid, v: InteractionSpec):
        self.grid = grid
        self.v = v
        self.axes = tuple(range(1, grid.dim + 1))
        self.vhat = np.fft.fftn(np.fft.ifftshift(v.values(grid))) * grid.measure

    def conv_stack(self, stack):
        return np.fft.ifftn(self.vhat[None, ...] * np.fft.fftn(stack, axes=self.axes),
                            axes=self.axes)

    def rhs(self, phi, A, B, weights):
        """Interaction part of the flow (kinetic handled by the splitting)."""
        grid, v = self.grid, self.v
        inv_n = 1.0 / v.N_scale
        m = len(weights)
        wA = weights.reshape((-1,) + (1,) * grid.dim)
        rho_g = np.sum(wA * np.abs(A) ** 2 + (1.0 + wA) * np.abs(B) ** 2, axis=0)
        Wg = inv_n * np.real(v.convolve(grid, rho_g))
        Wp = inv_n * np.real(v.convolve(grid, np.abs(phi) ** 2))
        tx = np.concatenate([phi[None], A, B])                     # exchange targets
        tp = np.concatenate([np.conj(phi)[None], np.conj(B), np.conj(A)])  # pairing targets

        def contract(source, coeffs, targets):
            # sum_j coeffs_j(x) * (v * (source_j . targets))(x), batched over j
            if m == 0:
                return np.zeros((targets.shape[0], grid.size), dtype=complex)
            stacked = (source[:, None] * targets[None]).reshape(
                (m * targets.shape[0],) + grid.shape)
            conv = self.conv_stack(stacked).reshape((m, targets.shape[0], -1))
            return np.einsum("jx,jtx->tx", coeffs.reshape(m, -1), conv)

        # v#gamma on every target: gamma sources pair with conjugated modes
        ex = contract(np.conj(A), wA * A, tx) + contract(np.conj(B), (1 + wA) * B, tx)
        ex = inv_n * ex.reshape(tx.shape)
        # v#alpha on the pairing targets: bilinear kernel, no conjugates
        pr = contract(B, wA * A, tp) + contract(A, (1 + wA) * B, tp)
        pr = inv_n * pr.reshape(tp.shape)
        pr += inv_n * phi[None] * self.conv_stack(phi[None] * tp)   # condensate pairing
        ex_phi_on_modes = inv_n * phi[None] * self.conv_stack(np.conj(phi)[None] * tx[1:])
        dphi = -1j * (Wg * phi + ex[0] + pr[0])
        dA = -1j * ((Wg + Wp) * A + ex[1:1 + m] + ex_phi_on_modes[:m] + pr[1:1 + m])
        dB = -1j * ((Wg + Wp) * B + ex[1 + m:] + ex_phi_on_modes[m:] + pr[1 + m:])
        return dphi, dA, dB


def step_modes(state: ModeState, dt: float, work: _ModeWork | None = None) -> ModeState:
    """One Strang step: kinetic half-steps around an RK4 interaction substep.

    The kinetic factor is exact in Fourier space; the bounded interaction
    part is integrated with one RK4 substep whose mean fields are rebuilt
    from the current modes at every stage.
    """
    grid = state.grid
    if work is None:
        work = _ModeWork(grid, state.interaction)
    half = np.exp(-0.5j * dt * grid.momentum2())

    def kin(phi, A, B):
        axes_all = tuple(range(grid.dim))
        phi = np.fft.ifftn(half * np.fft.fftn(phi, axes=axes_all), axes=axes_all)
        A = np.fft.ifftn(half[None] * np.fft.fftn(A, axes=work.axes), axes=work.axes)
        B = np.fft.ifftn(half[None] * np.fft.fftn(B, axes=work.axes), axes=work.axes)
        return phi, A, B

    phi, A, B = kin(state.phi.values, state.a, state.b)
    w = state.weights
    k1 = work.rhs(phi, A, B, w)
    k2 = work.rhs(phi + dt / 2 * k1[0], A + dt / 2 * k1[1], B + dt / 2 * k1[2], w)
    k3 = work.rhs(phi + dt / 2 * k2[0], A + dt / 2 * k2[1], B + dt / 2 * k2[2], w)
    k4 = work.rhs(phi + dt * k3[0], A + dt * k3[1], B + dt * k3[2], w)
    phi = phi + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    A = A + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    B = B + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    phi, A, B = kin(phi, A, B)
    return ModeState(Field(grid, phi), w, A, B, state.interaction)


def probe_mode_state(state: ModeState, rng=None, tol: float = 1e-6) -> dict:
    """Coarse consistency probe of the reconstruction contract.

    Checks the pairing symmetry alpha = alpha^T through factor contractions
    on a random probe vector; exact symmetry is a symplectic invariant of
    the flow, so growth flags integrator trouble.
    """
    rng = rng or np.random.default_rng(0)
    grid = state.grid
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    meas = grid.measure
    w = state.weights
    A = state.a.reshape(len(w), -1)
    B = state.b.reshape(len(w), -1)
    zf = z.reshape(-1)
    # the pairing kernel is bilinear (no conjugates); alpha z vs alpha^T z
    alpha_z = (A.T * w) @ (B @ zf) * meas + (B.T * (1 + w)) @ (A @ zf) * meas
    alphaT_z = (B.T * w) @ (A @ zf) * meas + (A.T * (1 + w)) @ (B @ zf) * meas
    scale = max(1.0, float(np.abs(alpha_z).max()))
    dev = float(np.abs(alpha_z - alphaT_z).max() / scale)
    return {"alpha_symmetry_dev": dev, "ok": dev <= tol}


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class HFBTrajectory:
    times: np.ndarray
    states: list
    symmetry_drift: float = 0.0
    probe_reports: list = field(default_factory=list)

    def __iter__(self):
        return iter(zip(self.times, self.states))


def run_hfb_dense(state0: DenseState, dt: float, t_end: float,
                  n_frames: int = 11) -> HFBTrajectory:
    work = _DenseWork(state0.grid, state0.interaction)
    steps = int(round(t_end / dt))
    frame_idx = np.unique(np.linspace(0, steps, n_frames).round().astype(int))
    state = state0.copy()
    times, states = [0.0], [state0.copy()]
    total_drift = 0.0
    for step in range(1, steps + 1):
        state, drift = step_dense(state, dt, work)
        total_drift += drift
        if step in frame_idx:
            times.append(step * dt)
            states.append(state.copy())
    return HFBTrajectory(np.array(times), states, symmetry_drift=total_drift)


def run_hfb_modes(state0: ModeState, dt: float, t_end: float, n_frames: int = 11,
                  probe_interval: int | None = None,
                  probe_tol: float = 1e-6) -> HFBTrajectory:
    work = _ModeWork(state0.grid, state0.interaction)
    steps = int(round(t_end / dt))
    frame_idx = np.unique(np.linspace(0, steps, n_frames).round().astype(int))
    state = state0.copy()
    times, states, reports = [0.0], [state0.copy()], []
    rng = np.random.default_rng(1234)
    for step in range(1, steps + 1):
        state = step_modes(state, dt, work)
        if probe_interval and step % probe_interval == 0:
            rep = probe_mode_state(state, rng, tol=probe_tol)
            reports.append((step, rep))
            if not rep["ok"]:
                raise IntegratorError(
                    f"reconstruction probe failed at step {step}: {rep}",
                    step_index=step,
                )
        if step in frame_idx:
            times.append(step * dt)
            states.append(state.copy())
    return HFBTrajectory(np.array(times), states, probe_reports=reports)


# ---------------------------------------------------------------------------
# Free reference evolution and conserved quantities
# ---------------------------------------------------------------------------

def free_conjugate(rep, t: float):
    """gamma -> e^{i Delta t} gamma e^{-i Delta t} (trace and spectrum exact)."""
    if isinstance(rep, DensePDM):
        grid = rep.grid
        npts = grid.size
        eye = np.eye(npts, dtype=complex)
        cols = eye.reshape((npts,) + grid.shape)
        axes = tuple(range(1, grid.dim + 1))
        ph = np.exp(-1j * t * grid.momentum2())
        U = np.fft.ifftn(ph[None] * np.fft.fftn(cols, axes=axes), axes=axes)
        U = U.reshape(npts, npts).T  # columns are evolved deltas
        gam = U @ rep.gamma @ U.conj().T
        alp = U @ rep.alpha @ U.T
        return DensePDM(grid, (gam + gam.conj().T) / 2, (alp + alp.T) / 2)
    if isinstance(rep, ModeState):
        grid = rep.grid
        axes = tuple(range(1, grid.dim + 1))
        ph = np.exp(-1j * t * grid.momentum2())
        a = np.fft.ifftn(ph[None] * np.fft.fftn(rep.a, axes=axes), axes=axes)
        b = np.fft.ifftn(ph[None] * np.fft.fftn(rep.b, axes=axes), axes=axes)
        return ModeState(rep.phi.copy(), rep.weights.copy(), a, b, rep.interaction)
    if isinstance(rep, ThermalPDM):
        raise TypeError("convert ThermalPDM with thermal_to_mode_state first")
    raise TypeError(f"unsupported representation {type(rep)!r}")


def particle_number(state) -> float:
    """n = ||phi||^2 + tr gamma for either representation."""
    if isinstance(state, DenseState):
        return state.phi.norm() ** 2 + state.pdm.trace
    if isinstance(state, ModeState):
        meas = state.grid.measure
        w = state.weights
        na = np.sum(w * np.sum(np.abs(state.a.reshape(len(w), -1)) ** 2, axis=1)) * meas
        nb = np.sum((1 + w) * np.sum(np.abs(state.b.reshape(len(w), -1)) ** 2, axis=1)) * meas
        return float(state.phi.norm() ** 2 + na + nb)
    raise TypeError(f"unsupported state {type(state)!r}")


def hfb_energy(state) -> float:
    """Conserved quasi-free energy of (phi, gamma, alpha).

    kinetic + direct + exchange + pairing terms of the full pair
    (gamma^phi, alpha^phi), with the condensate self-interaction counted
    once.  Constant along both propagators up to integrator error.
    """
    if isinstance(state, DenseState):
        return _energy_dense(state)
    if isinstance(state, ModeState):
        return _energy_modes(state)
    raise TypeError(f"unsupported state {type(state)!r}")


def _energy_dense(state: DenseState) -> float:
    grid = state.grid
    v = state.interaction
    meas = grid.measure
    phi = state.phi.values
    gam, alp = state.pdm.gamma, state.pdm.alpha
    phicol = phi.reshape(-1)
    vmat = v.kernel_matrix(grid)
    lap = _dense_laplacian(grid)
    kin = float(np.real(np.trace(lap @ gam)) * meas * meas)
    kin += float(np.real(np.vdot(phi, apply_laplacian_spectral(grid, phi))) * meas)
    rho_tot = np.real(np.diagonal(gam)).reshape(grid.shape) + np.abs(phi) ** 2
    inv_n = 1.0 / v.N_scale
    direct = 0.5 * inv_n * float(np.real(np.sum(rho_tot * v.convolve(grid, rho_tot))) * meas)
    gphi = gam + np.outer(phicol, phicol.conj())
    aphi = alp + np.outer(phicol, phicol)
    exch = 0.5 * inv_n * float(np.sum(vmat * np.abs(gphi) ** 2) * meas * meas)
    pair = 0.5 * inv_n * float(np.sum(vmat * np.abs(aphi) ** 2) * meas * meas)
    rho_p = np.abs(phi) ** 2
    corr = -inv_n * float(np.real(np.sum(rho_p * v.convolve(grid, rho_p))) * meas)
    return kin + direct + exch + pair + corr


def _energy_modes(state: ModeState) -> float:
    grid = state.grid
    v = state.interaction
    meas = grid.measure
    w = state.weights
    phi = state.phi.values
    axes = tuple(range(1, grid.dim + 1))
    k2 = grid.momentum2()

    def kin_stack(stack, coeff):
        lap = np.fft.ifftn(k2[None] * np.fft.fftn(stack, axes=axes), axes=axes)
        per = np.real(np.sum(np.conj(stack) * lap, axis=axes)) * meas
        return float(np.sum(coeff * per))

    kin = kin_stack(state.a, w) + kin_stack(state.b, 1 + w)
    kin += float(np.real(np.vdot(phi, apply_laplacian_spectral(grid, phi))) * meas)
    rho_g = np.sum(w.reshape((-1,) + (1,) * grid.dim) * np.abs(state.a) ** 2
                   + (1 + w).reshape((-1,) + (1,) * grid.dim) * np.abs(state.b) ** 2, axis=0)
    rho_tot = rho_g + np.abs(phi) ** 2
    inv_n = 1.0 / v.N_scale
    direct = 0.5 * inv_n * float(np.real(np.sum(rho_tot * v.convolve(grid, rho_tot))) * meas)

    # exchange: gamma^phi factor list (coeff, field)
    gam_fields = np.concatenate([state.a, state.b, phi[None]])
    gam_coeff = np.concatenate([w, 1 + w, [1.0]])
    work = _ModeWork(grid, v)
    exch = 0.0
    for mprime in range(len(gam_coeff)):
        g = gam_fields * np.conj(gam_fields[mprime])[None]
        conv = work.conv_stack(np.conj(g))
        vals = np.real(np.sum(g * conv, axis=axes)) * meas
        exch += gam_coeff[mprime] * float(np.sum(gam_coeff * vals))
    exch *= 0.5 * inv_n

    # pairing: alpha^phi = sum_m d_m p_m (x) q_m
    p_fields = np.concatenate([state.a, state.b, phi[None]])
    q_fields = np.concatenate([state.b, state.a, phi[None]])
    d_coeff = np.concatenate([w, 1 + w, [1.0]])
    pair = 0.0
    for mprime in range(len(d_coeff)):
        pp = p_fields * np.conj(p_fields[mprime])[None]
        qq = q_fields * np.conj(q_fields[mprime])[None]
        conv = work.conv_stack(qq)
        vals = np.real(np.sum(pp * conv, axis=axes)) * meas
        pair += d_coeff[mprime] * float(np.sum(d_coeff * vals))
    pair *= 0.5 * inv_n

    rho_p = np.abs(phi) ** 2
    corr = -inv_n * float(np.real(np.sum(rho_p * v.convolve(grid, rho_p))) * meas)
    return kin + direct + exch + pair + corr
