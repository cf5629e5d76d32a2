"""Thermal initial data: ideal-gas Gibbs weights with the condensate removed.

The thermodynamic formulas (critical temperature, condensate fraction) are
three-dimensional; on lower-dimensional grids they are used in formula-only
mode for bookkeeping, while the mode weights always come from the actual
grid spectrum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import TargetUnreachableError, TruncationBudgetError
from .grid import Grid, SpectralData, TrapSpec, fourier_transform

BETA_INTEGRAL = float(special.beta(3, 2.5))  # int_0^1 (1-x)^{3/2} x^2 dx = 16/315


def critical_temperature(trap: TrapSpec, N: float):
    """Ideal-gas condensation temperature, T_c = N^{1/a} / (kappa a Gamma(a) zeta(a))^{1/a}.

    Returns (T_c, alpha, kappa) with alpha = (6+3s)/(2s) and
    kappa = (2 L^{-3/s} / 3 pi) * int_0^1 (1-x)^{3/2} x^2 dx, L the trap prefactor.
    """
    if N <= 0:
        raise ValueError("N must be positive")
    s = trap.exponent_s
    L = trap.prefactor
    if L <= 0:
        raise ValueError("trap prefactor must be positive for T_c")
    alpha = (6.0 + 3.0 * s) / (2.0 * s)
    kappa = (2.0 * L ** (-3.0 / s) / (3.0 * np.pi)) * BETA_INTEGRAL
    denom = (kappa * alpha * special.gamma(alpha) * special.zeta(alpha)) ** (1.0 / alpha)
    return N ** (1.0 / alpha) / denom, alpha, kappa


def reduced_critical_temperature(trap: TrapSpec) -> float:
    """t_c(s) = T_c / N^{1/alpha}, independent of N."""
    tc, _, _ = critical_temperature(trap, 1.0)
    return tc


def condensate_fraction(lambda_scaled: float, trap: TrapSpec) -> float:
    """Asymptotic condensate fraction g = [1 - (lambda/t_c)^alpha]_+ for T = lambda N^{1/alpha}."""
    if lambda_scaled < 0:
        raise ValueError("lambda_scaled must be nonnegative")
    _, alpha, _ = critical_temperature(trap, 1.0)
    tc = reduced_critical_temperature(trap)
    return float(max(0.0, 1.0 - (lambda_scaled / tc) ** alpha))


def _polylog(alpha: float, z: float, terms: int = 200_000) -> float:
    # Li_alpha(z) = sum z^k / k^alpha; alpha >= 3 here, so the tail is O(K^{-2})
    if not 0.0 <= z <= 1.0:
        raise ValueError("polylog argument outside [0, 1]")
    k = np.arange(1, terms + 1, dtype=float)
    return float(np.sum(z**k / k**alpha))


def condensate_fraction_semiclassical(trap: TrapSpec, N: float, lam_over_tc: float) -> float:
    """Finite-N condensate fraction from the self-consistent number equation.

    Solves N = z/(1-z) + kappa alpha Gamma(alpha) Li_alpha(z) T^alpha for the
    fugacity z and returns N_0/N; approaches the asymptotic fraction as N
    grows, so it serves as an independent finite-size cross-check.
    """
    tc_red = reduced_critical_temperature(trap)
    _, alpha, kappa = critical_temperature(trap, N)
    T = lam_over_tc * tc_red * N ** (1.0 / alpha)
    pref = kappa * alpha * special.gamma(alpha) * T**alpha

    def excess(z):
        return z / (1.0 - z) + pref * _polylog(alpha, z) - N

    lo, hi = 1e-12, 1.0 - 1e-14
    if excess(hi) < 0:
        return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    z = 0.5 * (lo + hi)
    return float((z / (1.0 - z)) / N)


def bose_weight(e, mu, T):
    x = np.minimum((np.asarray(e) - mu) / T, 700.0)  # deep tail underflows to 0
    return 1.0 / np.expm1(x)


# ---------------------------------------------------------------------------
# Chemical potential and thermal 1-pdm on a grid spectrum
# ---------------------------------------------------------------------------

def fit_eigenvalue_growth(eigenvalues: np.ndarray):
    """Power-law fit e_j ~ c j^p on the upper half of the retained spectrum."""
    m = len(eigenvalues)
    j = np.arange(1, m + 1, dtype=float)
    sel = slice(max(1, m // 2), m)
    p, logc = np.polyfit(np.log(j[sel]), np.log(eigenvalues[sel]), 1)
    return float(np.exp(logc)), float(p)


def _spectral_tail_count(spec: SpectralData, mu: float, T: float,
                         extra_terms: int = 50_000) -> float:
    """Excited-count tail beyond the retained spectrum, from the growth fit."""
    ev = spec.eigenvalues
    c, p = fit_eigenvalue_growth(ev)
    m = len(ev)
    j = np.arange(m + 1, m + 1 + extra_terms, dtype=float)
    e_ext = np.maximum(c * j**p, ev[-1] + (ev[-1] - ev[-2]))
    x = (e_ext - mu) / T
    x = np.clip(x, 1e-12, 700.0)
    return float(np.sum(1.0 / np.expm1(x)))


def solve_chemical_potential(spec: SpectralData, T: float, target_excited: float,
                             occupation_cap: float = 1e8, include_tail: bool = True,
                             rel_tol: float = 1e-8) -> float:
    """Chemical potential matching a target excited-particle count.

    Bisects mu over (e_0 - 50 T, e_1 - delta], where delta keeps the first
    excited occupation below ``occupation_cap``; the count is the Bose sum
    over retained modes j >= 1 plus a growth-law tail estimate.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if target_excited <= 0:
        raise ValueError("target_excited must be positive")
    ev = spec.eigenvalues
    if len(ev) < 2:
        raise ValueError("need at least two retained modes")
    e0, e1 = float(ev[0]), float(ev[1])

    def excited(mu):
        n = float(np.sum(bose_weight(ev[1:], mu, T)))
        if include_tail:
            n += _spectral_tail_count(spec, mu, T)
        return n

    delta = T * np.log1p(1.0 / occupation_cap)
    lo, hi = e0 - 50.0 * T, e1 - delta
    n_hi = excited(hi)
    if n_hi < target_excited:
        raise TargetUnreachableError(
            f"target {target_excited:.6g} exceeds reachable excited count",
            max_reachable=n_hi,
        )
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if excited(mid) >= target_excited:
            hi = mid
        else:
            lo = mid
        if abs(excited(0.5 * (lo + hi)) - target_excited) <= rel_tol * target_excited:
            break
    return 0.5 * (lo + hi)


@dataclass
class ThermalModel:
    """Scaling data for one thermal construction."""

    trap: TrapSpec
    N_total: float
    temperature: float
    lambda_scaled: float
    alpha_exp: float
    kappa_const: float
    t_c_const: float
    chemical_potential: float | None = None

    @property
    def critical_temperature(self) -> float:
        return self.t_c_const * self.N_total ** (1.0 / self.alpha_exp)


def build_thermal_model(trap: TrapSpec, N_total: float,
                        lam_over_tc: float | None = None,
                        temperature: float | None = None) -> ThermalModel:
    """Assemble a ThermalModel from either lambda/t_c or a direct temperature."""
    if (lam_over_tc is None) == (temperature is None):
        raise ValueError("specify exactly one of lam_over_tc or temperature")
    _, alpha, kappa = critical_temperature(trap, max(N_total, 1.0))
    tc_red = reduced_critical_temperature(trap)
    if lam_over_tc is not None:
        lam = lam_over_tc * tc_red
        T = lam * N_total ** (1.0 / alpha)
    else:
        T = temperature
        lam = T / N_total ** (1.0 / alpha)
    return ThermalModel(
        trap=trap, N_total=N_total, temperature=T, lambda_scaled=lam,
        alpha_exp=alpha, kappa_const=kappa, t_c_const=tc_red,
    )


@dataclass
class ThermalPDM:
    """Bose weights over excited trap modes, condensate mode projected out."""

    weights: np.ndarray          # lam_j for the retained excited modes
    mode_indices: np.ndarray     # indices into modes.eigenfunctions
    modes: SpectralData
    discarded_trace: float
    chemical_potential: float
    temperature: float

    @property
    def trace(self) -> float:
        return float(np.sum(self.weights))

    @property
    def operator_norm(self) -> float:
        return float(self.weights[0]) if len(self.weights) else 0.0

    def mode_fields(self) -> list:
        return [self.modes.eigenfunctions[i] for i in self.mode_indices]


def build_thermal_pdm(model: ThermalModel, spec: SpectralData,
                      target_excited: float | None = None,
                      weight_cutoff_rel: float = 1e-10,
                      discard_tol: float = 1e-3,
                      m_cap: int | None = None) -> ThermalPDM:
    """Thermal 1-pdm gamma = (e^{(h-mu)/T} - 1)^{-1} Q on the retained modes.

    When ``target_excited`` is given the chemical potential is solved to
    match it; otherwise model.chemical_potential must already be set.
    Modes are retained while their weight stays above
    ``weight_cutoff_rel`` times the top weight (and below ``m_cap``); the
    remaining trace is estimated from the fitted eigenvalue growth law and
    must stay below ``discard_tol`` times the retained trace.
    """
    T = model.temperature
    if target_excited is not None:
        mu = solve_chemical_potential(spec, T, target_excited)
        model.chemical_potential = mu
    mu = model.chemical_potential
    if mu is None:
        raise ValueError("chemical potential not solved")
    if mu >= spec.eigenvalues[0]:
        warnings.warn(
            "chemical potential sits above the ground level; admissible for the "
            "projected 1-pdm (weights need only mu < e_1) but outside the "
            "mu < e_0 regime of the 3d construction",
            stacklevel=2,
        )
    ev = spec.eigenvalues
    if mu >= ev[1]:
        raise ValueError("mu must lie strictly below e_1 for positive weights")
    w_all = bose_weight(ev[1:], mu, T)
    top = w_all[0]
    keep = w_all >= weight_cutoff_rel * top
    if m_cap is not None:
        keep[m_cap:] = False
    idx = np.nonzero(keep)[0]
    # retained modes must be contiguous from the first excited level
    m_keep = int(idx[-1] + 1) if len(idx) else 0
    weights = w_all[:m_keep]
    discarded = float(np.sum(w_all[m_keep:])) + _spectral_tail_count(spec, mu, T)
    retained = float(np.sum(weights))
    if retained > 0 and discarded > discard_tol * retained:
        raise TruncationBudgetError(
            f"discarded trace {discarded:.3e} exceeds {discard_tol:.1e} x retained "
            f"{retained:.3e}; retain more modes"
        )
    return ThermalPDM(
        weights=np.asarray(weights, dtype=float),
        mode_indices=np.arange(1, m_keep + 1),
        modes=spec,
        discarded_trace=discarded,
        chemical_potential=float(mu),
        temperature=T,
    )


def condensate_amplitude(model: ThermalModel, pdm: ThermalPDM) -> float:
    """sqrt(N - tr gamma): condensate normalisation exhausting the budget."""
    n0 = model.N_total - pdm.trace - pdm.discarded_trace
    if n0 <= 0:
        raise ValueError("thermal cloud exhausts the particle budget")
    return float(np.sqrt(n0))


def solve_full_ideal_gas(spec: SpectralData, T: float, N: float) -> float:
    """Chemical potential of the unprojected ideal gas: sum_j Bose(e_j) = N.

    The condensate mode is included, so mu < e_0 holds automatically; this
    is the construction whose projection Q gamma^id defines the thermal
    cloud.
    """
    ev = spec.eigenvalues

    def total(mu):
        return float(np.sum(bose_weight(ev, mu, T)))

    e0 = float(ev[0])
    lo = e0 - 50.0 * T
    hi = e0 - T * np.log1p(1.0 / (1e7 * N))
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if total(mid) >= N:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def ideal_gas_excited_target(spec: SpectralData, T: float, N: float):
    """(mu, excited count) of the ideal gas with the condensate projected out."""
    mu = solve_full_ideal_gas(spec, T, N)
    target = float(np.sum(bose_weight(spec.eigenvalues[1:], mu, T)))
    return mu, target


def ideal_gas_grid_fraction(spec: SpectralData, T: float, N: float) -> float:
    """Condensate fraction N_0/N of the full ideal gas on the grid spectrum."""
    mu = solve_full_ideal_gas(spec, T, N)
    return float(bose_weight(spec.eigenvalues[0], mu, T) / N)


def assumption_diagnostics(pdm: ThermalPDM, spec: SpectralData, grid: Grid):
    """Scale diagnostics of the thermal 1-pdm.

    Returns (op_norm, fourier_l1, h3_trace):
    the operator norm (top weight), the upper bound
    sum_j lam_j ||psihat_j||_1^2 for the Fourier-kernel L^1 mass, and
    tr (1-Delta)^{3/2} gamma (1-Delta)^{3/2} evaluated mode-wise.
    """
    if len(pdm.weights) == 0:
        return 0.0, 0.0, 0.0
    dk = grid.momentum_measure
    k2 = grid.momentum2()
    sobolev = (1.0 + k2) ** 3
    f_l1 = 0.0
    h3 = 0.0
    for lam, i in zip(pdm.weights, pdm.mode_indices):
        fh = fourier_transform(spec.eigenfunctions[i])
        f_l1 += lam * (np.sum(np.abs(fh)) * dk) ** 2
        h3 += lam * float(np.sum(sobolev * np.abs(fh) ** 2) * dk)
    return pdm.operator_norm, float(f_l1), float(h3)
