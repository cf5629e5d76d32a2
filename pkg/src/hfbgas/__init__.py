"""Effective dynamics of weakly interacting Bose gases at positive temperature.

Thermal initial data, Hartree / Hartree-Fock-Bogoliubov / free reference
propagation, trace-norm diagnostics, and an exact doubled-Fock toy for the
Bogoliubov/Weyl operator algebra.
"""

__version__ = "0.1.0"

from .grid import (Grid, Field, TrapSpec, SpectralData, apply_h,
                   lowest_eigenpairs, heat_kernel_fourier_check,
                   heat_kernel_sampled_check, fourier_transform,
                   inverse_fourier_transform, inner)
from .thermal import (ThermalModel, ThermalPDM, critical_temperature,
                      condensate_fraction, solve_chemical_potential,
                      build_thermal_model, build_thermal_pdm,
                      assumption_diagnostics, ideal_gas_excited_target,
                      ideal_gas_grid_fraction, solve_full_ideal_gas)
from .hartree import (InteractionSpec, HartreeResult, hartree_energy,
                      minimize_hartree, propagate_hartree,
                      propagate_onebody_hartree, fourier_l1_trajectory,
                      sobolev3_ratio)
from .hfb import (DensePDM, DenseState, ModeState, mean_field_direct,
                  mean_field_exchange_apply, pairing_apply, step_dense,
                  step_modes, run_hfb_dense, run_hfb_modes, free_conjugate,
                  hfb_energy, particle_number, thermal_to_dense_state,
                  thermal_to_mode_state)
from .diagnostics import (trace_distance, positivity_margin, alpha_hs_norm,
                          sup_kernel, diluteness_trajectory, ComparisonReport,
                          compare_to_references, closeness_scaling_sweep)
from .fock import (FockSpace, build_operators, build_quasifree,
                   verify_weyl_shift, verify_bogoliubov_pdm, verify_wick,
                   assemble_generator, verify_commutator_identity)
