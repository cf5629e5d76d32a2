import numpy as np
import pytest

from hfbgas.diagnostics import (ComparisonReport, alpha_hs_norm,
                                closeness_scaling_sweep, compare_to_references,
                                diluteness_trajectory, positivity_margin,
                                sup_kernel, trace_distance)
from hfbgas.grid import Grid, Field
from hfbgas.hartree import InteractionSpec, propagate_hartree
from hfbgas.hfb import (DensePDM, DenseState, ModeState, run_hfb_dense,
                        thermal_to_dense_state, thermal_to_mode_state)


def _mode_state(grid, weights, cols, inter):
    a = np.stack(cols)
    return ModeState(Field(grid, np.zeros(grid.shape, dtype=complex)),
                     np.asarray(weights), a, np.zeros_like(a), inter)


def test_trace_distance_self_is_zero(standard_instance):
    inst = standard_instance
    m = thermal_to_mode_state(inst["pdm"], inst["phi0"], inst["inter"])
    assert trace_distance(m, m) < 1e-12
    d = thermal_to_dense_state(inst["pdm"], inst["phi0"], inst["inter"])
    assert trace_distance(d.pdm, d.pdm) < 1e-12


def test_trace_distance_orthogonal_projectors(grid32):
    inter = InteractionSpec(N_scale=1.0)
    npts = grid32.size
    e0 = np.zeros(grid32.shape, dtype=complex)
    e1 = np.zeros(grid32.shape, dtype=complex)
    e0[4] = 1.0 / np.sqrt(grid32.measure)
    e1[9] = 1.0 / np.sqrt(grid32.measure)
    ma = _mode_state(grid32, [1.0], [e0], inter)
    mb = _mode_state(grid32, [1.0], [e1], inter)
    assert trace_distance(ma, mb) == pytest.approx(2.0, abs=1e-12)
    ga = np.outer(e0.reshape(-1), e0.conj().reshape(-1))
    gb = np.outer(e1.reshape(-1), e1.conj().reshape(-1))
    da = DensePDM(grid32, ga, np.zeros((npts, npts)))
    db = DensePDM(grid32, gb, np.zeros((npts, npts)))
    assert trace_distance(da, db) == pytest.approx(2.0, abs=1e-10)


def test_trace_distance_lowrank_vs_dense_oracle(grid32):
    rng = np.random.default_rng(7)
    inter = InteractionSpec(N_scale=1.0)
    npts = grid32.size

    def random_pair(k):
        cols, weights = [], []
        for _ in range(k):
            v = rng.standard_normal(grid32.shape) + 1j * rng.standard_normal(grid32.shape)
            v /= np.sqrt(np.sum(np.abs(v) ** 2) * grid32.measure)
            cols.append(v)
            weights.append(rng.uniform(0.1, 2.0))
        return weights, cols

    wa, ca = random_pair(3)
    wb, cb = random_pair(4)
    ma = _mode_state(grid32, wa, ca, inter)
    mb = _mode_state(grid32, wb, cb, inter)
    fast = trace_distance(ma, mb)
    ga = sum(w * np.outer(c.reshape(-1), c.conj().reshape(-1)) for w, c in zip(wa, ca))
    gb = sum(w * np.outer(c.reshape(-1), c.conj().reshape(-1)) for w, c in zip(wb, cb))
    diff = (ga - gb) * grid32.measure
    slow = np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)))
    assert fast == pytest.approx(slow, abs=1e-10)


def test_trace_distance_metric_properties(grid32):
    rng = np.random.default_rng(8)
    inter = InteractionSpec(N_scale=1.0)

    def rand_state(k):
        cols = []
        for _ in range(k):
            v = rng.standard_normal(grid32.shape) + 1j * rng.standard_normal(grid32.shape)
            v /= np.sqrt(np.sum(np.abs(v) ** 2) * grid32.measure)
            cols.append(v)
        return _mode_state(grid32, rng.uniform(0.1, 1.0, size=k), cols, inter)

    for _ in range(4):
        x, y, z = rand_state(2), rand_state(3), rand_state(2)
        dxy, dyx = trace_distance(x, y), trace_distance(y, x)
        assert abs(dxy - dyx) < 1e-12
        assert trace_distance(x, z) <= dxy + trace_distance(y, z) + 1e-10


def test_alpha_bound_from_positivity(standard_instance):
    inst = standard_instance
    d0 = thermal_to_dense_state(inst["pdm"], inst["phi0"], inst["inter"])
    traj = run_hfb_dense(d0, 1e-3, 0.3, n_frames=4)
    for st in traj.states:
        tr = st.pdm.trace
        assert alpha_hs_norm(st) ** 2 <= (1 + tr) * tr + 1e-10


def test_alpha_hs_dense_vs_modes(standard_instance):
    from hfbgas.hfb import run_hfb_modes
    inst = standard_instance
    m0 = thermal_to_mode_state(inst["pdm"], inst["phi0"], inst["inter"])
    traj = run_hfb_modes(m0, 1e-3, 0.1, n_frames=2)
    st = traj.states[-1]
    assert alpha_hs_norm(st) == pytest.approx(alpha_hs_norm(st.to_dense()), rel=1e-10)


def test_positivity_margin_trivial_cases(grid32, standard_instance):
    npts = grid32.size
    zero = np.zeros((npts, npts))
    state = DenseState(Field(grid32, np.zeros(grid32.shape, dtype=complex)),
                       DensePDM(grid32, zero, zero), InteractionSpec(N_scale=1.0))
    assert positivity_margin(state) == pytest.approx(0.0, abs=1e-14)
    inst = standard_instance
    d0 = thermal_to_dense_state(inst["pdm"], inst["phi0"], inst["inter"])
    assert positivity_margin(d0) == pytest.approx(0.0, abs=1e-12)


def test_sup_kernel_bound_vs_dense(standard_instance):
    inst = standard_instance
    d0 = thermal_to_dense_state(inst["pdm"], inst["phi0"], inst["inter"])
    m0 = thermal_to_mode_state(inst["pdm"], inst["phi0"], inst["inter"])
    exact, flag_d = sup_kernel(d0)
    bound, flag_m = sup_kernel(m0)
    assert not flag_d and flag_m
    assert exact <= bound * (1 + 1e-12)


def test_diluteness_normalisation(standard_instance):
    inst = standard_instance
    d0 = thermal_to_dense_state(inst["pdm"], inst["phi0"], inst["inter"])
    vals = diluteness_trajectory([d0], t_c=2.0)
    assert vals[0] == pytest.approx(sup_kernel(d0)[0] / 2.0**1.5, rel=1e-12)


def _quick_report(inst, phase=1.0, v0=1.0, frames=3, t_end=0.2):
    grid = inst["grid"]
    inter = InteractionSpec(v0=v0, sigma=1.0, N_scale=100.0)
    phi0 = Field(grid, phase * inst["phi0"].values)
    d0 = thermal_to_dense_state(inst["pdm"], phi0, inter)
    traj = run_hfb_dense(d0, 1e-3, t_end, n_frames=frames)
    h_traj = propagate_hartree(phi0, inter, 1e-3, t_end, n_frames=frames)
    free0 = thermal_to_mode_state(inst["pdm"], phi0, inter,
                                  include_full_basis=False)
    return compare_to_references(traj, h_traj, free0,
                                 normalizers={"N": 100.0, "T_c": 5.0, "s": 2.0})


def test_comparison_free_case_zero(standard_instance):
    rep = _quick_report(standard_instance, v0=0.0)
    assert np.abs(rep.gamma_trace_dist).max() < 1e-9
    assert np.abs(rep.phi_l2_dist).max() < 1e-9
    assert rep.max_ratio_gamma(0.5) < 1e-10
    assert rep.max_ratio_phi(0.5) < 1e-10


def test_comparison_phase_invariance(standard_instance):
    rep1 = _quick_report(standard_instance, phase=1.0)
    rep2 = _quick_report(standard_instance, phase=np.exp(0.7j))
    assert np.allclose(rep1.gamma_trace_dist, rep2.gamma_trace_dist, atol=1e-9)
    assert np.allclose(rep1.phi_l2_dist, rep2.phi_l2_dist, atol=1e-9)
    assert np.allclose(rep1.alpha_hs, rep2.alpha_hs, atol=1e-9)


def test_comparison_report_csv_columns(standard_instance):
    rep = _quick_report(standard_instance)
    header, rows = rep.csv_rows()
    assert header == ["t", "gamma_trace_dist", "phi_l2_dist", "alpha_hs",
                      "sup_kernel_bound", "positivity_margin"]
    assert len(rows) == len(rep.times)


def test_sweep_requires_three_points(standard_instance):
    rep = _quick_report(standard_instance)
    with pytest.raises(ValueError):
        closeness_scaling_sweep([rep, rep])


def test_sweep_zero_interaction_slopes(standard_instance):
    reps = []
    for n in (100.0, 200.0, 400.0):
        rep = _quick_report(standard_instance, v0=0.0)
        rep.normalizers["N"] = n
        reps.append(rep)
    result = closeness_scaling_sweep(reps)
    assert result.slope_gamma == 0.0 and result.slope_phi == 0.0
    assert result.slope_flag
    assert all(r.ratio_gamma_max <= 1e-9 for r in result.rows)
