"""Command layer: each sweep command end to end on small configs."""

import math

import numpy as np
import pytest

from kerrsim.commands import (
    CONVERGENCE_TOL,
    cmd_convergence_recheck,
    cmd_convert,
    cmd_cpf_dynamics,
    cmd_effective_sweep,
    cmd_multipath,
    cmd_validate_effective,
    local_peaks,
    run_command,
)
from kerrsim.config import ConfigError, parse_config


def make_cfg(command, payload, **plumbing):
    doc = {"schema_version": 1, "command": command, **payload}
    return parse_config(doc, **plumbing)


SWEEP_BASE = {
    "base": {"g": 1e-4, "omega_m1": 1.0, "omega_m2": 1e-3,
             "gamma1": 1e-6, "gamma2": 1e-9},
}


# ---------------------------------------------------------------------------
# effective-sweep

def test_sweep_zero_coupling_row():
    cfg = make_cfg("effective-sweep",
                   {**SWEEP_BASE, "sweep": {"parameter": "V", "values": [0.0]}})
    table = cmd_effective_sweep(cfg)
    row = dict(zip(table.columns, table.rows[0]))
    assert row["V"] == 0.0
    assert row["omega_eff"] == 1e-3
    assert row["g_eff"] == 0.0
    assert row["kerr_ratio"] == 0.0
    assert row["gamma_eff"] == 1e-9
    assert row["singular"] == 0.0
    assert row["adiabatic_warning"] == 0.0


def test_sweep_singular_point_gets_inf_sentinel():
    # omega_m2 - V^2/omega_m1 vanishes exactly at V = sqrt(1e-3)
    v_star = math.sqrt(1e-3)
    cfg = make_cfg("effective-sweep",
                   {**SWEEP_BASE,
                    "sweep": {"parameter": "V", "values": [v_star]}})
    table = cmd_effective_sweep(cfg)
    row = dict(zip(table.columns, table.rows[0]))
    assert row["singular"] == 1.0
    assert row["kerr_ratio"] == math.inf
    assert table.metadata["n_singular"] == 1
    assert ",inf," in table.to_csv()


def test_sweep_rows_match_closed_formulas():
    values = [0.0, 0.01, 0.02, 0.03]
    cfg = make_cfg("effective-sweep",
                   {**SWEEP_BASE,
                    "sweep": {"parameter": "V", "values": values}})
    table = cmd_effective_sweep(cfg)
    for V, row in zip(values, table.rows):
        got = dict(zip(table.columns, row))
        assert got["omega_eff"] == pytest.approx(1e-3 - V**2, abs=1e-18)
        assert got["g_eff"] == pytest.approx(2 * 1e-4 * V**2, abs=1e-18)
        assert got["gamma_eff"] == pytest.approx(1e-9 + V**2 * 1e-6)


def test_sweep_flags_weak_scale_separation():
    cfg = make_cfg("effective-sweep",
                   {**SWEEP_BASE,
                    "sweep": {"parameter": "V", "values": [0.05, 0.5]}})
    table = cmd_effective_sweep(cfg)
    warn = table.column("adiabatic_warning")
    assert warn[0] == 0.0
    assert warn[1] == 1.0


def test_sweep_csv_is_deterministic():
    payload = {**SWEEP_BASE,
               "sweep": {"parameter": "V", "start": 0.0, "stop": 0.04,
                         "count": 17}}
    first = cmd_effective_sweep(make_cfg("effective-sweep", payload))
    second = cmd_effective_sweep(make_cfg("effective-sweep", payload))
    assert first.to_csv() == second.to_csv()
    # wall time differs run to run but stays out of the emitted rows
    assert first.metadata["wall_time_s"] != second.metadata["wall_time_s"] \
        or first.metadata["wall_time_s"] >= 0.0


def test_sweep_threads_do_not_reorder_rows():
    payload = {**SWEEP_BASE,
               "sweep": {"parameter": "V", "start": 0.0, "stop": 0.04,
                         "count": 33}}
    serial = cmd_effective_sweep(make_cfg("effective-sweep", payload))
    pooled = cmd_effective_sweep(make_cfg("effective-sweep", payload,
                                          threads=4))
    assert serial.rows == pooled.rows


def test_run_command_dispatch():
    cfg = make_cfg("effective-sweep",
                   {**SWEEP_BASE, "sweep": {"parameter": "V", "values": [0.0]}})
    assert run_command(cfg).rows == cmd_effective_sweep(cfg).rows


# ---------------------------------------------------------------------------
# cpf-dynamics

EQUAL_AMPS = {"alpha": 0.5, "beta": 0.5, "gamma": 0.5, "delta": 0.5}


def test_cpf_closed_fast_path():
    cfg = make_cfg("cpf-dynamics", {
        "effective": {"omega_eff": 1.0, "g_eff": 0.4, "detuning": 0.25},
        "amplitudes": EQUAL_AMPS,
        "t_grid": {"periods": 1, "count": 41},
    })
    table = cmd_cpf_dynamics(cfg)
    assert table.columns == ("t", "F_analytic", "F_numeric", "trace", "purity")
    assert not table.metadata["used_integrator"]
    # at t = 0 every phase is closed except the sign on |11>
    first = dict(zip(table.columns, table.rows[0]))
    assert first["t"] == 0.0
    assert first["F_analytic"] == pytest.approx(0.5, abs=1e-14)
    assert first["F_numeric"] == pytest.approx(0.5, abs=1e-12)
    assert table.metadata["max_analytic_numeric_diff"] < 1e-10
    assert np.all(np.asarray(table.column("purity")) == 1.0)
    assert np.max(np.abs(np.asarray(table.column("trace")) - 1.0)) < 1e-12


def test_cpf_integrator_matches_analytic_on_physical_scale():
    cfg = make_cfg("cpf-dynamics", {
        "physical": {"g": 1e-4, "omega_m1": 1.0, "omega_m2": 1e-3,
                     "V": 3.131e-2},
        "amplitudes": EQUAL_AMPS,
        "dims": {"photon": 2, "oscillator": 2},
        "t_grid": {"periods": 1, "count": 101},
        "force_integrator": True,
    })
    table = cmd_cpf_dynamics(cfg)
    assert table.metadata["used_integrator"]
    assert table.metadata["max_analytic_numeric_diff"] <= 1e-6


def test_cpf_dissipation_degrades_fidelity():
    cfg = make_cfg("cpf-dynamics", {
        "effective": {"omega_eff": 1.0, "g_eff": 0.5},
        "amplitudes": EQUAL_AMPS,
        "dims": {"photon": 2, "oscillator": 2},
        "dissipation": {"kappa_ratio": 0.2, "n_th": 0.0},
        "t_grid": {"periods": 1, "count": 41},
    })
    table = cmd_cpf_dynamics(cfg)
    assert table.metadata["used_integrator"]
    assert table.metadata["n_th"] == 0.0
    # photon decay pulls the numeric curve below the closed-system one
    analytic = np.asarray(table.column("F_analytic"))
    numeric = np.asarray(table.column("F_numeric"))
    assert numeric[-1] < analytic[-1]
    assert np.asarray(table.column("purity"))[-1] < 1.0
    assert np.max(np.abs(np.asarray(table.column("trace")) - 1.0)) < 1e-7


def test_cpf_rejects_unnormalized_amplitudes():
    with pytest.raises(ConfigError, match="not normalized"):
        cmd_cpf_dynamics(make_cfg("cpf-dynamics", {
            "effective": {"omega_eff": 1.0, "g_eff": 0.5},
            "amplitudes": {"alpha": 1.0, "beta": 1.0, "gamma": 0.0,
                           "delta": 0.0},
            "t_grid": {"periods": 1, "count": 11},
        }))


# ---------------------------------------------------------------------------
# convert

def test_convert_ideal_rows():
    cfg = make_cfg("convert", {
        "input": {"alpha": [0.6, 0.0], "beta": [0.0, 0.8]},
        "gate": {"mode": "ideal"},
    })
    table = cmd_convert(cfg)
    assert table.columns == ("outcome", "probability", "fidelity")
    for outcome, prob, fid in table.rows:
        assert prob == pytest.approx(0.5, abs=1e-12)
        assert fid == pytest.approx(1.0, abs=1e-12)
    assert table.metadata["probability_sum"] == pytest.approx(1.0, abs=1e-12)
    assert table.metadata["gate_mode"] == "ideal"


def test_convert_trivial_input_still_splits_evenly():
    # beta = 0 leaves the phonon in |0> on both branches; the measurement
    # statistics stay half/half regardless of the input
    cfg = make_cfg("convert", {
        "input": {"alpha": 1.0, "beta": 0.0},
        "gate": {"mode": "ideal"},
    })
    rows = {int(r[0]): r for r in cmd_convert(cfg).rows}
    for outcome in (0, 1):
        assert rows[outcome][1] == pytest.approx(0.5, abs=1e-12)
        assert rows[outcome][2] == pytest.approx(1.0, abs=1e-12)


def test_convert_simulated_closed_gate_is_near_ideal():
    cfg = make_cfg("convert", {
        "input": {"alpha": [0.6, 0.0], "beta": [0.0, 0.8]},
        "gate": {"mode": "simulated", "omega_eff": 1.0,
                 "conditions": {"n1": 1}},
    })
    table = cmd_convert(cfg)
    assert table.metadata["t_gate"] == pytest.approx(2 * math.pi)
    assert table.metadata["g_eff"] == pytest.approx(0.5)
    for outcome, prob, fid in table.rows:
        assert prob == pytest.approx(0.5, abs=1e-8)
        assert fid >= 1.0 - 1e-6


def test_convert_simulated_dissipative_gate_loses_fidelity():
    cfg = make_cfg("convert", {
        "input": {"alpha": [math.sqrt(0.5), 0.0], "beta": [math.sqrt(0.5), 0.0]},
        "gate": {"mode": "simulated", "omega_eff": 1.0,
                 "conditions": {"n1": 1},
                 "dissipation": {"kappa_ratio": 0.2, "n_th": 1.0}},
    })
    table = cmd_convert(cfg)
    for outcome, prob, fid in table.rows:
        assert prob == pytest.approx(0.5, abs=1e-6)
        assert 0.5 < fid < 1.0
    assert table.metadata["purity_final"] < 1.0
    assert table.metadata["trace_drift"] < 1e-6


def test_convert_rejects_unreachable_phase_conditions():
    with pytest.raises(ConfigError, match="gate.conditions"):
        cmd_convert(make_cfg("convert", {
            "input": {"alpha": 1.0, "beta": 0.0},
            "gate": {"mode": "simulated", "omega_eff": 1.0,
                     "conditions": {"n1": 1, "n2": -2, "n3": 2}},
        }))


# ---------------------------------------------------------------------------
# multipath

def closed_port(g_eff=1.0):
    return {"omega_eff": 1.0, "g_eff": g_eff,
            "dims": {"photon": 2, "oscillator": 2}}


def test_multipath_zero_hop_keeps_second_port_dark():
    cfg = make_cfg("multipath", {
        "ports": [closed_port(), closed_port()],
        "hops": [0.0],
        "input": {"alpha": 0.0, "beta": 1.0},
        "t_grid": {"stop": 6.0, "count": 61},
    })
    table = cmd_multipath(cfg)
    assert table.columns == ("t", "F_C1", "F_C2", "F_S2", "trace", "purity")
    f_c2 = np.asarray(table.column("F_C2"))
    assert np.ptp(f_c2) < 1e-9
    f_c1 = np.asarray(table.column("F_C1"))
    assert np.ptp(f_c1) > 0.1


def test_multipath_per_port_routing_converts_first_port():
    cfg = make_cfg("multipath", {
        "ports": [closed_port(), closed_port()],
        "hops": [0.1],
        "input": {"alpha": 0.0, "beta": 1.0},
        "routing": "per-port",
        "t_grid": {"stop": math.pi, "count": 81},
    })
    table = cmd_multipath(cfg)
    # port 1 is scored with its feed hop removed, so its own gate closes
    # a full conversion at t = pi
    f_c1 = np.asarray(table.column("F_C1"))
    assert f_c1[-1] >= 0.999
    assert table.metadata["f_c_max"]["F_C1"]["value"] >= 0.999
    assert table.metadata["routing"] == "per-port"


def test_multipath_variants_prepend_column_and_split_peaks():
    cfg = make_cfg("multipath", {
        "ports": [closed_port(), closed_port()],
        "hops": [0.1],
        "input": {"alpha": 0.0, "beta": 1.0},
        "variants": {"port": 2, "field": "g_eff", "values": [0.5, 1.0]},
        "t_grid": {"stop": 5.0, "count": 51},
    })
    table = cmd_multipath(cfg)
    assert table.columns[0] == "g_eff2"
    assert len(table.rows) == 2 * 51
    lead = np.asarray(table.column("g_eff2"))
    assert np.all(lead[:51] == 0.5)
    assert np.all(lead[51:] == 1.0)
    assert set(table.metadata["peaks"]) == {"g_eff2=0.5", "g_eff2=1.0"}
    assert set(table.metadata["f_c_max"]) == {"g_eff2=0.5", "g_eff2=1.0"}


def test_local_peaks_respects_floor_and_interior_rule():
    t = np.linspace(0.0, 6.0, 7)
    f = np.array([0.9, 0.3, 0.5, 0.2, 0.05, 0.08, 0.01])
    # the t=0 edge and the sub-floor bump at t=5 are both excluded
    assert local_peaks(t, f, floor=0.1) == [(2.0, 0.5)]
    assert local_peaks(t, f, floor=0.01) == [(2.0, 0.5), (5.0, 0.08)]


# ---------------------------------------------------------------------------
# validate-effective

def test_validate_effective_zero_coupling_is_exact():
    cfg = make_cfg("validate-effective", {
        "separations": [20.0],
        "g": 0.05,
        "omega_m2": 1.0,
        "v_ratio": 0.0,
        "t_grid": {"count": 51},
    })
    table = cmd_validate_effective(cfg)
    row = dict(zip(table.columns, table.rows[0]))
    # V = 0 decouples the chain: both populations sit still in both models
    assert row["omega_eff"] == pytest.approx(1.0, rel=1e-12)
    assert row["dev_cavity"] <= 1e-10
    assert row["dev_oscillator"] <= 1e-8
    assert table.metadata["deviations_decreasing"]


def test_validate_effective_row_shape_and_frequency():
    cfg = make_cfg("validate-effective", {
        "separations": [25.0],
        "g": 0.05,
        "omega_m2": 1.0,
        "v_ratio": 0.1,
        "t_grid": {"count": 41},
    })
    table = cmd_validate_effective(cfg)
    assert table.columns == ("separation", "omega_eff", "dev_cavity",
                             "dev_oscillator", "dev_max")
    row = dict(zip(table.columns, table.rows[0]))
    # omega_eff = omega_m2 (1 - v_ratio^2) independent of the separation
    assert row["omega_eff"] == pytest.approx(1.0 - 0.01, rel=1e-12)
    # photon number commutes with both Hamiltonians
    assert row["dev_cavity"] <= 1e-10
    assert row["dev_max"] == max(row["dev_cavity"], row["dev_oscillator"])


# ---------------------------------------------------------------------------
# convergence recheck

def test_recheck_passes_when_truncation_is_irrelevant():
    # closed diagonal gate: the fidelity lives in the 2x2 qubit block, so
    # raising the truncation reproduces the rows bit for bit
    cfg = make_cfg("cpf-dynamics", {
        "effective": {"omega_eff": 1.0, "g_eff": 0.4},
        "amplitudes": EQUAL_AMPS,
        "t_grid": {"periods": 1, "count": 21},
    }, check_convergence=True)
    base, recheck = cmd_convergence_recheck(cfg)
    assert recheck.metadata["pass"]
    assert recheck.metadata["max_difference"] <= 1e-12
    assert recheck.columns == base.columns
    assert recheck.metadata["base_config_sha256"] != \
        recheck.metadata["recheck_config_sha256"]


def test_recheck_flags_starved_thermal_truncation():
    # n_th = 5 crammed into a 3-level oscillator: the raised run disagrees
    cfg = make_cfg("cpf-dynamics", {
        "effective": {"omega_eff": 1.0, "g_eff": 0.5, "gamma_eff": 0.5},
        "amplitudes": EQUAL_AMPS,
        "dims": {"photon": 2, "oscillator": 3},
        "dissipation": {"kappa_ratio": 2.0, "n_th": 5.0},
        "t_grid": {"stop": 3.0, "count": 31},
    }, check_convergence=True)
    _, recheck = cmd_convergence_recheck(cfg)
    assert not recheck.metadata["pass"]
    assert recheck.metadata["max_difference"] > CONVERGENCE_TOL


def test_recheck_single_excitation_network_is_converged():
    cfg = make_cfg("multipath", {
        "ports": [closed_port(), closed_port()],
        "hops": [0.1],
        "input": {"alpha": 0.0, "beta": 1.0},
        "routing": "per-port",
        "t_grid": {"stop": math.pi, "count": 41},
    }, check_convergence=True)
    _, recheck = cmd_convergence_recheck(cfg)
    assert recheck.metadata["pass"]
    assert recheck.metadata["max_difference"] <= 1e-6


def test_recheck_sweep_has_no_truncation_to_bump():
    cfg = make_cfg("effective-sweep", {
        **SWEEP_BASE,
        "sweep": {"parameter": "V", "values": [0.0, math.sqrt(1e-3), 0.04]},
    }, check_convergence=True)
    base, recheck = cmd_convergence_recheck(cfg)
    assert recheck.metadata["pass"]
    assert recheck.metadata["max_difference"] == 0.0
    # identical inf sentinels difference to zero, not NaN
    assert all(v == 0.0 for v in recheck.rows[0])
