import math

import numpy as np
import pytest

from kerrsim.config import (
    ConfigError,
    RunConfig,
    SweepAxis,
    TimeGrid,
    as_complex,
    load_config,
    parse_config,
)
from kerrsim.presets import PRESET_NAMES, preset_command, preset_config


def sweep_doc(**extra):
    doc = {
        "schema_version": 1,
        "command": "effective-sweep",
        "base": {"g": 1e-4, "omega_m1": 1.0, "omega_m2": 1e-3,
                 "gamma1": 1e-6, "gamma2": 1e-9},
        "sweep": {"parameter": "V", "start": 0.0, "stop": 0.05, "count": 11},
    }
    doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# document plumbing

def test_minimal_document_parses():
    cfg = parse_config(sweep_doc())
    assert cfg.command == "effective-sweep"
    assert cfg.threads == 1
    assert cfg.kappa_convention == "geff"
    assert "base" in cfg.payload and "schema_version" not in cfg.payload


def test_schema_version_required_and_checked():
    doc = sweep_doc()
    del doc["schema_version"]
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(doc)
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(sweep_doc(schema_version=2))


def test_command_resolution():
    with pytest.raises(ConfigError, match="no command"):
        parse_config({"schema_version": 1})
    with pytest.raises(ConfigError, match="unknown command"):
        parse_config({"schema_version": 1, "command": "frobnicate"})
    with pytest.raises(ConfigError, match="command mismatch"):
        parse_config(sweep_doc(), command="convert")
    # invoking command wins when the document is silent
    doc = sweep_doc()
    del doc["command"]
    assert parse_config(doc, command="effective-sweep").command == "effective-sweep"


def test_plumbing_overrides_win_over_document():
    doc = sweep_doc(threads=4, kappa_convention="g", output="a.csv")
    cfg = parse_config(doc)
    assert (cfg.threads, cfg.kappa_convention, cfg.out_path) == (4, "g", "a.csv")
    cfg = parse_config(doc, threads=2, kappa_convention="geff", out_path="b.csv")
    assert (cfg.threads, cfg.kappa_convention, cfg.out_path) == (2, "geff", "b.csv")


def test_plumbing_validation():
    with pytest.raises(ConfigError, match="kappa_convention"):
        parse_config(sweep_doc(kappa_convention="gee"))
    with pytest.raises(ConfigError, match="threads"):
        parse_config(sweep_doc(threads=0))
    with pytest.raises(ConfigError, match="threads"):
        parse_config(sweep_doc(threads=1000))


def test_digest_tracks_payload_not_plumbing():
    a = parse_config(sweep_doc())
    b = parse_config(sweep_doc(threads=8, output="x.csv"))
    assert a.digest() == b.digest()
    changed = sweep_doc()
    changed["sweep"]["count"] = 12
    assert parse_config(changed).digest() != a.digest()
    # the kappa convention changes what runs, so it is part of the digest
    assert parse_config(sweep_doc(kappa_convention="g")).digest() != a.digest()


def test_unknown_payload_keys_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config(sweep_doc(extra_section={}))


# ---------------------------------------------------------------------------
# presets

def test_presets_all_parse():
    for name in PRESET_NAMES:
        cfg = parse_config({"preset": name})
        assert cfg.preset == name
        assert cfg.command == preset_command(name)


def test_preset_merge_overrides_keys():
    cfg = parse_config({"preset": "fig3b", "t_grid": {"periods": 2, "count": 51}})
    assert cfg.payload["t_grid"] == {"periods": 2, "count": 51}
    # untouched sections come from the preset
    assert cfg.payload["physical"]["V"] == pytest.approx(3.131e-2)


def test_preset_merge_is_per_key_inside_sections():
    cfg = parse_config({"preset": "fig3b", "dissipation": {"n_th": 0.0}})
    assert cfg.payload["dissipation"]["n_th"] == 0.0
    assert cfg.payload["dissipation"]["kappa_ratio"] == pytest.approx(0.2)


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        parse_config({"preset": "fig9"})


def test_preset_configs_are_copies():
    a = preset_config("fig2")
    a["sweep"]["count"] = 1
    assert preset_config("fig2")["sweep"]["count"] == 501


# ---------------------------------------------------------------------------
# axis and grid specs

def test_sweep_axis_linspace_form():
    axis = SweepAxis.from_mapping(
        {"parameter": "V", "start": 0.0, "stop": 1.0, "count": 5})
    assert axis.values == (0.0, 0.25, 0.5, 0.75, 1.0)


def test_sweep_axis_values_form():
    axis = SweepAxis.from_mapping({"parameter": "V", "values": [0.3]})
    assert axis.values == (0.3,)


def test_sweep_axis_validation():
    with pytest.raises(ConfigError, match="count"):
        SweepAxis.from_mapping(
            {"parameter": "V", "start": 0.0, "stop": 1.0, "count": 0})
    with pytest.raises(ConfigError, match="finite"):
        SweepAxis.from_mapping({"parameter": "V", "values": [math.inf]})
    with pytest.raises(ConfigError, match="parameter"):
        SweepAxis.from_mapping({"values": [1.0]})
    with pytest.raises(ConfigError, match="unknown keys"):
        SweepAxis.from_mapping({"parameter": "V", "values": [1.0], "stp": 2})


def test_time_grid_stop_form():
    g = TimeGrid.from_mapping({"stop": 2.0, "count": 5})
    assert np.allclose(g.resolve(), [0.0, 0.5, 1.0, 1.5, 2.0])


def test_time_grid_periods_form():
    g = TimeGrid.from_mapping({"periods": 2, "count": 3})
    grid = g.resolve(omega_eff=2.0 * math.pi)
    assert np.allclose(grid, [0.0, 1.0, 2.0])
    with pytest.raises(ConfigError, match="omega_eff"):
        g.resolve(omega_eff=-1.0)


def test_time_grid_validation():
    with pytest.raises(ConfigError, match="not both"):
        TimeGrid.from_mapping({"stop": 1.0, "periods": 1, "count": 3})
    with pytest.raises(ConfigError, match="stop or periods"):
        TimeGrid.from_mapping({"count": 3})
    with pytest.raises(ConfigError, match="count"):
        TimeGrid.from_mapping({"stop": 1.0, "count": 1})
    # span-free form is allowed where the command fixes the span itself
    assert TimeGrid.from_mapping({"count": 7}, need_span=False).count == 7


def test_as_complex_forms():
    assert as_complex(0.5, "x") == 0.5 + 0j
    assert as_complex([0.0, 1.0], "x") == 1j
    with pytest.raises(ConfigError, match="re, im"):
        as_complex("0.5", "x")


# ---------------------------------------------------------------------------
# per-command payload checks

def test_cpf_dynamics_needs_exactly_one_parameter_source():
    base = {
        "schema_version": 1,
        "command": "cpf-dynamics",
        "amplitudes": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0, "delta": 0.0},
        "t_grid": {"periods": 1, "count": 3},
    }
    with pytest.raises(ConfigError, match="physical/effective"):
        parse_config(base)
    both = dict(base, physical={"g": 0, "omega_m1": 1, "omega_m2": 1, "V": 0},
                effective={"omega_eff": 1, "g_eff": 0})
    with pytest.raises(ConfigError, match="physical/effective"):
        parse_config(both)
    ok = dict(base, effective={"omega_eff": 1.0, "g_eff": 0.5})
    assert parse_config(ok).command == "cpf-dynamics"


def test_cpf_dynamics_kappa_convention_g_needs_physical():
    doc = {
        "schema_version": 1,
        "command": "cpf-dynamics",
        "effective": {"omega_eff": 1.0, "g_eff": 0.5},
        "amplitudes": {"alpha": 1.0, "beta": 0.0, "gamma": 0.0, "delta": 0.0},
        "dissipation": {"kappa_ratio": 0.2},
        "t_grid": {"periods": 1, "count": 3},
    }
    with pytest.raises(ConfigError, match="physical"):
        parse_config(doc, kappa_convention="g")
    assert parse_config(doc).kappa_convention == "geff"


def test_convert_gate_modes():
    doc = {
        "schema_version": 1, "command": "convert",
        "input": {"alpha": 0.6, "beta": 0.8},
        "gate": {"mode": "instant"},
    }
    with pytest.raises(ConfigError, match="gate.mode"):
        parse_config(doc)
    doc["gate"] = {"mode": "simulated", "omega_eff": 1.0,
                   "conditions": {"n1": 1}}
    assert parse_config(doc).command == "convert"
    with pytest.raises(ConfigError, match="not applicable"):
        parse_config(doc, kappa_convention="g")


def test_multipath_hops_must_match_ports():
    doc = {
        "schema_version": 1, "command": "multipath",
        "ports": [
            {"omega_eff": 1.0, "g_eff": 1.0},
            {"omega_eff": 1.0, "g_eff": 1.0},
        ],
        "hops": [0.1, 0.2],
        "input": {"alpha": 0.0, "beta": 1.0},
        "t_grid": {"stop": 1.0, "count": 3},
    }
    with pytest.raises(ConfigError, match="hops"):
        parse_config(doc)
    doc["hops"] = [0.1]
    assert parse_config(doc).command == "multipath"


def test_multipath_variant_validation():
    doc = {
        "schema_version": 1, "command": "multipath",
        "ports": [{"omega_eff": 1.0, "g_eff": 1.0},
                  {"omega_eff": 1.0, "g_eff": 1.0}],
        "hops": [0.1],
        "input": {"alpha": 0.0, "beta": 1.0},
        "variants": {"port": 3, "field": "g_eff", "values": [1.0]},
        "t_grid": {"stop": 1.0, "count": 3},
    }
    with pytest.raises(ConfigError, match="variants.port"):
        parse_config(doc)
    doc["variants"] = {"port": 2, "field": "kappa", "values": [1.0]}
    with pytest.raises(ConfigError, match="variants.field"):
        parse_config(doc)


def test_validate_effective_payload():
    doc = {
        "schema_version": 1, "command": "validate-effective",
        "separations": [20, 50], "g": 0.05, "omega_m2": 1.0,
    }
    assert parse_config(doc).command == "validate-effective"
    bad = dict(doc, separations=[2])
    with pytest.raises(ConfigError, match="separation"):
        parse_config(bad)
    fixed_span = dict(doc, t_grid={"stop": 5.0, "count": 11})
    with pytest.raises(ConfigError, match="effective period"):
        parse_config(fixed_span)


# ---------------------------------------------------------------------------
# file loading

def test_load_config_yaml(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "schema_version: 1\n"
        "command: effective-sweep\n"
        "base: {g: 1.0e-4, omega_m1: 1.0, omega_m2: 1.0e-3}\n"
        "sweep: {parameter: V, values: [0.0, 0.01]}\n"
    )
    cfg = load_config(path)
    assert cfg.payload["sweep"]["values"] == [0.0, 0.01]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [unclosed\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_config(bad)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        load_config(empty)


def test_run_config_is_frozen():
    cfg = parse_config(sweep_doc())
    with pytest.raises(AttributeError):
        cfg.threads = 5
    assert isinstance(cfg, RunConfig)
