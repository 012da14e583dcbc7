"""Run configuration: YAML documents, preset merge, validation.

A run is described by one declarative document. Reserved top-level keys
(``schema_version``, ``command``, ``preset``, ``output``,
``check_convergence``, ``kappa_convention``, ``threads``) control
plumbing; everything else is the command payload and is validated against
the executing command's expectations. Naming a preset pulls in the shipped
document for that figure, with the user's keys merged over it.

All validation failures raise :class:`ConfigError`, which maps to exit
code 2 on the command line and HTTP 422 in the service.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np
import yaml

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """The configuration document cannot be run as given."""


SCHEMA_VERSION = 1

COMMANDS = (
    "effective-sweep",
    "cpf-dynamics",
    "convert",
    "multipath",
    "validate-effective",
)

KAPPA_CONVENTIONS = ("geff", "g")

_RESERVED = (
    "schema_version",
    "command",
    "preset",
    "output",
    "check_convergence",
    "kappa_convention",
    "threads",
)

_MAX_THREADS = 32


def _require(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _as_mapping(value, where: str) -> dict:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
    return dict(value)


def _finite(value, where: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{where}: must be finite, got {x}")
    return x


def _nonneg(value, where: str) -> float:
    x = _finite(value, where)
    if x < 0:
        raise ConfigError(f"{where}: must be >= 0, got {x}")
    return x


def _positive(value, where: str) -> float:
    x = _finite(value, where)
    if x <= 0:
        raise ConfigError(f"{where}: must be > 0, got {x}")
    return x


def _int_at_least(value, minimum: int, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def as_complex(value, where: str) -> complex:
    """Amplitudes are a plain number or a [re, im] pair."""
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_finite(value[0], where), _finite(value[1], where))
    raise ConfigError(f"{where}: expected a number or [re, im], got {value!r}")


# ---------------------------------------------------------------------------
# axis / grid specs

@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    values: tuple[float, ...]

    @classmethod
    def from_mapping(cls, m: Mapping, where: str = "sweep") -> "SweepAxis":
        m = _as_mapping(m, where)
        parameter = str(_require(m, "parameter", where))
        if "values" in m:
            raw = m["values"]
            if not isinstance(raw, (list, tuple)) or not raw:
                raise ConfigError(f"{where}.values: expected a non-empty list")
            values = tuple(_finite(v, f"{where}.values") for v in raw)
        else:
            start = _finite(_require(m, "start", where), f"{where}.start")
            stop = _finite(_require(m, "stop", where), f"{where}.stop")
            count = _int_at_least(_require(m, "count", where), 1, f"{where}.count")
            values = tuple(np.linspace(start, stop, count).tolist())
        extra = set(m) - {"parameter", "values", "start", "stop", "count"}
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
        return cls(parameter=parameter, values=values)


@dataclass(frozen=True)
class TimeGrid:
    """Sample times: explicit stop, or a count of 2*pi/omega periods."""

    count: int
    stop: Optional[float] = None
    periods: Optional[float] = None

    @classmethod
    def from_mapping(cls, m: Mapping, where: str = "t_grid",
                     need_span: bool = True) -> "TimeGrid":
        m = _as_mapping(m, where)
        count = _int_at_least(_require(m, "count", where), 2, f"{where}.count")
        stop = periods = None
        if "stop" in m and "periods" in m:
            raise ConfigError(f"{where}: give stop or periods, not both")
        if "stop" in m:
            stop = _positive(m["stop"], f"{where}.stop")
        elif "periods" in m:
            periods = _positive(m["periods"], f"{where}.periods")
        elif need_span:
            raise ConfigError(f"{where}: needs stop or periods")
        extra = set(m) - {"count", "stop", "periods"}
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
        return cls(count=count, stop=stop, periods=periods)

    def resolve(self, omega_eff: Optional[float] = None) -> np.ndarray:
        if self.stop is not None:
            stop = self.stop
        else:
            if omega_eff is None or omega_eff <= 0:
                raise ConfigError(
                    "t_grid.periods needs a positive omega_eff to resolve"
                )
            stop = self.periods * 2.0 * math.pi / omega_eff
        return np.linspace(0.0, stop, self.count)


# ---------------------------------------------------------------------------
# the run description

@dataclass(frozen=True)
class RunConfig:
    command: str
    payload: dict
    preset: Optional[str] = None
    out_path: Optional[str] = None
    check_convergence: bool = False
    kappa_convention: str = "geff"
    threads: int = 1
    check_positivity: bool = False

    def digest(self) -> str:
        """Stable hash of what determines the rows (plumbing excluded)."""
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "kappa_convention": self.kappa_convention,
            "payload": self.payload,
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_payload(self, payload: dict) -> "RunConfig":
        return replace(self, payload=payload)


def _merge(base, override):
    # nested mappings merge key-by-key; everything else (lists included)
    # is replaced wholesale
    if isinstance(base, Mapping) and isinstance(override, Mapping):
        out = dict(base)
        for k, v in override.items():
            out[k] = _merge(base[k], v) if k in base else v
        return out
    return override


def parse_config(document: Mapping,
                 command: Optional[str] = None,
                 check_convergence: Optional[bool] = None,
                 kappa_convention: Optional[str] = None,
                 threads: Optional[int] = None,
                 out_path: Optional[str] = None,
                 check_positivity: bool = False) -> RunConfig:
    """Validate a document (CLI flags override its plumbing keys)."""
    document = _as_mapping(document, "config")

    preset = document.get("preset")
    if preset is not None:
        from kerrsim import presets  # local import, presets build documents

        document = _merge(presets.preset_config(str(preset)), document)

    version = _require(document, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )

    doc_command = document.get("command")
    if command is None:
        command = doc_command
    elif doc_command is not None and doc_command != command:
        raise ConfigError(
            f"command mismatch: document says {doc_command!r}, "
            f"invoked as {command!r}"
        )
    if command is None:
        raise ConfigError("config: no command given")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; one of {COMMANDS}")

    if check_convergence is None:
        check_convergence = bool(document.get("check_convergence", False))
    if kappa_convention is None:
        kappa_convention = str(document.get("kappa_convention", "geff"))
    if kappa_convention not in KAPPA_CONVENTIONS:
        raise ConfigError(
            f"kappa_convention: one of {KAPPA_CONVENTIONS}, got {kappa_convention!r}"
        )
    if threads is None:
        threads = document.get("threads", 1)
    threads = _int_at_least(threads, 1, "threads")
    if threads > _MAX_THREADS:
        raise ConfigError(f"threads: must be <= {_MAX_THREADS}, got {threads}")
    if out_path is None:
        out_path = document.get("output")

    payload = {k: v for k, v in document.items() if k not in _RESERVED}
    _PAYLOAD_VALIDATORS[command](payload, kappa_convention)

    return RunConfig(
        command=command,
        payload=payload,
        preset=str(preset) if preset is not None else None,
        out_path=str(out_path) if out_path is not None else None,
        check_convergence=check_convergence,
        kappa_convention=kappa_convention,
        threads=threads,
        check_positivity=check_positivity,
    )


def load_config(path, command: Optional[str] = None, **overrides) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if document is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(document, command=command, **overrides)


# ---------------------------------------------------------------------------
# per-command payload validation

def _check_extra(payload: Mapping, allowed: set, command: str):
    extra = set(payload) - allowed
    if extra:
        raise ConfigError(f"{command}: unknown keys {sorted(extra)}")


def _check_dims(m, where: str, keys=("photon", "oscillator")):
    m = _as_mapping(m, where)
    extra = set(m) - set(keys)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    for k in keys:
        _int_at_least(_require(m, k, where), 2, f"{where}.{k}")


def _check_physical(m, where: str):
    m = _as_mapping(m, where)
    _positive(_require(m, "omega_m1", where), f"{where}.omega_m1")
    _finite(_require(m, "omega_m2", where), f"{where}.omega_m2")
    _nonneg(_require(m, "g", where), f"{where}.g")
    _nonneg(_require(m, "V", where), f"{where}.V")
    _nonneg(m.get("gamma1", 0.0), f"{where}.gamma1")
    _nonneg(m.get("gamma2", 0.0), f"{where}.gamma2")
    _finite(m.get("detuning", 0.0), f"{where}.detuning")
    extra = set(m) - {"omega_m1", "omega_m2", "g", "V", "gamma1", "gamma2",
                      "detuning"}
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _check_effective(m, where: str):
    m = _as_mapping(m, where)
    _finite(_require(m, "omega_eff", where), f"{where}.omega_eff")
    _finite(_require(m, "g_eff", where), f"{where}.g_eff")
    _nonneg(m.get("gamma_eff", 0.0), f"{where}.gamma_eff")
    _finite(m.get("detuning", 0.0), f"{where}.detuning")
    extra = set(m) - {"omega_eff", "g_eff", "gamma_eff", "detuning"}
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _check_dissipation(m, where: str):
    m = _as_mapping(m, where)
    _nonneg(_require(m, "kappa_ratio", where), f"{where}.kappa_ratio")
    _nonneg(m.get("n_th", 0.0), f"{where}.n_th")
    extra = set(m) - {"kappa_ratio", "n_th"}
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _check_amplitudes(m, where: str, keys):
    m = _as_mapping(m, where)
    extra = set(m) - set(keys)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    for k in keys:
        as_complex(_require(m, k, where), f"{where}.{k}")


def _validate_effective_sweep(payload: Mapping, convention: str):
    _check_extra(payload, {"base", "sweep"}, "effective-sweep")
    base = _as_mapping(_require(payload, "base", "effective-sweep"), "base")
    _positive(_require(base, "omega_m1", "base"), "base.omega_m1")
    _finite(_require(base, "omega_m2", "base"), "base.omega_m2")
    _nonneg(_require(base, "g", "base"), "base.g")
    _nonneg(base.get("gamma1", 0.0), "base.gamma1")
    _nonneg(base.get("gamma2", 0.0), "base.gamma2")
    _finite(base.get("detuning", 0.0), "base.detuning")
    extra = set(base) - {"omega_m1", "omega_m2", "g", "gamma1", "gamma2",
                         "detuning"}
    if extra:
        raise ConfigError(f"base: unknown keys {sorted(extra)}")
    axis = SweepAxis.from_mapping(_require(payload, "sweep", "effective-sweep"))
    if axis.parameter != "V":
        raise ConfigError(
            f"effective-sweep sweeps V only, got {axis.parameter!r}"
        )
    if any(v < 0 for v in axis.values):
        raise ConfigError("sweep.values: V must be >= 0")


def _validate_cpf_dynamics(payload: Mapping, convention: str):
    _check_extra(
        payload,
        {"physical", "effective", "amplitudes", "dims", "dissipation",
         "t_grid", "force_integrator"},
        "cpf-dynamics",
    )
    has_phys = "physical" in payload
    has_eff = "effective" in payload
    if has_phys == has_eff:
        raise ConfigError("cpf-dynamics: give exactly one of physical/effective")
    if has_phys:
        _check_physical(payload["physical"], "physical")
    else:
        _check_effective(payload["effective"], "effective")
        if convention == "g" and "dissipation" in payload:
            raise ConfigError(
                "kappa_convention 'g' needs the physical section to know g"
            )
    _check_amplitudes(_require(payload, "amplitudes", "cpf-dynamics"),
                      "amplitudes", ("alpha", "beta", "gamma", "delta"))
    if "dims" in payload:
        _check_dims(payload["dims"], "dims")
    if "dissipation" in payload:
        _check_dissipation(payload["dissipation"], "dissipation")
    TimeGrid.from_mapping(_require(payload, "t_grid", "cpf-dynamics"))
    if not isinstance(payload.get("force_integrator", False), bool):
        raise ConfigError("force_integrator: expected a boolean")


def _validate_convert(payload: Mapping, convention: str):
    _check_extra(payload, {"input", "gate"}, "convert")
    _check_amplitudes(_require(payload, "input", "convert"),
                      "input", ("alpha", "beta"))
    gate = _as_mapping(_require(payload, "gate", "convert"), "gate")
    mode = _require(gate, "mode", "gate")
    if mode == "ideal":
        extra = set(gate) - {"mode", "dims"}
        if extra:
            raise ConfigError(f"gate: unknown keys {sorted(extra)}")
        if "dims" in gate:
            _check_dims(gate["dims"], "gate.dims")
        return
    if mode != "simulated":
        raise ConfigError(f"gate.mode: 'ideal' or 'simulated', got {mode!r}")
    if convention == "g":
        raise ConfigError(
            "kappa_convention 'g' is not applicable to convert: the gate is "
            "specified by effective parameters only"
        )
    extra = set(gate) - {"mode", "omega_eff", "gamma_eff", "conditions",
                         "dissipation", "dims"}
    if extra:
        raise ConfigError(f"gate: unknown keys {sorted(extra)}")
    _positive(_require(gate, "omega_eff", "gate"), "gate.omega_eff")
    _nonneg(gate.get("gamma_eff", 0.0), "gate.gamma_eff")
    cond = _as_mapping(_require(gate, "conditions", "gate"), "gate.conditions")
    extra = set(cond) - {"n1", "n2", "n3"}
    if extra:
        raise ConfigError(f"gate.conditions: unknown keys {sorted(extra)}")
    _int_at_least(_require(cond, "n1", "gate.conditions"), 1,
                  "gate.conditions.n1")
    for k in ("n2", "n3"):
        v = cond.get(k, 0)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"gate.conditions.{k}: expected an integer")
    if "dissipation" in gate:
        _check_dissipation(gate["dissipation"], "gate.dissipation")
    if "dims" in gate:
        _check_dims(gate["dims"], "gate.dims")


def _validate_multipath(payload: Mapping, convention: str):
    _check_extra(
        payload,
        {"ports", "hops", "input", "routing", "variants", "t_grid"},
        "multipath",
    )
    ports = _require(payload, "ports", "multipath")
    if not isinstance(ports, (list, tuple)) or not ports:
        raise ConfigError("ports: expected a non-empty list")
    for j, port in enumerate(ports, start=1):
        where = f"ports[{j}]"
        port = _as_mapping(port, where)
        _check_effective(
            {k: port[k] for k in ("omega_eff", "g_eff", "gamma_eff", "detuning")
             if k in port},
            where,
        )
        _nonneg(port.get("kappa", 0.0), f"{where}.kappa")
        _nonneg(port.get("n_th", 0.0), f"{where}.n_th")
        if "dims" in port:
            _check_dims(port["dims"], f"{where}.dims")
        if not isinstance(port.get("armed", True), bool):
            raise ConfigError(f"{where}.armed: expected a boolean")
        extra = set(port) - {"omega_eff", "g_eff", "gamma_eff", "detuning",
                             "kappa", "n_th", "dims", "armed"}
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    hops = _require(payload, "hops", "multipath")
    if not isinstance(hops, (list, tuple)):
        raise ConfigError("hops: expected a list")
    if len(hops) != len(ports) - 1:
        raise ConfigError(
            f"hops: {len(ports)} ports need {len(ports) - 1} hops, "
            f"got {len(hops)}"
        )
    for s, j in enumerate(hops, start=1):
        _finite(j, f"hops[{s}]")
    _check_amplitudes(_require(payload, "input", "multipath"),
                      "input", ("alpha", "beta"))
    routing = payload.get("routing", "joint")
    if routing not in ("joint", "per-port"):
        raise ConfigError(f"routing: 'joint' or 'per-port', got {routing!r}")
    if "variants" in payload:
        var = _as_mapping(payload["variants"], "variants")
        extra = set(var) - {"port", "field", "values"}
        if extra:
            raise ConfigError(f"variants: unknown keys {sorted(extra)}")
        port_no = _int_at_least(_require(var, "port", "variants"), 1,
                                "variants.port")
        if port_no > len(ports):
            raise ConfigError(
                f"variants.port: only {len(ports)} ports, got {port_no}"
            )
        if _require(var, "field", "variants") != "g_eff":
            raise ConfigError("variants.field: only 'g_eff' is supported")
        values = _require(var, "values", "variants")
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError("variants.values: expected a non-empty list")
        for v in values:
            _finite(v, "variants.values")
    TimeGrid.from_mapping(_require(payload, "t_grid", "multipath"))


def _validate_validate_effective(payload: Mapping, convention: str):
    _check_extra(
        payload,
        {"separations", "g", "omega_m2", "v_ratio", "dims", "t_grid"},
        "validate-effective",
    )
    seps = _require(payload, "separations", "validate-effective")
    if not isinstance(seps, (list, tuple)) or not seps:
        raise ConfigError("separations: expected a non-empty list")
    for s in seps:
        if _finite(s, "separations") < 10:
            raise ConfigError(
                "separations: scale separation below 10 is outside the "
                "adiabatic regime this check targets"
            )
    _nonneg(_require(payload, "g", "validate-effective"), "g")
    _positive(_require(payload, "omega_m2", "validate-effective"), "omega_m2")
    _nonneg(payload.get("v_ratio", 0.1), "v_ratio")
    if "dims" in payload:
        _check_dims(payload["dims"], "dims",
                    keys=("photon", "membrane", "oscillator"))
    if "t_grid" in payload:
        grid = TimeGrid.from_mapping(payload["t_grid"], need_span=False)
        if grid.stop is not None or grid.periods is not None:
            raise ConfigError(
                "t_grid: the span is fixed to one effective period here; "
                "give count only"
            )


_PAYLOAD_VALIDATORS = {
    "effective-sweep": _validate_effective_sweep,
    "cpf-dynamics": _validate_cpf_dynamics,
    "convert": _validate_convert,
    "multipath": _validate_multipath,
    "validate-effective": _validate_validate_effective,
}
