"""Sweep commands: validated configs in, result tables out.

Each command takes a :class:`~kerrsim.config.RunConfig` and returns a
:class:`~kerrsim.table.ResultTable`. Independent work items (sweep points,
separations, routing runs, coupling variants) go through a bounded worker
pool sized by ``threads``; results are assembled in axis order regardless
of completion order, so the emitted rows never depend on scheduling.
"""

from __future__ import annotations

import copy
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Mapping, Optional

import numpy as np

from kerrsim import __version__, engine, fock, model, protocols
from kerrsim.config import ConfigError, RunConfig, SweepAxis, TimeGrid, as_complex
from kerrsim.table import ResultTable

__all__ = [
    "cmd_effective_sweep",
    "cmd_cpf_dynamics",
    "cmd_convert",
    "cmd_multipath",
    "cmd_validate_effective",
    "cmd_convergence_recheck",
    "run_command",
    "COMMAND_FUNCTIONS",
    "local_peaks",
]

# |omega_eff| below this is reported as the divergence sentinel
EPS_SINGULAR = 1e-12

CONVERGENCE_TOL = 1e-4

# conversion peaks below this are thermal-background wiggle, not events
PEAK_FLOOR = 0.1

DEFAULT_CPF_DIMS = {"photon": 3, "oscillator": 4}
DEFAULT_CONVERT_DIMS = {"ideal": {"photon": 2, "oscillator": 2},
                        "simulated": {"photon": 3, "oscillator": 4}}
DEFAULT_PORT_DIMS = {"photon": 2, "oscillator": 4}
DEFAULT_VALIDATE_DIMS = {"photon": 3, "membrane": 4, "oscillator": 4}


def _pool_map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _metadata(cfg: RunConfig, started: float, **extra) -> dict:
    meta = {
        "command": cfg.command,
        "preset": cfg.preset,
        "config_sha256": cfg.digest(),
        "tool_version": __version__,
        "kappa_convention": cfg.kappa_convention,
        # wall time is provenance, not data; it never enters the rows
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    meta.update(extra)
    return meta


def _engine_config(cfg: RunConfig) -> engine.EvolveConfig:
    return engine.EvolveConfig(store_states=False,
                               check_positivity=cfg.check_positivity)


def _min_or_none(arr: Optional[np.ndarray]):
    return None if arr is None else float(np.min(arr))


def local_peaks(t: np.ndarray, f: np.ndarray,
                floor: float = PEAK_FLOOR) -> list[tuple[float, float]]:
    """Interior samples strictly above both neighbours and the floor."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    out = []
    for k in range(1, f.size - 1):
        if f[k] > f[k - 1] and f[k] > f[k + 1] and f[k] >= floor:
            out.append((float(t[k]), float(f[k])))
    return out


# ---------------------------------------------------------------------------
# effective-sweep

def cmd_effective_sweep(cfg: RunConfig) -> ResultTable:
    """Closed-form effective parameters over a V grid.

    Columns: V, omega_eff, g_eff, kerr_ratio (= |g_eff/omega_eff|),
    gamma_eff, singular, adiabatic_warning. In the singularity
    neighbourhood |omega_eff| < EPS_SINGULAR the ratio column carries the
    infinity sentinel and ``singular`` is 1; rows where the scale
    separation backing the elimination is weak set ``adiabatic_warning``
    to 1 instead of warning once per sweep.
    """
    started = time.perf_counter()
    base = cfg.payload["base"]
    axis = SweepAxis.from_mapping(cfg.payload["sweep"])
    g = float(base["g"])
    w1 = float(base["omega_m1"])
    w2 = float(base["omega_m2"])
    g1 = float(base.get("gamma1", 0.0))
    g2 = float(base.get("gamma2", 0.0))
    det = float(base.get("detuning", 0.0))

    def point(V: float) -> tuple:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            p = model.effective_params(g, w1, w2, V, g1, g2, det)
        singular = abs(p.omega_eff) < EPS_SINGULAR
        ratio = math.inf if singular else abs(p.g_eff / p.omega_eff)
        warn = 0.0 if model.adiabatic_ok(g, w1, w2, V) else 1.0
        return (V, p.omega_eff, p.g_eff, ratio, p.gamma_eff,
                float(singular), warn)

    rows = _pool_map(point, list(axis.values), cfg.threads)
    meta = _metadata(cfg, started,
                     n_singular=sum(1 for r in rows if r[5] == 1.0))
    return ResultTable(
        columns=("V", "omega_eff", "g_eff", "kerr_ratio", "gamma_eff",
                 "singular", "adiabatic_warning"),
        rows=tuple(rows),
        metadata=meta,
        allow_inf=("kerr_ratio",),
    )


# ---------------------------------------------------------------------------
# cpf-dynamics

def _resolve_gate_params(payload: Mapping) -> tuple[model.EffectiveParams,
                                                    Optional[float]]:
    """EffectiveParams plus the physical g when one was given."""
    if "physical" in payload:
        ph = payload["physical"]
        params = model.effective_params(
            float(ph["g"]), float(ph["omega_m1"]), float(ph["omega_m2"]),
            float(ph["V"]),
            gamma1=float(ph.get("gamma1", 0.0)),
            gamma2=float(ph.get("gamma2", 0.0)),
            detuning=float(ph.get("detuning", 0.0)),
        )
        return params, float(ph["g"])
    e = payload["effective"]
    params = model.EffectiveParams(
        detuning=float(e.get("detuning", 0.0)),
        omega_eff=float(e["omega_eff"]),
        g_eff=float(e["g_eff"]),
        gamma_eff=float(e.get("gamma_eff", 0.0)),
    )
    return params, None


def _kappa_value(dissipation: Mapping, params: model.EffectiveParams,
                 g_phys: Optional[float], convention: str) -> float:
    ratio = float(dissipation["kappa_ratio"])
    if convention == "geff":
        return ratio * abs(params.g_eff)
    if g_phys is None:  # config validation already rejects this path
        raise ConfigError("kappa_convention 'g' needs physical parameters")
    return ratio * abs(g_phys)


def cmd_cpf_dynamics(cfg: RunConfig) -> ResultTable:
    """Phase-flip gate fidelity over time, analytic next to numeric.

    Columns: t, F_analytic, F_numeric, trace, purity. F_analytic is the
    closed-system phase formula; with a ``dissipation`` section the
    numeric column is the master-equation result, otherwise the run is
    closed and rides the diagonal fast path unless ``force_integrator``.
    """
    started = time.perf_counter()
    payload = cfg.payload
    params, g_phys = _resolve_gate_params(payload)

    am = payload["amplitudes"]
    try:
        amps = protocols.QubitAmplitudes(
            as_complex(am["alpha"], "amplitudes.alpha"),
            as_complex(am["beta"], "amplitudes.beta"),
            as_complex(am["gamma"], "amplitudes.gamma"),
            as_complex(am["delta"], "amplitudes.delta"),
        )
    except ValueError as exc:
        raise ConfigError(f"amplitudes: {exc}") from exc

    dims_map = payload.get("dims") or DEFAULT_CPF_DIMS
    dims = (int(dims_map["photon"]), int(dims_map["oscillator"]))
    grid = TimeGrid.from_mapping(payload["t_grid"]).resolve(params.omega_eff)

    collapse: list = []
    n_th = 0.0
    if "dissipation" in payload:
        diss = payload["dissipation"]
        kappa = _kappa_value(diss, params, g_phys, cfg.kappa_convention)
        n_th = float(diss.get("n_th", 0.0))
        h = protocols.gate_hamiltonian(params, dims)
        collapse = model.effective_collapse_ops(
            h.basis, "cavity", "oscillator",
            kappa=kappa, gamma_eff=params.gamma_eff, n_th=n_th,
        )

    run = protocols.run_cpf_gate(
        params, amps, grid, dims=dims, collapse=collapse,
        force_integrator=bool(payload.get("force_integrator", False)),
        engine_config=_engine_config(cfg),
    )
    analytic = np.array([
        protocols.analytic_cpf_fidelity(amps, protocols.cpf_phases(params, t))
        for t in grid
    ])

    rows = tuple(zip(grid, analytic, run.fidelity, run.trace, run.purity))
    meta = _metadata(
        cfg, started,
        f_max=run.f_max,
        t_at_max=run.t_at_max,
        max_analytic_numeric_diff=float(np.max(np.abs(analytic - run.fidelity))),
        used_integrator=run.used_integrator,
        n_th=n_th,
        omega_eff=params.omega_eff,
        g_eff=params.g_eff,
        min_eigenvalue=_min_or_none(run.min_eig),
    )
    return ResultTable(
        columns=("t", "F_analytic", "F_numeric", "trace", "purity"),
        rows=rows,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# convert

def cmd_convert(cfg: RunConfig) -> ResultTable:
    """One converter pass: measurement branches with their fidelities.

    Columns: outcome, probability, fidelity. A branch whose probability is
    exactly zero (beta = 0 pushes everything into outcome 0) reports
    fidelity 0; it never occurs, there is no state to score.
    """
    started = time.perf_counter()
    payload = cfg.payload
    alpha = as_complex(payload["input"]["alpha"], "input.alpha")
    beta = as_complex(payload["input"]["beta"], "input.beta")
    gate = payload["gate"]
    mode = gate["mode"]
    dims_map = gate.get("dims") or DEFAULT_CONVERT_DIMS[mode]
    dims = (int(dims_map["photon"]), int(dims_map["oscillator"]))

    extra: dict = {"gate_mode": mode}
    if mode == "ideal":
        channel = "ideal"
    else:
        cond = gate["conditions"]
        try:
            solved = protocols.solve_phase_conditions(
                float(gate["omega_eff"]),
                n1=int(cond["n1"]), n2=int(cond.get("n2", 0)),
                n3=int(cond.get("n3", 0)),
                gamma_eff=float(gate.get("gamma_eff", 0.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"gate.conditions: {exc}") from exc
        h = protocols.gate_hamiltonian(solved.params, dims)
        collapse: list = []
        if "dissipation" in gate:
            diss = gate["dissipation"]
            collapse = model.effective_collapse_ops(
                h.basis, "cavity", "oscillator",
                kappa=float(diss["kappa_ratio"]) * abs(solved.params.g_eff),
                gamma_eff=solved.params.gamma_eff,
                n_th=float(diss.get("n_th", 0.0)),
            )
        diag: dict = {}

        def channel(rho: np.ndarray) -> np.ndarray:
            state = fock.QuantumState.from_density(h.basis, rho)
            traj = engine.evolve(h, state, np.array([0.0, solved.t_gate]),
                                 collapse=collapse, config=_engine_config(cfg))
            diag["trace_drift"] = float(np.max(np.abs(traj.trace - 1.0)))
            diag["purity_final"] = float(traj.purity[-1])
            diag["min_eigenvalue"] = _min_or_none(traj.min_eig)
            return traj.final_state

        extra.update(t_gate=solved.t_gate, g_eff=solved.params.g_eff,
                     detuning=solved.params.detuning)

    try:
        post = protocols.converter_postgate_state(alpha, beta, gate=channel,
                                                  dims=dims)
    except ValueError as exc:
        raise ConfigError(f"input: {exc}") from exc
    if mode == "simulated":
        extra.update(diag)

    rows = []
    for outcome in (0, 1):
        try:
            prob, phonon = protocols.measure_and_correct(post, outcome)
            fid = protocols.conversion_fidelity(alpha, beta, phonon)
        except protocols.ImpossibleOutcomeError:
            prob, fid = 0.0, 0.0
        rows.append((float(outcome), prob, fid))

    meta = _metadata(cfg, started,
                     probability_sum=float(rows[0][1] + rows[1][1]), **extra)
    return ResultTable(columns=("outcome", "probability", "fidelity"),
                       rows=tuple(rows), metadata=meta)


# ---------------------------------------------------------------------------
# multipath

def _port_spec(pm: Mapping, armed: bool) -> protocols.PortSpec:
    dims_map = pm.get("dims") or DEFAULT_PORT_DIMS
    return protocols.PortSpec(
        params=model.EffectiveParams(
            detuning=float(pm.get("detuning", 0.0)),
            omega_eff=float(pm["omega_eff"]),
            g_eff=float(pm["g_eff"]),
            gamma_eff=float(pm.get("gamma_eff", 0.0)),
        ),
        kappa=float(pm.get("kappa", 0.0)),
        n_th=float(pm.get("n_th", 0.0)),
        dims=(int(dims_map["photon"]), int(dims_map["oscillator"])),
        armed=armed,
    )


def _routed_runs(ports_payload: list, hops: list, routing: str,
                 alpha: complex, beta: complex
                 ) -> list[tuple[protocols.MultipathSpec, list[int]]]:
    """(network spec, ports it scores) for each evolution to run.

    joint: one run, configured arming, every port scored. per-port: port j
    is scored in its own run where only it is armed and only the hop
    feeding it (none for port 1) is engaged, so each port is read out
    under its own routing.
    """
    n = len(ports_payload)
    if routing == "joint":
        spec = protocols.MultipathSpec(
            ports=tuple(_port_spec(p, bool(p.get("armed", True)))
                        for p in ports_payload),
            hops=tuple(float(j) for j in hops),
            alpha=alpha, beta=beta,
        )
        return [(spec, list(range(n)))]
    runs = []
    for j in range(n):
        spec = protocols.MultipathSpec(
            ports=tuple(_port_spec(p, i == j)
                        for i, p in enumerate(ports_payload)),
            hops=tuple(float(hops[s]) if s == j - 1 else 0.0
                       for s in range(n - 1)),
            alpha=alpha, beta=beta,
        )
        runs.append((spec, [j]))
    return runs


def _worse_trace(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(np.abs(b - 1.0) > np.abs(a - 1.0), b, a)


def cmd_multipath(cfg: RunConfig) -> ResultTable:
    """Conversion and survival fidelities of an n-port network over time.

    Columns: t, F_C1..F_Cn, F_S2..F_Sn, trace, purity; a leading variant
    column (e.g. g_eff2) is prepended when the config sweeps one port's
    coupling. With per-port routing the trace/purity columns merge the
    per-run diagnostics conservatively (worst drift, lowest purity).
    Metadata carries the local-maxima table of every F_Cj per variant.
    """
    started = time.perf_counter()
    payload = cfg.payload
    ports_payload = payload["ports"]
    n = len(ports_payload)
    hops = payload["hops"]
    alpha = as_complex(payload["input"]["alpha"], "input.alpha")
    beta = as_complex(payload["input"]["beta"], "input.beta")
    routing = payload.get("routing", "joint")
    grid = TimeGrid.from_mapping(payload["t_grid"]).resolve(
        float(ports_payload[0]["omega_eff"]))

    variants = payload.get("variants")
    if variants is None:
        variant_values: list = [None]
        variant_column = None
    else:
        variant_values = [float(v) for v in variants["values"]]
        variant_column = f"{variants['field']}{variants['port']}"

    jobs = []  # (variant index, scored ports, spec)
    for vi, value in enumerate(variant_values):
        ports_v = copy.deepcopy(ports_payload)
        if value is not None:
            ports_v[variants["port"] - 1][variants["field"]] = value
        try:
            for spec, scored in _routed_runs(ports_v, hops, routing,
                                             alpha, beta):
                jobs.append((vi, scored, spec))
        except ValueError as exc:
            raise ConfigError(f"multipath: {exc}") from exc

    eng_cfg = _engine_config(cfg)
    results = _pool_map(
        lambda job: protocols.run_multipath_conversion(
            job[2], grid, engine_config=eng_cfg),
        jobs, cfg.threads,
    )

    fid_cols = [f"F_C{j + 1}" for j in range(n)] + \
               [f"F_S{j + 1}" for j in range(1, n)]
    columns = ("t", *fid_cols, "trace", "purity")
    if variant_column is not None:
        columns = (variant_column, *columns)

    rows: list[tuple] = []
    peaks: dict = {}
    f_max_meta: dict = {}
    min_eigs: list[float] = []
    for vi, value in enumerate(variant_values):
        f_c = np.empty((n, grid.size))
        f_s = np.empty((n, grid.size))
        trace = np.ones(grid.size)
        purity = np.full(grid.size, np.inf)
        for (job_vi, scored, _), res in zip(jobs, results):
            if job_vi != vi:
                continue
            for j in scored:
                f_c[j] = res.f_c[j]
                f_s[j] = res.f_s[j]
            trace = _worse_trace(trace, res.trace)
            purity = np.minimum(purity, res.purity)
            if res.min_eig is not None:
                min_eigs.append(float(np.min(res.min_eig)))
        label = (f"{variant_column}={value!r}" if variant_column is not None
                 else None)
        port_peaks = {
            f"F_C{j + 1}": [list(p) for p in local_peaks(grid, f_c[j])]
            for j in range(n)
        }
        port_max = {
            f"F_C{j + 1}": {
                "value": float(np.max(f_c[j])),
                "t": float(grid[int(np.argmax(f_c[j]))]),
            }
            for j in range(n)
        }
        if label is None:
            peaks = port_peaks
            f_max_meta = port_max
        else:
            peaks[label] = port_peaks
            f_max_meta[label] = port_max
        lead = () if value is None else (value,)
        for k in range(grid.size):
            rows.append((
                *lead, grid[k],
                *(f_c[j][k] for j in range(n)),
                *(f_s[j][k] for j in range(1, n)),
                trace[k], purity[k],
            ))

    meta = _metadata(cfg, started, peaks=peaks, f_c_max=f_max_meta,
                     routing=routing,
                     peak_floor=PEAK_FLOOR,
                     min_eigenvalue=min(min_eigs) if min_eigs else None)
    return ResultTable(columns=columns, rows=tuple(rows), metadata=meta)


# ---------------------------------------------------------------------------
# validate-effective

def cmd_validate_effective(cfg: RunConfig) -> ResultTable:
    """Full three-mode model against the eliminated model, per separation.

    For each scale separation omega_m1/omega_m2 both models evolve the
    same embedded initial state (cavity and retained oscillator each in
    (|0> + |1>)/sqrt(2), fast membrane in its ground state) over one
    effective period; the row reports the largest deviation of the cavity
    and oscillator populations. Columns: separation, omega_eff,
    dev_cavity, dev_oscillator, dev_max.
    """
    started = time.perf_counter()
    payload = cfg.payload
    seps = [float(s) for s in payload["separations"]]
    g = float(payload["g"])
    w2 = float(payload["omega_m2"])
    v_ratio = float(payload.get("v_ratio", 0.1))
    dims_map = payload.get("dims") or DEFAULT_VALIDATE_DIMS
    d_ph = int(dims_map["photon"])
    d_mem = int(dims_map["membrane"])
    d_osc = int(dims_map["oscillator"])
    count = 201
    if "t_grid" in payload:
        count = TimeGrid.from_mapping(payload["t_grid"], need_span=False).count

    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)

    def run(sep: float) -> tuple:
        w1 = sep * w2
        V = v_ratio * math.sqrt(w1 * w2)
        params = model.effective_params(g, w1, w2, V)
        grid = np.linspace(0.0, 2.0 * math.pi / params.omega_eff, count)

        spec = model.SystemSpec(modes=(
            model.ModeSpec("cavity", "optical", 0.0, dim=d_ph),
            model.ModeSpec("membrane", "mechanical", w1, dim=d_mem),
            model.ModeSpec("osc", "mechanical", w2, dim=d_osc),
        ), couplings=(
            model.CouplingSpec("quadratic-optomech", g, ("cavity", "membrane")),
            model.CouplingSpec("phonon-tunnel", V, ("membrane", "osc")),
        ))
        h_full = model.build_full_hamiltonian(spec, quadratic_rwa=True)
        basis_full = spec.basis()
        ground = np.zeros(d_mem)
        ground[0] = 1.0
        state_full = fock.product_vector(basis_full, [
            np.pad(plus, (0, d_ph - 2)),
            ground,
            np.pad(plus, (0, d_osc - 2)),
        ])
        traj_full = engine.evolve(
            h_full, state_full, grid,
            observables={"cav": fock.number(basis_full, "cavity"),
                         "osc": fock.number(basis_full, "osc")},
            config=_engine_config(cfg),
        )

        h_eff = model.build_effective_hamiltonian(params, dims=(d_ph, d_osc))
        state_eff = fock.product_vector(h_eff.basis, [
            np.pad(plus, (0, d_ph - 2)),
            np.pad(plus, (0, d_osc - 2)),
        ])
        traj_eff = engine.evolve(
            h_eff, state_eff, grid,
            observables={"cav": fock.number(h_eff.basis, "cavity"),
                         "osc": fock.number(h_eff.basis, "oscillator")},
            config=_engine_config(cfg),
        )

        dev_cav = float(np.max(np.abs(
            traj_full.observables["cav"] - traj_eff.observables["cav"])))
        dev_osc = float(np.max(np.abs(
            traj_full.observables["osc"] - traj_eff.observables["osc"])))
        trace_dev = max(float(np.max(np.abs(traj_full.trace - 1.0))),
                        float(np.max(np.abs(traj_eff.trace - 1.0))))
        eigs = [m for m in (_min_or_none(traj_full.min_eig),
                            _min_or_none(traj_eff.min_eig)) if m is not None]
        row = (sep, params.omega_eff, dev_cav, dev_osc,
               max(dev_cav, dev_osc))
        return row, trace_dev, (min(eigs) if eigs else None)

    results = _pool_map(run, seps, cfg.threads)
    rows = [r[0] for r in results]
    devs = [r[4] for r in rows]
    min_eigs = [r[2] for r in results if r[2] is not None]
    meta = _metadata(
        cfg, started,
        deviations_decreasing=all(a > b for a, b in zip(devs, devs[1:])),
        max_trace_deviation=max(r[1] for r in results),
        min_eigenvalue=min(min_eigs) if min_eigs else None,
    )
    return ResultTable(
        columns=("separation", "omega_eff", "dev_cavity", "dev_oscillator",
                 "dev_max"),
        rows=tuple(rows),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# convergence recheck

def _bump(dims_map: Mapping) -> dict:
    return {k: int(v) + 1 for k, v in dims_map.items()}


def _bumped_payload(command: str, payload: dict) -> dict:
    """The payload rerun at every photon/mechanical dim + 1.

    Defaults are materialized first so a config that relied on them is
    still bumped above them.
    """
    p = copy.deepcopy(payload)
    if command == "cpf-dynamics":
        p["dims"] = _bump(p.get("dims") or DEFAULT_CPF_DIMS)
    elif command == "convert":
        gate = p["gate"]
        gate["dims"] = _bump(gate.get("dims")
                             or DEFAULT_CONVERT_DIMS[gate["mode"]])
    elif command == "multipath":
        for port in p["ports"]:
            port["dims"] = _bump(port.get("dims") or DEFAULT_PORT_DIMS)
    elif command == "validate-effective":
        p["dims"] = _bump(p.get("dims") or DEFAULT_VALIDATE_DIMS)
    # effective-sweep has no truncation; the rerun is identical
    return p


def cmd_convergence_recheck(cfg: RunConfig) -> tuple[ResultTable, ResultTable]:
    """Base run plus the same run at raised truncations.

    Returns (base table, recheck table). The recheck table has the base
    columns and a single row of column-wise max absolute differences;
    metadata carries pass/fail against CONVERGENCE_TOL.
    """
    fn = COMMAND_FUNCTIONS[cfg.command]
    base = fn(cfg)
    recheck_cfg = cfg.with_payload(_bumped_payload(cfg.command, cfg.payload))
    raised = fn(recheck_cfg)
    if raised.columns != base.columns:
        raise RuntimeError(
            f"recheck changed the table shape: {base.columns} vs "
            f"{raised.columns}"
        )

    a = np.array(base.rows, dtype=float)
    b = np.array(raised.rows, dtype=float)
    if a.shape != b.shape:
        raise RuntimeError(
            f"recheck changed the row count: {a.shape} vs {b.shape}"
        )
    # equal entries diff to 0 even when both are the inf sentinel
    with np.errstate(invalid="ignore"):
        diff = np.where(a == b, 0.0, np.abs(a - b))
    col_diff = tuple(float(v) for v in diff.max(axis=0))
    worst = max(col_diff)
    meta = {
        "command": cfg.command,
        "preset": cfg.preset,
        "pass": bool(worst <= CONVERGENCE_TOL),
        "max_difference": worst,
        "threshold": CONVERGENCE_TOL,
        "base_config_sha256": cfg.digest(),
        "recheck_config_sha256": recheck_cfg.digest(),
        "tool_version": __version__,
    }
    recheck = ResultTable(columns=base.columns, rows=(col_diff,),
                          metadata=meta, allow_inf=base.columns)
    return base, recheck


COMMAND_FUNCTIONS = {
    "effective-sweep": cmd_effective_sweep,
    "cpf-dynamics": cmd_cpf_dynamics,
    "convert": cmd_convert,
    "multipath": cmd_multipath,
    "validate-effective": cmd_validate_effective,
}


def run_command(cfg: RunConfig) -> ResultTable:
    return COMMAND_FUNCTIONS[cfg.command](cfg)
