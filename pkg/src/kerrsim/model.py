"""System specifications and Hamiltonian builders.

The physical setting is a driven optical cavity whose photon number couples
quadratically to the displacement of a membrane, which in turn exchanges
phonons with one or more auxiliary mechanical oscillators. All frequencies
and rates are expressed in a caller-chosen reference unit (typically the
membrane frequency for single-device studies, the first effective
oscillator frequency for network studies); times are in inverse reference
units.

Two Hamiltonian levels are provided:

* the full model, with the quadratic coupling either in its exact form
  -g n_a (b + b+)^2 or in the rotating-wave form -g n_a (2 n_b + 1);
* the effective Kronecker-diagonal model obtained after eliminating the
  fast membrane, with a cross-Kerr term g_eff n_a n_b and parameters

      omega_eff = omega_m2 - V^2 / omega_m1
      g_eff     = 2 g V^2 / omega_m1^2
      gamma_eff = gamma_2 + (V^2 / omega_m1^2) gamma_1.

The sign of the cross-Kerr term is configurable via ``kerr_sign`` because
the two printed forms of the effective model disagree; the protocol layer
standardizes on the convention consistent with the phase-flip conditions
(see :mod:`kerrsim.protocols`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from kerrsim import fock
from kerrsim.fock import (
    BasisDescriptor,
    DimensionError,
    OperatorMatrix,
    embed,
    ladder_lower,
    ladder_raise,
    number_op,
)

MODE_KINDS = ("optical", "mechanical")
COUPLING_KINDS = ("quadratic-optomech", "phonon-tunnel", "photon-hop")
FRAMES = ("lab", "rotating-at-drive")

# adiabatic-elimination validity: warn when omega_m1 fails to dominate by this ratio
ADIABATIC_RATIO = 0.1


class UnsupportedConfigurationError(ValueError):
    """Spec combination the builders refuse (e.g. lab-frame drive)."""


@dataclass(frozen=True)
class ModeSpec:
    label: str
    kind: str
    frequency: float
    damping: float = 0.0
    n_th: float = 0.0
    dim: int = 2

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise ValueError(f"mode kind must be one of {MODE_KINDS}, got {self.kind!r}")
        if self.dim < 2:
            raise DimensionError(f"mode {self.label!r} needs dim >= 2")
        if self.damping < 0:
            raise ValueError(f"mode {self.label!r} has negative damping")
        if self.n_th < 0:
            raise ValueError(f"mode {self.label!r} has negative n_th")
        if self.kind == "optical" and self.n_th != 0:
            raise UnsupportedConfigurationError(
                "optical baths are zero temperature here; n_th must be 0"
            )


@dataclass(frozen=True)
class CouplingSpec:
    kind: str
    strength: float
    endpoints: tuple[str, str]

    def __post_init__(self):
        if self.kind not in COUPLING_KINDS:
            raise ValueError(
                f"coupling kind must be one of {COUPLING_KINDS}, got {self.kind!r}"
            )
        if len(self.endpoints) != 2 or self.endpoints[0] == self.endpoints[1]:
            raise ValueError(f"coupling needs two distinct endpoints, got {self.endpoints}")


@dataclass(frozen=True)
class DriveSpec:
    amplitude: float
    frequency: float
    target: str


# endpoint kinds each coupling type expects, in order (first, second)
_ENDPOINT_KINDS = {
    "quadratic-optomech": ("optical", "mechanical"),
    "phonon-tunnel": ("mechanical", "mechanical"),
    "photon-hop": ("optical", "optical"),
}


@dataclass(frozen=True)
class SystemSpec:
    modes: tuple[ModeSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()
    drive: Optional[DriveSpec] = None
    frame: str = "lab"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels: {labels}")
        by_label = {m.label: m for m in self.modes}
        for c in self.couplings:
            want = _ENDPOINT_KINDS[c.kind]
            got = []
            for lab in c.endpoints:
                if lab not in by_label:
                    raise ValueError(f"coupling endpoint {lab!r} is not a mode")
                got.append(by_label[lab].kind)
            if sorted(got) != sorted(want):
                raise UnsupportedConfigurationError(
                    f"{c.kind} expects endpoint kinds {want}, got {tuple(got)}"
                )
        if self.drive is not None:
            if self.drive.target not in by_label:
                raise ValueError(f"drive target {self.drive.target!r} is not a mode")
            if by_label[self.drive.target].kind != "optical":
                raise UnsupportedConfigurationError("drives attach to optical modes only")

    def mode(self, label: str) -> ModeSpec:
        for m in self.modes:
            if m.label == label:
                return m
        raise ValueError(f"no mode {label!r}")

    def basis(self) -> BasisDescriptor:
        return BasisDescriptor(
            tuple(m.dim for m in self.modes), tuple(m.label for m in self.modes)
        )


@dataclass(frozen=True)
class EffectiveParams:
    """Parameters of the eliminated-membrane cross-Kerr model."""

    detuning: float
    omega_eff: float
    g_eff: float
    gamma_eff: float

    def __post_init__(self):
        if self.gamma_eff < 0:
            raise ValueError(f"gamma_eff must be >= 0, got {self.gamma_eff}")


def adiabatic_ok(g: float, omega_m1: float, omega_m2: float, V: float,
                 ratio: float = ADIABATIC_RATIO) -> bool:
    """True when omega_m1 dominates omega_m2, V and g by 1/ratio."""
    scale = abs(omega_m1)
    if scale == 0:
        return False
    return max(abs(omega_m2), abs(V), abs(g)) <= ratio * scale


def effective_params(g: float, omega_m1: float, omega_m2: float, V: float,
                     gamma1: float = 0.0, gamma2: float = 0.0,
                     detuning: float = 0.0) -> EffectiveParams:
    """Eliminate the fast membrane and return the cross-Kerr parameters.

    Warns (UserWarning) when the separation of scales backing the
    elimination is weaker than a factor of 10.
    """
    if omega_m1 <= 0:
        raise ValueError(f"omega_m1 must be positive, got {omega_m1}")
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("damping rates must be >= 0")
    if not adiabatic_ok(g, omega_m1, omega_m2, V):
        warnings.warn(
            "effective parameters outside the adiabatic regime "
            f"(omega_m1={omega_m1}, omega_m2={omega_m2}, V={V}, g={g})",
            UserWarning,
            stacklevel=2,
        )
    r = (V / omega_m1) ** 2
    return EffectiveParams(
        detuning=detuning,
        omega_eff=omega_m2 - V**2 / omega_m1,
        g_eff=2.0 * g * r,
        gamma_eff=gamma2 + r * gamma1,
    )


# ---------------------------------------------------------------------------
# Hamiltonian builders

def rwa_quadratic_term(g: float, cavity: str, membrane: str,
                       basis: BasisDescriptor) -> OperatorMatrix:
    """Rotating-wave form of the quadratic coupling: -g n_a (2 n_b + 1)."""
    d_b = basis.dim_of(membrane)
    n_a = embed(number_op(basis.dim_of(cavity)), basis, cavity)
    shifted = embed(2.0 * number_op(d_b) + np.eye(d_b), basis, membrane)
    return (-g) * (n_a @ shifted)


def _full_quadratic_term(g: float, cavity: str, membrane: str,
                         basis: BasisDescriptor) -> OperatorMatrix:
    d_b = basis.dim_of(membrane)
    x = ladder_lower(d_b) + ladder_raise(d_b)
    n_a = embed(number_op(basis.dim_of(cavity)), basis, cavity)
    return (-g) * (n_a @ embed(x @ x, basis, membrane))


def build_full_hamiltonian(spec: SystemSpec, quadratic_rwa: bool = True) -> OperatorMatrix:
    """Assemble the full multimode Hamiltonian of a SystemSpec.

    Free terms omega n per mode; quadratic optomechanical couplings enter
    with an overall minus sign, in rotating-wave form by default; phonon
    tunnelling V(b+ b' + b b'+); photon hopping J(a+ a' + a a'+). A drive
    is supported only in the rotating-at-drive frame, where it contributes
    eps (a + a+) and shifts its target's free term to omega_c - omega_d.
    A lab-frame drive would make the Hamiltonian time dependent, which the
    engine does not integrate.
    """
    if spec.drive is not None and spec.frame == "lab":
        raise UnsupportedConfigurationError(
            "time-dependent lab-frame drive is not supported; "
            "use frame='rotating-at-drive'"
        )
    if spec.drive is None and spec.frame == "rotating-at-drive":
        raise UnsupportedConfigurationError(
            "rotating-at-drive frame needs a drive to define the rotation"
        )
    basis = spec.basis()
    h = np.zeros((basis.total_dim, basis.total_dim), dtype=complex)
    for m in spec.modes:
        freq = m.frequency
        if spec.drive is not None and m.label == spec.drive.target:
            freq = m.frequency - spec.drive.frequency
        h += freq * embed(number_op(m.dim), basis, m.label).entries
    for c in spec.couplings:
        a_lab, b_lab = c.endpoints
        if c.kind == "quadratic-optomech":
            # normalize endpoint order to (optical, mechanical)
            if spec.mode(a_lab).kind != "optical":
                a_lab, b_lab = b_lab, a_lab
            term = (
                rwa_quadratic_term(c.strength, a_lab, b_lab, basis)
                if quadratic_rwa
                else _full_quadratic_term(c.strength, a_lab, b_lab, basis)
            )
            h += term.entries
        else:
            # both exchange couplings share the beam-splitter form
            lower_a = embed(ladder_lower(basis.dim_of(a_lab)), basis, a_lab).entries
            lower_b = embed(ladder_lower(basis.dim_of(b_lab)), basis, b_lab).entries
            ex = lower_a.conj().T @ lower_b
            h += c.strength * (ex + ex.conj().T)
    if spec.drive is not None:
        low = embed(ladder_lower(basis.dim_of(spec.drive.target)), basis,
                    spec.drive.target).entries
        h += spec.drive.amplitude * (low + low.conj().T)
    op = OperatorMatrix.create(basis, h)
    if not op.hermitian:
        raise RuntimeError("assembled Hamiltonian lost hermiticity")
    return op


def build_effective_hamiltonian(params: EffectiveParams,
                                dims: tuple[int, int] = (2, 2),
                                kerr_sign: int = +1,
                                labels: tuple[str, str] = ("cavity", "oscillator"),
                                ) -> OperatorMatrix:
    """Kronecker-diagonal effective model on (cavity, oscillator).

    Diagonal entry at photon number n_a and phonon number n_b:

        detuning * n_a + omega_eff * n_b + kerr_sign * g_eff * n_a * n_b

    kerr_sign=+1 matches the printed effective Hamiltonian; the protocol
    layer passes -1 so that numerically accumulated phases agree with the
    phase-flip conditions (theta_11 = (omega_eff + detuning - g_eff) t).
    """
    if kerr_sign not in (+1, -1):
        raise ValueError("kerr_sign must be +1 or -1")
    basis = BasisDescriptor(tuple(dims), tuple(labels))
    n_a = np.arange(dims[0], dtype=float)
    n_b = np.arange(dims[1], dtype=float)
    diag = (
        params.detuning * n_a[:, None]
        + params.omega_eff * n_b[None, :]
        + kerr_sign * params.g_eff * n_a[:, None] * n_b[None, :]
    ).reshape(-1)
    return OperatorMatrix.create(basis, np.diag(diag.astype(complex)))


def multipath_labels(n_ports: int) -> tuple[str, ...]:
    labels: list[str] = []
    for j in range(1, n_ports + 1):
        labels.extend((f"cavity{j}", f"osc{j}"))
    return tuple(labels)


def build_multipath_effective(port_params: Sequence[EffectiveParams],
                              hops: Sequence[float],
                              dims: Sequence[tuple[int, int]],
                              kerr_sign: int = +1) -> OperatorMatrix:
    """Star-coupled network of effective converter ports.

    Port j contributes detuning_j n_aj + omega_j n_bj + kerr g_j n_aj n_bj;
    hop s couples cavity 1 to cavity s+1 with J_s (a1+ a_{s+1} + h.c.).
    Basis order is (cavity1, osc1, cavity2, osc2, ...).
    """
    n = len(port_params)
    if n < 1:
        raise ValueError("need at least one port")
    if len(hops) != max(n - 1, 0):
        raise ValueError(f"{n} ports need {n - 1} hop strengths, got {len(hops)}")
    if len(dims) != n:
        raise ValueError(f"{n} ports need {n} dim pairs")
    if kerr_sign not in (+1, -1):
        raise ValueError("kerr_sign must be +1 or -1")
    flat_dims: list[int] = []
    for dc, do in dims:
        flat_dims.extend((dc, do))
    basis = BasisDescriptor(tuple(flat_dims), multipath_labels(n))
    h = np.zeros((basis.total_dim, basis.total_dim), dtype=complex)
    for j, (p, (dc, do)) in enumerate(zip(port_params, dims), start=1):
        n_c = embed(number_op(dc), basis, f"cavity{j}").entries
        n_o = embed(number_op(do), basis, f"osc{j}").entries
        h += p.detuning * n_c + p.omega_eff * n_o
        h += kerr_sign * p.g_eff * (n_c @ n_o)
    a1 = embed(ladder_lower(basis.dim_of("cavity1")), basis, "cavity1").entries
    for s, J in enumerate(hops, start=1):
        a_s = embed(ladder_lower(basis.dim_of(f"cavity{s + 1}")), basis,
                    f"cavity{s + 1}").entries
        ex = a1.conj().T @ a_s
        h += J * (ex + ex.conj().T)
    return OperatorMatrix.create(basis, h)


# ---------------------------------------------------------------------------
# collapse operators

def build_collapse_ops(spec: SystemSpec) -> list[tuple[OperatorMatrix, float]]:
    """Lindblad channels of a SystemSpec as (operator, rate) pairs.

    Optical modes decay at kappa into a zero-temperature bath; mechanical
    modes couple to a thermal bath: rates gamma (n_th + 1) downward and
    gamma n_th upward. Zero-rate channels are dropped.
    """
    basis = spec.basis()
    ops: list[tuple[OperatorMatrix, float]] = []
    for m in spec.modes:
        if m.damping == 0.0:
            continue
        lower = embed(ladder_lower(m.dim), basis, m.label)
        if m.kind == "optical":
            ops.append((lower, m.damping))
        else:
            ops.append((lower, m.damping * (m.n_th + 1.0)))
            if m.n_th > 0:
                ops.append((lower.dag(), m.damping * m.n_th))
    return ops


def effective_collapse_ops(basis: BasisDescriptor, cavity: str, osc: str,
                           kappa: float, gamma_eff: float, n_th: float,
                           ) -> list[tuple[OperatorMatrix, float]]:
    """Collapse channels of one effective converter port on a shared basis."""
    ops: list[tuple[OperatorMatrix, float]] = []
    if kappa > 0:
        ops.append((embed(ladder_lower(basis.dim_of(cavity)), basis, cavity), kappa))
    if gamma_eff > 0:
        lower = embed(ladder_lower(basis.dim_of(osc)), basis, osc)
        ops.append((lower, gamma_eff * (n_th + 1.0)))
        if n_th > 0:
            ops.append((lower.dag(), gamma_eff * n_th))
    return ops
