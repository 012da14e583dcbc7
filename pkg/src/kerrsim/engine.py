"""Lindblad master-equation integrator.

Density matrices are propagated in vectorized form (row-major ``vec``), so
the generator is a sparse matrix acting on vec(rho):

    vec(A rho B) = kron(A, B^T) vec(rho)

    L = -i [kron(H, I) - kron(I, H^T)]
        + sum_k r_k [ kron(C_k, conj(C_k))
                      - 1/2 kron(C_k+ C_k, I)
                      - 1/2 kron(I, (C_k+ C_k)^T) ]

Integration uses an adaptive explicit Runge-Kutta scheme on the complex
vector. Long time grids are integrated in batches so memory stays bounded
by the batch, not the whole trajectory; callers that cannot afford to
store states at all can stream samples through ``sample_fn``.

Trace drift is the primary integration-quality signal. At every sample the
raw trace is recorded, then the state is renormalized: silently for drift
up to ``trace_silent``, with a warning up to ``trace_warn``, and beyond
that the run aborts with :class:`IntegrationError` carrying the failure
time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from kerrsim.fock import (
    BasisDescriptor,
    BasisMismatchError,
    OperatorMatrix,
    QuantumState,
)

CollapsePair = tuple[Union[OperatorMatrix, np.ndarray], float]

# target size for one integration batch, in stored complex numbers
_BATCH_BUDGET = 3_000_000


class IntegrationError(RuntimeError):
    """Integration aborted; ``time`` holds the failure time when known."""

    def __init__(self, message: str, time: Optional[float] = None):
        super().__init__(message)
        self.time = time


@dataclass
class EvolveConfig:
    rtol: float = 1e-9
    atol: float = 1e-11
    method: str = "DOP853"
    batch_size: Optional[int] = None
    store_states: bool = True
    check_positivity: bool = False
    trace_silent: float = 1e-8
    trace_warn: float = 1e-6
    max_step: Optional[float] = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: Optional[list[np.ndarray]]
    final_state: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    observables: dict[str, np.ndarray]
    min_eig: Optional[np.ndarray]
    basis: Optional[BasisDescriptor]


def _as_array(op: Union[OperatorMatrix, np.ndarray],
              basis: Optional[BasisDescriptor]) -> np.ndarray:
    if isinstance(op, OperatorMatrix):
        if basis is not None and op.basis != basis:
            raise BasisMismatchError("operator lives on a different basis")
        return op.entries
    return np.asarray(op, dtype=complex)


def _check_collapse(collapse: Sequence[CollapsePair],
                    basis: Optional[BasisDescriptor],
                    dim: int) -> list[tuple[np.ndarray, float]]:
    out = []
    for op, rate in collapse:
        if rate < 0:
            raise ValueError(f"collapse rate must be >= 0, got {rate}")
        mat = _as_array(op, basis)
        if mat.shape != (dim, dim):
            raise ValueError(f"collapse operator shape {mat.shape} != ({dim}, {dim})")
        if rate > 0:
            out.append((mat, float(rate)))
    return out


def lindblad_rhs(rho: np.ndarray, h: Union[OperatorMatrix, np.ndarray],
                 collapse: Sequence[CollapsePair] = ()) -> np.ndarray:
    """Dense right-hand side d rho / dt for one state. Reference form."""
    basis = h.basis if isinstance(h, OperatorMatrix) else None
    hm = _as_array(h, None)
    d = hm.shape[0]
    pairs = _check_collapse(collapse, basis, d)
    out = -1j * (hm @ rho - rho @ hm)
    for c, rate in pairs:
        cdc = c.conj().T @ c
        out += rate * (c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc))
    return out


def liouvillian(h: Union[OperatorMatrix, np.ndarray],
                collapse: Sequence[CollapsePair] = ()) -> sparse.csr_matrix:
    """Sparse generator acting on row-major vec(rho)."""
    basis = h.basis if isinstance(h, OperatorMatrix) else None
    hm = _as_array(h, None)
    d = hm.shape[0]
    pairs = _check_collapse(collapse, basis, d)
    eye = sparse.identity(d, dtype=complex, format="csr")
    hs = sparse.csr_matrix(hm)
    L = -1j * (sparse.kron(hs, eye, format="csr")
               - sparse.kron(eye, hs.T, format="csr"))
    for c, rate in pairs:
        cs = sparse.csr_matrix(c)
        cdc = (cs.conj().T @ cs).tocsr()
        L = L + rate * (
            sparse.kron(cs, cs.conj(), format="csr")
            - 0.5 * sparse.kron(cdc, eye, format="csr")
            - 0.5 * sparse.kron(eye, cdc.T, format="csr")
        )
    return L.tocsr()


def apply_trace_policy(rho: np.ndarray, t: float,
                       silent: float = 1e-8,
                       warn: float = 1e-6) -> tuple[np.ndarray, float]:
    """Renormalize a sampled state, escalating on trace drift.

    Returns (renormalized rho, raw trace). Drift within ``silent`` is
    absorbed quietly, within ``warn`` it renormalizes but warns, beyond
    that the sample is evidence of a broken integration and the run stops.
    """
    raw = float(np.trace(rho).real)
    drift = abs(raw - 1.0)
    if drift > warn:
        raise IntegrationError(
            f"trace drifted to {raw} at t={t} (|drift|={drift:.3e})", time=t
        )
    if drift > silent:
        warnings.warn(
            f"trace drift {drift:.3e} at t={t}; renormalizing",
            UserWarning,
            stacklevel=2,
        )
    return rho / raw, raw


def _default_batch(dim: int, n_times: int) -> int:
    return max(2, min(n_times, _BATCH_BUDGET // (dim * dim)))


def evolve(h: Union[OperatorMatrix, np.ndarray],
           state0: Union[QuantumState, np.ndarray],
           t_grid: np.ndarray,
           collapse: Sequence[CollapsePair] = (),
           observables: Optional[dict[str, Union[OperatorMatrix, np.ndarray]]] = None,
           config: Optional[EvolveConfig] = None,
           sample_fn: Optional[Callable[[float, np.ndarray], None]] = None,
           ) -> Trajectory:
    """Propagate a density matrix over t_grid under H and collapse channels.

    t_grid must be strictly increasing and non-negative; the initial state
    is defined at t=0, so a grid not starting at 0 simply skips early
    samples. Sampled states are renormalized per the trace policy and
    hermitized before observables, purity and callbacks see them.
    """
    cfg = config or EvolveConfig()
    basis = h.basis if isinstance(h, OperatorMatrix) else None
    hm = _as_array(h, None)
    d = hm.shape[0]

    if isinstance(state0, QuantumState):
        if basis is not None and state0.basis != basis:
            raise BasisMismatchError("initial state lives on a different basis")
        rho0 = state0.density()
    else:
        rho0 = np.asarray(state0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"state shape {rho0.shape} != ({d}, {d})")

    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if times[0] < 0:
        raise ValueError("t_grid must be non-negative")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ValueError("t_grid must be strictly increasing")

    obs_items: list[tuple[str, np.ndarray, bool]] = []
    for name, op in (observables or {}).items():
        mat = _as_array(op, basis if isinstance(op, OperatorMatrix) else None)
        herm = bool(np.allclose(mat, mat.conj().T, atol=1e-12))
        obs_items.append((name, mat, herm))

    L = liouvillian(h, collapse)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return L.dot(y)

    n = times.size
    states: Optional[list[np.ndarray]] = [] if cfg.store_states else None
    trace_out = np.empty(n)
    purity_out = np.empty(n)
    min_eig_out = np.empty(n) if cfg.check_positivity else None
    obs_out = {
        name: np.empty(n, dtype=float if herm else complex)
        for name, _, herm in obs_items
    }
    final_state: Optional[np.ndarray] = None

    def take_sample(k: int, t: float, yvec: np.ndarray):
        nonlocal final_state
        rho = yvec.reshape(d, d).copy()
        rho, raw = apply_trace_policy(rho, t, cfg.trace_silent, cfg.trace_warn)
        rho = 0.5 * (rho + rho.conj().T)
        trace_out[k] = raw
        purity_out[k] = np.einsum("ij,ji->", rho, rho).real
        if min_eig_out is not None:
            min_eig_out[k] = float(np.linalg.eigvalsh(rho)[0])
        for name, mat, herm in obs_items:
            val = np.einsum("ij,ji->", mat, rho)
            obs_out[name][k] = val.real if herm else val
        if sample_fn is not None:
            sample_fn(t, rho)
        if states is not None:
            states.append(rho)
        if k == n - 1:
            final_state = rho

    y = rho0.reshape(-1).astype(complex)
    t_cur = 0.0
    idx = 0
    if times[0] == 0.0:
        take_sample(0, 0.0, y)
        idx = 1
    batch = cfg.batch_size or _default_batch(d, n - idx)
    while idx < n:
        stop = min(idx + batch, n)
        chunk = times[idx:stop]
        sol = solve_ivp(
            rhs,
            (t_cur, chunk[-1]),
            y,
            t_eval=chunk,
            method=cfg.method,
            rtol=cfg.rtol,
            atol=cfg.atol,
            max_step=cfg.max_step if cfg.max_step is not None else np.inf,
        )
        if not sol.success:
            raise IntegrationError(
                f"integrator failed near t={t_cur}: {sol.message}", time=t_cur
            )
        for k, t_k in enumerate(chunk):
            take_sample(idx + k, t_k, sol.y[:, k])
        y = sol.y[:, -1]
        t_cur = chunk[-1]
        idx = stop

    assert final_state is not None
    return Trajectory(
        times=times,
        states=states,
        final_state=final_state,
        trace=trace_out,
        purity=purity_out,
        observables=obs_out,
        min_eig=min_eig_out,
        basis=basis,
    )


DIAGONAL_ATOL = 1e-12


def propagate_diagonal(h: Union[OperatorMatrix, np.ndarray],
                       vec0: np.ndarray,
                       t_grid: np.ndarray) -> np.ndarray:
    """Closed evolution of a pure state under a diagonal Hamiltonian.

    Returns an array of shape (len(t_grid), dim) with rows
    exp(-i E t) * vec0. Refuses Hamiltonians with off-diagonal weight;
    callers wanting the generic path must use :func:`evolve`.
    """
    hm = _as_array(h, None)
    off = hm - np.diag(np.diag(hm))
    if hm.shape[0] != hm.shape[1]:
        raise ValueError("Hamiltonian must be square")
    if np.max(np.abs(off)) > DIAGONAL_ATOL:
        raise ValueError("Hamiltonian is not diagonal; use evolve()")
    energies = np.diag(hm)
    if np.max(np.abs(energies.imag)) > DIAGONAL_ATOL:
        raise ValueError("diagonal entries must be real")
    vec0 = np.asarray(vec0, dtype=complex)
    if vec0.shape != (hm.shape[0],):
        raise ValueError(f"state shape {vec0.shape} != ({hm.shape[0]},)")
    times = np.asarray(t_grid, dtype=float)
    phases = np.exp(-1j * np.outer(times, energies.real))
    return phases * vec0[None, :]


def expectation(op: Union[OperatorMatrix, np.ndarray],
                state: Union[QuantumState, np.ndarray]):
    """tr(op rho); real for hermitian operators, complex otherwise."""
    rho = state.density() if isinstance(state, QuantumState) else np.asarray(state)
    if isinstance(op, OperatorMatrix):
        val = np.einsum("ij,ji->", op.entries, rho)
        return val.real if op.hermitian else val
    mat = np.asarray(op)
    val = np.einsum("ij,ji->", mat, rho)
    if np.allclose(mat, mat.conj().T, atol=1e-12):
        return val.real
    return val
