"""Truncated Fock-space operators, states, and fidelity functionals.

Every mode keeps the Fock levels |0>, ..., |dim-1|. Multimode objects are
built on a :class:`BasisDescriptor` that fixes the mode order once and for
all: the first label is the leftmost Kronecker factor. Truncation defects
(e.g. [a, a+] differing from 1 in the top diagonal entry) are accepted as
such, never patched; convergence is probed by re-running with larger dims.

Operator storage is dense complex128. The systems this package targets stay
well below a few hundred total dimensions, where dense is the hot path; the
evolution engine builds sparse superoperators internally where sparsity
actually pays off.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Union

import numpy as np

# Construction-time tolerance for the hermitian flag on operators.
HERMITIAN_ATOL = 1e-12
# Norm / trace / hermiticity tolerance for state validation.
STATE_ATOL = 1e-10
# Tolerated negative eigenvalue when a density matrix is explicitly checked.
POSITIVITY_ATOL = 1e-8


class DimensionError(ValueError):
    """Invalid Fock truncation or mismatched matrix shape."""


class BasisMismatchError(ValueError):
    """Two objects built on different bases were combined."""


@dataclass(frozen=True)
class BasisDescriptor:
    """Ordered set of modes spanning a Kronecker-product space.

    dims[i] is the Fock truncation of the mode named labels[i]; the first
    label is the leftmost (slowest-varying) tensor factor.
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.dims) != len(self.labels):
            raise DimensionError(
                f"{len(self.dims)} dims for {len(self.labels)} labels"
            )
        if len(self.dims) == 0:
            raise DimensionError("empty basis")
        if any(d < 2 for d in self.dims):
            raise DimensionError(f"every mode needs dim >= 2, got {self.dims}")
        if len(set(self.labels)) != len(self.labels):
            raise DimensionError(f"duplicate mode labels in {self.labels}")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def axis(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise BasisMismatchError(
                f"no mode {label!r} in basis {self.labels}"
            ) from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.axis(label)]

    def index_of(self, occupations: Sequence[int]) -> int:
        """Flat index of the product Fock state |n_1, n_2, ...>."""
        if len(occupations) != self.n_modes:
            raise DimensionError(
                f"{len(occupations)} occupation numbers for {self.n_modes} modes"
            )
        for n, d, lab in zip(occupations, self.dims, self.labels):
            if not 0 <= n < d:
                raise DimensionError(f"occupation {n} out of range for {lab} (dim {d})")
        return int(np.ravel_multi_index(tuple(occupations), self.dims))


def _as_square(entries: np.ndarray, dim: int) -> np.ndarray:
    arr = np.asarray(entries, dtype=complex)
    if arr.shape != (dim, dim):
        raise DimensionError(f"expected {(dim, dim)} matrix, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense operator tagged with its basis and a hermitian flag.

    The flag is computed once at construction (max |M - M+| <= 1e-12) and
    carried through; arithmetic between operators on different bases raises
    BasisMismatchError. Entries are frozen (non-writeable view).
    """

    basis: BasisDescriptor
    entries: np.ndarray
    hermitian: bool

    @classmethod
    def create(cls, basis: BasisDescriptor, entries: np.ndarray) -> "OperatorMatrix":
        arr = _as_square(entries, basis.total_dim).copy()
        herm = bool(np.max(np.abs(arr - arr.conj().T)) <= HERMITIAN_ATOL)
        arr.setflags(write=False)
        return cls(basis=basis, entries=arr, hermitian=herm)

    def _check(self, other: "OperatorMatrix") -> None:
        if self.basis != other.basis:
            raise BasisMismatchError(
                f"operator bases differ: {self.basis.labels} vs {other.basis.labels}"
            )

    def dag(self, other=None) -> "OperatorMatrix":
        return OperatorMatrix.create(self.basis, self.entries.conj().T)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix.create(self.basis, self.entries @ other.entries)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix.create(self.basis, self.entries + other.entries)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check(other)
        return OperatorMatrix.create(self.basis, self.entries - other.entries)

    def __mul__(self, scalar: complex) -> "OperatorMatrix":
        return OperatorMatrix.create(self.basis, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "OperatorMatrix":
        return OperatorMatrix.create(self.basis, -self.entries)


# ---------------------------------------------------------------------------
# single-mode primitives (plain arrays, scqubits-style)

def ladder_lower(dim: int) -> np.ndarray:
    """Annihilation operator on a dim-level mode: a|n> = sqrt(n)|n-1>."""
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def ladder_raise(dim: int) -> np.ndarray:
    return ladder_lower(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def identity_op(dim: int) -> np.ndarray:
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    return np.eye(dim, dtype=complex)


def embed(mat: np.ndarray, basis: BasisDescriptor, label: str) -> OperatorMatrix:
    """Embed a single-mode operator at the slot named `label`.

    The result acts as `mat` on that mode and as the identity on every
    other mode, with Kronecker order given by the basis label order.
    """
    axis = basis.axis(label)
    mat = _as_square(mat, basis.dims[axis])
    factors = [
        mat if i == axis else identity_op(d) for i, d in enumerate(basis.dims)
    ]
    return OperatorMatrix.create(basis, reduce(np.kron, factors))


def annihilator(basis: BasisDescriptor, label: str) -> OperatorMatrix:
    return embed(ladder_lower(basis.dim_of(label)), basis, label)


def number(basis: BasisDescriptor, label: str) -> OperatorMatrix:
    return embed(number_op(basis.dim_of(label)), basis, label)


def identity(basis: BasisDescriptor) -> OperatorMatrix:
    return OperatorMatrix.create(basis, np.eye(basis.total_dim, dtype=complex))


# ---------------------------------------------------------------------------
# states

@dataclass(frozen=True)
class QuantumState:
    """Pure vector or density matrix on a tagged basis.

    Pure states must be normalized to 1e-10; density matrices must have
    unit trace and be hermitian to 1e-10. Positivity is not verified at
    construction (it costs a full eigendecomposition); call
    :meth:`assert_positive` where the check matters.
    """

    basis: BasisDescriptor
    data: np.ndarray
    pure: bool

    @classmethod
    def from_vector(cls, basis: BasisDescriptor, vec: np.ndarray) -> "QuantumState":
        arr = np.asarray(vec, dtype=complex).reshape(-1)
        if arr.shape[0] != basis.total_dim:
            raise DimensionError(
                f"vector length {arr.shape[0]} != basis dim {basis.total_dim}"
            )
        nrm = float(np.linalg.norm(arr))
        if abs(nrm - 1.0) > STATE_ATOL:
            raise ValueError(f"pure state norm {nrm} deviates from 1 beyond {STATE_ATOL}")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(basis=basis, data=arr, pure=True)

    @classmethod
    def from_density(cls, basis: BasisDescriptor, mat: np.ndarray) -> "QuantumState":
        arr = _as_square(mat, basis.total_dim).copy()
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > STATE_ATOL:
            raise ValueError(f"density trace {tr} deviates from 1 beyond {STATE_ATOL}")
        if np.max(np.abs(arr - arr.conj().T)) > STATE_ATOL:
            raise ValueError("density matrix not hermitian within 1e-10")
        arr.setflags(write=False)
        return cls(basis=basis, data=arr, pure=False)

    def density(self) -> np.ndarray:
        """Dense density matrix regardless of the stored form."""
        if self.pure:
            return np.outer(self.data, self.data.conj())
        return np.asarray(self.data)

    def vector(self) -> np.ndarray:
        if not self.pure:
            raise ValueError("state is not stored as a pure vector")
        return np.asarray(self.data)

    def assert_positive(self, atol: float = POSITIVITY_ATOL) -> None:
        w = np.linalg.eigvalsh(self.density())
        if w[0] < -atol:
            raise ValueError(f"density matrix has eigenvalue {w[0]} < -{atol}")

    def purity(self) -> float:
        if self.pure:
            return 1.0
        rho = self.density()
        return float(np.real(np.trace(rho @ rho)))


def basis_ket(basis: BasisDescriptor, occupations: Sequence[int]) -> QuantumState:
    vec = np.zeros(basis.total_dim, dtype=complex)
    vec[basis.index_of(occupations)] = 1.0
    return QuantumState.from_vector(basis, vec)


def product_vector(basis: BasisDescriptor, factors: Sequence[np.ndarray]) -> QuantumState:
    """Pure product state from one amplitude vector per mode (basis order)."""
    if len(factors) != basis.n_modes:
        raise DimensionError(f"{len(factors)} factors for {basis.n_modes} modes")
    parts = []
    for f, d in zip(factors, basis.dims):
        arr = np.asarray(f, dtype=complex).reshape(-1)
        if arr.shape[0] != d:
            raise DimensionError(f"factor length {arr.shape[0]} != mode dim {d}")
        parts.append(arr)
    vec = reduce(np.kron, parts)
    vec = vec / np.linalg.norm(vec)
    return QuantumState.from_vector(basis, vec)


def thermal_weights(n_th: float, dim: int) -> np.ndarray:
    """Truncated geometric occupation probabilities, renormalized.

    p_n proportional to (n_th / (1 + n_th))**n; n_th = 0 collapses to the
    ground state.
    """
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    if dim < 2:
        raise DimensionError(f"need dim >= 2, got {dim}")
    if n_th == 0:
        w = np.zeros(dim)
        w[0] = 1.0
        return w
    q = n_th / (1.0 + n_th)
    w = q ** np.arange(dim, dtype=float)
    return w / w.sum()


def thermal_state(n_th: float, dim: int, label: str = "osc") -> QuantumState:
    basis = BasisDescriptor((dim,), (label,))
    return QuantumState.from_density(basis, np.diag(thermal_weights(n_th, dim)))


def product_density(basis: BasisDescriptor, factors: Sequence[np.ndarray]) -> QuantumState:
    """Density product state from one density matrix per mode (basis order)."""
    if len(factors) != basis.n_modes:
        raise DimensionError(f"{len(factors)} factors for {basis.n_modes} modes")
    parts = []
    for f, d in zip(factors, basis.dims):
        parts.append(_as_square(f, d))
    return QuantumState.from_density(basis, reduce(np.kron, parts))


# ---------------------------------------------------------------------------
# functionals

def fidelity_pure_vs_density(psi: QuantumState, rho: QuantumState) -> float:
    """F = sqrt(<psi| rho |psi>) for a pure target psi and any state rho."""
    if psi.basis != rho.basis:
        raise BasisMismatchError("fidelity operands live on different bases")
    if not psi.pure:
        raise ValueError("target of fidelity_pure_vs_density must be pure")
    vec = psi.vector()
    if rho.pure:
        val = abs(np.vdot(vec, rho.vector())) ** 2
    else:
        val = float(np.real(np.vdot(vec, rho.density() @ vec)))
    return float(np.sqrt(max(val, 0.0)))


def overlap_with_pure(vec: np.ndarray, rho: np.ndarray) -> float:
    """<psi|rho|psi> for raw arrays, clipped at 0. Internal fast path."""
    return max(float(np.real(np.vdot(vec, rho @ vec))), 0.0)


def ptrace_matrix(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a raw density matrix, keeping the given axes.

    Kept axes retain their original relative order.
    """
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    keep = sorted(int(k) for k in keep)
    if any(k < 0 or k >= n for k in keep) or len(set(keep)) != len(keep):
        raise DimensionError(f"bad axes {keep} for {n} modes")
    d_total = int(np.prod(dims))
    rho = _as_square(np.asarray(rho), d_total)
    tens = rho.reshape(dims + dims)
    traced = [ax for ax in range(n) if ax not in keep]
    # trace out highest axes first so earlier axis indices stay valid
    for ax in sorted(traced, reverse=True):
        tens = np.trace(tens, axis1=ax, axis2=ax + (tens.ndim // 2))
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return tens.reshape(d_keep, d_keep)


def partial_trace(state: QuantumState, keep_labels: Iterable[str]) -> QuantumState:
    """Reduce a state to the named modes (density output, label order kept)."""
    keep_labels = list(keep_labels)
    if not keep_labels:
        raise DimensionError("must keep at least one mode")
    axes = [state.basis.axis(lab) for lab in keep_labels]
    if sorted(axes) != axes:
        raise BasisMismatchError(
            "keep labels must appear in basis order; "
            f"got {keep_labels} on {state.basis.labels}"
        )
    reduced = ptrace_matrix(state.density(), state.basis.dims, axes)
    sub = BasisDescriptor(
        tuple(state.basis.dims[a] for a in axes),
        tuple(state.basis.labels[a] for a in axes),
    )
    # round off the tiny anti-hermitian dust a chain of kron/trace ops leaves
    reduced = 0.5 * (reduced + reduced.conj().T)
    return QuantumState.from_density(sub, reduced)


Matrix = Union[np.ndarray, OperatorMatrix]
