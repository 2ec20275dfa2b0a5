"""Truncated Fock-space linear algebra.

States and operators live on a :class:`FockRegister`, an ordered list of
labelled modes with per-mode truncation.  Amplitude vectors and density
matrices are stored densely in row-major order over the register, so mode 0
is the most significant index (the same convention as ``np.kron``).

Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import (
    DegenerateStateError,
    DomainError,
    InvalidDimensionError,
    InvalidPOVMError,
    LabelCollisionError,
    LabelError,
    NormalizationError,
    OutOfRangeError,
)

DEFAULT_CV_DIM = 24

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


def _frozen(a, dtype=complex) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FockRegister:
    """Ordered modes ``(label, dim)``; labels are unique and dims positive."""

    modes: tuple[tuple[str, int], ...]

    def __post_init__(self):
        modes = tuple((str(lbl), int(d)) for lbl, d in self.modes)
        labels = [m[0] for m in modes]
        if len(set(labels)) != len(labels):
            raise LabelCollisionError(f"duplicate mode labels in {labels}")
        for lbl, d in modes:
            if d < 1:
                raise InvalidDimensionError(f"mode {lbl!r} has dimension {d} < 1")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def of(cls, *modes: tuple[str, int]) -> "FockRegister":
        return cls(tuple(modes))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m[0] for m in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m[1] for m in self.modes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.modes else 1

    def __len__(self):
        return len(self.modes)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown mode label {label!r}; register has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lbl) for lbl in labels]

    def dim_of(self, label: str) -> int:
        return self.modes[self.index(label)][1]

    def concat(self, other: "FockRegister") -> "FockRegister":
        return FockRegister(self.modes + other.modes)

    def subset(self, labels: Iterable[str]) -> "FockRegister":
        """Sub-register with the given labels, kept in register order."""
        wanted = set(labels)
        for lbl in wanted:
            self.index(lbl)
        return FockRegister(tuple(m for m in self.modes if m[0] in wanted))

    def without(self, labels: Iterable[str]) -> "FockRegister":
        drop = set(labels)
        for lbl in drop:
            self.index(lbl)
        return FockRegister(tuple(m for m in self.modes if m[0] not in drop))

    def relabel(self, mapping: dict[str, str]) -> "FockRegister":
        return FockRegister(tuple((mapping.get(lbl, lbl), d) for lbl, d in self.modes))


@dataclass(frozen=True)
class ModeSplit:
    """Bipartition of a register; partial transposes act on ``subsystem_b``."""

    subsystem_a: frozenset[str]
    subsystem_b: frozenset[str]

    def __post_init__(self):
        a, b = frozenset(self.subsystem_a), frozenset(self.subsystem_b)
        if a & b:
            raise LabelCollisionError(f"split halves overlap on {sorted(a & b)}")
        object.__setattr__(self, "subsystem_a", a)
        object.__setattr__(self, "subsystem_b", b)

    @classmethod
    def of(cls, register: FockRegister, subsystem_b: Iterable[str]) -> "ModeSplit":
        b = frozenset(subsystem_b)
        for lbl in b:
            register.index(lbl)
        return cls(frozenset(register.labels) - b, b)

    def check(self, register: FockRegister) -> None:
        if self.subsystem_a | self.subsystem_b != frozenset(register.labels):
            raise LabelError(
                f"split {sorted(self.subsystem_a)}|{sorted(self.subsystem_b)} "
                f"does not partition {register.labels}"
            )


@dataclass(frozen=True)
class StateVector:
    register: FockRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != self.register.dim:
            raise InvalidDimensionError(
                f"{amps.size} amplitudes for a register of dimension {self.register.dim}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise DegenerateStateError("cannot normalize the zero vector")
        return StateVector(self.register, self.amplitudes / n)

    def dm(self) -> "DensityOperator":
        return DensityOperator(self.register, np.outer(self.amplitudes, self.amplitudes.conj()))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.register.dims)

    def relabel(self, mapping: dict[str, str]) -> "StateVector":
        return StateVector(self.register.relabel(mapping), self.amplitudes)

    def reorder(self, labels: Sequence[str]) -> "StateVector":
        """Same state with its modes permuted into ``labels`` order."""
        perm = self.register.indices(labels)
        if sorted(perm) != list(range(len(self.register))):
            raise LabelError(f"{labels} is not a permutation of {self.register.labels}")
        reg = FockRegister(tuple(self.register.modes[i] for i in perm))
        return StateVector(reg, np.transpose(self.tensor_view(), perm).reshape(-1))


@dataclass(frozen=True)
class DensityOperator:
    register: FockRegister
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.register.dim
        if m.shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {m.shape} for register dimension {n}")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityOperator":
        tr = self.trace
        if not tr > 0.0:
            raise DegenerateStateError(f"cannot normalize an operator with trace {tr:g}")
        return DensityOperator(self.register, self.matrix / tr)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(_hermitian_part(self.matrix))[0])

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def check(self, normalized: bool = True) -> None:
        """Raise if this is not a valid density operator within tolerance."""
        herm = self.hermiticity_error()
        if herm > HERMITIAN_TOL:
            raise NormalizationError(f"operator is not Hermitian (max |M - M^H| = {herm:.3g})")
        if normalized and abs(self.trace - 1.0) > TRACE_TOL:
            raise NormalizationError(f"trace {self.trace!r} differs from 1")
        lam = self.min_eigenvalue()
        if lam < -PSD_TOL:
            raise NormalizationError(f"operator has negative eigenvalue {lam:.3g}")

    def tensor_view(self) -> np.ndarray:
        dims = self.register.dims
        return self.matrix.reshape(dims + dims)

    def relabel(self, mapping: dict[str, str]) -> "DensityOperator":
        return DensityOperator(self.register.relabel(mapping), self.matrix)

    def reorder(self, labels: Sequence[str]) -> "DensityOperator":
        perm = self.register.indices(labels)
        if sorted(perm) != list(range(len(self.register))):
            raise LabelError(f"{labels} is not a permutation of {self.register.labels}")
        n = len(perm)
        reg = FockRegister(tuple(self.register.modes[i] for i in perm))
        t = np.transpose(self.tensor_view(), perm + [n + i for i in perm])
        return DensityOperator(reg, t.reshape(reg.dim, reg.dim))

    def ensemble(self, tol: float = 1e-14) -> list[StateVector]:
        """Spectral decomposition as unnormalized kets whose projectors sum to this operator.

        Eigenvalues at or below ``tol * max_eigenvalue`` are dropped; the
        discarded weight is bounded by ``dim * tol * max_eigenvalue``.
        """
        w, v = np.linalg.eigh(_hermitian_part(self.matrix))
        keep = w > tol * max(w[-1], 0.0)
        return [StateVector(self.register, v[:, k] * math.sqrt(w[k])) for k in np.flatnonzero(keep)[::-1]]

    @classmethod
    def from_ensemble(cls, kets: Sequence[StateVector]) -> "DensityOperator":
        if not kets:
            raise DegenerateStateError("empty ensemble")
        reg = kets[0].register
        amps = np.stack([k.amplitudes for k in kets], axis=1)
        return cls(reg, amps @ amps.conj().T)


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# --------------------------------------------------------------------------
# single-mode states and operators
# --------------------------------------------------------------------------

def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated-normalization coefficients e^{-|a|^2/2} a^n / sqrt(n!) for n < dim."""
    n = np.arange(dim)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_truncation_error(alpha: complex, dim: int) -> float:
    """Poisson weight of |alpha> beyond the truncation, 1 - sum_{n<dim} |c_n|^2."""
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def coherent_ket(alpha: complex, dim: int = DEFAULT_CV_DIM, label: str = "cv") -> StateVector:
    """Truncated coherent state, renormalized after truncation.

    The discarded tail is available from :func:`coherent_truncation_error`.
    """
    if dim < 2:
        raise InvalidDimensionError(f"coherent_ket needs dim >= 2, got {dim}")
    c = coherent_amplitudes(alpha, dim)
    return StateVector(FockRegister.of((label, dim)), c / np.linalg.norm(c))


def fock_ket(n: int, dim: int, label: str = "q") -> StateVector:
    if not 0 <= n < dim:
        raise OutOfRangeError(f"photon number {n} outside [0, {dim})")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(FockRegister.of((label, dim)), amps)


def thermal_populations(n_bar: float, dim: int) -> np.ndarray:
    """(1-x) x^n for n < dim with x = n_bar / (1 + n_bar), renormalized."""
    if n_bar < 0:
        raise DomainError(f"thermal occupation must be >= 0, got {n_bar}")
    if n_bar == 0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    x = n_bar / (1.0 + n_bar)
    p = (1.0 - x) * x ** np.arange(dim)
    return p / p.sum()


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>."""
    if a.register.dims != b.register.dims:
        raise InvalidDimensionError(f"dims {a.register.dims} vs {b.register.dims}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def state_fidelity(psi: StateVector, rho: DensityOperator) -> float:
    """<psi|rho|psi> for a normalized ket."""
    return float(np.real(np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes)))


# --------------------------------------------------------------------------
# tensor products and local application
# --------------------------------------------------------------------------

def tensor(states: Sequence[StateVector]) -> StateVector:
    if not states:
        raise InvalidDimensionError("tensor of an empty list")
    reg = states[0].register
    amps = states[0].amplitudes
    for s in states[1:]:
        reg = reg.concat(s.register)
        amps = np.kron(amps, s.amplitudes)
    return StateVector(reg, amps)


def tensor_rho(ops: Sequence[DensityOperator]) -> DensityOperator:
    if not ops:
        raise InvalidDimensionError("tensor of an empty list")
    reg = ops[0].register
    m = ops[0].matrix
    for o in ops[1:]:
        reg = reg.concat(o.register)
        m = np.kron(m, o.matrix)
    return DensityOperator(reg, m)


def _apply_axes(t: np.ndarray, op: np.ndarray, axes: Sequence[int], sub_dims: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op_t = op.reshape(tuple(sub_dims) * 2)
    out = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_to_ket(state: StateVector, op: np.ndarray, modes: Sequence[str]) -> StateVector:
    """Apply ``op`` (acting on ``modes`` in the given order) to a ket."""
    reg = state.register
    axes = reg.indices(modes)
    sub = [reg.dims[i] for i in axes]
    _check_op_shape(op, sub)
    t = _apply_axes(state.tensor_view(), op, axes, sub)
    return StateVector(reg, t.reshape(-1))


def apply_to_rho(rho: DensityOperator, op: np.ndarray, modes: Sequence[str], right: np.ndarray | None = None) -> DensityOperator:
    """op rho op^dagger on ``modes`` (or op rho right^dagger when ``right`` is given)."""
    reg = rho.register
    axes = reg.indices(modes)
    sub = [reg.dims[i] for i in axes]
    _check_op_shape(op, sub)
    n = len(reg)
    t = _apply_axes(rho.tensor_view(), op, axes, sub)
    r = op if right is None else right
    t = _apply_axes(t, r.conj(), [n + i for i in axes], sub)
    return DensityOperator(reg, t.reshape(reg.dim, reg.dim))


def _check_op_shape(op: np.ndarray, sub: Sequence[int]) -> None:
    d = int(np.prod(sub))
    if op.shape != (d, d):
        raise InvalidDimensionError(f"operator shape {op.shape} does not act on modes of dims {tuple(sub)}")


def embed(op: np.ndarray, modes: Sequence[str], register: FockRegister) -> np.ndarray:
    """Full-register matrix of a local operator (identity elsewhere); small registers only."""
    eye = np.eye(register.dim, dtype=complex)
    axes = register.indices(modes)
    sub = [register.dims[i] for i in axes]
    _check_op_shape(op, sub)
    t = eye.reshape(register.dims + (register.dim,))
    t = _apply_axes(t, op, axes, sub)
    return t.reshape(register.dim, register.dim)


# --------------------------------------------------------------------------
# Gaussian unitaries
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _beamsplitter_local(T: float, dim_i: int, dim_j: int) -> np.ndarray:
    a = np.kron(annihilation(dim_i), np.eye(dim_j))
    b = np.kron(np.eye(dim_i), annihilation(dim_j))
    theta = math.acos(math.sqrt(T))
    u = expm(theta * (a.conj().T @ b - a @ b.conj().T))
    u.setflags(write=False)
    return u


def beamsplitter_local(T: float, dim_i: int, dim_j: int) -> np.ndarray:
    """Two-mode beam-splitter unitary on (mode_i, mode_j) with transmittance ``T``.

    Coherent amplitudes map as (a, b) -> (sqrt(T) a + sqrt(1-T) b,
    -sqrt(1-T) a + sqrt(T) b).  The truncated generator conserves total
    photon number, so every block with fewer than min(dim_i, dim_j) photons
    is exact.
    """
    T = float(T)
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"transmittance {T} outside [0, 1]")
    return _beamsplitter_local(T, int(dim_i), int(dim_j))


def beamsplitter_unitary(T: float, mode_i: str, mode_j: str, register: FockRegister) -> np.ndarray:
    """Full-register beam-splitter matrix; see :func:`beamsplitter_local`."""
    if mode_i == mode_j:
        raise LabelError("beam splitter needs two distinct modes")
    u = beamsplitter_local(T, register.dim_of(mode_i), register.dim_of(mode_j))
    return embed(u, [mode_i, mode_j], register)


def displacement_op(beta: complex, dim: int = DEFAULT_CV_DIM) -> np.ndarray:
    """exp(beta a^dagger - beta^* a) with the generator truncated at ``dim``."""
    if dim < 2:
        raise InvalidDimensionError(f"displacement needs dim >= 2, got {dim}")
    a = annihilation(dim)
    return expm(complex(beta) * a.conj().T - complex(beta).conjugate() * a)


def phase_rotation(phi: float, dim: int) -> np.ndarray:
    return np.diag(np.exp(1j * phi * np.arange(dim)))


# --------------------------------------------------------------------------
# reductions, measurements, entanglement
# --------------------------------------------------------------------------

def partial_trace(rho: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    keep = list(keep)
    if not keep:
        raise LabelError("partial_trace needs at least one mode to keep")
    reg = rho.register
    kept_reg = reg.subset(keep)
    keep_ax = reg.indices(kept_reg.labels)
    drop_ax = [i for i in range(len(reg)) if i not in keep_ax]
    n = len(reg)
    dk, dd = kept_reg.dim, int(np.prod([reg.dims[i] for i in drop_ax], dtype=np.int64))
    t = np.transpose(rho.tensor_view(), keep_ax + drop_ax + [n + i for i in keep_ax] + [n + i for i in drop_ax])
    m = np.einsum("ijkj->ik", t.reshape(dk, dd, dk, dd))
    return DensityOperator(kept_reg, m)


def reduced_from_ket(state: StateVector, keep: Iterable[str]) -> DensityOperator:
    """tr_rest |psi><psi| without forming the full projector."""
    reg = state.register
    kept_reg = reg.subset(keep)
    keep_ax = reg.indices(kept_reg.labels)
    drop_ax = [i for i in range(len(reg)) if i not in keep_ax]
    m = np.transpose(state.tensor_view(), keep_ax + drop_ax).reshape(kept_reg.dim, -1)
    return DensityOperator(kept_reg, m @ m.conj().T)


def _psd_sqrt(element: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_hermitian_part(element))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def check_povm_element(element: np.ndarray, tol: float = 1e-9) -> None:
    if np.max(np.abs(element - element.conj().T), initial=0.0) > tol:
        raise InvalidPOVMError("POVM element is not Hermitian")
    w = np.linalg.eigvalsh(_hermitian_part(element))
    if w[0] < -tol:
        raise InvalidPOVMError(f"POVM element has negative eigenvalue {w[0]:.3g}")
    if w[-1] > 1.0 + tol:
        raise InvalidPOVMError(f"POVM element exceeds identity (max eigenvalue {w[-1]:.12g})")


def apply_povm_element(rho: DensityOperator, element: np.ndarray, modes: Sequence[str] | None = None) -> tuple[DensityOperator, float]:
    """Return (E^{1/2} rho E^{1/2}, tr(E rho)); the caller renormalizes.

    ``modes`` defaults to the whole register.  A zero probability marks a
    degenerate (unheralded) outcome.
    """
    modes = list(rho.register.labels if modes is None else modes)
    element = np.asarray(element, dtype=complex)
    check_povm_element(element)
    root = _psd_sqrt(element)
    out = apply_to_rho(rho, root, modes)
    prob = max(out.trace, 0.0)
    return out, prob


def partial_transpose(rho: DensityOperator, modes: Iterable[str]) -> np.ndarray:
    reg = rho.register
    ax = reg.indices(modes)
    n = len(reg)
    perm = list(range(2 * n))
    for i in ax:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    return np.transpose(rho.tensor_view(), perm).reshape(reg.dim, reg.dim)


def trace_norm_hermitian(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(_hermitian_part(m)))))


def log_negativity(rho: DensityOperator, split: ModeSplit | Iterable[str]) -> float:
    """log2 of the trace norm of the partial transpose over ``split.subsystem_b``."""
    if not isinstance(split, ModeSplit):
        split = ModeSplit.of(rho.register, split)
    split.check(rho.register)
    if abs(rho.trace - 1.0) > 1e-8:
        raise NormalizationError(f"log_negativity needs a normalized state, trace = {rho.trace!r}")
    en = math.log2(trace_norm_hermitian(partial_transpose(rho, split.subsystem_b)))
    if -1e-9 < en < 0.0:
        en = 0.0
    return en


def schmidt_log_negativity(state: StateVector, subsystem_a: Iterable[str]) -> float:
    """Pure-state E_N = log2 (sum_i sqrt(lambda_i))^2 from the Schmidt coefficients."""
    reg = state.register
    a_ax = reg.indices(reg.subset(subsystem_a).labels)
    b_ax = [i for i in range(len(reg)) if i not in a_ax]
    da = int(np.prod([reg.dims[i] for i in a_ax]))
    m = np.transpose(state.tensor_view(), a_ax + b_ax).reshape(da, -1)
    s = np.linalg.svd(m / np.linalg.norm(m), compute_uv=False)
    return max(0.0, 2.0 * math.log2(float(np.sum(s))))


def mean_photon_number(rho: DensityOperator | StateVector, modes: Iterable[str] | None = None) -> float:
    """Total <n> over ``modes`` (all modes by default)."""
    reg = rho.register
    modes = list(reg.labels if modes is None else modes)
    total = 0.0
    for m in modes:
        k = reg.index(m)
        n_axis = np.arange(reg.dims[k], dtype=float)
        if isinstance(rho, StateVector):
            probs = np.abs(rho.tensor_view()) ** 2
            marg = probs.sum(axis=tuple(i for i in range(len(reg)) if i != k))
        else:
            diag = np.real(np.diagonal(rho.matrix)).reshape(reg.dims)
            marg = diag.sum(axis=tuple(i for i in range(len(reg)) if i != k))
        total += float(n_axis @ marg)
    return total
