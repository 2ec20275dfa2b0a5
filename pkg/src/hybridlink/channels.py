"""Bosonic channels and detector models on truncated Fock registers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidDimensionError, TruncationWarning
from .fock import (
    DensityOperator,
    apply_to_rho,
    beamsplitter_local,
    thermal_populations,
)

THERMAL_TAIL_TOL = 1e-12


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} = {value} outside [0, 1]")
    return value


@dataclass(frozen=True)
class ChannelSpec:
    T: float
    n_bar: float = 0.0

    def __post_init__(self):
        _check_unit("T", self.T)
        if not self.n_bar >= 0.0:
            raise DomainError(f"n_bar = {self.n_bar} must be >= 0")

    @property
    def x(self) -> float:
        return self.n_bar / (1.0 + self.n_bar)

    @property
    def R(self) -> float:
        return 1.0 - self.T


@dataclass(frozen=True)
class DetectorSpec:
    eta_onoff: float = 0.8
    eta_homodyne: float = 0.55
    eta_dv: float = 1.0

    def __post_init__(self):
        _check_unit("eta_onoff", self.eta_onoff)
        _check_unit("eta_homodyne", self.eta_homodyne)
        _check_unit("eta_dv", self.eta_dv)


# --------------------------------------------------------------------------
# loss channels
# --------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _loss_kraus(T: float, dim: int, env_dim: int, n_bar: float) -> np.ndarray:
    """Kraus operators of the beam-splitter dilation, shape (n_ops, dim, dim).

    The mode enters port one and an environment prepared in a thermal state
    (vacuum when n_bar = 0) enters port two; the environment output is traced.
    """
    u = beamsplitter_local(T, dim, env_dim).reshape(dim, env_dim, dim, env_dim)
    pops = thermal_populations(n_bar, env_dim)
    ops = []
    for m in np.flatnonzero(pops > 0.0):
        for k in range(env_dim):
            a = math.sqrt(pops[m]) * u[:, k, :, m]
            if np.any(a):
                ops.append(a)
    out = np.stack(ops)
    out.setflags(write=False)
    return out


def apply_kraus(rho: DensityOperator, kraus: np.ndarray, mode: str) -> DensityOperator:
    reg = rho.register
    k = reg.index(mode)
    n = len(reg)
    t = rho.tensor_view()
    acc = np.zeros_like(t)
    for a in kraus:
        s = np.moveaxis(np.tensordot(a, t, axes=(1, k)), 0, k)
        s = np.moveaxis(np.tensordot(a.conj(), s, axes=(1, n + k)), 0, n + k)
        acc += s
    return DensityOperator(reg, acc.reshape(reg.dim, reg.dim))


def loss_kraus(T: float, dim: int, n_bar: float = 0.0, env_dim: int | None = None) -> np.ndarray:
    T = _check_unit("T", T)
    if n_bar < 0:
        raise DomainError(f"n_bar = {n_bar} must be >= 0")
    env_dim = dim if env_dim is None else int(env_dim)
    if n_bar > 0:
        x = n_bar / (1.0 + n_bar)
        if x ** env_dim >= THERMAL_TAIL_TOL:
            warnings.warn(
                f"thermal ancilla with n_bar={n_bar} truncated at {env_dim} levels leaves "
                f"tail weight ~{x ** env_dim:.2e}",
                TruncationWarning,
                stacklevel=3,
            )
    return _loss_kraus(T, int(dim), env_dim, float(n_bar))


def pure_loss(rho: DensityOperator, mode: str, T: float) -> DensityOperator:
    """Mix ``mode`` with vacuum on a beam splitter of transmittance T and discard the reflection."""
    dim = rho.register.dim_of(mode)
    return apply_kraus(rho, loss_kraus(T, dim), mode)


def thermal_loss(rho: DensityOperator, mode: str, T: float, n_bar: float, env_dim: int | None = None) -> DensityOperator:
    """As :func:`pure_loss` with a thermal environment of mean occupation ``n_bar``.

    The environment is truncated at ``env_dim`` levels (the mode's dim by
    default); a :class:`TruncationWarning` is raised if x^env_dim >= 1e-12.
    """
    dim = rho.register.dim_of(mode)
    return apply_kraus(rho, loss_kraus(T, dim, n_bar, env_dim), mode)


# --------------------------------------------------------------------------
# detectors
# --------------------------------------------------------------------------

def onoff_povm(eta: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """(E_noclick, E_click) of an on-off detector with efficiency ``eta``."""
    eta = _check_unit("eta", eta)
    if dim < 1:
        raise InvalidDimensionError(f"dim {dim} < 1")
    noclick = np.diag((1.0 - eta) ** np.arange(dim)).astype(complex)
    click = np.eye(dim, dtype=complex) - noclick
    return noclick, click


def homodyne_kernel(p: float, dim: int, convention: str = "coherent") -> np.ndarray:
    """Fock coefficients k_n = <P=p|n> of the momentum-quadrature bra.

    ``convention="coherent"`` reproduces the coherent-state kernel
    <P|alpha> = pi^{-1/4} exp(-p^2/2 - alpha^2 - i sqrt(2) alpha p) (real alpha),
    i.e. k_n = pi^{-1/4} e^{-p^2/2} H_n(-ip) / sqrt(2^n n!).
    ``convention="standard"`` gives the normalized eigenfunction of
    P = (a - a^dagger)/(i sqrt 2): k_n = pi^{-1/4} e^{-p^2/2} (-i)^n H_n(p) / sqrt(2^n n!).
    Both are evaluated with the normalized three-term Hermite recurrence.
    """
    if dim < 1:
        raise InvalidDimensionError(f"dim {dim} < 1")
    if convention == "coherent":
        z, phase = -1j * p, np.ones(dim)
    elif convention == "standard":
        z, phase = complex(p), (-1j) ** np.arange(dim)
    else:
        raise DomainError(f"unknown homodyne convention {convention!r}")
    k = np.empty(dim, dtype=complex)
    k[0] = math.pi ** -0.25 * math.exp(-0.5 * p * p)
    if dim > 1:
        k[1] = math.sqrt(2.0) * z * k[0]
    for n in range(1, dim - 1):
        k[n + 1] = math.sqrt(2.0 / (n + 1)) * z * k[n] - math.sqrt(n / (n + 1)) * k[n - 1]
    return k * phase


def homodyne_project(
    rho: DensityOperator,
    mode: str,
    p: float,
    eta: float = 1.0,
    convention: str = "coherent",
) -> tuple[DensityOperator, float]:
    """Inefficient P-quadrature projection of ``mode`` at outcome ``p``.

    Inefficiency is a pure-loss beam splitter of transmittance ``eta`` before
    an ideal projection.  Returns the unnormalized conditional operator on the
    remaining modes and its trace (the outcome density in the chosen kernel
    convention).
    """
    eta = _check_unit("eta", eta)
    reg = rho.register
    if len(reg) < 2:
        raise InvalidDimensionError("homodyne_project needs at least one mode left over")
    if eta < 1.0:
        rho = pure_loss(rho, mode, eta)
    k = reg.index(mode)
    n = len(reg)
    kern = homodyne_kernel(p, reg.dims[k], convention)
    t = np.tensordot(kern, rho.tensor_view(), axes=(0, k))
    t = np.tensordot(kern.conj(), t, axes=(0, n - 1 + k))
    rest = reg.without([mode])
    out = DensityOperator(rest, t.reshape(rest.dim, rest.dim))
    return out, out.trace


def detector_click_probability_bs(rho: DensityOperator, mode: str, eta: float) -> float:
    """Click probability via the beam-splitter model: loss eta, then an ideal on-off detector."""
    lossy = pure_loss(rho, mode, eta)
    reg = lossy.register
    vac = np.zeros(reg.dim_of(mode), dtype=complex)
    vac[0] = 1.0
    proj = np.outer(vac, vac)
    out = apply_to_rho(lossy, proj, [mode])
    return 1.0 - out.trace


__all__ = [
    "ChannelSpec",
    "DetectorSpec",
    "apply_kraus",
    "detector_click_probability_bs",
    "homodyne_kernel",
    "homodyne_project",
    "loss_kraus",
    "onoff_povm",
    "pure_loss",
    "thermal_loss",
]
