"""Entanglement-based QKD figures of merit and the thermal-noise fidelity argument."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .channels import _check_unit, pure_loss, thermal_loss
from .errors import DomainError, NoSolutionError, NonMonotoneError
from .fock import DEFAULT_CV_DIM, DensityOperator
from .links import distance_to_transmittance, transmittance_to_distance
from .states import HEStateSpec, make_he_state
from .swap import ProtocolParams, analytic_final_state, effective_logneg

ALPHA_GRID_STEP = 0.01
ALPHA_TOL = 1e-4
L_BRACKET = (0.0, 1000.0)
L_TOL = 0.01


def _xlog2x(v: float) -> float:
    return 0.0 if v <= 0.0 else v * math.log2(v)


def _detector_term(eta_d: float) -> float:
    """(2-eta_d) log2(2-eta_d) - (1-eta_d) log2(1-eta_d)."""
    return _xlog2x(2.0 - eta_d) - _xlog2x(1.0 - eta_d)


def mutual_information(eta_d: float) -> float:
    """I(A:B) in bits for DV detectors of efficiency ``eta_d``."""
    eta_d = _check_unit("eta_d", eta_d)
    return (2.0 - eta_d) - _detector_term(eta_d)


def holevo_bound(h: float, eta_d: float) -> float:
    """chi(A:E) in bits for coherence ``h`` and detector efficiency ``eta_d``.

    This is the closed form as is.  It turns negative when h is close to 1 and
    eta_d < 1; :func:`key_rate` clamps it at zero.
    """
    h = _check_unit("h", h)
    eta_d = _check_unit("eta_d", eta_d)
    return 1.0 - 0.5 * (_xlog2x(1.0 + h) + _xlog2x(1.0 - h)) - 0.5 * _detector_term(eta_d)


@dataclass(frozen=True)
class KeyRateBreakdown:
    I_AB: float
    chi_AE: float
    chi_raw: float
    P0: float
    h: float
    r_raw: float
    r: float


def key_rate(params: ProtocolParams) -> KeyRateBreakdown:
    res = analytic_final_state(params)
    i_ab = mutual_information(params.eta_d)
    chi_raw = holevo_bound(res.h, params.eta_d)
    # a Holevo quantity cannot be negative
    chi = max(0.0, chi_raw)
    raw = res.P0 * (i_ab - chi)
    return KeyRateBreakdown(I_AB=i_ab, chi_AE=chi, chi_raw=chi_raw, P0=res.P0, h=res.h, r_raw=raw, r=max(0.0, raw))


# --------------------------------------------------------------------------
# solvers
# --------------------------------------------------------------------------

def max_distance(r_target: float, alpha: float, params: ProtocolParams, xtol: float = L_TOL) -> float:
    """Largest total distance (km) at which the key rate still reaches ``r_target``.

    Bisection on L over [0, 1000] km using the unclamped rate; a coarse scan
    first checks that r - r_target changes sign exactly once.
    """
    if not r_target > 0.0:
        raise DomainError(f"r_target = {r_target} must be > 0")
    base = params.with_(alpha=float(alpha))

    def excess(L: float) -> float:
        return key_rate(base.with_distance(L)).r_raw - r_target

    lo, hi = L_BRACKET
    f_lo = excess(lo)
    if not f_lo > 0.0:
        raise NoSolutionError(f"r(L=0) = {f_lo + r_target:.6g} does not exceed r_target = {r_target:g}")
    if excess(hi) > 0.0:
        raise NoSolutionError(f"key rate still exceeds {r_target:g} at L = {hi:g} km")
    scan = np.array([excess(L) for L in np.linspace(lo, hi, 201)])
    flips = int(np.count_nonzero(np.diff(np.sign(scan)) != 0))
    if flips != 1:
        raise NonMonotoneError(f"r(L) - r_target changes sign {flips} times on [{lo}, {hi}] km")
    return float(optimize.bisect(excess, lo, hi, xtol=xtol))


@dataclass(frozen=True)
class AlphaOptimum:
    alpha: float
    value: float
    flat: bool = False


def _objective(objective: str | Callable[[float], float], params: ProtocolParams, r_target: float | None):
    if callable(objective):
        return objective
    if objective == "key_rate":
        return lambda a: key_rate(params.with_(alpha=a)).r
    if objective == "effective_logneg":
        return lambda a: effective_logneg(params.with_(alpha=a))
    if objective == "max_distance":
        if r_target is None:
            raise DomainError("objective 'max_distance' needs r_target")

        def reach(a: float) -> float:
            try:
                return max_distance(r_target, a, params, xtol=1e-7)
            except NoSolutionError:
                return 0.0

        return reach
    raise DomainError(f"unknown objective {objective!r}")


def optimize_alpha(
    objective: str | Callable[[float], float],
    params: ProtocolParams,
    alpha_range: tuple[float, float] = (0.01, 2.0),
    r_target: float | None = None,
) -> AlphaOptimum:
    """Maximize ``objective`` over alpha: 0.01 grid scan, then golden-section refinement to 1e-4.

    ``objective`` is "key_rate", "effective_logneg", "max_distance" (needs
    ``r_target``) or any callable of alpha.  Ties go to the smaller alpha.  An
    objective that is identically zero on the grid returns ``flat=True``.
    """
    lo, hi = map(float, alpha_range)
    if not (0.0 < lo <= hi <= 2.0):
        raise DomainError(f"alpha_range {alpha_range} must lie within (0, 2]")
    f = _objective(objective, params, r_target)
    if hi - lo < ALPHA_TOL:
        mid = 0.5 * (lo + hi)
        return AlphaOptimum(mid, float(f(mid)))
    count = int(round((hi - lo) / ALPHA_GRID_STEP)) + 1
    grid = np.linspace(lo, hi, max(count, 3))
    vals = np.array([f(a) for a in grid])
    if np.all(vals == 0.0):
        return AlphaOptimum(lo, 0.0, flat=True)
    i = int(np.argmax(vals))
    best_a, best_v = float(grid[i]), float(vals[i])
    if 0 < i < len(grid) - 1 and vals[i - 1] < best_v and vals[i + 1] < best_v:
        res = optimize.minimize_scalar(
            lambda a: -f(a),
            bracket=(grid[i - 1], grid[i], grid[i + 1]),
            method="golden",
            options={"xtol": ALPHA_TOL / max(best_a, 1e-12)},
        )
        a_ref = float(min(max(res.x, grid[i - 1]), grid[i + 1]))
        v_ref = float(f(a_ref))
        if v_ref > best_v:
            best_a, best_v = a_ref, v_ref
    return AlphaOptimum(best_a, best_v)


# --------------------------------------------------------------------------
# thermal-noise fidelity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseFidelityPoint:
    T: float
    x: float
    alpha: float
    F: float


def _thermal_x(n_bar: float) -> float:
    if not n_bar >= 0.0:
        raise DomainError(f"n_bar = {n_bar} must be >= 0")
    return n_bar / (1.0 + n_bar)


def channel_fidelity(T: float, n_bar: float, alpha: float) -> float:
    """Trace-overlap fidelity between loss-only and loss+thermal-noise transmission of two HE pairs."""
    T = _check_unit("T", T)
    x = _thermal_x(n_bar)
    a2 = abs(alpha) ** 2
    return math.exp(-2.0 * T * x * (1.0 - T) * a2 / (1.0 - T * x)) * ((1.0 - x) / (1.0 - T * x)) ** 2


def channel_fidelity_point(T: float, n_bar: float, alpha: float) -> NoiseFidelityPoint:
    return NoiseFidelityPoint(T=T, x=_thermal_x(n_bar), alpha=alpha, F=channel_fidelity(T, n_bar, alpha))


def channel_fidelity_exact(T: float, n_bar: float, alpha: float) -> float:
    """Exact two-pair overlap of the coherence-restored outputs (see :func:`channel_fidelity_oracle`).

    Per pair: (1-y)(1+e^{-2k})/2 with y = x(1-T)/(1-Tx), k = T x (1-T) alpha^2/(1-Tx).
    The closed form of :func:`channel_fidelity` is ((1-y) e^{-k})^2, which agrees
    to second order in k.
    """
    T = _check_unit("T", T)
    x = _thermal_x(n_bar)
    y = x * (1.0 - T) / (1.0 - T * x)
    k = T * x * (1.0 - T) * abs(alpha) ** 2 / (1.0 - T * x)
    return ((1.0 - y) * (1.0 + math.exp(-2.0 * k)) / 2.0) ** 2


@dataclass(frozen=True)
class FidelityOracleResult:
    overlap: float
    normalized_overlap: float
    coherence_restored_overlap: float
    purity_loss: float
    purity_noise: float


def _scale_dv_coherence(rho: DensityOperator, factor: float) -> DensityOperator:
    d = rho.register.dims[1]
    m = np.array(rho.matrix).reshape(2, d, 2, d)
    m[0, :, 1, :] *= factor
    m[1, :, 0, :] *= factor
    return DensityOperator(rho.register, m.reshape(2 * d, 2 * d))


def channel_fidelity_oracle(T: float, n_bar: float, alpha: float, cv_dim: int = DEFAULT_CV_DIM) -> FidelityOracleResult:
    """Fock-space overlaps between loss-only and loss+noise transmission of two HE pairs.

    The two pairs are independent, so every four-mode trace is the square of
    the corresponding single-pair trace.

    ``overlap`` is tr[rho_1 rho_2] of the physical channel outputs and
    ``normalized_overlap`` divides it by sqrt(tr rho_1^2 tr rho_2^2).
    ``coherence_restored_overlap`` first undoes the damping of the DV
    coherence that the environment imprints: by e^{2(1-T) alpha^2} for pure loss
    (which makes the loss-only output the pure HE state at sqrt(T) alpha) and by
    e^{2(1-c) alpha^2}, c = T(1-x)/(1-Tx), for the thermal channel.  The
    closed form :func:`channel_fidelity` describes this last quantity.
    """
    T = _check_unit("T", T)
    x = _thermal_x(n_bar)
    he = make_he_state(HEStateSpec(abs(alpha), cv_dim), "a", "b").dm()
    rho_l = pure_loss(he, "b", T)
    rho_n = thermal_loss(he, "b", T, n_bar)
    a2 = abs(alpha) ** 2

    def tr_prod(r1: DensityOperator, r2: DensityOperator) -> float:
        return float(np.real(np.vdot(r1.matrix, r2.matrix)))

    ov = tr_prod(rho_l, rho_n)
    pl, pn = tr_prod(rho_l, rho_l), tr_prod(rho_n, rho_n)
    c = T * (1.0 - x) / (1.0 - T * x)
    rl = _scale_dv_coherence(rho_l, math.exp(2.0 * (1.0 - T) * a2))
    rn = _scale_dv_coherence(rho_n, math.exp(2.0 * (1.0 - c) * a2))
    restored = tr_prod(rl, rn)
    return FidelityOracleResult(
        overlap=ov**2,
        normalized_overlap=(ov / math.sqrt(pl * pn)) ** 2,
        coherence_restored_overlap=restored**2,
        purity_loss=pl**2,
        purity_noise=pn**2,
    )


__all__ = [
    "AlphaOptimum",
    "FidelityOracleResult",
    "KeyRateBreakdown",
    "NoiseFidelityPoint",
    "channel_fidelity",
    "channel_fidelity_exact",
    "channel_fidelity_oracle",
    "channel_fidelity_point",
    "distance_to_transmittance",
    "holevo_bound",
    "key_rate",
    "max_distance",
    "mutual_information",
    "optimize_alpha",
    "transmittance_to_distance",
]
