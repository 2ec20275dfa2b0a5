"""Hybrid entangled (HE) states: construction, generation circuit and lossy analytic form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import poisson

from .errors import DomainError, InvalidDimensionError, OutOfRangeError, TruncationError
from .fock import (
    DEFAULT_CV_DIM,
    DensityOperator,
    FockRegister,
    StateVector,
    annihilation,
    apply_to_rho,
    apply_to_ket,
    beamsplitter_local,
    coherent_amplitudes,
    coherent_ket,
    displacement_op,
    fock_ket,
    log_negativity,
    tensor,
)

DV_DIM = 2
TRUNCATION_TOL = 1e-10


@dataclass(frozen=True)
class HEStateSpec:
    alpha: float
    cv_dim: int = DEFAULT_CV_DIM
    dv_dim: int = DV_DIM

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise DomainError(f"alpha = {self.alpha} must be >= 0")
        if self.dv_dim != DV_DIM:
            raise InvalidDimensionError(f"dv_dim must be {DV_DIM}, got {self.dv_dim}")
        if self.cv_dim < 2:
            raise InvalidDimensionError(f"cv_dim must be >= 2, got {self.cv_dim}")


def make_he_state(spec: HEStateSpec | float, dv: str = "a", cv: str = "b") -> StateVector:
    """(|0>|alpha> + |1>|-alpha>)/sqrt(2) on modes (dv, cv)."""
    if not isinstance(spec, HEStateSpec):
        spec = HEStateSpec(float(spec))
    plus = tensor([fock_ket(0, DV_DIM, dv), coherent_ket(spec.alpha, spec.cv_dim, cv)])
    minus = tensor([fock_ket(1, DV_DIM, dv), coherent_ket(-spec.alpha, spec.cv_dim, cv)])
    return StateVector(plus.register, (plus.amplitudes + minus.amplitudes) / math.sqrt(2.0))


def he_schmidt_logneg(alpha: float) -> float:
    """Closed-form E_N of the pure HE state from its Schmidt values (1 +- e^{-2 alpha^2})/2."""
    s = math.exp(-2.0 * alpha * alpha)
    lp, lm = (1.0 + s) / 2.0, (1.0 - s) / 2.0
    return math.log2((math.sqrt(lp) + math.sqrt(lm)) ** 2)


# --------------------------------------------------------------------------
# lossy HE state in a two-dimensional CV embedding
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LossyHEState:
    """HE state after loss R on the CV mode.

    ``gram_matrix`` is 4x4 in the basis {|0>,|1>} (x) {u0, u1}, where u0 = |beta>
    and u1 is the Gram-Schmidt partner making |-beta> = s u0 + sqrt(1-s^2) u1,
    with beta = sqrt(1-R) alpha and s = exp(-2 beta^2).
    """

    alpha: float
    R: float
    gram_matrix: np.ndarray = field(repr=False)

    @property
    def coherence_damping(self) -> float:
        return math.exp(-2.0 * self.R * self.alpha**2)

    def density_operator(self, dv: str = "a", cv: str = "b") -> DensityOperator:
        return DensityOperator(FockRegister.of((dv, 2), (cv, 2)), self.gram_matrix)


def lossy_he_analytic(alpha: float, R: float) -> LossyHEState:
    if not 0.0 <= R <= 1.0:
        raise DomainError(f"loss fraction R = {R} outside [0, 1]")
    if not alpha >= 0.0:
        raise DomainError(f"alpha = {alpha} must be >= 0")
    beta2 = (1.0 - R) * alpha * alpha
    s = math.exp(-2.0 * beta2)
    # 1 - s^2 without cancellation at small beta
    c = math.sqrt(-math.expm1(-4.0 * beta2))
    v_plus = np.array([1.0, 0.0])
    v_minus = np.array([s, c])
    damping = math.exp(-2.0 * R * alpha * alpha)
    e00 = np.diag([1.0, 0.0])
    e11 = np.diag([0.0, 1.0])
    e01 = np.array([[0.0, 1.0], [0.0, 0.0]])
    m = 0.5 * (
        np.kron(e00, np.outer(v_plus, v_plus))
        + np.kron(e11, np.outer(v_minus, v_minus))
        + damping * (np.kron(e01, np.outer(v_plus, v_minus)) + np.kron(e01.T, np.outer(v_minus, v_plus)))
    )
    m = m.astype(complex)
    m.setflags(write=False)
    return LossyHEState(float(alpha), float(R), m)


def lossy_he_logneg(alpha: float, R: float) -> float:
    st = lossy_he_analytic(alpha, R)
    return log_negativity(st.density_operator(), ["b"])


# --------------------------------------------------------------------------
# generation circuit
# --------------------------------------------------------------------------

def _addition_figure_of_merit(g: float, alpha: float, dim: int) -> float:
    """|<g alpha| b^dagger |alpha>|^2 / <alpha| b b^dagger |alpha>."""
    bdag = annihilation(dim).conj().T
    ket = coherent_amplitudes(alpha, dim)
    added = bdag @ ket
    target = coherent_amplitudes(g * alpha, dim)
    return float(abs(np.vdot(target, added)) ** 2 / np.vdot(added, added).real)


def amplification_factor(alpha: float, dim: int | None = None, tol: float = 1e-6) -> float:
    """Gain g that best approximates the photon-added state b^dagger|alpha> by |g alpha>.

    Grid scan over g in [1, 1 + 6/alpha] followed by golden-section refinement.
    """
    if not alpha > 0.0:
        raise DomainError(f"amplification factor needs alpha > 0, got {alpha}")
    g_hi = 1.0 + 6.0 / alpha
    if dim is None:
        # room for |g alpha|^2 photons plus a Poisson tail
        mean = (g_hi * alpha) ** 2
        dim = int(poisson.isf(1e-16, mean)) + 4
    grid = np.linspace(1.0, g_hi, 601)
    vals = np.array([_addition_figure_of_merit(g, alpha, dim) for g in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if i == 0:
        return 1.0
    res = optimize.minimize_scalar(
        lambda g: -_addition_figure_of_merit(g, alpha, dim),
        bracket=(lo, grid[i], hi),
        method="golden",
        tol=tol,
    )
    return float(res.x)


def amplification_factor_closed_form(alpha: float) -> float:
    """Stationary point of g^2 exp(-(g-1)^2 alpha^2): g = (1 + sqrt(1 + 4/alpha^2))/2."""
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 / (alpha * alpha)))


@dataclass(frozen=True)
class GenerationResult:
    output_state: DensityOperator
    success_prob: float
    herald_fraction: float
    fidelity_ideal: float
    alpha_f: float
    g: float
    tau: float


def generate_he_pipeline(alpha: float, T_add: float, cv_dim: int = DEFAULT_CV_DIM) -> GenerationResult:
    """Exact Fock simulation of the photon-addition HE source.

    Modes: a (DV, starts in vacuum), b (CV, starts in |alpha>), c and d (single
    photons).  BS1(T_add) mixes (c, a), BS2(T_add) mixes (d, b), BS3(tau)
    erases which-path information between c and d.  The heralding event is a
    single photon on c and vacuum on d (photon-number resolving, as the
    algebra of the circuit requires; an on-off click would also accept the
    two-photon term in which no photon was added).  Mode b is then displaced by
    -(1+g) alpha / 2.

    ``success_prob`` is the absolute probability of the heralding event;
    ``herald_fraction`` is that probability divided by the probability of
    either detector registering exactly one photon while the other sees vacuum.  ``fidelity_ideal`` is the
    overlap with the HE state at alpha_f = (g-1) alpha / 2, maximized over a
    local phase on the DV mode.
    """
    if not 0.0 < T_add < 1.0:
        raise OutOfRangeError(f"T_add = {T_add} must lie strictly inside (0, 1)")
    if not alpha > 0.0:
        raise DomainError(f"alpha = {alpha} must be > 0")
    g = amplification_factor(alpha)
    shift = (1.0 + g) * alpha / 2.0
    # the heralded CV branch is close to |g alpha>, plus up to two extra photons
    worst = (g * alpha) ** 2 + 2.0
    if poisson.sf(cv_dim - 1, worst) > TRUNCATION_TOL:
        raise TruncationError(
            f"cv_dim = {cv_dim} too small for alpha = {alpha} (displacement {shift:.3g}); "
            f"Poisson tail {poisson.sf(cv_dim - 1, worst):.2e}"
        )
    tau = (1.0 + alpha * alpha) / (2.0 + alpha * alpha)
    # the coherent state leaks into c and d through BS2 and BS3
    ph_dim = cv_dim
    ket = tensor([
        fock_ket(0, DV_DIM, "a"),
        coherent_ket(alpha, cv_dim, "b"),
        fock_ket(1, ph_dim, "c"),
        fock_ket(1, ph_dim, "d"),
    ])
    # photon in c transmits with sqrt(T_add); the vacuum in a picks up the reflection
    ket = apply_to_ket(ket, _bs_dv(T_add, ph_dim), ["c", "a"])
    ket = apply_to_ket(ket, beamsplitter_local(T_add, ph_dim, cv_dim), ["d", "b"])
    ket = apply_to_ket(ket, beamsplitter_local(tau, ph_dim, ph_dim), ["c", "d"])

    amps = ket.tensor_view()
    p_cd = np.sum(np.abs(amps) ** 2, axis=(0, 1))
    p_c_only = float(p_cd[1, 0])
    p_d_only = float(p_cd[0, 1])

    v = amps[:, :, 1, 0].reshape(-1)
    reg_ab = FockRegister.of(("a", DV_DIM), ("b", cv_dim))
    rho = DensityOperator(reg_ab, np.outer(v, v.conj()))
    success = rho.trace
    if success <= 0.0:
        raise TruncationError("heralding event has zero probability")
    rho = rho.normalized()
    rho = apply_to_rho(rho, displacement_op(-shift, cv_dim), ["b"])

    alpha_f = (g - 1.0) * alpha / 2.0
    e0 = tensor([fock_ket(0, DV_DIM, "a"), coherent_ket(alpha_f, cv_dim, "b")]).amplitudes
    e1 = tensor([fock_ket(1, DV_DIM, "a"), coherent_ket(-alpha_f, cv_dim, "b")]).amplitudes
    m00 = np.vdot(e0, rho.matrix @ e0).real
    m11 = np.vdot(e1, rho.matrix @ e1).real
    m01 = np.vdot(e0, rho.matrix @ e1)
    fid = 0.5 * (m00 + m11) + abs(m01)
    fid = min(max(float(fid), 0.0), 1.0)
    return GenerationResult(
        output_state=rho,
        success_prob=float(success),
        herald_fraction=float(p_c_only / (p_c_only + p_d_only)),
        fidelity_ideal=fid,
        alpha_f=alpha_f,
        g=g,
        tau=tau,
    )


def _bs_dv(T: float, ph_dim: int) -> np.ndarray:
    """Beam splitter between a 3-level photon mode and the 2-level DV mode.

    At most one photon ever reaches the DV mode here, so the block is exact.
    """
    full = beamsplitter_local(T, ph_dim, ph_dim)
    keep = [i * ph_dim + j for i in range(ph_dim) for j in range(DV_DIM)]
    return full[np.ix_(keep, keep)]


__all__ = [
    "GenerationResult",
    "HEStateSpec",
    "LossyHEState",
    "amplification_factor",
    "amplification_factor_closed_form",
    "generate_he_pipeline",
    "he_schmidt_logneg",
    "lossy_he_analytic",
    "lossy_he_logneg",
    "make_he_state",
]
