import math

import numpy as np
import pytest
from scipy.stats import entropy

from hybridlink.errors import DomainError, NoSolutionError
from hybridlink.keyrate import (
    channel_fidelity,
    channel_fidelity_exact,
    channel_fidelity_oracle,
    channel_fidelity_point,
    holevo_bound,
    key_rate,
    max_distance,
    mutual_information,
    optimize_alpha,
)
from hybridlink.links import distance_to_transmittance, transmittance_to_distance
from hybridlink.swap import ProtocolParams, effective_logneg

I_095 = 0.759994800969664
CHI_0368520_095 = 0.7546859642436935
R_250 = 1.0610774754614382e-9
L_MAX_1E9 = 251.24

DET = dict(eta_h=0.55, eta_o=0.8)


def point(L, alpha=0.5, eta_d=0.95, l=0.2):
    return ProtocolParams.from_distance(L, l=l, alpha=alpha, eta_d=eta_d, **DET)


def shannon_mi(eta_d):
    joint = np.array([[1 - eta_d, eta_d / 2], [eta_d / 2, 0.0]])
    pa, pb = joint.sum(1), joint.sum(0)
    return entropy(pa, base=2) + entropy(pb, base=2) - entropy(joint.ravel(), base=2)


def entropy_holevo(h, eta_d):
    # S(rho) from eigenvalues (1 +- h)/2; the conditional term from the outcome statistics
    s_rho = entropy([(1 + h) / 2, (1 - h) / 2], base=2)
    return s_rho - 0.5 * ((2 - eta_d) - shannon_mi(eta_d))


# -- information quantities ------------------------------------------------------

def test_mutual_information_limits():
    assert mutual_information(1.0) == 1.0
    assert mutual_information(0.0) == 0.0


def test_mutual_information_value():
    assert abs(mutual_information(0.95) - I_095) < 1e-12


@pytest.mark.parametrize("eta_d", [0.0, 0.1, 0.5, 0.9, 0.95, 0.999, 1.0])
def test_mutual_information_is_shannon(eta_d):
    assert abs(mutual_information(eta_d) - shannon_mi(eta_d)) < 1e-12


def test_holevo_limits():
    assert abs(holevo_bound(1.0, 1.0)) < 1e-15
    assert abs(holevo_bound(0.0, 1.0) - 1.0) < 1e-15


def test_holevo_value():
    assert abs(holevo_bound(0.368520, 0.95) - CHI_0368520_095) < 1e-12


@pytest.mark.parametrize("h", [0.0, 0.1, 0.37, 0.8, 1.0])
@pytest.mark.parametrize("eta_d", [0.0, 0.5, 0.95, 1.0])
def test_holevo_from_entropies(h, eta_d):
    assert abs(holevo_bound(h, eta_d) - entropy_holevo(h, eta_d)) < 1e-12


def test_holevo_closed_form_can_be_negative():
    assert abs(holevo_bound(1.0, 0.0) + 1.0) < 1e-15
    br = key_rate(ProtocolParams(alpha=0.5, T=1.0, eta_h=1.0, eta_d=0.95))
    assert br.chi_raw < 0
    assert br.chi_AE == 0.0
    assert abs(br.r - br.P0 * br.I_AB) < 1e-18


def test_information_domain():
    with pytest.raises(DomainError):
        mutual_information(1.5)
    with pytest.raises(DomainError):
        holevo_bound(-0.1, 0.9)


# -- key rate ---------------------------------------------------------------------

def test_key_rate_at_250_km():
    br = key_rate(point(250))
    assert abs(br.r - R_250) / R_250 < 1e-9
    assert 0.5e-9 <= br.r <= 2e-9
    assert br.r == br.r_raw
    assert abs(br.r - br.P0 * (br.I_AB - br.chi_AE)) < 1e-24


def test_key_rate_zero_amplitude():
    assert key_rate(point(50, alpha=0.0)).r == 0.0


def test_key_rate_clamps_negative_values():
    br = key_rate(point(100, alpha=1.5, eta_d=0.9))
    assert br.r_raw < 0
    assert br.r == 0.0


def test_key_rate_ideal_limit():
    br = key_rate(ProtocolParams(alpha=0.5, T=1.0, eta_h=1.0, eta_o=0.8, eta_d=1.0))
    assert br.I_AB == 1.0 and br.chi_AE == 0.0
    assert abs(br.r - br.P0) < 1e-18


def test_key_rate_decreases_with_distance():
    Ls = np.arange(0, 400, 1.0)
    rs = [key_rate(point(L)).r for L in Ls]
    pos = [r for r in rs if r > 0]
    assert all(y < x for x, y in zip(pos, pos[1:]))


# -- distance conversion ---------------------------------------------------------

def test_distance_to_transmittance():
    assert abs(distance_to_transmittance(100, 0.2) - 0.1) < 1e-15
    assert distance_to_transmittance(0) == 1.0


@pytest.mark.parametrize("L", [0.0, 1.0, 37.5, 250.0, 999.0])
def test_distance_round_trip(L):
    assert abs(transmittance_to_distance(distance_to_transmittance(L, 0.16), 0.16) - L) < 1e-12 * max(1, L)


def test_inverse_domain():
    with pytest.raises(DomainError):
        transmittance_to_distance(0.0)
    with pytest.raises(DomainError):
        transmittance_to_distance(1.5)
    with pytest.raises(DomainError):
        distance_to_transmittance(-1.0)


# -- solvers ----------------------------------------------------------------------

def test_max_distance_at_1e9():
    L = max_distance(1e-9, 0.5, point(0))
    assert abs(L - 250) <= 15
    assert abs(L - L_MAX_1E9) < 0.02
    assert key_rate(point(L)).r_raw == pytest.approx(1e-9, rel=1e-4)


def test_max_distance_monotone_in_target():
    targets = [1e-5, 1e-6, 1e-8, 1e-9, 1e-10]
    Ls = [max_distance(t, 0.5, point(0)) for t in targets]
    assert all(y >= x for x, y in zip(Ls, Ls[1:]))


def test_max_distance_without_solution():
    with pytest.raises(NoSolutionError):
        max_distance(0.1, 0.5, point(0))
    with pytest.raises(DomainError):
        max_distance(0.0, 0.5, point(0))


def test_optimize_key_rate_at_200_km():
    opt = optimize_alpha("key_rate", point(200, eta_d=1.0))
    assert 0.45 <= opt.alpha <= 0.55
    assert not opt.flat


def test_optimize_effective_logneg_matches_brute_force():
    pt = ProtocolParams(alpha=0.5, T=1.0, eta_h=1.0, eta_o=1.0)
    # h = 1 here, so the objective is the monotone P0 and the optimum is the range edge
    opt = optimize_alpha("effective_logneg", pt, (0.01, 1.2))
    grid = np.arange(0.01, 1.2 + 1e-12, 1e-5)
    brute = grid[int(np.argmax([effective_logneg(pt.with_(alpha=a)) for a in grid]))]
    assert abs(opt.alpha - brute) < 1e-4


def test_optimize_interior_optimum_matches_brute_force():
    pt = point(200)
    opt = optimize_alpha("effective_logneg", pt, (0.3, 1.2))
    grid = np.arange(0.3, 1.2, 1e-5)
    vals = [effective_logneg(pt.with_(alpha=a)) for a in grid]
    brute = grid[int(np.argmax(vals))]
    assert abs(opt.alpha - brute) < 1e-4
    assert opt.value >= max(vals) - 1e-15


def test_optimize_degenerate_range():
    opt = optimize_alpha("key_rate", point(100), (0.5, 0.50005))
    assert opt.alpha == pytest.approx(0.500025, abs=1e-12)


def test_optimize_flat_objective():
    opt = optimize_alpha(lambda a: 0.0, point(100))
    assert opt.flat


def test_optimize_ties_go_to_smaller_alpha():
    opt = optimize_alpha(lambda a: 1.0, point(100), (0.2, 0.8))
    assert opt.alpha == 0.2


def test_optimize_validation():
    with pytest.raises(DomainError):
        optimize_alpha("key_rate", point(100), (0.0, 1.0))
    with pytest.raises(DomainError):
        optimize_alpha("max_distance", point(100))
    with pytest.raises(DomainError):
        optimize_alpha("entropy", point(100))


# -- thermal-noise fidelity -------------------------------------------------------

def test_fidelity_limits():
    assert channel_fidelity(0.4, 0.0, 0.5) == 1.0
    assert channel_fidelity(1.0, 0.3, 0.5) == 1.0
    assert channel_fidelity_point(0.3, 0.01, 0.5).x == pytest.approx(0.01 / 1.01)


def test_fidelity_lower_bound():
    x = 0.01 / 1.01
    Ts = np.linspace(1e-6, 1, 2001)
    Fs = [channel_fidelity(T, 0.01, 0.5) for T in Ts]
    assert min(Fs) >= 0.98
    assert abs(channel_fidelity(0.0, 0.01, 0.5) - (1 - x) ** 2) < 1e-15


@pytest.mark.parametrize("T", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("n_bar", [0.001, 0.005, 0.01])
def test_fidelity_oracle(T, n_bar):
    orc = channel_fidelity_oracle(T, n_bar, 0.5)
    assert abs(orc.coherence_restored_overlap - channel_fidelity(T, n_bar, 0.5)) < 1e-6
    assert abs(orc.coherence_restored_overlap - channel_fidelity_exact(T, n_bar, 0.5)) < 1e-12


@pytest.mark.parametrize("T", [0.1, 0.5, 0.9])
def test_fidelity_closed_form_is_second_order_at_stronger_noise(T):
    n_bar, a = 0.05, 0.5
    x = n_bar / (1 + n_bar)
    k = T * x * (1 - T) * a * a / (1 - T * x)
    orc = channel_fidelity_oracle(T, n_bar, a)
    assert abs(orc.coherence_restored_overlap - channel_fidelity_exact(T, n_bar, a)) < 1e-12
    gap = abs(channel_fidelity_exact(T, n_bar, a) - channel_fidelity(T, n_bar, a))
    assert gap < k * k


def test_fidelity_oracle_without_noise():
    orc = channel_fidelity_oracle(0.5, 0.0, 0.5)
    assert abs(orc.overlap - orc.purity_loss) < 1e-12
    assert orc.purity_loss < 1.0
    assert abs(orc.normalized_overlap - 1.0) < 1e-12
    assert abs(orc.coherence_restored_overlap - 1.0) < 1e-12


def test_raw_overlap_is_not_the_closed_form():
    orc = channel_fidelity_oracle(0.5, 0.01, 0.5)
    assert abs(orc.overlap - channel_fidelity(0.5, 0.01, 0.5)) > 0.1
