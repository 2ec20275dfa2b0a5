"""Fibre-link bookkeeping shared by the protocol and key-rate modules."""

from __future__ import annotations

import math

from .errors import DomainError

STANDARD_LOSS_DB_PER_KM = 0.2


def distance_to_transmittance(L: float, l: float = STANDARD_LOSS_DB_PER_KM) -> float:
    """Per-link transmittance for total distance ``L`` km with the relay at the midpoint."""
    if not L >= 0.0:
        raise DomainError(f"distance L = {L} must be >= 0")
    if not l > 0.0:
        raise DomainError(f"loss rate l = {l} must be > 0")
    return 10.0 ** (-l * (L / 2.0) / 10.0)


def transmittance_to_distance(T: float, l: float = STANDARD_LOSS_DB_PER_KM) -> float:
    """Inverse of :func:`distance_to_transmittance`."""
    if not 0.0 < T <= 1.0:
        raise DomainError(f"transmittance T = {T} outside (0, 1]")
    if not l > 0.0:
        raise DomainError(f"loss rate l = {l} must be > 0")
    return max(0.0, -20.0 * math.log10(T) / l)
