"""Gas and similarity scaling indices.

Everything downstream is parametrized by the adiabatic exponent gamma
in (1,3) and the inverse scaling exponent mu in [1/2,1).  This module
derives the dependent quantities: the regularity exponent beta, the
similarity exponent delta, the regularity index n_mu, the class flags
for integer / half-integer beta, and the linear damping coefficients
of the boundary coefficient hierarchy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# absolute tolerance for classifying beta as integer / half-integer
SNAP_TOL = 1e-12


class ParameterDomainError(ValueError):
    """Raised when (gamma, mu) or an index falls outside the admissible range."""


def _snap(x: float, tol: float = SNAP_TOL) -> float:
    """Snap x to the nearest integer when within tol (guards 2/3-style floats)."""
    r = round(x)
    return float(r) if abs(x - r) <= tol else x


def floor_snapped(x: float) -> int:
    return math.floor(_snap(x))


def ceil_snapped(x: float) -> int:
    return math.ceil(_snap(x))


@dataclass(frozen=True)
class GasScaling:
    """Immutable bundle of (gamma, mu) and all derived scalar indices.

    Attributes
    ----------
    gamma : adiabatic exponent, in (1,3)
    mu    : inverse scaling exponent, in [1/2,1)
    beta  : 1/(1-mu), regularity exponent (snapped to integer within 1e-12)
    delta : 1/mu, similarity exponent
    n_mu  : floor(beta + 1/2) + 1, regularity index
    in_S  : True iff beta is an integer
    in_H  : True iff beta + 1/2 is an integer
    a0    : asymptotic decay rate of the modulation hierarchy
    """

    gamma: float
    mu: float
    beta: float
    delta: float
    n_mu: int
    in_S: bool
    in_H: bool
    a0: float

    @property
    def i_max(self) -> int:
        """Highest boundary Taylor order carried by the modulation system."""
        return self.n_mu - 1

    def k(self, i: int) -> float:
        return damping_coeffs(self, i)[0]

    def g(self, i: int) -> float:
        return damping_coeffs(self, i)[1]


def derive_indices(gamma: float, mu: float) -> GasScaling:
    """Build a GasScaling from (gamma, mu), validating the parameter domain."""
    if not (1.0 < gamma < 3.0):
        raise ParameterDomainError(f"gamma must lie in (1,3), got {gamma}")
    if not (0.5 <= mu < 1.0):
        raise ParameterDomainError(f"mu must lie in [0.5,1), got {mu}")
    beta = _snap(1.0 / (1.0 - mu))
    delta = 1.0 / mu
    n_mu = floor_snapped(beta + 0.5) + 1
    in_S = abs(beta - round(beta)) <= SNAP_TOL
    in_H = abs(beta + 0.5 - round(beta + 0.5)) <= SNAP_TOL
    s = GasScaling(
        gamma=gamma, mu=mu, beta=beta, delta=delta,
        n_mu=n_mu, in_S=in_S, in_H=in_H, a0=float("nan"),
    )
    object.__setattr__(s, "a0", decay_rate_a0(s))
    return s


def damping_coeffs(s: GasScaling, i: int) -> tuple[float, float]:
    """Anti-damping and damping coefficients (k_i, g_i) of boundary order i >= 2.

    k_i = i - 1 - i*mu = (1-mu)(i - beta) changes sign at i = beta;
    g_i = mu + i - 1 - (3-gamma)*i*mu/(gamma+1) is positive for all i >= 2.
    """
    if i < 2:
        raise IndexError(f"damping coefficients are defined for i >= 2, got {i}")
    k_i = i - 1 - i * s.mu
    g_i = s.mu + i - 1 - (3.0 - s.gamma) * i * s.mu / (s.gamma + 1.0)
    return k_i, g_i


def decay_rate_a0(s: GasScaling) -> float:
    """Asymptotic modulation decay rate.

    Literal evaluation of min{g_2, (floor(beta)-ceil(beta)+1) g_2
    + (ceil(beta)-floor(beta)) k_ceil(beta)}: g_2 for integer beta,
    min(g_2, k_ceil(beta)) otherwise, and the anti-damping term always
    wins the minimum in the non-integer case.
    """
    _, g2 = damping_coeffs(s, 2)
    fb, cb = floor_snapped(s.beta), ceil_snapped(s.beta)
    k_cb, _ = damping_coeffs(s, cb)
    return min(g2, (fb - cb + 1) * g2 + (cb - fb) * k_cb)
