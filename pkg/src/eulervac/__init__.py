"""eulervac: numerics for gradient blowup of 1D isentropic Euler flows
at a stationary vacuum boundary.

Subpackages map one-to-one onto the moving parts of the construction:
scaling indices, the self-similar profile, the transported cutoff and
localized profile, the boundary modulation ODE hierarchy, linearized
operator diagnostics, and the PDE simulators with their reports.
"""

from .scaling import GasScaling, derive_indices, damping_coeffs, decay_rate_a0

__version__ = "0.1.0"

__all__ = [
    "GasScaling",
    "derive_indices",
    "damping_coeffs",
    "decay_rate_a0",
    "__version__",
]
