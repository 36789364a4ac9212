"""Self-similar simple-wave profile.

The steady profile solves (y + (gamma+1)/4 zbar) zbar' + (mu-1) zbar = 0
with zbar = -2 y Ubar and Ubar given implicitly by

    y = K (2mu/(gamma+1) - Ubar)^(1/mu - 1) / Ubar^(1/mu),   K > 0.

Substituting u = -zbar turns the implicit relation into the scalar
equation  (4mu/(gamma+1)) y = u + u^beta / (2K)^(beta-1)  whose left
side is strictly increasing in u with derivative >= 1, so the root is
unique and uniformly well conditioned for every y >= 0.  All profile
evaluations below go through that equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .scaling import GasScaling, ceil_snapped

GRID_N = 2048
GRID_LO = 1e-6
GRID_HI = 1e6


class ProfileDomainError(ValueError):
    """Evaluation outside y >= 0."""


class RootConvergenceError(RuntimeError):
    """Root finder failed; carries the last bracket."""

    def __init__(self, msg, bracket):
        super().__init__(f"{msg} (last bracket {bracket})")
        self.bracket = bracket


class SingularityError(ValueError):
    """Derivative requested at y = 0 where it is unbounded."""


class FitSpanError(ValueError):
    """Tabulated grid does not span the requested fit window."""


@dataclass(frozen=True)
class ProfileParams:
    scaling: GasScaling
    K: float = 0.5

    def __post_init__(self):
        if not self.K > 0:
            raise ProfileDomainError(f"K must be positive, got {self.K}")

    @property
    def u0(self) -> float:
        """Ubar(0) = 2mu/(gamma+1), the sonic plateau value."""
        s = self.scaling
        return 2.0 * s.mu / (s.gamma + 1.0)

    @property
    def ucoef(self) -> float:
        """Coefficient of u^beta in the scalar profile equation, (2K)^(1-beta)."""
        return (2.0 * self.K) ** (1.0 - self.scaling.beta)


def _solve_u(params: ProfileParams, y, *, rtol=1e-14, max_newton=80):
    """Solve u + c u^beta = (4mu/(gamma+1)) y for u = -zbar, vectorized.

    Bisection down to a 1e-3 relative bracket, then Newton safeguarded
    by the bracket.  F' = 1 + c beta u^(beta-1) >= 1 everywhere.
    """
    s = params.scaling
    beta, c = s.beta, params.ucoef
    yv = np.asarray(y, dtype=float)
    Y = 2.0 * params.u0 * yv
    lo = np.zeros_like(Y)
    hi = Y.copy()  # F(Y) = c Y^beta >= 0

    def F(u):
        return u + c * u**beta - Y

    def Fp(u):
        return 1.0 + c * beta * u ** (beta - 1.0)

    for _ in range(24):  # 2^-24 < 1e-7 relative, well past the 1e-3 target
        mid = 0.5 * (lo + hi)
        neg = F(mid) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all((hi - lo) <= 1e-3 * np.maximum(hi, 1e-300)):
            break

    u = 0.5 * (lo + hi)
    for _ in range(max_newton):
        f = F(u)
        neg = f < 0.0
        lo = np.where(neg, u, lo)
        hi = np.where(neg, hi, u)
        step = f / Fp(u)
        un = u - step
        outside = (un <= lo) | (un >= hi)
        un = np.where(outside, 0.5 * (lo + hi), un)
        done = np.abs(un - u) <= rtol * np.maximum(np.abs(un), 1e-300)
        u = un
        if np.all(done):
            break
    else:
        bad = np.argmax(~done)
        raise RootConvergenceError(
            "profile root finder did not converge", (float(lo.flat[bad]), float(hi.flat[bad]))
        )
    return u


def solve_ubar(params: ProfileParams, y):
    """Ubar(y) in (0, 2mu/(gamma+1)]; exactly the plateau value at y = 0."""
    yv = np.asarray(y, dtype=float)
    if np.any(yv < 0):
        raise ProfileDomainError("y must be nonnegative")
    scalar = yv.ndim == 0
    yv = np.atleast_1d(yv)
    out = np.full(yv.shape, params.u0)
    pos = yv > 0
    if np.any(pos):
        out[pos] = _solve_u(params, yv[pos]) / (2.0 * yv[pos])
    return float(out[0]) if scalar else out


def zbar(params: ProfileParams, y):
    """zbar(y) = -2 y Ubar(y) <= 0."""
    yv = np.asarray(y, dtype=float)
    if np.any(yv < 0):
        raise ProfileDomainError("y must be nonnegative")
    scalar = yv.ndim == 0
    yv = np.atleast_1d(yv)
    out = np.zeros(yv.shape)
    pos = yv > 0
    if np.any(pos):
        out[pos] = -_solve_u(params, yv[pos])
    return float(out[0]) if scalar else out


def dzbar_from_ubar(params: ProfileParams, ub):
    """First derivative -4(mu-1)Ubar/((gamma+1)Ubar - 2) at given Ubar values."""
    s = params.scaling
    return -4.0 * (s.mu - 1.0) * np.asarray(ub) / ((s.gamma + 1.0) * np.asarray(ub) - 2.0)


def dzbar(params: ProfileParams, y):
    """zbar'(y), monotone increasing from -4mu/(gamma+1) toward 0."""
    return dzbar_from_ubar(params, solve_ubar(params, y))


def _taylor_u_coeffs(params: ProfileParams, order: int) -> np.ndarray:
    """Taylor coefficients of u(Y) solving u + c u^beta = Y (integer beta only)."""
    s = params.scaling
    beta = int(round(s.beta))
    c = params.ucoef
    u = np.zeros(order + 1)
    u[1] = 1.0
    for _ in range(order + 1):
        p = npoly.polypow(u, beta)[: order + 1]
        un = np.zeros(order + 1)
        un[1] = 1.0
        un -= c * np.pad(p, (0, order + 1 - p.size))
        if np.allclose(un, u, rtol=0, atol=0):
            break
        u = un
    return u


def dzbar_higher(params: ProfileParams, y: float, order: int):
    """order-th y-derivative of zbar by repeated differentiation of the steady ODE.

    For y > 0 the relation v zbar' + (mu-1) zbar = 0 with transport
    velocity v = y + (gamma+1)/4 zbar > 0 is differentiated with
    Leibniz' rule, yielding an explicit recursion.  At y = 0 the value
    is 0 below order beta, comes from series reversion for integer
    beta, and is unbounded otherwise.
    """
    s = params.scaling
    if order < 1:
        raise IndexError("derivative order must be >= 1")
    if order > s.n_mu + 1:
        raise IndexError(f"order {order} exceeds the supported cap n_mu+1 = {s.n_mu + 1}")
    if y < 0:
        raise ProfileDomainError("y must be nonnegative")
    q = (s.gamma + 1.0) / 4.0
    if y == 0:
        if order == 1:
            return -4.0 * s.mu / (s.gamma + 1.0)
        if order < s.beta:
            return 0.0
        if not s.in_S:
            raise SingularityError(
                f"zbar derivative of order {order} is unbounded at y=0 for beta={s.beta}"
            )
        a = _taylor_u_coeffs(params, order)
        return -a[order] * math.factorial(order) * (2.0 * params.u0) ** order
    d = np.zeros(order + 1)
    d[0] = zbar(params, y)
    d[1] = dzbar(params, y)
    v = y + q * d[0]
    vp = 1.0 + q * d[1]
    for i in range(1, order):
        acc = i * vp * d[i] + (s.mu - 1.0) * d[i]
        for j in range(2, i + 1):
            acc += math.comb(i, j) * q * d[j] * d[i - j + 1]
        d[i + 1] = -acc / v
    return d[order]


@dataclass
class Profile:
    """Tabulated profile on the standard graded grid; immutable after build."""

    params: ProfileParams
    grid: np.ndarray
    ubar: np.ndarray
    zbar: np.ndarray
    dzbar: np.ndarray
    near_coeff_c1: float = field(default=float("nan"))
    near_exp_fit: float = field(default=float("nan"))
    far_coeff_c2: float = field(default=float("nan"))
    far_exp_fit: float = field(default=float("nan"))

    @property
    def scaling(self) -> GasScaling:
        return self.params.scaling

    def residual(self) -> float:
        """Max nodewise steady-equation residual |(y + q zbar) zbar' + (mu-1) zbar|/(1+y)."""
        s = self.scaling
        q = (s.gamma + 1.0) / 4.0
        r = (self.grid + q * self.zbar) * self.dzbar + (s.mu - 1.0) * self.zbar
        return float(np.max(np.abs(r) / (1.0 + self.grid)))

    def export_csv(self, path) -> None:
        from .report import write_csv

        rows = np.column_stack([self.grid, self.ubar, self.zbar, self.dzbar])
        write_csv(path, ["y", "ubar", "zbar", "dzbar"], rows)


def build_profile(params: ProfileParams, n: int = GRID_N,
                  lo: float = GRID_LO, hi: float = GRID_HI) -> Profile:
    """Tabulate the profile on {0} plus a geometric grid of n nodes on [lo, hi]."""
    grid = np.concatenate([[0.0], np.geomspace(lo, hi, n)])
    ub = solve_ubar(params, grid)
    zb = -2.0 * grid * ub
    dzb = dzbar_from_ubar(params, ub)
    prof = Profile(params=params, grid=grid, ubar=ub, zbar=zb, dzbar=dzb)
    fit_asymptotics(prof)
    return prof


def c1_leading(params: ProfileParams) -> float:
    """Near-origin corrector coefficient 2 Ubar(0)^beta / K^(beta-1)."""
    s = params.scaling
    return 2.0 * params.u0**s.beta / params.K ** (s.beta - 1.0)


def c2_leading(params: ProfileParams) -> float:
    """Far-field coefficient 2 K^mu Ubar(0)^(1-mu) of -zbar ~ c2 y^(1-mu)."""
    s = params.scaling
    return 2.0 * params.K**s.mu * params.u0 ** (1.0 - s.mu)


def _loglog_fit(x: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    coef = np.polyfit(np.log(x), np.log(f), 1)
    return float(coef[0]), float(math.exp(coef[1]))


def fit_asymptotics(profile: Profile,
                    near_window: tuple[float, float] = (1e-5, 1e-3),
                    far_window: tuple[float, float] = (1e3, 1e5)):
    """Least-squares log-log fits of the two asymptotic branches.

    Near the origin the corrector zbar + 4mu/(gamma+1) y scales like
    c1 y^beta; in the far field -zbar scales like c2 y^(1-mu).  The
    fitted exponents and coefficients are stored on the profile and
    returned as (c1, beta_fit, c2, far_exp_fit).
    """
    s = profile.scaling
    g = profile.grid
    span = g[g > 0]
    if span[0] > near_window[0] or span[-1] < far_window[1] or \
            math.log10(span[-1] / span[0]) < 4.0:
        raise FitSpanError(
            f"grid [{span[0]:g},{span[-1]:g}] does not cover fit windows"
        )
    near = (g >= near_window[0]) & (g <= near_window[1])
    corr = profile.zbar[near] + 4.0 * s.mu / (s.gamma + 1.0) * g[near]
    beta_fit, c1 = _loglog_fit(g[near], corr)
    far = (g >= far_window[0]) & (g <= far_window[1])
    far_exp, c2 = _loglog_fit(g[far], -profile.zbar[far])
    profile.near_coeff_c1 = c1
    profile.near_exp_fit = beta_fit
    profile.far_coeff_c2 = c2
    profile.far_exp_fit = far_exp
    return c1, beta_fit, c2, far_exp
