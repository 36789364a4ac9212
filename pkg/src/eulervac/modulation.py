"""Boundary Taylor-coefficient modulation hierarchy.

The coefficients (z_i, w_i), i >= 2, of the perturbation at the vacuum
point obey a closed ODE system: w_i is damped at rate g_i, z_i is
anti-damped at rate k_i = (1-mu)(i-beta) and forced by w_i, and the
quadratic couplings only involve lower orders.  The stable manifold is
cut out by polynomial constraints z_i = q_i(w_2..w_i); q_i is computed
here by a numeric limit oracle (the coefficient of the e^{-k_i tau}
mode), with closed forms at i = 2, 3 kept as cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .scaling import GasScaling, ceil_snapped, damping_coeffs, floor_snapped


class ModulationOrderError(IndexError):
    pass


class ConfigurationError(ValueError):
    pass


class ExtrapolationError(RuntimeError):
    pass


@dataclass
class ModulationState:
    """Coefficients (z_i, w_i) for 2 <= i <= order at time tau.

    z_0 = w_0 = z_1 = w_1 = 0 are implicit and never stored.  The order
    may not exceed ceil(beta), where the reduced hierarchy is proved.
    """

    tau: float
    z: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if self.z.shape != self.w.shape:
            raise ValueError("z and w must have one entry per order i=2..order")

    @property
    def order(self) -> int:
        return self.z.size + 1

    def coeff(self, which: str, i: int) -> float:
        arr = self.z if which == "z" else self.w
        return float(arr[i - 2])

    @staticmethod
    def zero(s: GasScaling, tau: float = 0.0, order: int | None = None) -> "ModulationState":
        order = s.i_max if order is None else order
        check_order(s, order)
        n = order - 1
        return ModulationState(tau=tau, z=np.zeros(n), w=np.zeros(n))


def check_order(s: GasScaling, order: int) -> None:
    if order < 2:
        raise ModulationOrderError("modulation hierarchy starts at order 2")
    if order > ceil_snapped(s.beta):
        raise ModulationOrderError(
            f"order {order} exceeds ceil(beta) = {ceil_snapped(s.beta)}; "
            "the reduced boundary system is only valid up to that order"
        )


def boundary_nonlinear(s: GasScaling, state: ModulationState, i: int) -> tuple[float, float]:
    """Quadratic boundary terms (Nz_i, Nw_i) of the order-i equations.

    Valid because z_0 = w_0 = z_1 = w_1 = 0 and every profile derivative
    of order 2..i-1 < beta vanishes at the origin, which kills all
    profile-perturbation interaction terms.
    """
    check_order(s, max(i, 2))
    if not 2 <= i <= state.order:
        raise ModulationOrderError(f"order {i} outside state range 2..{state.order}")
    gamma = s.gamma
    nz = nw = 0.0
    for m in range(1, i - 1):
        c = math.comb(i, m)
        z_im, z_m1 = state.coeff("z", i - m), state.coeff("z", m + 1)
        w_im, w_m1 = state.coeff("w", i - m), state.coeff("w", m + 1)
        nz += c * ((gamma + 1) / 4 * z_im * z_m1 + (3 - gamma) / 4 * w_im * z_m1)
        nw += c * ((3 - gamma) / 4 * z_im * w_m1 + (gamma + 1) / 4 * w_im * w_m1)
    return nz, nw


def rhs_modulation(s: GasScaling, state: ModulationState) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (dz_i/dtau, dw_i/dtau) for i = 2..order."""
    n = state.order - 1
    dz = np.zeros(n)
    dw = np.zeros(n)
    couple = (3 - s.gamma) * s.mu / (s.gamma + 1)
    for idx in range(n):
        i = idx + 2
        k_i, g_i = damping_coeffs(s, i)
        nz, nw = boundary_nonlinear(s, state, i)
        dz[idx] = -k_i * state.z[idx] + couple * state.w[idx] - nz
        dw[idx] = -g_i * state.w[idx] - nw
    return dz, dw


@dataclass
class ModulationTrajectory:
    s: GasScaling
    taus: np.ndarray
    Z: np.ndarray  # shape (n_times, order-1)
    W: np.ndarray

    @property
    def order(self) -> int:
        return self.Z.shape[1] + 1

    def state(self, j: int) -> ModulationState:
        return ModulationState(tau=float(self.taus[j]), z=self.Z[j].copy(), w=self.W[j].copy())

    def export_csv(self, path) -> None:
        from .report import write_csv

        hdr = ["tau"] + [f"z{i}" for i in range(2, self.order + 1)] \
            + [f"w{i}" for i in range(2, self.order + 1)]
        rows = np.column_stack([self.taus, self.Z, self.W])
        write_csv(path, hdr, rows)


def integrate_modulation(s: GasScaling, state0: ModulationState, tau_end: float,
                         dt: float = 1e-3, store_every: int = 1) -> ModulationTrajectory:
    """Fixed-step RK4 integration of the hierarchy from state0.tau to tau_end."""
    check_order(s, state0.order)
    g_max = max(damping_coeffs(s, i)[1] for i in range(2, state0.order + 1))
    if dt * g_max >= 0.1:
        raise ConfigurationError(
            f"dt={dt} too large for stiffest rate g={g_max:.3f}: need dt*g < 0.1"
        )
    nsteps = max(1, int(round((tau_end - state0.tau) / dt)))
    dt = (tau_end - state0.tau) / nsteps
    y = np.concatenate([state0.z, state0.w])
    n = state0.z.size

    def f(yv):
        st = ModulationState(tau=0.0, z=yv[:n], w=yv[n:])
        dz, dw = rhs_modulation(s, st)
        return np.concatenate([dz, dw])

    taus = [state0.tau]
    hist = [y.copy()]
    for step in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (step + 1) % store_every == 0 or step == nsteps - 1:
            taus.append(state0.tau + (step + 1) * dt)
            hist.append(y.copy())
    hist = np.asarray(hist)
    return ModulationTrajectory(s=s, taus=np.asarray(taus), Z=hist[:, :n], W=hist[:, n:])


# ---------------------------------------------------------------------------
# stable-manifold constraints

def q2_closed_form(s: GasScaling, w2: float) -> float:
    return -(3 - s.gamma) / (5 * s.gamma - 3) * w2


def q3_closed_form(s: GasScaling, w2: float, w3: float) -> float:
    """Order-3 constraint from explicitly solving the (z2,w2,z3,w3) system
    on the order-2 manifold; used only as a cross-check of the oracle."""
    gamma, mu = s.gamma, s.mu
    a = (3 - gamma) / (5 * gamma - 3)
    m = (3 - gamma) * mu / (gamma + 1)
    k3, g3 = damping_coeffs(s, 3)
    _, g2 = damping_coeffs(s, 2)
    A = 3 * w2**2 * ((gamma + 1) / 4 * a**2 - (3 - gamma) / 4 * a)
    B = 3 * w2**2 * ((gamma + 1) / 4 - (3 - gamma) / 4 * a)
    Cg = w3 + B / (g3 - 2 * g2)
    C2 = -B / (g3 - 2 * g2)
    return m * Cg / (k3 - g3) + (m * C2 - A) / (k3 - 2 * g2)


def q_polynomial(s: GasScaling, w_values: dict[int, float] | np.ndarray, i: int,
                 dt: float = 5e-3) -> float:
    """Constraint value q_i(w_2..w_i) by the limit oracle.

    With all lower constraints enforced and z_i(tau0) = 0, the quantity
    e^{k_i (tau-tau0)} z_i(tau) converges to -q_i; three late horizons
    plus Aitken extrapolation extract the limit.
    """
    check_order(s, i)
    w = _as_wdict(w_values, i)
    if i == 2:
        lower = {}
    else:
        lower = {j: q_polynomial(s, w, j, dt=dt) for j in range(2, i)}
    z0 = np.array([lower.get(j, 0.0) for j in range(2, i + 1)])
    w0 = np.array([w.get(j, 0.0) for j in range(2, i + 1)])
    if not np.any(w0):
        return 0.0  # zero data ride the exact zero trajectory
    state0 = ModulationState(tau=0.0, z=z0, w=w0)
    k_i, _ = damping_coeffs(s, i)
    horizon = 24.0 / (1.0 - s.mu)
    samples = []
    traj = integrate_modulation(s, state0, horizon, dt=dt, store_every=10)
    for frac in (0.5, 0.75, 1.0):
        j = int(np.argmin(np.abs(traj.taus - frac * horizon)))
        samples.append(math.exp(k_i * traj.taus[j]) * traj.Z[j, i - 2])
    e1, e2, e3 = samples
    d1, d2 = e2 - e1, e3 - e2
    if abs(d2) < 1e-14 * max(abs(e3), 1e-30):
        limit = e3
    elif abs(d2 - d1) < 1e-3 * abs(d2):
        raise ExtrapolationError(
            f"q_{i} horizon extrapolation not converging: samples {samples}"
        )
    else:
        limit = e3 - d2 * d2 / (d2 - d1)
    return -limit


def _as_wdict(w_values, i_hi: int) -> dict[int, float]:
    if isinstance(w_values, dict):
        return {int(k): float(v) for k, v in w_values.items()}
    arr = np.atleast_1d(np.asarray(w_values, dtype=float))
    return {j + 2: float(arr[j]) for j in range(min(arr.size, i_hi - 1))}


@dataclass(frozen=True)
class ConstraintSet:
    """Stable-manifold membership data: z_j = q_j(w_2..w_j) for 2 <= j <= order,
    plus w_2 = 0 when beta is a half-integer."""

    s: GasScaling
    order: int
    extra_w2_zero: bool

    @staticmethod
    def standard(s: GasScaling) -> "ConstraintSet":
        return ConstraintSet(s=s, order=floor_snapped(s.beta), extra_w2_zero=s.in_H)


def is_on_manifold(s: GasScaling, state: ModulationState, tol: float = 1e-9) -> bool:
    cs = ConstraintSet.standard(s)
    if cs.extra_w2_zero and abs(state.coeff("w", 2)) > tol:
        return False
    w = {j: state.coeff("w", j) for j in range(2, state.order + 1)}
    for j in range(2, min(cs.order, state.order) + 1):
        if abs(state.coeff("z", j) - q_polynomial(s, w, j)) > tol:
            return False
    return True


def project_to_manifold(s: GasScaling, w_values, tau: float = 0.0,
                        order: int | None = None) -> ModulationState:
    """State with the given w's and every constrained z_j set to q_j."""
    order = s.i_max if order is None else order
    check_order(s, order)
    w = _as_wdict(w_values, order)
    if s.in_H:
        w[2] = 0.0
    cs_order = min(floor_snapped(s.beta), order)
    z = np.zeros(order - 1)
    for j in range(2, cs_order + 1):
        z[j - 2] = q_polynomial(s, w, j)
    wv = np.array([w.get(j, 0.0) for j in range(2, order + 1)])
    return ModulationState(tau=tau, z=z, w=wv)


# ---------------------------------------------------------------------------
# trajectory classification

@dataclass(frozen=True)
class ClassifyResult:
    kind: str            # "decaying" | "growing" | "indeterminate"
    rate: float          # decay (positive) or growth (positive) rate
    stderr: float
    index: int | None    # first constraint-violating order for growth
    zero_trajectory: bool = False


def _logfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = max(x.size - 2, 1)
    sigma2 = (res[0] / dof) if res.size else 0.0
    var = sigma2 / np.sum((x - x.mean()) ** 2)
    return float(coef[0]), float(np.sqrt(var))


def classify(s: GasScaling, traj: ModulationTrajectory, tol: float = 1e-9) -> ClassifyResult:
    a0 = s.a0
    if traj.taus[-1] - traj.taus[0] < 10.0 / a0 - 1e-9:
        raise ConfigurationError(f"trajectory must span at least 10/a0 = {10/a0:.2f}")
    mags = np.maximum(np.max(np.abs(traj.Z), axis=1), np.max(np.abs(traj.W), axis=1))
    if np.max(mags) < 1e-280:
        return ClassifyResult("decaying", float("inf"), 0.0, None, zero_trajectory=True)
    tail = traj.taus >= traj.taus[0] + 0.5 * (traj.taus[-1] - traj.taus[0])
    slope, err = _logfit(traj.taus[tail], np.log(np.maximum(mags[tail], 1e-300)))
    if abs(slope) < 2 * err:
        return ClassifyResult("indeterminate", slope, err, None)
    if slope > 0:
        w0 = {j: traj.W[0, j - 2] for j in range(2, traj.order + 1)}
        index = None
        for j in range(2, min(floor_snapped(s.beta), traj.order) + 1):
            if abs(traj.Z[0, j - 2] - q_polynomial(s, w0, j)) > tol:
                index = j
                break
        series = np.abs(traj.Z[:, index - 2]) if index else mags
        gslope, gerr = _logfit(traj.taus[tail], np.log(np.maximum(series[tail], 1e-300)))
        return ClassifyResult("growing", gslope, gerr, index)
    return ClassifyResult("decaying", -slope, err, None)


# ---------------------------------------------------------------------------
# localized modulation fields

def phi_cutoff(y, derivative: bool = False):
    """Quintic smoothstep: 1 on [0,1/2], 0 on [1,inf), slope within [-15/4, 0]."""
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    t = np.clip((yv - 0.5) / 0.5, 0.0, 1.0)
    val = 1.0 - (6 * t**5 - 15 * t**4 + 10 * t**3)
    if not derivative:
        return val if np.ndim(y) else float(val[0])
    dval = -(30 * t**4 - 60 * t**3 + 30 * t**2) / 0.5
    dval[(yv <= 0.5) | (yv >= 1.0)] = 0.0
    if np.ndim(y):
        return val, dval
    return float(val[0]), float(dval[0])


def modulation_fields(s: GasScaling, state: ModulationState, y,
                      derivative: bool = False):
    """Localized polynomial fields (M_z, M_w) = phi(y) sum_i c_i y^i / i!."""
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    ph, dph = phi_cutoff(yv, derivative=True)
    mz = np.zeros_like(yv)
    mw = np.zeros_like(yv)
    dmz = np.zeros_like(yv)
    dmw = np.zeros_like(yv)
    for idx in range(state.order - 1):
        i = idx + 2
        mono = yv**i / math.factorial(i)
        dmono = i * yv ** (i - 1) / math.factorial(i)
        mz += state.z[idx] * ph * mono
        mw += state.w[idx] * ph * mono
        if derivative:
            dmz += state.z[idx] * (dph * mono + ph * dmono)
            dmw += state.w[idx] * (dph * mono + ph * dmono)
    if derivative:
        if np.ndim(y):
            return mz, mw, dmz, dmw
        return float(mz[0]), float(mw[0]), float(dmz[0]), float(dmw[0])
    if np.ndim(y):
        return mz, mw
    return float(mz[0]), float(mw[0])


# ---------------------------------------------------------------------------
# time-translation modulation (z_1 pinned to zero, w_1 free)

@dataclass
class TimeShiftState:
    tau: float
    w1: float
    T: float
    Tstar_estimate: float


class TimeShiftDomainError(ValueError):
    pass


def _w1_rate(s: GasScaling, w1: float) -> float:
    gamma, mu = s.gamma, s.mu
    x = (3 - gamma) / 4.0 * w1
    if mu - x <= 0:
        raise TimeShiftDomainError(
            f"w1={w1} too large: mu - (3-gamma)w1/4 = {mu - x} loses sign"
        )
    lin = (1.0 - (3 - gamma) / (gamma + 1) * mu / (mu - x)) * mu * w1
    quad = (gamma + 1) * mu / (4 * mu - (3 - gamma) * w1) * w1**2
    return -(lin + quad)


def time_shift_integrate(s: GasScaling, eps0: float, tau0: float = 0.0,
                         tau_end: float = 40.0, dt: float = 1e-3) -> list[TimeShiftState]:
    """Integrate the (w_1, T) system; w_1 decays to 0 and T accumulates the
    time translation, with T* reported as T(tau_end) plus a rigorous tail bound."""
    gamma, mu = s.gamma, s.mu
    if eps0 < 0:
        raise TimeShiftDomainError("eps0 must be nonnegative")
    if mu - (3 - gamma) / 4.0 * eps0 <= 0:
        raise TimeShiftDomainError("eps0 too large: T' denominator loses sign")

    def rhs(tau, w1, T):
        x = (3 - gamma) / 4.0 * w1
        dT = math.exp(-mu * tau) * x / (mu - x)
        return _w1_rate(s, w1), dT

    n = max(1, int(round((tau_end - tau0) / dt)))
    dt = (tau_end - tau0) / n
    w1, T = float(eps0), 0.0
    out = [TimeShiftState(tau=tau0, w1=w1, T=T, Tstar_estimate=float("nan"))]
    for step in range(n):
        tau = tau0 + step * dt
        k1 = rhs(tau, w1, T)
        k2 = rhs(tau + dt / 2, w1 + dt / 2 * k1[0], T + dt / 2 * k1[1])
        k3 = rhs(tau + dt / 2, w1 + dt / 2 * k2[0], T + dt / 2 * k2[1])
        k4 = rhs(tau + dt, w1 + dt * k3[0], T + dt * k3[1])
        w1 += dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        T += dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        out.append(TimeShiftState(tau=tau0 + (step + 1) * dt, w1=w1, T=T,
                                  Tstar_estimate=float("nan")))
    # tail: w1 nonincreasing, so T' <= e^{-mu tau} x_end/(mu - x_end) beyond tau_end
    x_end = (3 - gamma) / 4.0 * w1
    tail = math.exp(-mu * tau_end) / mu * x_end / (mu - x_end)
    for st in out:
        st.Tstar_estimate = T + tail
    return out


def time_shift_z1_residual(s: GasScaling, traj: list[TimeShiftState]) -> float:
    """Max residual of the pinned z_1 equation along the (w_1, T) trajectory.

    With e^{mu tau} T' = x/(mu-x) substituted, the z_1 equation is an
    identity; the residual measures integrator consistency only.
    """
    gamma, mu = s.gamma, s.mu
    worst = 0.0
    for st in traj:
        x = (3 - gamma) / 4.0 * st.w1
        emT = x / (mu - x)
        resid = (-(3 - gamma) * mu / (gamma + 1) * st.w1
                 + (4 * mu**2 / (gamma + 1) - (3 - gamma) * mu / (gamma + 1) * st.w1) * emT)
        worst = max(worst, abs(resid))
    return worst


def tstar_ceiling(s: GasScaling, eps0: float) -> float:
    """Closed-form bound ((3-gamma)eps0/4)/(mu^2 - (3-gamma)eps0 mu/4) at tau0=0."""
    gamma, mu = s.gamma, s.mu
    x = (3 - gamma) / 4.0 * eps0
    return x / (mu**2 - x * mu)
