"""Direct PDE simulation: self-similar system and physical Riemann invariants.

Two transport systems are integrated on 1D grids with first-order
upwind or semi-Lagrangian stepping: the self-similar pair

    d_tau f + (y + lam_hat) d_y f + (mu-1) f = 0

for (zhat, what), optionally in perturbation form for the remainder
(Z, W) with the modulation, transport, and far-field source terms
assembled explicitly, and the physical pair

    d_t z + lam1 d_x z = 0,   d_t w + lam2 d_x w = 0

up to (not through) the gradient blowup.  Both routes are mutual
oracles through the self-similar change of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import modulation as mod
from .localization import CutoffConfig, build_flow_cache, chi0, source_Sz
from .profile import Profile, dzbar, zbar
from .scaling import GasScaling


class StepSizeError(RuntimeError):
    def __init__(self, dt, required):
        super().__init__(f"CFL violation: dt={dt:.3e} exceeds allowed {required:.3e}")
        self.required_dt = required


class ResolutionExhausted(RuntimeError):
    """The grid can no longer represent the gradient."""


class FitWindowError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    scheme: str = "upwind"      # "upwind" | "semilag"
    cfl: float = 0.9

    def __post_init__(self):
        if self.scheme not in ("upwind", "semilag"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


# ---------------------------------------------------------------------------
# generic kernels

def _upwind_derivative(grid, f, v):
    db = np.empty_like(f)
    db[1:] = np.diff(f) / np.diff(grid)
    db[0] = db[1]
    dfw = np.empty_like(f)
    dfw[:-1] = db[1:]
    dfw[-1] = db[-1]  # linear-extrapolation ghost: forward == backward there
    return np.where(v >= 0, db, dfw)


def _cfl_dt(grid, v, cfl):
    dx = np.diff(grid)
    vmax = np.maximum(np.abs(v[1:]), np.abs(v[:-1]))
    with np.errstate(divide="ignore"):
        return cfl * float(np.min(np.where(vmax > 0, dx / vmax, np.inf)))


def _cubic_interp(xg, f, xq):
    """Local 4-point Lagrange interpolation on a sorted grid, clamped."""
    n = xg.size
    j = np.searchsorted(xg, xq) - 1
    j = np.clip(j, 1, n - 3)
    out = np.zeros_like(xq)
    for k in range(4):
        idx = j - 1 + k
        w = np.ones_like(xq)
        for m in range(4):
            if m == k:
                continue
            om = j - 1 + m
            w *= (xq - xg[om]) / (xg[idx] - xg[om])
        out += w * f[idx]
    return out


def _advect(grid, f, v, dt, damping, config: SimConfig):
    """One step of d_t f + v d_x f + damping * f = 0 with f(0) pinned to 0."""
    if config.scheme == "upwind":
        req = _cfl_dt(grid, v, config.cfl)
        if dt > req:
            raise StepSizeError(dt, req)
        fn = f - dt * (v * _upwind_derivative(grid, f, v) + damping * f)
    else:
        vmid = _cubic_interp(grid, v, np.clip(grid - 0.5 * dt * v, grid[0], grid[-1]))
        foot = np.clip(grid - dt * vmid, grid[0], grid[-1])
        fn = _cubic_interp(grid, f, foot) * math.exp(-damping * dt)
    fn[0] = 0.0
    return fn


# ---------------------------------------------------------------------------
# self-similar states and ring_z providers

@dataclass
class SelfSimilarState:
    """Direct unknowns (zhat, what) on the grid at time tau."""

    tau: float
    grid: np.ndarray
    zhat: np.ndarray
    what: np.ndarray


@dataclass
class PerturbationState:
    """Remainder (Z, W) plus the modulation coefficients at time tau."""

    tau: float
    grid: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    modstate: mod.ModulationState


class StaticRing:
    """ring_z on a domain fully inside the cutoff plateau: chi = 1, no source."""

    def __init__(self, profile: Profile, grid: np.ndarray):
        self.rz = zbar(profile.params, grid)
        self.drz = dzbar(profile.params, grid)
        self.src = np.zeros_like(grid)

    def __call__(self, tau):
        return self.rz, self.drz, self.src


class CachedCutoffRing:
    """ring_z with the transported cutoff, via one flow-map cache.

    chi(tau, y) = chi0(P(tau, y)) with P interpolated from cached
    characteristics (linear between cache times); d_y ring and the
    source use finite differences on the grid.
    """

    def __init__(self, config: CutoffConfig, profile: Profile, grid: np.ndarray,
                 tau_end: float, n_tau: int = 81):
        self.profile = profile
        self.config = config
        self.grid = grid
        self.zb = zbar(profile.params, grid)
        self.dzb = dzbar(profile.params, grid)
        self.s = profile.scaling
        hi = grid[-1]
        self.cache = build_flow_cache(
            profile, config.tau0, tau_end, n_tau=n_tau,
            p_lo=min(1e-3, 0.1 * config.y0), p_hi=max(4.0 * hi, 4.0 * config.y0),
            n_labels=257,
        )

    def _chi_slice(self, tau):
        taus = self.cache.taus
        i = np.clip(np.searchsorted(taus, tau) - 1, 0, taus.size - 2)
        th = 0.0 if taus[i + 1] == taus[i] else (tau - taus[i]) / (taus[i + 1] - taus[i])
        out = np.ones_like(self.grid)
        pos = self.grid > 0
        p0 = self.cache.p_of_y(taus[i], self.grid[pos])
        p1 = self.cache.p_of_y(taus[i + 1], self.grid[pos])
        out[pos] = (1 - th) * chi0(self.config, p0) + th * chi0(self.config, p1)
        return np.clip(out, 0.0, 1.0)

    def __call__(self, tau):
        c = self._chi_slice(tau)
        rz = c * self.zb
        drz = np.gradient(rz, self.grid, edge_order=2)
        src = (self.s.gamma + 1) / 4.0 * self.zb * (1.0 - c) * drz
        return rz, drz, src


# ---------------------------------------------------------------------------
# self-similar stepping

def step_selfsimilar(state: SelfSimilarState, dt: float, s: GasScaling,
                     config: SimConfig) -> SelfSimilarState:
    """One step of the direct system for (zhat, what)."""
    gamma, mu = s.gamma, s.mu
    y, zh, wh = state.grid, state.zhat, state.what
    lam1 = (gamma + 1) / 4 * zh + (3 - gamma) / 4 * wh
    lam2 = (3 - gamma) / 4 * zh + (gamma + 1) / 4 * wh
    zn = _advect(y, zh, y + lam1, dt, mu - 1.0, config)
    wn = _advect(y, wh, y + lam2, dt, mu - 1.0, config)
    return SelfSimilarState(tau=state.tau + dt, grid=y, zhat=zn, what=wn)


def step_perturbation(state: PerturbationState, dt: float, s: GasScaling,
                      ring_provider, config: SimConfig) -> PerturbationState:
    """One step of the remainder system with assembled modulation terms.

    All d_y Z transport contributions (profile, modulation, and the
    quadratic self-transport) ride one upwinded velocity; the remaining
    zeroth-order, coupling, transport-residual, and source terms are
    explicit.
    """
    gamma, mu = s.gamma, s.mu
    y, Z, W = state.grid, state.Z, state.W
    rz, drz, src = ring_provider(state.tau)
    ms = state.modstate
    mz, mw, dmz, dmw = mod.modulation_fields(s, ms, y, derivative=True)
    dzc, dwc = mod.rhs_modulation(s, ms)
    dtm = mod.ModulationState(tau=ms.tau, z=dzc, w=dwc)
    dtmz, dtmw = mod.modulation_fields(s, dtm, y)

    vz = y + (gamma + 1) / 4 * (rz + mz + Z) + (3 - gamma) / 4 * (mw + W)
    vw = y + (3 - gamma) / 4 * (rz + mz + Z) + (gamma + 1) / 4 * (mw + W)

    # T_z = d_tau M_z + L_z M_z + (3-gamma)/4 drz M_w + ((g+1)/4 Mz + (3-g)/4 Mw) dMz
    Tz = (dtmz + (y + (gamma + 1) / 4 * rz) * dmz
          + ((gamma + 1) / 4 * drz + mu - 1) * mz
          + (3 - gamma) / 4 * drz * mw
          + ((gamma + 1) / 4 * mz + (3 - gamma) / 4 * mw) * dmz)
    Tw = (dtmw + (y + (3 - gamma) / 4 * rz) * dmw + (mu - 1) * mw
          + ((3 - gamma) / 4 * mz + (gamma + 1) / 4 * mw) * dmw)

    if config.scheme == "upwind":
        req = min(_cfl_dt(y, vz, config.cfl), _cfl_dt(y, vw, config.cfl))
        if dt > req:
            raise StepSizeError(dt, req)
        dZ = _upwind_derivative(y, Z, vz)
        dW = _upwind_derivative(y, W, vw)
    else:
        dZ = np.gradient(Z, y, edge_order=2)
        dW = np.gradient(W, y, edge_order=2)

    rhs_Z = -(vz * dZ
              + ((gamma + 1) / 4 * drz + mu - 1) * Z
              + (3 - gamma) / 4 * drz * W
              + ((gamma + 1) / 4 * Z + (3 - gamma) / 4 * W) * dmz
              + Tz) + src
    rhs_W = -(vw * dW
              + (mu - 1) * W
              + ((gamma + 1) / 4 * W + (3 - gamma) / 4 * Z) * dmw
              + Tw)
    Zn = Z + dt * rhs_Z
    Wn = W + dt * rhs_W
    Zn[0] = 0.0
    Wn[0] = 0.0
    # modulation coefficients advance with one RK4 step of their own ODE
    traj = mod.integrate_modulation(s, ms, ms.tau + dt, dt=dt)
    return PerturbationState(tau=state.tau + dt, grid=y, Z=Zn, W=Wn,
                             modstate=traj.state(-1))


def extract_boundary_taylor(grid: np.ndarray, values: np.ndarray, order: int,
                            n_nodes: int | None = None) -> np.ndarray:
    """Taylor coefficients (d^i f)(0), i = 0..order, by one-sided LSQ fit.

    Fits a degree order+1 polynomial through the first n_nodes grid
    points; exact for polynomials up to that degree, O(dy^2) otherwise.
    """
    m = n_nodes or (order + 3)
    if grid.size < m:
        raise FitWindowError(f"need at least {m} nodes near 0, have {grid.size}")
    xs, vs = grid[:m], values[:m]
    coef = np.polynomial.polynomial.polyfit(xs, vs, order + 1)
    return np.array([coef[i] * math.factorial(i) for i in range(order + 1)])


# ---------------------------------------------------------------------------
# self-similar runs

@dataclass
class SSRunResult:
    taus: np.ndarray
    coeff_z: np.ndarray          # extracted z_i series, shape (n_samples, order-1)
    coeff_w: np.ndarray
    sup_dz: np.ndarray           # sup |d_y(zhat - ring_z)|
    sup_dw: np.ndarray
    sup_pert: np.ndarray         # sup |zhat - ring_z|, |what|
    stopped_early: bool = False
    stop_reason: str = ""


def make_uniform_grid(y_cap: float, n: int) -> np.ndarray:
    return np.linspace(0.0, y_cap, n + 1)


def initial_direct_state(profile: Profile, grid: np.ndarray, tau0: float,
                         modstate: mod.ModulationState | None = None,
                         Z0=None, W0=None) -> SelfSimilarState:
    """zhat = zbar + M_z + Z, what = M_w + W on a plateau domain."""
    s = profile.scaling
    zh = zbar(profile.params, grid)
    wh = np.zeros_like(grid)
    if modstate is not None:
        mz, mw = mod.modulation_fields(s, modstate, grid)
        zh = zh + mz
        wh = wh + mw
    if Z0 is not None:
        zh = zh + Z0
    if W0 is not None:
        wh = wh + W0
    return SelfSimilarState(tau=tau0, grid=grid, zhat=zh, what=wh)


def run_selfsimilar(profile: Profile, state: SelfSimilarState, tau_end: float,
                    dt: float, config: SimConfig = SimConfig(),
                    extract_order: int = 2, sample_every: int = 20,
                    extract_nodes: int | None = None,
                    instability_factor: float = 10.0,
                    reference: str = "discrete") -> SSRunResult:
    """Direct evolution on a plateau domain (chi = 1 throughout).

    Perturbation diagnostics subtract a reference: with
    reference="discrete" the unperturbed steady state is co-evolved by
    the same scheme and subtracted, which cancels the background
    truncation error and isolates the perturbation dynamics; with
    reference="exact" the tabulated profile is subtracted, exposing the
    raw scheme drift (the steady-preservation diagnostic).
    """
    if reference not in ("discrete", "exact"):
        raise ValueError(f"unknown reference {reference!r}")
    s = profile.scaling
    ring = zbar(profile.params, state.grid)
    dring = dzbar(profile.params, state.grid)
    ref_state = SelfSimilarState(tau=state.tau, grid=state.grid,
                                 zhat=ring.copy(), what=np.zeros_like(ring))
    taus, cz, cw, sdz, sdw, sp = [], [], [], [], [], []
    pert0 = max(float(np.max(np.abs(state.zhat - ring))),
                float(np.max(np.abs(state.what))), 1e-300)
    nsteps = max(1, int(round((tau_end - state.tau) / dt)))
    dt = (tau_end - state.tau) / nsteps
    stopped, reason = False, ""

    def sample(st, ref):
        taus.append(st.tau)
        base_z = ref.zhat if reference == "discrete" else ring
        base_w = ref.what if reference == "discrete" else np.zeros_like(ring)
        tz = st.zhat - base_z
        tw = st.what - base_w
        coef_z = extract_boundary_taylor(st.grid, tz, extract_order, extract_nodes)
        coef_w = extract_boundary_taylor(st.grid, tw, extract_order, extract_nodes)
        cz.append(coef_z[2:])
        cw.append(coef_w[2:])
        dz = np.gradient(st.zhat, st.grid, edge_order=2) - dring
        dw = np.gradient(st.what, st.grid, edge_order=2)
        sdz.append(float(np.max(np.abs(dz))))
        sdw.append(float(np.max(np.abs(dw))))
        sp.append(max(float(np.max(np.abs(tz))), float(np.max(np.abs(tw)))))

    sample(state, ref_state)
    for k in range(nsteps):
        state = step_selfsimilar(state, dt, s, config)
        if reference == "discrete":
            ref_state = step_selfsimilar(ref_state, dt, s, config)
        if (k + 1) % sample_every == 0 or k == nsteps - 1:
            sample(state, ref_state)
            if sp[-1] > instability_factor * pert0:
                stopped, reason = True, "instability: perturbation grew 10x"
                break
    return SSRunResult(
        taus=np.asarray(taus), coeff_z=np.asarray(cz), coeff_w=np.asarray(cw),
        sup_dz=np.asarray(sdz), sup_dw=np.asarray(sdw), sup_pert=np.asarray(sp),
        stopped_early=stopped, stop_reason=reason,
    )


def run_perturbation(profile: Profile, state: PerturbationState, tau_end: float,
                     dt: float, ring_provider, config: SimConfig = SimConfig(),
                     sample_every: int = 20):
    """Perturbation-form evolution; returns sampled (taus, states)."""
    s = profile.scaling
    nsteps = max(1, int(round((tau_end - state.tau) / dt)))
    dt = (tau_end - state.tau) / nsteps
    samples = [(state.tau, state)]
    for k in range(nsteps):
        state = step_perturbation(state, dt, s, ring_provider, config)
        if (k + 1) % sample_every == 0 or k == nsteps - 1:
            samples.append((state.tau, state))
    return samples


# ---------------------------------------------------------------------------
# physical space

@dataclass
class PhysicalState:
    t: float
    grid: np.ndarray
    z: np.ndarray
    w: np.ndarray

    @property
    def u(self):
        return 0.5 * (self.z + self.w)

    def soundspeed(self, gamma: float):
        return (gamma - 1.0) / 4.0 * (self.w - self.z)


def tau_of_t(mu: float, t: float) -> float:
    if t >= 0:
        raise ValueError("physical time must be negative before blowup")
    return -math.log(mu * (-t)) / mu


def t_of_tau(mu: float, tau: float) -> float:
    return -math.exp(-mu * tau) / mu


def physical_from_selfsimilar(profile: Profile, t0: float, x: np.ndarray,
                              y0: float | None = None) -> PhysicalState:
    """Map the (cutoff-truncated) profile to physical variables at t0 < 0.

    z(t0, x) = delta (-t0)^{delta-1} chi0(y) zbar(y), y = x / (-t0)^delta,
    w = 0.  The default cutoff scale e^{tau(t0)} matches the theorem
    normalization and keeps the data square-integrable.
    """
    if t0 >= 0:
        raise ValueError("t0 must be negative")
    s = profile.scaling
    y = x / (-t0) ** s.delta
    amp = s.delta * (-t0) ** (s.delta - 1.0)
    zb = zbar(profile.params, y)
    scale = float(np.exp(tau_of_t(s.mu, t0))) if y0 is None else y0
    cut = chi0(CutoffConfig(y0=scale, tau0=0.0), y)
    return PhysicalState(t=t0, grid=np.asarray(x, dtype=float), z=amp * cut * zb,
                         w=np.zeros_like(y))


def physical_to_selfsimilar(state: PhysicalState, s: GasScaling):
    """Inverse of the self-similar ansatz: (tau, y, zhat, what)."""
    tau = tau_of_t(s.mu, state.t)
    y = state.grid / (-state.t) ** s.delta
    amp = s.delta * (-state.t) ** (s.delta - 1.0)
    return tau, y, state.z / amp, state.w / amp


def step_physical(state: PhysicalState, dt: float, s: GasScaling,
                  config: SimConfig, slope_guard: float = 0.1) -> PhysicalState:
    """One upwind/semi-Lagrangian step of the Riemann-invariant system."""
    if state.t + dt >= 0:
        raise ValueError("cannot step to or past the blowup time t=0")
    gamma = s.gamma
    x, z, w = state.grid, state.z, state.w
    lam1 = (gamma + 1) / 4 * z + (3 - gamma) / 4 * w
    lam2 = (3 - gamma) / 4 * z + (gamma + 1) / 4 * w
    slopes = np.abs(np.diff(z) / np.diff(x))
    if np.max(slopes * np.diff(x)) > slope_guard:
        raise ResolutionExhausted(
            f"max |dz/dx| * dx = {np.max(slopes * np.diff(x)):.3f} exceeds {slope_guard}"
        )
    zn = _advect(x, z, lam1, dt, 0.0, config)
    wn = _advect(x, w, lam2, dt, 0.0, config)
    return PhysicalState(t=state.t + dt, grid=x, z=zn, w=wn)


def boundary_slope(state: PhysicalState) -> float:
    """One-sided second-order d_x z at the vacuum point."""
    x, z = state.grid, state.z
    h1, h2 = x[1] - x[0], x[2] - x[0]
    # weights of the 3-point one-sided first-derivative formula at x0
    c1 = h2 / (h1 * (h2 - h1))
    c2 = -h1 / (h2 * (h2 - h1))
    return float(c1 * (z[1] - z[0]) + c2 * (z[2] - z[0]))


@dataclass
class BlowupReport:
    times: np.ndarray
    boundary_slopes: np.ndarray
    max_slopes: np.ndarray
    argmax_x: np.ndarray
    fit_slope: float             # d/dt of 1/d_x z(t,0)
    fit_slope_stderr: float
    t_blowup: float              # root of the linear fit
    t_blowup_stderr: float
    location: float              # argmax |d_x z| at the final sample


def run_physical(state: PhysicalState, t_end: float, s: GasScaling,
                 config: SimConfig = SimConfig(), sample_every: int = 25,
                 dt_cap: float = math.inf, dt_scale: float = 1.0):
    """Evolve to t_end < 0, recording the slope series for blowup_detect.

    dt is chosen from the local CFL bound each step (times dt_scale,
    which may exceed 1 for the semi-Lagrangian scheme) and additionally
    capped so the step never jumps past the singular time.
    """
    times, bslopes, mslopes, amx = [], [], [], []

    def sample(st):
        times.append(st.t)
        bslopes.append(boundary_slope(st))
        cell = np.diff(st.z) / np.diff(st.grid)
        j = int(np.argmax(np.abs(cell)))
        mslopes.append(float(np.abs(cell[j])))
        amx.append(float(0.5 * (st.grid[j] + st.grid[j + 1])))

    sample(state)
    k = 0
    while state.t < t_end:
        gamma = s.gamma
        lam1 = (gamma + 1) / 4 * state.z + (3 - gamma) / 4 * state.w
        lam2 = (3 - gamma) / 4 * state.z + (gamma + 1) / 4 * state.w
        dt = min(dt_scale * _cfl_dt(state.grid, lam1, config.cfl),
                 dt_scale * _cfl_dt(state.grid, lam2, config.cfl), dt_cap,
                 t_end - state.t, 0.45 * (-state.t))
        state = step_physical(state, dt, s, config)
        k += 1
        if k % sample_every == 0 or state.t >= t_end:
            sample(state)
    return state, (np.asarray(times), np.asarray(bslopes),
                   np.asarray(mslopes), np.asarray(amx))


def blowup_detect(series) -> BlowupReport:
    """Least-squares fit of 1/|slope| vs t; the root extrapolates the blowup."""
    times, bslopes, mslopes, amx = series
    inv = 1.0 / bslopes
    A = np.vstack([times, np.ones_like(times)]).T
    coef, res, *_ = np.linalg.lstsq(A, inv, rcond=None)
    dof = max(times.size - 2, 1)
    sigma2 = (res[0] / dof) if res.size else 0.0
    var_m = sigma2 / np.sum((times - times.mean()) ** 2)
    m, b = coef
    t_star = -b / m
    t_star_err = abs(t_star) * math.sqrt(var_m) / abs(m) if m != 0 else math.inf
    return BlowupReport(
        times=times, boundary_slopes=bslopes, max_slopes=mslopes, argmax_x=amx,
        fit_slope=float(m), fit_slope_stderr=float(math.sqrt(var_m)),
        t_blowup=float(t_star), t_blowup_stderr=float(t_star_err),
        location=float(amx[-1]),
    )


def holder_fit(state: PhysicalState, window: tuple[float, float]) -> tuple[float, float]:
    """Log-log slope of |z(t, .)| over an x-window: the Hoelder exponent."""
    x, z = state.grid, state.z
    mask = (x >= window[0]) & (x <= window[1]) & (np.abs(z) > 0)
    if np.count_nonzero(mask) < 8:
        raise FitWindowError(f"window {window} contains too few resolved nodes")
    lx, lz = np.log(x[mask]), np.log(np.abs(z[mask]))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, lz, rcond=None)
    dof = max(lx.size - 2, 1)
    sigma2 = (res[0] / dof) if res.size else 0.0
    stderr = math.sqrt(sigma2 / np.sum((lx - lx.mean()) ** 2))
    return float(coef[0]), stderr
