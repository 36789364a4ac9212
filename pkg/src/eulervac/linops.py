"""Linearized operators, trivial-mode spectrum, and norm diagnostics.

The linearized transport operators act on nodal fields over a shared
graded grid.  Eigenfunctions of the uncut operator are closed-form in
the profile variable (K = 1/2 normalization), so spectral checks reduce
to residual evaluations with analytic derivatives.  Energy norms follow
the singular-weight / top-derivative pairing used by the stability
analysis, and the Hardy / interpolation inequalities are exercised on a
battery of polynomial-times-exponential test functions whose integrals
have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .profile import Profile, ProfileParams, dzbar, dzbar_higher, zbar
from .scaling import GasScaling, floor_snapped

_WEIGHT_CACHE: dict = {}


class SpectralDomainError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# finite differences on arbitrary grids (Fornberg weights)

def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights w[j,k] with sum_j w[j,k] f(x_j) = f^(k)(x0), k = 0..m."""
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def derivative_on_grid(grid: np.ndarray, values: np.ndarray, order: int,
                       stencil: int | None = None) -> np.ndarray:
    """order-th derivative at every node using local Fornberg stencils.

    The stencil is centered where possible and one-sided at the edges.
    Weight sets are cached on the normalized offset pattern, so uniform
    and geometric grids pay the Fornberg cost only once per pattern.
    """
    n = grid.size
    w = stencil or (order + 4 if order < 4 else order + 3)
    w = min(w, n)
    out = np.empty_like(values)
    for i in range(n):
        lo = min(max(i - w // 2, 0), n - w)
        xs = grid[lo:lo + w]
        scale = xs[-1] - xs[0]
        offs = (xs - grid[i]) / scale
        key = (order, tuple(np.round(offs, 12)))
        wk = _WEIGHT_CACHE.get(key)
        if wk is None:
            wk = fd_weights(offs, 0.0, order)[:, order]
            _WEIGHT_CACHE[key] = wk
        out[i] = np.dot(wk, values[lo:lo + w]) / scale**order
    return out


# ---------------------------------------------------------------------------
# grid fields

@dataclass
class GridField:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid[0] != 0.0 or np.any(np.diff(self.grid) <= 0):
            raise GridMismatchError("grid must start at 0 and increase strictly")
        if self.grid.shape != self.values.shape:
            raise GridMismatchError("grid/values shape mismatch")

    def same_grid(self, other: "GridField") -> bool:
        return self.grid.shape == other.grid.shape and np.array_equal(self.grid, other.grid)


def make_grid(y_max: float = 50.0, n_uniform: int = 2**13, n_tail: int = 512,
              y_split: float = 2.0) -> np.ndarray:
    """Uniform [0, y_split] block (high-order FD region) plus geometric tail."""
    uni = np.linspace(0.0, y_split, n_uniform + 1)
    if y_max <= y_split:
        return uni
    tail = np.geomspace(y_split, y_max, n_tail + 1)[1:]
    return np.concatenate([uni, tail])


# ---------------------------------------------------------------------------
# linearized operators

def apply_Lz(field: GridField, profile: Profile, localization=None,
             tau: float | None = None, fd_stencil: int = 6) -> GridField:
    """L_z f = (y + (gamma+1)/4 rz) f' + ((gamma+1)/4 rz' + mu - 1) f.

    With localization=None the coefficients use the uncut profile zbar
    (the Appendix-level operator); otherwise rz is the localized profile
    at time tau and localization = (config, tau-source) supplies it.
    """
    s = profile.scaling
    q = (s.gamma + 1.0) / 4.0
    y = field.grid
    rz, drz = _ring_or_bar(profile, localization, tau, y)
    df = derivative_on_grid(y, field.values, 1, stencil=fd_stencil)
    vals = (y + q * rz) * df + (q * drz + s.mu - 1.0) * field.values
    return GridField(grid=y, values=vals)


def apply_Lw(field: GridField, profile: Profile, localization=None,
             tau: float | None = None, fd_stencil: int = 6) -> GridField:
    """L_w f = (y + (3-gamma)/4 rz) f' + (mu - 1) f (no zeroth-order profile term)."""
    s = profile.scaling
    y = field.grid
    rz, _ = _ring_or_bar(profile, localization, tau, y)
    df = derivative_on_grid(y, field.values, 1, stencil=fd_stencil)
    vals = (y + (3.0 - s.gamma) / 4.0 * rz) * df + (s.mu - 1.0) * field.values
    return GridField(grid=y, values=vals)


def _ring_or_bar(profile: Profile, localization, tau, y):
    if localization is None:
        return zbar(profile.params, y), dzbar(profile.params, y)
    from .localization import ring_z

    config = localization
    if tau is None:
        raise ValueError("tau required when applying the localized operator")
    return ring_z(config, profile, tau, y, derivative=True)


# ---------------------------------------------------------------------------
# spectrum of the uncut operator (K = 1/2 normalization)

def unstable_spectrum(s: GasScaling) -> np.ndarray:
    """Non-positive eigenvalues j(1-mu)-1 admitted by the Hoelder class."""
    if s.in_S:
        js = range(0, int(round(s.beta)) + 1)
        vals = [j * (1 - s.mu) - 1 for j in js]
    else:
        js = range(1, floor_snapped(s.beta) + 1)
        vals = [j * (1 - s.mu) - 1 for j in js] + [0.0]
    return np.array(sorted(vals))


def eigenfunction_phi(s: GasScaling, a: float, y, params: ProfileParams,
                      derivative: bool = False):
    """phi_a = u^{(1+a)/(1-mu)} / (1-mu + u^{mu/(1-mu)}) with u = -zbar.

    Defined on the K = 1/2 profile; a must belong to the unstable
    spectrum.  Near the origin phi_a ~ y^{(1+a)/(1-mu)}.
    """
    if abs(params.K - 0.5) > 1e-14:
        raise SpectralDomainError("eigenfunction formula requires the K = 1/2 profile")
    spec = unstable_spectrum(s)
    if np.min(np.abs(spec - a)) > 1e-9:
        raise SpectralDomainError(f"a={a} is not in the unstable spectrum {spec}")
    p = (1.0 + a) / (1.0 - s.mu)
    q = s.mu / (1.0 - s.mu)
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    u = -zbar(params, yv)
    du = -dzbar(params, yv)
    pos = u > 0
    phi = np.zeros_like(yv)
    dphi = np.zeros_like(yv)
    up = np.where(pos, u, 1.0)
    denom = 1.0 - s.mu + up**q
    phi[pos] = (up**p / denom)[pos]
    if p == 0:
        phi[~pos] = 1.0 / (1.0 - s.mu)
    if derivative:
        dphi_du = up ** (p - 1.0) * (p * (1.0 - s.mu) + (p - q) * up**q) / denom**2
        dphi[pos] = (dphi_du * du)[pos]
        # u = 0 limits (mu >= 1/2 gives q >= 1, so these are the only cases)
        if p == 1.0:
            dphi[~pos] = du[~pos] / (1.0 - s.mu)
        elif p == 0.0 and q == 1.0:
            dphi[~pos] = -du[~pos] / (1.0 - s.mu) ** 2
        if np.ndim(y):
            return phi, dphi
        return float(phi[0]), float(dphi[0])
    return phi if np.ndim(y) else float(phi[0])


def eigen_residual(s: GasScaling, a: float, params: ProfileParams,
                   y: np.ndarray, analytic: bool = True) -> float:
    """Relative sup-residual of L phi_a = a phi_a on the given nodes."""
    q = (s.gamma + 1.0) / 4.0
    phi, dphi = eigenfunction_phi(s, a, y, params, derivative=True)
    if not analytic:
        dphi = derivative_on_grid(y, phi, 1)
    zb = zbar(params, y)
    dzb = dzbar(params, y)
    L = (s.mu - 1.0 + q * dzb) * phi + (y + q * zb) * dphi
    return float(np.max(np.abs(L - a * phi)) / np.max(np.abs(phi)))


def symmetry_modes(profile: Profile, grid: np.ndarray | None = None) -> dict[str, GridField]:
    """Symmetry directions of the profile: Galilean boost v, space shift x0,
    time shift T, and amplitude scaling alpha."""
    s = profile.scaling
    y = profile.grid if grid is None else grid
    zb = zbar(profile.params, y)
    dzb = dzbar(profile.params, y)
    d = s.delta
    return {
        "v": GridField(grid=y, values=d * dzb + 4.0 / (s.gamma + 1.0)),
        "x0": GridField(grid=y, values=dzb),
        "T": GridField(grid=y, values=(1.0 - d) * zb + d * y * dzb),
        "alpha": GridField(grid=y, values=zb - y * dzb),
    }


SYMMETRY_EIGENVALUES = {"x0": -1.0, "T": None, "v": None, "alpha": 0.0}


def symmetry_eigenvalue(s: GasScaling, name: str) -> float:
    return {"x0": -1.0, "T": -s.mu, "v": -(1.0 - s.mu), "alpha": 0.0}[name]


def symmetry_residual(profile: Profile, name: str, y: np.ndarray) -> float:
    """Relative sup-residual of L(Lambda zbar) = lambda (Lambda zbar),
    using analytic first and second profile derivatives."""
    s = profile.scaling
    q = (s.gamma + 1.0) / 4.0
    d = s.delta
    zb = zbar(profile.params, y)
    dzb = dzbar(profile.params, y)
    d2 = np.array([dzbar_higher(profile.params, t, 2) for t in y])
    f = symmetry_modes(profile, y)[name].values
    fp = {
        "v": d * d2,
        "x0": d2,
        "T": dzb + d * y * d2,
        "alpha": -y * d2,
    }[name]
    L = (s.mu - 1.0 + q * dzb) * f + (y + q * zb) * fp
    lam = symmetry_eigenvalue(s, name)
    return float(np.max(np.abs(L - lam * f)) / np.max(np.abs(f)))


def weighted_gap(s: GasScaling, m: int) -> tuple[float, bool]:
    """Square-integrability threshold a_min = m(1-mu) - 3/2 + mu/2 for
    phi_a / y^m near the origin; zero gap flags the half-integer criticality."""
    if m < 1:
        raise ValueError("weight exponent m must be >= 1")
    a_min = m * (1.0 - s.mu) - 1.5 + s.mu / 2.0
    return a_min, abs(a_min) <= 1e-12


def spectral_report(s: GasScaling, profile: Profile, grid: np.ndarray | None = None) -> dict:
    y = make_grid(y_max=1e4, n_uniform=2**10, n_tail=256) if grid is None else grid
    spec = unstable_spectrum(s)
    residuals = [eigen_residual(s, a, profile.params, y) for a in spec]
    a_min, _ = weighted_gap(s, s.n_mu)
    return {
        "mu": s.mu,
        "gamma": s.gamma,
        "spectrum": [float(a) for a in spec],
        "residuals": residuals,
        "weighted_gap": {"m": s.n_mu, "a_min": a_min},
    }


# ---------------------------------------------------------------------------
# energy norms

@dataclass
class EnergyNorms:
    weighted: float     # ||f / y^n_mu||_L2
    top: float          # ||d^n_mu f||_L2
    h1: float           # ||d_y f||_L2
    l2: float           # ||f||_L2
    vanishing_ok: bool


def _taylor_vanishing_ok(grid, values, n_mu, tol=1e-6) -> bool:
    m = n_mu + 7
    xs, vs = grid[:m], values[:m]
    coef = np.polynomial.polynomial.polyfit(xs, vs, n_mu + 2)
    lead = max(abs(coef[n_mu]), np.max(np.abs(vs)) / max(xs[-1], 1e-300) ** n_mu, 1e-300)
    return all(abs(coef[j]) <= tol * lead * xs[-1] ** (n_mu - j) for j in range(n_mu))


def energy_norms_field(f: GridField, s: GasScaling, top_stencil: int | None = None) -> EnergyNorms:
    y, v = f.grid, f.values
    n = s.n_mu
    ok = _taylor_vanishing_ok(y, v, n)
    # weighted norm: first cell closed by the leading monomial v ~ c y^n
    wints = (v[1:] / y[1:] ** n) ** 2
    first = (v[1] / y[1] ** n) ** 2 * y[1]
    weighted2 = first + np.trapezoid(wints, y[1:])
    dn = derivative_on_grid(y, v, n, stencil=top_stencil or n + 2)
    d1 = derivative_on_grid(y, v, 1)
    return EnergyNorms(
        weighted=float(np.sqrt(weighted2)),
        top=float(np.sqrt(np.trapezoid(dn**2, y))),
        h1=float(np.sqrt(np.trapezoid(d1**2, y))),
        l2=float(np.sqrt(np.trapezoid(v**2, y))),
        vanishing_ok=bool(ok),
    )


def energy_norms(Z: GridField, W: GridField, s: GasScaling) -> dict[str, EnergyNorms]:
    if not Z.same_grid(W):
        raise GridMismatchError("Z and W must share one grid")
    return {"Z": energy_norms_field(Z, s), "W": energy_norms_field(W, s)}


# ---------------------------------------------------------------------------
# inequality battery: polynomial x exponential test functions

@dataclass(frozen=True)
class PolyExp:
    """f(y) = sum_k c_k y^k  *  exp(-a y); closed under differentiation."""

    coeffs: tuple  # ((power, coef), ...)
    rate: float

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        p = sum(c * y**k for k, c in self.coeffs)
        return p * np.exp(-self.rate * y)

    def deriv(self, order: int = 1) -> "PolyExp":
        f = self
        for _ in range(order):
            d: dict[int, float] = {}
            for k, c in f.coeffs:
                if k > 0:
                    d[k - 1] = d.get(k - 1, 0.0) + k * c
                d[k] = d.get(k, 0.0) - f.rate * c
            f = PolyExp(tuple(sorted(d.items())), f.rate)
        return f

    def min_power(self) -> int:
        return min(k for k, c in self.coeffs if c != 0.0)

    def l2_weighted_sq_exact(self, weight_power: int = 0) -> float:
        """Exact integral of y^{2*weight_power} f(y)^2 over [0, inf)."""
        total = 0.0
        for j, cj in self.coeffs:
            for k, ck in self.coeffs:
                p = j + k + 2 * weight_power
                if p < 0:
                    raise ValueError("negative power in closed-form integral")
                total += cj * ck * math.factorial(p) / (2 * self.rate) ** (p + 1)
        return total


def default_battery(n: int) -> list[PolyExp]:
    """Ten smooth functions vanishing to order n-1 at 0 and decaying."""
    return [
        PolyExp(((n, 1.0),), 1.0),
        PolyExp(((n, 1.0),), 2.0),
        PolyExp(((n + 1, 1.0),), 1.0),
        PolyExp(((n + 2, 1.0),), 0.5),
        PolyExp(((n, 1.0), (n + 3, 1.0)), 1.0),
        PolyExp(((n, 1.0), (n + 1, -0.5)), 1.0),
        PolyExp(((2 * n, 1.0),), 3.0),
        PolyExp(((n + 1, 1.0), (n + 4, 2.0)), 2.0),
        PolyExp(((n, 1.0), (n + 1, 1.0), (n + 2, 1.0)), 1.0),
        PolyExp(((n + 5, 1.0),), 0.25),
    ]


def _battery_grid(rate: float, n_nodes: int) -> np.ndarray:
    y_max = max(60.0, 80.0 / rate)
    return np.linspace(0.0, y_max, n_nodes + 1)


def inequality_checks(n: int, battery: list[PolyExp] | None = None,
                      n_nodes: int = 2**12, y_star: float = 1.0) -> dict:
    """Evaluate the Hardy, weighted-interpolation, and sup-norm
    interpolation inequalities on the battery by quadrature.

    Returns per-function ratio tables; every ratio must be finite, and
    refinement stability is checked by calling twice with different
    n_nodes.
    """
    battery = default_battery(n) if battery is None else battery
    rows = []
    for f in battery:
        grid = _battery_grid(f.rate, n_nodes)
        derivs = [f.deriv(i) if i else f for i in range(n + 1)]
        vals = [d(grid) for d in derivs]
        dn_l2 = math.sqrt(np.trapezoid(vals[n] ** 2, grid))
        d1_l2 = math.sqrt(np.trapezoid(vals[1] ** 2, grid))
        wf_l2 = math.sqrt(_weighted_l2_sq(grid, vals[0], n))
        hardy = []
        for i in range(n):
            lhs = math.sqrt(_weighted_l2_sq(grid, vals[i], n - i))
            hardy.append(lhs / dn_l2)
        gn = []
        tail_grid = np.linspace(y_star, grid[-1], grid.size)
        for i in range(1, n):
            tv = derivs[i](tail_grid)
            lhs = math.sqrt(np.trapezoid((tail_grid ** (i - n) * tv) ** 2, tail_grid))
            theta = i / n
            gn.append(lhs / (wf_l2 ** (1 - theta) * dn_l2**theta))
        linf = []
        for j in range(1, n):
            theta = (2 * j - 1) / (2 * (n - 1))
            linf.append(np.max(np.abs(vals[j])) / (d1_l2 ** (1 - theta) * dn_l2**theta))
        rows.append({"hardy": hardy, "gn": gn, "linf": linf})
    flat = [r for row in rows for key in ("hardy", "gn", "linf") for r in row[key]]
    return {
        "n": n,
        "rows": rows,
        "max_ratio": max(flat),
        "all_finite": all(math.isfinite(r) for r in flat),
    }


def _weighted_l2_sq(grid: np.ndarray, vals: np.ndarray, m: int) -> float:
    """integral of (y^-m vals)^2 with the first cell closed by the
    leading-monomial form (vals ~ c y^m near 0 under the vanishing order)."""
    y, v = grid[1:], vals[1:]
    body = float(np.trapezoid((v / y**m) ** 2, y))
    first = (vals[1] / grid[1] ** m) ** 2 * grid[1]
    return body + first
