import numpy as np
import pytest

from eulervac import localization as loc
from eulervac.profile import ProfileParams, build_profile, dzbar, zbar
from eulervac.scaling import derive_indices


@pytest.fixture(scope="module")
def prof():
    return build_profile(ProfileParams(scaling=derive_indices(2.0, 2 / 3), K=0.5))


@pytest.fixture(scope="module")
def cfg():
    return loc.CutoffConfig.at_scale(3.0)


# ------------------------------------------------------------------ chi0

def test_chi0_plateau_support_slope(cfg):
    y0 = cfg.y0
    ys = np.linspace(0.0, 3 * y0, 4001)
    c = loc.chi0(cfg, ys)
    assert np.all(c[ys <= y0] == 1.0)
    assert np.all(c[ys >= 2 * y0] == 0.0)
    assert np.all((0.0 <= c) & (c <= 1.0))
    sl = loc.chi0_prime(cfg, ys)
    assert np.all(sl <= 0.0)
    assert sl.min() >= -2.0 / y0 * 0.9  # 10% margin under the -2/y0 envelope


def test_cutoff_config_validation():
    with pytest.raises(ValueError):
        loc.CutoffConfig(y0=0.5, tau0=0.0)


# ------------------------------------------------------------------ flow map

def test_flow_origin_fixed(prof, cfg):
    assert loc.flow_map(prof, 0.0, cfg.tau0 + 2.0, cfg.tau0) == 0.0
    assert loc.inverse_flow(prof, 0.0, cfg.tau0 + 2.0, cfg.tau0) == 0.0


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0, 1e3])
@pytest.mark.parametrize("dtau", [0.5, 2.0, 5.0])
def test_flow_sandwich(prof, cfg, p, dtau):
    mu = prof.scaling.mu
    Y = loc.flow_map(prof, p, cfg.tau0 + dtau, cfg.tau0)
    assert Y / p >= np.exp((1 - mu) * dtau) * (1 - 1e-6)
    assert Y / p <= np.exp(dtau) * (1 + 1e-6)


def test_flow_monotone_in_tau_and_label(prof, cfg):
    taus = cfg.tau0 + np.linspace(0.0, 3.0, 7)
    ps = np.array([0.3, 1.0, 3.0, 9.0])
    prev = None
    for t in taus:
        Y = loc.flow_map(prof, ps, t, cfg.tau0)
        assert np.all(np.diff(Y) > 0)
        if prev is not None:
            assert np.all(Y >= prev)
        prev = Y


def test_far_labels_follow_exponential(prof, cfg):
    # Ubar is negligible at p >= 1e4, so Y tracks p e^{dtau} within 1%
    for dtau in [0.5, 2.0]:
        Y = loc.flow_map(prof, 1e4, cfg.tau0 + dtau, cfg.tau0)
        assert Y == pytest.approx(1e4 * np.exp(dtau), rel=1e-2)


def test_inverse_roundtrip(prof, cfg):
    tau = cfg.tau0 + 2.0
    for p in [0.2, 2.0, 40.0, 500.0]:
        y = loc.flow_map(prof, p, tau, cfg.tau0)
        assert loc.inverse_flow(prof, y, tau, cfg.tau0) == pytest.approx(p, rel=1e-9)


def test_flow_requires_future_tau(prof, cfg):
    with pytest.raises(loc.FlowDomainError):
        loc.flow_map(prof, 1.0, cfg.tau0 - 1.0, cfg.tau0)
    with pytest.raises(loc.FlowDomainError):
        loc.inverse_flow(prof, -1.0, cfg.tau0 + 1.0, cfg.tau0)


def test_flow_cache_matches_direct(prof, cfg):
    cache = loc.build_flow_cache(prof, cfg.tau0, cfg.tau0 + 2.0, n_tau=21,
                                 p_lo=1e-2, p_hi=1e3, n_labels=129)
    tau = cache.taus[13]
    for p in [0.05, 0.7, 12.0, 800.0]:
        direct = loc.flow_map(prof, p, tau, cfg.tau0)
        assert cache.Y_of_p(tau, p) == pytest.approx(direct, rel=1e-5)
        assert cache.p_of_y(tau, direct) == pytest.approx(p, rel=1e-5)
    assert np.all(np.diff(cache.Y, axis=0) >= 0)  # nondecreasing in tau
    assert np.all(np.diff(cache.Y, axis=1) > 0)   # increasing in label


# ------------------------------------------------------------------ chi

def test_chi_initial_plateau(prof, cfg):
    ys = np.linspace(0.0, cfg.y0, 50)
    assert np.all(loc.chi(cfg, prof, cfg.tau0, ys) == 1.0)


@pytest.mark.parametrize("dtau", [0.5, 1.5, 3.0])
def test_chi_plateau_and_support(prof, cfg, dtau):
    mu = prof.scaling.mu
    tau = cfg.tau0 + dtau
    inner = np.linspace(0, cfg.y0 * np.exp((1 - mu) * dtau), 20)
    assert np.all(loc.chi(cfg, prof, tau, inner) == 1.0)
    outer = np.linspace(2 * cfg.y0 * np.exp(dtau), 3 * cfg.y0 * np.exp(dtau), 20)
    assert np.all(loc.chi(cfg, prof, tau, outer) == 0.0)
    mid = np.linspace(0.5 * cfg.y0, 2.5 * cfg.y0 * np.exp(dtau), 400)
    c = loc.chi(cfg, prof, tau, mid)
    assert np.all((0.0 <= c) & (c <= 1.0))
    assert np.all(np.diff(c) <= 1e-12)


def test_chi_slope_envelope(prof, cfg):
    for dtau in [0.0, 1.0, 2.0]:
        tau = cfg.tau0 + dtau
        ys = np.linspace(0.5 * cfg.y0, 2.5 * cfg.y0 * np.exp(dtau), 1200)
        c = loc.chi(cfg, prof, tau, ys)
        fd = np.gradient(c, ys[1] - ys[0], edge_order=2)
        assert fd.min() >= -2.0 / cfg.y0 - 1e-6
        assert fd.max() <= 1e-6
        _, dc = loc.chi(cfg, prof, tau, ys, derivative=True)
        assert dc.min() >= -2.0 / cfg.y0
        assert np.max(np.abs(dc - fd)) < 5e-3 / cfg.y0  # FD vs pullback derivative


def test_chi_transport_residual(prof, cfg):
    # |d_tau chi + v d_y chi| -> 0 under probe refinement (exact transport)
    tau = cfg.tau0 + 1.0
    ys = np.linspace(0.8 * cfg.y0, 2.2 * cfg.y0 * np.e, 700)
    dta = 1e-4
    c_p = loc.chi(cfg, prof, tau + dta, ys)
    c_m = loc.chi(cfg, prof, tau - dta, ys)
    dchi_dtau = (c_p - c_m) / (2 * dta)
    _, dchi_dy = loc.chi(cfg, prof, tau, ys, derivative=True)
    v = ys + (prof.scaling.gamma + 1) / 4.0 * zbar(prof.params, ys)
    resid = np.max(np.abs(dchi_dtau + v * dchi_dy))
    assert resid < 1e-5 * np.max(np.abs(dchi_dy) * v)


# ------------------------------------------------------------------ ring_z and source

def test_ring_z_matches_zbar_inside(prof, cfg):
    ys = np.linspace(0.0, min(1.0, cfg.y0), 30)
    rz, drz = loc.ring_z(cfg, prof, cfg.tau0 + 1.0, ys, derivative=True)
    assert np.allclose(rz, zbar(prof.params, ys), rtol=0, atol=1e-15)
    assert np.allclose(drz, dzbar(prof.params, ys), rtol=0, atol=1e-15)


def test_ring_z_support(prof, cfg):
    dtau = 1.5
    tau = cfg.tau0 + dtau
    outer = np.linspace(2 * cfg.y0 * np.exp(dtau) * 1.0001, 4 * cfg.y0 * np.exp(dtau), 25)
    assert np.all(loc.ring_z(cfg, prof, tau, outer) == 0.0)


def test_ring_z_far_field_derivative_envelope(prof, cfg):
    # |d_y ring_z| <= A y^{-mu} for y >= 1 with one fitted constant
    tau = cfg.tau0 + 1.0
    ys = np.geomspace(1.0, 2 * cfg.y0 * np.e, 60)
    _, drz = loc.ring_z(cfg, prof, tau, ys, derivative=True)
    mu = prof.scaling.mu
    A = np.abs(drz) * ys**mu
    assert A.max() < 10.0 * max(A[0], 1e-30)


def test_source_zero_at_initial_plateau(prof, cfg):
    ys = np.linspace(0.0, cfg.y0, 25)
    assert np.all(loc.source_Sz(cfg, prof, cfg.tau0, ys) == 0.0)


@pytest.mark.parametrize("dtau", [0.5, 2.0])
def test_source_support(prof, cfg, dtau):
    tau = cfg.tau0 + dtau
    lo, hi = loc.source_support(cfg, prof.scaling, tau)
    inside = np.linspace(0, lo * 0.999, 20)
    assert np.all(loc.source_Sz(cfg, prof, tau, inside) == 0.0)
    outside = np.linspace(hi, 2 * hi, 20)
    assert np.all(loc.source_Sz(cfg, prof, tau, outside) == 0.0)


def test_source_norm_decay_and_bound(prof, cfg):
    s = prof.scaling
    taus = cfg.tau0 + np.linspace(0.5, 2.5, 5)
    series = {i: [] for i in range(1, s.n_mu + 1)}
    for tau in taus:
        nd = loc.source_deriv_norms(cfg, prof, tau, range(1, s.n_mu + 1), n=4096)
        for i, v in nd.items():
            series[i].append(v)
    for i in range(1, s.n_mu + 1):
        vals = np.array(series[i])
        rate = -np.polyfit(taus, np.log(vals), 1)[0]
        target = (1 - s.mu) * (2 * i + 4 * s.mu - 3)
        assert rate >= target - 0.05
        envelope = cfg.y0 ** (3 - 4 * s.mu - 2 * i) * np.exp(-target * (taus - cfg.tau0))
        C0 = vals[0] / envelope[0]
        assert np.all(vals <= C0 * envelope * (1 + 1e-9))


def test_source_norms_refinement_stable(prof, cfg):
    tau = cfg.tau0 + 1.5
    a = loc.source_deriv_norms(cfg, prof, tau, range(1, 4), n=4096)
    b = loc.source_deriv_norms(cfg, prof, tau, range(1, 4), n=8192)
    for i in range(1, 4):
        assert abs(a[i] - b[i]) / b[i] < 1e-2
