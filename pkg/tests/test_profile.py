import time

import numpy as np
import pytest

from eulervac.profile import (
    Profile,
    ProfileDomainError,
    ProfileParams,
    SingularityError,
    build_profile,
    c1_leading,
    c2_leading,
    dzbar,
    dzbar_higher,
    fit_asymptotics,
    solve_ubar,
    zbar,
)
from eulervac.scaling import derive_indices

CASES = [(2.0, 0.5, 0.5), (2.0, 2 / 3, 0.5), (1.4, 0.6, 1.0)]


def params(gamma, mu, K):
    return ProfileParams(scaling=derive_indices(gamma, mu), K=K)


# ---------------------------------------------------------------- roots

def test_ubar_at_origin_exact():
    p = params(2.0, 0.5, 0.5)
    assert solve_ubar(p, 0.0) == 1 / 3


def test_ubar_closed_form_quadratic_case():
    # mu=1/2, K=1/2: (4mu/(1+gamma)) y = u + u^2, so y=3 gives u=1, Ubar=1/6
    p = params(2.0, 0.5, 0.5)
    assert solve_ubar(p, 3.0) == pytest.approx(1 / 6, rel=1e-14)
    assert zbar(p, 3.0) == pytest.approx(-1.0, rel=1e-14)


def test_ubar_against_original_implicit_relation():
    # the u-space equation must reproduce roots of y = K (U0-U)^(1/mu-1)/U^(1/mu);
    # forming U0-U in doubles cancels catastrophically at small y, so the
    # independent check runs the original relation in 50-digit arithmetic
    import mpmath as mp

    mp.mp.dps = 50
    for gamma, mu, K in CASES:
        p = params(gamma, mu, K)
        U0 = mp.mpf(2) * mp.mpf(mu) / (mp.mpf(gamma) + 1)

        def logf(V, y=None):
            return (mp.log(K) + (1 / mp.mpf(mu) - 1) * mp.log(U0 - V)
                    - (1 / mp.mpf(mu)) * mp.log(V) - mp.log(y))

        for y in np.geomspace(1e-6, 1e6, 13):
            U = solve_ubar(p, y)
            U_ref = mp.findroot(lambda V: logf(V, y=mp.mpf(y)),
                                (U0 * mp.mpf("1e-12"), U0 * (1 - mp.mpf("1e-25"))),
                                solver="anderson")
            assert U == pytest.approx(float(U_ref), rel=1e-13)


def test_far_field_constant():
    p = params(2.0, 0.5, 0.5)
    y = 1e10
    assert solve_ubar(p, y) * np.sqrt(y) == pytest.approx(np.sqrt(0.5) * np.sqrt(1 / 3), rel=1e-4)


def test_negative_y_rejected():
    p = params(2.0, 0.5, 0.5)
    with pytest.raises(ProfileDomainError):
        solve_ubar(p, -1.0)


# ---------------------------------------------------------------- derivatives

def test_dzbar_at_origin():
    p = params(2.0, 0.5, 0.5)
    assert dzbar(p, 0.0) == pytest.approx(-2 / 3, abs=1e-15)
    gamma, mu = 2.0, 0.5
    assert 1 + (gamma + 1) / 4 * dzbar(p, 0.0) == pytest.approx(1 - mu, abs=1e-12)


@pytest.mark.parametrize("gamma,mu,K", CASES)
def test_dzbar_matches_finite_differences(gamma, mu, K):
    p = params(gamma, mu, K)
    for y in [1e-3, 0.3, 2.0, 50.0, 1e4]:
        h = 1e-5 * max(y, 1.0)
        fd = (zbar(p, y + h) - zbar(p, y - h)) / (2 * h)
        assert dzbar(p, y) == pytest.approx(fd, rel=5e-9, abs=1e-12)


@pytest.mark.parametrize("gamma,mu,K", CASES)
def test_dzbar_higher_order1_consistency(gamma, mu, K):
    p = params(gamma, mu, K)
    for y in [0.0, 1e-4, 0.7, 13.0, 1e3]:
        assert dzbar_higher(p, y, 1) == pytest.approx(dzbar(p, y), abs=1e-12)


def test_dzbar_higher_against_fd():
    p = params(2.0, 2 / 3, 0.5)
    y = 0.8
    h = 1e-3
    stencil = np.array([zbar(p, y + k * h) for k in range(-3, 4)])
    fd2 = (stencil[4] - 2 * stencil[3] + stencil[2]) / h**2
    fd3 = (stencil[5] - 2 * stencil[4] + 2 * stencil[2] - stencil[1]) / (2 * h**3)
    assert dzbar_higher(p, y, 2) == pytest.approx(fd2, rel=1e-6)
    assert dzbar_higher(p, y, 3) == pytest.approx(fd3, rel=1e-4)


def test_dzbar_higher_at_origin_series():
    # mu=1/2, K=1/2, gamma=2: u(Y) = Y - Y^2 + 2Y^3 - ... with Y = (2/3) y,
    # so d2 zbar(0) = 2 (2/3)^2 = 8/9 and c1 = 4/9
    p = params(2.0, 0.5, 0.5)
    assert dzbar_higher(p, 0.0, 2) == pytest.approx(8 / 9, rel=1e-13)
    assert dzbar_higher(p, 0.0, 2) == pytest.approx(c1_leading(p) * 2, rel=1e-13)


def test_dzbar_higher_vanishes_below_beta():
    p = params(2.0, 2 / 3, 0.5)  # beta = 3
    assert dzbar_higher(p, 0.0, 2) == 0.0


def test_dzbar_higher_singularity_flagged():
    p = params(2.0, 0.6, 0.5)  # beta = 2.5, third derivative blows up at 0
    with pytest.raises(SingularityError):
        dzbar_higher(p, 0.0, 3)


def test_near_origin_exponent_of_third_derivative():
    # mu=0.6: d^3 zbar ~ y^(beta-3) = y^(-1/2) as y -> 0+
    p = params(2.0, 0.6, 0.5)
    ys = np.geomspace(1e-7, 1e-5, 30)
    d3 = np.array([dzbar_higher(p, y, 3) for y in ys])
    slope = np.polyfit(np.log(ys), np.log(np.abs(d3)), 1)[0]
    assert slope == pytest.approx(-0.5, abs=5e-3)


def test_far_field_derivative_envelope():
    # mu=2/3: |d^2 zbar| * y^(2-(1-mu)) stays bounded in the far field
    p = params(2.0, 2 / 3, 0.5)
    ys = np.geomspace(1e2, 1e5, 40)
    vals = np.array([abs(dzbar_higher(p, y, 2)) * y ** (2 - 1 / 3) for y in ys])
    assert np.max(vals) / np.min(vals) < 3.0


# ---------------------------------------------------------------- tabulation

@pytest.fixture(scope="module")
def profiles():
    return {c: build_profile(params(*c)) for c in CASES}


@pytest.mark.parametrize("case", CASES)
def test_profile_residual_and_boundary_values(profiles, case):
    prof = profiles[case]
    gamma, mu, _ = case
    t0 = time.perf_counter()
    fresh = build_profile(prof.params)
    elapsed = time.perf_counter() - t0
    assert fresh.residual() < 1e-8
    assert elapsed < 1.0
    assert abs(fresh.ubar[0] - 2 * mu / (gamma + 1)) < 1e-10
    assert abs(fresh.dzbar[0] + 4 * mu / (gamma + 1)) < 1e-10


@pytest.mark.parametrize("case", CASES)
def test_monotonicity_and_bounds(profiles, case):
    prof = profiles[case]
    gamma, mu, _ = case
    assert np.all(np.diff(prof.ubar) < 0)
    assert np.all(np.diff(prof.zbar) < 0)
    assert np.all(np.diff(prof.dzbar) > 0)
    assert np.all(prof.ubar > 0) and np.all(prof.ubar <= 2 * mu / (gamma + 1))
    assert prof.zbar[0] == 0.0 and np.all(prof.zbar[1:] < 0)
    factor = 1 + (gamma + 1) / 4 * prof.dzbar
    assert np.all(factor >= 1 - mu - 1e-10)
    assert np.all(factor < 1.0)
    assert np.all(prof.dzbar >= -4 * mu / (gamma + 1) - 1e-14)
    assert np.all(prof.dzbar < 0)


@pytest.mark.parametrize("case", CASES)
def test_fitted_asymptotics(profiles, case):
    prof = profiles[case]
    gamma, mu, K = case
    beta = prof.scaling.beta
    assert prof.near_exp_fit == pytest.approx(beta, abs=1e-2)
    assert prof.near_coeff_c1 > 0
    assert prof.far_coeff_c2 > 0
    # fitted coefficients track the leading-order constants of the expansion
    assert prof.near_coeff_c1 == pytest.approx(c1_leading(prof.params), rel=0.05)
    assert prof.far_coeff_c2 == pytest.approx(c2_leading(prof.params), rel=0.05)


def test_far_exponent_fit_examples():
    prof = build_profile(params(2.0, 2 / 3, 0.5))
    assert prof.far_exp_fit == pytest.approx(1 / 3, abs=1e-3)
    # mu=1/2 carries an O(mu Ubar/Ubar(0)) window bias of ~3.5e-3 on [1e3,1e5]
    prof = build_profile(params(2.0, 0.5, 0.5))
    assert prof.far_exp_fit == pytest.approx(0.5, abs=5e-3)


def test_scaling_covariance_in_K():
    # zbar_{K'}(lam y) = lam zbar_K(y) with lam = K'/K
    s = derive_indices(2.0, 2 / 3)
    pa = ProfileParams(scaling=s, K=0.5)
    pb = ProfileParams(scaling=s, K=1.5)
    lam = 1.5 / 0.5
    for y in np.geomspace(1e-4, 1e4, 17):
        assert zbar(pb, lam * y) == pytest.approx(lam * zbar(pa, y), rel=1e-12)


def test_csv_export(tmp_path, profiles):
    prof = profiles[CASES[0]]
    path = tmp_path / "profile.csv"
    prof.export_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "y,ubar,zbar,dzbar"
    assert len(lines) == 1 + prof.grid.size
    y, ub = lines[1].split(",")[:2]
    assert float(y) == 0.0
    assert float(ub) == prof.ubar[0]
