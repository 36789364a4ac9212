import numpy as np
import pytest

from eulervac.scaling import (
    GasScaling,
    ParameterDomainError,
    damping_coeffs,
    decay_rate_a0,
    derive_indices,
)


@pytest.mark.parametrize(
    "gamma,mu,beta,n_mu,in_S,in_H",
    [
        (2.0, 0.5, 2.0, 3, True, False),
        (1.4, 2 / 3, 3.0, 4, True, False),
        (2.0, 3 / 5, 2.5, 4, False, True),
        (2.0, 2 / 3, 3.0, 4, True, False),
        (2.0, 5 / 7, 3.5, 5, False, True),
    ],
)
def test_derive_indices(gamma, mu, beta, n_mu, in_S, in_H):
    s = derive_indices(gamma, mu)
    assert s.beta == pytest.approx(beta, abs=1e-12)
    assert s.delta == pytest.approx(1 / mu, rel=1e-15)
    assert s.n_mu == n_mu
    assert s.in_S is in_S
    assert s.in_H is in_H
    assert not (s.in_S and s.in_H)
    assert s.a0 > 0
    assert s.beta >= 2


@pytest.mark.parametrize("bad", [(1.0, 0.5), (3.0, 0.5), (2.0, 0.49), (2.0, 1.0), (2.0, 1.2)])
def test_domain_errors(bad):
    with pytest.raises(ParameterDomainError):
        derive_indices(*bad)


@pytest.mark.parametrize(
    "gamma,mu,i,ki,gi",
    [
        (2.0, 0.5, 2, 0.0, 7 / 6),
        (2.0, 2 / 3, 2, -1 / 3, 11 / 9),
        (2.0, 2 / 3, 3, 0.0, 2.0),
    ],
)
def test_damping_coeffs_examples(gamma, mu, i, ki, gi):
    s = derive_indices(gamma, mu)
    k, g = damping_coeffs(s, i)
    assert k == pytest.approx(ki, abs=1e-14)
    assert g == pytest.approx(gi, abs=1e-14)


def test_damping_index_error():
    s = derive_indices(2.0, 0.5)
    with pytest.raises(IndexError):
        damping_coeffs(s, 1)


@pytest.mark.parametrize(
    "gamma,mu,a0",
    [(2.0, 0.5, 7 / 6), (2.0, 2 / 3, 11 / 9), (2.0, 0.6, 0.2)],
)
def test_decay_rate_examples(gamma, mu, a0):
    s = derive_indices(gamma, mu)
    assert decay_rate_a0(s) == pytest.approx(a0, abs=1e-12)
    # mu=0.6 sits on the k-branch: both candidates evaluated, minimum taken
    if mu == 0.6:
        assert damping_coeffs(s, 2)[1] == pytest.approx(1.2, abs=1e-12)
        assert damping_coeffs(s, 3)[0] == pytest.approx(0.2, abs=1e-12)


def test_coefficient_properties_sweep():
    rng = np.random.default_rng(20240811)
    for _ in range(200):
        gamma = rng.uniform(1.0 + 1e-6, 3.0 - 1e-6)
        mu = rng.uniform(0.5, 1.0 - 1e-6)
        s = derive_indices(gamma, mu)
        g_prev = None
        for i in range(2, 9):
            k, g = damping_coeffs(s, i)
            assert g >= (i - 1) * (1 - mu) - 1e-13 > 0
            assert k == pytest.approx((1 - mu) * (i - s.beta), abs=1e-10)
            if i < s.beta - 1e-12:
                assert k < 0
            elif i > s.beta + 1e-12:
                assert k > 0
            if g_prev is not None:
                assert g - g_prev >= -1e-13
            g_prev = g
        # g_k - g_2 >= 0 monotonicity implies a0 > 0 in both branches
        assert s.a0 > 0
        # weighted-gap positivity at n_mu, the design property of the index
        assert s.n_mu * (1 - mu) - 1.5 + mu / 2 > 0


def test_determinism_and_immutability():
    a = derive_indices(2.0, 2 / 3)
    b = derive_indices(2.0, 2 / 3)
    assert a == b
    with pytest.raises(Exception):
        a.gamma = 2.5


def test_k_zero_exactly_at_beta():
    s = derive_indices(2.0, 2 / 3)
    assert damping_coeffs(s, 3)[0] == pytest.approx(0.0, abs=1e-14)
