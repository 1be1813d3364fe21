import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prioqn.errors import Unstable
from prioqn.model import NetworkSpec, solve_traffic
from prioqn.productform import (class_marginal, joint_probability, kappa_table, marginal_moments,
                                mmc_marginal, solve_product_form, stability_check)

from conftest import random_network, station


def birth_death_p0(load, c, levels=4000):
    """Brute-force M/M/c normalization: sum the unnormalized chain directly."""
    w, total = 1.0, 1.0
    for n in range(1, levels):
        w *= load / min(n, c)
        total += w
    return 1.0 / total


def test_mm1_marginal():
    m = mmc_marginal(0.5, 1.0, 1)
    assert m.p0 == pytest.approx(0.5, abs=1e-15)
    for n in range(6):
        assert m.pmf(n) == pytest.approx(0.5 * 0.5**n, abs=1e-15)
    assert marginal_moments(m)[0] == pytest.approx(1.0, abs=1e-14)


def test_mm2_example_value():
    assert mmc_marginal(1.1, 1.0, 2).p0 == pytest.approx(0.2903226, abs=1e-7)
    assert mmc_marginal(1.1, 1.0, 2).p0 == pytest.approx(0.45 / 1.55, abs=1e-15)


def test_mm3_against_brute_force():
    m = mmc_marginal(1.5, 1.0, 3)
    assert m.p0 == pytest.approx(birth_death_p0(1.5, 3), abs=1e-13)
    assert m.pmf(5) == pytest.approx(m.p0 * 1.5**5 / (6 * 9), rel=1e-13)


def test_mmc_unstable():
    with pytest.raises(Unstable):
        mmc_marginal(2.0, 1.0, 2)


@pytest.mark.parametrize("lam, mu, c", [(0.3, 1.0, 1), (2.5, 1.0, 3), (0.9, 0.4, 4)])
def test_moments_against_summation(lam, mu, c):
    m = mmc_marginal(lam, mu, c)
    p = m.pmf_array(3000)
    n = np.arange(p.size)
    mean, var = marginal_moments(m)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert mean == pytest.approx((n * p).sum(), rel=1e-11)
    assert var == pytest.approx((n * n * p).sum() - mean**2, rel=1e-10)


def test_net1_rank1_example():
    spec = NetworkSpec(1, 2, [1], [0.2, 0.2], [1.0, 0.5], np.zeros((2, 2)))
    pf = solve_product_form(spec)
    assert pf.kappas[1].values == pytest.approx((0.8,), abs=1e-15)
    assert pf.marginals[1].p0 == pytest.approx(0.5, abs=1e-15)


def test_example1_rank1_kappa_and_p0():
    x, y = 1.1, 0.3
    pf = solve_product_form(station(2, [x, y, 0.1]))
    p0 = 0.45 / 1.55
    assert pf.kappas[1](1) == pytest.approx(p0 * (1 + x), abs=1e-14)
    assert pf.kappas[1](2) == pytest.approx(p0 * (2 + x), abs=1e-14)
    assert pf.kappas[1](2) == pytest.approx(2 * (1 - x / 2), abs=1e-14)
    closed = (1 - x / 2 - y / 2) * (1 + x) / (1 + x / 2 + y / 2 - x * x / 2)
    assert pf.marginals[1].p0 == pytest.approx(closed, abs=1e-14)


def test_rank2_kappa_by_convolution():
    """kappa(n) = E[a(n, Y)] where Y is the sum of the higher-rank counts."""
    x, y, c = 1.5, 0.3, 2
    pf = solve_product_form(station(c, [x, y, 0.19]))
    p_a = pf.marginals[0].pmf_array(c)
    p_b = pf.marginals[1].pmf_array(c)
    dist = np.convolve(p_a, p_b)[:c]
    for n in (1, 2, 3):
        want = sum(max(min(n, c - s), 0) * dist[s] for s in range(c))
        assert pf.kappas[2](n) == pytest.approx(want, abs=1e-15)


def test_kappa_is_work_conserving_at_saturation():
    # kappa(c) = c - E[min(Y, c)], the servers left over on average
    pf = solve_product_form(station(3, [0.9, 0.7, 0.3]))
    spare = 3 - 0.9 - 0.7
    assert pf.kappas[2](3) == pytest.approx(spare, abs=1e-12)


def test_two_server_rank2_ratio_definitional():
    spec = station(2, [1.1, 0.3, 0.1])
    rep = stability_check(spec)
    assert rep.stable
    assert rep.classes[2].tail_ratio == pytest.approx(0.1 / 0.6, abs=1e-12)


def test_stability_reports_station_failure():
    rep = stability_check(station(1, [0.7, 0.5]))
    assert not rep.stable
    assert rep.first_failure[0] == "station"
    with pytest.raises(Unstable):
        solve_product_form(station(1, [0.7, 0.5]))


def test_strict_flag_tracks_level_one():
    rep = stability_check(station(2, [1.5, 0.3, 0.19]))
    assert rep.stable and not rep.strict
    assert rep.classes[2].worst_ratio > 1 > rep.classes[2].tail_ratio


def test_joint_probability_examples():
    spec = NetworkSpec(1, 2, [1], [0.25, 0.25], [1.0, 1.0], np.zeros((2, 2)))
    pf = solve_product_form(spec)
    assert pf.probability([0, 0]) == pytest.approx(0.75 * (2 / 3), abs=1e-15)
    assert pf.probability([1, 1]) == pytest.approx(0.75 * 0.25 * (2 / 3) * (1 / 3), abs=1e-15)
    absent = solve_product_form(NetworkSpec(2, 1, [1, 1], [0.3, 0.0], [1, 1], np.zeros((2, 2))))
    assert absent.probability([1, 1]) == 0.0
    with pytest.raises(ValueError):
        joint_probability(pf.marginals, [1])


def test_table2_row1_means():
    spec = station(1, [0.2, 0.4, 0.18], mu=[1, 0.5, 1 / 3], p=[0.1, 0.2, 0.3])
    means = solve_product_form(spec).means()
    assert means[1] == pytest.approx(1.0, abs=1e-12)
    assert means.sum() == pytest.approx(2.0682, abs=5e-5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 4), I=st.integers(1, 4))
def test_net1_closed_form(seed, J, I):
    rng = np.random.default_rng(seed)
    spec = random_network(rng, J, I, servers=np.ones(J, int), load=rng.uniform(0.2, 0.95))
    tr = solve_traffic(spec)
    pf = solve_product_form(spec, tr)
    r = tr.lam / spec.mu
    for cls, kap in enumerate(pf.kappas):
        j, i = spec.station_of(cls), spec.rank_of(cls)
        want = 1 - sum(r[u * J + j] for u in range(i))
        assert abs(kap(1) - want) <= 1e-12
        # single server: the marginal is geometric with ratio lambda/(kappa mu)
        assert abs(pf.marginals[cls].p0 - (1 - r[cls] / want)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 3))
def test_net2_closed_form(seed, J):
    rng = np.random.default_rng(seed)
    servers = rng.integers(1, 6, J)
    spec = random_network(rng, J, 2, servers=servers, load=rng.uniform(0.2, 0.95))
    tr = solve_traffic(spec)
    pf = solve_product_form(spec, tr)
    for j in range(J):
        c = int(servers[j])
        x = tr.lam[j] / spec.mu[j]
        kap = pf.kappas[J + j]
        for n in range(c, c + 3):
            assert abs(kap(n) - c * (1 - x / c)) <= 1e-12
        for n in range(1, c):
            assert kap(n) >= n * (1 - x / c) - 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 3), I=st.integers(1, 4))
def test_kappa_and_marginal_invariants(seed, J, I):
    rng = np.random.default_rng(seed)
    spec = random_network(rng, J, I, load=rng.uniform(0.1, 0.8))
    tr = solve_traffic(spec)
    rep = stability_check(spec, tr)
    if not rep.stable:
        return
    pf = solve_product_form(spec, tr)
    for cls, kap in enumerate(pf.kappas):
        c = kap.saturation_level
        vals = [kap(n) for n in range(0, c + 3)]
        assert vals[0] == 0
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        assert all(v == vals[c] for v in vals[c:])
        assert all(0 < v <= c + 1e-12 for v in vals[1:])
        m = pf.marginals[cls]
        assert abs(m.total_mass() - 1) <= 1e-12
        if spec.rank_of(cls) == 0:
            ref = mmc_marginal(float(tr.lam[cls]), float(spec.mu[cls]), c)
            assert np.allclose(m.pmf_array(10), ref.pmf_array(10), rtol=0, atol=1e-15)


def test_class_marginal_direct():
    spec = station(2, [1.1, 0.3])
    tr = solve_traffic(spec)
    top = mmc_marginal(1.1, 1.0, 2, class_id=0)
    kap = kappa_table(spec, tr, [top], 1, 0)
    m = class_marginal(spec, tr, kap, 1)
    assert m.pmf(1) == pytest.approx(m.p0 * 0.3 / kap(1), rel=1e-14)
    assert m.pmf(4) == pytest.approx(m.pmf(3) * 0.3 / kap(2), rel=1e-14)
    assert math.isclose(sum(m.pmf(n) for n in range(200)), 1.0, abs_tol=1e-12)
