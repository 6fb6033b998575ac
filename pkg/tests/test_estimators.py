import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bell_hv_lab.estimators import (
    CHSH_TERMS,
    MonteCarlo,
    chain_stats,
    chsh,
    correlator,
    estimate,
    hoeffding_half_width,
    marginal_estimate,
    marginals,
    mc_joint,
    stream,
    worker_count,
)
from bell_hv_lab.geometry import Direction, build_chain, build_theorem2prime_layout
from bell_hv_lab.models import JointDistribution, QuantumCorrelated, ToyMI, WhartonPair, quantum_joint

PI = math.pi
ROOT2 = math.sqrt(2)
probs = st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=4, max_size=4).filter(lambda p: sum(p) > 1e-6)


def dist(p):
    s = math.fsum(p)
    return JointDistribution.from_array([x / s for x in p])


class ProductSource(ToyMI):
    """Setting-independent product distribution with fixed local means."""

    model = "product_test"

    def __init__(self, ma=0.3, mb=-0.2):
        object.__setattr__(self, "correlation_sign", 1)
        object.__setattr__(self, "_d", JointDistribution.product(ma, mb))

    def sigma(self, I, J):
        return {"only": 1.0}

    def outcome_dist(self, lam, I, J):
        return self._d


def test_correlator_examples():
    assert correlator(JointDistribution(0.5, 0, 0, 0.5)) == 1.0
    assert correlator(JointDistribution(0.25, 0.25, 0.25, 0.25)) == 0.0
    assert correlator(quantum_joint(PI / 4)) == pytest.approx(ROOT2 / 2, abs=1e-15)


def test_marginals_examples():
    assert marginals(JointDistribution(1, 0, 0, 0)) == (1, 1)
    for th in (0.0, 0.5, PI):
        assert marginals(quantum_joint(th, -1)) == pytest.approx((0, 0), abs=1e-15)
    from bell_hv_lab.models import exact_joint

    assert marginals(exact_joint(WhartonPair.homogeneous(), 0.0, 1.0)) == pytest.approx((1.0, math.cos(1.0)), abs=1e-15)


@given(probs, probs, st.floats(min_value=0, max_value=1))
def test_linear_functionals(p, q, a):
    d1, d2 = dist(p), dist(q)
    m = d1.mix(d2, a)
    assert correlator(m) == pytest.approx(a * correlator(d1) + (1 - a) * correlator(d2), abs=1e-12)
    for x, y, z in zip(marginals(m), marginals(d1), marginals(d2)):
        assert x == pytest.approx(a * y + (1 - a) * z, abs=1e-12)


@given(probs)
def test_correlator_bounded(p):
    assert abs(correlator(dist(p))) <= 1 + 1e-15


def test_hoeffding_half_width():
    # 2 * sqrt(ln(2/0.01) / (2 * 10^6))
    assert hoeffding_half_width(10**6, 0.99) == pytest.approx(2 * math.sqrt(math.log(200) / 2e6), rel=1e-15)
    assert hoeffding_half_width(1, 0.99) > 1
    with pytest.raises(ValueError):
        hoeffding_half_width(10, 1.0)
    with pytest.raises(ValueError):
        hoeffding_half_width(0, 0.9)


def test_monte_carlo_validation():
    with pytest.raises(ValueError):
        MonteCarlo(0, 1)
    with pytest.raises(ValueError):
        MonteCarlo(10, 1, confidence=0.0)


def test_streams_are_named_and_deterministic():
    a = stream(3, "chain", 0).random(4)
    assert np.array_equal(a, stream(3, "chain", 0).random(4))
    assert not np.array_equal(a, stream(3, "chain", 1).random(4))
    assert not np.array_equal(a, stream(4, "chain", 0).random(4))


def test_mc_joint_single_sample():
    est = mc_joint(QuantumCorrelated(), 0.0, 1.0, 1, 0.99, stream(0, "one"))
    assert est.correlator.value in (-1.0, 1.0)
    assert est.correlator.half_width > 1


def test_mc_joint_deterministic():
    x = mc_joint(WhartonPair(), 0.0, 1.0, 5000, 0.99, stream(1, "d"))
    y = mc_joint(WhartonPair(), 0.0, 1.0, 5000, 0.99, stream(1, "d"))
    assert x == y


def test_mc_coverage():
    # exact value inside the 99% band in at least 95 of 100 reseeded runs
    for src in (QuantumCorrelated(), ToyMI(), WhartonPair(weights=(0.4, 0.1, 0.3, 0.2), gamma_s=0.1)):
        exact = estimate(src, 0.0, PI / 4, None)
        hits = 0
        for seed in range(100):
            est = estimate(src, 0.0, PI / 4, MonteCarlo(10**6, seed, 0.99), "cov")
            ok = abs(est.correlator.value - exact.correlator.value) <= est.correlator.half_width
            ok &= abs(est.mean_a.value - exact.mean_a.value) <= est.mean_a.half_width
            hits += ok
        assert hits >= 95


def test_exact_estimates_have_zero_half_width():
    est = estimate(WhartonPair(), 0.0, 1.0, None)
    assert est.correlator.half_width == 0.0 and est.correlator.n_samples == 0


def test_chsh_quantum_and_wharton():
    settings_ = (Direction(0.0), Direction(PI / 2), Direction(PI / 4), Direction(3 * PI / 4))
    # terms (A0,B1), (A3,B1), (A0,B4), (A3,B4); minus on (A0,B4)
    for src in (QuantumCorrelated(), WhartonPair()):
        est = chsh(src, settings_, sign_pattern=(1, 1, -1, 1))
        assert est.s_value == pytest.approx(2 * ROOT2, abs=1e-12)
        assert est.s_value == pytest.approx(sum(s * t.value for s, t in zip(est.sign_pattern, est.terms)), abs=1e-15)
    lay = build_theorem2prime_layout(0.0)
    assert chsh(QuantumCorrelated(), lay.chsh_settings(), sign_pattern=(1, 1, -1, 1)).s_value == pytest.approx(2 * ROOT2)


def test_chsh_rejects_bad_sign_patterns():
    s = (0.0, 1.0, 2.0, 3.0)
    for bad in [(1, 1, 1, 1), (1, -1, -1, 1), (1, 1, 1), (1, 1, 1, 2)]:
        with pytest.raises(ValueError):
            chsh(QuantumCorrelated(), s, sign_pattern=bad)


@settings(max_examples=40)
@given(st.lists(st.floats(min_value=0, max_value=2 * PI), min_size=4, max_size=4),
       st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 3))
def test_chsh_product_source_bounded(angles, ma, mb, minus):
    signs = [1, 1, 1, 1]
    signs[minus] = -1
    est = chsh(ProductSource(ma, mb), angles, sign_pattern=signs)
    assert abs(est.s_value) <= 2 + 1e-12


@settings(max_examples=40)
@given(st.lists(st.floats(min_value=0, max_value=2 * PI), min_size=4, max_size=4), st.integers(0, 3))
def test_chsh_bounded_by_four(angles, minus):
    signs = [1, 1, 1, 1]
    signs[minus] = -1
    for src in (QuantumCorrelated(), WhartonPair(weights=(0.7, 0.1, 0.1, 0.1))):
        assert abs(chsh(src, angles, sign_pattern=signs).s_value) <= 4


def test_chsh_mc_uses_named_terms():
    mc = MonteCarlo(20_000, 17)
    a = chsh(WhartonPair(), (0.0, PI / 2, PI / 4, 3 * PI / 4), mc)
    b = chsh(WhartonPair(), (0.0, PI / 2, PI / 4, 3 * PI / 4), mc)
    assert a == b
    assert a.half_width == pytest.approx(4 * hoeffding_half_width(20_000, 0.99))
    assert [t["pair"] for t in a.to_json()["terms"]] == list(CHSH_TERMS)


def test_chain_stats_quantum_six():
    st_ = chain_stats(QuantumCorrelated(), build_chain(6, 0.0))
    assert len(st_.link_correlations) == 12
    for c in st_.link_correlations:
        assert c == pytest.approx(math.cos(PI / 12), abs=1e-12)
    assert st_.delta_hat == pytest.approx(math.sin(PI / 24) ** 2, abs=1e-12)
    assert st_.orientation == "correlated" and not st_.mixed_orientation


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 33])
def test_chain_delta_quantum_general(n):
    for sign, orient in ((1, "correlated"), (-1, "anticorrelated")):
        st_ = chain_stats(QuantumCorrelated(sign), build_chain(n, 0.4))
        if n > 1:  # at n = 1 every link correlation is zero and carries no orientation
            assert st_.orientation == orient
        assert st_.delta_hat == pytest.approx(math.sin(PI / (4 * n)) ** 2, abs=1e-12)


def test_chain_stats_homogeneous_wharton_matches_quantum():
    st_ = chain_stats(WhartonPair.homogeneous(), build_chain(6, 0.0))
    assert st_.link_correlations == pytest.approx([math.cos(PI / 12)] * 12, abs=1e-12)


class SplitSign(ToyMI):
    """Toy source whose correlation sign flips with Alice's axis half-plane."""

    def sigma(self, I, J):
        from bell_hv_lab.models import axis

        return ToyMI(1 if axis(I).angle < PI / 2 else -1).sigma(I, J)


def test_chain_stats_mixed_orientation_flag():
    st_ = chain_stats(SplitSign(), build_chain(6, 0.0))
    assert st_.mixed_orientation
    assert st_.delta_hat >= 0
    assert not chain_stats(ToyMI(), build_chain(6, 0.0)).mixed_orientation


def test_chain_mc_and_csv():
    mc = MonteCarlo(50_000, 3)
    st_ = chain_stats(QuantumCorrelated(), build_chain(3, 0.0), mc)
    assert st_.n_per_link == 50_000
    assert st_.max_half_width == pytest.approx(hoeffding_half_width(50_000, 0.99))
    rows = list(csv.DictReader(io.StringIO(st_.to_csv())))
    assert list(rows[0]) == ["link_index", "side_pair", "angle_rad", "correlation", "half_width"]
    assert len(rows) == 6
    assert rows[0]["side_pair"] == "A0-B0"
    assert float(rows[2]["correlation"]) == st_.link_correlations[2]


def test_chain_threads_do_not_change_results(monkeypatch):
    mc = MonteCarlo(30_000, 8)
    chain = build_chain(8, 0.2)
    monkeypatch.setenv("BELL_HV_LAB_THREADS", "1")
    serial = chain_stats(WhartonPair(gamma_s=0.1), chain, mc)
    monkeypatch.setenv("BELL_HV_LAB_THREADS", "4")
    assert worker_count() == 4
    assert chain_stats(WhartonPair(gamma_s=0.1), chain, mc) == serial
    monkeypatch.setenv("BELL_HV_LAB_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.setenv("BELL_HV_LAB_THREADS", "lots")
    with pytest.raises(ValueError):
        worker_count()


def test_marginal_estimate_sides():
    assert marginal_estimate(WhartonPair.homogeneous(), 0.0, 1.0, "A").value == pytest.approx(1.0)
    assert marginal_estimate(WhartonPair.homogeneous(), 0.0, 1.0, "B").value == pytest.approx(math.cos(1.0))
    with pytest.raises(ValueError):
        marginal_estimate(WhartonPair(), 0.0, 1.0, "C")
