import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from polarcm.construction import (
    DesignSpec,
    ReliabilityList,
    allocate_mlc,
    bec_bhattacharyya,
    bpsk_llr_mean,
    construct_scheme,
    construction_report,
    ga_checknode_mean,
    ga_density_evolution,
    log_phi,
    mc_bit_channel_estimate,
    phi,
    phi_inverse_log,
    select_frozen,
)
from polarcm.modulation import build_ask, build_square_qam
from polarcm.schemes import bicm_scheme, mlc_scheme

from oracles import brute_force_bec

# exact-marginalisation genie oracle (oracles.genie_map_bpsk), N=8, sigma2=0.5,
# 10^5 trials, seed 2024
GENIE_N8_0DB = np.array([0.37093, 0.15888, 0.12194, 0.01656, 0.08496, 0.00795, 0.00456, 4e-05])
GENIE_TRIALS = 100_000


def bpsk(n_sym):
    return bicm_scheme(build_ask(1), n_sym=n_sym)


# BEC recursion

@pytest.mark.parametrize("n, eps, expected", [
    (0, 0.3, [0.3]),
    (1, 0.5, [0.75, 0.25]),
    (2, 0.5, [0.9375, 0.5625, 0.4375, 0.0625]),
    (2, 0.0, [0.0, 0.0, 0.0, 0.0]),
    (2, 1.0, [1.0, 1.0, 1.0, 1.0]),
])
def test_bec_examples(n, eps, expected):
    rel = bec_bhattacharyya(n, eps)
    assert rel.estimates.tolist() == expected
    assert rel.source == "bec" and rel.design_point == eps


@pytest.mark.parametrize("N", [2, 4, 8])
def test_bec_matches_enumeration_dyadic(N):
    # eps = 1/2 keeps every quantity dyadic, so floats are exact
    exact = brute_force_bec(N, Fraction(1, 2))
    assert bec_bhattacharyya(N.bit_length() - 1, 0.5).estimates.tolist() == [float(v) for v in exact]


@pytest.mark.parametrize("eps", [0.1, 0.9])
def test_bec_matches_enumeration(eps):
    exact = brute_force_bec(4, Fraction(eps))
    got = bec_bhattacharyya(2, eps).estimates
    assert np.allclose(got, [float(v) for v in exact], rtol=0, atol=1e-15)


@pytest.mark.parametrize("eps", [-0.1, 1.5])
def test_bec_rejects_bad_eps(eps):
    with pytest.raises(ValueError):
        bec_bhattacharyya(2, eps)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(1, 10))
def test_bec_conservation(eps, n):
    z = bec_bhattacharyya(n, eps).estimates
    assert abs(z.mean() - eps) <= 1e-12
    parent = bec_bhattacharyya(n - 1, eps).estimates
    assert np.allclose(z[0::2] + z[1::2], 2 * parent, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99))
def test_bec_polarization_trend(eps):
    lists = [bec_bhattacharyya(n, eps).estimates for n in range(1, 7)]
    assert all(b.min() < a.min() for a, b in zip(lists, lists[1:]))
    # the maximum may round to exactly 1.0 in double precision
    assert all(b.max() > a.max() or a.max() == 1.0 for a, b in zip(lists, lists[1:]))


# GA

def test_phi_pieces():
    assert phi(0.0) == 1.0
    assert phi(2.0) == pytest.approx(math.exp(-0.4527 * 2 ** 0.86 + 0.0218))
    x = 20.0
    assert phi(x) == pytest.approx(math.sqrt(math.pi / x) * math.exp(-x / 4) * (1 - 10 / (7 * x)))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5000))
def test_phi_inverse_roundtrip(x):
    # below x ~ 0.03 the first piece exceeds 1 and is clipped, so it has no inverse there;
    # just above 10 the second piece overlaps the range of the first, which wins
    assume(not 10.0 <= x <= 10.2)
    assert phi_inverse_log(log_phi(x)) == pytest.approx(x, rel=1e-8)


def test_phi_overlap_resolves_to_first_piece():
    y = log_phi(10.0)
    assert y > log_phi(9.999999)
    assert phi_inverse_log(y) < 10.0
    assert log_phi(phi_inverse_log(y)) == pytest.approx(y, abs=1e-12)


def test_phi_is_decreasing_on_each_piece():
    for xs in (np.linspace(0.05, 9.999, 2000), np.linspace(10.0, 500, 2000)):
        assert np.all(np.diff([log_phi(x) for x in xs]) < 0)


def test_checknode_mean_is_below_input():
    for m in (0.1, 1.0, 4.0, 30.0, 400.0):
        assert 0 < ga_checknode_mean(m) < m


def test_ga_n0_and_n1():
    m = 3.0
    assert ga_density_evolution(0, m).estimates.tolist() == [pytest.approx(ndtr(-math.sqrt(m / 2)))]
    est = ga_density_evolution(1, m).estimates
    assert est[1] == pytest.approx(ndtr(-math.sqrt(2 * m / 2)))
    assert est[0] == pytest.approx(ndtr(-math.sqrt(ga_checknode_mean(m) / 2)))


def test_ga_rejects_negative_mean():
    with pytest.raises(ValueError):
        ga_density_evolution(2, -1.0)


def test_ga_large_means_do_not_underflow():
    est = ga_density_evolution(10, bpsk_llr_mean(10.0)).estimates
    assert np.all(np.isfinite(est)) and est.min() >= 0


def test_bpsk_llr_mean():
    assert bpsk_llr_mean(0.0) == pytest.approx(4.0)


def test_ga_against_genie_oracle():
    # +-25% relative or +-0.01 absolute against the frozen oracle at llr_mean 4
    ga = ga_density_evolution(3, 4.0).estimates
    ok = (np.abs(ga - GENIE_N8_0DB) <= 0.25 * GENIE_N8_0DB) | (np.abs(ga - GENIE_N8_0DB) <= 0.01)
    assert ok.all()


# MC

def test_mc_matches_genie_oracle():
    rel = mc_bit_channel_estimate(DesignSpec(0.0, 4, "mc", GENIE_TRIALS, 1), bpsk(8))
    sd = np.sqrt(2 * GENIE_N8_0DB * (1 - GENIE_N8_0DB) / GENIE_TRIALS)
    assert np.all(np.abs(rel.estimates - GENIE_N8_0DB) <= 4 * np.maximum(sd, 1e-4))
    assert rel.trials == GENIE_TRIALS and rel.source == "mc"


def test_mc_closed_form_extremes():
    # index 0 sees the boxplus of all 8 channels: P = (1 - (1 - 2p)^8) / 2 with p = Q(sqrt(2));
    # index 7 sees their sum: P = Q(4)
    trials = 40_000
    rel = mc_bit_channel_estimate(DesignSpec(0.0, 4, "mc", trials, 5), bpsk(8))
    p = ndtr(-math.sqrt(2.0))
    first = (1 - (1 - 2 * p) ** 8) / 2
    assert abs(rel.estimates[0] - first) <= 4 * math.sqrt(first * (1 - first) / trials)
    assert rel.estimates[7] <= 5 * ndtr(-4.0) + 3 / trials


def test_mc_noiseless_is_zero():
    for scheme in (bpsk(16), bicm_scheme(build_square_qam(4), n_sym=8),
                   mlc_scheme(build_square_qam(4, "natural"), n_sym=8)):
        assert not mc_bit_channel_estimate(DesignSpec(60.0, 0, "mc", 100), scheme).estimates.any()


def test_mc_deterministic_and_batch_invariant():
    scheme = mlc_scheme(build_square_qam(2, "natural"), n_sym=8)
    a = mc_bit_channel_estimate(DesignSpec(2.0, 4, "mc", 700, 9, batch=512), scheme)
    b = mc_bit_channel_estimate(DesignSpec(2.0, 4, "mc", 700, 9, batch=33), scheme)
    assert np.array_equal(a.estimates, b.estimates)
    assert len(a) == 16


def test_mc_monotone_in_snr():
    scheme = bicm_scheme(build_square_qam(4), n_sym=8)
    trials = 4000
    lo = mc_bit_channel_estimate(DesignSpec(4.0, 0, "mc", trials, 1), scheme).estimates
    hi = mc_bit_channel_estimate(DesignSpec(8.0, 0, "mc", trials, 2), scheme).estimates
    sd = np.sqrt((lo * (1 - lo) + hi * (1 - hi)) / trials)
    assert np.all(hi - lo <= 3 * sd + 1e-12)


def test_mc_mlc_levels_condition_on_lower_levels():
    # SP levels get more reliable upward; the top level of 16-QAM is far better than level 0
    scheme = mlc_scheme(build_square_qam(4, "natural"), n_sym=4)
    est = mc_bit_channel_estimate(DesignSpec(8.0, 0, "mc", 3000, 3), scheme).estimates.reshape(4, 4)
    assert est[0].mean() > est[3].mean()


def test_mc_errors():
    with pytest.raises(ValueError):
        DesignSpec(0.0, 1, "mc", 0)
    with pytest.raises(ValueError):
        mc_bit_channel_estimate(DesignSpec(0.0, 99, "mc", 10), bpsk(8))


def test_reliability_list_validation():
    with pytest.raises(ValueError):
        ReliabilityList([0.2, 1.2], "ga", 0.0)
    with pytest.raises(ValueError):
        ReliabilityList([0.2], "ga", 0.0).std_errors()


# selection

@pytest.mark.parametrize("est, K, mask", [
    ([0.9375, 0.5625, 0.4375, 0.0625], 2, [1, 1, 0, 0]),
    ([0.9375, 0.5625, 0.4375, 0.0625], 0, [1, 1, 1, 1]),
    ([0.5, 0.5, 0.5, 0.5], 2, [1, 1, 0, 0]),
    ([0.1, 0.5, 0.1, 0.5], 3, [0, 1, 0, 0]),
])
def test_select_frozen_examples(est, K, mask):
    assert select_frozen(ReliabilityList(est, "bec", 0.5), K).tolist() == mask


def test_select_frozen_rejects_large_k():
    with pytest.raises(ValueError):
        select_frozen([0.1, 0.2], 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=64), st.data())
def test_select_frozen_properties(levels, data):
    est = np.array(levels, dtype=float) / 20
    K = data.draw(st.integers(0, est.size))
    mask = select_frozen(est, K)
    assert (mask == 0).sum() == K
    if 0 < K < est.size:
        assert est[mask == 0].max() <= est[mask == 1].min()
    # any strictly increasing transform keeps the selection
    assert np.array_equal(select_frozen(np.sqrt(est) * 0.5 + 0.1, K), mask)


@pytest.mark.parametrize("levels, K, k_per_level, info", [
    ([[0.9, 0.1], [0.5, 0.2]], 2, [1, 1], [(0, 1), (1, 1)]),
    ([[0.9, 0.1], [0.95, 0.8]], 1, [1, 0], [(0, 1)]),
    ([[0.9, 0.1], [0.95, 0.8]], 4, [2, 2], [(0, 0), (0, 1), (1, 0), (1, 1)]),
])
def test_allocate_mlc_examples(levels, K, k_per_level, info):
    masks, ks = allocate_mlc(levels, K)
    assert ks == k_per_level
    assert sorted((lv, int(i)) for lv, mk in enumerate(masks) for i in np.flatnonzero(mk == 0)) == info


def test_allocate_mlc_tie_break_is_level_major():
    masks, ks = allocate_mlc([[0.3, 0.3], [0.3, 0.3]], 1)
    assert ks == [0, 1] and masks[1].tolist() == [1, 0]


def test_allocate_mlc_errors():
    with pytest.raises(ValueError):
        allocate_mlc([[0.1, 0.2], [0.3]], 1)
    with pytest.raises(ValueError):
        allocate_mlc([[0.1, 0.2]], 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.integers(0, 4))
def test_allocate_mlc_single_level_is_select_frozen(est, K):
    masks, ks = allocate_mlc([est], K)
    assert np.array_equal(masks[0], select_frozen(est, K)) and ks == [K]


# scheme-level construction

def test_construct_scheme_bicm_and_mlc():
    spec = DesignSpec(6.0, 40, "ga")
    bicm = construct_scheme(bicm_scheme(build_square_qam(4), n_sym=16), spec)
    assert bicm.info_bits == 40 and bicm.codes[0].block_len == 64
    mlc = construct_scheme(mlc_scheme(build_square_qam(4, "natural"), n_sym=16),
                           DesignSpec(6.0, 40, "mc", 500))
    assert sum(mlc.level_k) == 40 and len(mlc.codes) == 4
    # lower SP levels are weaker and carry fewer information bits
    assert mlc.level_k[0] < mlc.level_k[3]


def test_construct_rejects_too_many_bits():
    with pytest.raises(ValueError):
        construct_scheme(bpsk(8), DesignSpec(0.0, 9))


def test_construction_report_fields():
    doc = construction_report(mlc_scheme(build_square_qam(2, "natural"), n_sym=4), DesignSpec(3.0, 4, "bec"))
    assert set(doc) >= {"scheme", "design_point", "estimator", "estimates", "frozen_masks", "k_per_level"}
    assert len(doc["estimates"]) == 8 and sum(doc["k_per_level"]) == 4
    doc = construction_report(bpsk(8), DesignSpec(0.0, 4, "mc", 50, 3))
    assert doc["frozen_mask"].count(0) == 4 and doc["mc_trials"] == 50
