import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from rc_sccc import wef
from rc_sccc.convcode import encode, encode_frames
from rc_sccc.errors import ContractError, DomainError, TruncationMismatchError
from rc_sccc.interleaving import make_random
from rc_sccc.puncturing import CodeDimensions, PuncturePattern, dimensions_for
from rc_sccc.sccc import PARITY_TRELLIS, ScccConfig
from rc_sccc.sccc import encode as sccc_encode
from rc_sccc.wef import (
    EnumLimits,
    bound_curve,
    choose_d2_ef,
    enumerate_lower,
    enumerate_upper,
    enumerators_for,
    total_spectrum,
    truncation_check,
    ub_grid,
    ub_required_snr,
    union_bound,
)

WIDE = EnumLimits(w_max=8, h_max=30, l_max=30)
SMALL = EnumLimits(w_max=4, h_max=24, l_max=24)
FULL = EnumLimits(w_max=14, h_max=40, l_max=40)


def _random_pattern(rng):
    n_p = int(rng.integers(1, 7))
    return PuncturePattern(rng.integers(0, 2, n_p).astype(bool))


@pytest.mark.parametrize("seed", range(10))
def test_upper_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.choice([4, 6, 8, 10, 12, 14]))
    pattern = _random_pattern(rng)
    x1_mask = pattern.mask(K // 2)
    words = np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.uint8)
    parity, _ = encode_frames(PARITY_TRELLIS, words)
    p = parity[:, 0::2]
    w = words.sum(axis=1)
    expected = np.zeros((FULL.w_max + 1, FULL.h_max + 1, FULL.l_max + 1))
    np.add.at(expected, (w, w + p[:, x1_mask].sum(axis=1), w + p.sum(axis=1)), 1)
    np.testing.assert_array_equal(enumerate_upper(pattern, K, FULL).A, expected)


@pytest.mark.parametrize("seed", range(10))
def test_lower_matches_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    N = int(rng.integers(3, 15))
    pattern = _random_pattern(rng)
    mask = pattern.mask(N)
    words = np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.uint8)
    parity, _ = encode_frames(PARITY_TRELLIS, words)
    expected = np.zeros((FULL.l_max + 1, FULL.h_max + 1))
    np.add.at(expected, (words.sum(axis=1), parity[:, mask].sum(axis=1)), 1)
    np.testing.assert_array_equal(enumerate_lower(pattern, N, FULL).A, expected)


def test_brute_force_examples():
    K = 8
    pattern = PuncturePattern(np.array([1, 0]))
    x1_mask = pattern.mask(K // 2)
    expected = np.zeros((WIDE.w_max + 1, WIDE.h_max + 1, WIDE.l_max + 1))
    for seq in itertools.product((0, 1), repeat=K):
        u = np.array(seq, dtype=np.uint8)
        parity, _ = encode(PARITY_TRELLIS, u)
        p = parity[0::2]
        expected[u.sum(), u.sum() + p[x1_mask].sum(), u.sum() + p.sum()] += 1
    upper = enumerate_upper(pattern, K, WIDE)
    np.testing.assert_array_equal(upper.A, expected)
    assert upper.A[0, 0, 0] == 1
    assert enumerate_lower(PuncturePattern(np.array([1, 1, 0])), 9, WIDE).A[0, 0] == 1


@pytest.mark.slow
def test_bound_covers_map_decoding_on_a_short_code():
    K, eb_n0_db = 12, 4.0
    dims = CodeDimensions(d1=50, d2=200, K=K)
    upper_pattern, lower_pattern = PuncturePattern([1, 0]), PuncturePattern([1, 1, 0])
    limits = EnumLimits(w_max=K, h_max=40, l_max=40)
    R = K / (K + 3 + 12)
    sigma2 = 1.0 / (2.0 * R * 10 ** (eb_n0_db / 10))
    words = np.array(list(itertools.product((0, 1), repeat=K)), dtype=np.uint8)

    rng = np.random.default_rng(21)
    errors = bits = 0
    for trial in range(20):
        # a fresh interleaver per block of frames averages over the interleaver ensemble
        cfg = ScccConfig(dims, upper_pattern, lower_pattern, make_random(dims.N, seed=trial))
        codebook = 1.0 - 2.0 * np.stack([sccc_encode(cfg, w).bits for w in words])
        for _ in range(50):
            index = int(rng.integers(words.shape[0]))
            y = codebook[index] + np.sqrt(sigma2) * rng.standard_normal(codebook.shape[1])
            metric = codebook @ y / sigma2
            app = np.array([logsumexp(metric[words[:, t] == 0]) - logsumexp(metric[words[:, t] == 1]) for t in range(K)])
            errors += np.count_nonzero((app < 0) != words[index].astype(bool))
            bits += K

    upper = enumerate_upper(upper_pattern, K, limits)
    lower = enumerate_lower(lower_pattern, dims.N, limits)
    bound = union_bound(upper, lower, K, dims.N, R, eb_n0_db)
    assert errors / bits <= bound


def test_truncation_drops_heavy_terms():
    full = enumerate_lower(PuncturePattern.all_ones(1), 10, WIDE)
    cut = enumerate_lower(PuncturePattern.all_ones(1), 10, EnumLimits(4, 3, 3))
    np.testing.assert_array_equal(cut.A, full.A[:4, :4])


def test_enumerator_frames():
    wef = enumerate_upper(PuncturePattern.all_ones(100), 20, SMALL)
    frame = wef.to_frame()
    assert list(frame.columns) == ["w", "h_t", "l", "mult"]
    assert (frame["mult"] >= 1).all()
    low = enumerate_lower(PuncturePattern.all_ones(300), 30, SMALL)
    assert list(low.to_frame().columns) == ["l", "h2", "mult"]
    assert low.d_min >= 1
    assert low.multiplicity_at_dmin >= 1


def test_puncturing_lowers_dmin():
    full = enumerate_lower(PuncturePattern.all_ones(300), 60, SMALL)
    none = enumerate_lower(PuncturePattern(np.zeros(300, dtype=bool)), 60, SMALL)
    assert none.d_min == 0
    assert full.d_min > none.d_min


def test_bound_is_monotone(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    curve = bound_curve(spread_family, dims, 200, np.arange(0.0, 10.5, 0.5), SMALL)
    assert np.all(np.diff(curve.pb_bound) < 0)
    assert curve.pb_bound[-1] < 1e-6
    assert list(curve.to_frame().columns) == ["eb_n0_db", "pb_bound"]
    assert curve.metadata()["h_max"] == 24


def test_bound_vanishes_at_high_snr(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    upper, lower = enumerators_for(spread_family, dims, 200, SMALL)
    assert union_bound(upper, lower, 200, 300, 0.5, 40.0) < 1e-30
    values = union_bound(upper, lower, 200, 300, 0.5, [3.0, 6.0])
    assert values.shape == (2,)


def test_interleaver_gain(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    short = union_bound(*enumerators_for(spread_family, dims, 200, SMALL), 200, 300, 0.5, 5.0)
    long = union_bound(*enumerators_for(spread_family, dims, 400, SMALL), 400, 600, 0.5, 5.0)
    assert long < short


def test_truncation_mismatch():
    upper = enumerate_upper(PuncturePattern.all_ones(100), 20, EnumLimits(4, 20, 30))
    lower = enumerate_lower(PuncturePattern.all_ones(300), 30, EnumLimits(4, 20, 20))
    with pytest.raises(TruncationMismatchError):
        total_spectrum(upper, lower, 20, 30)
    with pytest.raises(ContractError):
        total_spectrum(upper, lower, 20, 31)


def test_truncation_check_is_small_at_high_snr(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    assert truncation_check(spread_family, dims, 200, 8.0, SMALL) < 0.01


@pytest.mark.parametrize("rate, expected", [("1/2", 200), ("2/3", 100), (1, 0), ("1/3", 300)])
def test_choose_d2_ef(rate, expected):
    assert choose_d2_ef(rate) == expected


def test_required_snr_degenerate_target(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    assert ub_required_snr(spread_family, dims, 200, 0.5, SMALL, lo=8.0, hi=14.0) == 8.0


def test_required_snr_brackets(spread_family):
    dims = CodeDimensions(d1=100, d2=100)
    eb = ub_required_snr(spread_family, dims, 200, 1e-6, SMALL, tol=0.05)
    upper, lower = enumerators_for(spread_family, dims, 200, SMALL)
    assert union_bound(upper, lower, 200, 300, 0.5, eb) <= 1e-6
    assert union_bound(upper, lower, 200, 300, 0.5, eb - 0.05) > 1e-6


def test_limits_validation():
    with pytest.raises(DomainError):
        EnumLimits(0, 10, 10)
    assert EnumLimits().widened(10).h_max == 50


def test_ub_grid_covers_feasible_d2_in_order(spread_family, monkeypatch):
    calls = []

    def fake_cell(family, L, d2, K, target_pb, limits):
        calls.append(d2)
        return 10.0 - d2 / 10

    monkeypatch.setattr(wef, "_ub_cell", fake_cell)
    grid = ub_grid(spread_family, "5/6", K=200, d2_step=15, limits=SMALL)
    assert grid == [(0, 10.0), (15, 8.5), (30, 7.0), (40, 6.0)]
    assert calls == [0, 15, 30, 40]


@pytest.mark.slow
def test_half_rate_floor_anchor(greedy_family):
    dims = dimensions_for(rate="1/2", d2=200, K=2000)
    assert ub_required_snr(greedy_family, dims, 2000, 1e-9) == pytest.approx(4.2, abs=0.4)
