import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import logsumexp

from rc_sccc.channel import bpsk, channel_llrs, transmit
from rc_sccc.convcode import CC_1_5_7, CC_5_7, shift_register_step
from rc_sccc.errors import ContractError
from rc_sccc.interleaving import make_random, make_s_random
from rc_sccc.puncturing import CodeDimensions, PuncturePattern
from rc_sccc.sccc import ScccConfig, decode, demultiplex, dump_frame, encode, load_frame


@pytest.fixture
def config(spread_family):
    return ScccConfig.build(spread_family, CodeDimensions(d1=20, d2=20), seed=3)


def _parity(bits):
    register = [0, 0]
    out = []
    for b in bits:
        (y,), register = shift_register_step(CC_5_7, register, int(b))
        out.append(y)
    return np.array(out, dtype=np.uint8)


def test_zero_codeword(config):
    cw = encode(config, np.zeros(200, dtype=np.uint8))
    assert not cw.bits.any()


def test_frame_dimensions(config):
    cw = encode(config, np.random.default_rng(0).integers(0, 2, 200))
    assert (cw.x0.size, cw.x1.size, cw.x2.size) == (200, 20, 20)
    assert cw.L == 240
    assert config.rate == Fraction(5, 6)
    assert config.frame_length == 240


def test_long_frames_tile_patterns(spread_family):
    cfg = ScccConfig.build(spread_family, CodeDimensions(d1=20, d2=20, K=2000), seed=0)
    assert (cfg.n_x1, cfg.n_x2) == (200, 200)
    assert cfg.rate == Fraction(5, 6)


def test_matches_reference_encoder(config, rng):
    u = rng.integers(0, 2, 200).astype(np.uint8)
    v = np.concatenate([u, _parity(u)[0::2]])
    z = v[config.interleaver.perm]
    cw = encode(config, u)
    np.testing.assert_array_equal(cw.v, v)
    np.testing.assert_array_equal(cw.z, z)
    np.testing.assert_array_equal(cw.x1, v[200:][config.x1_mask])
    np.testing.assert_array_equal(cw.x2, _parity(z)[config.x2_mask])


def _systematic_stream(bits):
    """CC(1,5/7) output serialized per step as [b0, p0, b1, p1, ...]."""
    register = [0, 0]
    out = []
    for b in bits:
        y, register = shift_register_step(CC_1_5_7, register, int(b))
        out.extend(y)
    return np.array(out, dtype=np.uint8)


def test_outer_inner_chain_matches_encoder(config):
    K, perm = config.K, config.interleaver.perm
    # the outer puncturer keeps u and the parity of even steps
    outer_keep = PuncturePattern([1, 1, 1, 0]).mask(2 * K)
    stream_index = np.concatenate([2 * np.arange(K), 4 * np.arange(K // 2) + 1])
    inner_perm = (np.cumsum(outer_keep) - 1)[stream_index][perm]
    keep_sys = config.v_mask()[perm]
    keep_par = config.x2_mask
    inner_keep = np.stack([keep_sys, keep_par], axis=1).ravel()

    rng = np.random.default_rng(10)
    for _ in range(100):
        u = rng.integers(0, 2, K).astype(np.uint8)
        outer = _systematic_stream(u)[outer_keep]
        inner = _systematic_stream(outer[inner_perm])
        sent = inner[inner_keep]
        cw = encode(config, u)

        assert sent.size == cw.L
        assert sorted(sent.tolist()) == sorted(cw.bits.tolist())
        np.testing.assert_array_equal(inner[0::2], cw.z)
        systematic = inner[0::2][keep_sys]
        np.testing.assert_array_equal(systematic[np.argsort(perm[keep_sys])], cw.bits[: K + config.n_x1])
        np.testing.assert_array_equal(inner[1::2][keep_par], cw.x2)


def test_demultiplex_places_erasures(config):
    cw = encode(config, np.ones(200, dtype=np.uint8))
    lam_v, lam_q = demultiplex(config, channel_llrs(bpsk(cw.bits), 0.5))
    assert lam_v.shape == (300,)
    assert lam_q.shape == (300,)
    assert np.count_nonzero(lam_v[200:]) == 20
    assert np.count_nonzero(lam_q) == 20


def test_noiseless_decode(config):
    rng = np.random.default_rng(5)
    for _ in range(5):
        u = rng.integers(0, 2, 200).astype(np.uint8)
        llrs = channel_llrs(transmit(encode(config, u).bits, 0.0, seed=0), 1e-3)
        result = decode(config, llrs, n_iterations=1)
        np.testing.assert_array_equal(result.bits, u)
        assert result.iterations == 1


def test_batched_decode_and_early_stop(config):
    rng = np.random.default_rng(6)
    u = rng.integers(0, 2, (4, 200)).astype(np.uint8)
    bits = np.stack([encode(config, frame).bits for frame in u])
    llrs = channel_llrs(bpsk(bits), 1e-3)
    result = decode(config, llrs, n_iterations=10, early_stop=True)
    assert result.iterations == 2
    assert result.app.shape == (2, 4, 200)
    np.testing.assert_array_equal(result.decisions(0), u)


def test_mi_trace(config):
    u = np.random.default_rng(7).integers(0, 2, 200).astype(np.uint8)
    llrs = channel_llrs(bpsk(encode(config, u).bits), 1e-3)
    result = decode(config, llrs, n_iterations=3, reference=u)
    assert set(result.mi_trace) == {"lower_out", "upper_out", "app"}
    assert len(result.mi_trace["app"]) == 3
    assert result.mi_trace["app"][-1] > 0.99


def test_decoding_improves_with_iterations(spread_family):
    cfg = ScccConfig.build(spread_family, CodeDimensions(d1=100, d2=100, K=2000), seed=1)
    rng = np.random.default_rng(8)
    u = rng.integers(0, 2, (4, 2000)).astype(np.uint8)
    bits = np.stack([encode(cfg, frame).bits for frame in u])
    sigma2 = 0.6
    llrs = channel_llrs(transmit(bits, sigma2, seed=9), sigma2)
    result = decode(cfg, llrs, n_iterations=6)
    errors = [np.count_nonzero(result.decisions(i) != u) for i in range(6)]
    assert errors[-1] <= errors[0]


def test_contract_errors(config, spread_family):
    with pytest.raises(ContractError):
        encode(config, np.zeros(199))
    with pytest.raises(ContractError):
        decode(config, np.zeros(239), n_iterations=1)
    with pytest.raises(ContractError):
        decode(config, np.zeros(240), n_iterations=0)
    with pytest.raises(ContractError):
        ScccConfig.build(spread_family, CodeDimensions(d1=20, d2=20), interleaver=make_random(299, seed=0))


def test_s_random_build(spread_family):
    cfg = ScccConfig.build(spread_family, CodeDimensions(d1=20, d2=20), seed=2, kind="s_random")
    assert cfg.interleaver.kind == "s_random"
    assert cfg.describe()["interleaver"]["s"] == 12


def test_frame_dump(tmp_path, config):
    u = np.random.default_rng(9).integers(0, 2, 200).astype(np.uint8)
    cw = encode(config, u)
    path = tmp_path / "frame.json"
    dump_frame(path, config, u, cw, seed=9)
    doc = load_frame(path)
    np.testing.assert_array_equal(doc["u"], u)
    np.testing.assert_array_equal(doc["x2"], cw.x2)
    assert doc["seed"] == 9
    assert doc["dims"]["L"] == 240


def test_explicit_interleaver(spread_family):
    ilv = make_s_random(300, 5, seed=1)
    cfg = ScccConfig.build(spread_family, CodeDimensions(d1=20, d2=20), interleaver=ilv)
    assert cfg.interleaver is ilv


def test_iterative_decoder_agrees_with_joint_map():
    cfg = ScccConfig(
        CodeDimensions(d1=50, d2=150, K=8),
        PuncturePattern([1, 0]),
        PuncturePattern([1, 0]),
        make_random(12, seed=4),
    )
    words = np.array(list(itertools.product((0, 1), repeat=8)), dtype=np.uint8)
    codebook = 1.0 - 2.0 * np.stack([encode(cfg, w).bits for w in words])
    sigma2 = 0.5
    rng = np.random.default_rng(11)

    agree = 0
    for trial in range(200):
        u = words[rng.integers(words.shape[0])]
        llrs = channel_llrs(transmit(encode(cfg, u).bits, sigma2, seed=trial), sigma2)
        metric = 0.5 * codebook @ llrs
        app = np.array([logsumexp(metric[words[:, t] == 0]) - logsumexp(metric[words[:, t] == 1]) for t in range(8)])
        result = decode(cfg, llrs, n_iterations=10)
        agree += np.count_nonzero((app < 0) == result.bits.astype(bool))
    assert agree / (200 * 8) >= 0.97


@pytest.mark.slow
def test_bit_errors_fall_with_iterations_at_rate_half(spread_family):
    cfg = ScccConfig.build(spread_family, CodeDimensions(d1=0, d2=200, K=2000), seed=12)
    assert cfg.rate == Fraction(1, 2)
    rng = np.random.default_rng(13)
    u = rng.integers(0, 2, (20, 2000)).astype(np.uint8)
    bits = np.stack([encode(cfg, frame).bits for frame in u])
    sigma2 = 1.0 / (2.0 * 0.5 * 10 ** 0.15)  # Eb/N0 = 1.5 dB
    llrs = channel_llrs(transmit(bits, sigma2, seed=14), sigma2)
    result = decode(cfg, llrs, n_iterations=10)
    errors = [np.count_nonzero(result.decisions(i) != u) for i in range(10)]
    for before, after in zip(errors, errors[1:]):
        assert after <= 1.1 * before + 10
    assert errors[-1] < errors[0] / 10
