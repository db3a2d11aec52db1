import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smtree.core import (
    ChannelPair,
    Constellation,
    CsirModel,
    InvalidArgument,
    SmFrame,
    apply_csir_error,
    build_qam,
    enumerate_candidates,
    index_to_bits,
    merge_bits,
    sample_channel,
    sample_noise,
    sm_encode,
    split_bits,
)

ORDERS = (2, 4, 8, 16, 32, 64, 128)


@pytest.mark.parametrize("M", ORDERS)
def test_qam_unit_energy_and_labels(M):
    c = build_qam(M)
    assert c.points.shape == (M,)
    assert abs(np.sum(np.abs(c.points) ** 2) / M - 1.0) < 1e-12
    k = M.bit_length() - 1
    assert sorted(c.labels) == sorted(format(q, f"0{k}b") for q in range(M))
    assert len(set(np.round(c.points, 12))) == M


@pytest.mark.parametrize("M", ORDERS)
def test_qam_gray_adjacency(M):
    # recover the grid from the coordinates and check every neighbour pair
    c = build_qam(M)
    re_levels = np.unique(np.round(c.points.real, 9))
    im_levels = np.unique(np.round(c.points.imag, 9))
    assert len(re_levels) * len(im_levels) == M
    grid = {}
    for q, p in enumerate(c.points):
        ix = int(np.searchsorted(re_levels, round(p.real, 9)))
        iy = int(np.searchsorted(im_levels, round(p.imag, 9)))
        grid[(ix, iy)] = q
    for (ix, iy), q in grid.items():
        for nb in ((ix + 1, iy), (ix, iy + 1)):
            if nb in grid:
                assert bin(q ^ grid[nb]).count("1") == 1


def test_bpsk_and_qpsk_points():
    assert sorted(build_qam(2).points.real) == [-1.0, 1.0]
    assert np.allclose(build_qam(2).points.imag, 0)
    q4 = build_qam(4).points
    s = 1 / np.sqrt(2)
    assert set(np.round(q4, 12)) == {complex(round(a * s, 12), round(b * s, 12)) for a in (-1, 1) for b in (-1, 1)}
    assert abs(np.mean(np.abs(q4) ** 2) - 1.0) < 1e-15


def test_eight_qam_is_rectangular():
    pts = build_qam(8).points
    assert len(np.unique(np.round(pts.real, 9))) == 4
    assert len(np.unique(np.round(pts.imag, 9))) == 2


@pytest.mark.parametrize("M", [3, 0, 256, 6])
def test_qam_rejects_bad_order(M):
    with pytest.raises(InvalidArgument):
        build_qam(M)


def test_constellation_rejects_wrong_energy():
    with pytest.raises(InvalidArgument):
        Constellation(2, np.array([2.0, -2.0]))


def test_frame_length_and_zero_frame():
    a, q = split_bits("000000", 8, 8)
    assert (a, q) == (0, 0)
    assert split_bits("00", 2, 2) == (0, 0)
    with pytest.raises(InvalidArgument):
        split_bits("00000", 8, 8)
    with pytest.raises(InvalidArgument):
        split_bits("0120", 2, 8)


def test_split_is_msb_first():
    assert split_bits("101110", 8, 8) == (0b101, 0b110)
    assert SmFrame.from_bits("101110", 8, 8).index(8) == 5 * 8 + 6


@pytest.mark.parametrize("N_t,M", [(N_t, M) for N_t in (1, 2, 4, 8, 16, 32) for M in ORDERS if N_t * M <= 4096])
def test_split_merge_exhaustive(N_t, M):
    n = (N_t * M).bit_length() - 1
    for j in range(N_t * M):
        bits = index_to_bits(j, n)
        a, q = split_bits(bits, N_t, M)
        assert a * M + q == j
        assert np.array_equal(merge_bits(a, q, N_t, M), bits)


def test_split_merge_random(rng):
    for _ in range(1000):
        bits = rng.integers(0, 2, size=4)
        a, q = split_bits(bits, 4, 4)
        assert np.array_equal(merge_bits(a, q, 4, 4), bits)


def test_sm_encode_examples():
    h = np.array([[1.0], [1j], [-1.0]])
    ch = ChannelPair(h, h)
    bpsk = build_qam(2)
    plus = int(np.argmax(bpsk.points.real))
    minus = 1 - plus
    assert np.array_equal(sm_encode(SmFrame(0, plus, None), ch, bpsk), h[:, 0])
    assert np.array_equal(sm_encode(SmFrame(0, minus, None), ch, bpsk), np.array([-1, -1j, 1]))


def test_sm_encode_random_matches_product(rng):
    c = build_qam(16)
    h = sample_channel(rng, 5, 4)
    ch = ChannelPair(h, h)
    for _ in range(50):
        a, q = int(rng.integers(4)), int(rng.integers(16))
        out = sm_encode(SmFrame(a, q, None), ch, c)
        for n in range(5):
            # scalar and vectorized complex products may differ in the last ulp
            assert abs(out[n] - h[n, a] * c.points[q]) <= 4e-16 * abs(out[n])


def test_channel_moments(rng):
    h = sample_channel(rng, 1000, 1000)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.01
    assert abs(np.var(h.real) - 0.5) < 0.01


def test_noise_moments(rng):
    w = sample_noise(rng, 10**6, 2.0)
    assert abs(np.mean(np.abs(w) ** 2) - 2.0) < 0.02
    assert np.array_equal(sample_noise(rng, 4, 0.0), np.zeros(4))
    with pytest.raises(InvalidArgument):
        sample_noise(rng, 4, -1.0)


def test_sampling_is_deterministic():
    a = sample_channel(np.random.default_rng(7), 4, 4)
    b = sample_channel(np.random.default_rng(7), 4, 4)
    assert np.array_equal(a, b)
    assert np.array_equal(sample_noise(np.random.default_rng(3), 8, 0.5), sample_noise(np.random.default_rng(3), 8, 0.5))


def test_csir_modes(rng):
    h = sample_channel(rng, 4, 4)
    state = rng.bit_generator.state
    pair = apply_csir_error(h, CsirModel.perfect(), 10.0, rng)
    assert pair.h_est is h and pair.sigma_e2 == 0.0
    assert rng.bit_generator.state == state
    assert CsirModel.variable().error_variance(10.0) == pytest.approx(0.1)

    big = sample_channel(rng, 1000, 1000)
    est = apply_csir_error(big, CsirModel.fixed(0.2), 10.0, rng).h_est
    assert abs(np.mean(np.abs(est) ** 2) - 1.2) < 0.01


def test_csir_parse():
    assert CsirModel.parse("0") == CsirModel.perfect()
    assert CsirModel.parse("0.2") == CsirModel.fixed(0.2)
    assert CsirModel.parse("1/snr") == CsirModel.variable()
    assert CsirModel.parse("variable").label() == "1/snr"
    with pytest.raises(InvalidArgument):
        CsirModel.parse("lots")
    with pytest.raises(InvalidArgument):
        CsirModel.fixed(-0.1)


def test_candidates_single():
    h = np.array([[0.5 + 0.5j], [2.0]])
    cs = enumerate_candidates(ChannelPair(h, h), Constellation(1, np.array([1.0 + 0j])))
    assert cs.count == 1
    assert np.array_equal(cs.vectors[:, 0], h[:, 0])


def test_candidates_four_branches(rng):
    h = sample_channel(rng, 3, 2)
    cs = enumerate_candidates(ChannelPair(h, h), build_qam(2))
    assert cs.vectors.shape == (3, 4)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    N_t=st.sampled_from([1, 2, 4, 8]),
    M=st.sampled_from([2, 4, 8, 16]),
    N_r=st.integers(1, 6),
)
def test_candidates_reproduce_encoder(seed, N_t, M, N_r):
    r = np.random.default_rng(seed)
    c = build_qam(M)
    h = sample_channel(r, N_r, N_t)
    ch = ChannelPair(h, h)
    cs = enumerate_candidates(ch, c)
    for a, q in itertools.product(range(N_t), range(M)):
        assert np.array_equal(cs.vectors[:, a * M + q], sm_encode(SmFrame(a, q, None), ch, c))
