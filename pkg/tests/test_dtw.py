import numpy as np
import pytest

from geomeval.data import DistanceMatrix, SequenceEmbedding
from geomeval.distances import pairwise_matrix
from geomeval.dtw import DtwConfig, _band_windows, _dtw_core, dtw_distance, dtw_rerank
from geomeval.errors import ParameterError

from oracles import naive_dtw


def _seq(frames, clip_id="c", valid_len=None):
    frames = np.asarray(frames, dtype=np.float32)
    return SequenceEmbedding(frames=frames, valid_len=valid_len or frames.shape[0], clip_id=clip_id)


WIDE = DtwConfig(band_radius=1.0, stride=1)


def test_identical_sequences_zero():
    seq = _seq([[0.2, 0.4], [0.5, 0.1], [0.9, 0.3]])
    assert dtw_distance(seq, seq, WIDE) == 0.0


def test_repeated_frame_absorbed_at_zero_cost():
    a = _seq([[0.0], [1.0]])
    b = _seq([[0.0], [1.0], [1.0]])
    assert dtw_distance(a, b, WIDE) == 0.0


def test_forced_diagonal_is_one_third():
    a = _seq([[0.0], [0.0], [1.0]])
    b = _seq([[0.0], [1.0], [1.0]])
    narrow = DtwConfig(band_radius=1e-9, stride=1)  # widened to the minimum corridor
    assert dtw_distance(a, b, narrow) == pytest.approx(1 / 3, abs=0.0)


def test_band_widening_flagged():
    flags = {}
    a = _seq(np.random.default_rng(0).standard_normal((8, 2)))
    b = _seq(np.random.default_rng(1).standard_normal((3, 2)))
    dtw_distance(a, b, DtwConfig(band_radius=1e-6, stride=1), flags=flags)
    assert flags["dtw_band_widened"] == 1


def test_unbanded_matches_naive_recursion_exactly():
    rng = np.random.default_rng(2)
    for trial in range(100):
        n, m = rng.integers(1, 11), rng.integers(1, 11)
        d = int(rng.integers(1, 4))
        A = rng.standard_normal((int(n), d))
        B = rng.standard_normal((int(m), d))
        got = _dtw_core(A, B, 1.0, True)
        expected = naive_dtw(A.tolist(), B.tolist(), normalize=True)
        assert got == expected, (trial, n, m)


def test_banded_matches_oracle_on_same_windows():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n, m = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        A = rng.standard_normal((n, 2))
        B = rng.standard_normal((m, 2))
        lo, hi = _band_windows(n, m, 0.3)
        got = _dtw_core(A, B, 0.3, False)
        expected = naive_dtw(A.tolist(), B.tolist(), lo=lo.tolist(), hi=hi.tolist(), normalize=False)
        assert got == expected


def test_banded_raw_cost_at_least_unbanded():
    rng = np.random.default_rng(4)
    for _ in range(40):
        n, m = int(rng.integers(3, 12)), int(rng.integers(3, 12))
        A = rng.standard_normal((n, 3))
        B = rng.standard_normal((m, 3))
        banded = _dtw_core(A, B, 0.15, False)
        unbanded = _dtw_core(A, B, 1.0, False)
        assert banded >= unbanded - 1e-12


def test_symmetry_for_equal_lengths():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 3))
    B = rng.standard_normal((6, 3))
    assert _dtw_core(A, B, 0.4, True) == _dtw_core(B, A, 0.4, True)


def test_valid_len_and_stride_preprocessing():
    frames = np.array([[1.0, 0.0], [0.0, 1.0], [9.0, 9.0]])
    a = _seq(frames, valid_len=2)
    b = _seq(frames[:2])
    assert dtw_distance(a, b, WIDE) == 0.0
    long = _seq(np.tile([[1.0, 0.0]], (9, 1)))
    strided = DtwConfig(band_radius=1.0, stride=4)
    assert dtw_distance(long, _seq([[2.0, 0.0]]), strided) == 0.0  # row-normalized


def test_python_and_jit_dp_twins_agree():
    # the jitted DP and the pure-Python fallback must be interchangeable
    from geomeval.dtw import _HAVE_NUMBA, _band_windows, _dp_python

    if not _HAVE_NUMBA:
        pytest.skip("numba not installed; only one implementation active")
    from geomeval.dtw import _dp_numba

    rng = np.random.default_rng(9)
    for _ in range(40):
        n, m = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        A, B = rng.standard_normal((n, 3)), rng.standard_normal((m, 3))
        lo, hi = _band_windows(n, m, 0.35)
        for normalize in (True, False):
            assert _dp_python(A, B, lo, hi, normalize) == float(
                _dp_numba(A, B, lo, hi, normalize)
            )


def test_config_validation():
    with pytest.raises(ParameterError):
        DtwConfig(band_radius=0.0)
    with pytest.raises(ParameterError):
        DtwConfig(stride=0)
    with pytest.raises(ParameterError):
        DtwConfig(shortlist_size=0)


# ---------------------------------------------------------------- re-ranking

def _toy_subset(seed=0, n=8, t=6, d=5):
    rng = np.random.default_rng(seed)
    seqs = [_seq(rng.standard_normal((t, d)), clip_id=f"c{i}") for i in range(n)]
    pooled = np.stack([s.frames.mean(axis=0) for s in seqs])
    dist = pairwise_matrix(pooled, "cosine")
    return seqs, dist


def test_full_shortlist_equals_brute_force_dtw():
    seqs, pooled = _toy_subset()
    config = DtwConfig(band_radius=0.5, stride=1, shortlist_size=len(seqs) - 1, pca_dims=3)
    rr = dtw_rerank(pooled, seqs, config)
    assert rr.shortlist_mask.all()

    # brute force with the same preprocessing chain
    from geomeval.dtw import _normalize_frames
    from geomeval.pca import fit_pca

    normed = [_normalize_frames(s.frames[: s.valid_len]) for s in seqs]
    model = fit_pca(np.concatenate(normed), 3)
    prepared = [(f - model.mean) @ model.components.T for f in normed]
    n = len(seqs)
    expected = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                expected[i, j] = _dtw_core(prepared[i], prepared[j], 0.5, True)
    assert np.array_equal(rr.values, expected)
    assert rr.effective_values() is rr.values or np.array_equal(rr.effective_values(), rr.values)


def test_identical_sequences_rerank_to_zero():
    rng = np.random.default_rng(6)
    frames = rng.standard_normal((5, 4))
    seqs = [
        _seq(frames, "a"),
        _seq(frames, "b"),
        _seq(rng.standard_normal((5, 4)), "c"),
        _seq(rng.standard_normal((5, 4)), "d"),
    ]
    # pooled distances pretend a and b are far apart
    values = np.array(
        [
            [0.0, 5.0, 1.0, 1.0],
            [5.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 0.0],
        ]
    )
    pooled = DistanceMatrix(values=values, metric_name="cosine")
    rr = dtw_rerank(pooled, seqs, DtwConfig(band_radius=1.0, stride=1, shortlist_size=3, pca_dims=2))
    assert rr.values[0, 1] == 0.0


def test_partial_shortlist_masks_and_ranks_beyond():
    seqs, pooled = _toy_subset(seed=7, n=10)
    config = DtwConfig(band_radius=1.0, stride=1, shortlist_size=3, pca_dims=2)
    rr = dtw_rerank(pooled, seqs, config)
    assert not rr.shortlist_mask.all()
    eff = rr.effective_values()
    off = ~np.eye(10, dtype=bool)
    shortlisted = rr.shortlist_mask & off
    beyond = ~rr.shortlist_mask & off
    assert eff[beyond].min() > eff[shortlisted].max()
    # beyond-shortlist entries keep their pooled ordering
    b_idx = np.argwhere(beyond)
    vals = pooled.values
    for (i1, j1), (i2, j2) in zip(b_idx[:-1], b_idx[1:]):
        if vals[i1, j1] < vals[i2, j2]:
            assert eff[i1, j1] < eff[i2, j2]


def test_rerank_alignment_check():
    seqs, pooled = _toy_subset(seed=8, n=5)
    with pytest.raises(ParameterError):
        dtw_rerank(pooled, seqs[:-1], DtwConfig())
