from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from permfree.errors import ValidationError
from permfree.exact import exact_moment
from permfree.monomial import PureUWord, parse_monomial
from permfree.perms import Perm, compose, fix_count, inverse
from permfree.rng import stream
from permfree.sim import (
    EnsembleSample,
    build_ensemble,
    dump_ensemble,
    evaluate_monomial_trace,
    load_ensemble,
    mc_estimate,
    sample_gaussian_matrix,
    sample_uniform_permutation,
)
from permfree.words import FreeWord, evaluate_word

from conftest import m_for


def mat(p: Perm) -> np.ndarray:
    n = p.n
    out = np.zeros((n, n), dtype=int)
    for j in range(1, n + 1):
        out[p(j) - 1, j - 1] = 1
    return out


class TestPermutations:
    def test_size_one(self):
        assert sample_uniform_permutation(1, stream(0, "demo", 0)) == Perm.identity(1)

    def test_zero_rejected(self):
        with pytest.raises(ValidationError):
            sample_uniform_permutation(0, stream(0, "demo", 0))

    def test_uniform_on_s3(self):
        rng = stream(42, "demo", 0)
        counts = Counter(sample_uniform_permutation(3, rng) for _ in range(60_000))
        assert len(counts) == 6
        sigma = math.sqrt(60_000 * (1 / 6) * (5 / 6))
        for c in counts.values():
            assert abs(c - 10_000) <= 4 * sigma

    def test_reproducible(self):
        assert sample_uniform_permutation(10, stream(5, "demo", 3)) == sample_uniform_permutation(10, stream(5, "demo", 3))

    @settings(max_examples=50)
    @given(st.integers(1, 16).flatmap(lambda n: st.tuples(st.permutations(range(1, n + 1)), st.permutations(range(1, n + 1)))))
    def test_matrix_identities(self, pair):
        sigma, rho = Perm(tuple(pair[0])), Perm(tuple(pair[1]))
        assert (mat(compose(sigma, rho)) == mat(sigma) @ mat(rho)).all()
        assert (mat(sigma).T == mat(inverse(sigma))).all()


class TestGaussian:
    def test_moments(self):
        f = sample_gaussian_matrix(100, 1000, stream(1, "demo", 0))
        assert abs(np.mean(np.abs(f) ** 2) - 1) <= 0.02
        assert abs(np.mean(f**2)) <= 0.02
        assert abs(np.mean(f.real**2) - 0.5) <= 0.02

    def test_reproducible(self):
        a = sample_gaussian_matrix(3, 4, stream(9, "demo", 1))
        b = sample_gaussian_matrix(3, 4, stream(9, "demo", 1))
        assert (a == b).all()


class TestEnsemble:
    def test_wishart_hermitian(self):
        sample = build_ensemble(16, 8, {"W"}, 2, stream(0, "ensemble", 0))
        for w in sample.W.values():
            assert np.max(np.abs(w - w.conj().T)) <= 1e-12
            assert np.min(np.linalg.eigvalsh(w)) >= -1e-10

    def test_gue_from_same_draw(self):
        sample = build_ensemble(8, None, {"G", "GUE"}, 1, stream(0, "ensemble", 0))
        g = sample.G[1]
        assert np.allclose(sample.GUE[1], (g + g.conj().T) / math.sqrt(2))

    def test_gg_star_concentrates(self):
        est = mc_estimate("G1 U[e] G1* U[e]", 64, None, 200, seed=2)
        assert abs(est.mean - 1) <= 0.05

    def test_rectangular_blocks(self):
        sample = build_ensemble(3, 2, {"H", "T", "U"}, 1, stream(0, "ensemble", 0))
        h = sample.embedded("H", 1)
        assert np.count_nonzero(h[:2, :2]) == 0
        assert np.count_nonzero(h[2:, :]) == 0
        assert np.count_nonzero(h[:2, 2:]) == 6

    def test_permutations_preserve_row_norms(self):
        sample = build_ensemble(6, None, {"U", "G"}, 1, stream(0, "ensemble", 0))
        g = sample.G[1]
        permuted = g[:, sample.perms[1]]
        assert np.allclose(np.linalg.norm(permuted, axis=1), np.linalg.norm(g, axis=1))

    def test_unknown_tag(self):
        with pytest.raises(ValidationError):
            build_ensemble(3, 3, {"Q"}, 1, stream(0, "ensemble", 0))


class TestTrace:
    def test_identity_word(self):
        sample = build_ensemble(5, None, {"U"}, 1, stream(0, "ensemble", 0))
        assert evaluate_monomial_trace("U[e]", sample) == 1

    @settings(max_examples=30)
    @given(st.lists(st.tuples(st.integers(1, 2), st.sampled_from([1, -1])), max_size=6), st.integers(0, 10**6))
    def test_pure_word_counts_fixed_points(self, raw, seed):
        w = FreeWord(tuple(raw))
        sample = build_ensemble(7, None, {"U"}, 2, stream(seed, "ensemble", 0))
        sigmas = [Perm(tuple(int(x) + 1 for x in sample.perms[r])) for r in (1, 2)]
        expected = fix_count(evaluate_word(w, sigmas)) / 7
        assert evaluate_monomial_trace(PureUWord(w), sample) == pytest.approx(expected, abs=0)

    def test_one_by_one(self):
        sample = build_ensemble(1, None, {"U", "G"}, 1, stream(4, "ensemble", 0))
        assert evaluate_monomial_trace("G1 U[e] G1* U[e]", sample) == pytest.approx(abs(sample.G[1][0, 0]) ** 2)

    def test_dense_agrees_with_index_maps(self):
        sample = build_ensemble(5, None, {"U", "G"}, 2, stream(8, "ensemble", 0))
        u1, u2 = sample.permutation_matrix(1), sample.permutation_matrix(2)
        g = sample.G[1]
        dense = g @ u1 @ u2 @ g.conj().T @ u1.T
        assert evaluate_monomial_trace("G1 U[g1.g2] G1* U[g1^-1]", sample) == pytest.approx(np.trace(dense) / 5)

    def test_rectangular_agrees_with_embedding(self):
        sample = build_ensemble(3, 2, {"U", "T", "H"}, 1, stream(8, "ensemble", 0))
        h = sample.embedded("H", 1)
        t = sample.embedded("T", 1)
        u = sample.embedded("U", 1)
        dense = h.conj().T @ t @ h @ u
        assert evaluate_monomial_trace("H1* T[g1] H1 U[g1]", sample) == pytest.approx(np.trace(dense) / 5)

    def test_missing_matrices(self):
        sample = build_ensemble(3, None, {"U"}, 1, stream(0, "ensemble", 0))
        with pytest.raises(ValidationError):
            evaluate_monomial_trace("G1 U[e] G1* U[e]", sample)


class TestEstimate:
    def test_identity_has_no_variance(self):
        est = mc_estimate("U[e]", 4, None, 50, seed=0)
        assert est.mean == 1 and est.variance == 0 and est.stderr == 0

    def test_samples_validated(self):
        with pytest.raises(ValidationError):
            mc_estimate("U[e]", 4, None, 0, seed=0)

    @pytest.mark.parametrize("text", ["G1 U[e] G1* U[e]", "W1"])
    def test_mean_near_one(self, text):
        est = mc_estimate(text, 32, 32, 400, seed=1)
        assert abs(est.mean - 1) <= 4 * est.stderr
        assert est.stderr == pytest.approx(math.sqrt(est.variance / 400))

    def test_worker_count_does_not_change_results(self, monkeypatch):
        monkeypatch.setenv("PERMFREE_THREADS", "1")
        a = mc_estimate("W1 U[g1] W1 U[g1^-1]", 12, 9, 64, seed=7)
        monkeypatch.setenv("PERMFREE_THREADS", "4")
        b = mc_estimate("W1 U[g1] W1 U[g1^-1]", 12, 9, 64, seed=7)
        assert a == b


@pytest.mark.slow
def test_suite_mc_matches_exact(suite_monomial):
    N = 4
    M = m_for(suite_monomial, N)
    exact = float(exact_moment(suite_monomial, N, M).value)
    est = mc_estimate(suite_monomial, N, M, 10_000, seed=13)
    assert abs(est.mean - exact) <= 4 * est.stderr + 1e-12


def test_dump_round_trip(tmp_path):
    sample = build_ensemble(4, 3, {"U", "G", "W", "GUE", "T", "H"}, 2, stream(0, "ensemble", 0))
    path = tmp_path / "ens.bin"
    dump_ensemble(sample, path)
    raw = path.read_bytes()
    assert raw[:8] == b"PERMFREE" and len(raw) == 32 + 8 * 2 * (4 * 16 + 9 + 12)
    loaded = load_ensemble(path)
    assert isinstance(loaded, EnsembleSample)
    assert loaded.tags == sample.tags
    for r in (1, 2):
        assert (loaded.perms[r] == sample.perms[r]).all()
        assert (loaded.top_perms[r] == sample.top_perms[r]).all()
        assert np.allclose(loaded.G[r], sample.G[r], atol=1e-6)
        assert np.allclose(loaded.H[r], sample.H[r], atol=1e-6)
    m = parse_monomial("G1 U[g1] G1* U[e]")
    assert evaluate_monomial_trace(m, loaded) == pytest.approx(evaluate_monomial_trace(m, sample), abs=1e-5)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"x" * 40)
    with pytest.raises(ValidationError):
        load_ensemble(path)


def test_suite_is_evaluable(suite_monomial):
    est = mc_estimate(suite_monomial, 3, m_for(suite_monomial, 3), 5, seed=0)
    assert est.samples == 5
    assert np.isfinite(est.mean)
