"""Metric oracles, feature extractors and the repeated evaluation protocol."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipo.autodiff import make_rng
from bipo.evaluation import (EvalProtocol, EvalReport, ExtractorConfig, FeatureExtractorPair, diversity,
                             dump_features, evaluate_model, fid, fid_details, load_features, matrix_sqrt_psd,
                             mean_ci, mm_dist, mmodality, r_precision, train_extractors)
from bipo.generation import GenerationConfig, SamplerConfig
from bipo.motion import by_split, generate_corpus
from bipo.transformer import BiPartTransformer, T2MConfig
from bipo.vq import PartVQVAESet, VqConfig
from oracles import dist, naive_fid, naive_r_precision


# ---------------------------------------------------------------- matrix square root and FID

def test_matrix_sqrt_examples(rng):
    assert np.allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    assert np.allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    for rank in (6, 3):
        A = rng.normal(size=(6, rank))
        A = A @ A.T
        B = matrix_sqrt_psd(A)
        assert np.linalg.norm(B @ B - A) / np.linalg.norm(A) < 1e-8
    with pytest.raises(ValueError, match="positive semi-definite"):
        matrix_sqrt_psd(np.diag([1.0, -0.5]))
    with pytest.raises(ValueError):
        matrix_sqrt_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_fid_self_and_analytic_cases(rng):
    X = rng.normal(size=(200, 5))
    assert fid(X, X) < 1e-6
    d = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    assert abs(fid(X, X + d) - d @ d) < 1e-8
    z = rng.normal(size=500)
    z = (z - z.mean()) / z.std(ddof=1)
    assert abs(fid((2 * z)[:, None], z[:, None]) - 1.0) < 1e-8


def test_fid_symmetry_and_regularization(rng):
    X, Y = rng.normal(size=(100, 4)), rng.normal(1.0, 2.0, size=(80, 4))
    assert abs(fid(X, Y) - fid(Y, X)) < 1e-9
    small = fid_details(rng.normal(size=(5, 8)), rng.normal(size=(6, 8)))
    assert small.regularized and np.isfinite(small.value) and small.value >= 0
    assert not fid_details(X, Y).regularized
    with pytest.raises(ValueError):
        fid(X, rng.normal(size=(10, 3)))


@pytest.mark.parametrize("seed", range(5))
def test_fid_matches_naive_oracle(seed):
    rng = make_rng(seed, "fid-oracle")
    X = rng.normal(size=(40, 4)) @ rng.normal(size=(4, 4))
    Y = rng.normal(0.3, 1.5, size=(64, 4))
    assert abs(fid(X, Y) - naive_fid(X.tolist(), Y.tolist())) < 1e-8


# ---------------------------------------------------------------- retrieval and distance metrics

@pytest.mark.parametrize("seed", range(5))
def test_r_precision_matches_naive_oracle(seed):
    rng = make_rng(seed, "rp-oracle")
    n = int(rng.integers(32, 65))
    M, T = rng.normal(size=(n, 6)), rng.normal(size=(n, 6))
    T[: n // 2] = M[: n // 2] + 0.5 * rng.normal(size=(n // 2, 6))
    got = r_precision(M, T, 3, 32, make_rng(seed, "perm"))
    order = make_rng(seed, "perm").permutation(n).tolist()
    assert np.allclose(got, naive_r_precision(M.tolist(), T.tolist(), 3, 32, order), atol=0)


def test_r_precision_identical_features_and_errors(rng):
    M = rng.normal(size=(64, 4))
    assert r_precision(M, M.copy(), 3, 32, rng)[0] == 1.0
    with pytest.raises(ValueError):
        r_precision(M[:31], M[:31])
    with pytest.raises(ValueError):
        r_precision(M, M[:40])


def test_r_precision_chance_level():
    rng = make_rng(0, "chance")
    trials = np.array([r_precision(rng.normal(size=(32, 8)), rng.normal(size=(32, 8)), 3, 32, rng)
                       for _ in range(1000)])
    mean = trials.mean(axis=0)
    for k in range(3):
        p = (k + 1) / 32
        sigma = math.sqrt(p * (1 - p) / (32 * 1000))
        print(f"R@{k + 1}: {mean[k]:.4f} vs {p:.4f} (3 sigma {3 * sigma:.4f})")
        assert abs(mean[k] - p) < 3 * sigma


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_r_precision_monotone(seed):
    rng = np.random.default_rng(seed)
    r = r_precision(rng.normal(size=(70, 3)), rng.normal(size=(70, 3)), 3, 32, rng)
    assert r[0] <= r[1] <= r[2]


def test_mm_dist_examples_and_oracle(rng):
    M = rng.normal(size=(20, 4))
    assert mm_dist(M, M) == 0.0
    assert abs(mm_dist(M, M + 1.0) - 2.0) < 1e-12
    T = rng.normal(size=(20, 4))
    naive = sum(dist(a, b) for a, b in zip(M.tolist(), T.tolist())) / 20
    assert abs(mm_dist(M, T) - naive) < 1e-12


def test_diversity_examples_and_oracle():
    F = np.ones((64, 5))
    assert diversity(F, 10) == 0.0
    rng = make_rng(0, "div")
    F = rng.normal(size=(64, 5))
    got = diversity(F, 30, make_rng(1, "div"))
    idx = make_rng(1, "div").choice(64, size=60, replace=False).tolist()
    naive = sum(dist(F[idx[i]], F[idx[30 + i]]) for i in range(30)) / 30
    assert abs(got - naive) < 1e-12
    assert len(set(idx)) == 60
    with pytest.raises(ValueError):
        diversity(F, 33)


def test_mmodality_examples_and_oracle():
    same = [np.tile(np.arange(4.0), (30, 1)) for _ in range(3)]
    assert mmodality(same) == 0.0
    rng = make_rng(0, "mm")
    per_text = [rng.normal(size=(30, 4)) for _ in range(2)]
    got = mmodality(per_text, 10, make_rng(5, "mm"))
    r = make_rng(5, "mm")
    scores = []
    for feats in per_text:
        a = r.choice(30, size=10, replace=False)
        b = r.choice(30, size=10, replace=False)
        scores.append(sum(dist(feats[i], feats[j]) for i, j in zip(a, b)) / 10)
    assert abs(got - sum(scores) / 2) < 1e-12
    with pytest.raises(ValueError):
        mmodality([rng.normal(size=(9, 4))], 10)


def test_mean_ci_properties():
    with pytest.raises(ValueError):
        mean_ci([1.0])
    vals = make_rng(0, "ci").normal(size=40).tolist()
    assert mean_ci(vals) == mean_ci(list(reversed(vals))) == mean_ci(sorted(vals))
    m, h = mean_ci([1.0, 3.0])
    assert m == 2.0 and abs(h - 1.96 * math.sqrt(2.0 / 2)) < 1e-12
    narrow = wide = 0
    for seed in range(20):
        v = make_rng(seed, "ci-shrink").normal(size=40)
        narrow += mean_ci(v)[1]
        wide += mean_ci(v[:10])[1]
    assert narrow < wide


# ---------------------------------------------------------------- extractors and protocol

@pytest.fixture(scope="module")
def small_corpus():
    return generate_corpus(7, 300)


@pytest.fixture(scope="module")
def extractors(small_corpus):
    cfg = ExtractorConfig(steps=150, batch_size=32)
    return train_extractors(by_split(small_corpus, "train"), by_split(small_corpus, "val"), cfg)


def test_extractor_contract(small_corpus, extractors):
    pair, report = extractors
    test = by_split(small_corpus, "test")
    M = pair.encode_motions([p.motion for p in test])
    T = pair.encode_texts([p.text for p in test])
    assert M.shape == (len(test), 32) and T.shape == (len(test), 32)
    assert report.matched_distance < report.mismatched_distance
    shuffled = T[make_rng(0, "shuffle").permutation(len(T))]
    assert mm_dist(M, T) < mm_dist(M, shuffled)
    r3 = np.mean([r_precision(M, T, 3, 32, make_rng(s, "r3"))[2] for s in range(10)])
    print(f"extractor R@3 on held-out pairs: {r3:.3f}")
    assert r3 > 3 / 32


def test_extractor_determinism_and_checkpoint(small_corpus, extractors, tmp_path):
    train = by_split(small_corpus, "train")
    cfg = ExtractorConfig(steps=5, batch_size=16, feature_dim=12)
    a, _ = train_extractors(train, None, cfg)
    b, _ = train_extractors(train, None, cfg)
    assert all(np.array_equal(a.state()[k], b.state()[k]) for k in a.state())
    assert a.encode_texts([train[0].text]).shape == (1, 12)
    pair, _ = extractors
    pair.save(tmp_path / "ext.ckpt")
    again = FeatureExtractorPair.load(tmp_path / "ext.ckpt")
    poses = [p.motion for p in train[:5]]
    assert np.array_equal(pair.encode_motions(poses), again.encode_motions(poses))
    with pytest.raises(ValueError):
        ExtractorConfig(margin=0)


def test_feature_dump_round_trip(tmp_path, rng):
    feats = {"real": rng.normal(size=(10, 4)), "text": rng.normal(size=(10, 4))}
    dump_features(tmp_path / "f.ckpt", feats, {"split": "test"})
    back = load_features(tmp_path / "f.ckpt")
    assert all(np.array_equal(back[k], v) for k, v in feats.items())


def test_evaluate_model_modes(small_corpus, extractors, tmp_path):
    pair, _ = extractors
    test = by_split(small_corpus, "test")
    vqs = PartVQVAESet(VqConfig(width=8, codebook_size=8, code_dim=4, root_code_dim=4))
    model = BiPartTransformer(T2MConfig(codebook_size=8, dim=16, n_heads=2, coord_hidden=16, ff_mult=2))
    protocol = EvalProtocol(repetitions=2, mm_repetitions=2, s_dis=10, mm_texts=2, mm_generations=10)
    with pytest.raises(ValueError):
        evaluate_model(model, vqs, pair, test, protocol, mode="dream")
    with pytest.raises(ValueError):
        evaluate_model(model, vqs, pair, test[:20], protocol, mode="real")
    with pytest.raises(ValueError):
        EvalProtocol(repetitions=1)
    real = evaluate_model(None, None, pair, test, protocol, mode="real")
    assert real.mean("fid") < 1e-6 and "mmodality" not in real.metrics
    recon = evaluate_model(None, vqs, pair, test, protocol, mode="reconstruction")
    gen = evaluate_model(model, vqs, pair, test, protocol, mode="generation",
                         generation=GenerationConfig(sampler=SamplerConfig(seed=3)))
    assert set(gen.metrics) == {"fid", "r_precision_top1", "r_precision_top2", "r_precision_top3", "mm_dist",
                                "diversity", "mmodality"}
    assert gen.repetitions == 2 and gen.mm_repetitions == 2 and not gen.nonfinite()
    assert len(gen.per_repetition["fid"]) == 2
    for report in (real, recon, gen):
        r = report.metrics
        assert r["r_precision_top1"]["mean"] <= r["r_precision_top2"]["mean"] <= r["r_precision_top3"]["mean"]
    gen.save(tmp_path / "gen.json")
    assert EvalReport.load(tmp_path / "gen.json") == gen
    again = evaluate_model(model, vqs, pair, test, protocol, mode="generation",
                           generation=GenerationConfig(sampler=SamplerConfig(seed=3)))
    assert again.to_json() == gen.to_json()
