import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipo.autodiff import NonFiniteError, Tensor, make_rng, mse
from bipo.motion import PART_DIMS, PART_NAMES, PartMotion, generate_corpus
from bipo.vq import (Codebook, PartVQVAE, PartVQVAESet, VqConfig, codebook_stats, lookup, nearest_codes,
                     perplexity, quantize, reconstruction_mse, train_part)

SMALL = VqConfig(width=16, codebook_size=16, code_dim=8, root_code_dim=4, steps=5, eval_every=5)


@pytest.fixture
def model():
    return PartVQVAE("L.Arm", SMALL, make_rng(0, "test"))


def frames(rng, n, part="L.Arm"):
    return rng.normal(size=(n, PART_DIMS[part]))


# -- encode / decode lengths ------------------------------------------------

@pytest.mark.parametrize("n,expected", [(64, 16), (16, 4), (18, 5), (1, 1), (4, 1)])
def test_latent_count(model, rng, n, expected):
    assert model.encode(frames(rng, n)).shape == (expected, SMALL.code_dim)


def test_doubling_length_doubles_latents(model, rng):
    for n in (8, 12, 20):
        assert len(model.encode(frames(rng, 2 * n))) == 2 * len(model.encode(frames(rng, n)))


def test_empty_motion_rejected(model):
    with pytest.raises(ValueError):
        model.encode(np.zeros((0, PART_DIMS["L.Arm"])))


def test_decode_length_and_trim(model, rng):
    a = frames(rng, 18)
    tokens = model.tokenize(a)
    assert len(model.decode(tokens)) == 4 * len(tokens) == 20
    assert len(model.decode(tokens, n_frames=18)) == 18


def test_decode_out_of_range(model):
    with pytest.raises(ValueError, match="outside codebook"):
        model.decode([0, 3, SMALL.codebook_size])
    with pytest.raises(ValueError):
        model.decode([-1])


def test_constant_tokens_give_repetitive_interior(model):
    out = model.decode(np.full(16, 5)).frames
    # every decoder conv has kernel <= 3, so boundary effects stay within a few frames of each end
    interior = out[16:48]
    assert np.allclose(interior, interior[0], atol=1e-12)


# -- quantizer --------------------------------------------------------------

def test_exact_codeword_maps_to_itself():
    cb = Codebook(8, 3, np.random.default_rng(1))
    z = Tensor(cb.entries.data[[5, 2]][None])
    q = quantize(z, cb)
    assert q.tokens.tolist() == [[5, 2]]
    assert q.vq_loss.item() == 0.0 and q.commit_loss.item() == 0.0
    assert np.array_equal(q.quantized.data, z.data)


def test_tie_breaks_to_lowest_index():
    cb = Codebook(3, 2)
    cb.entries.data = np.array([[5.0, 5.0], [1.0, 0.0], [-1.0, 0.0]])
    assert nearest_codes(np.zeros((1, 2)), cb.entries.data).tolist() == [1]
    cb.entries.data = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]])
    assert nearest_codes(np.zeros((1, 2)), cb.entries.data).tolist() == [0]


def test_nearest_matches_brute_force_scan(rng):
    entries = rng.normal(size=(32, 6))
    latents = rng.normal(size=(4, 25, 6))
    got = nearest_codes(latents, entries)
    for b in range(4):
        for t in range(25):
            best, best_d = -1, np.inf
            for k in range(32):
                d = sum((latents[b, t, i] - entries[k, i]) ** 2 for i in range(6))
                if d < best_d:
                    best, best_d = k, d
            assert got[b, t] == best


def test_dim_mismatch():
    with pytest.raises(ValueError):
        nearest_codes(np.zeros((3, 4)), np.zeros((8, 5)))


def test_straight_through_equals_identity_graph(model, rng):
    x = frames(rng, 16)[None]
    target = rng.normal(size=(1, 16, PART_DIMS["L.Arm"]))

    # graph 1: encoder -> quantize (straight-through) -> decoder
    model.zero_grad()
    z = model.encode_batch(x)
    q = quantize(z, model.codebook)
    mse(model.decode_latents(q.quantized), target).backward()
    enc_grads = {n: p.grad.copy() for n, p in model.encoder.named_parameters()}
    dec_grads = {n: p.grad.copy() for n, p in model.decoder.named_parameters()}

    # graph 2: the chosen codewords fed to the decoder as a free leaf; its gradient is then
    # pushed through the encoder with the quantizer treated as the identity map
    model.zero_grad()
    leaf = Tensor(model.codebook.entries.data[q.tokens], requires_grad=True)
    mse(model.decode_latents(leaf), target).backward()
    z2 = model.encode_batch(x)
    z2.backward(leaf.grad)
    for n, p in model.encoder.named_parameters():
        assert np.allclose(p.grad, enc_grads[n], rtol=0, atol=1e-12), n
    for n, p in model.decoder.named_parameters():
        assert np.allclose(p.grad, dec_grads[n], rtol=0, atol=1e-12), n


def test_codebook_only_trained_by_vq_loss(model, rng):
    z = model.encode_batch(frames(rng, 16)[None])
    q = quantize(z, model.codebook)
    model.zero_grad()
    (q.quantized * q.quantized).sum().backward()
    assert model.codebook.entries.grad is None
    q = quantize(model.encode_batch(frames(rng, 16)[None]), model.codebook)
    q.vq_loss.backward()
    assert np.abs(model.codebook.entries.grad).sum() > 0


def test_quantize_idempotent(model, rng):
    q = quantize(model.encode_batch(frames(rng, 32)[None]), model.codebook)
    again = quantize(lookup(q.tokens, model.codebook), model.codebook)
    assert np.array_equal(again.tokens, q.tokens)
    assert again.commit_loss.item() == 0.0


# -- codebook statistics ----------------------------------------------------

def test_perplexity_uniform_and_single():
    assert perplexity(np.full(64, 7)) == pytest.approx(64.0, rel=1e-12)
    one = np.zeros(64)
    one[3] = 100
    assert perplexity(one) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=80).filter(lambda c: sum(c) > 0))
def test_perplexity_bounded_by_size(counts):
    p = perplexity(np.array(counts))
    assert 1.0 - 1e-9 <= p <= len(counts) + 1e-9


def test_usage_sums_to_latent_count(model, rng):
    model.set_normalizer(frames(rng, 100))
    seqs = [frames(rng, n) for n in (16, 20, 17, 64)]
    model.codebook.reset_usage()
    reconstruction_mse(model, seqs, track_usage=True)
    stats = codebook_stats(model.codebook)
    assert stats["total"] == sum(int(np.ceil(len(s) / 4)) for s in seqs)
    assert sum(stats["usage"]) == stats["total"]


# -- config, training, persistence -----------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        VqConfig(downsample=3)
    with pytest.raises(ValueError):
        VqConfig(beta=-1.0)
    VqConfig(downsample=1, window=5)
    assert VqConfig().code_dim_for("Root") == 16 and VqConfig().code_dim_for("R.Arm") == 32


def test_training_aborts_on_nan(rng):
    model = PartVQVAE("Root", SMALL, make_rng(0, "nan"))
    seqs = [frames(rng, 16, "Root") for _ in range(4)]
    seqs[0][3, 2] = np.nan
    seqs = seqs * 8
    with pytest.raises(NonFiniteError):
        train_part(model, seqs, seqs[:2], SMALL, np.random.default_rng(0), steps=20)


def test_checkpoint_round_trip(tmp_path):
    corpus = generate_corpus(5, 100)
    vqs = PartVQVAESet(SMALL)
    for p in PART_NAMES:
        vqs[p].set_normalizer(np.random.default_rng(0).normal(size=(50, PART_DIMS[p])))
    vqs.save(tmp_path / "vq.ckpt")
    back = PartVQVAESet.load(tmp_path / "vq.ckpt")
    pose = corpus[0].motion
    for a, b in zip(vqs.tokenize(pose), back.tokenize(pose)):
        assert np.array_equal(a, b)
    assert np.array_equal(vqs.reconstruct(pose).frames, back.reconstruct(pose).frames)
    assert len(vqs.reconstruct(pose)) == len(pose)


def test_part_motion_api(model, rng):
    pm = PartMotion("L.Arm", frames(rng, 12))
    assert model.tokenize(pm).shape == (3,)
    assert model.decode(model.tokenize(pm)).part == "L.Arm"
