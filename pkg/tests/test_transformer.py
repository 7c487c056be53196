"""Masks, occlusion, coordination, the part transformer and its hybrid objective."""

import csv
import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bipo.autodiff import Tensor, make_rng, no_grad
from bipo.motion import N_PARTS
from bipo.transformer import (BiPartTransformer, CoordinationLayer, HybridLossConfig, T2MConfig, TokenExample,
                              build_bp_mask, build_causal_mask, hybrid_loss, masked_count, next_token_accuracy,
                              padded_mask, sample_bp_unmask_set, sample_masks, sample_po_mask)
from bipo.transformer.train import (CURVE_FIELDS, T2MTrainConfig, load_model, save_model, smoothed_decreasing,
                                    train_t2m)
from gradcheck import check_grads

TINY = dict(codebook_size=8, max_tokens=6, n_layers=2, dim=16, n_heads=2, ff_mult=2, coord_hidden=16)
WORDS = ("a", "person", "walks", "forward", "jumps", "slowly", "quickly", "man", "waves")


def tiny(**kw) -> T2MConfig:
    return T2MConfig(**{**TINY, **kw})


def brute_allowed(L, U, q, k):
    return (q >= k and q not in U) or k in U


def random_tokens(cfg, B, L, rng):
    seq = rng.integers(0, cfg.codebook_size, size=(N_PARTS, B, L + 2))
    seq[:, :, 0] = cfg.pad_id
    seq[:, :, L + 1] = cfg.end_id
    return seq


def texts_for(B, rng):
    return [tuple(rng.choice(WORDS, size=5)) for _ in range(B)]


# ---------------------------------------------------------------- masks

def test_bp_mask_matches_brute_force_exhaustive():
    for L in range(0, 7):
        idx = range(L + 2)
        for r in range(L + 3):
            for U in itertools.combinations(idx, r):
                m = build_bp_mask(L, U)
                oracle = np.array([[brute_allowed(L, set(U), q, k) for k in idx] for q in idx])
                assert np.array_equal(m.allowed, oracle), (L, U)
                assert m.additive[0, 0] == 0.0


def test_causal_equals_empty_unmask_set():
    for L in range(9):
        assert build_causal_mask(L) == build_bp_mask(L, ())
    assert build_causal_mask(3).additive[0, 1] == -np.inf
    q, k = np.indices((3, 3))
    assert np.array_equal(build_causal_mask(1).allowed, q >= k)


def test_documented_example_L3():
    m = build_bp_mask(3, {0, 2, 4}).allowed
    assert set(np.flatnonzero(m[1])) == {0, 1, 2, 4}
    assert m[3].all()


@given(st.integers(0, 10), st.data())
@settings(max_examples=60, deadline=None)
def test_unmasked_columns_open_and_rows_closed(L, data):
    U = data.draw(st.sets(st.integers(0, L + 1)))
    m = build_bp_mask(L, U).allowed
    for k in U:
        assert m[:, k].all()
    for q in U:
        assert set(np.flatnonzero(m[q])) == U


def test_mask_errors_and_values():
    with pytest.raises(ValueError):
        build_bp_mask(3, {5})
    with pytest.raises(ValueError):
        build_bp_mask(3, {-1})
    vals = np.unique(build_bp_mask(5, {1, 3}).additive)
    assert set(vals.tolist()) <= {0.0, -np.inf}


def test_strict_variant_blocks_masked_to_masked():
    m = build_bp_mask(4, {0, 2, 5}, strict=True).allowed
    assert not m[3, 1]                       # masked query, earlier masked key
    assert m[3, 3] and m[3, 2] and m[3, 0]
    assert build_bp_mask(4, {0, 2, 5}).allowed[3, 1]


def test_padded_mask_layout():
    p = padded_mask(build_causal_mask(2), 6)
    assert np.array_equal(p[:4, :4], build_causal_mask(2).additive)
    assert np.all(p[:4, 4:] == -np.inf)
    assert p[4, 4] == 0.0 and p[4, 3] == -np.inf


# ---------------------------------------------------------------- unmask sets and occlusion

def test_masked_count_arithmetic():
    assert masked_count(10, 0.5) == 5
    assert masked_count(10, 0.3) == 3
    assert masked_count(7, 0.5) == 4
    assert masked_count(7, 1.0) == 7


def test_unmask_set_examples(rng):
    assert sample_bp_unmask_set(9, rng=rng, rho=1.0) == frozenset({0, 10})
    U = sample_bp_unmask_set(10, rng=rng, rho=0.5)
    assert {0, 11} <= U and len(U & set(range(1, 11))) == 5


def test_unmask_set_mean_masked_fraction():
    rng = make_rng(0, "rho")
    L = 64
    frac = [1 - (len(sample_bp_unmask_set(L, (0.5, 1.0), rng)) - 2) / L for _ in range(10_000)]
    assert 0.73 <= np.mean(frac) <= 0.77


def test_po_mask_degenerate_and_rate():
    rng = make_rng(0, "po")
    assert not sample_po_mask(6, 5, 0.0, rng).any()
    full = sample_po_mask(6, 5, 1.0, rng)
    off = ~np.eye(6, dtype=bool)
    assert full[off].all() and not full[~off].any()
    draws = sample_po_mask(6, 3334, 0.4, rng)[off]          # 30 * 3334 = 100020 Bernoulli draws
    assert abs(draws.mean() - 0.4) < 0.01
    with pytest.raises(ValueError):
        sample_po_mask(6, 3, 1.5, rng)


# ---------------------------------------------------------------- model structure

def test_config_defaults_and_errors():
    cfg = T2MConfig()
    assert (cfg.n_layers, cfg.dim, cfg.codebook_size, cfg.lam, cfg.po_prob) == (2, 64, 64, 0.5, 0.4)
    assert (cfg.rho_lo, cfg.rho_hi) == (0.5, 1.0)
    assert (cfg.end_id, cfg.mask_id, cfg.pad_id, cfg.output_vocab) == (64, 65, 66, 65)
    for bad in (dict(lam=1.5), dict(rho_lo=0.8, rho_hi=0.6), dict(po_prob=-0.1), dict(dim=10, n_heads=4)):
        with pytest.raises(ValueError):
            T2MConfig(**bad)
    assert T2MConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_layer_counts_and_logit_shape(rng):
    cfg = tiny(n_layers=3)
    model = BiPartTransformer(cfg, rng)
    assert len(model.blocks) == 3 and len(model.coords) == 2
    assert len(BiPartTransformer(tiny(coordination=False), rng).coords) == 0
    seq = random_tokens(cfg, 2, 4, rng)
    masks = np.stack([build_causal_mask(4).additive] * 2)
    out = model(seq, model.encode_text(texts_for(2, rng)), masks)
    assert out.shape == (6, 2, 6, cfg.codebook_size + 1)
    with pytest.raises(ValueError):
        model(seq, model.encode_text(texts_for(2, rng)), masks[:, :5, :5])
    with pytest.raises(ValueError):
        model(seq[:5], model.encode_text(texts_for(2, rng)), masks)


def test_text_encoder_contract(rng):
    model = BiPartTransformer(tiny(), rng)
    a = model.encode_text([("a", "man", "walks", "forward", "slowly")] * 2).data
    assert a.shape == (2, 16)
    assert np.array_equal(a[0], a[1])
    with pytest.raises(ValueError, match="unknown token"):
        model.encode_text([("a", "zebra", "walks", "forward", "slowly")])
    with pytest.raises(ValueError):
        model.encode_text([()])
    external = rng.normal(size=(3, 16))
    assert np.array_equal(model.encode_text(external).data, external)
    with pytest.raises(ValueError, match="precomputed"):
        model.encode_text(rng.normal(size=(3, 12)))


# ---------------------------------------------------------------- causality and occlusion

def test_causal_logits_ignore_future_tokens():
    worst = 0.0
    for case in range(100):
        rng = make_rng(case, "causality")
        cfg = tiny(seed=case, coordination=bool(case % 2 == 0))
        model = BiPartTransformer(cfg, rng)
        L = int(rng.integers(2, 7))
        seq = random_tokens(cfg, 1, L, rng)
        c0 = model.encode_text(texts_for(1, rng))
        mask = build_causal_mask(L).additive[None]
        occ = sample_po_mask(6, L + 2, 0.4, rng, batch=1) if case % 3 == 0 else None
        t = int(rng.integers(0, L + 1))
        other = seq.copy()
        other[:, :, t + 1:] = rng.integers(0, cfg.input_vocab, size=other[:, :, t + 1:].shape)
        with no_grad():
            a = model(seq, c0, mask, occ).data
            b = model(other, c0, mask, occ).data
        worst = max(worst, np.abs(a[:, :, :t + 1] - b[:, :, :t + 1]).max())
    assert worst < 1e-9


def test_bp_mask_forbidden_keys_have_no_influence():
    for case in range(30):
        rng = make_rng(case, "bp-fuzz")
        cfg = tiny(seed=case)
        model = BiPartTransformer(cfg, rng)
        L = int(rng.integers(2, 7))
        U = sample_bp_unmask_set(L, (0.3, 0.9), rng)
        seq = random_tokens(cfg, 1, L, rng)
        c0 = model.encode_text(texts_for(1, rng))
        mask = build_bp_mask(L, U).additive[None]
        masked = [k for k in range(1, L + 1) if k not in U]
        if not masked:
            continue
        k = int(rng.choice(masked))
        other = seq.copy()
        other[:, 0, k] = (seq[:, 0, k] + 1) % cfg.codebook_size
        with no_grad():
            a = model(seq, c0, mask).data[:, 0]
            b = model(other, c0, mask).data[:, 0]
        diff = np.abs(a - b).max(axis=(0, 2))
        allowed = build_bp_mask(L, U).allowed
        for q in range(L + 2):
            if not allowed[q, k]:
                assert diff[q] < 1e-9, (case, q, k)
        assert diff[k] > 1e-12          # a query always sees itself when masked


def test_po_occluded_sources_do_not_reach_observer():
    """Observer i fully blind to source j: perturbing j's tokens leaves i's logits unchanged."""
    rng0 = make_rng(0, "po-rate")
    draws = sample_po_mask(6, 10, 0.4, rng0, batch=1667)[:, ~np.eye(6, dtype=bool)]
    assert abs(draws.mean() - 0.4) < 0.01
    worst = 0.0
    for case in range(100):
        rng = make_rng(case, "po-independence")
        cfg = tiny(seed=case)
        model = BiPartTransformer(cfg, rng)
        L = int(rng.integers(1, 7))
        seq = random_tokens(cfg, 1, L, rng)
        c0 = model.encode_text(texts_for(1, rng))
        mask = build_causal_mask(L).additive[None] if case % 2 else build_bp_mask(
            L, sample_bp_unmask_set(L, (0.5, 1.0), rng)).additive[None]
        i, j = rng.choice(6, size=2, replace=False)
        occ = sample_po_mask(6, L + 2, 0.4, rng, batch=1)
        occ[0, i, j, :] = True
        other = seq.copy()
        other[j, 0, 1:L + 1] = rng.integers(0, cfg.codebook_size, size=L)
        with no_grad():
            a = model(seq, c0, mask, occ).data[i]
            b = model(other, c0, mask, occ).data[i]
        worst = max(worst, np.abs(a - b).max())
    assert worst < 1e-9


def test_coordination_layer_per_position_occlusion(rng):
    cfg = tiny()
    layer = CoordinationLayer(rng, cfg)
    layer.fc3.weight.data = rng.normal(size=layer.fc3.weight.shape)
    h = rng.normal(size=(6, 2, 5, 16))
    occ = sample_po_mask(6, 5, 0.5, rng, batch=2)
    base = layer(Tensor(h), occ).data
    for _ in range(20):
        b, i, t = rng.integers(2), rng.integers(6), rng.integers(5)
        hidden = np.flatnonzero(occ[b, i, :, t])
        if len(hidden) == 0:
            continue
        h2 = h.copy()
        h2[hidden, b, t] += rng.normal(size=(len(hidden), 16))
        out = layer(Tensor(h2), occ).data
        assert np.abs(out[i, b, t] - base[i, b, t]).max() < 1e-12


def test_coordination_zero_init_and_all_occluded(rng):
    cfg = tiny()
    layer = CoordinationLayer(rng, cfg)
    h = rng.normal(size=(6, 1, 4, 16))
    out = layer(Tensor(h), None).data
    assert np.allclose(out, layer.ln(Tensor(h)).data, atol=1e-12)
    layer.fc3.weight.data = rng.normal(size=layer.fc3.weight.shape)
    occ = sample_po_mask(6, 4, 1.0, rng, batch=1)
    ref = layer(Tensor(h), occ).data
    for i in range(6):
        h2 = h.copy()
        others = [j for j in range(6) if j != i]
        h2[others] = rng.normal(size=h2[others].shape)
        assert np.abs(layer(Tensor(h2), occ).data[i] - ref[i]).max() < 1e-9


def test_same_occlusion_pattern_used_at_every_depth(rng, monkeypatch):
    cfg = tiny(n_layers=4)
    model = BiPartTransformer(cfg, rng)
    seen = []
    original = CoordinationLayer.__call__

    def spy(self, h, occ):
        seen.append(occ)
        return original(self, h, occ)

    monkeypatch.setattr(CoordinationLayer, "__call__", spy)
    occ = sample_po_mask(6, 5, 0.4, rng, batch=1)
    model(random_tokens(cfg, 1, 3, rng), model.encode_text(texts_for(1, rng)), build_causal_mask(3).additive[None],
          occ)
    assert len(seen) == 3 and all(o is occ for o in seen)


# ---------------------------------------------------------------- hybrid objective

def _examples(rng, cfg, n, lengths=(3, 4, 5)):
    return [TokenExample(texts_for(1, rng)[0], rng.integers(0, cfg.codebook_size, size=(6, int(rng.choice(lengths)))))
            for _ in range(n)]


def test_hybrid_loss_decomposition(rng):
    cfg = tiny()
    model = BiPartTransformer(cfg, rng)
    ex = _examples(rng, cfg, 4)
    masks = sample_masks(ex, HybridLossConfig(), rng)
    parts = {lam: hybrid_loss(model, ex, HybridLossConfig(lam=lam), masks=masks) for lam in (0.0, 0.3, 1.0)}
    p = parts[0.3]
    assert p.total.item() == 0.3 * p.causal.item() + 0.7 * p.bidirectional.item()
    assert parts[1.0].total.item() == parts[1.0].causal.item()
    assert parts[0.0].total.item() == parts[0.0].bidirectional.item()
    mix = 0.3 * parts[1.0].total.item() + 0.7 * parts[0.0].total.item()
    assert abs(p.total.item() - mix) < 1e-12


def test_hybrid_loss_counts_only_hidden_positions(rng):
    cfg = tiny()
    model = BiPartTransformer(cfg, rng)
    ex = [TokenExample(texts_for(1, rng)[0], rng.integers(0, 8, size=(6, 5)))]
    masks = sample_masks(ex, HybridLossConfig(), rng)
    out = hybrid_loss(model, ex, HybridLossConfig(), masks=masks)
    assert out.bp_positions == 7 - len(masks.unmask[0])
    assert out.causal_positions == 6          # text slot + 5 tokens, last target is END


def test_random_init_loss_near_log_vocab():
    cfg = T2MConfig()
    model = BiPartTransformer(cfg)
    rng = make_rng(0, "init-loss")
    ex = [TokenExample(texts_for(1, rng)[0], rng.integers(0, 64, size=(6, 12))) for _ in range(8)]
    out = hybrid_loss(model, ex, HybridLossConfig.from_model(cfg), rng)
    target = math.log(cfg.output_vocab)
    for value in (out.causal_per_position, out.bp_per_position):
        assert abs(value - target) / target < 0.05


def test_hybrid_loss_gradient_matches_finite_differences(rng):
    cfg = tiny(dim=8, n_heads=2, codebook_size=5, max_tokens=4, coord_hidden=8, activation="gelu")
    model = BiPartTransformer(cfg, rng)
    for p in model.parameters():
        p.data += 0.1 * rng.normal(size=p.shape)
    ex = _examples(rng, cfg, 2, lengths=(2, 3))
    loss_cfg = HybridLossConfig(lam=0.4)
    masks = sample_masks(ex, loss_cfg, rng)
    targets = [model.head.weight, model.tok_emb, model.coords[0].fc1.weight, model.coords[0].occlusion,
               model.blocks[0].qkv.weight, model.text.embed, model.pos_emb]
    err = check_grads(lambda: hybrid_loss(model, ex, loss_cfg, masks=masks).total, targets)
    assert err < 1e-4


# ---------------------------------------------------------------- training

def _two_template_examples(n: int) -> list[TokenExample]:
    """Token sequences for two caption families with fixed per-part token patterns and lengths."""
    base = {
        ("a", "person", "walks", "forward", "slowly"): np.array([[1, 2, 3, 4, 1, 2]] * 6) + np.arange(6)[:, None] % 2,
        ("a", "man", "jumps", "quickly", "forward"): np.array([[7, 6, 5, 7, 6, 5]] * 6) - np.arange(6)[:, None] % 3,
    }
    keys = list(base)
    out = []
    for i in range(n):
        text = keys[i % 2]
        L = 5 + i % 2
        out.append(TokenExample(text, base[text][:, :L].copy(), template=str(i % 2)))
    return out


def test_overfit_two_templates_and_artifacts(tmp_path):
    train = _two_template_examples(64)
    cfg = T2MConfig(codebook_size=8, max_tokens=6, dim=32, n_heads=4, coord_hidden=32, ff_mult=2)
    tcfg = T2MTrainConfig(steps=500, batch_size=16, lr=3e-3, warmup=20, eval_every=50)
    result = train_t2m(train, train[:16], cfg, tcfg, out_dir=tmp_path)
    acc = next_token_accuracy(result.model, train)
    print(f"two-template next-token accuracy {acc:.3f}")
    assert acc > 0.9
    e = result.model.encode_text([train[0].text, train[1].text]).data
    assert np.abs(e[0] - e[1]).max() > 1e-6
    with open(tmp_path / "t2m_curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == CURVE_FIELDS and len(rows) == 500
    val = [float(r["val_hybrid"]) for r in rows if r["val_hybrid"]]
    assert len(val) == 10 and val[-1] < val[0]
    meta = json.loads((tmp_path / "t2m_config.json").read_text())
    assert meta["model"]["lam"] == 0.5 and meta["train"]["steps"] == 500
    reloaded = load_model(tmp_path / "t2m.ckpt")
    assert next_token_accuracy(reloaded, train) == acc


def test_checkpoint_round_trip(tmp_path, rng):
    cfg = tiny()
    model = BiPartTransformer(cfg, rng)
    save_model(model, tmp_path / "m.ckpt")
    again = load_model(tmp_path / "m.ckpt")
    seq = random_tokens(cfg, 2, 3, rng)
    texts = texts_for(2, rng)
    masks = np.stack([build_causal_mask(3).additive] * 2)
    with no_grad():
        assert np.array_equal(model(seq, model.encode_text(texts), masks).data,
                              again(seq, again.encode_text(texts), masks).data)


def test_smoothed_decreasing():
    assert smoothed_decreasing([5, 4, 4.2, 3, 2.5, 2.6, 2.0])
    assert not smoothed_decreasing([1, 2, 3, 4, 5])
