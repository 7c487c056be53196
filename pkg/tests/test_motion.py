import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bipo.motion import (FEATURE_DIM, LAYOUT, PART_COLUMNS, PART_DIMS, PART_NAMES, CorpusConfig, MotionFileError,
                         PartMotion, PoseError, PoseSequence, TextMotionPair, by_split, compute_pose_features,
                         describe_parts, export_motion, generate_corpus, import_motion, merge_parts, mirror_pair,
                         mirror_pose, mirror_positions, recover_positions, split_counts, split_parts,
                         velocity_consistency_error)
from bipo.motion.corpus import TEMPLATE_BY_NAME, synthesize
from bipo.motion.features import jp_cols, jr_cols, jv_cols
from bipo.motion.parts import PART_JOINTS
from bipo.motion.skeleton import N_JOINTS, rest_positions


def random_pose(rng, n=6):
    f = rng.normal(size=(n, FEATURE_DIM))
    f[:, 259:263] = rng.integers(0, 2, size=(n, 4))
    return PoseSequence(f)


@pytest.fixture(scope="module")
def small_corpus():
    return generate_corpus(7, 120)


# -- feature layout ---------------------------------------------------------

def test_block_widths_sum_to_263():
    widths = [b - a for a, b in LAYOUT.values()]
    assert widths == [1, 2, 1, 63, 66, 126, 4]
    assert sum(widths) == 263


def test_static_skeleton_features():
    pos = np.repeat(rest_positions()[None], 5, axis=0)
    f = compute_pose_features(pos).frames
    assert f.shape == (4, 263)
    assert np.all(f[:, 0:3] == 0.0)
    assert np.all(f[:, 67:133] == 0.0)
    assert np.all(f[:, 259:263] == 1.0)


def test_uniform_root_translation_constant_velocity():
    # rest pose facing +Z, translated by (vx, 0, vz) per frame -> (r_x, r_z) = (vx, vz)
    v = np.array([0.03, 0.0, 0.05])
    pos = rest_positions()[None] + np.arange(6)[:, None, None] * v
    f = compute_pose_features(pos).frames
    assert np.allclose(f[:, 1], 0.03, atol=1e-14)
    assert np.allclose(f[:, 2], 0.05, atol=1e-14)
    assert np.allclose(f[:, 0], 0.0, atol=1e-14)


def test_needs_two_frames():
    with pytest.raises(PoseError):
        compute_pose_features(rest_positions()[None])


def test_pose_sequence_rejects_bad_width_and_contacts():
    with pytest.raises(PoseError):
        PoseSequence(np.zeros((3, 262)))
    f = np.zeros((3, 263))
    f[0, 260] = 1.5
    with pytest.raises(PoseError):
        PoseSequence(f)


def test_recover_positions_matches_source():
    pose = synthesize(TEMPLATE_BY_NAME["walk_circle"], "left", 24, 1.0, 1.0, 0.3)
    assert velocity_consistency_error(pose) < 1e-9
    # re-featurizing recovered positions is a fixed point of the position blocks
    rec = recover_positions(pose)
    again = compute_pose_features(rec).frames
    assert np.allclose(again[:, 4:67], pose.frames[:-1, 4:67], atol=1e-9)
    assert np.allclose(again[:, 0:4], pose.frames[:-1, 0:4], atol=1e-9)


# -- parts ------------------------------------------------------------------

def test_part_dims():
    assert PART_DIMS == {"Root": 7, "R.Leg": 50, "L.Leg": 50, "R.Arm": 60, "L.Arm": 60, "Backbone": 60}


def test_every_column_claimed():
    claims = np.zeros(FEATURE_DIM, int)
    for n in PART_NAMES:
        cols = PART_COLUMNS[n]
        assert len(set(cols.tolist())) == len(cols)  # injective per part
        claims[cols] += 1
    assert np.all(claims >= 1)
    shared = set(jp_cols(9) + jv_cols(9) + jr_cols(9))
    for c in range(FEATURE_DIM):
        assert claims[c] == (3 if c in shared else 1)


def test_joint_nine_in_arms_and_backbone():
    for c in jp_cols(9) + jv_cols(9) + jr_cols(9):
        owners = [n for n in PART_NAMES if c in PART_COLUMNS[n]]
        assert owners == ["R.Arm", "L.Arm", "Backbone"]
    assert all(9 in PART_JOINTS[n] for n in ("R.Arm", "L.Arm", "Backbone"))


def test_merge_averages_joint_nine(rng):
    pose = random_pose(rng)
    parts = split_parts(pose)
    col = jp_cols(9)[1]
    vals = {}
    new_parts = []
    for p, v in zip(parts, (None, None, None, 1.0, 2.5, -0.7)):
        f = p.frames.copy()
        if v is not None:
            f[:, list(p.provenance).index(col)] = v
            vals[p.part] = v
        new_parts.append(PartMotion(p.part, f))
    merged = merge_parts(new_parts).frames[:, col]
    assert np.allclose(merged, (1.0 + 2.5 - 0.7) / 3, atol=1e-15)


def test_merge_linearity_delta_over_three(rng):
    pose = random_pose(rng)
    parts = split_parts(pose)
    col = jv_cols(9)[0]
    delta = 0.3
    for k in (3, 4, 5):
        f = parts[k].frames.copy()
        f[:, list(parts[k].provenance).index(col)] += delta
        moved = list(parts)
        moved[k] = PartMotion(parts[k].part, f)
        diff = merge_parts(moved).frames[:, col] - pose.frames[:, col]
        assert np.allclose(diff, delta / 3, atol=1e-14)


def test_merge_length_mismatch(rng):
    parts = split_parts(random_pose(rng))
    parts[2] = PartMotion(parts[2].part, parts[2].frames[:-1])
    with pytest.raises(ValueError):
        merge_parts(parts)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, FEATURE_DIM), elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_split_merge_round_trip_exact(frames):
    frames[:, 259:263] = np.clip(np.abs(frames[:, 259:263]), 0, 1)
    pose = PoseSequence(frames)
    assert np.array_equal(merge_parts(split_parts(pose)).frames, pose.frames)


def test_describe_parts_tables():
    d = describe_parts()
    assert [p["name"] for p in d["parts"]] == list(PART_NAMES)
    assert sum(p["dim"] for p in d["parts"]) == 263 + 24
    json.dumps(d)


# -- mirroring --------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, FEATURE_DIM), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_mirror_involution_bit_exact(frames):
    frames[:, 259:263] = np.clip(np.abs(frames[:, 259:263]), 0, 1)
    pose = PoseSequence(frames)
    assert np.array_equal(mirror_pose(mirror_pose(pose)).frames, pose.frames)


def test_mirror_matches_reflected_skeleton(rng):
    # hand-built 3-position-frame clip (two feature frames) with lateral motion and a turn
    base = rest_positions()
    pos = np.stack([base, base + [0.04, 0.01, 0.02], base + [0.09, 0.0, 0.05]])
    pos[1, 18:22] += rng.normal(scale=0.05, size=(4, 3))
    pos[2, 4:9] += rng.normal(scale=0.05, size=(5, 3))
    c, s = np.cos(0.2), np.sin(0.2)
    turn = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    pos[2] = (pos[2] - pos[2, 0]) @ turn.T + pos[2, 0]
    f = compute_pose_features(pos)
    fm = compute_pose_features(mirror_positions(pos))
    assert np.allclose(mirror_pose(f).frames, fm.frames, atol=1e-12)
    assert np.allclose(fm.frames[:, 1], -f.frames[:, 1], atol=1e-12)  # lateral velocity negated
    assert np.array_equal(fm.frames[:, 2], f.frames[:, 2]) or np.allclose(fm.frames[:, 2], f.frames[:, 2], atol=1e-15)
    assert np.allclose(fm.frames[:, 3], f.frames[:, 3], atol=0)


def test_mirror_pair_text_and_involution(small_corpus):
    src = small_corpus[0]
    pair = TextMotionPair(1, tuple("a man kicks something or someone with his left leg".split()), src.motion,
                          "kick_left", "train")
    m = mirror_pair(pair)
    assert m.caption == "a man kicks something or someone with his right leg"
    assert m.template == "kick_right"
    back = mirror_pair(m)
    assert back.text == pair.text and back.motion == pair.motion and back.template == pair.template


def test_sided_templates_mirror_each_other():
    tpl = TEMPLATE_BY_NAME["wave"]
    left = synthesize(tpl, "left", 24, 1.0, 1.1, 0.4)
    right = synthesize(tpl, "right", 24, 1.0, 1.1, 0.4)
    assert np.allclose(mirror_pose(left).frames, right.frames, atol=1e-12)


# -- corpus -----------------------------------------------------------------

def test_corpus_deterministic():
    a = generate_corpus(3, 100)
    b = generate_corpus(3, 100)
    assert [p.caption for p in a] == [p.caption for p in b]
    assert all(np.array_equal(x.motion.frames, y.motion.frames) for x, y in zip(a, b))


def test_corpus_seed_sensitivity():
    a = generate_corpus(3, 100)
    b = generate_corpus(4, 100)
    assert any(len(x.motion) != len(y.motion) or not np.array_equal(x.motion.frames, y.motion.frames)
               for x, y in zip(a, b))


@pytest.mark.parametrize("n,expected", [(2000, (1600, 100, 300)), (100, (80, 5, 15)), (137, (110, 7, 20))])
def test_split_counts(n, expected):
    assert split_counts(n) == expected


def test_corpus_split_tags(small_corpus):
    counts = tuple(len(by_split(small_corpus, s)) for s in ("train", "val", "test"))
    assert counts == split_counts(120)


def test_corpus_invariants(small_corpus):
    for p in small_corpus:
        assert len(p.text) >= 5
        p.motion.validate_length(16, 64)
        assert velocity_consistency_error(p.motion) < 1e-9
        c = p.motion.frames[:, 259:263]
        assert np.all((c >= 0) & (c <= 1))


def test_wave_left_leaves_legs_at_rest():
    corpus = generate_corpus(11, 100, CorpusConfig(templates=["wave"]))
    waves = [p for p in corpus if p.template == "wave_left"]
    assert waves
    for p in waves:
        parts = {pm.part: pm.frames for pm in split_parts(p.motion)}
        for leg in ("R.Leg", "L.Leg"):
            assert np.max(parts[leg].var(axis=0)) < 1e-10
        assert np.max(parts["L.Arm"].var(axis=0)) > 1e-3


def test_corpus_minimum_size():
    with pytest.raises(ValueError):
        generate_corpus(0, 50)


# -- motion files -----------------------------------------------------------

def test_export_import_identity(tmp_path, small_corpus):
    pose = small_corpus[5].motion
    export_motion(pose, tmp_path / "m.json")
    back = import_motion(tmp_path / "m.json")
    assert np.array_equal(back.frames, pose.frames)
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["fps"] == 20
    assert doc["layout"]["joint_rot"] == [133, 259]
    assert [p["name"] for p in doc["parts"]] == list(PART_NAMES)


def test_import_truncated_file(tmp_path, small_corpus):
    export_motion(small_corpus[0].motion, tmp_path / "m.json")
    raw = (tmp_path / "m.json").read_text()
    (tmp_path / "t.json").write_text(raw[: len(raw) // 2])
    with pytest.raises(MotionFileError):
        import_motion(tmp_path / "t.json")
    doc = json.loads(raw)
    doc["frames"] = doc["frames"][:-3]
    (tmp_path / "s.json").write_text(json.dumps(doc))
    with pytest.raises(MotionFileError):
        import_motion(tmp_path / "s.json")


def test_part_motion_shape_check():
    with pytest.raises(ValueError):
        PartMotion("Root", np.zeros((4, 8)))
    assert N_JOINTS == 22
