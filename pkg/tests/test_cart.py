import numpy as np
import pytest

from tagwise import cart
from tagwise.cart import (
    Internal,
    Leaf,
    TrainConfig,
    TreeModel,
    deserialize,
    fingerprint,
    fit,
    gini,
    predict,
    predict_batch,
    serialize,
    training_accuracy,
)
from tagwise.errors import ConfigError, DataError, FormatError
from tagwise.features import FeatureId

from conftest import fm_from_columns, random_fm


def naive_predict(model, row):
    """Independent recursive interpreter over the tree object."""
    node = model.root
    while isinstance(node, Internal):
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.class_index


def brute_force_root_split(fm, mask, min_leaf=1):
    """Exhaustive candidate enumeration with the documented tie-break."""
    X = fm.values
    y = fm.labels
    n = len(fm)
    n_classes = len(fm.behaviours)
    best = None
    for f in sorted(mask):
        vals = sorted(set(X[:, f]))
        for lo, hi in zip(vals, vals[1:]):
            thr = (lo + hi) / 2.0
            left = [int(y[i]) for i in range(n) if X[i, f] <= thr]
            right = [int(y[i]) for i in range(n) if X[i, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue

            def g(part):
                counts = [part.count(c) for c in range(n_classes)]
                return 1.0 - sum((c / len(part)) ** 2 for c in counts)

            score = (len(left) * g(left) + len(right) * g(right)) / n
            if best is None or score < best[0] - 1e-12:
                best = (score, f, thr)
    return best


def test_gini_pure():
    assert gini((4, 0)) == 0.0


def test_gini_balanced():
    assert gini((2, 2)) == 0.5


def test_gini_1_2_3():
    assert gini((1, 2, 3)) == pytest.approx(11.0 / 18.0, abs=1e-15)


def test_gini_zero_total():
    with pytest.raises(DataError):
        gini((0, 0))
    with pytest.raises(DataError):
        gini((-1, 2))


def four_row_fm():
    return fm_from_columns({FeatureId.AX: [1.0, 2.0, 3.0, 4.0]}, [0, 0, 1, 1], ("A", "B"))


def test_four_row_hand_example():
    # candidates 1.5, 2.5, 3.5 -> weighted ginis 1/3, 0, 1/3; best is 2.5
    fm = four_row_fm()
    model = fit(fm, TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    assert isinstance(model.root, Internal)
    assert model.root.feature is FeatureId.AX
    assert model.root.threshold == 2.5
    assert isinstance(model.root.left, Leaf) and model.root.left.class_index == 0
    assert isinstance(model.root.right, Leaf) and model.root.right.class_index == 1
    assert training_accuracy(model, fm) == 1.0
    assert predict(model, {FeatureId.AX: 1.0}) == 0
    assert predict(model, {FeatureId.AX: 4.0}) == 1
    assert predict(model, {FeatureId.AX: 2.5}) == 0  # <= goes left


def test_root_split_matches_brute_force_enumeration():
    rng = np.random.default_rng(10)
    pool = np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 3.0])
    for trial in range(60):
        fm = random_fm(rng, n_rows=int(rng.integers(4, 25)), n_features=3, n_classes=3,
                       value_pool=pool)
        mask = tuple(list(FeatureId)[:3])
        expected = brute_force_root_split(fm, mask)
        model = fit(fm, TrainConfig(max_depth=1, feature_mask=mask))
        if expected is None:
            continue  # may still be a leaf if the node was pure
        if isinstance(model.root, Leaf):
            assert len(set(fm.labels)) == 1
            continue
        got = (model.root.feature, model.root.threshold)
        score, f, thr = expected
        # the chosen split must achieve the minimal score
        left = fm.values[:, got[0]] <= got[1]
        y = fm.labels

        def g(part):
            if len(part) == 0:
                return 0.0
            counts = np.bincount(part, minlength=3)
            return 1.0 - ((counts / len(part)) ** 2).sum()

        got_score = (left.sum() * g(y[left]) + (~left).sum() * g(y[~left])) / len(fm)
        assert got_score == pytest.approx(score, abs=1e-12)


def test_tie_break_lower_threshold_within_feature():
    # values 1,2,3,4 labels A,B,A,B: thresholds 1.5, 2.5, 3.5 all score 1/3;
    # the lowest threshold must win
    fm = fm_from_columns({FeatureId.AX: [1.0, 2.0, 3.0, 4.0]}, [0, 1, 0, 1], ("A", "B"))
    model = fit(fm, TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    assert model.root.threshold == 1.5


def test_tie_break_lower_feature_index():
    # identical columns on AX and AY: equal scores, AX must be chosen
    col = [1.0, 2.0, 3.0, 4.0]
    fm = fm_from_columns({FeatureId.AX: col, FeatureId.AY: col}, [0, 0, 1, 1], ("A", "B"))
    model = fit(fm, TrainConfig(max_depth=2))
    assert model.root.feature is FeatureId.AX


def test_pure_matrix_yields_single_leaf():
    fm = fm_from_columns({FeatureId.AX: [1.0, 2.0, 3.0]}, [0, 0, 0], ("A", "B"))
    for k in (1, 5, 14):
        model = fit(fm, TrainConfig(max_depth=k))
        assert isinstance(model.root, Leaf)
        assert model.root.class_index == 0
        assert model.depth() == 0


def test_depth_bound_never_exceeded():
    rng = np.random.default_rng(11)
    for trial in range(30):
        fm = random_fm(rng, n_rows=40, n_features=3, n_classes=3)
        for k in (1, 2, 3, 5):
            model = fit(fm, TrainConfig(max_depth=k))
            assert model.depth() <= k


def test_full_mask_depth14_on_bundled_preset(ea60_fm):
    model = fit(ea60_fm, TrainConfig(max_depth=14))
    assert model.depth() <= 14
    assert model.feature_mask == tuple(FeatureId)


def test_fit_deterministic():
    rng = np.random.default_rng(12)
    fm = random_fm(rng, n_rows=60, n_features=3, n_classes=3)
    cfg = TrainConfig(max_depth=6)
    assert serialize(fit(fm, cfg)) == serialize(fit(fm, cfg))


def test_training_accuracy_monotone_in_depth():
    rng = np.random.default_rng(13)
    for trial in range(20):
        fm = random_fm(rng, n_rows=50, n_features=2, n_classes=3)
        accs = [
            training_accuracy(fit(fm, TrainConfig(max_depth=k)), fm) for k in range(1, 7)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(accs, accs[1:]))


def test_perfect_separation_single_feature():
    rng = np.random.default_rng(14)
    labels = np.array([0] * 10 + [1] * 10 + [2] * 10)
    col = np.concatenate([rng.uniform(0, 1, 10), rng.uniform(2, 3, 10), rng.uniform(4, 5, 10)])
    fm = fm_from_columns({FeatureId.AY: col}, labels, ("a", "b", "c"))
    model = fit(fm, TrainConfig(max_depth=4))
    assert training_accuracy(model, fm) == 1.0


def test_oversample_equalizes_counts_without_new_rows():
    fm = fm_from_columns(
        {FeatureId.AX: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]}, [0, 0, 0, 0, 1, 2], ("a", "b", "c")
    )
    counts = cart._oversample_indices(np.asarray(fm.labels), 3)
    resampled = np.asarray(fm.labels)[counts]
    assert np.bincount(resampled).tolist() == [4, 4, 4]
    assert set(counts.tolist()) == set(range(6))  # distinct rows unchanged
    # deterministic: same call twice
    again = cart._oversample_indices(np.asarray(fm.labels), 3)
    assert np.array_equal(counts, again)


def test_oversample_affects_leaf_counts():
    fm = fm_from_columns(
        {FeatureId.AX: [1.0, 1.0, 1.0, 1.0, 2.0]}, [0, 0, 0, 0, 1], ("a", "b")
    )
    plain = fit(fm, TrainConfig(max_depth=2))
    over = fit(fm, TrainConfig(max_depth=2, oversample=True))
    assert sum(plain.root.left.class_counts) + sum(plain.root.right.class_counts) == 5
    assert sum(over.root.left.class_counts) + sum(over.root.right.class_counts) == 8


def test_min_samples_limits():
    fm = four_row_fm()
    model = fit(fm, TrainConfig(max_depth=3, min_samples_split=5))
    assert isinstance(model.root, Leaf)
    model = fit(fm, TrainConfig(max_depth=3, min_samples_leaf=2))
    assert isinstance(model.root, Internal)
    assert model.root.threshold == 2.5  # 1.5/3.5 would leave a 1-row side


def test_predict_matches_naive_interpreter_on_10k_vectors():
    rng = np.random.default_rng(15)
    fm = random_fm(rng, n_rows=200, n_features=3, n_classes=3)
    model = fit(fm, TrainConfig(max_depth=9))
    X = np.zeros((10_000, 8))
    X[:, :3] = rng.uniform(-6, 6, (10_000, 3))
    batch = predict_batch(model, X)
    for i in range(0, 10_000, 97):
        assert batch[i] == naive_predict(model, X[i])
    singles = np.array([predict(model, X[i]) for i in range(0, 10_000, 97)])
    assert np.array_equal(singles, batch[::97])


def test_predict_rejects_nonfinite_masked_value():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    row = np.zeros(8)
    row[FeatureId.AX] = np.nan
    with pytest.raises(ValueError):
        predict(model, row)
    row[FeatureId.AX] = 1.0
    row[FeatureId.GX] = np.nan  # unmasked features may be anything
    assert predict(model, row) == 0


def test_predict_mapping_requires_masked_features():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    with pytest.raises(ValueError, match="AX"):
        predict(model, {FeatureId.GX: 1.0})
    assert predict(model, {"ax": 1.0, "gy": 7.0}) == 0  # names accepted too


def test_deserialize_rejects_unserializable_behaviours():
    with pytest.raises(FormatError):
        deserialize("version 1\nbehaviours a,\nfeatures AX\nmax_depth 1\nseed 0\nrows 1\nnodes 1\nleaf 0 1 0\n")


def test_single_leaf_predicts_constant():
    model = TreeModel(Leaf(1, (0, 3)), max_depth=4, feature_mask=(FeatureId.AX,),
                      behaviours=("a", "b"))
    for v in (-1e9, 0.0, 1e9):
        assert predict(model, {FeatureId.AX: v}) == 1


def test_serialize_roundtrip_leaf():
    model = TreeModel(Leaf(0, (2, 0)), max_depth=1, feature_mask=(FeatureId.GX,),
                      behaviours=("a", "b"))
    assert deserialize(serialize(model)) == model


def test_serialize_roundtrip_deep_model():
    rng = np.random.default_rng(16)
    fm = random_fm(rng, n_rows=400, n_features=3, n_classes=3)
    model = fit(fm, TrainConfig(max_depth=14))
    back = deserialize(serialize(model))
    assert back == model
    X = np.zeros((1000, 8))
    X[:, :3] = rng.uniform(-6, 6, (1000, 3))
    assert np.array_equal(predict_batch(model, X), predict_batch(back, X))


def test_serialize_format_shape():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    text = serialize(model)
    lines = text.splitlines()
    assert lines[0] == "version 1"
    assert lines[1] == "behaviours A,B"
    assert lines[2] == "features AX"
    assert "internal AX 2.5" in lines
    assert "leaf 0 2 0" in lines
    assert "leaf 1 0 2" in lines


def test_deserialize_truncated_raises_format_error():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    text = serialize(model)
    truncated = "\n".join(text.splitlines()[:-1])
    with pytest.raises(FormatError):
        deserialize(truncated)


def test_deserialize_reports_line_number():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    lines = serialize(model).splitlines()
    lines[8] = "leaf banana 0 2"
    with pytest.raises(FormatError, match="line 9"):
        deserialize("\n".join(lines))
    with pytest.raises(FormatError, match="line 1"):
        deserialize("version 99\n")


def test_deserialize_rejects_trailing_content():
    model = fit(four_row_fm(), TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    with pytest.raises(FormatError, match="trailing"):
        deserialize(serialize(model) + "leaf 0 1 1\n")


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=0)
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=1, feature_mask=())
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=1, min_samples_split=1)
    with pytest.raises(ConfigError):
        TrainConfig(max_depth=1, criterion="mse")


def test_fit_rejects_empty_matrix():
    fm = fm_from_columns({}, [], ("a",))
    with pytest.raises(DataError):
        fit(fm, TrainConfig(max_depth=1))


def test_fingerprint_stable_and_distinct():
    fm = four_row_fm()
    m1 = fit(fm, TrainConfig(max_depth=1, feature_mask=(FeatureId.AX,)))
    m2 = fit(fm, TrainConfig(max_depth=2, feature_mask=(FeatureId.AX,)))
    assert fingerprint(m1) == fingerprint(m1)
    assert fingerprint(m1) != fingerprint(m2) or serialize(m1) == serialize(m2)


def test_entropy_criterion_available():
    fm = four_row_fm()
    model = fit(fm, TrainConfig(max_depth=1, criterion="entropy"))
    assert model.root.threshold == 2.5


def test_tree_model_validates_invariants():
    split = Internal(FeatureId.AX, 1.0, Leaf(0, (1, 0)), Leaf(1, (0, 1)))
    with pytest.raises(ConfigError):
        TreeModel(split, max_depth=1, feature_mask=(FeatureId.GX,), behaviours=("a", "b"))
    deep = Internal(FeatureId.AX, 1.0, split, Leaf(1, (0, 1)))
    with pytest.raises(ConfigError):
        TreeModel(deep, max_depth=1, feature_mask=(FeatureId.AX,), behaviours=("a", "b"))
    TreeModel(deep, max_depth=2, feature_mask=(FeatureId.AX,), behaviours=("a", "b"))
