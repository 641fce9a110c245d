import numpy as np
import pytest

from ncc_lab.ncc import NCCModel
from ncc_lab.scores import (
    DeadFeature,
    FeatureBundle,
    OracleConfig,
    causal_anticausal_scores,
    compute_scores,
    correlation_baseline,
    feature_direction_scores,
    hypothesis_report,
    load_bundle_set,
    load_feature_bundle,
    object_context_scores,
    pairwise_object_relations,
    synth_feature_oracle,
    top_fraction,
    write_bundle_set,
    write_feature_bundle,
    write_scores_csv,
)
from ncc_lab.synthgen import standardize


def eval_model(seed=7):
    return NCCModel(hidden=8, layers=2, rng=np.random.default_rng(seed))


def make_bundle(m=40, n_feat=6, seed=0, class_id=0):
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((m, n_feat))
    return FeatureBundle(class_id=class_id, features=f,
                         features_object=f + rng.standard_normal((m, n_feat)),
                         features_context=f + rng.standard_normal((m, n_feat)),
                         logodds=rng.standard_normal(m),
                         logodds_all=rng.standard_normal((m, 3)))


# -- object / context scores -------------------------------------------------------


def test_object_score_zero_when_context_features_unchanged():
    b = make_bundle()
    same = FeatureBundle(class_id=0, features=b.features,
                         features_object=b.features_object,
                         features_context=b.features.copy(),
                         logodds=b.logodds)
    s_obj, _, dead = object_context_scores(same)
    np.testing.assert_array_equal(s_obj, np.zeros(b.n_features))
    assert not dead.any()


def test_object_score_arithmetic():
    f = np.array([[1.0], [1.0]])
    f_ctx = np.array([[0.0], [2.0]])
    b = FeatureBundle(class_id=0, features=f, features_object=f.copy(),
                      features_context=f_ctx, logodds=np.array([0.0, 1.0]))
    s_obj, s_ctx, _ = object_context_scores(b)
    assert s_obj[0] == 1.0  # (1 + 1) / (1 + 1)
    assert s_ctx[0] == 0.0


def test_scores_invariant_under_joint_rescaling():
    b = make_bundle()
    scaled = FeatureBundle(class_id=0, features=3.0 * b.features,
                           features_object=3.0 * b.features_object,
                           features_context=3.0 * b.features_context,
                           logodds=b.logodds)
    s1 = object_context_scores(b)
    s2 = object_context_scores(scaled)
    np.testing.assert_allclose(s1[0], s2[0], rtol=1e-12)
    np.testing.assert_allclose(s1[1], s2[1], rtol=1e-12)


def test_dead_columns_flagged():
    b = make_bundle()
    f = b.features.copy()
    f[:, 2] = 0.0
    dead_bundle = FeatureBundle(class_id=0, features=f,
                                features_object=b.features_object,
                                features_context=b.features_context,
                                logodds=b.logodds)
    s_obj, s_ctx, dead = object_context_scores(dead_bundle)
    assert dead[2] and dead.sum() == 1
    assert np.isnan(s_obj[2]) and np.isnan(s_ctx[2])


# -- causal / anticausal -------------------------------------------------------------


def test_direction_scores_sum_to_one_exactly():
    model = eval_model()
    b = make_bundle(m=60, n_feat=8, seed=1)
    causal, anticausal, dead = causal_anticausal_scores(model, b)
    assert not dead.any()
    assert np.all(causal + anticausal == 1.0)
    assert np.all((causal >= 0) & (causal <= 1))


def test_feature_identical_to_logodds_scores_half():
    model = eval_model()
    c = np.random.default_rng(2).standard_normal(50)
    causal, anticausal = feature_direction_scores(model, c.copy(), c)
    assert causal == 0.5 and anticausal == 0.5


def test_dead_feature_raises_for_single_column():
    model = eval_model()
    with pytest.raises(DeadFeature):
        feature_direction_scores(model, np.zeros(50),
                                 np.random.default_rng(3).standard_normal(50))


def test_constant_column_marked_dead_in_bulk():
    model = eval_model()
    b = make_bundle(m=30, n_feat=4, seed=4)
    f = b.features.copy()
    f[:, 1] = 5.0
    bundle = FeatureBundle(class_id=0, features=f, features_object=f.copy(),
                           features_context=f.copy(), logodds=b.logodds)
    causal, anticausal, dead = causal_anticausal_scores(model, bundle)
    assert dead[1]
    assert np.isnan(causal[1]) and np.isnan(anticausal[1])


# -- correlation baseline -------------------------------------------------------------


def test_correlation_of_copy_and_negated_copy():
    rng = np.random.default_rng(5)
    c = rng.standard_normal(80)
    f = np.column_stack([c, -c, rng.standard_normal(80)])
    b = FeatureBundle(class_id=0, features=f, features_object=f.copy(),
                      features_context=f.copy(), logodds=c)
    corr, abs_corr = correlation_baseline(b)
    assert corr[0] == pytest.approx(1.0)
    assert corr[1] == pytest.approx(-1.0)
    assert abs_corr[1] == pytest.approx(1.0)


def test_independent_columns_have_small_correlation():
    rng = np.random.default_rng(6)
    m = 1000
    f = rng.standard_normal((m, 50))
    b = FeatureBundle(class_id=0, features=f, features_object=f.copy(),
                      features_context=f.copy(), logodds=rng.standard_normal(m))
    _, abs_corr = correlation_baseline(b)
    assert np.mean(abs_corr < 0.1) > 0.99


# -- top fraction ----------------------------------------------------------------------


def test_top_fraction_counts():
    scores = np.linspace(0, 1, 512)
    assert top_fraction(scores, 0.01).size == 6    # ceil(5.12)
    assert top_fraction(scores, 0.20).size == 103  # ceil(102.4)
    assert top_fraction(scores, 1.0).size == 512


def test_top_fraction_tie_rule():
    scores = np.ones(10)
    np.testing.assert_array_equal(top_fraction(scores, 0.3), [0, 1, 2])


def test_top_fraction_selects_largest_sorted():
    scores = np.array([0.1, 0.9, 0.5, 0.9, 0.2])
    np.testing.assert_array_equal(top_fraction(scores, 0.6), [1, 2, 3])


def test_top_fraction_skips_dead():
    scores = np.array([np.nan, 0.2, np.nan, 0.8])
    np.testing.assert_array_equal(top_fraction(scores, 0.5), [1, 3])


def test_top_fraction_rejects_bad_fraction():
    for q in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            top_fraction(np.ones(4), q)


# -- pairwise relations ------------------------------------------------------------------


def test_pairwise_relations_complement_exactly():
    model = eval_model()
    rng = np.random.default_rng(8)
    matrix = rng.standard_normal((60, 4))
    relations = pairwise_object_relations(model, matrix)
    assert len(relations) == 12  # ordered pairs of 4 classes
    scores_by_pair = {(a, b): s for a, b, s in relations}
    for (a, b), s in scores_by_pair.items():
        assert s + scores_by_pair[(b, a)] == 1.0
    # ranked descending
    values = [s for _, _, s in relations]
    assert values == sorted(values, reverse=True)


def test_pairwise_skips_constant_columns():
    model = eval_model()
    rng = np.random.default_rng(9)
    matrix = np.column_stack([rng.standard_normal(40), np.full(40, 2.0),
                              rng.standard_normal(40)])
    relations = pairwise_object_relations(model, matrix, ["a", "b", "c"])
    names = {n for rel in relations for n in rel[:2]}
    assert names == {"a", "c"}


# -- bundle IO ------------------------------------------------------------------------------


def test_bundle_roundtrip(tmp_path):
    bundle = make_bundle(m=12, n_feat=5, seed=10, class_id=1)
    write_feature_bundle(tmp_path / "class_1", bundle)
    loaded = load_feature_bundle(tmp_path / "class_1", 1)
    np.testing.assert_array_equal(loaded.features, bundle.features)
    np.testing.assert_array_equal(loaded.features_object, bundle.features_object)
    np.testing.assert_array_equal(loaded.features_context, bundle.features_context)
    np.testing.assert_array_equal(loaded.logodds, bundle.logodds_all[:, 1])


def test_bundle_set_roundtrip(tmp_path):
    bundles = [make_bundle(m=8, n_feat=4, seed=s, class_id=s) for s in range(3)]
    write_bundle_set(tmp_path, bundles)
    loaded = load_bundle_set(tmp_path)
    assert [b.class_id for b in loaded] == [0, 1, 2]
    manifest = (tmp_path / "manifest.csv").read_text().splitlines()
    assert manifest[0] == "class_id,image_id,file"
    assert len(manifest) == 1 + 3 * 8


def test_loader_rejects_wrong_header(tmp_path):
    bundle = make_bundle(m=6, n_feat=3, seed=11)
    write_feature_bundle(tmp_path, bundle)
    features = (tmp_path / "features.csv").read_text().splitlines()
    (tmp_path / "features.csv").write_text(
        "\n".join(["a,b,c"] + features[1:]) + "\n")
    with pytest.raises(ValueError):
        load_feature_bundle(tmp_path, 0)


def test_scores_csv_deterministic(tmp_path):
    model = eval_model()
    table = compute_scores(model, make_bundle(m=20, n_feat=4, seed=12))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_scores_csv(p1, table)
    write_scores_csv(p2, table)
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header.startswith("feature,object_score,context_score,causal_score")


# -- oracle ------------------------------------------------------------------------------------


def test_oracle_bundle_shapes_and_determinism():
    cfg = OracleConfig(n_classes=2, n_features=32, n_images=64,
                       n_anticausal=4, n_causal=3)
    b1, t1 = synth_feature_oracle(cfg, np.random.default_rng(13))
    b2, t2 = synth_feature_oracle(cfg, np.random.default_rng(13))
    assert len(b1) == 2
    assert b1[0].features.shape == (64, 32)
    np.testing.assert_array_equal(b1[0].features, b2[0].features)
    np.testing.assert_array_equal(t1[0]["anticausal"], t2[0]["anticausal"])
    for class_id, truth in t1.items():
        assert truth["anticausal"].size == 4
        assert truth["causal"].size == 3
        assert not set(truth["anticausal"]) & set(truth["causal"])


def test_oracle_planted_object_scores_elevated():
    cfg = OracleConfig(n_classes=1, n_features=64, n_images=200,
                       n_anticausal=8, n_causal=4)
    bundles, truth = synth_feature_oracle(cfg, np.random.default_rng(14))
    s_obj, s_ctx, _ = object_context_scores(bundles[0])
    anti = truth[0]["anticausal"]
    causal = truth[0]["causal"]
    rest = np.setdiff1d(np.arange(64), np.concatenate([anti, causal]))
    assert s_obj[anti].mean() > 3.0 * s_obj[rest].mean()
    assert s_ctx[causal].mean() > 3.0 * s_ctx[rest].mean()


def test_oracle_rejects_overfull_plant():
    with pytest.raises(ValueError):
        OracleConfig(n_features=10, n_anticausal=8, n_causal=8)


# -- hypothesis report -------------------------------------------------------------------------


def test_hypothesis_report_counts_supporting_classes():
    # hand-built score tables with known structure: class 0 supports, class 1 not
    def table(class_id, obj_hi_on_anti):
        n = 20
        anticausal = np.zeros(n)
        anticausal[:4] = [0.9, 0.8, 0.85, 0.95]
        causal = np.zeros(n)
        causal[4:8] = [0.9, 0.8, 0.85, 0.95]
        obj = np.full(n, 0.1)
        if obj_hi_on_anti:
            obj[:4] = 2.0
        else:
            obj[4:8] = 2.0
        from ncc_lab.scores import ScoreTable
        return ScoreTable(class_id=class_id, object_score=obj,
                          context_score=np.full(n, 0.3), causal_score=causal,
                          anticausal_score=anticausal,
                          correlation=np.zeros(n), abs_correlation=np.zeros(n),
                          dead=np.zeros(n, dtype=bool))

    report = hypothesis_report([table(0, True), table(1, False)], qs=(0.2,))
    assert report.support_counts[0.2] == (1, 2)
    rows = {r.class_id: r for r in report.rows}
    assert rows[0].supports and not rows[1].supports
    assert rows[0].top_count == 4  # ceil(0.2 * 20)
