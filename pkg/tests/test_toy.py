import statistics
from dataclasses import replace

import numpy as np
import pytest

from avqa_debias.losses import MccdConfig
from avqa_debias.splitting import SplitLabel, answer_distribution
from avqa_debias.toy import (
    AblationSpec,
    AblationVariant,
    SyntheticConfig,
    ToyError,
    ToyModel,
    TrainConfig,
    ablation_run,
    class_index,
    class_name,
    evaluate,
    forward,
    forward_bundle,
    generate_synthetic,
    predict_logits,
    run_variant,
    train,
)

SMALL = SyntheticConfig(train_n=300, test_n=200)
QUICK = TrainConfig(epochs=3)


def small_data(**kw):
    return generate_synthetic(replace(SMALL, **kw))


class TestClassNames:
    def test_round_trip(self):
        assert class_name(4) == "c04"
        assert class_index("c04") == 4

    def test_bad_name(self):
        with pytest.raises(ToyError):
            class_index("dog")


class TestSyntheticConfig:
    def test_validation(self):
        with pytest.raises(ToyError):
            SyntheticConfig(num_classes=1)
        with pytest.raises(ToyError):
            SyntheticConfig(bias_strength=1.5)
        with pytest.raises(ToyError):
            SyntheticConfig(tail_fraction=0.0)
        with pytest.raises(ToyError):
            generate_synthetic(SyntheticConfig(feature_dim=4, num_classes=6))


class TestGenerateSynthetic:
    def test_deterministic(self):
        a, b = small_data(), small_data()
        assert [s.qa.id for s in a.train] == [s.qa.id for s in b.train]
        for x, y in zip(a.train + a.test, b.train + b.test):
            assert x.label == y.label
            assert np.array_equal(x.audio, y.audio)
            assert np.array_equal(x.question, y.question)

    def test_sizes_and_split_fractions(self):
        data = small_data()
        assert len(data.train) == 300 and len(data.test) == 200
        tails = sum(1 for a in data.splits if a.label is SplitLabel.TAIL)
        assert tails == round(0.3 * 200)

    def test_shortcut_channel_semantics(self):
        # bias_strength 1: the shortcut channel always names the label;
        # bias_strength 0: it never does
        clean = small_data(bias_strength=1.0)
        for s in clean.train:
            assert int(np.argmax(s.question)) == s.label
        flipped = small_data(bias_strength=0.0)
        assert all(int(np.argmax(s.question)) != s.label for s in flipped.train)

    def test_test_regime_matches_split_labels(self):
        data = small_data()
        by_id = {s.qa.id: s for s in data.test}
        for a in data.splits:
            s = by_id[a.sample_id]
            agrees = int(np.argmax(s.question)) == s.label
            assert agrees == (a.label is SplitLabel.HEAD)

    def test_training_answers_are_splitter_compatible(self):
        # the planted skew keeps normalized entropy under the 0.9 cutoff
        data = generate_synthetic(SyntheticConfig())
        dist = answer_distribution([s.qa for s in data.train])
        assert dist.normalized_entropy < 0.9

    def test_label_needs_both_modalities(self):
        # audio index is label // 2 and video index label % 2, so two
        # labels share each audio prototype and three share each video one
        data = small_data(noise_scale=0.0)
        by_audio = {}
        for s in data.train:
            by_audio.setdefault(tuple(s.audio), set()).add(s.label)
        assert any(len(v) > 1 for v in by_audio.values())


class TestForward:
    def test_heads_shapes(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        logits = forward(model, data.train[:10])
        assert set(logits) == {"audio", "video", "question", "fused"}
        assert all(v.shape == (10, 6) for v in logits.values())

    def test_batching_invariance(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        whole = forward(model, data.train[:8])
        for i, s in enumerate(data.train[:8]):
            single = forward(model, [s])
            for name in whole:
                assert np.allclose(whole[name][i], single[name][0], atol=1e-12)

    def test_forward_bundle_matches(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        b = forward_bundle(model, data.train[0])
        logits = forward(model, [data.train[0]])
        assert np.allclose(b.fused, logits["fused"][0], atol=1e-15)

    def test_feature_dim_checked(self):
        data = small_data()
        model = ToyModel.initialize(6, 8, seed=0)
        with pytest.raises(ToyError, match="feature dim"):
            forward(model, data.train[:1])

    def test_predict_uses_only_fusion_path(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        before = predict_logits(model, data.test[:20])
        # clobber every bias-learner parameter; inference must not move
        for name, arr in model.params.items():
            if name.startswith("bias_"):
                arr += 100.0
        after = predict_logits(model, data.test[:20])
        assert np.array_equal(before, after)
        assert np.allclose(before, forward(model, data.test[:20])["fused"], atol=1e-12)


class TestTrain:
    def test_deterministic(self):
        data = small_data()
        results = []
        for _ in range(2):
            model = ToyModel.initialize(6, 16, seed=1)
            results.append(train(model, data.train, replace(QUICK, seed=1)))
        for k in results[0].model.params:
            assert np.array_equal(results[0].model.params[k], results[1].model.params[k])
        assert results[0].history == results[1].history

    def test_history_schema_and_lr_decay(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        tcfg = TrainConfig(epochs=5, lr_decay_every=2, learning_rate=1e-3)
        hist = train(model, data.train, tcfg).history
        assert [h["epoch"] for h in hist] == [1, 2, 3, 4, 5]
        assert set(hist[0]) == {"epoch", "L_a", "L_d", "L_c", "train_acc", "lr"}
        assert [h["lr"] for h in hist] == [1e-3, 1e-3, 5e-4, 5e-4, 2.5e-4]

    def test_empty_corpus(self):
        model = ToyModel.initialize(6, 16, seed=0)
        with pytest.raises(ToyError, match="empty"):
            train(model, [], QUICK)

    def test_loss_decreases(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        hist = train(model, data.train, TrainConfig(epochs=10)).history
        assert hist[-1]["L_a"] < hist[0]["L_a"]
        assert hist[-1]["train_acc"] > hist[0]["train_acc"]


class TestAblationContract:
    def variant_history(self, variant, data):
        model = ToyModel.initialize(6, 16, seed=0)
        return train(model, data.train, QUICK, AblationSpec(variant=variant)).history

    def test_dropped_terms_are_identically_zero(self):
        data = small_data()
        assert all(h["L_d"] == 0.0 for h in self.variant_history(AblationVariant.WITHOUT_MD, data))
        assert all(h["L_c"] == 0.0 for h in self.variant_history(AblationVariant.WITHOUT_CG, data))
        baseline = self.variant_history(AblationVariant.BASELINE_CE_ONLY, data)
        assert all(h["L_d"] == 0.0 and h["L_c"] == 0.0 for h in baseline)

    def test_baseline_equals_full_with_zero_weights(self):
        data = small_data()
        zeroed = replace(QUICK, mccd=MccdConfig(alpha=0.0, beta=0.0))
        m1 = ToyModel.initialize(6, 16, seed=0)
        train(m1, data.train, zeroed, AblationSpec(variant=AblationVariant.FULL))
        m2 = ToyModel.initialize(6, 16, seed=0)
        train(m2, data.train, QUICK, AblationSpec(variant=AblationVariant.BASELINE_CE_ONLY))
        for k in m1.params:
            assert np.array_equal(m1.params[k], m2.params[k])

    def test_single_term_drops_rescale_the_share(self):
        spec = AblationSpec(variant=AblationVariant.WITHOUT_DQ)
        cfg, heads, share = spec.effective(MccdConfig())
        assert heads == ("audio", "video") and share == 2
        assert cfg.alpha == MccdConfig().alpha

    def test_every_variant_resolves(self):
        for v in AblationVariant:
            cfg, heads, share = AblationSpec(variant=v).effective(MccdConfig())
            assert share in (2, 3)
            assert all(h in ("audio", "video", "question") for h in heads)


class TestEvaluate:
    def test_report_covers_all_test_samples(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        train(model, data.train, QUICK)
        report = evaluate(model, data.test, data.splits)
        agg = report.aggregate
        assert agg.head_n + agg.tail_n == len(data.test)
        assert report.unmatched_ids == []

    def test_trained_model_beats_chance(self):
        data = small_data()
        model = ToyModel.initialize(6, 16, seed=0)
        train(model, data.train, TrainConfig(epochs=15))
        report = evaluate(model, data.test, data.splits)
        assert float(report.aggregate.overall_acc) > 1.0 / 6.0


class TestRunVariant:
    def test_row_schema(self):
        row = run_variant(SMALL, QUICK, AblationSpec(), seed=3)
        assert row["variant"] == "full" and row["seed"] == 3
        assert 0.0 <= row["tail_acc"] <= 1.0
        assert row["final_epoch"]["epoch"] == QUICK.epochs

    def test_ablation_run_medians(self):
        rows = ablation_run(SMALL, QUICK, [AblationSpec()], seeds=[0, 1, 2])
        (row,) = rows
        assert row["median_tail_acc"] == statistics.median(
            r["tail_acc"] for r in row["runs"]
        )
        assert [r["seed"] for r in row["runs"]] == [0, 1, 2]

    def test_seed_changes_the_data_and_model(self):
        a = run_variant(SMALL, QUICK, AblationSpec(), seed=0)
        b = run_variant(SMALL, QUICK, AblationSpec(), seed=1)
        assert a != b
