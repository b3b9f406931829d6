import json
import random
from fractions import Fraction

import pytest

from avqa_debias.data import QuestionType, Task
from avqa_debias.scoring import (
    AccuracyCell,
    ScoringError,
    VoteTable,
    fleiss_kappa,
    normalize_answer,
    render_report,
    score_predictions,
)
from avqa_debias.splitting import SplitAssignment, SplitLabel, SplitRule
from conftest import make_sample


def assignment(sample, label):
    return SplitAssignment(
        sample_id=sample.id,
        group=sample.group,
        label=label,
        answer_class=sample.answer,
        rule=SplitRule.GENERAL_THRESHOLD,
    )


def fixture_4h2t():
    """4 head + 2 tail samples; 3 head and 1 tail predictions correct."""
    gold = [make_sample(f"s{i}", "yes") for i in range(6)]
    labels = [SplitLabel.HEAD] * 4 + [SplitLabel.TAIL] * 2
    splits = [assignment(s, lab) for s, lab in zip(gold, labels)]
    preds = {
        "s0": "yes", "s1": "yes", "s2": "yes", "s3": "no",
        "s4": "yes", "s5": "no",
    }
    return gold, splits, preds


class TestNormalizeAnswer:
    def test_trim_and_lower(self):
        assert normalize_answer("  Two\t\n") == "two"
        assert normalize_answer("YES") == "yes"

    def test_interior_whitespace_kept(self):
        assert normalize_answer("middle ear") == "middle ear"


class TestScorePredictions:
    def test_hand_fixture_exact(self):
        report = score_predictions(*fixture_4h2t())
        agg = report.aggregate
        assert agg.head_acc == Fraction(3, 4)
        assert agg.tail_acc == Fraction(1, 2)
        assert agg.overall_acc == Fraction(2, 3)
        assert (agg.head_n, agg.tail_n) == (4, 2)
        assert report.unmatched_ids == []

    def test_missing_prediction_counts_incorrect(self):
        gold, splits, preds = fixture_4h2t()
        del preds["s0"]
        report = score_predictions(gold, splits, preds)
        assert report.unmatched_ids == ["s0"]
        assert report.aggregate.head_acc == Fraction(2, 4)

    def test_unknown_prediction_id_warns(self):
        gold, splits, preds = fixture_4h2t()
        preds["ghost"] = "yes"
        report = score_predictions(gold, splits, preds)
        assert any("ghost" in w for w in report.warnings)

    def test_split_for_unknown_sample_raises(self):
        gold, splits, preds = fixture_4h2t()
        rogue = assignment(make_sample("other", "yes"), SplitLabel.HEAD)
        with pytest.raises(ScoringError, match="unknown sample"):
            score_predictions(gold, splits + [rogue], preds)

    def test_normalization_applied_to_both_sides(self):
        gold = [make_sample("s0", "  Yes ")]
        splits = [assignment(gold[0], SplitLabel.HEAD)]
        report = score_predictions(gold, splits, {"s0": "YES\n"})
        assert report.aggregate.head_acc == 1

    def test_only_assigned_samples_scored(self):
        gold, splits, preds = fixture_4h2t()
        extra = make_sample("unsplit", "yes")
        report = score_predictions(gold + [extra], splits, preds)
        assert report.aggregate.head_n + report.aggregate.tail_n == 6

    def test_aggregate_is_sample_weighted_group_mean(self):
        rng = random.Random(7)
        groups = [
            (Task.AUDIO_QA, QuestionType.COUNTING),
            (Task.AUDIO_QA, QuestionType.COMPARATIVE),
            (Task.VISUAL_QA, QuestionType.LOCATION),
            (Task.AVQA, QuestionType.EXISTENTIAL),
            (Task.AVQA, QuestionType.TEMPORAL),
        ]
        gold, splits, preds = [], [], {}
        for gi, (task, qtype) in enumerate(groups):
            for i in range(rng.randint(5, 40)):
                s = make_sample(f"g{gi}-{i}", "yes", task=task, qtype=qtype)
                gold.append(s)
                splits.append(
                    assignment(s, SplitLabel.HEAD if rng.random() < 0.6 else SplitLabel.TAIL)
                )
                preds[s.id] = "yes" if rng.random() < 0.7 else "no"
        report = score_predictions(gold, splits, preds)
        total = sum(c.head_n + c.tail_n for c in report.per_group.values())
        weighted = sum(
            (c.overall_acc or 0) * (c.head_n + c.tail_n) for c in report.per_group.values()
        )
        # both sides are exact rationals, so the identity is exact
        assert report.aggregate.overall_acc == weighted / total

    def test_empty_cell_accuracy_is_none(self):
        cell = AccuracyCell()
        assert cell.head_acc is None and cell.tail_acc is None and cell.overall_acc is None


class TestVoteTable:
    def test_validation(self):
        with pytest.raises(ScoringError, match="raters"):
            VoteTable(raters=1, rows=((1, 0),))
        with pytest.raises(ScoringError, match="at least one row"):
            VoteTable(raters=3, rows=())
        with pytest.raises(ScoringError, match="categories"):
            VoteTable(raters=3, rows=((3,),))
        with pytest.raises(ScoringError, match="ragged"):
            VoteTable(raters=3, rows=((2, 1), (3, 0, 0)))
        with pytest.raises(ScoringError, match="sum"):
            VoteTable(raters=3, rows=((2, 2),))
        with pytest.raises(ScoringError, match="multiplicities"):
            VoteTable(raters=3, rows=((2, 1),), multiplicities=(1, 2))
        with pytest.raises(ScoringError, match="positive"):
            VoteTable(raters=3, rows=((2, 1),), multiplicities=(0,))

    def test_item_count(self):
        t = VoteTable(raters=3, rows=((2, 1), (0, 3)), multiplicities=(4, 6))
        assert t.item_count == 10
        assert t.categories == 2


class TestFleissKappa:
    def test_three_rater_pass_fail_oracle(self):
        # 3 raters x 228,225 items summarized by agreement pattern; the
        # expected value was derived independently with exact rationals
        table = VoteTable(
            raters=3,
            rows=((3, 0), (2, 1), (1, 2), (0, 3)),
            multiplicities=(164219, 47353, 7481, 9172),
        )
        assert fleiss_kappa(table) == pytest.approx(0.29740496162077545, abs=1e-12)

    def test_textbook_example(self):
        # Fleiss (1971)-style table, 2 raters, checked by hand:
        # P_bar = 1/2, Pe_bar = 1/2, kappa = 0
        table = VoteTable(raters=2, rows=((2, 0), (1, 1), (1, 1), (0, 2)))
        assert fleiss_kappa(table) == pytest.approx(0.0, abs=1e-12)

    def test_perfect_agreement_degenerate_chance(self):
        table = VoteTable(raters=3, rows=((3, 0), (3, 0)))
        assert fleiss_kappa(table) == 1.0

    def test_perfect_agreement_across_categories(self):
        # P_bar = 1, Pe_bar = 1/2 -> kappa = 1 exactly
        table = VoteTable(raters=3, rows=((3, 0), (0, 3)))
        assert fleiss_kappa(table) == 1.0

    def test_multiplicities_equal_expansion(self):
        rows = ((2, 1), (0, 3), (3, 0))
        mult = (3, 2, 5)
        compact = VoteTable(raters=3, rows=rows, multiplicities=mult)
        expanded = VoteTable(
            raters=3, rows=tuple(r for r, m in zip(rows, mult) for _ in range(m))
        )
        assert fleiss_kappa(compact) == fleiss_kappa(expanded)


class TestRenderReport:
    def test_text_table_shape(self):
        report = score_predictions(*fixture_4h2t())
        text = render_report(report, "text-table").decode()
        lines = text.splitlines()
        assert lines[0].startswith("| Group")
        assert lines[-1].startswith("| All")
        assert " 75.00 " in lines[-1] and " 50.00 " in lines[-1] and " 66.67 " in lines[-1]

    def test_json_stable_and_rounded(self):
        report = score_predictions(*fixture_4h2t())
        obj = json.loads(render_report(report, "json"))
        assert obj["schema_version"] == 1
        assert obj["aggregate"] == {
            "head_acc": 0.75,
            "tail_acc": 0.5,
            "overall_acc": 0.6667,
            "head_n": 4,
            "tail_n": 2,
        }
        assert render_report(report, "json") == render_report(report, "json")

    def test_unknown_format(self):
        report = score_predictions(*fixture_4h2t())
        with pytest.raises(ScoringError, match="unknown report format"):
            render_report(report, "yaml")
