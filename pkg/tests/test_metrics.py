import csv
import io
import json

import numpy as np
import pytest

from oracles import brute_span_prf, brute_token_counts, random_tags, random_valid_iob
from raretag.metrics import (
    EvalError,
    EvalReport,
    LabelScores,
    entity_level,
    report_render,
    token_level,
)

TYPE_NAMES = ["DISEASE", "RAREDISEASE", "SIGN", "SYMPTOM"]


def prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


class TestTokenLevel:
    def test_identity_is_all_ones(self):
        gold = [["B-SIGN", "I-SIGN", "O"], ["B-DISEASE", "O"]]
        report = token_level(gold, gold)
        for scores in report.per_label.values():
            assert scores.f1 == 1.0
        assert report.micro.f1 == 1.0
        assert report.accuracy == 1.0

    def test_hand_counted_example(self):
        gold = [["B-SIGN", "I-SIGN"]]
        pred = [["B-SIGN", "O"]]
        report = token_level(gold, pred)
        assert report.per_label["B-SIGN"].f1 == 1.0
        assert report.per_label["I-SIGN"].recall == 0.0
        assert report.micro.precision == 1.0
        assert report.micro.recall == 0.5
        assert report.accuracy == 0.5

    def test_outside_excluded_from_labels_and_averages(self):
        gold = [["O", "O", "B-SIGN"]]
        pred = [["O", "B-SIGN", "B-SIGN"]]
        report = token_level(gold, pred)
        assert "O" not in report.per_label
        # 1 TP, 1 FP for B-SIGN; O agreement does not inflate micro
        assert report.micro.precision == 0.5
        assert report.micro.recall == 1.0

    def test_accuracy_includes_outside(self):
        gold = [["O", "O", "B-SIGN", "I-SIGN"]]
        pred = [["O", "B-SIGN", "B-SIGN", "O"]]
        report = token_level(gold, pred)
        assert report.accuracy == 0.5

    def test_shape_mismatch_rejected(self):
        with pytest.raises(EvalError):
            token_level([["O"]], [["O", "O"]])
        with pytest.raises(EvalError):
            token_level([["O"]], [])

    def test_matches_brute_counter_on_random_corpora(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            gold = [random_tags(rng, TYPE_NAMES, int(rng.integers(1, 10)))
                    for _ in range(n)]
            pred = [random_tags(rng, TYPE_NAMES, len(g)) for g in gold]
            report = token_level(gold, pred)
            expected = brute_token_counts(gold, pred)
            for label, (tp, fp, fn) in expected.items():
                p, r, f1 = prf(tp, fp, fn)
                scores = report.per_label[label]
                assert (scores.precision, scores.recall, scores.f1) == (p, r, f1)
                assert scores.support == tp + fn


class TestEntityLevel:
    def test_identity_single_span(self):
        gold = [["B-SIGN", "I-SIGN", "O"]]
        report = entity_level(gold, gold)
        assert report.per_label["SIGN"] == LabelScores(1.0, 1.0, 1.0, 1)

    def test_boundary_error_hand_count(self):
        gold = [["B-SIGN", "I-SIGN", "O", "B-DISEASE", "O"]]
        pred = [["B-SIGN", "I-SIGN", "O", "B-DISEASE", "I-DISEASE"]]
        report = entity_level(gold, pred)
        assert report.per_label["SIGN"].f1 == 1.0
        assert report.per_label["DISEASE"].f1 == 0.0
        assert report.micro.f1 == 0.5

    def test_identity_property_on_random_corpora(self):
        rng = np.random.default_rng(18)
        for _ in range(100):
            gold = [random_valid_iob(rng, TYPE_NAMES, int(rng.integers(1, 12)))
                    for _ in range(int(rng.integers(1, 5)))]
            report = entity_level(gold, gold)
            if any(tag != "O" for seq in gold for tag in seq):
                assert report.micro.f1 == 1.0
            for scores in report.per_label.values():
                assert scores.f1 == 1.0

    def test_matches_brute_span_counter_on_random_corpora(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            gold = [random_tags(rng, TYPE_NAMES, int(rng.integers(1, 10)))
                    for _ in range(n)]
            pred = [random_tags(rng, TYPE_NAMES, len(g)) for g in gold]
            report = entity_level(gold, pred)
            expected = brute_span_prf(gold, pred)
            for name, (tp, fp, fn) in expected.items():
                p, r, f1 = prf(tp, fp, fn)
                scores = report.per_label[name]
                assert (scores.precision, scores.recall, scores.f1) == (p, r, f1)

    def test_sentence_boundaries_respected(self):
        gold = [["B-SIGN"], ["O"]]
        pred = [["O"], ["B-SIGN"]]
        report = entity_level(gold, pred)
        assert report.per_label["SIGN"].f1 == 0.0


class TestAverages:
    def test_weighted_is_support_weighted_mean(self):
        rng = np.random.default_rng(20)
        gold = [random_tags(rng, TYPE_NAMES, 30) for _ in range(10)]
        pred = [random_tags(rng, TYPE_NAMES, 30) for _ in range(10)]
        report = entity_level(gold, pred)
        with_support = [s for s in report.per_label.values() if s.support > 0]
        total = sum(s.support for s in with_support)
        expected_f1 = sum(s.f1 * s.support for s in with_support) / total
        assert report.weighted.f1 == pytest.approx(expected_f1, abs=1e-15)
        assert report.weighted.support == total

    def test_macro_within_per_label_bounds(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            gold = [random_tags(rng, TYPE_NAMES, 20) for _ in range(5)]
            pred = [random_tags(rng, TYPE_NAMES, 20) for _ in range(5)]
            report = entity_level(gold, pred)
            f1s = [s.f1 for s in report.per_label.values() if s.support > 0]
            if f1s:
                assert min(f1s) - 1e-12 <= report.macro.f1 <= max(f1s) + 1e-12

    def test_zero_support_label_excluded_from_macro(self):
        gold = [["B-SIGN", "O"]]
        pred = [["B-SIGN", "B-DISEASE"]]  # DISEASE has predictions, no gold
        report = entity_level(gold, pred)
        assert report.per_label["DISEASE"].support == 0
        assert report.macro.f1 == 1.0  # only SIGN counts

    def test_zero_division_gives_zero_not_nan(self):
        report = entity_level([["O"]], [["O"]])
        assert report.micro == LabelScores(0.0, 0.0, 0.0, 0)
        assert report.macro.f1 == 0.0


class TestRender:
    def fixture_report(self):
        # mirrors the published CRF baseline table shape
        per_label = {
            "DISEASE": LabelScores(0.6991, 0.4912, 0.5770, 454),
            "RAREDISEASE": LabelScores(0.8332, 0.8164, 0.8247, 1095),
            "SIGN": LabelScores(0.5313, 0.3987, 0.4556, 958),
            "SYMPTOM": LabelScores(0.7778, 0.5185, 0.6222, 54),
        }
        return EvalReport(
            "entity", per_label,
            micro=LabelScores(0.7112, 0.5963, 0.6487, 2561),
            macro=LabelScores(0.7103, 0.5562, 0.6199, 2561),
            weighted=LabelScores(0.6953, 0.5963, 0.6384, 2561),
        )

    def test_single_label_report_has_four_rows(self):
        report = entity_level([["B-SIGN"]], [["B-SIGN"]])
        table = report_render(report, "table")
        rows = table.strip().splitlines()[1:]  # drop header
        assert len(rows) == 4  # SIGN + three averages

    def test_four_decimal_fixed_point(self):
        text = report_render(self.fixture_report(), "table")
        assert "0.8247" in text
        assert "0.6487" in text

    def test_tsv_round_trip(self):
        report = self.fixture_report()
        text = report_render(report, "tsv")
        rows = list(csv.DictReader(io.StringIO(text), delimiter="\t"))
        by_label = {r["label"]: r for r in rows}
        assert float(by_label["RAREDISEASE"]["f1"]) == 0.8247
        assert int(by_label["micro-avg"]["support"]) == 2561

    def test_json_lines(self):
        text = report_render(self.fixture_report(), "json-lines")
        rows = [json.loads(line) for line in text.strip().splitlines()]
        assert rows[0]["label"] == "DISEASE"
        assert rows[-1]["label"] == "macro-weighted"

    def test_deterministic_ordering(self):
        report = self.fixture_report()
        lines = report_render(report, "tsv").strip().splitlines()
        labels = [line.split("\t")[0] for line in lines[1:]]
        assert labels == ["DISEASE", "RAREDISEASE", "SIGN", "SYMPTOM",
                          "micro-avg", "macro-avg", "macro-weighted"]

    def test_unknown_format_rejected(self):
        with pytest.raises(EvalError):
            report_render(self.fixture_report(), "xml")


class TestMetricLookup:
    def test_names(self):
        gold = [["B-SIGN", "I-SIGN"]]
        pred = [["B-SIGN", "O"]]
        report = token_level(gold, pred)
        assert report.metric("micro_f1") == report.micro.f1
        assert report.metric("micro_precision") == 1.0
        assert report.metric("macro_recall") == report.macro.recall
        assert report.metric("weighted_f1") == report.weighted.f1
        assert report.metric("B-SIGN_f1") == 1.0
        assert report.metric("accuracy") == 0.5

    def test_unknown_names_rejected(self):
        report = token_level([["O"]], [["O"]])
        with pytest.raises(EvalError):
            report.metric("nonsense")
        with pytest.raises(EvalError):
            report.metric("micro_gini")
