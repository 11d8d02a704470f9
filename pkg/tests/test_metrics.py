"""Metric oracles: hand-computed fixtures, invariants, report emission."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fabula.metrics import (
    SystemCorpus,
    diverse_verb_stats,
    emit_report,
    entities_per_plot,
    incorporation_levenshtein,
    incorporation_rate,
    inter_trigram_rep,
    intra_trigram_rep,
    lcs_length,
    levenshtein,
    vocab_token_ratio,
)
from fabula.plots import Plot, parse_plot


def lcs_reference(a: tuple, b: tuple) -> int:
    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return 0
        if a[i - 1] == b[j - 1]:
            return rec(i - 1, j - 1) + 1
        return max(rec(i - 1, j), rec(i, j - 1))

    return rec(len(a), len(b))


class TestSequenceKernels:
    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=150, deadline=None)
    def test_lcs_matches_memoized_reference(self, seed):
        rng = np.random.default_rng(seed)
        alphabet = list("abcd")
        a = [alphabet[i] for i in rng.integers(0, 4, size=int(rng.integers(0, 14)))]
        b = [alphabet[i] for i in rng.integers(0, 4, size=int(rng.integers(0, 14)))]
        assert lcs_length(a, b) == lcs_reference(tuple(a), tuple(b))

    def test_levenshtein_classic(self):
        assert levenshtein(list("kitten"), list("sitting")) == 3
        assert levenshtein([], list("ab")) == 2
        assert levenshtein(list("same"), list("same")) == 0

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=80, deadline=None)
    def test_lcs_levenshtein_meet_on_insert_delete(self, seed):
        # with substitutions forbidden, distance = |a| + |b| - 2 * LCS; the
        # general Levenshtein can only be smaller or equal
        rng = np.random.default_rng(seed)
        a = [str(i) for i in rng.integers(0, 3, size=int(rng.integers(0, 10)))]
        b = [str(i) for i in rng.integers(0, 3, size=int(rng.integers(0, 10)))]
        indel = len(a) + len(b) - 2 * lcs_length(a, b)
        assert levenshtein(a, b) <= indel


class TestVocabTokenRatio:
    def test_hand_counted_fixture(self):
        assert vocab_token_ratio([["a", "b", "a"], ["a", "c"]]) == pytest.approx(
            60.0, abs=1e-9
        )

    def test_all_identical_tokens(self):
        assert vocab_token_ratio([["x"] * 10]) == pytest.approx(10.0, abs=1e-9)

    def test_corpus_duplication_strictly_decreases(self):
        corpus = [["a", "b", "c"], ["a", "d"]]
        single = vocab_token_ratio(corpus)
        doubled = vocab_token_ratio(corpus + corpus)
        assert doubled < single
        assert doubled == pytest.approx(single / 2, abs=1e-9)

    def test_empty_corpus_absent(self):
        assert vocab_token_ratio([]) is None
        assert vocab_token_ratio([[]]) is None

    def test_order_invariance(self):
        corpus = [["a", "b"], ["c"], ["a", "c", "d"]]
        assert vocab_token_ratio(corpus) == vocab_token_ratio(list(reversed(corpus)))


class TestDiverseVerbs:
    def test_six_singleton_types(self):
        stats = diverse_verb_stats([["v1", "v2", "v3"], ["v4", "v5", "v6"]])
        assert stats.diverse_pct == pytest.approx(100.0 / 6.0, abs=1e-9)
        assert stats.unique_mean == pytest.approx(3.0, abs=1e-9)

    def test_five_or_fewer_types_is_zero(self):
        stats = diverse_verb_stats([["a", "b", "c", "d", "e", "a", "b"]])
        assert stats.diverse_pct == 0.0

    def test_skewed_counts_hand_computed(self):
        # counts: run 4, walk 3, sit 2, eat 2, fly 1, swim 1 -> top5 excludes swim
        # (fly beats swim lexicographically at count 1); 1 of 13 tokens outside
        verbs = ["run"] * 4 + ["walk"] * 3 + ["sit"] * 2 + ["eat"] * 2 + ["fly", "swim"]
        stats = diverse_verb_stats([verbs])
        assert stats.diverse_pct == pytest.approx(100.0 / 13.0, abs=1e-9)

    def test_zero_verbs_absent(self):
        stats = diverse_verb_stats([[], []])
        assert stats.diverse_pct is None

    def test_tie_break_is_lexicographic(self):
        # all counts equal: top5 is the 5 lexicographically smallest types
        stats = diverse_verb_stats([["f", "e", "d", "c", "b", "a"]])
        # "f" is the excluded type
        assert stats.diverse_pct == pytest.approx(100.0 / 6.0, abs=1e-9)


class TestTrigramRepetition:
    def test_intra_hand_enumeration(self):
        assert intra_trigram_rep([["a", "b", "c", "a", "b", "c"]]) == pytest.approx(
            25.0, abs=1e-9
        )

    def test_intra_all_distinct(self):
        assert intra_trigram_rep([["a", "b", "c", "d"]]) == 0.0

    def test_intra_quadruple_token(self):
        assert intra_trigram_rep([["a", "a", "a", "a"]]) == pytest.approx(50.0, abs=1e-9)

    def test_intra_short_texts_skipped(self):
        assert intra_trigram_rep([["a", "b"], ["a", "b", "c", "d"]]) == 0.0
        assert intra_trigram_rep([["a", "b"]]) is None

    def test_intra_zero_iff_all_distinct(self):
        corpus = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w"]]
        assert intra_trigram_rep(corpus) == 0.0

    def test_inter_identical_texts(self):
        text = ["a", "b", "c", "d"]
        assert inter_trigram_rep([text, list(text)]) == 100.0

    def test_inter_disjoint_texts(self):
        assert inter_trigram_rep([["a", "b", "c"], ["x", "y", "z"]]) == 0.0

    def test_inter_partial_overlap_hand_computed(self):
        # t1 trigrams {abc, bcd}; t2 {abc}; t3 {xyz}
        # shares: t1 1/2, t2 1/1, t3 0/1 -> mean of (50, 100, 0) = 50
        corpus = [["a", "b", "c", "d"], ["a", "b", "c"], ["x", "y", "z"]]
        assert inter_trigram_rep(corpus) == pytest.approx(50.0, abs=1e-9)


class TestEntitiesPerPlot:
    def test_repeated_entity_counted_once(self):
        plot = parse_plot("<A0> ent 0 <V> a <A1> ent 3 # <A1> ent 0 <V> b </s>")
        assert entities_per_plot([plot]) == pytest.approx(2.0, abs=1e-9)

    def test_no_entities(self):
        assert entities_per_plot([parse_plot("<V> ran </s>")]) == 0.0

    def test_reference_naive_plot_has_five(self):
        from .conftest import T1_NAIVE

        assert entities_per_plot([parse_plot(T1_NAIVE)]) == pytest.approx(5.0, abs=1e-9)

    def test_empty_list_absent(self):
        assert entities_per_plot([]) is None


class TestIncorporation:
    def test_subsequence_is_hundred(self):
        plot = parse_plot("<A1> the red door <V> opened </s>")
        story = "then the big red door slowly opened wide".split()
        assert incorporation_rate(plot, story, "words") == pytest.approx(100.0, abs=1e-9)

    def test_reversed_story_hand_lcs(self):
        plot = parse_plot("<A1> a b c <V> v </s>")
        assert incorporation_rate(plot, ["c", "b", "a"], "words") == pytest.approx(
            100.0 / 3.0, abs=1e-9
        )

    def test_verb_mode_uses_verbs(self):
        plot = parse_plot("<A0> x <V> ran </s> <A1> y <V> hid </s>")
        story = "he ran away and then he hid".split()
        assert incorporation_rate(plot, story, "verbs") == pytest.approx(100.0, abs=1e-9)

    def test_case_folded(self):
        plot = parse_plot("<A1> The Door <V> Opened </s>")
        assert incorporation_rate(plot, ["the", "door"], "words") == pytest.approx(
            100.0, abs=1e-9
        )

    def test_empty_plot_sequence_absent(self):
        plot = parse_plot("<V> ran </s>")
        assert incorporation_rate(plot, ["ran"], "words") is None
        assert incorporation_rate(Plot(()), ["x"], "verbs") is None

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            incorporation_rate(parse_plot("<A1> x <V> v </s>"), ["x"], "letters")

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_monotone_under_story_deletion(self, seed):
        rng = np.random.default_rng(seed)
        plot = parse_plot("<A0> a b <V> v <A1> c d e </s>")
        story = [str(t) for t in rng.choice(["a", "b", "c", "d", "e", "x"], size=12)]
        full = incorporation_rate(plot, story, "words")
        drop = int(rng.integers(len(story)))
        reduced = incorporation_rate(plot, story[:drop] + story[drop + 1 :], "words")
        assert reduced <= full + 1e-9

    def test_levenshtein_aux_value(self):
        plot = parse_plot("<A1> a b c <V> v </s>")
        assert incorporation_levenshtein(plot, ["a", "b", "c"], "words") == 0
        assert incorporation_levenshtein(plot, ["a", "x", "c"], "words") == 1


class TestEmitReport:
    def test_empty_systems_error(self):
        with pytest.raises(ValueError):
            emit_report({})

    def test_single_system_matches_individual_metrics(self):
        texts = [["a", "b", "c", "a", "b", "c"], ["a", "d", "e", "f"]]
        plots = [
            parse_plot("<A0> ent 0 <V> ran <A1> a b </s>"),
            parse_plot("<A1> ent 1 <V> hid </s>"),
        ]
        report = emit_report({"sys": SystemCorpus(texts=texts, plots=plots)})
        row = report.rows["sys"]
        assert row["vocab_token_ratio"] == pytest.approx(vocab_token_ratio(texts), abs=1e-12)
        assert row["intra_trigram_rep"] == pytest.approx(intra_trigram_rep(texts), abs=1e-12)
        assert row["entities_per_plot"] == pytest.approx(1.0, abs=1e-12)
        assert row["avg_tokens"] == pytest.approx(5.0, abs=1e-12)
        expected_word = np.mean(
            [incorporation_rate(p, t, "words") for p, t in zip(plots, texts)]
        )
        assert row["word_incorp_pct"] == pytest.approx(expected_word, abs=1e-12)

    def test_plot_only_system_skips_story_columns(self):
        plots = [parse_plot("<A0> ent 0 <V> ran </s>")]
        report = emit_report({"p": SystemCorpus(plots=plots)})
        row = report.rows["p"]
        assert row["word_incorp_pct"] is None
        assert row["vocab_token_ratio"] is not None
        assert row["entities_per_plot"] == 1.0

    def test_text_only_system_skips_plot_columns(self):
        report = emit_report({"t": SystemCorpus(texts=[["a", "b", "c"]])})
        row = report.rows["t"]
        assert row["entities_per_plot"] is None
        assert row["word_incorp_pct"] is None

    def test_verb_lexicon_controls_story_verbs(self):
        texts = [["he", "ran", "and", "ran"]]
        report = emit_report(
            {"s": SystemCorpus(texts=texts)}, verb_lexicon=frozenset({"ran"})
        )
        assert report.rows["s"]["unique_verbs"] == 1.0

    def test_tsv_layout_and_header_notes(self, tmp_path):
        report = emit_report({"x": SystemCorpus(texts=[["a", "b", "c"]])})
        tsv = report.to_tsv()
        assert tsv.startswith("#")
        header = [l for l in tsv.splitlines() if not l.startswith("#")][0]
        assert header.split("\t")[0] == "system"
        tsv_path, json_path = tmp_path / "r.tsv", tmp_path / "r.json"
        report.write(tsv_path, json_path)
        assert tsv_path.read_text(encoding="utf-8") == tsv
        import json

        assert "systems" in json.loads(json_path.read_text(encoding="utf-8"))
