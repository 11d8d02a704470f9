"""Rescored decoding: score arithmetic, naive reduction, steering, traces."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fabula.decoder import (
    ASPECT_ORDER,
    DecodeTrace,
    MixtureWeights,
    combined_score,
    detokenize,
    generate_plot,
    generate_story,
    rescored_step,
)
from fabula.lm import SamplerConfig, train_lm
from fabula.vocab import EOS

SENTINEL = "beacon"


class ConstantScorer:
    def __init__(self, value: float):
        self.value = value

    def score(self, context: str, candidate: str) -> float:
        return self.value


class SentinelScorer:
    """1.0 whenever the candidate prefix ends with the sentinel token."""

    def score(self, context: str, candidate: str) -> float:
        return 1.0 if candidate.split()[-1:] == [SENTINEL] else 0.0


def toy_lm(seed: int = 0, with_sentinel: bool = True):
    rng = np.random.default_rng(seed)
    vocab = ["w1", "w2", "w3", "w4", "w5", "w6"] + ([SENTINEL] if with_sentinel else [])
    pairs = []
    for _ in range(40):
        cond = " ".join(rng.choice(["ask", "tell", "sing"], size=2))
        tgt = " ".join(rng.choice(vocab, size=int(rng.integers(4, 10))))
        pairs.append((cond, tgt))
    return train_lm(pairs, order=2)


class TestMixtureWeights:
    def test_fixed_order(self):
        assert ASPECT_ORDER == ("inter", "intra", "verb", "entity", "relevance")
        w = MixtureWeights(inter=1, intra=2, verb=3, entity=4, relevance=5)
        assert list(w.as_array()) == [1, 2, 3, 4, 5]

    def test_round_trip_file(self, tmp_path):
        w = MixtureWeights(inter=0.5, relevance=-1.25)
        path = tmp_path / "w.json"
        w.save(path)
        assert MixtureWeights.load(path) == w

    def test_unknown_aspect_rejected(self):
        with pytest.raises(ValueError):
            MixtureWeights.from_dict({"sparkle": 1.0})


class TestCombinedScore:
    def test_zero_weights_equal_log_prob_exactly(self):
        lm = toy_lm()
        scorers = {"a": ConstantScorer(0.7), "b": ConstantScorer(0.1)}
        weights = {"a": 0.0, "b": 0.0}
        s = combined_score(lm, scorers, weights, "ask tell", "w1 w2")
        assert s == lm.log_prob("ask tell", "w1 w2", include_eos=False)

    def test_constant_scorer_adds_weight_times_value(self):
        lm = toy_lm()
        scorers = {"a": ConstantScorer(1.0)}
        base = lm.log_prob("ask tell", "w1", include_eos=False)
        s = combined_score(lm, scorers, {"a": 2.0}, "ask tell", "w1")
        assert s == pytest.approx(base + 2.0, abs=1e-12)

    def test_two_scorers_arithmetic(self):
        lm = toy_lm()
        scorers = {"a": ConstantScorer(0.5), "b": ConstantScorer(0.25)}
        base = lm.log_prob("ask tell", "w1", include_eos=False)
        s = combined_score(lm, scorers, {"a": 1.0, "b": 2.0}, "ask tell", "w1")
        assert s == pytest.approx(base + 1.0, abs=1e-12)

    def test_weight_scorer_mismatch_raises(self):
        lm = toy_lm()
        with pytest.raises(ValueError):
            combined_score(lm, {"a": ConstantScorer(1)}, {"b": 1.0}, "x", "w1")
        with pytest.raises(ValueError):
            combined_score(
                lm, {"a": ConstantScorer(1)}, {"a": 1.0, "b": 2.0}, "x", "w1"
            )


class TestReduction:
    def test_zero_weights_identical_to_naive_sampler(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer(), "c": ConstantScorer(0.9)}
        weights = {"s": 0.0, "c": 0.0}
        for seed in range(25):
            cfg = SamplerConfig(k=5, temperature=0.7, max_len=40, seed=seed)
            rescored, _trace = generate_plot(lm, scorers, weights, "ask tell", cfg)
            naive = lm.sample_sequence("ask tell", cfg)
            assert rescored == naive

    def test_literal_cost_form_differs(self):
        lm = toy_lm()
        scorers = {"s": ConstantScorer(0.5)}
        cfg = SamplerConfig(k=5, temperature=0.7, max_len=40, seed=11)
        default, _ = generate_plot(lm, scorers, {"s": 0.0}, "ask tell", cfg)
        literal, _ = generate_plot(
            lm, scorers, {"s": 0.0}, "ask tell", cfg, literal_negative_logprob=True
        )
        assert default != literal


class TestRescoredStep:
    def test_chosen_among_candidates(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        token, record = rescored_step(
            lm, scorers, {"s": 1.0}, "ask tell", "w1", SamplerConfig(seed=4)
        )
        assert token == record.chosen
        assert record.chosen in record.candidates
        assert record.chosen_index == record.candidates.index(record.chosen)

    def test_sentinel_scorer_with_large_weight_wins(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        picked = 0
        present = 0
        for seed in range(30):
            token, record = rescored_step(
                lm, scorers, {"s": 50.0}, "ask tell", "w1 w2", SamplerConfig(seed=seed)
            )
            if SENTINEL in record.candidates:
                present += 1
                picked += token == SENTINEL
        assert present > 0
        assert picked == present

    def test_aspect_scores_recorded_for_nonzero_weights(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer(), "z": ConstantScorer(0.3)}
        _token, record = rescored_step(
            lm, scorers, {"s": 1.0, "z": 0.0}, "ask", "w1", SamplerConfig(seed=0)
        )
        assert "s" in record.aspect_scores
        assert "z" not in record.aspect_scores
        assert len(record.aspect_scores["s"]) == len(record.candidates)


class TestGeneratePlot:
    def test_steering_increases_sentinel_frequency(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        gains = 0
        comparisons = 0
        for seed in range(40):
            cfg = SamplerConfig(k=5, temperature=0.7, max_len=30, seed=seed)
            steered, _ = generate_plot(lm, scorers, {"s": 50.0}, "ask tell", cfg)
            naive, _ = generate_plot(lm, scorers, {"s": 0.0}, "ask tell", cfg)
            a = steered.split().count(SENTINEL)
            b = naive.split().count(SENTINEL)
            if a != b:
                comparisons += 1
                gains += a > b
        assert comparisons > 20
        assert gains / comparisons > 0.95

    def test_termination_and_trace_shape(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        cfg = SamplerConfig(k=3, temperature=0.7, max_len=15, seed=2)
        text, trace = generate_plot(lm, scorers, {"s": 1.0}, "ask tell", cfg)
        assert len(text.split()) <= 15
        for step in trace.steps:
            assert step.chosen in step.candidates
            assert len(step.base_logps) == len(step.candidates)
        if trace.ended_with_eos:
            assert trace.steps[-1].chosen == EOS

    def test_trace_base_logps_sum_to_log_prob(self):
        lm = toy_lm()
        scorers = {"s": ConstantScorer(0.5)}
        cfg = SamplerConfig(k=4, temperature=0.7, max_len=25, seed=7)
        text, trace = generate_plot(lm, scorers, {"s": 0.25}, "sing sing", cfg)
        chosen_sum = sum(s.base_logps[s.chosen_index] for s in trace.steps)
        expected = lm.log_prob("sing sing", text, include_eos=trace.ended_with_eos)
        assert chosen_sum == pytest.approx(expected, abs=1e-9)

    def test_empty_prompt_terminates(self):
        lm = toy_lm()
        text, _ = generate_plot(
            lm, {}, {}, "", SamplerConfig(k=3, temperature=0.7, max_len=12, seed=1)
        )
        assert len(text.split()) <= 12

    def test_seeded_determinism(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        cfg = SamplerConfig(k=5, temperature=0.7, max_len=30, seed=9)
        a, _ = generate_plot(lm, scorers, {"s": 2.0}, "ask", cfg)
        b, _ = generate_plot(lm, scorers, {"s": 2.0}, "ask", cfg)
        assert a == b

    def test_monotone_influence_of_weight(self):
        lm = toy_lm()
        scorers = {"s": SentinelScorer()}
        counts = []
        for weight in (0.0, 5.0, 50.0):
            total = 0
            for seed in range(20):
                cfg = SamplerConfig(k=5, temperature=0.7, max_len=30, seed=seed)
                text, _ = generate_plot(lm, scorers, {"s": weight}, "ask tell", cfg)
                total += text.split().count(SENTINEL)
            counts.append(total)
        assert counts[0] <= counts[1] <= counts[2]
        assert counts[0] < counts[2]


class TestGenerateStory:
    def test_memorized_realization(self):
        pairs = [("a prompt <EOT> <V> ran </s>", "he ran fast")] * 6
        story_lm = train_lm(pairs, order=4)
        cfg = SamplerConfig(k=1, temperature=0.7, max_len=20, seed=0)
        story = generate_story(story_lm, "a prompt", "<V> ran </s>", cfg)
        assert story == "he ran fast"

    def test_empty_plot_still_terminates(self):
        pairs = [("p <EOT>", "something short")] * 3
        story_lm = train_lm(pairs, order=3)
        cfg = SamplerConfig(k=2, temperature=0.7, max_len=10, seed=1)
        story = generate_story(story_lm, "p", "", cfg)
        assert len(story.split()) <= 10

    def test_seeded_determinism(self):
        story_lm = train_lm([("p <EOT> <V> x </s>", "a b c d e")] * 3, order=3)
        cfg = SamplerConfig(k=3, temperature=0.7, max_len=15, seed=5)
        a = generate_story(story_lm, "p", "<V> x </s>", cfg)
        b = generate_story(story_lm, "p", "<V> x </s>", cfg)
        assert a == b


class TestDetokenize:
    def test_paragraph_tokens_become_newlines(self):
        assert detokenize("hello world <P> next line") == "hello world\nnext line"

    def test_specials_stripped(self):
        assert detokenize("<BOS> a <EOT> b <EOS> <UNK>") == "a b"

    def test_trace_jsonl(self, tmp_path):
        lm = toy_lm()
        cfg = SamplerConfig(k=3, temperature=0.7, max_len=10, seed=3)
        _text, trace = generate_plot(lm, {"s": SentinelScorer()}, {"s": 1.0}, "ask", cfg)
        path = tmp_path / "trace.jsonl"
        trace.write_jsonl(path)
        import json

        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == len(trace.steps)
        assert all("candidates" in row and "chosen" in row for row in rows)
