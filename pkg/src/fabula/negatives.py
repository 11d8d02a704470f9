"""Positive/negative training pairs for the five rescorer aspects.

Event aspects (``inter``, ``intra``, ``verb``) pair a gold plot with a
shuffled copy of itself; ``entity`` pairs the true entity id at some plot
position against a sampled wrong one; ``relevance`` pairs a plot's own
continuation against another record's.  All generators are deterministic
given their seed, and emitted negatives always differ from positives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fabula.plots import Event, Plot, Sentence, parse_plot, serialize_plot
from fabula.vocab import join_with_eot

ASPECTS = ("inter", "intra", "verb", "entity", "relevance")
EVENT_ASPECTS = ("inter", "intra", "verb")

_MAX_RESAMPLE = 32


class NoNegativePossible(Exception):
    """The record admits no negative for the requested aspect."""


@dataclass(frozen=True)
class RescorerExample:
    aspect: str
    context: str
    positive: str
    negative: str


def _resample(make, original: str, what: str):
    for _ in range(_MAX_RESAMPLE):
        candidate = make()
        if serialize_plot(candidate) != original:
            return candidate
    raise NoNegativePossible(f"no differing {what} found in {_MAX_RESAMPLE} attempts")


def inter_shuffle(plot: Plot, seed: int) -> Plot:
    """Permute whole sentences, keeping each sentence's events intact."""
    if len(plot.sentences) < 2:
        raise NoNegativePossible("need at least 2 sentences to shuffle")
    rng = np.random.default_rng(seed)
    original = serialize_plot(plot)

    def make() -> Plot:
        order = rng.permutation(len(plot.sentences))
        return Plot(tuple(plot.sentences[i] for i in order), plot.trailing_sep)

    return _resample(make, original, "sentence permutation")


def intra_shuffle(plot: Plot, seed: int, single_sentence: bool = False) -> Plot:
    """Permute events inside sentences; sentence order is unchanged.

    By default every sentence with two or more events is permuted; with
    ``single_sentence`` one qualifying sentence is picked per attempt.
    """
    qualifying = [i for i, s in enumerate(plot.sentences) if len(s.events) >= 2]
    if not qualifying:
        raise NoNegativePossible("no sentence has 2 or more events")
    rng = np.random.default_rng(seed)
    original = serialize_plot(plot)

    def make() -> Plot:
        targets = {int(rng.choice(qualifying))} if single_sentence else set(qualifying)
        sentences = []
        for i, sentence in enumerate(plot.sentences):
            if i in targets:
                order = rng.permutation(len(sentence.events))
                sentences.append(Sentence(tuple(sentence.events[j] for j in order)))
            else:
                sentences.append(sentence)
        return Plot(tuple(sentences), plot.trailing_sep)

    return _resample(make, original, "event permutation")


def _verb_slot_positions(sentence: Sentence) -> list[tuple[int, int]]:
    return [
        (ei, si)
        for ei, event in enumerate(sentence.events)
        for si, (role, _text) in enumerate(event.slots)
        if role == "V"
    ]


def verb_shuffle(plot: Plot, seed: int) -> Plot:
    """Redistribute V-slot texts within each sentence; nothing else moves."""
    if not any(len(_verb_slot_positions(s)) >= 2 for s in plot.sentences):
        raise NoNegativePossible("no sentence has 2 or more verbs")
    rng = np.random.default_rng(seed)
    original = serialize_plot(plot)

    def make() -> Plot:
        sentences = []
        for sentence in plot.sentences:
            positions = _verb_slot_positions(sentence)
            if len(positions) < 2:
                sentences.append(sentence)
                continue
            texts = [sentence.events[ei].slots[si][1] for ei, si in positions]
            order = rng.permutation(len(texts))
            replacement = {positions[j]: texts[order[j]] for j in range(len(texts))}
            events = []
            for ei, event in enumerate(sentence.events):
                slots = tuple(
                    (role, replacement.get((ei, si), text))
                    for si, (role, text) in enumerate(event.slots)
                )
                events.append(Event(slots, event.lead))
            sentences.append(Sentence(tuple(events)))
        return Plot(tuple(sentences), plot.trailing_sep)

    return _resample(make, original, "verb permutation")


def make_entity_examples(prompt: str, plot: Plot, seed: int) -> list[RescorerExample]:
    """One example per entity occurrence: plot prefix up to the ``ent`` token.

    The negative id is sampled uniformly from 0..max_id+1 minus the true id;
    the extra id admits "introduce a new entity" as a candidate.  A plot
    without entities yields an empty list.
    """
    tokens = serialize_plot(plot).split()
    occurrences = [
        (i, int(tokens[i + 1]))
        for i in range(len(tokens) - 1)
        if tokens[i] == "ent" and tokens[i + 1].isdigit()
    ]
    if not occurrences:
        return []
    max_id = max(eid for _i, eid in occurrences)
    rng = np.random.default_rng(seed)
    examples = []
    for i, true_id in occurrences:
        candidates = [c for c in range(max_id + 2) if c != true_id]
        negative = candidates[int(rng.integers(len(candidates)))]
        context = join_with_eot(prompt, " ".join(tokens[: i + 1]))
        examples.append(RescorerExample("entity", context, str(true_id), str(negative)))
    return examples


def _split_first_sentence(plot_tokens: list[str]) -> tuple[list[str], list[str]]:
    for i, tok in enumerate(plot_tokens):
        if tok == "</s>":
            return plot_tokens[: i + 1], plot_tokens[i + 1 :]
    return plot_tokens, []


def make_relevance_pairs(
    corpus: Sequence[tuple[str, str]], seed: int
) -> list[RescorerExample]:
    """Context is prompt plus one plot sentence; positives continue it.

    The negative is a different record's plot remainder (never the same
    index).  Records whose remainder is empty or indistinguishable from
    every sampled negative are skipped.
    """
    if len(corpus) < 2:
        raise NoNegativePossible("need at least 2 records for relevance pairs")
    n = len(corpus)
    examples = []
    for idx, (prompt, plot_str) in enumerate(corpus):
        rng = np.random.default_rng(np.uint64(seed) ^ np.uint64(idx))
        first, rest = _split_first_sentence(plot_str.split())
        positive = " ".join(rest)
        if not positive:
            continue
        negative = None
        for _ in range(_MAX_RESAMPLE):
            draw = int(rng.integers(n - 1))
            other = draw if draw < idx else draw + 1
            _f, other_rest = _split_first_sentence(corpus[other][1].split())
            candidate = " ".join(other_rest)
            if candidate and candidate != positive:
                negative = candidate
                break
        if negative is None:
            continue
        context = join_with_eot(prompt, " ".join(first))
        examples.append(RescorerExample("relevance", context, positive, negative))
    return examples


@dataclass
class TrainingSet:
    aspect: str
    examples: list[RescorerExample]
    skipped: int


def build_training_set(
    aspect: str,
    corpus: Sequence[tuple[str, str]],
    seed: int,
    single_sentence: bool = False,
) -> TrainingSet:
    """Build all examples for one aspect over (prompt, plot string) records.

    Records that admit no negative are skipped and counted.  Per-record
    seeds are derived as ``seed XOR record index`` so results do not depend
    on scheduling.
    """
    if aspect not in ASPECTS:
        raise ValueError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
    examples: list[RescorerExample] = []
    skipped = 0
    if aspect in EVENT_ASPECTS:
        shuffler = {"inter": inter_shuffle, "intra": intra_shuffle, "verb": verb_shuffle}[aspect]
        for idx, (prompt, plot_str) in enumerate(corpus):
            record_seed = int(np.uint64(seed) ^ np.uint64(idx))
            try:
                if aspect == "intra":
                    negative = intra_shuffle(parse_plot(plot_str), record_seed, single_sentence)
                else:
                    negative = shuffler(parse_plot(plot_str), record_seed)
            except NoNegativePossible:
                skipped += 1
                continue
            examples.append(
                RescorerExample(aspect, prompt, plot_str, serialize_plot(negative))
            )
    elif aspect == "entity":
        for idx, (prompt, plot_str) in enumerate(corpus):
            record_seed = int(np.uint64(seed) ^ np.uint64(idx))
            produced = make_entity_examples(prompt, parse_plot(plot_str), record_seed)
            if not produced:
                skipped += 1
            examples.extend(produced)
    else:
        if len(corpus) < 2:
            raise NoNegativePossible("need at least 2 records for relevance pairs")
        examples = make_relevance_pairs(corpus, seed)
        skipped = len(corpus) - len(examples)
    return TrainingSet(aspect, examples, skipped)


def write_examples_jsonl(path: str | Path, examples: Iterable[RescorerExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "aspect": ex.aspect,
                        "context": ex.context,
                        "positive": ex.positive,
                        "negative": ex.negative,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def write_examples_tsv(path: str | Path, examples: Iterable[RescorerExample]) -> None:
    """Tab-separated mirror of the JSONL output, for manual inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("aspect\tcontext\tpositive\tnegative\n")
        for ex in examples:
            row = "\t".join(
                field.replace("\t", " ") for field in (ex.aspect, ex.context, ex.positive, ex.negative)
            )
            fh.write(row + "\n")


def read_examples_jsonl(path: str | Path) -> list[RescorerExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            examples.append(
                RescorerExample(d["aspect"], d["context"], d["positive"], d["negative"])
            )
    return examples
