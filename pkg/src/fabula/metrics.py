"""Automatic plot and story metrics over corpora, with report emission.

Conventions documented once here and in the report header:

* ``vocab_token_ratio`` pools the whole corpus: 100 * distinct types /
  total tokens, one number per corpus for plots and stories alike.
* ``inter_trigram_rep`` is the mean, over texts, of the share of a text's
  distinct trigrams that also occur in at least one other text.
* Incorporation is ordered: 100 * LCS(plot words, story tokens) / plot
  words, case-folded; the plain Levenshtein distance is reported alongside.

Metrics that are undefined for a corpus (no verbs, no trigrams, empty plot
word sequence) are reported as absent (``None``) rather than zero.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from fabula.plots import Plot, plot_entities, plot_verbs, plot_words, serialize_plot

Tokens = Sequence[str]


def lcs_length(a: Tokens, b: Tokens) -> int:
    """Longest common subsequence length via a row-vectorized DP."""
    if not a or not b:
        return 0
    b_arr = np.array(list(b), dtype=object)
    prev = np.zeros(len(b) + 1, dtype=np.int64)
    for x in a:
        match = prev[:-1] + (b_arr == x)
        cur = np.maximum(prev[1:], match)
        np.maximum.accumulate(cur, out=cur)
        prev = np.concatenate(([0], cur))
    return int(prev[-1])


def levenshtein(a: Tokens, b: Tokens) -> int:
    """Classic edit distance (insert, delete, substitute) over tokens."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def vocab_token_ratio(corpus: Sequence[Tokens]) -> float | None:
    """100 * distinct types / total tokens, pooled over the whole corpus."""
    total = sum(len(t) for t in corpus)
    if total == 0:
        return None
    types = len({tok for text in corpus for tok in text})
    return 100.0 * types / total


@dataclass
class VerbStats:
    diverse_pct: float | None
    unique_mean: float | None


def diverse_verb_stats(verb_lists: Sequence[Tokens]) -> VerbStats:
    """Share of verb tokens outside the corpus's top-5 verb types, plus the
    mean number of distinct verb types per text.

    The top 5 is by frequency with ties broken lexicographically.
    """
    counts: Counter[str] = Counter()
    for verbs in verb_lists:
        counts.update(verbs)
    total = sum(counts.values())
    unique_mean = (
        sum(len(set(verbs)) for verbs in verb_lists) / len(verb_lists) if verb_lists else None
    )
    if total == 0:
        return VerbStats(None, unique_mean)
    top5 = {tok for tok, _c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]}
    outside = sum(c for tok, c in counts.items() if tok not in top5)
    return VerbStats(100.0 * outside / total, unique_mean)


def _trigrams(tokens: Tokens) -> list[tuple[str, str, str]]:
    return [tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)]


def intra_trigram_rep(corpus: Sequence[Tokens]) -> float | None:
    """Mean per-text repeated-trigram share; texts under 3 tokens are skipped."""
    values = []
    for text in corpus:
        grams = _trigrams(text)
        if not grams:
            continue
        values.append(100.0 * (1.0 - len(set(grams)) / len(grams)))
    return sum(values) / len(values) if values else None


def inter_trigram_rep(corpus: Sequence[Tokens]) -> float | None:
    """Mean per-text share of distinct trigrams seen in some other text."""
    gram_sets = [set(_trigrams(text)) for text in corpus]
    counts: Counter[tuple[str, str, str]] = Counter()
    for grams in gram_sets:
        counts.update(grams)
    values = []
    for grams in gram_sets:
        if not grams:
            continue
        shared = sum(1 for g in grams if counts[g] > 1)
        values.append(100.0 * shared / len(grams))
    return sum(values) / len(values) if values else None


def entities_per_plot(plots: Sequence[Plot]) -> float | None:
    """Mean number of distinct entity ids per plot."""
    if not plots:
        return None
    return sum(len(plot_entities(p)) for p in plots) / len(plots)


def incorporation_rate(plot: Plot, story_tokens: Tokens, mode: str = "words") -> float | None:
    """Ordered incorporation: 100 * LCS(plot sequence, story) / plot sequence.

    ``mode`` selects plot words (verbs excluded) or plot verbs; both sides
    are case-folded.  Undefined (None) when the plot sequence is empty.
    """
    if mode == "words":
        seq = plot_words(plot, include_verbs=False)
    elif mode == "verbs":
        seq = [tok for verb in plot_verbs(plot) for tok in verb.split()]
    else:
        raise ValueError(f"unknown incorporation mode {mode!r}")
    seq = [t.casefold() for t in seq]
    if not seq:
        return None
    story = [t.casefold() for t in story_tokens]
    return 100.0 * lcs_length(seq, story) / len(seq)


def incorporation_levenshtein(plot: Plot, story_tokens: Tokens, mode: str = "words") -> int | None:
    """Auxiliary raw edit distance between the plot sequence and the story."""
    if mode == "words":
        seq = plot_words(plot, include_verbs=False)
    else:
        seq = [tok for verb in plot_verbs(plot) for tok in verb.split()]
    seq = [t.casefold() for t in seq]
    if not seq:
        return None
    return levenshtein(seq, [t.casefold() for t in story_tokens])


@dataclass
class SystemCorpus:
    """One named system: token lists for texts and/or parsed plots.

    When both are present and aligned (equal length), incorporation rates
    are computed pairwise.  Verb identification for texts uses the supplied
    lexicon, falling back to each text's own plot verbs when aligned, else
    to the union of the system's plot verbs.
    """

    texts: list[list[str]] | None = None
    plots: list[Plot] | None = None


REPORT_COLUMNS = (
    "vocab_token_ratio",
    "unique_verbs",
    "diverse_verb_pct",
    "intra_trigram_rep",
    "inter_trigram_rep",
    "entities_per_plot",
    "avg_tokens",
    "word_incorp_pct",
    "verb_incorp_pct",
    "word_lev_dist",
    "verb_lev_dist",
)

_REPORT_HEADER = (
    "# vocab_token_ratio: corpus-pooled 100 * types / tokens\n"
    "# inter_trigram_rep: mean share of a text's distinct trigrams found in another text\n"
    "# incorporation: ordered, 100 * LCS(plot sequence, story) / plot sequence length\n"
)


@dataclass
class MetricReport:
    rows: dict[str, dict[str, float | None]]

    def to_tsv(self) -> str:
        lines = [_REPORT_HEADER + "system\t" + "\t".join(REPORT_COLUMNS)]
        for system, metrics in self.rows.items():
            cells = [system]
            for col in REPORT_COLUMNS:
                value = metrics.get(col)
                cells.append("-" if value is None else f"{value:.4f}")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {"systems": self.rows}

    def write(self, tsv_path: str | Path, json_path: str | Path) -> None:
        Path(tsv_path).write_text(self.to_tsv(), encoding="utf-8")
        Path(json_path).write_text(
            json.dumps(self.to_json_dict(), sort_keys=True, indent=2), encoding="utf-8"
        )


def _mean(values: Iterable[float]) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _text_verbs(
    texts: Sequence[Tokens], plots: Sequence[Plot] | None, lexicon: frozenset[str] | None
) -> list[list[str]]:
    if lexicon is not None:
        folded = {v.casefold() for v in lexicon}
        return [[t for t in text if t.casefold() in folded] for text in texts]
    if plots is None:
        return [[] for _ in texts]
    if len(plots) == len(texts):
        per_text = []
        for text, plot in zip(texts, plots):
            verbs = {tok.casefold() for verb in plot_verbs(plot) for tok in verb.split()}
            per_text.append([t for t in text if t.casefold() in verbs])
        return per_text
    union = {tok.casefold() for p in plots for verb in plot_verbs(p) for tok in verb.split()}
    return [[t for t in text if t.casefold() in union] for text in texts]


def emit_report(
    systems: Mapping[str, SystemCorpus], verb_lexicon: frozenset[str] | None = None
) -> MetricReport:
    """Compute every applicable metric per system; absent data yields absent columns."""
    if not systems:
        raise ValueError("no systems to report on")
    rows: dict[str, dict[str, float | None]] = {}
    for name, corpus in systems.items():
        row: dict[str, float | None] = {col: None for col in REPORT_COLUMNS}
        texts = corpus.texts
        plots = corpus.plots
        if texts is None and plots is not None:
            plot_streams = [serialize_plot(p).split() for p in plots]
            row["vocab_token_ratio"] = vocab_token_ratio(plot_streams)
            row["avg_tokens"] = _mean([float(len(t)) for t in plot_streams])
            verb_lists = [plot_verbs(p) for p in plots]
            stats = diverse_verb_stats(verb_lists)
            row["diverse_verb_pct"] = stats.diverse_pct
            row["unique_verbs"] = stats.unique_mean
            row["intra_trigram_rep"] = intra_trigram_rep(plot_streams)
            row["inter_trigram_rep"] = inter_trigram_rep(plot_streams)
        elif texts is not None:
            row["vocab_token_ratio"] = vocab_token_ratio(texts)
            row["avg_tokens"] = _mean([float(len(t)) for t in texts])
            verb_lists = _text_verbs(texts, plots, verb_lexicon)
            stats = diverse_verb_stats(verb_lists)
            row["diverse_verb_pct"] = stats.diverse_pct
            row["unique_verbs"] = stats.unique_mean
            row["intra_trigram_rep"] = intra_trigram_rep(texts)
            row["inter_trigram_rep"] = inter_trigram_rep(texts)
        if plots is not None:
            row["entities_per_plot"] = entities_per_plot(plots)
        if texts is not None and plots is not None and len(texts) == len(plots):
            row["word_incorp_pct"] = _mean(
                [incorporation_rate(p, t, "words") for p, t in zip(plots, texts)]
            )
            row["verb_incorp_pct"] = _mean(
                [incorporation_rate(p, t, "verbs") for p, t in zip(plots, texts)]
            )
            row["word_lev_dist"] = _mean(
                [incorporation_levenshtein(p, t, "words") for p, t in zip(plots, texts)]
            )
            row["verb_lev_dist"] = _mean(
                [incorporation_levenshtein(p, t, "verbs") for p, t in zip(plots, texts)]
            )
        rows[name] = row
    return MetricReport(rows)
