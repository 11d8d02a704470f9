"""Silver plot extraction from pre-annotated stories, plus dataset plumbing.

Input records carry pre-computed SRL frames and coreference clusters; no
annotation models run here.  Extraction compresses each story to a plot:
stop-verb frames are dropped, only ARG0/ARG1/ARG2 survive (as A0/A1/A2),
and coreferent mention spans are replaced by indexed ``ent k`` tokens.

The JSON-lines schema (one object per line) is::

    {
      "prompt": str,
      "story_tokens": [str, ...],
      "frames": [{"verb_span": [s, e], "verb_lemma": str,
                  "args": {"ARG0": [s, e], ...}}, ...],
      "coref_clusters": [[cluster_id, [[s, e], ...]], ...],
      "sentence_boundaries": [int, ...],      # exclusive end offsets
      "story_id": str                          # optional
    }

All spans are half-open ``[start, end)`` token index pairs.  Sentence
boundaries are strictly increasing end offsets; tokens past the last
boundary form an implicit final sentence.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from fabula.plots import Event, Plot, STOP_VERBS, Sentence

Span = tuple[int, int]

KEPT_ARGS = {"ARG0": "A0", "ARG1": "A1", "ARG2": "A2"}

DEFAULT_STOPWORDS = frozenset(
    """a an the and or but if then than this that these those of in on at to
    from by for with about into over after before under again once here there
    all any both each few more most other some such no nor not only own same
    so too very s t can will just don should now is was were are be been am
    do does did have has had having he she it they them his her its their i
    you we me my your our us what which who whom when where why how as up
    down out off""".split()
)


class ExtractionError(Exception):
    """Malformed annotation input; carries the offending story id."""

    def __init__(self, story_id: str, message: str):
        super().__init__(f"story {story_id!r}: {message}")
        self.story_id = story_id


@dataclass
class SrlFrame:
    verb_span: Span
    verb_lemma: str
    args: dict[str, Span] = field(default_factory=dict)


@dataclass
class AnnotatedStory:
    prompt: str
    story_tokens: list[str]
    frames: list[SrlFrame]
    coref_clusters: list[tuple[int, list[Span]]]
    sentence_boundaries: list[int]
    story_id: str = ""

    def validate(self) -> None:
        n = len(self.story_tokens)
        for frame in self.frames:
            self._check_span(frame.verb_span, n, "verb span")
            for name, span in frame.args.items():
                self._check_span(span, n, f"argument {name} span")
        for cid, spans in self.coref_clusters:
            for span in spans:
                self._check_span(span, n, f"cluster {cid} mention span")
        prev = 0
        for b in self.sentence_boundaries:
            if b <= prev and not (b == 0 and prev == 0):
                raise ExtractionError(
                    self.story_id, f"sentence boundaries not strictly increasing at {b}"
                )
            if b > n:
                raise ExtractionError(self.story_id, f"sentence boundary {b} out of bounds")
            prev = b

    def _check_span(self, span: Span, n: int, what: str) -> None:
        s, e = span
        if not (0 <= s <= e <= n):
            raise ExtractionError(self.story_id, f"{what} ({s}, {e}) out of bounds for {n} tokens")


def _frame_from_dict(d: dict, story_id: str) -> SrlFrame:
    try:
        verb_span = (int(d["verb_span"][0]), int(d["verb_span"][1]))
        args = {str(k): (int(v[0]), int(v[1])) for k, v in d.get("args", {}).items()}
        return SrlFrame(verb_span=verb_span, verb_lemma=str(d["verb_lemma"]), args=args)
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ExtractionError(story_id, f"bad frame record: {exc}") from exc


def story_from_dict(d: dict, default_id: str = "") -> AnnotatedStory:
    story_id = str(d.get("story_id", default_id))
    try:
        story = AnnotatedStory(
            prompt=str(d["prompt"]),
            story_tokens=[str(t) for t in d["story_tokens"]],
            frames=[_frame_from_dict(f, story_id) for f in d.get("frames", [])],
            coref_clusters=[
                (int(cid), [(int(s), int(e)) for s, e in spans])
                for cid, spans in d.get("coref_clusters", [])
            ],
            sentence_boundaries=[int(b) for b in d.get("sentence_boundaries", [])],
            story_id=story_id,
        )
    except ExtractionError:
        raise
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ExtractionError(story_id, f"bad record: {exc}") from exc
    story.validate()
    return story


def story_to_dict(story: AnnotatedStory) -> dict:
    return {
        "prompt": story.prompt,
        "story_tokens": list(story.story_tokens),
        "frames": [
            {
                "verb_span": list(f.verb_span),
                "verb_lemma": f.verb_lemma,
                "args": {k: list(v) for k, v in f.args.items()},
            }
            for f in story.frames
        ],
        "coref_clusters": [[cid, [list(s) for s in spans]] for cid, spans in story.coref_clusters],
        "sentence_boundaries": list(story.sentence_boundaries),
        "story_id": story.story_id,
    }


def read_annotated_stories(path: str | Path) -> Iterator[AnnotatedStory]:
    """Yield records from a JSON-lines file; errors name the line number."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ExtractionError(f"line {lineno}", f"invalid JSON: {exc}") from exc
            yield story_from_dict(raw, default_id=f"line {lineno}")


def write_annotated_stories(path: str | Path, stories: Iterable[AnnotatedStory]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for story in stories:
            fh.write(json.dumps(story_to_dict(story), sort_keys=True) + "\n")


def _sentence_ranges(story: AnnotatedStory) -> list[Span]:
    n = len(story.story_tokens)
    ranges: list[Span] = []
    start = 0
    for end in story.sentence_boundaries:
        ranges.append((start, end))
        start = end
    if start < n or not ranges:
        ranges.append((start, n))
    return ranges


def extract_plot(story: AnnotatedStory) -> Plot:
    """Compress an annotated story into its silver plot.

    Per story sentence, kept frames (verb lemma not in :data:`STOP_VERBS`)
    become events in verb-position order; only ARG0/ARG1/ARG2 survive, and
    slot order follows surface span order.  Coreferent mention spans inside
    kept argument spans are replaced by ``ent k``, where k ranks the clusters
    actually replaced somewhere in this plot by their first story mention.
    A story with no kept frames yields an empty plot.
    """
    story.validate()
    ranges = _sentence_ranges(story)

    mentions = sorted(
        (span[0], span[1], order, cid)
        for order, (cid, spans) in enumerate(story.coref_clusters)
        for span in spans
        if span[0] < span[1]
    )
    first_mention: dict[int, tuple[int, int, int]] = {}
    for s, e, order, cid in mentions:
        if cid not in first_mention:
            first_mention[cid] = (s, e, order)

    def segments(span: Span) -> list[tuple[int, int, int | None]]:
        # Walk the argument span; at each token covered by a mention, emit one
        # placeholder for the overlapping portion of the earliest such mention.
        s, e = span
        out: list[tuple[int, int, int | None]] = []
        i = s
        while i < e:
            hit = next(((ms, me, cid) for ms, me, _o, cid in mentions if ms <= i < me), None)
            if hit is None:
                out.append((i, i + 1, None))
                i += 1
            else:
                out.append((i, min(hit[1], e), hit[2]))
                i = min(hit[1], e)
        return out

    used: list[int] = []
    sentence_events: list[list[list[tuple[str, list]]]] = []
    for s_start, s_end in ranges:
        frames = sorted(
            (f for f in story.frames if s_start <= f.verb_span[0] < s_end),
            key=lambda f: (f.verb_span[0], f.verb_span[1]),
        )
        events: list[list[tuple[str, list]]] = []
        for frame in frames:
            if frame.verb_lemma.lower() in STOP_VERBS:
                continue
            slots: list[tuple[int, int, str, list]] = [
                (frame.verb_span[0], 0, "V", [(None, " ".join(story.story_tokens[slice(*frame.verb_span)]))])
            ]
            for arg_name, role in KEPT_ARGS.items():
                span = frame.args.get(arg_name)
                if span is None:
                    continue
                parts: list = []
                for seg_s, seg_e, cid in segments(span):
                    if cid is None:
                        parts.append((None, " ".join(story.story_tokens[seg_s:seg_e])))
                    else:
                        if cid not in used:
                            used.append(cid)
                        parts.append((cid, None))
                slots.append((span[0], 1, role, parts))
            slots.sort(key=lambda item: (item[0], item[1]))
            events.append([(role, parts) for _pos, _tie, role, parts in slots])
        sentence_events.append(events)

    if not any(sentence_events):
        return Plot(())

    rank = {
        cid: i
        for i, cid in enumerate(sorted(used, key=lambda c: first_mention.get(c, (0, 0, c))))
    }

    def render(parts: list) -> str:
        pieces = [f"ent {rank[cid]}" if cid is not None else text for cid, text in parts]
        return " ".join(p for p in pieces if p)

    sentences = tuple(
        Sentence(tuple(Event(tuple((role, render(parts)) for role, parts in ev)) for ev in events))
        for events in sentence_events
    )
    return Plot(sentences)


@dataclass
class SplitSpec:
    """Fractions for the five dataset subsets; must sum to 1."""

    lm_train: float = 0.65
    valid: float = 0.10
    test: float = 0.10
    rescorer_train: float = 0.10
    mixture_train: float = 0.05
    seed: int = 0

    FIELDS = ("lm_train", "valid", "test", "rescorer_train", "mixture_train")

    def fractions(self) -> list[float]:
        return [getattr(self, name) for name in self.FIELDS]

    def __post_init__(self) -> None:
        total = sum(self.fractions())
        if any(f < 0 for f in self.fractions()):
            raise ValueError("split fractions must be non-negative")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1.0, got {total}")


@dataclass
class DatasetSplits:
    lm_train: list
    valid: list
    test: list
    rescorer_train: list
    mixture_train: list

    def as_dict(self) -> dict[str, list]:
        return {name: getattr(self, name) for name in SplitSpec.FIELDS}


def _largest_remainder_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    quotas = [f * n for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def split_dataset(pairs: Sequence, spec: SplitSpec) -> DatasetSplits:
    """Seeded shuffle, then contiguous partition with largest-remainder sizes."""
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(pairs))
    shuffled = [pairs[i] for i in order]
    sizes = _largest_remainder_sizes(len(pairs), spec.fractions())
    subsets = []
    start = 0
    for size in sizes:
        subsets.append(shuffled[start : start + size])
        start += size
    return DatasetSplits(*subsets)


def content_token_set(prompt: str, stopwords: frozenset[str] | set[str]) -> frozenset[str]:
    """Lowercased, punctuation-stripped, stopword-free token set of a prompt."""
    out = set()
    for tok in prompt.lower().split():
        tok = tok.strip(string.punctuation)
        if tok and tok not in stopwords:
            out.add(tok)
    return frozenset(out)


@dataclass
class PromptFilterResult:
    kept: list[str]
    excluded: list[str]

    @property
    def exclusion_pct(self) -> float:
        total = len(self.kept) + len(self.excluded)
        return 100.0 * len(self.excluded) / total if total else 0.0

    def summary(self) -> str:
        return (
            f"kept {len(self.kept)} of {len(self.kept) + len(self.excluded)} "
            f"test prompts ({self.exclusion_pct:.1f}% excluded)"
        )


def filter_test_prompts(
    test_prompts: Sequence[str],
    train_prompts: Sequence[str],
    stopwords: frozenset[str] | set[str] = DEFAULT_STOPWORDS,
) -> PromptFilterResult:
    """Drop test prompts whose content-token set equals any training prompt's."""
    train_sets = {content_token_set(p, stopwords) for p in train_prompts}
    kept: list[str] = []
    excluded: list[str] = []
    for prompt in test_prompts:
        if content_token_set(prompt, stopwords) in train_sets:
            excluded.append(prompt)
        else:
            kept.append(prompt)
    return PromptFilterResult(kept=kept, excluded=excluded)


def truncate_story(tokens: Sequence[str], limit: int = 1000) -> list[str]:
    """Cap a story at ``limit`` tokens."""
    return list(tokens[:limit])


def token_counts(corpus: Iterable[Sequence[str]]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tokens in corpus:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    return counts


def apply_unk(tokens: Sequence[str], counts: dict[str, int], min_count: int = 10, unk: str = "<UNK>") -> list[str]:
    """Replace tokens seen fewer than ``min_count`` times with ``unk``.

    Optional post-hoc pass over story text; off by default in the pipeline.
    """
    return [tok if counts.get(tok, 0) >= min_count else unk for tok in tokens]


def write_lines(path: str | Path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]
