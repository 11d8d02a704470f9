"""Plot token grammar: parsing, serialization, and structural queries.

A plot string is a whitespace-tokenized stream over a small vocabulary:

* role tags ``<V>`` ``<A0>`` ``<A1>`` ``<A2>`` opening a slot of an event,
* the sentence terminator ``</s>``,
* the event separator ``#``,
* plain word tokens, including the two-token entity form ``ent N``.

Sentences are terminated by ``</s>``; the final sentence of a string may be
unterminated, and consecutive terminators produce empty sentences (both occur
in gold data).  Within a sentence, ``#`` separates events; an event may be
empty, start with bare words before any tag, lack a verb, or carry an empty
slot.  The parser accepts all of these so that any token stream without a
malformed tag parses, and serialization is the byte-exact inverse.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

SENTENCE_SEP = "</s>"
EVENT_SEP = "#"
ROLES = ("V", "A0", "A1", "A2")
ROLE_TAGS = {f"<{role}>": role for role in ROLES}

_TAG_LIKE = re.compile(r"^<.*>$")
_INT = re.compile(r"^\d+$")

# Modal/auxiliary verbs whose frames are dropped during plot extraction.
STOP_VERBS = frozenset(
    {
        "is", "was", "were", "are", "be", "'s", "'re", "'ll",
        "can", "could", "must", "may", "have to", "has to", "had to",
        "will", "would", "has", "have", "had", "do", "does", "did",
    }
)


class PlotParseError(ValueError):
    """Raised for a token that looks like a role tag but is not one."""

    def __init__(self, token: str, index: int):
        super().__init__(f"malformed role tag {token!r} at token offset {index}")
        self.token = token
        self.index = index


@dataclass(frozen=True)
class Event:
    """One event: ordered (role, text) slots, optionally preceded by bare words.

    ``text`` is a single-space-joined token string and may be empty (a
    dangling tag).  ``lead`` holds tokens that appeared before the first role
    tag; it is empty for well-formed gold events.
    """

    slots: tuple[tuple[str, str], ...] = ()
    lead: str = ""

    @property
    def verbs(self) -> tuple[str, ...]:
        return tuple(text for role, text in self.slots if role == "V")


@dataclass(frozen=True)
class Sentence:
    """Ordered events of one sentence; empty sentences are legal."""

    events: tuple[Event, ...] = ()


@dataclass(frozen=True)
class Plot:
    """An ordered sequence of sentences plus one bit of surface fidelity.

    ``trailing_sep`` records whether the final sentence was closed by
    ``</s>``; it is what makes parse/serialize a byte-exact round trip.
    Constructed plots default to fully terminated form.  Two shapes have no
    surface form and never come out of the parser: an unterminated empty
    final sentence, and a sentence consisting of exactly one empty event.
    """

    sentences: tuple[Sentence, ...] = ()
    trailing_sep: bool = True


def parse_plot(s: str) -> Plot:
    """Parse a whitespace-tokenized plot string into a :class:`Plot`.

    Lenient: any role multiset is accepted, tokens before the first tag of an
    event are kept as ``lead`` text, and the empty string yields a plot with
    zero sentences.  A token wrapped in angle brackets that is neither a role
    tag nor ``</s>`` raises :class:`PlotParseError`.
    """
    tokens = s.split()
    for i, tok in enumerate(tokens):
        if _TAG_LIKE.match(tok) and tok not in ROLE_TAGS and tok != SENTENCE_SEP:
            raise PlotParseError(tok, i)

    chunks: list[list[str]] = []
    terminated: list[bool] = []
    current: list[str] = []
    for tok in tokens:
        if tok == SENTENCE_SEP:
            chunks.append(current)
            terminated.append(True)
            current = []
        else:
            current.append(tok)
    if current:
        chunks.append(current)
        terminated.append(False)

    sentences = tuple(_parse_sentence(chunk) for chunk in chunks)
    trailing = terminated[-1] if terminated else True
    return Plot(sentences, trailing)


def _parse_sentence(tokens: list[str]) -> Sentence:
    if not tokens:
        return Sentence(())
    event_chunks: list[list[str]] = [[]]
    for tok in tokens:
        if tok == EVENT_SEP:
            event_chunks.append([])
        else:
            event_chunks[-1].append(tok)
    return Sentence(tuple(_parse_event(chunk) for chunk in event_chunks))


def _parse_event(tokens: list[str]) -> Event:
    lead: list[str] = []
    slots: list[tuple[str, str]] = []
    role: str | None = None
    text: list[str] = []
    for tok in tokens:
        if tok in ROLE_TAGS:
            if role is not None:
                slots.append((role, " ".join(text)))
            role = ROLE_TAGS[tok]
            text = []
        elif role is None:
            lead.append(tok)
        else:
            text.append(tok)
    if role is not None:
        slots.append((role, " ".join(text)))
    return Event(tuple(slots), " ".join(lead))


def serialize_plot(plot: Plot) -> str:
    """Render a plot back to its single-space-joined token string."""
    tokens: list[str] = []
    last = len(plot.sentences) - 1
    for si, sentence in enumerate(plot.sentences):
        for ei, event in enumerate(sentence.events):
            if ei:
                tokens.append(EVENT_SEP)
            if event.lead:
                tokens.extend(event.lead.split())
            for role, text in event.slots:
                tokens.append(f"<{role}>")
                if text:
                    tokens.extend(text.split())
        if si < last or plot.trailing_sep:
            tokens.append(SENTENCE_SEP)
    return " ".join(tokens)


def plot_verbs(plot: Plot) -> list[str]:
    """All V-slot texts in surface order."""
    return [
        text
        for sentence in plot.sentences
        for event in sentence.events
        for role, text in event.slots
        if role == "V"
    ]


def _entity_ids(text: str):
    tokens = text.split()
    for i in range(len(tokens) - 1):
        if tokens[i] == "ent" and _INT.match(tokens[i + 1]):
            yield int(tokens[i + 1])


def plot_entities(plot: Plot) -> Counter[int]:
    """Multiset of entity ids mentioned in argument text (``ent N`` pairs)."""
    ids: Counter[int] = Counter()
    for sentence in plot.sentences:
        for event in sentence.events:
            if event.lead:
                ids.update(_entity_ids(event.lead))
            for role, text in event.slots:
                if role != "V" and text:
                    ids.update(_entity_ids(text))
    return ids


def plot_words(plot: Plot, include_verbs: bool = False) -> list[str]:
    """Argument tokens in surface order; verbs only when ``include_verbs``.

    Role tags and separators are never included.
    """
    words: list[str] = []
    for sentence in plot.sentences:
        for event in sentence.events:
            if event.lead:
                words.extend(event.lead.split())
            for role, text in event.slots:
                if role == "V" and not include_verbs:
                    continue
                if text:
                    words.extend(text.split())
    return words
