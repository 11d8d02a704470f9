"""Deterministic synthetic annotated-story corpus for demos and end-to-end tests.

Each record is a themed miniature story with pre-computed SRL frames,
coreference clusters, and sentence boundaries.  The corpus plants the
regularities the pipeline is supposed to pick up:

* every story follows a three-phase verb arc (so sentence order is
  learnable and shuffles are detectable),
* sentences carry two events (a transitive topic event, then an
  intransitive phase event), so event and verb shuffles apply,
* a recurring protagonist gives low entity ids a strong prior,
* a topic-neutral "wanderer" motif recurs in every story, giving the base
  model an off-topic attractor that topical rescoring has to resist,
* occasional stop-verb sentences and beyond-A2 arguments exercise the
  extraction rules.
"""

from __future__ import annotations

import numpy as np

from fabula.extract import AnnotatedStory, SrlFrame

PHASE_VERBS = (
    ("woke", "rose", "stirred", "gathered"),
    ("sought", "pressed", "wandered", "struggled", "hurried"),
    ("rested", "returned", "settled", "slept"),
)

ATTRACTOR_ACTOR = ("pale", "wanderer")
ATTRACTOR_OBJECTS = ("road", "night", "dust", "wind")
ATTRACTOR_VERBS = ("crossed", "followed", "watched")

TOPICS = {
    "harbor": {
        "nouns": ("tide", "ship", "beacon", "quay"),
        "places": ("harbor", "wharf", "bay"),
        "adjs": ("salt", "grey", "anchored", "briny", "windward", "moored"),
        "actors": (("harbor", "keeper"), ("tide", "walker"), ("gull", "catcher")),
        "objects": ("lantern", "net", "rope", "chart", "anchor"),
        "verbs": ("hauled", "mended", "charted", "lashed"),
    },
    "forest": {
        "nouns": ("grove", "stag", "warden", "thicket"),
        "places": ("forest", "glade", "hollow"),
        "adjs": ("mossy", "green", "tangled", "shaded", "fern", "rooted"),
        "actors": (("elm", "warden"), ("fox", "runner"), ("owl", "singer")),
        "objects": ("sapling", "acorn", "bough", "burrow", "bramble"),
        "verbs": ("planted", "tended", "traced", "cleared"),
    },
    "desert": {
        "nouns": ("dune", "caravan", "oasis", "mirage"),
        "places": ("desert", "basin", "ridge"),
        "adjs": ("sunburnt", "dry", "amber", "shifting", "parched", "veiled"),
        "actors": (("sand", "reader"), ("well", "digger"), ("camel", "driver")),
        "objects": ("canteen", "compass", "tent", "saddle", "spark"),
        "verbs": ("rationed", "buried", "salvaged", "pitched"),
    },
    "mountain": {
        "nouns": ("summit", "glacier", "pass", "cairn"),
        "places": ("mountain", "col", "scree"),
        "adjs": ("frozen", "steep", "granite", "thin", "hooded", "sheer"),
        "actors": (("peak", "guide"), ("rope", "brother"), ("echo", "caller")),
        "objects": ("piton", "sledge", "beacon", "ledger", "horn"),
        "verbs": ("scaled", "anchored", "signalled", "hefted"),
    },
    "city": {
        "nouns": ("clocktower", "market", "archive", "tramline"),
        "places": ("city", "district", "arcade"),
        "adjs": ("brick", "lamplit", "crowded", "soot", "paved", "iron"),
        "actors": (("ink", "clerk"), ("bell", "ringer"), ("key", "smith")),
        "objects": ("ledger", "token", "gazette", "parcel", "stamp"),
        "verbs": ("filed", "auctioned", "stamped", "delivered"),
    },
    "marsh": {
        "nouns": ("reedbed", "heron", "lantern", "causeway"),
        "places": ("marsh", "fen", "delta"),
        "adjs": ("sodden", "reedy", "silted", "briar", "murky", "low"),
        "actors": (("reed", "cutter"), ("eel", "fisher"), ("mist", "keeper")),
        "objects": ("skiff", "creel", "pole", "wick", "snare"),
        "verbs": ("poled", "baited", "drained", "kindled"),
    },
}

TOPIC_NAMES = tuple(TOPICS)


def _phase(i: int, n: int) -> int:
    if i < max(1, n // 3):
        return 0
    if i >= n - max(1, n // 3):
        return 2
    return 1


def make_prompt(rng: np.random.Generator, topic: str) -> str:
    t = TOPICS[topic]
    adj = t["adjs"][int(rng.integers(len(t["adjs"])))]
    noun = t["nouns"][int(rng.integers(len(t["nouns"])))]
    place = t["places"][int(rng.integers(len(t["places"])))]
    return f"write about the {adj} {noun} of the {place}"


def make_record(rng: np.random.Generator, record_id: int) -> AnnotatedStory:
    topic = TOPIC_NAMES[int(rng.integers(len(TOPIC_NAMES)))]
    t = TOPICS[topic]
    actor_ids = rng.permutation(len(t["actors"]))
    protagonist = t["actors"][int(actor_ids[0])]
    secondary = t["actors"][int(actor_ids[1])]
    prompt = make_prompt(rng, topic)

    n_sent = int(rng.integers(4, 8))
    stop_at = int(rng.integers(1, n_sent))
    ditrans_at = int(rng.integers(1, n_sent)) if rng.random() < 0.6 else -1
    attractor_at = 1 + int(rng.integers(max(1, n_sent - 2)))

    tokens: list[str] = []
    frames: list[SrlFrame] = []
    boundaries: list[int] = []
    mentions: dict[tuple[str, str], list[tuple[int, int]]] = {}

    def emit_actor(actor: tuple[str, str]) -> tuple[int, int]:
        start = len(tokens)
        tokens.extend(("the",) + actor)
        span = (start, len(tokens))
        mentions.setdefault(actor, []).append(span)
        return span

    for i in range(n_sent):
        if i == stop_at:
            actor_span = emit_actor(protagonist)
            verb_pos = len(tokens)
            tokens.extend(("was", "quiet", "."))
            frames.append(
                SrlFrame(
                    verb_span=(verb_pos, verb_pos + 1),
                    verb_lemma="was",
                    args={"ARG0": actor_span, "ARG1": (verb_pos + 1, verb_pos + 2)},
                )
            )
            boundaries.append(len(tokens))
            continue

        on_attractor = i == attractor_at
        actor = ATTRACTOR_ACTOR if on_attractor else (secondary if rng.random() < 0.3 else protagonist)
        phase = _phase(i, n_sent)
        actor_span = emit_actor(actor)

        if i == ditrans_at and not on_attractor:
            verb_pos = len(tokens)
            tokens.append("gave")
            obj_start = len(tokens)
            tokens.extend(("the", t["objects"][int(rng.integers(len(t["objects"])))]))
            obj_span = (obj_start, len(tokens))
            rcpt_start = len(tokens)
            tokens.append("to")
            emit_actor(secondary if actor != secondary else protagonist)
            rcpt_span = (rcpt_start, len(tokens))
            loc_start = len(tokens)
            tokens.extend(("at", "the", t["places"][int(rng.integers(len(t["places"])))]))
            loc_span = (loc_start, len(tokens))
            frames.append(
                SrlFrame(
                    verb_span=(verb_pos, verb_pos + 1),
                    verb_lemma="give",
                    args={
                        "ARG0": actor_span,
                        "ARG1": obj_span,
                        "ARG2": rcpt_span,
                        "ARG3": loc_span,
                    },
                )
            )
        else:
            if on_attractor:
                verb = ATTRACTOR_VERBS[int(rng.integers(len(ATTRACTOR_VERBS)))]
                obj = ATTRACTOR_OBJECTS[int(rng.integers(len(ATTRACTOR_OBJECTS)))]
            else:
                verb = t["verbs"][int(rng.integers(len(t["verbs"])))]
                obj = t["objects"][int(rng.integers(len(t["objects"])))]
            verb_pos = len(tokens)
            tokens.append(verb)
            obj_start = len(tokens)
            tokens.extend(("the", obj))
            obj_span = (obj_start, len(tokens))
            frames.append(
                SrlFrame(
                    verb_span=(verb_pos, verb_pos + 1),
                    verb_lemma=verb,
                    args={"ARG0": actor_span, "ARG1": obj_span},
                )
            )

        tokens.append("and")
        phase_verb = PHASE_VERBS[phase][int(rng.integers(len(PHASE_VERBS[phase])))]
        phase_pos = len(tokens)
        tokens.extend((phase_verb, "."))
        frames.append(
            SrlFrame(
                verb_span=(phase_pos, phase_pos + 1),
                verb_lemma=phase_verb,
                args={"ARG0": actor_span},
            )
        )
        boundaries.append(len(tokens))

    # Cluster ids are deliberately not in mention order; extraction must
    # renumber by first mention.
    clusters = [
        (100 + int(rng.integers(50)) * 10 + j, spans)
        for j, (_actor, spans) in enumerate(sorted(mentions.items()))
        if len(spans) >= 1
    ]
    return AnnotatedStory(
        prompt=prompt,
        story_tokens=tokens,
        frames=frames,
        coref_clusters=clusters,
        sentence_boundaries=boundaries,
        story_id=f"synth-{record_id}",
    )


def generate_corpus(n_records: int, seed: int) -> list[AnnotatedStory]:
    """Build a deterministic corpus of ``n_records`` annotated stories."""
    records = []
    for i in range(n_records):
        rng = np.random.default_rng(np.uint64(seed) ^ np.uint64(i * 7919 + 1))
        records.append(make_record(rng, i))
    return records
