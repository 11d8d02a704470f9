"""Shared fixtures: gold plot strings and tiny corpora.

The reference strings are hand-collected gold plot output exercising the
grammar's irregular corners: empty sentences, events opening with the
separator, dangling role tags, and unterminated final sentences.
"""

from __future__ import annotations

import pytest

T1_NAIVE = (
    "<A1> The universe <V> end </s> </s> <A0> ent 0 <V> see <A1> ent 3 </s> </s> "
    "<V> dying <A1> ent 1 # <A0> ent 1 <V> left <A1> ent 0 </s> "
    "<A0> the last human <V> live </s> <A1> ent 6 <V> end # <A1> ent 2 <V> come </s> "
    "<A1> the last one <V> die </s> <A1> a universe of life <V> left"
)

T1_REVISED = (
    "<A2> The light <V> filled <A2> the sky </s> </s> </s> "
    "<A2> A bright flash <V> lit </s> </s> # <V> began <A2> to grow # "
    "<A2> the stars <V> grow </s> </s> <V> began <A2> ent 0 <A2> to fade # "
    "<A2> The stars <V> fade </s> </s> <A0> ent 2 <V> looked <A2> ent 1 me </s> "
    "<V> dying <A2> star"
)

INTER_POS = (
    "<A1> ent 0 orange glow <V> stood <A2> ent 6 night </s> "
    "<A1> ent 3 <V> emanating <A2> ent 3 </s> "
    "<A0> ent 2 <V> felt <A1> the cold <A2> ent 2 their backs # <A0> ent 2 <V> faced <A1> ent 3 </s> "
    "<A1> ent 2 eyes <V> stayed <A2> upon the saving light # <A0> ent 4 <V> stared </s>"
)

INTER_NEG = (
    "<A1> ent 3 <V> emanating <A2> ent 3 </s> "
    "<A1> ent 8 <V> grew <A2> quieter , darker </s> "
    "<A2> ent 5 some <A1> ent 5 <V> came # <A0> a bearded , old man <V> drawing <A1> ent 11 <A2> close # "
    "<A1> ent 13 <V> burn </s> <A0> orange <V> glow # <A1> ent 1 <V> sat # <A1> ent 1 <V> paralyzed </s>"
)

INTRA_POS = (
    "<A0> ent 2 <V> felt <A1> the cold <A2> ent 2 their backs # <A0> ent 2 <V> faced <A1> ent 3 </s> "
    "<A1> ent 2 eyes <V> stayed <A2> upon the saving light # <A0> ent 4 <V> stared </s>"
)

INTRA_NEG = (
    "<A0> ent 2 <V> faced <A1> ent 3 # <A0> ent 2 <V> felt <A1> the cold <A2> ent 2 their backs </s> "
    "<A0> ent 4 <V> stared # <A1> ent 2 eyes <V> stayed <A2> upon the saving light </s>"
)

VERB_POS = (
    "<A0> ent 9 <V> roamed <A1> the woods # <A0> ent 9 <V> consumed <A1> ent 6 of the night </s> "
    "<A0> The wind <V> began <A1> to blow with cold intention # <A1> The wind <V> blow # "
    "<A0> ent 7 <V> danced # <A1> ent 7 <V> shimmered # <A1> moonlight <V> began"
)

VERB_NEG = (
    "<A0> ent 9 <V> consumed <A1> the woods # <A0> ent 9 <V> roamed <A1> ent 6 of the night </s> "
    "<A0> The wind <V> shimmered <A1> to blow with cold intention # <A1> The wind <V> began # "
    "<A0> ent 7 <V> danced # <A1> ent 7 <V> blow # <A1> moonlight <V> began"
)

ENTITY_CTX = (
    "<A0> ent 0 <V> saw <A1> the light of a campfire </s> <A1> ent 2 <V> laying <A2> there </s> "
    "<A1> horses <V> surrounding <A2> ent 2 # <A1> light <V> bouncing </s> <A0> ent"
)

RELEVANCE_CTX_PLOT = "<V> masked <A0> ent 0 # <A0> ent 0 <V> rode </s>"

RELEVANCE_POS = (
    "<A0> ent 0 <V> saw <A1> the light of a campfire </s> <A1> ent 2 <V> laying <A2> there </s> "
    "<A1> horses <V> surrounding <A2> ent 2 # <A1> light <V> bouncing </s> <A0>"
)

RELEVANCE_NEG = (
    "<A0> ent 2 <V> asks <A2> ent 0 </s> <A1> I <V> ' <A2> sorry # "
    "<A0> I <V> think <A1> ent 0 can help you # <A0> I <V> help <A1> ent 0 </s> </s> "
    "<V> colored <A1> toys </s>"
)

INTER_FRAG_A = "<A1> ent 11 <V> grew <A2> louder"
INTER_FRAG_B = "<A1> ent 11 <V> fell <A2> silent"
INTRA_FRAG_A = "<A1> ent 12 <V> shifted"
INTRA_FRAG_B = "<A1> ent 12 <V> went <A2> to sleep"

REFERENCE_PLOTS = [
    T1_NAIVE,
    T1_REVISED,
    INTER_POS,
    INTER_NEG,
    INTRA_POS,
    INTRA_NEG,
    VERB_POS,
    VERB_NEG,
    ENTITY_CTX,
    RELEVANCE_CTX_PLOT,
    RELEVANCE_POS,
    RELEVANCE_NEG,
]


@pytest.fixture(scope="session")
def reference_plots() -> list[str]:
    return list(REFERENCE_PLOTS)
