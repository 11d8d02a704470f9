"""Plot-structured story generation with trainable rescoring.

The package covers the full pipeline: extracting event-frame plots from
annotated stories, building positive/negative training pairs, training
n-gram rescorers, generating plots with a rescored top-k sampler, tuning
the rescorer mixture weights with a margin ranking loss, realizing stories
from plots, and computing plot/story evaluation metrics.
"""

from fabula.plots import (
    Event,
    Plot,
    PlotParseError,
    Sentence,
    STOP_VERBS,
    parse_plot,
    plot_entities,
    plot_verbs,
    plot_words,
    serialize_plot,
)

__version__ = "0.1.0"

__all__ = [
    "Event",
    "Plot",
    "PlotParseError",
    "Sentence",
    "STOP_VERBS",
    "parse_plot",
    "plot_entities",
    "plot_verbs",
    "plot_words",
    "serialize_plot",
    "__version__",
]
