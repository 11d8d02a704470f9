"""Special tokens shared across the pipeline stages."""

EOT = "<EOT>"
BOS = "<BOS>"
EOS = "<EOS>"
PARA = "<P>"
UNK = "<UNK>"

SPECIAL_TOKENS = frozenset({EOT, BOS, EOS, PARA, UNK})


def join_with_eot(*parts: str) -> str:
    """Join token strings with the ``<EOT>`` separator token.

    An ``<EOT>`` is placed between every pair of adjacent parts, including
    empty ones, so the number of separators is stable for a fixed arity.
    """
    tokens: list[str] = []
    for i, part in enumerate(parts):
        if i:
            tokens.append(EOT)
        if part:
            tokens.append(part)
    return " ".join(tokens)
