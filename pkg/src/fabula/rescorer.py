"""Hashed n-gram classifiers that score candidate plots, plus scorer plumbing.

A rescorer estimates the probability that *candidate* is a well-formed
continuation for *context* with respect to one aspect.  The built-in model
is logistic regression over hashed 1..4-gram counts of the token stream
``context <EOT> candidate``; role tags and ``<EOT>`` are ordinary tokens.

The feature hash is fixed and documented: CRC-32 of the n-gram's tokens
joined by byte ``0x1f``, seeded with ``hash_seed`` as the initial CRC value,
taken modulo ``feature_dim``.  Any object with a pure
``score(context, candidate) -> float in [0, 1]`` method can be used where a
scorer is expected; :class:`ExternalScorer` adapts a subprocess speaking a
one-line-per-request protocol.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence
from zlib import crc32

import numpy as np

from fabula.negatives import RescorerExample
from fabula.vocab import join_with_eot

DEFAULT_FEATURE_DIM = 1 << 20
DEFAULT_NGRAM_RANGE = (1, 4)
BIAS_KEY = -1

_GRAM_SEP = b"\x1f"


class ScorerInterface(Protocol):
    def score(self, context: str, candidate: str) -> float: ...


def hash_ngram(tokens: Sequence[str], hash_seed: int = 0, feature_dim: int = DEFAULT_FEATURE_DIM) -> int:
    return crc32(_GRAM_SEP.join(t.encode("utf-8") for t in tokens), hash_seed) % feature_dim


def featurize(
    text: str,
    ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    hash_seed: int = 0,
) -> dict[int, int]:
    """Hashed counts of all n-grams in the range, plus a constant bias feature.

    The bias feature lives under :data:`BIAS_KEY` and always has count 1.
    """
    tokens = text.split()
    counts: dict[int, int] = {BIAS_KEY: 1}
    lo, hi = ngram_range
    encoded = [t.encode("utf-8") for t in tokens]
    for n in range(lo, hi + 1):
        for i in range(len(encoded) - n + 1):
            key = crc32(_GRAM_SEP.join(encoded[i : i + n]), hash_seed) % feature_dim
            counts[key] = counts.get(key, 0) + 1
    return counts


def _sigmoid(z: float) -> float:
    # clipping at 35 keeps the result strictly inside (0, 1) in float64
    z = min(max(z, -35.0), 35.0)
    return float(1.0 / (1.0 + np.exp(-z)))


@dataclass
class NgramRescorer:
    """Linear classifier over hashed n-gram counts; scores are sigmoid, in (0, 1)."""

    aspect: str
    feature_dim: int = DEFAULT_FEATURE_DIM
    ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE
    hash_seed: int = 0
    weights: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_FEATURE_DIM))
    bias: float = 0.0
    train_accuracy: float | None = None

    def _features(self, text: str) -> dict[int, int]:
        return featurize(text, self.ngram_range, self.feature_dim, self.hash_seed)

    def raw_score(self, counts: dict[int, int]) -> float:
        total = 0.0
        for key, value in counts.items():
            if key == BIAS_KEY:
                total += self.bias * value
            else:
                total += self.weights[key] * value
        return total

    def score(self, context: str, candidate: str) -> float:
        return _sigmoid(self.raw_score(self._features(join_with_eot(context, candidate))))

    def stream(self, context: str) -> "NgramStream":
        return NgramStream(self, context)

    def save(self, path: str | Path) -> None:
        indices = np.nonzero(self.weights)[0]
        payload = {
            "format": "fabula-ngram-rescorer",
            "version": 1,
            "aspect": self.aspect,
            "feature_dim": self.feature_dim,
            "ngram_range": list(self.ngram_range),
            "hash_seed": self.hash_seed,
            "bias": self.bias,
            "train_accuracy": self.train_accuracy,
            "weights": {
                "indices": [int(i) for i in indices],
                "values": [float(self.weights[i]) for i in indices],
            },
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NgramRescorer":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != "fabula-ngram-rescorer":
            raise ValueError(f"{path}: not a rescorer model file")
        weights = np.zeros(payload["feature_dim"])
        weights[payload["weights"]["indices"]] = payload["weights"]["values"]
        return cls(
            aspect=payload["aspect"],
            feature_dim=payload["feature_dim"],
            ngram_range=tuple(payload["ngram_range"]),
            hash_seed=payload["hash_seed"],
            weights=weights,
            bias=payload["bias"],
            train_accuracy=payload.get("train_accuracy"),
        )


class NgramStream:
    """Incremental scorer over a growing candidate for a fixed context.

    Appending a token adds exactly the n-grams that end at it, so the running
    raw score matches the batch computation up to float summation order.
    """

    def __init__(self, model: NgramRescorer, context: str):
        self.model = model
        self._tail: list[bytes] = []
        self._raw = 0.0
        for tok in join_with_eot(context, "").split():
            self.advance(tok)

    def _delta(self, token: str) -> float:
        encoded = token.encode("utf-8")
        lo, hi = self.model.ngram_range
        window = self._tail + [encoded]
        delta = 0.0
        for n in range(lo, hi + 1):
            if n > len(window):
                break
            key = crc32(_GRAM_SEP.join(window[-n:]), self.model.hash_seed) % self.model.feature_dim
            delta += self.model.weights[key]
        return delta

    def peek(self, token: str) -> float:
        """Probability if ``token`` were appended; does not advance."""
        return _sigmoid(self._raw + self._delta(token) + self.model.bias)

    def advance(self, token: str) -> None:
        self._raw += self._delta(token)
        self._tail.append(token.encode("utf-8"))
        max_context = self.model.ngram_range[1] - 1
        if len(self._tail) > max_context:
            self._tail = self._tail[-max_context:]

    def probability(self) -> float:
        return _sigmoid(self._raw + self.model.bias)


class FallbackStream:
    """Incremental adapter for scorers that only expose ``score``."""

    def __init__(self, scorer: ScorerInterface, context: str):
        self.scorer = scorer
        self.context = context
        self.tokens: list[str] = []

    def peek(self, token: str) -> float:
        return self.scorer.score(self.context, " ".join(self.tokens + [token]))

    def advance(self, token: str) -> None:
        self.tokens.append(token)

    def probability(self) -> float:
        return self.scorer.score(self.context, " ".join(self.tokens))


def open_stream(scorer: ScorerInterface, context: str):
    if hasattr(scorer, "stream"):
        return scorer.stream(context)
    return FallbackStream(scorer, context)


def train_classifier(
    examples: Sequence[RescorerExample],
    lr: float = 0.02,
    epochs: int = 8,
    l2: float = 1e-6,
    seed: int = 0,
    batch_size: int = 16,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE,
    hash_seed: int = 0,
    aspect: str | None = None,
) -> NgramRescorer:
    """Fit a logistic model on (context + positive, 1) / (context + negative, 0).

    Seeded mini-batch SGD on the log loss with L2 decay on the weights (not
    the bias).  The returned model carries its final training pairwise
    accuracy in ``train_accuracy``.
    """
    if not examples:
        raise ValueError("cannot train on an empty example list")
    aspect = aspect if aspect is not None else examples[0].aspect

    instances: list[tuple[np.ndarray, np.ndarray, float]] = []
    for ex in examples:
        for text, label in (
            (join_with_eot(ex.context, ex.positive), 1.0),
            (join_with_eot(ex.context, ex.negative), 0.0),
        ):
            counts = featurize(text, ngram_range, feature_dim, hash_seed)
            counts.pop(BIAS_KEY)
            keys = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
            vals = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
            instances.append((keys, vals, label))

    weights = np.zeros(feature_dim)
    bias = 0.0
    rng = np.random.default_rng(seed)
    for _epoch in range(epochs):
        order = rng.permutation(len(instances))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            grads = []
            for idx in batch:
                keys, vals, label = instances[idx]
                z = float(weights[keys] @ vals) + bias
                grads.append((keys, vals, _sigmoid(z) - label))
            scale = lr / len(batch)
            for keys, vals, g in grads:
                weights[keys] -= scale * g * vals
                bias -= scale * g
            if l2:
                weights *= 1.0 - lr * l2

    model = NgramRescorer(
        aspect=aspect,
        feature_dim=feature_dim,
        ngram_range=ngram_range,
        hash_seed=hash_seed,
        weights=weights,
        bias=bias,
    )
    model.train_accuracy = evaluate_accuracy(model, examples)
    return model


def evaluate_accuracy(scorer: ScorerInterface, examples: Sequence[RescorerExample]) -> float:
    """Fraction of examples where the positive strictly outscores the negative.

    Ties count as incorrect, so an untrained model scores 0.0.
    """
    if not examples:
        raise ValueError("cannot evaluate on an empty example list")
    correct = sum(
        1
        for ex in examples
        if scorer.score(ex.context, ex.positive) > scorer.score(ex.context, ex.negative)
    )
    return correct / len(examples)


class ExternalScorer:
    """Adapter for an external scoring process.

    Protocol: one ``context \\t candidate`` request per line on stdin, one
    probability per line on stdout.  Tabs and newlines in inputs are replaced
    by spaces.  The process is started lazily and must answer line-by-line.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    @staticmethod
    def _clean(text: str) -> str:
        return text.replace("\t", " ").replace("\n", " ").replace("\r", " ")

    def score(self, context: str, candidate: str) -> float:
        proc = self._ensure()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(f"{self._clean(context)}\t{self._clean(candidate)}\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise RuntimeError(f"external scorer {self.command!r} closed its output")
        value = float(line.strip())
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"external scorer returned {value}, outside [0, 1]")
        return value

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            assert self._proc.stdin is not None
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
