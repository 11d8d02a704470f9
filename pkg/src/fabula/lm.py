"""Conditional n-gram language model with top-k temperature sampling.

The model counts n-grams of every order up to ``order`` over streams of the
form ``<BOS> ... <BOS> conditioning <EOT> target <EOS>`` (order - 1 leading
``<BOS>`` tokens).  Next-token distributions range over the observed word
vocabulary plus ``<EOS>``; ``<BOS>`` and ``<EOT>`` are context-only.

Smoothing: the distribution is a fixed-weight mixture of add-k estimators,
one per order.  Order ``o`` has mixture weight proportional to
``backoff ** (order - o)``, so lower orders carry geometrically less mass
(default factor 0.4).  Each component is ``(c(ctx, t) + k) / (C(ctx) +
k * (V + 1))`` with ``V + 1`` the support size; an unseen context therefore
contributes a uniform component.  The mixture is exactly normalized, and
adding an observation of ``(prefix, t)`` never lowers ``p(t | prefix)``.
Tokens outside the vocabulary are scored like an unseen type.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from fabula.vocab import BOS, EOS, EOT

_STRUCTURAL = (BOS, EOT, EOS)


@dataclass
class SamplerConfig:
    k: int = 5
    temperature: float = 0.7
    max_len: int = 120
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def softmax_draw(rng: np.random.Generator, logps: np.ndarray, temperature: float) -> int:
    """Sample an index after temperature-scaled softmax renormalization."""
    x = np.asarray(logps, dtype=np.float64) / temperature
    x = x - x.max()
    p = np.exp(x)
    p /= p.sum()
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, len(p) - 1)


def _tokens(text: str | Sequence[str]) -> list[str]:
    return text.split() if isinstance(text, str) else list(text)


class CondSeqLM:
    """Count-based conditional sequence model; immutable after training in use."""

    def __init__(self, order: int = 4, k_add: float = 0.01, backoff: float = 0.4):
        if order < 1:
            raise ValueError("order must be at least 1")
        if k_add <= 0:
            raise ValueError("k_add must be positive")
        if not 0 < backoff <= 1:
            raise ValueError("backoff factor must be in (0, 1]")
        self.order = order
        self.k_add = k_add
        self.backoff = backoff
        # counts[n] maps an (n-1)-token context tuple to {token: count}
        self._counts: dict[int, dict[tuple[str, ...], dict[str, int]]] = {
            n: {} for n in range(1, order + 1)
        }
        self._totals: dict[int, dict[tuple[str, ...], int]] = {n: {} for n in range(1, order + 1)}
        self._words: set[str] = set()
        self._support: list[str] | None = None
        self._index: dict[str, int] | None = None
        w = np.array([self.backoff ** (self.order - o) for o in range(1, self.order + 1)])
        self._order_weights = w / w.sum()

    # -- training -----------------------------------------------------------

    def _count_stream(self, stream: list[str]) -> None:
        # Only transitions into support-eligible tokens (words or <EOS>) are
        # counted; <BOS> and <EOT> are structural and never predicted, and
        # skipping them keeps every distribution an exact mixture of add-k
        # conditionals.  Contexts may still contain structural tokens.
        for i, tok in enumerate(stream):
            if tok == BOS or tok == EOT:
                continue
            for n in range(1, self.order + 1):
                if i - n + 1 < 0:
                    break
                ctx = tuple(stream[i - n + 1 : i])
                by_ctx = self._counts[n].setdefault(ctx, {})
                by_ctx[tok] = by_ctx.get(tok, 0) + 1
                totals = self._totals[n]
                totals[ctx] = totals.get(ctx, 0) + 1

    def add_pair(self, conditioning: str, target: str) -> None:
        cond = _tokens(conditioning)
        tgt = _tokens(target)
        stream = [BOS] * (self.order - 1) + cond + [EOT] + tgt + [EOS]
        self._count_stream(stream)
        self._words.update(t for t in cond + tgt if t not in _STRUCTURAL)
        self._support = None
        self._index = None

    def observe(self, prefix: str | Sequence[str], token: str) -> None:
        """Increment the count of ``token`` after ``prefix`` at every order."""
        if token in (BOS, EOT):
            raise ValueError(f"{token} is structural and cannot be observed as a target")
        padded = [BOS] * (self.order - 1) + _tokens(prefix)
        for n in range(1, self.order + 1):
            ctx = tuple(padded[len(padded) - n + 1 :]) if n > 1 else ()
            by_ctx = self._counts[n].setdefault(ctx, {})
            by_ctx[token] = by_ctx.get(token, 0) + 1
            totals = self._totals[n]
            totals[ctx] = totals.get(ctx, 0) + 1
        if token != EOS:
            self._words.add(token)
            self._support = None
            self._index = None

    # -- vocabulary ---------------------------------------------------------

    @property
    def vocabulary(self) -> frozenset[str]:
        """Observed tokens plus the structural specials."""
        return frozenset(self._words) | {BOS, EOT, EOS}

    def support(self) -> list[str]:
        """Tokens a distribution ranges over: sorted words plus ``<EOS>``."""
        if self._support is None:
            self._support = sorted(self._words | {EOS})
            self._index = {t: i for i, t in enumerate(self._support)}
        return self._support

    # -- probabilities ------------------------------------------------------

    def _padded(self, prefix: str | Sequence[str]) -> list[str]:
        return [BOS] * (self.order - 1) + _tokens(prefix)

    def _distribution(self, prefix: str | Sequence[str]) -> tuple[list[str], np.ndarray]:
        support = self.support()
        index = self._index
        assert index is not None
        size = len(support)
        padded = self._padded(prefix)
        probs = np.zeros(size)
        base = 0.0
        for n in range(1, self.order + 1):
            w = self._order_weights[n - 1]
            ctx = tuple(padded[len(padded) - n + 1 :]) if n > 1 else ()
            total = self._totals[n].get(ctx, 0)
            denom = total + self.k_add * size
            base += w * self.k_add / denom
            for tok, count in self._counts[n].get(ctx, {}).items():
                pos = index.get(tok)
                if pos is not None:
                    probs[pos] += w * count / denom
        probs += base
        return support, probs

    def next_token_distribution(self, prefix: str | Sequence[str]) -> dict[str, float]:
        """Normalized next-token distribution given the stream so far.

        ``prefix`` is the conditioning, ``<EOT>``, and any generated target
        tokens; leading ``<BOS>`` padding is added internally.
        """
        support, probs = self._distribution(prefix)
        return dict(zip(support, probs.tolist()))

    def token_probability(self, prefix: str | Sequence[str], token: str) -> float:
        """Mixture probability of one token; out-of-vocabulary tokens score
        like an unseen type (count zero at every order)."""
        size = len(self.support())
        assert self._index is not None
        known = token in self._index
        padded = self._padded(prefix)
        p = 0.0
        for n in range(1, self.order + 1):
            ctx = tuple(padded[len(padded) - n + 1 :]) if n > 1 else ()
            total = self._totals[n].get(ctx, 0)
            count = self._counts[n].get(ctx, {}).get(token, 0) if known else 0
            p += self._order_weights[n - 1] * (count + self.k_add) / (total + self.k_add * size)
        return float(p)

    def log_prob(self, conditioning: str, target: str | Sequence[str], include_eos: bool = True) -> float:
        """Natural-log probability of ``target`` given ``conditioning``.

        Sums stepwise conditionals; the terminating ``<EOS>`` term is
        included unless ``include_eos`` is false.
        """
        prefix = _tokens(conditioning) + [EOT]
        total = 0.0
        for tok in _tokens(target):
            total += math.log(self.token_probability(prefix, tok))
            prefix.append(tok)
        if include_eos:
            total += math.log(self.token_probability(prefix, EOS))
        return total

    def topk_candidates(self, prefix: str | Sequence[str], k: int) -> list[tuple[str, float]]:
        """The k most probable next tokens as (token, log p), ties lexicographic."""
        support, probs = self._distribution(prefix)
        order = sorted(range(len(support)), key=lambda i: (-probs[i], support[i]))
        return [(support[i], math.log(probs[i])) for i in order[:k]]

    def sample_sequence(self, conditioning: str, cfg: SamplerConfig) -> str:
        """Top-k temperature sampling until ``<EOS>`` or ``max_len`` tokens."""
        rng = np.random.default_rng(cfg.seed)
        prefix = _tokens(conditioning) + [EOT]
        out: list[str] = []
        while len(out) < cfg.max_len:
            candidates = self.topk_candidates(prefix, cfg.k)
            logps = np.array([lp for _t, lp in candidates])
            choice = candidates[softmax_draw(rng, logps, cfg.temperature)][0]
            if choice == EOS:
                break
            out.append(choice)
            prefix.append(choice)
        return " ".join(out)

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        payload = {
            "format": "fabula-cond-seq-lm",
            "version": 1,
            "order": self.order,
            "k_add": self.k_add,
            "backoff": self.backoff,
            "words": sorted(self._words),
            "counts": {
                str(n): {" ".join(ctx): dict(sorted(by.items())) for ctx, by in table.items()}
                for n, table in self._counts.items()
            },
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CondSeqLM":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != "fabula-cond-seq-lm":
            raise ValueError(f"{path}: not a language model file")
        model = cls(order=payload["order"], k_add=payload["k_add"], backoff=payload["backoff"])
        for n_str, table in payload["counts"].items():
            n = int(n_str)
            for ctx_str, by in table.items():
                ctx = tuple(ctx_str.split()) if ctx_str else ()
                model._counts[n][ctx] = {t: int(c) for t, c in by.items()}
                model._totals[n][ctx] = sum(by.values())
        model._words = set(payload["words"])
        return model


def train_lm(
    pairs: Sequence[tuple[str, str]], order: int = 4, k_add: float = 0.01, backoff: float = 0.4
) -> CondSeqLM:
    """Count a model over (conditioning, target) pairs; empty corpus is an error."""
    if not pairs:
        raise ValueError("cannot train a language model on an empty corpus")
    model = CondSeqLM(order=order, k_add=k_add, backoff=backoff)
    for conditioning, target in pairs:
        model.add_pair(conditioning, target)
    return model
