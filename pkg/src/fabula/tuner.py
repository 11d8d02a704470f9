"""Online mixture-weight learning with a margin ranking loss, plus ablations.

For each validation sample a hypothesis plot is generated with the current
weights, then gold and hypothesis prefixes are compared under the combined
score; whenever the gold fails to beat the hypothesis by the margin, each
weight moves toward the scorer values that favored gold.  Weights start at
zero, so tuning departs from the naive sampler only as evidence accumulates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from fabula.decoder import MixtureWeights, generate_plot
from fabula.lm import CondSeqLM, SamplerConfig
from fabula.metrics import entities_per_plot, vocab_token_ratio
from fabula.plots import PlotParseError, parse_plot
from fabula.rescorer import ScorerInterface, open_stream
from fabula.vocab import EOT


def margin_ranking_loss(s_gold: float, s_hyp: float, margin: float = 0.0) -> float:
    """``max(0, margin - (s_gold - s_hyp))`` under higher-is-better scores."""
    return max(0.0, margin - (s_gold - s_hyp))


@dataclass
class TunerConfig:
    lr: float = 0.001
    epochs: int = 1
    margin: float = 0.0
    granularity: str = "every-token"  # or "per-sample"
    refresh_hypotheses: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.granularity not in ("every-token", "per-sample"):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")


@dataclass
class TuneResult:
    weights: dict[str, float]
    epoch_losses: list[float]

    def mixture(self) -> MixtureWeights:
        return MixtureWeights.from_dict(self.weights)


def _prefix_profile(
    lm: CondSeqLM,
    scorers: Mapping[str, ScorerInterface],
    names: Sequence[str],
    prompt: str,
    tokens: list[str],
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative base log-probs and scorer values at every prefix length.

    Row ``i`` (0-based) describes the prefix of ``i + 1`` tokens.
    """
    base = np.zeros(len(tokens))
    aspect = np.zeros((len(tokens), len(names)))
    streams = [open_stream(scorers[name], prompt) for name in names]
    prefix = prompt.split() + [EOT]
    logp = 0.0
    for i, tok in enumerate(tokens):
        logp += float(np.log(lm.token_probability(prefix, tok)))
        prefix.append(tok)
        base[i] = logp
        for j, stream in enumerate(streams):
            stream.advance(tok)
            aspect[i, j] = stream.probability()
    return base, aspect


def tune_weights(
    lm: CondSeqLM,
    scorers: Mapping[str, ScorerInterface],
    validation: Sequence[tuple[str, str]],
    config: TunerConfig | None = None,
    sampler: SamplerConfig | None = None,
    initial: Mapping[str, float] | None = None,
) -> TuneResult:
    """Learn one weight per scorer by SGD on the margin ranking loss.

    Hypotheses are regenerated with the current weights (each epoch by
    default; with ``refresh_hypotheses`` off, only in the first).  At
    ``every-token`` granularity the loss is applied at each shared prefix
    position of the gold and hypothesis; at ``per-sample``, once on the
    full sequences.  Updates are applied sequentially in sample order.
    """
    if not validation:
        raise ValueError("cannot tune weights on an empty validation set")
    config = config or TunerConfig()
    sampler = sampler or SamplerConfig()
    names = list(scorers)
    weights = np.zeros(len(names))
    if initial:
        weights = np.array([float(initial.get(n, 0.0)) for n in names])

    cached: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    gold_profiles: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        total_loss = 0.0
        total_positions = 0
        for idx, (prompt, gold) in enumerate(validation):
            if idx not in gold_profiles:
                gold_profiles[idx] = _prefix_profile(lm, scorers, names, prompt, gold.split())
            if config.refresh_hypotheses or idx not in cached:
                hyp_seed = int(
                    np.uint64(config.seed)
                    ^ np.uint64(idx * 2654435761 % (1 << 32))
                    ^ np.uint64((epoch if config.refresh_hypotheses else 0) << 32)
                )
                hyp_cfg = SamplerConfig(
                    k=sampler.k, temperature=sampler.temperature, max_len=sampler.max_len, seed=hyp_seed
                )
                hyp, _trace = generate_plot(
                    lm, scorers, dict(zip(names, weights.tolist())), prompt, hyp_cfg
                )
                cached[idx] = _prefix_profile(lm, scorers, names, prompt, hyp.split())
            gold_base, gold_aspect = gold_profiles[idx]
            hyp_base, hyp_aspect = cached[idx]

            n_shared = min(len(gold_base), len(hyp_base))
            if n_shared == 0:
                continue
            if config.granularity == "every-token":
                positions = range(n_shared)
            else:
                positions = [n_shared - 1]
            for i in positions:
                s_gold = gold_base[i] + float(weights @ gold_aspect[i])
                s_hyp = hyp_base[i] + float(weights @ hyp_aspect[i])
                loss = margin_ranking_loss(s_gold, s_hyp, config.margin)
                total_loss += loss
                total_positions += 1
                if loss > 0.0:
                    weights = weights + config.lr * (gold_aspect[i] - hyp_aspect[i])
        epoch_losses.append(total_loss / total_positions if total_positions else 0.0)
    return TuneResult(weights=dict(zip(names, weights.tolist())), epoch_losses=epoch_losses)


def hinge_gradient(
    weights: np.ndarray,
    gold_base: float,
    hyp_base: float,
    gold_aspect: np.ndarray,
    hyp_aspect: np.ndarray,
    margin: float = 0.0,
) -> np.ndarray:
    """Analytic gradient of the hinge loss with respect to the weights.

    Zero when the gold wins by the margin; otherwise the per-aspect score
    differences, negated (gold minus hypothesis).
    """
    s_gold = gold_base + float(weights @ gold_aspect)
    s_hyp = hyp_base + float(weights @ hyp_aspect)
    if margin - (s_gold - s_hyp) > 0.0:
        return -(gold_aspect - hyp_aspect)
    return np.zeros_like(weights)


def _full_score(
    lm: CondSeqLM,
    scorers: Mapping[str, ScorerInterface],
    weights: Mapping[str, float],
    prompt: str,
    sequence: str,
) -> float:
    total = lm.log_prob(prompt, sequence, include_eos=False)
    for name, w in weights.items():
        if w != 0.0:
            total += w * scorers[name].score(prompt, sequence)
    return total


def ranking_accuracy(
    lm: CondSeqLM,
    scorers: Mapping[str, ScorerInterface],
    weights: MixtureWeights | Mapping[str, float],
    eval_set: Sequence[tuple[str, str]],
    seed: int = 0,
    sampler: SamplerConfig | None = None,
    forced_hypotheses: Sequence[str] | None = None,
) -> float:
    """Fraction of samples whose generation strictly outscores the gold.

    Ties count as false, so forcing the gold plots as hypotheses yields 0.
    """
    if not eval_set:
        raise ValueError("cannot evaluate ranking accuracy on an empty set")
    sampler = sampler or SamplerConfig()
    wd = weights.as_dict() if isinstance(weights, MixtureWeights) else dict(weights)
    wins = 0
    for idx, (prompt, gold) in enumerate(eval_set):
        if forced_hypotheses is not None:
            hyp = forced_hypotheses[idx]
        else:
            cfg = SamplerConfig(
                k=sampler.k,
                temperature=sampler.temperature,
                max_len=sampler.max_len,
                seed=int(np.uint64(seed) ^ np.uint64(idx)),
            )
            hyp, _trace = generate_plot(lm, scorers, wd, prompt, cfg)
        if _full_score(lm, scorers, wd, prompt, hyp) > _full_score(lm, scorers, wd, prompt, gold):
            wins += 1
    return wins / len(eval_set)


@dataclass
class AblationRow:
    name: str
    aspects: list[str]
    ranking_accuracy: float
    vocab_token_ratio: float | None
    entities_per_plot: float | None
    weights: dict[str, float] = field(default_factory=dict)


def run_ablations(
    lm: CondSeqLM,
    scorers: Mapping[str, ScorerInterface],
    tune_set: Sequence[tuple[str, str]],
    eval_set: Sequence[tuple[str, str]],
    subsets: Mapping[str, Sequence[str]],
    config: TunerConfig | None = None,
    sampler: SamplerConfig | None = None,
    seed: int = 0,
) -> list[AblationRow]:
    """Tune and evaluate each scorer subset; one report row per subset."""
    if not subsets:
        raise ValueError("ablation subset list is empty")
    sampler = sampler or SamplerConfig()
    rows: list[AblationRow] = []
    for name, aspects in subsets.items():
        missing = [a for a in aspects if a not in scorers]
        if missing:
            raise ValueError(f"subset {name!r} names unknown scorers {missing}")
        subset_scorers = {a: scorers[a] for a in aspects}
        result = tune_weights(lm, subset_scorers, tune_set, config=config, sampler=sampler)
        ra = ranking_accuracy(
            lm, subset_scorers, result.weights, eval_set, seed=seed, sampler=sampler
        )
        generations = []
        for idx, (prompt, _gold) in enumerate(eval_set):
            cfg = SamplerConfig(
                k=sampler.k,
                temperature=sampler.temperature,
                max_len=sampler.max_len,
                seed=int(np.uint64(seed) ^ np.uint64(idx)),
            )
            text, _trace = generate_plot(lm, subset_scorers, result.weights, prompt, cfg)
            generations.append(text)
        parsed = []
        for text in generations:
            try:
                parsed.append(parse_plot(text))
            except PlotParseError:
                continue
        rows.append(
            AblationRow(
                name=name,
                aspects=list(aspects),
                ranking_accuracy=ra,
                vocab_token_ratio=vocab_token_ratio([g.split() for g in generations]),
                entities_per_plot=entities_per_plot(parsed) if parsed else None,
                weights=result.weights,
            )
        )
    return rows


def ablation_report_tsv(rows: Sequence[AblationRow]) -> str:
    lines = ["subset\tRA\tV:T\tEntities"]
    for row in rows:
        vt = f"{row.vocab_token_ratio:.2f}" if row.vocab_token_ratio is not None else "-"
        ent = f"{row.entities_per_plot:.2f}" if row.entities_per_plot is not None else "-"
        lines.append(f"{row.name}\t{row.ranking_accuracy:.2f}\t{vt}\t{ent}")
    return "\n".join(lines) + "\n"


def write_weights(path: str | Path, weights: Mapping[str, float]) -> None:
    Path(path).write_text(json.dumps(dict(weights), sort_keys=True), encoding="utf-8")
