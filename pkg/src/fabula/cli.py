"""Command-line front end wiring the full pipeline.

Subcommands: extract, negatives, train-rescorer, train-lm, tune, generate,
evaluate, demo.  Every run is reproducible from the global seed: stage seeds
derive from it, per-record seeds from the stage seed XOR the record index,
and each command logs the resolved configuration it ran with.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from fabula import __version__
from fabula.config import ConfigError, PipelineConfig, load_config, stage_seed
from fabula.decoder import DecodeTrace, MixtureWeights, detokenize, generate_plot, generate_story
from fabula.extract import (
    DEFAULT_STOPWORDS,
    ExtractionError,
    apply_unk,
    extract_plot,
    filter_test_prompts,
    read_annotated_stories,
    read_lines,
    split_dataset,
    token_counts,
    truncate_story,
    write_lines,
)
from fabula.lm import CondSeqLM, SamplerConfig, train_lm
from fabula.metrics import SystemCorpus, emit_report
from fabula.negatives import (
    ASPECTS,
    build_training_set,
    read_examples_jsonl,
    write_examples_jsonl,
    write_examples_tsv,
)
from fabula.plots import PlotParseError, parse_plot
from fabula.rescorer import NgramRescorer, train_classifier
from fabula.tuner import (
    TunerConfig,
    ablation_report_tsv,
    ranking_accuracy,
    run_ablations,
    tune_weights,
    write_weights,
)

log = logging.getLogger("fabula")

SPLIT_NAMES = ("lm_train", "valid", "test", "rescorer_train", "mixture_train")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit((EXIT_USAGE, f"{self.prog}: error: {message}"))


def _load_or_default_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config.seed = args.seed
    return config


def _log_resolved_config(config: PipelineConfig, outputs: Path, command: str) -> None:
    outputs.mkdir(parents=True, exist_ok=True)
    path = outputs / f"{command}.config.json"
    path.write_text(
        json.dumps(config.to_dict(), sort_keys=True, indent=2), encoding="utf-8"
    )
    log.info("resolved config written to %s", path)


def _extract_one(story) -> str:
    from fabula.plots import serialize_plot

    return serialize_plot(extract_plot(story))


def cmd_extract(args) -> int:
    config = _load_or_default_config(args)
    data_dir = Path(config.paths.data)
    data_dir.mkdir(parents=True, exist_ok=True)
    _log_resolved_config(config, Path(config.paths.outputs), "extract")
    input_path = Path(args.input) if args.input else data_dir / "annotated.jsonl"
    if not input_path.exists():
        raise DataError(f"input file not found: {input_path}")

    stories = list(read_annotated_stories(input_path))
    if not stories:
        log.warning("input %s contained no records; writing empty outputs", input_path)
    if args.jobs and args.jobs > 1 and stories:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            plot_strings = list(pool.map(_extract_one, stories, chunksize=16))
    else:
        plot_strings = [_extract_one(story) for story in stories]

    story_tokens = [truncate_story(s.story_tokens, args.max_story_tokens) for s in stories]
    if config.unk.enabled:
        counts = token_counts(story_tokens)
        story_tokens = [apply_unk(t, counts, config.unk.min_count) for t in story_tokens]

    records = [
        (story.prompt, plot, " ".join(tokens))
        for story, plot, tokens in zip(stories, plot_strings, story_tokens)
    ]
    write_lines(data_dir / "all.prompts", [r[0] for r in records])
    write_lines(data_dir / "all.plots", [r[1] for r in records])
    write_lines(data_dir / "all.stories", [r[2] for r in records])

    spec = config.split
    spec.seed = stage_seed(config.seed, "split")
    splits = split_dataset(records, spec)
    for name, subset in splits.as_dict().items():
        write_lines(data_dir / f"{name}.prompts", [r[0] for r in subset])
        write_lines(data_dir / f"{name}.plots", [r[1] for r in subset])
        write_lines(data_dir / f"{name}.stories", [r[2] for r in subset])

    if config.filter.enabled:
        stopwords = DEFAULT_STOPWORDS
        if config.filter.stopwords:
            stopwords = frozenset(read_lines(config.filter.stopwords))
        result = filter_test_prompts(
            [r[0] for r in splits.test], [r[0] for r in splits.lm_train], stopwords
        )
        write_lines(data_dir / "test_kept.prompts", result.kept)
        report = {
            "kept": len(result.kept),
            "excluded": len(result.excluded),
            "exclusion_pct": result.exclusion_pct,
        }
        outputs = Path(config.paths.outputs)
        outputs.mkdir(parents=True, exist_ok=True)
        (outputs / "filter_report.json").write_text(
            json.dumps(report, sort_keys=True, indent=2), encoding="utf-8"
        )
        print(result.summary())
    print(f"extracted {len(records)} records into {data_dir}")
    return EXIT_OK


def _read_pairs(data_dir: Path, split: str) -> list[tuple[str, str]]:
    prompts = data_dir / f"{split}.prompts"
    plots = data_dir / f"{split}.plots"
    for p in (prompts, plots):
        if not p.exists():
            raise DataError(f"missing split file {p}; run `fabula extract` first")
    return list(zip(read_lines(prompts), read_lines(plots)))


def cmd_negatives(args) -> int:
    config = _load_or_default_config(args)
    data_dir = Path(config.paths.data)
    _log_resolved_config(config, Path(config.paths.outputs), "negatives")
    corpus = _read_pairs(data_dir, "rescorer_train")
    aspects = ASPECTS if args.aspect == "all" else (args.aspect,)
    for aspect in aspects:
        training = build_training_set(
            aspect,
            corpus,
            stage_seed(config.seed, f"neg-{aspect}"),
            single_sentence=args.single_sentence,
        )
        write_examples_jsonl(data_dir / f"examples.{aspect}.jsonl", training.examples)
        write_examples_tsv(data_dir / f"examples.{aspect}.tsv", training.examples)
        print(
            f"{aspect}: wrote {len(training.examples)} examples "
            f"({training.skipped} records skipped)"
        )
    return EXIT_OK


def cmd_train_rescorer(args) -> int:
    config = _load_or_default_config(args)
    data_dir = Path(config.paths.data)
    model_dir = Path(config.paths.models)
    model_dir.mkdir(parents=True, exist_ok=True)
    _log_resolved_config(config, Path(config.paths.outputs), "train-rescorer")
    aspects = ASPECTS if args.aspect == "all" else (args.aspect,)
    rc = config.rescorer
    for aspect in aspects:
        path = data_dir / f"examples.{aspect}.jsonl"
        if not path.exists():
            raise DataError(f"missing examples file {path}; run `fabula negatives` first")
        examples = read_examples_jsonl(path)
        if not examples:
            raise DataError(f"{path} contains no examples")
        model = train_classifier(
            examples,
            lr=rc.lr,
            epochs=rc.epochs,
            l2=rc.l2,
            seed=stage_seed(config.seed, f"rescorer-{aspect}"),
            batch_size=rc.batch_size,
            feature_dim=rc.feature_dim,
            ngram_range=(rc.ngram_min, rc.ngram_max),
            hash_seed=rc.hash_seed,
            aspect=aspect,
        )
        out = model_dir / f"rescorer.{aspect}.json"
        model.save(out)
        print(f"{aspect}: train accuracy {model.train_accuracy:.4f}, saved {out}")
    return EXIT_OK


def cmd_train_lm(args) -> int:
    config = _load_or_default_config(args)
    data_dir = Path(config.paths.data)
    model_dir = Path(config.paths.models)
    model_dir.mkdir(parents=True, exist_ok=True)
    _log_resolved_config(config, Path(config.paths.outputs), "train-lm")
    order = args.order if args.order is not None else config.lm.order
    k_add = args.add_k if args.add_k is not None else config.lm.k_add
    pairs = _read_pairs(data_dir, "lm_train")
    if args.stage == "plot":
        training = pairs
    else:
        stories_path = data_dir / "lm_train.stories"
        if not stories_path.exists():
            raise DataError(f"missing split file {stories_path}")
        stories = read_lines(stories_path)
        training = [
            (f"{prompt} <EOT> {plot}", story)
            for (prompt, plot), story in zip(pairs, stories)
        ]
    if not training:
        raise DataError("lm_train split is empty")
    model = train_lm(training, order=order, k_add=k_add, backoff=config.lm.backoff)
    out = model_dir / f"lm.{args.stage}.json"
    model.save(out)
    print(f"trained {args.stage} model on {len(training)} pairs, saved {out}")
    return EXIT_OK


def _load_scorers(scorer_dir: Path) -> dict[str, NgramRescorer]:
    scorers = {}
    for aspect in ASPECTS:
        path = scorer_dir / f"rescorer.{aspect}.json"
        if not path.exists():
            raise DataError(f"missing rescorer model {path}")
        scorers[aspect] = NgramRescorer.load(path)
    return scorers


def cmd_tune(args) -> int:
    config = _load_or_default_config(args)
    data_dir = Path(config.paths.data)
    model_dir = Path(config.paths.models)
    outputs = Path(config.paths.outputs)
    outputs.mkdir(parents=True, exist_ok=True)
    _log_resolved_config(config, outputs, "tune")
    lm_path = model_dir / "lm.plot.json"
    if not lm_path.exists():
        raise DataError(f"missing plot model {lm_path}; run `fabula train-lm --stage plot`")
    lm = CondSeqLM.load(lm_path)
    scorers = _load_scorers(model_dir)
    validation = _read_pairs(data_dir, "mixture_train")
    if not validation:
        raise DataError("mixture_train split is empty")
    tuner_cfg = TunerConfig(
        lr=config.tuner.lr,
        epochs=config.tuner.epochs,
        margin=config.tuner.margin,
        granularity=config.tuner.granularity,
        refresh_hypotheses=config.tuner.refresh_hypotheses,
        seed=stage_seed(config.seed, "tune"),
    )
    result = tune_weights(lm, scorers, validation, config=tuner_cfg, sampler=config.plot_sampler)
    weights_path = model_dir / "weights.json"
    write_weights(weights_path, result.weights)
    print("tuned weights: " + " ".join(f"{k}={v:.4f}" for k, v in result.weights.items()))
    print("mean loss per epoch: " + " ".join(f"{v:.4f}" for v in result.epoch_losses))

    if args.ablations:
        subsets: dict[str, list[str]] = {"all5": list(ASPECTS)}
        subsets["all4-minus-intra"] = [a for a in ASPECTS if a != "intra"]
        for aspect in ASPECTS:
            subsets[aspect] = [aspect]
        rows = run_ablations(
            lm,
            scorers,
            validation,
            validation,
            subsets,
            config=tuner_cfg,
            sampler=config.plot_sampler,
            seed=stage_seed(config.seed, "ablate"),
        )
        report = ablation_report_tsv(rows)
        (outputs / "ablations.tsv").write_text(report, encoding="utf-8")
        print(report, end="")
    return EXIT_OK


def _sampler_from_args(args, base: SamplerConfig) -> SamplerConfig:
    return SamplerConfig(
        k=args.top_k if args.top_k is not None else base.k,
        temperature=args.temperature if args.temperature is not None else base.temperature,
        max_len=args.max_len if args.max_len is not None else base.max_len,
        seed=0,
    )


def _per_prompt(cfg: SamplerConfig, seed: int, index: int) -> SamplerConfig:
    return SamplerConfig(
        k=cfg.k,
        temperature=cfg.temperature,
        max_len=cfg.max_len,
        seed=int(np.uint64(seed) ^ np.uint64(index)),
    )


def cmd_generate(args) -> int:
    config = _load_or_default_config(args)
    seed = stage_seed(config.seed, "generate")
    if not args.prompts:
        raise DataError("--prompts is required")
    prompts = read_lines(args.prompts)
    mode = args.mode

    plot_cfg = _sampler_from_args(args, config.plot_sampler)
    story_cfg = _sampler_from_args(args, config.story_sampler)

    zero = {aspect: 0.0 for aspect in ASPECTS}
    trace_rows: list[dict] = []

    def plot_system() -> tuple[CondSeqLM, dict, dict[str, float]]:
        if not args.lm:
            raise DataError(f"--lm is required for mode {mode}")
        lm = CondSeqLM.load(args.lm)
        if mode in ("aristotelian", "end2end") and args.weights:
            if not args.scorers:
                raise DataError("--scorers is required when --weights is given")
            weights = MixtureWeights.load(args.weights).as_dict()
            scorers = _load_scorers(Path(args.scorers))
        elif mode == "aristotelian":
            raise DataError("--weights and --scorers are required for aristotelian mode")
        else:
            weights = dict(zero)
            scorers = {aspect: _ZeroScorer() for aspect in ASPECTS}
        return lm, scorers, weights

    if mode in ("naive", "aristotelian", "end2end"):
        lm, scorers, weights = plot_system()
        plots = []
        for i, prompt in enumerate(prompts):
            text, trace = generate_plot(lm, scorers, weights, prompt, _per_prompt(plot_cfg, seed, i))
            plots.append(text)
            if args.trace:
                for step_idx, step in enumerate(trace.steps):
                    trace_rows.append({"prompt_index": i, "step": step_idx, **step.to_json_dict()})
    if mode == "story":
        if not args.plots:
            raise DataError("--plots is required for story mode")
        plots = read_lines(args.plots)
        if len(plots) != len(prompts):
            raise DataError(
                f"prompt/plot line counts differ: {len(prompts)} vs {len(plots)}"
            )

    if mode in ("story", "end2end"):
        story_lm_path = args.story_lm or args.lm
        if not story_lm_path:
            raise DataError("--story-lm is required for story realization")
        story_lm = CondSeqLM.load(story_lm_path)
        story_seed = stage_seed(config.seed, "story")
        stories = [
            generate_story(story_lm, prompt, plot, _per_prompt(story_cfg, story_seed, i))
            for i, (prompt, plot) in enumerate(zip(prompts, plots))
        ]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if mode in ("naive", "aristotelian"):
        write_lines(out, plots)
        print(f"wrote {len(plots)} plots to {out}")
    elif mode == "story":
        write_lines(out, stories)
        write_lines(out.with_suffix(out.suffix + ".txt"), [detokenize(s).replace("\n", " / ") for s in stories])
        print(f"wrote {len(stories)} stories to {out}")
    else:
        write_lines(Path(str(out) + ".plots"), plots)
        write_lines(Path(str(out) + ".stories"), stories)
        print(f"wrote {len(plots)} plots and stories to {out}.plots / {out}.stories")
    if args.trace:
        trace_path = Path(args.trace)
        with open(trace_path, "w", encoding="utf-8") as fh:
            for row in trace_rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        print(f"wrote decode trace to {trace_path}")
    return EXIT_OK


class _ZeroScorer:
    def score(self, context: str, candidate: str) -> float:
        return 0.0


def cmd_evaluate(args) -> int:
    config = _load_or_default_config(args)
    outputs = Path(config.paths.outputs)
    outputs.mkdir(parents=True, exist_ok=True)
    _log_resolved_config(config, outputs, "evaluate")
    if not args.system:
        raise DataError("at least one --system NAME=STORIES[,PLOTS] is required")
    systems: dict[str, SystemCorpus] = {}
    for item in args.system:
        if "=" not in item:
            raise DataError(f"bad --system value {item!r}; expected NAME=STORIES[,PLOTS]")
        name, paths = item.split("=", 1)
        parts = paths.split(",")
        texts = None
        plots = None
        if parts[0]:
            texts = [line.split() for line in read_lines(parts[0])]
        if len(parts) > 1 and parts[1]:
            plot_lines = read_lines(parts[1])
            try:
                plots = [parse_plot(line) for line in plot_lines]
            except PlotParseError as exc:
                raise DataError(f"bad plot in {parts[1]}: {exc}") from exc
        systems[name] = SystemCorpus(texts=texts, plots=plots)
    lexicon = None
    lexicon_path = args.verb_lexicon or config.metrics.verb_lexicon
    if lexicon_path:
        lexicon = frozenset(read_lines(lexicon_path))
    report = emit_report(systems, verb_lexicon=lexicon)
    report.write(outputs / "report.tsv", outputs / "report.json")
    print(report.to_tsv(), end="")
    print(f"wrote {outputs / 'report.tsv'} and {outputs / 'report.json'}")
    return EXIT_OK


def cmd_demo(args) -> int:
    from fabula.demo import run_demo

    result = run_demo(seed=args.seed if args.seed is not None else 13, quick=args.quick, out_dir=args.dir)
    print(result.summary, end="")
    log.info("demo artifacts in %s (%.1fs)", result.out_dir, result.elapsed)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="fabula", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fabula {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="pipeline config JSON file")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes where supported")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("extract", help="extract plots, write splits, filter test prompts")
    common(p)
    p.add_argument("--input", help="annotated JSONL (default: <data>/annotated.jsonl)")
    p.add_argument("--max-story-tokens", type=int, default=1000)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("negatives", help="build rescorer training pairs")
    common(p)
    p.add_argument("--aspect", choices=ASPECTS + ("all",), default="all")
    p.add_argument(
        "--single-sentence",
        action="store_true",
        help="intra aspect: permute one qualifying sentence instead of all",
    )
    p.set_defaults(func=cmd_negatives)

    p = sub.add_parser("train-rescorer", help="train aspect classifiers")
    common(p)
    p.add_argument("--aspect", choices=ASPECTS + ("all",), default="all")
    p.set_defaults(func=cmd_train_rescorer)

    p = sub.add_parser("train-lm", help="train a plot or story sequence model")
    common(p)
    p.add_argument("--stage", choices=("plot", "story"), required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--add-k", type=float)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("tune", help="tune mixture weights; optionally run ablations")
    common(p)
    p.add_argument("--ablations", action="store_true")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("generate", help="generate plots and/or stories")
    common(p)
    p.add_argument("--mode", choices=("naive", "aristotelian", "story", "end2end"), required=True)
    p.add_argument("--weights", help="mixture weights JSON file")
    p.add_argument("--scorers", help="directory with rescorer.<aspect>.json models")
    p.add_argument("--lm", help="plot model file")
    p.add_argument("--story-lm", help="story model file")
    p.add_argument("--prompts", help="one prompt per line")
    p.add_argument("--plots", help="one plot per line (story mode)")
    p.add_argument("--out", required=True, help="output file (prefix for end2end)")
    p.add_argument("--trace", help="optional JSONL decode trace output")
    p.add_argument("--top-k", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-len", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="compute metric report over systems")
    common(p)
    p.add_argument(
        "--system",
        action="append",
        metavar="NAME=STORIES[,PLOTS]",
        help="system name and line-aligned files; empty STORIES gives a plot-only system",
    )
    p.add_argument("--verb-lexicon", help="one verb per line, for story verb metrics")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("demo", help="synthetic end-to-end run with self-checks")
    common(p)
    p.add_argument("--quick", action="store_true", help="50 records instead of 500")
    p.add_argument("--dir", help="output directory (default: ./fabula-demo)")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, tuple):
            code, message = exc.code
            print(message, file=sys.stderr)
            return code
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fabula: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ExtractionError, PlotParseError, OSError, ValueError) as exc:
        print(f"fabula: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("internal error")
        print(f"fabula: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
