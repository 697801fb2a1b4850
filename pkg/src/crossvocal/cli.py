"""Command line interface for the full verification pipeline.

Subcommands cover corpus generation, manifest work (stats, split, qa),
training, embedding extraction, trial construction, scoring, evaluation,
and embedding-space visualization. All randomized steps take --seed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ddal import LossError
from .frontend import AudioError
from .manifest import (
    ManifestError,
    format_stats,
    load_manifest,
    manifest_stats,
    quality_assess,
    split_by_utterance_count,
)
from .metrics import DCFConfig, MetricError
from .toy import ToyCorpusSpec, gen_toy_corpus
from .trainer import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    TrainConfig,
    extract_embeddings,
    load_checkpoint,
    load_embeddings,
    save_embeddings,
    train,
    train_config_from_mapping,
)
from .trials import (
    SCENARIOS,
    TrialError,
    build_trials,
    evaluate_trials,
    load_scores,
    load_trials,
    save_scores,
    save_trials,
    score_trials,
    trial_path,
)

_ERRORS = (
    ManifestError,
    AudioError,
    MetricError,
    TrialError,
    ConfigError,
    CheckpointError,
    DivergenceError,
    LossError,
    ValueError,
    OSError,
)


def _cmd_gen_toy(args) -> int:
    spec = ToyCorpusSpec(
        n_speakers=args.speakers,
        utts_per_domain=args.utts_per_domain,
        duration_range=(args.duration_min, args.duration_max),
        seed=args.seed,
    )
    manifest = gen_toy_corpus(spec, args.out)
    print(f"wrote {len(manifest)} utterances under {args.out}")
    return 0


def _cmd_stats(args) -> int:
    stats = manifest_stats(load_manifest(args.manifest))
    print(format_stats(stats))
    return 0


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    train_m, test_m = split_by_utterance_count(manifest, args.train_speakers)
    train_m.save(args.out_train)
    test_m.save(args.out_test)
    print(
        f"train: {len(train_m.speakers())} speakers / {len(train_m)} utts -> {args.out_train}\n"
        f"test:  {len(test_m.speakers())} speakers / {len(test_m)} utts -> {args.out_test}"
    )
    return 0


def _cmd_qa(args) -> int:
    manifest = load_manifest(args.manifest)
    embeddings = load_embeddings(args.embeddings)
    report = quality_assess(manifest, embeddings, threshold=args.threshold)
    report.save(args.out)
    print(f"flagged {len(report.flags)}/{report.n_checked} utterances -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    mapping = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            mapping = yaml.safe_load(fh) or {}
        if not isinstance(mapping, dict):
            raise ConfigError(f"{args.config}: expected a YAML mapping")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key] = yaml.safe_load(value)
    if args.seed is not None:
        mapping["seed"] = args.seed
    config = train_config_from_mapping(mapping)
    manifest = load_manifest(args.manifest)
    valid_manifest = load_manifest(args.valid_manifest) if args.valid_manifest else None
    valid_trials = load_trials(args.valid_trials) if args.valid_trials else None
    result = train(
        config,
        manifest,
        args.audio_root,
        args.run_dir,
        valid_manifest=valid_manifest,
        valid_trials=valid_trials,
    )
    last = result.reports[-1]
    print(
        f"trained {config.variant} for {last.step} steps, final total {last.total:.4f}\n"
        f"checkpoint: {result.final_checkpoint}\nloss log:   {result.loss_log}"
    )
    if result.best_eer is not None:
        print(f"best validation EER {result.best_eer:.4f} -> {result.best_checkpoint}")
    return 0


def _cmd_embed(args) -> int:
    model, _, _ = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    embeddings, errors = extract_embeddings(model, manifest, args.audio_root)
    save_embeddings(args.out, embeddings)
    print(f"embedded {len(embeddings)}/{len(manifest)} utterances -> {args.out}")
    for utt_id in sorted(errors):
        print(f"warning: skipped {utt_id}: {errors[utt_id]}", file=sys.stderr)
    return 0


def _cmd_trials(args) -> int:
    manifest = load_manifest(args.manifest)
    scenarios = args.scenarios.split(",") if args.scenarios else list(SCENARIOS)
    for scenario in scenarios:
        trials = build_trials(
            manifest, scenario, n_target=args.n_target, n_nontarget=args.n_nontarget,
            seed=args.seed,
        )
        path = trial_path(args.out_base, scenario)
        save_trials(trials, path)
        n_target = sum(t.is_target for t in trials)
        print(f"{scenario}: {len(trials)} trials ({n_target} target) -> {path}")
    return 0


def _cmd_score(args) -> int:
    trials = load_trials(args.trials)
    embeddings = load_embeddings(args.embeddings)
    scores = score_trials(trials, embeddings)
    save_scores(trials, scores, args.out)
    print(f"scored {len(trials)} trials -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    trials = load_trials(args.trials)
    scores = load_scores(args.scores)
    result = evaluate_trials(
        trials, scores, DCFConfig(p_target=args.p_target, c_miss=args.c_miss, c_fa=args.c_fa)
    )
    line = (
        f"EER {100.0 * result.eer:.2f}%  minDCF {result.min_dcf:.4f}  "
        f"({result.n_target} target / {result.n_nontarget} nontarget trials)"
    )
    print(line)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(line + "\n", encoding="utf-8")
    return 0


def _cmd_tsne(args) -> int:
    from .tsne import project_embeddings

    manifest = load_manifest(args.manifest)
    embeddings = load_embeddings(args.embeddings)
    result = project_embeddings(
        embeddings,
        manifest,
        args.out_image,
        n_speakers=args.n_speakers,
        perplexity=args.perplexity,
        seed=args.seed,
        coords_path=args.coords,
    )
    print(
        f"projected {len(result.utt_ids)} utterances from {args.n_speakers} speakers\n"
        f"image:  {result.image_path}\ncoords: {result.coords_path}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossvocal",
        description="Cross-domain speaker verification for stage speech and singing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="generate the synthetic two-domain toy corpus")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--speakers", type=int, default=30)
    p.add_argument("--utts-per-domain", type=int, default=10)
    p.add_argument("--duration-min", type=float, default=2.0)
    p.add_argument("--duration-max", type=float, default=3.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_toy)

    p = sub.add_parser("stats", help="per-domain manifest statistics")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("split", help="speaker-disjoint train/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-speakers", type=int, required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("qa", help="flag utterances far from their speaker centroid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--embeddings", required=True, help="npz of utt_id -> embedding")
    p.add_argument("--threshold", type=float, default=0.4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_qa)

    p = sub.add_parser("train", help="train a variant (M1-M6)")
    p.add_argument("--config", help="YAML training config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (dotted keys allowed)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--run-dir", required=True)
    p.add_argument("--valid-manifest")
    p.add_argument("--valid-trials")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("embed", help="extract identity embeddings to npz")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("trials", help="build verification trial lists")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-base", required=True, help="files become <base>.<scenario>.trials")
    p.add_argument("--scenarios", help=f"comma list from {','.join(SCENARIOS)} (default all)")
    p.add_argument("--n-target", type=int, default=5)
    p.add_argument("--n-nontarget", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_trials)

    p = sub.add_parser("score", help="cosine-score a trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="EER and minimum DCF of scored trials")
    p.add_argument("--scores", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--p-target", type=float, default=0.01)
    p.add_argument("--c-miss", type=float, default=1.0)
    p.add_argument("--c-fa", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tsne", help="2-D embedding map of a speaker subset")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-image", required=True)
    p.add_argument("--coords", help="coordinates file (default <image>.coords.txt)")
    p.add_argument("--n-speakers", type=int, default=11)
    p.add_argument("--perplexity", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_tsne)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
