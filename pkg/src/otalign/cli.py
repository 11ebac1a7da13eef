"""Command-line pipeline: one entry point, one subcommand per stage.

Every run resolves its flags into a manifest that is printed as JSON on
stderr before execution. Exit codes: 0 success, 1 usage error, 2 data
error. All subcommands are deterministic given argv, inputs, and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fixtures_mod
from .align import AlignConfig, AlignStats, align_with_strategy, fuse_pipeline, window_step
from .diag import center_distance, compactness, embed_step, load_embedding
from .dist import (
    KIND_LOGITS,
    DistributionMatrix,
    MatrixFormatError,
    read_matrices,
    softmax_step,
    write_matrices,
)
from .fusion import FusionConfig, ToyModel, corpus_losses, predict_matrix, train_toy
from .pairing import groups_to_obj, pair_tokens
from .transport import OtConfig, SolverError, TransportPlan, plan_cost, sinkhorn
from .vocab import VocabError, load_vocab, tokenize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _print_manifest(subcommand: str, config: dict, inputs: list, outputs: list, seed) -> None:
    manifest = {
        "subcommand": subcommand,
        "resolved_config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
    }
    print(json.dumps(manifest, separators=(",", ":")), file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj, separators=(",", ":")))


def _as_probability_matrix(matrix: DistributionMatrix) -> DistributionMatrix:
    """Convert stored steps to probabilities without truncation."""
    steps = [
        softmax_step(s) if s.kind == KIND_LOGITS else window_step(s, len(s))
        for s in matrix.steps
    ]
    return DistributionMatrix(vocab=matrix.vocab, gold_ids=matrix.gold_ids.copy(), steps=steps)


def _ot_config(args) -> OtConfig:
    return OtConfig(
        temperature=args.temperature,
        threshold=args.threshold,
        max_iterations=args.max_iters,
    )


def _add_ot_flags(parser) -> None:
    parser.add_argument("--top-k", type=int, default=10, help="alignment window size")
    parser.add_argument("--temperature", type=float, default=10.0, help="plan sharpness")
    parser.add_argument("--threshold", type=float, default=1e-5, help="marginal L1 tolerance")
    parser.add_argument("--max-iters", type=int, default=1000, help="scaling iteration cap")


def _cmd_tokenize(args) -> int:
    vocab = load_vocab(args.vocab)
    _print_manifest("tokenize", {"vocab": vocab.name}, [args.vocab], [], None)
    seq = tokenize(vocab, args.text)
    _emit({"vocab": seq.vocab, "ids": list(seq.ids), "texts": list(seq.texts)})
    return EXIT_OK


def _cmd_pair(args) -> int:
    src_vocab = load_vocab(args.src_vocab)
    tgt_vocab = load_vocab(args.tgt_vocab)
    _print_manifest(
        "pair",
        {"src_vocab": src_vocab.name, "tgt_vocab": tgt_vocab.name},
        [args.src_vocab, args.tgt_vocab],
        [],
        None,
    )
    result = pair_tokens(tokenize(src_vocab, args.text), tokenize(tgt_vocab, args.text))
    _emit(groups_to_obj(result))
    return EXIT_OK


def _cmd_align(args) -> int:
    cfg = AlignConfig(strategy=args.strategy, ot=_ot_config(args), window=args.top_k)
    stats_path = Path(args.stats) if args.stats else Path(str(args.out) + ".stats.json")
    _print_manifest(
        "align",
        {
            "strategy": cfg.strategy,
            "window": cfg.window,
            "temperature": cfg.ot.temperature,
            "threshold": cfg.ot.threshold,
            "max_iterations": cfg.ot.max_iterations,
            "fusion": args.fusion or "none",
        },
        [args.src, args.tgt, args.src_vocab, args.tgt_vocab],
        [args.out, stats_path],
        None,
    )
    src_vocab = load_vocab(args.src_vocab)
    tgt_vocab = load_vocab(args.tgt_vocab)
    srcs = read_matrices(args.src)
    tgts = read_matrices(args.tgt)
    if len(srcs) != len(tgts):
        raise MatrixFormatError(
            f"source file has {len(srcs)} sequences but target file has {len(tgts)}"
        )
    stats = AlignStats()
    if args.fusion:
        vocabs = {src_vocab.name: src_vocab, tgt_vocab.name: tgt_vocab}
        fusion_cfg = FusionConfig(function=args.fusion)
        fused = [
            fuse_pipeline([s], t, vocabs, cfg, fusion_cfg, stats) for s, t in zip(srcs, tgts)
        ]
    else:
        fused = [
            align_with_strategy(s, t, src_vocab, tgt_vocab, cfg, stats)
            for s, t in zip(srcs, tgts)
        ]
    write_matrices(fused, args.out)
    stats_path.write_text(json.dumps(stats.to_obj(), separators=(",", ":")) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_sinkhorn(args) -> int:
    cfg = _ot_config(args)
    _print_manifest(
        "sinkhorn",
        {
            "temperature": cfg.temperature,
            "threshold": cfg.threshold,
            "max_iterations": cfg.max_iterations,
        },
        [args.instance],
        [],
        None,
    )
    path = Path(args.instance)
    if not path.is_file():
        raise MatrixFormatError(f"instance file not found: {path}")
    obj = json.loads(path.read_text(encoding="utf-8"))
    for key in ("cost", "a", "b"):
        if key not in obj:
            raise MatrixFormatError(f"{path}: missing field {key!r}")
    cost = np.asarray(obj["cost"], dtype=np.float64)
    plan: TransportPlan = sinkhorn(cost, obj["a"], obj["b"], cfg)
    _emit(
        {
            "plan": [[float(v) for v in row] for row in plan.entries],
            "iterations": plan.iterations,
            "converged": plan.converged,
            "cost": plan_cost(cost, plan),
        }
    )
    return EXIT_OK


def _cmd_loss(args) -> int:
    cfg = FusionConfig(discrepancy=args.discrepancy, combination_weight=args.lam)
    _print_manifest(
        "loss",
        {"discrepancy": cfg.discrepancy, "combination_weight": cfg.combination_weight},
        [args.pred, args.fused],
        [],
        None,
    )
    preds = [_as_probability_matrix(m) for m in read_matrices(args.pred)]
    fused = [_as_probability_matrix(m) for m in read_matrices(args.fused)]
    if len(preds) != len(fused):
        raise MatrixFormatError(
            f"prediction file has {len(preds)} sequences but fused file has {len(fused)}"
        )
    clm, fusion, combined = corpus_losses(preds, fused, cfg)
    _emit({"clm": clm, "fusion": fusion, "combined": combined})
    return EXIT_OK


def _cmd_train_toy(args) -> int:
    cfg = FusionConfig(discrepancy=args.discrepancy, combination_weight=args.lam)
    _print_manifest(
        "train-toy",
        {
            "discrepancy": cfg.discrepancy,
            "combination_weight": cfg.combination_weight,
            "lr": args.lr,
            "epochs": args.epochs,
        },
        [args.tgt, args.fused, args.vocab],
        [args.out],
        args.seed,
    )
    vocab = load_vocab(args.vocab)
    tgts = read_matrices(args.tgt)
    fused = [_as_probability_matrix(m) for m in read_matrices(args.fused)]
    corpus = [m.gold_ids for m in tgts]
    model = ToyModel.random(vocab.size, seed=args.seed)
    model, trace = train_toy(model, corpus, fused, cfg, lr=args.lr, epochs=args.epochs)
    with Path(args.out).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "clm", "fusion", "combined"])
        for row in trace:
            writer.writerow([row.epoch, repr(row.clm), repr(row.fusion), repr(row.combined)])
    last = trace[-1]
    _emit({"epoch": last.epoch, "clm": last.clm, "fusion": last.fusion, "combined": last.combined})
    return EXIT_OK


def _cmd_diag(args) -> int:
    _print_manifest(
        "diag",
        {},
        [args.fused, args.tgt, args.embedding],
        [args.out],
        None,
    )
    fused = read_matrices(args.fused)
    tgts = read_matrices(args.tgt)
    if len(fused) != len(tgts):
        raise MatrixFormatError(
            f"fused file has {len(fused)} sequences but target file has {len(tgts)}"
        )
    embedding = load_embedding(args.embedding)
    with Path(args.out).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "compactness_fused", "compactness_target", "center_distance"])
        step_no = 0
        for f_matrix, t_matrix in zip(fused, tgts):
            if len(f_matrix.steps) != len(t_matrix.steps):
                raise MatrixFormatError("fused and target sequences have different lengths")
            f_probs = _as_probability_matrix(f_matrix)
            t_probs = _as_probability_matrix(t_matrix)
            for f_step, t_step in zip(f_probs.steps, t_probs.steps):
                f_tok = embed_step(f_step, embedding)
                t_tok = embed_step(t_step, embedding)
                writer.writerow(
                    [
                        step_no,
                        repr(compactness(f_tok)),
                        repr(compactness(t_tok)),
                        repr(center_distance(f_tok, t_tok)),
                    ]
                )
                step_no += 1
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    _print_manifest(
        "fixtures",
        {"window": args.top_k},
        [],
        [args.out],
        args.seed,
    )
    fixtures_mod.generate(args.out, seed=args.seed, window=args.top_k)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="otalign", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("tokenize", help="greedy longest-match tokenization")
    p.add_argument("--vocab", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(handler=_cmd_tokenize)

    p = sub.add_parser("pair", help="pair two tokenizations of a text")
    p.add_argument("--src-vocab", required=True)
    p.add_argument("--tgt-vocab", required=True)
    p.add_argument("--text", required=True)
    p.set_defaults(handler=_cmd_pair)

    p = sub.add_parser("align", help="fuse a source matrix file into a target one")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--src-vocab", required=True)
    p.add_argument("--tgt-vocab", required=True)
    p.add_argument("--strategy", choices=["ot", "mined", "em"], default="ot")
    _add_ot_flags(p)
    p.add_argument(
        "--fusion",
        choices=["mince", "avgce"],
        default=None,
        help="also combine the aligned matrix with the normalized target "
        "(full pipeline stage); omit for the raw alignment",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None, help="stats JSON path (default <out>.stats.json)")
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("sinkhorn", help="solve one (cost, a, b) instance")
    p.add_argument("--instance", required=True)
    _add_ot_flags(p)
    p.set_defaults(handler=_cmd_sinkhorn)

    p = sub.add_parser("loss", help="clm/fusion/combined losses for matrix files")
    p.add_argument("--pred", required=True)
    p.add_argument("--fused", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--discrepancy", choices=["cross_entropy", "kl"], default="cross_entropy")
    p.set_defaults(handler=_cmd_loss)

    p = sub.add_parser("train-toy", help="desk-scale trainer on the combined objective")
    p.add_argument("--tgt", required=True, help="target matrix file (corpus gold ids)")
    p.add_argument("--fused", required=True, help="fused matrix file (distillation signal)")
    p.add_argument("--vocab", required=True, help="target vocabulary file")
    p.add_argument("--lambda", dest="lam", type=float, default=0.8)
    p.add_argument("--discrepancy", choices=["cross_entropy", "kl"], default="cross_entropy")
    p.add_argument("--lr", type=float, default=20.0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="loss-trace CSV path")
    p.set_defaults(handler=_cmd_train_toy)

    p = sub.add_parser("diag", help="compactness and center-distance CSV")
    p.add_argument("--fused", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_diag)

    p = sub.add_parser("fixtures", help="generate the synthetic two-tokenizer corpus")
    p.add_argument("--seed", type=int, default=fixtures_mod.DEFAULT_SEED)
    p.add_argument("--top-k", type=int, default=fixtures_mod.DEFAULT_WINDOW)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"otalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except (VocabError, MatrixFormatError, SolverError, ValueError, OSError) as exc:
        print(f"otalign: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
