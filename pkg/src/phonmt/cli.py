"""Command-line entry point.

Every command is a pure function of (inputs, flags, seeds); artifact-producing
commands write a ``.manifest.json`` next to each output.  Seeds are mandatory
wherever randomness is involved.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import checkpoint, evaluation, manifest
from .lexicon import LexiconError, load_lexicon, syllable_inventory
from .model import (
    LrSchedule,
    ModelConfig,
    ModelError,
    TrainingError,
    build_model,
    train_model,
)
from .noise import (
    NoiseError,
    ParallelCorpus,
    augment_corpus,
    build_homophone_table,
    homophone_ratio,
    make_noisy_testset,
)
from .pipeline import BpeModel, PipelineError, Vocab, build_vocab, learn_bpe, segment_sentence
from .workflow import Translator, model_config_for, prepare_training


def _default_lexicon_path() -> str:
    data_dir = os.environ.get("PHONMT_DATA_DIR")
    if data_dir:
        return os.path.join(data_dir, "mandarin_lexicon.tsv")
    from importlib import resources

    return str(resources.files("phonmt.data").joinpath("mandarin_lexicon.tsv"))


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def _load_lex(args):
    return load_lexicon(args.lexicon or _default_lexicon_path())


def _flags_of(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func" and v is not None}


# --- subcommand implementations ---------------------------------------------


def cmd_build_table(args) -> int:
    lexicon = _load_lex(args)
    vocab = _read_lines(args.vocab) if args.vocab else None
    table = build_homophone_table(lexicon, vocab)
    lines = [f"{key}\t{' '.join(words)}" for key, words in sorted(table.groups.items())]
    _write_lines(args.output, lines)
    if vocab:
        ratio = homophone_ratio(table, vocab)
        print(f"homophone ratio over vocab: {ratio:.4f}")
    inputs = [args.lexicon or _default_lexicon_path()] + ([args.vocab] if args.vocab else [])
    manifest.write_manifest(args.output, "build-table", _flags_of(args), inputs)
    return 0


def cmd_noisify(args) -> int:
    lexicon = _load_lex(args)
    vocab = _read_lines(args.vocab) if args.vocab else None
    table = build_homophone_table(lexicon, vocab)
    corpus = _read_lines(args.input)
    noisy = make_noisy_testset(corpus, table, args.prob, args.seed)
    _write_lines(args.output, noisy)
    inputs = [args.input, args.lexicon or _default_lexicon_path()]
    manifest.write_manifest(args.output, "noisify", _flags_of(args), inputs)
    return 0


def cmd_augment(args) -> int:
    lexicon = _load_lex(args)
    table = build_homophone_table(lexicon)
    corpus = ParallelCorpus(_read_lines(args.src), _read_lines(args.tgt))
    out = augment_corpus(corpus, table, args.ratio, args.prob, args.seed)
    _write_lines(args.out_src, out.src)
    _write_lines(args.out_tgt, out.tgt)
    inputs = [args.src, args.tgt, args.lexicon or _default_lexicon_path()]
    flags = _flags_of(args)
    manifest.write_manifest(args.out_src, "augment", flags, inputs)
    manifest.write_manifest(args.out_tgt, "augment", flags, inputs)
    return 0


def cmd_learn_bpe(args) -> int:
    corpus = _read_lines(args.input)
    model = learn_bpe(corpus, args.merges)
    model.save(args.output)
    manifest.write_manifest(args.output, "learn-bpe", _flags_of(args), [args.input])
    return 0


def cmd_apply_bpe(args) -> int:
    model = BpeModel.load(args.model)
    out = [
        " ".join(segment_sentence(line.split(), model)) for line in _read_lines(args.input)
    ]
    _write_lines(args.output, out)
    manifest.write_manifest(args.output, "apply-bpe", _flags_of(args), [args.input, args.model])
    return 0


def cmd_build_vocab(args) -> int:
    vocab = build_vocab(_read_lines(args.input), args.max_size)
    vocab.save(args.output)
    manifest.write_manifest(args.output, "build-vocab", _flags_of(args), [args.input])
    return 0


def cmd_train(args) -> int:
    lexicon = _load_lex(args)
    corpus = ParallelCorpus(_read_lines(args.train_src), _read_lines(args.train_tgt))
    prepared = prepare_training(
        corpus, lexicon, seed=args.seed,
        char_level=args.char_level, bpe_merges=args.bpe_merges,
        src_vocab_size=args.vocab_size, tgt_vocab_size=args.vocab_size,
        max_len=args.max_len,
    )
    config = model_config_for(
        prepared, lexicon, beta=args.beta, seed=args.seed,
        char_level=args.char_level, layers=args.layers, heads=args.heads,
        model_dim=args.dim, ff_dim=args.ff_dim, dropout=args.dropout,
        max_len=args.max_len,
    )
    model = build_model(config)
    sched = LrSchedule(factor=args.lr_factor, model_dim=config.model_dim,
                       warmup_steps=args.warmup)
    curve = train_model(model, prepared.examples, args.steps, args.batch_size,
                        sched, seed=args.seed)
    checkpoint.save_checkpoint(model, args.output)
    prepared.src_vocab.save(args.output + ".src.vocab")
    prepared.tgt_vocab.save(args.output + ".tgt.vocab")
    if prepared.src_bpe is not None:
        prepared.src_bpe.save(args.output + ".src.bpe")
    if prepared.tgt_bpe is not None:
        prepared.tgt_bpe.save(args.output + ".tgt.bpe")
    inputs = [args.train_src, args.train_tgt, args.lexicon or _default_lexicon_path()]
    manifest.write_manifest(args.output, "train", _flags_of(args), inputs)
    print(f"trained {args.steps} steps; final loss {curve[-1]:.4f}")
    if prepared.skipped:
        print(f"skipped {prepared.skipped} over-length pairs")
    return 0


def cmd_translate(args) -> int:
    lexicon = _load_lex(args)
    model = checkpoint.load_checkpoint(args.model)
    src_vocab = Vocab.load(args.src_vocab)
    tgt_vocab = Vocab.load(args.tgt_vocab)
    checkpoint.validate_compatible(
        model, src_vocab.size, tgt_vocab.size, len(syllable_inventory(lexicon))
    )
    src_bpe = BpeModel.load(args.bpe_model) if args.bpe_model else (
        BpeModel([]) if model.config.char_level else None
    )
    translator = Translator(model, src_vocab, tgt_vocab, lexicon, src_bpe,
                            pron_seed=args.seed)
    hyps = translator(_read_lines(args.input))
    _write_lines(args.output, hyps)
    inputs = [args.model, args.input, args.src_vocab, args.tgt_vocab,
              args.lexicon or _default_lexicon_path()]
    manifest.write_manifest(args.output, "translate", _flags_of(args), inputs)
    return 0


def cmd_evaluate(args) -> int:
    hyps = _read_lines(args.hyp)
    refs = [_read_lines(p) for p in args.refs]
    score = evaluation.bleu_multi_ref(hyps, refs, case_insensitive=not args.case_sensitive)
    print(score)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write("bleu\tp1\tp2\tp3\tp4\tbp\thyp_len\tref_len\n")
            p = score.precisions
            f.write(
                f"{score.bleu:.4f}\t{p[0]:.6f}\t{p[1]:.6f}\t{p[2]:.6f}\t{p[3]:.6f}"
                f"\t{score.brevity_penalty:.6f}\t{score.hyp_len}\t{score.ref_len}\n"
            )
        manifest.write_manifest(args.output, "evaluate", _flags_of(args),
                                [args.hyp] + list(args.refs))
    return 0


def cmd_neighbors(args) -> int:
    lexicon = _load_lex(args)
    model = checkpoint.load_checkpoint(args.model)
    if model.config.pinyin_size != len(syllable_inventory(lexicon)):
        raise checkpoint.CheckpointError(
            "model pinyin inventory size does not match the lexicon"
        )
    result = evaluation.nearest_syllables(model.embedding_params, lexicon,
                                          args.query, args.k)
    for syl, sim in result:
        print(f"{syl}\t{sim:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    import numpy as np

    from .numerics import finite_diff_check
    from .pipeline import BOS, EOS, EncodedSentence

    cfg = ModelConfig(
        src_vocab_size=12, tgt_vocab_size=12, pinyin_size=9,
        layers=args.layers, heads=2, model_dim=args.dim, ff_dim=2 * args.dim,
        dropout=0.0, beta=0.5, seed=args.seed,
    )
    model = build_model(cfg, dtype=np.float64)
    rng = np.random.default_rng(args.seed)
    n = 5
    src = EncodedSentence(
        [int(x) for x in rng.integers(0, cfg.src_vocab_size, size=n)],
        [tuple(int(s) for s in rng.integers(0, cfg.pinyin_size, size=int(l)))
         for l in rng.integers(1, 4, size=n)],
    )
    tgt = [BOS] + [int(x) for x in rng.integers(4, cfg.tgt_vocab_size, size=6)] + [EOS]

    def loss_fn(params):
        model.params = params
        loss, grads, _ = model.loss_and_grads(src, tgt)
        return loss, grads

    err = finite_diff_check(loss_fn, model.params, probes=args.probes, h=args.h,
                            seed=args.seed)
    print(f"max relative error over {args.probes} probes: {err:.3e}")
    if err >= args.tol:
        print(f"FAIL: exceeds tolerance {args.tol}", file=sys.stderr)
        return 1
    return 0


def cmd_inspect(args) -> int:
    model = checkpoint.load_checkpoint(args.model)
    from dataclasses import asdict

    for key, value in asdict(model.config).items():
        print(f"{key}={value}")
    n_params = sum(v.size for v in model.params.values())
    print(f"parameters={n_params}")
    return 0


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phonmt",
        description="Homophone-robust toy NMT pipeline (noise, training, evaluation).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        return p

    p = add("build-table", cmd_build_table, "build a homophone table from a lexicon")
    p.add_argument("--lexicon", help="lexicon TSV (default: shipped Mandarin lexicon)")
    p.add_argument("--vocab", help="restrict table to these words (one per line)")
    p.add_argument("--output", required=True)

    p = add("noisify", cmd_noisify, "replace words by homophones with probability P")
    p.add_argument("--input", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--vocab")
    p.add_argument("--prob", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)

    p = add("augment", cmd_augment, "append noisified copies of sampled pairs")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--prob", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-src", required=True)
    p.add_argument("--out-tgt", required=True)

    p = add("learn-bpe", cmd_learn_bpe, "learn BPE merges from a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--merges", type=int, required=True)
    p.add_argument("--output", required=True)

    p = add("apply-bpe", cmd_apply_bpe, "apply a BPE model to a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)

    p = add("build-vocab", cmd_build_vocab, "build a vocabulary from a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--output", required=True)

    p = add("train", cmd_train, "train a toy translation model")
    p.add_argument("--train-src", required=True)
    p.add_argument("--train-tgt", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--beta", type=float, default=0.95)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--char-level", action="store_true", default=True)
    p.add_argument("--bpe-merges", type=int, default=0)
    p.add_argument("--vocab-size", type=int, default=10000)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--ff-dim", type=int, default=256)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--lr-factor", type=float, default=2.0)
    p.add_argument("--warmup", type=int, default=400)
    p.add_argument("--output", required=True)

    p = add("translate", cmd_translate, "greedy-decode a source file")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--src-vocab", required=True)
    p.add_argument("--tgt-vocab", required=True)
    p.add_argument("--bpe-model")
    p.add_argument("--seed", type=int, required=True,
                   help="seed for multi-pronunciation picks")
    p.add_argument("--output", required=True)

    p = add("evaluate", cmd_evaluate, "corpus-level multi-reference BLEU")
    p.add_argument("--hyp", required=True)
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--case-sensitive", action="store_true")
    p.add_argument("--output", help="optional TSV output")

    p = add("neighbors", cmd_neighbors, "nearest syllables in the pinyin embedding")
    p.add_argument("--model", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=10)

    p = add("gradcheck", cmd_gradcheck, "finite-difference check of model gradients")
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--dim", type=int, default=16)

    p = add("inspect", cmd_inspect, "print checkpoint configuration")
    p.add_argument("--model", required=True)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LexiconError, NoiseError, PipelineError, evaluation.EvaluationError,
            checkpoint.CheckpointError, ModelError, TrainingError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
