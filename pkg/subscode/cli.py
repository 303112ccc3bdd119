#!/usr/bin/env python3
"""
subscode pipeline command line

Usage:
    subscode sample-corpus corpus.txt                 # write the synthetic sample corpus
    subscode vocab corpus.txt vocab.tsv               # count words, apply min_count
    subscode lm-train corpus.txt vocab.tsv lm.arpa    # estimate the n-gram model
    subscode subs lm.arpa corpus.txt subs.txt         # top-K substitutes per token
    subscode sample subs.txt vocab.tsv pairs.tsv      # S sampled pairs per token
    subscode train pairs.tsv embeddings.txt           # sphere embeddings (phi + .psi file)
    subscode run-all --corpus corpus.txt              # every stage in order
    subscode --config run.cfg --set lm.order=3 run-all --debug
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from tqdm import tqdm

from subscode.config.settings import PipelineConfig, load_pipeline_config, settings
from subscode.errors import ConfigError, FormatError
from subscode.services import corpus as corpus_ops
from subscode.services import ngram, scode
from subscode.services.arpa import read_arpa, write_arpa
from subscode.services.discretize import pairs_from_substitutes, read_pairs, write_pairs
from subscode.services.evaluation import cosine_neighbors, export_scaled, nearest_neighbors
from subscode.services.manifest import recorded_stage
from subscode.services.sample_corpus import DEFAULT_SENTENCES, generate_sentences
from subscode.services.substitutes import read_substitutes, substitutes_for_corpus, write_substitutes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

# subcommand option -> dotted config key
OPTION_KEYS = {
    "lowercase_ratio": "clean.lowercase_ratio",
    "min_count": "vocab.min_count",
    "order": "lm.order",
    "smoothing": "lm.smoothing",
    "K": "subs.K",
    "S": "sample.S",
    "d": "scode.d",
    "epochs": "scode.epochs",
    "sigma": "export.sigma",
    "side": "export.side",
    "run_corpus": "corpus.lm",
    "run_embed_corpus": "corpus.embed",
    "run_output_dir": "output.dir",
}


def psi_path_for(phi_path) -> Path:
    """embeddings.txt -> embeddings.psi.txt"""
    path = Path(phi_path)
    return path.with_name(f"{path.stem}.psi{path.suffix}")


def _progress_enabled() -> bool:
    return logging.getLogger().getEffectiveLevel() <= logging.INFO and sys.stderr.isatty()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_sample_corpus(config: PipelineConfig, output, sentences: int = DEFAULT_SENTENCES):
    with recorded_stage("sample-corpus", config) as record:
        written = corpus_ops.write_lines(output, generate_sentences(sentences, config.stage_seed("sample-corpus")))
        record.wrote(output)
    logger.info(f"✅ Wrote {written} sample sentences to {output}")


def stage_clean(config: PipelineConfig, source, output):
    ratio = config.lowercase_ratio if config.lowercase_ratio is not None else 0.0
    with recorded_stage("clean", config) as record:
        record.read(source)
        total = 0

        def counted(lines):
            nonlocal total
            for line in lines:
                total += 1
                yield line

        kept = corpus_ops.write_lines(output, corpus_ops.clean_corpus(counted(corpus_ops.read_lines(source)), ratio))
        record.wrote(output)
    logger.info(f"✅ Kept {kept}/{total} sentences (lowercase ratio >= {ratio})")


def stage_vocab(config: PipelineConfig, source, output):
    with recorded_stage("vocab", config) as record:
        record.read(source)
        vocab = corpus_ops.build_vocabulary(corpus_ops.read_lines(source), config.min_count, config.threads)
        corpus_ops.write_vocabulary(vocab, output)
        record.wrote(output)
    return vocab


def stage_lm_train(config: PipelineConfig, source, vocab_path, output):
    with recorded_stage("lm-train", config) as record:
        record.read(source, vocab_path)
        vocab = corpus_ops.read_vocabulary(vocab_path)
        counts = ngram.count_ngrams(corpus_ops.read_corpus(source, vocab), config.lm_order, vocab)
        estimate = ngram.estimate_kn if config.lm_smoothing == "kn" else ngram.estimate_additive
        model = estimate(counts)
        write_arpa(model, output)
        record.wrote(output)
    return model


def stage_lm_ppl(config: PipelineConfig, model_path, source) -> float:
    model = read_arpa(model_path)
    value = ngram.perplexity(model, corpus_ops.read_corpus(source, model.vocab))
    logger.info(f"📊 Perplexity of {source} under {model_path}: {value:.4f}")
    return value


def stage_subs(config: PipelineConfig, model_path, source, output, pruned: Optional[bool] = None):
    pruned = config.subs_pruned if pruned is None else pruned
    with recorded_stage("subs", config) as record:
        record.read(model_path, source)
        model = read_arpa(model_path)
        # token column uses the embedded corpus's own word types; substitutes stay in the model vocabulary
        word_types = corpus_ops.build_vocabulary(corpus_ops.read_lines(source), config.min_count, config.threads)
        sentences = corpus_ops.read_corpus(source, model.vocab)
        distributions = substitutes_for_corpus(
            model, sentences, config.subs_k, pruned=pruned, threads=config.threads
        )
        distributions = tqdm(distributions, desc="substitutes", unit="sent", disable=not _progress_enabled())
        tokens = write_substitutes(output, corpus_ops.read_tokens(source, word_types), distributions, model.vocab)
        record.wrote(output)
    logger.info(f"✅ Wrote substitutes for {tokens} tokens (K={config.subs_k}, pruned={pruned}) to {output}")


def stage_sample(config: PipelineConfig, subs_path, vocab_path, output):
    with recorded_stage("sample", config) as record:
        record.read(subs_path, vocab_path)
        vocab = corpus_ops.read_vocabulary(vocab_path)
        pairs = pairs_from_substitutes(read_substitutes(subs_path, vocab), config.sample_s, config.stage_seed("sample"), vocab)
        write_pairs(output, pairs)
        record.wrote(output)


def stage_train(config: PipelineConfig, pairs_path, output):
    train_config = config.train_config()
    psi_output = psi_path_for(output)
    with recorded_stage("train", config) as record:
        record.read(pairs_path)
        emp = scode.empirical_marginals(read_pairs(pairs_path))
        emb = scode.train(emp, train_config, progress=_progress_enabled())
        scode.save_embedding_set(emb, output, psi_output)
        record.wrote(output, psi_output)
    logger.info(f"📊 Largest norm deviation from 1: {emb.max_norm_error():.2e}")
    return emb


def stage_export(config: PipelineConfig, embeddings_path, output):
    with recorded_stage("export", config) as record:
        psi_path = psi_path_for(embeddings_path)
        record.read(embeddings_path, psi_path)
        emb = scode.load_embedding_set(embeddings_path, psi_path)
        export_scaled(emb, output, config.export_sigma, config.export_side)
        record.wrote(output)


def stage_neighbors(config: PipelineConfig, embeddings_path, word: str, k: int, cosine: bool = False) -> List:
    emb = scode.load_embedding_set(embeddings_path, psi_path_for(embeddings_path))
    search = cosine_neighbors if cosine else nearest_neighbors
    labeled = search(emb, word, k).labeled(emb.x_words)
    for neighbor, value in labeled:
        print(f"{neighbor}\t{value:.6f}")
    return labeled


def stage_run_all(config: PipelineConfig) -> Path:
    """every stage in order; each one is the same call the single-stage subcommands make"""
    if not config.lm_corpus:
        raise ConfigError("corpus.lm", "run-all needs an LM corpus (--corpus or corpus.lm)")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    lm_corpus = config.lm_corpus
    embed_corpus = config.embed_corpus or config.lm_corpus
    if config.lowercase_ratio is not None:
        stage_clean(config, lm_corpus, out / "lm_corpus.clean.txt")
        lm_corpus = out / "lm_corpus.clean.txt"
        if config.embed_corpus:
            stage_clean(config, embed_corpus, out / "embed_corpus.clean.txt")
            embed_corpus = out / "embed_corpus.clean.txt"
        else:
            embed_corpus = lm_corpus

    stage_vocab(config, lm_corpus, out / "vocab.tsv")
    stage_lm_train(config, lm_corpus, out / "vocab.tsv", out / "lm.arpa")
    stage_subs(config, out / "lm.arpa", embed_corpus, out / "subs.txt")
    stage_sample(config, out / "subs.txt", out / "vocab.tsv", out / "pairs.tsv")
    stage_train(config, out / "pairs.tsv", out / "embeddings.txt")
    stage_export(config, out / "embeddings.txt", out / "embeddings.scaled.txt")
    logger.info(f"🎉 Pipeline finished; embeddings in {out / 'embeddings.txt'}")
    return out / "embeddings.txt"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subscode", description="Substitute-based sphere embeddings")
    parser.add_argument("--config", help="key=value pipeline configuration file")
    parser.add_argument("--seed", type=str, help="top-level random seed")
    parser.add_argument("--threads", type=str, help="worker threads")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--debug", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-corpus", help="write the synthetic sample corpus")
    p.add_argument("output")
    p.add_argument("--sentences", type=int, default=DEFAULT_SENTENCES)

    p = sub.add_parser("clean", help="drop sentences that are not mostly lowercase")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--lowercase-ratio", dest="lowercase_ratio", type=str)

    p = sub.add_parser("vocab", help="build the vocabulary file")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--min-count", dest="min_count", type=str)

    p = sub.add_parser("lm-train", help="estimate an n-gram model and write ARPA")
    p.add_argument("corpus")
    p.add_argument("vocab")
    p.add_argument("output")
    p.add_argument("--order", type=str)
    p.add_argument("--smoothing", type=str)

    p = sub.add_parser("lm-ppl", help="perplexity of a corpus under an ARPA model")
    p.add_argument("model")
    p.add_argument("corpus")

    p = sub.add_parser("subs", help="top-K substitute distributions per token")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--K", type=str)
    p.add_argument("--brute-force", dest="brute_force", action="store_true", help="score every candidate")

    p = sub.add_parser("sample", help="sample co-occurrence pairs from substitutes")
    p.add_argument("subs")
    p.add_argument("vocab")
    p.add_argument("output")
    p.add_argument("--S", type=str)

    p = sub.add_parser("train", help="train sphere embeddings from a pairs file")
    p.add_argument("pairs")
    p.add_argument("output")
    p.add_argument("--d", type=str)
    p.add_argument("--epochs", type=str)

    p = sub.add_parser("neighbors", help="nearest neighbors of a word")
    p.add_argument("embeddings")
    p.add_argument("word")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--cosine", action="store_true")

    p = sub.add_parser("export", help="write scaled embeddings")
    p.add_argument("embeddings")
    p.add_argument("output")
    p.add_argument("--sigma", type=str)
    p.add_argument("--side", type=str)

    p = sub.add_parser("run-all", help="run every stage")
    p.add_argument("--corpus", dest="run_corpus", type=str)
    p.add_argument("--embed-corpus", dest="run_embed_corpus", type=str)
    p.add_argument("--output-dir", dest="run_output_dir", type=str)

    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    for option, key in OPTION_KEYS.items():
        value = getattr(args, option, None)
        if value is not None:
            overrides[key] = value
    return overrides


def configure_logging(args: argparse.Namespace):
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    if args.debug or settings.DEBUG:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)


def dispatch(args: argparse.Namespace, config: PipelineConfig):
    command = args.command
    if command == "sample-corpus":
        stage_sample_corpus(config, args.output, args.sentences)
    elif command == "clean":
        stage_clean(config, args.input, args.output)
    elif command == "vocab":
        stage_vocab(config, args.corpus, args.output)
    elif command == "lm-train":
        stage_lm_train(config, args.corpus, args.vocab, args.output)
    elif command == "lm-ppl":
        print(f"{stage_lm_ppl(config, args.model, args.corpus):.6f}")
    elif command == "subs":
        stage_subs(config, args.model, args.corpus, args.output, pruned=False if args.brute_force else None)
    elif command == "sample":
        stage_sample(config, args.subs, args.vocab, args.output)
    elif command == "train":
        stage_train(config, args.pairs, args.output)
    elif command == "neighbors":
        stage_neighbors(config, args.embeddings, args.word, args.k, args.cosine)
    elif command == "export":
        stage_export(config, args.embeddings, args.output)
    elif command == "run-all":
        stage_run_all(config)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand, and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; those are invalid arguments here
        return EXIT_INVALID if e.code else EXIT_OK
    configure_logging(args)

    try:
        config = load_pipeline_config(args.config, collect_overrides(args))
        logger.debug(f"🔧 Effective configuration:\n{config.canonical()}")
        dispatch(args, config)
    except FormatError as e:
        logger.error(f"❌ {e}")
        return EXIT_IO
    except UnicodeDecodeError as e:
        logger.error(f"❌ Input is not valid UTF-8: {e}")
        return EXIT_IO
    except OSError as e:
        logger.error(f"❌ {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"❌ {e}")
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
