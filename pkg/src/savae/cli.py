"""Command-line pipeline driver.

Subcommands: preprocess, train, represent, eval-retrieval, eval-cluster,
neighbors, probe. Settings come from an optional key=value config file
(dotted keys, e.g. ``model.d=50``) overridden by flags; the effective
configuration is echoed to a run manifest in the output directory.

The SAVAE_THREADS environment variable bounds the BLAS worker count.
"""

import argparse
import os
import sys


def _bound_threads():
    threads = os.environ.get("SAVAE_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


_bound_threads()  # must run before numpy is first imported

from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation, inference, training
from .errors import ConfigError, ParseError, SavaeError
from .model import ModelConfig
from .numerics import RngStream

# defaults mirror the 20 Newsgroups configuration
DEFAULTS = {
    "model.mode": "savae",
    "model.d": 50,
    "model.k": 5,
    "model.encoder_layers": "500,500",
    "model.eval_samples": 20,
    "corpus.vocab_size": 2000,
    "train.lr": 1e-5,
    "train.epochs": 1000,
    "train.batch_size": 64,
    "train.checkpoint_every": 100,
    "seed": 2,
    "deterministic": True,
}


def read_config_file(path):
    """Parse a line-based key=value config file with # comments."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", lineno)
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


class RunConfig:
    """Defaults, overridden by config-file values, overridden by flags."""

    def __init__(self, config_path=None):
        self.values = dict(DEFAULTS)
        if config_path:
            self.values.update(read_config_file(config_path))

    def override(self, key, value):
        if value is not None:
            self.values[key] = value

    def get(self, key, cast=str):
        value = self.values[key]
        if cast is bool and isinstance(value, str):
            return value.lower() in ("1", "true", "yes")
        return cast(value)

    def model_config(self, vocab_size):
        layers = self.get("model.encoder_layers")
        if isinstance(layers, str):
            layers = tuple(int(w) for w in layers.split(",") if w)
        return ModelConfig(
            mode=self.get("model.mode"),
            m=vocab_size,
            d=self.get("model.d", int),
            k=self.get("model.k", int),
            encoder_layers=layers,
            sample_count_eval=self.get("model.eval_samples", int),
        )

    def train_config(self, out_dir):
        return training.TrainConfig(
            learning_rate=self.get("train.lr", float),
            epochs=self.get("train.epochs", int),
            batch_size=self.get("train.batch_size", int),
            seed=self.get("seed", int),
            deterministic=self.get("deterministic", bool),
            checkpoint_every=self.get("train.checkpoint_every", int),
            checkpoint_dir=str(Path(out_dir) / "checkpoints"),
        )


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out_dir, cfg, extra):
    lines = [f"{k}={cfg.values[k]}" for k in sorted(cfg.values)]
    lines += [f"{k}={v}" for k, v in sorted(extra.items())]
    text = "\n".join(lines) + "\n"
    (out_dir / "manifest.txt").write_text(text)
    print(text, end="")


def cmd_preprocess(args, cfg):
    out = _out_dir(args)
    cfg.override("corpus.vocab_size", args.vocab_size)
    cfg.override("seed", args.seed)
    vocab_size = cfg.get("corpus.vocab_size", int)
    seed = cfg.get("seed", int)
    train_raw = corpus_mod.load_corpus(args.input, args.format)
    if args.test_input:
        test_raw = corpus_mod.load_corpus(args.test_input, args.format)
    elif args.test_fraction > 0:
        perm = RngStream(seed).substream(99).permutation(len(train_raw))
        n_test = int(round(args.test_fraction * len(train_raw)))
        test_raw = [train_raw[i] for i in perm[:n_test]]
        train_raw = [train_raw[i] for i in perm[n_test:]]
    else:
        test_raw = []
    split = corpus_mod.build_split(train_raw, test_raw, vocab_size, seed)
    corpus_path = out / "corpus.savc"
    corpus_mod.save_corpus_file(split, corpus_path)
    empty_train = sum(doc.is_empty for doc in split.train)
    _write_manifest(
        out,
        cfg,
        {
            "command": "preprocess",
            "input": args.input,
            "format": args.format,
            "output": str(corpus_path),
            "train_docs": len(split.train),
            "test_docs": len(split.test),
            "empty_train_docs_excluded": empty_train,
            "vocab_entries": len(split.vocabulary),
        },
    )


def cmd_train(args, cfg):
    out = _out_dir(args)
    for key, val in (
        ("model.mode", args.mode),
        ("model.d", args.d),
        ("model.k", args.k),
        ("train.lr", args.lr),
        ("train.epochs", args.epochs),
        ("train.batch_size", args.batch_size),
        ("seed", args.seed),
    ):
        cfg.override(key, val)
    split = corpus_mod.load_corpus_file(args.corpus)
    problems = []
    model_config = train_config = None
    try:
        model_config = cfg.model_config(len(split.vocabulary))
    except ConfigError as err:
        problems += err.violations
    try:
        train_config = cfg.train_config(out)
    except ConfigError as err:
        problems += err.violations
    if problems:
        raise ConfigError(problems)
    params, log = training.train(split, model_config, train_config)
    ckpt = out / "model.savm"
    training.save_checkpoint(params, model_config, ckpt)
    (out / "trainlog.csv").write_text(log.to_csv())
    _write_manifest(
        out,
        cfg,
        {"command": "train", "corpus": args.corpus, "checkpoint": str(ckpt)},
    )


def cmd_represent(args, cfg):
    out = _out_dir(args)
    params, model_config = training.load_checkpoint(args.checkpoint)
    split = corpus_mod.load_corpus_file(args.corpus)
    docs = split.train if args.split == "train" else split.test
    reps = inference.represent_batch(docs, params, model_config)
    path = out / f"representations_{args.split}.csv"
    inference.write_representations(reps, path)
    skipped = sum(r.empty for r in reps)
    _write_manifest(
        out,
        cfg,
        {"command": "represent", "split": args.split, "output": str(path),
         "documents": len(reps), "empty_skipped": skipped},
    )


def cmd_eval_retrieval(args, cfg):
    out = _out_dir(args)
    _, qlabels, qreps = inference.read_representations(args.queries)
    _, ilabels, ireps = inference.read_representations(args.index)
    curve = evaluation.retrieval_pr(qreps, qlabels, ireps, ilabels, args.relevance)
    path = out / "pr_curve.csv"
    path.write_text(curve.to_csv())
    _write_manifest(
        out,
        cfg,
        {"command": "eval-retrieval", "relevance": args.relevance, "output": str(path),
         "queries_used": curve.n_queries, "queries_skipped": curve.skipped},
    )


def cmd_eval_cluster(args, cfg):
    out = _out_dir(args)
    _, labels, reps = inference.read_representations(args.reps)
    flat = [next(iter(ls)) if ls else "" for ls in labels]
    metrics = evaluation.ClusterMetrics(
        davies_bouldin=evaluation.davies_bouldin(reps, flat),
        dunn=evaluation.dunn(reps, flat),
        silhouette=evaluation.silhouette(reps, flat),
    )
    path = out / "cluster_metrics.txt"
    path.write_text(metrics.report())
    print(metrics.report(), end="")
    _write_manifest(out, cfg, {"command": "eval-cluster", "output": str(path)})


def cmd_neighbors(args, cfg):
    out = _out_dir(args)
    params, model_config = training.load_checkpoint(args.checkpoint)
    split = corpus_mod.load_corpus_file(args.corpus)
    spaces = evaluation.embedding_spaces(params, model_config)
    if args.space not in spaces:
        raise ConfigError([f"embedding space {args.space!r} not available for "
                           f"{model_config.mode} checkpoints"])
    lines = []
    for word in args.words.split(","):
        word = word.strip()
        neigh = evaluation.nearest_words(word, split.vocabulary, spaces[args.space], args.n)
        lines.append(f"{word}: {' '.join(neigh)}")
    text = "\n".join(lines) + "\n"
    (out / f"neighbors_{args.space}.txt").write_text(text)
    print(text, end="")
    _write_manifest(out, cfg, {"command": "neighbors", "space": args.space})


def cmd_probe(args, cfg):
    out = _out_dir(args)
    _, tr_labels, tr_reps = inference.read_representations(args.train)
    _, te_labels, te_reps = inference.read_representations(args.test)
    classes = sorted({next(iter(ls)) for ls in tr_labels if ls})
    if len(classes) != 2:
        raise ConfigError([f"probe needs exactly 2 classes, found {classes}"])
    to_bin = {classes[0]: 0.0, classes[1]: 1.0}
    ytr = np.array([to_bin[next(iter(ls))] for ls in tr_labels])
    yte = np.array([to_bin.get(next(iter(ls)), 0.0) for ls in te_labels])
    acc = evaluation.linear_probe(
        tr_reps, ytr, te_reps, yte,
        evaluation.ProbeConfig(seed=cfg.get("seed", int)),
    )
    report = f"positive_class={classes[1]}\naccuracy={acc:.4f}\n"
    (out / "probe_accuracy.txt").write_text(report)
    print(report, end="")
    _write_manifest(out, cfg, {"command": "probe", "accuracy": f"{acc:.4f}"})


def build_parser():
    parser = argparse.ArgumentParser(
        prog="savae",
        description="Sequence-aware VAE document modeling pipeline. Settings "
        "precedence: built-in defaults < --config file < explicit flags.",
    )
    common = argparse.ArgumentParser(add_help=False)
    for add in (parser.add_argument, common.add_argument):
        add("--config", help="key=value config file (dotted keys)")
        add("--seed", type=int, help="master random seed")
        add("--deterministic", action="store_true", default=None,
            help="force fixed reduction orders everywhere")
        add("--out", help="output directory")
    # flags may appear before or after the subcommand; the subcommand copy
    # must not clobber a value given up front
    for action in common._actions:
        action.default = argparse.SUPPRESS
    parser.set_defaults(config=None, seed=None, deterministic=None, out="out")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common],
                       help="tokenize, build vocab, encode, shuffle")
    p.add_argument("--input", required=True)
    p.add_argument("--format", required=True,
                   choices=["newsgroup-dirs", "labeled-lines", "unlabeled-lines"])
    p.add_argument("--test-input")
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--vocab-size", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="train a model on an encoded corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=["savae", "nvdm"])
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("represent", parents=[common], help="export posterior-mean representations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.set_defaults(func=cmd_represent)

    p = sub.add_parser("eval-retrieval", parents=[common], help="precision-recall retrieval evaluation")
    p.add_argument("--queries", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--relevance", choices=["exact", "jaccard"], default="exact")
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("eval-cluster", parents=[common], help="internal clustering indices")
    p.add_argument("--reps", required=True)
    p.set_defaults(func=cmd_eval_cluster)

    p = sub.add_parser("neighbors", parents=[common], help="nearest words in an embedding space")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--words", required=True, help="comma-separated query words")
    p.add_argument("--space", choices=["global", "local"], default="global")
    p.add_argument("--n", type=int, default=5)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("probe", parents=[common], help="linear sentiment probe on representations")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig(args.config)
        cfg.override("seed", args.seed)
        cfg.override("deterministic", args.deterministic)
        args.func(args, cfg)
    except SavaeError as err:
        print(f"error: {err.category}: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
