"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
Results go to stdout (or ``--out``); logs go to stderr.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import backend_name
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ABLATIONS, ConfigError, TrainConfig, parse_config_text
from .cooccur import CooccurrenceFormatError, build_cooccurrence, format_matrix, load_matrix
from .corpus import DataError, compute_stats, head_labels, load_dataset, split_head_tail
from .metrics import DEFAULT_KS
from .rerank import EXPANDED, SEED, summed_cooccurrence
from .train import SWEEPABLE, evaluate_model, sweep, train

log = logging.getLogger("corank")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

PATH_KEYS = ("train", "test", "cooc", "ckpt", "out")
SUBSETS = {"all": ("head", "tail"), "head": ("head",), "tail": ("tail",)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return values


def build_parser():
    parser = _Parser(prog="corank", description="Label co-occurrence reranking for multi-label text classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON or key=value file with training settings and optional paths")
        p.add_argument("--out", help="write the result here instead of stdout")
        return p

    def add_overrides(p):
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--gamma", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--ablation", choices=ABLATIONS)

    def add_metrics(p):
        p.add_argument("--k", type=_int_list, default=list(DEFAULT_KS), help="cut-offs, e.g. 1,3,5")
        p.add_argument("--subset", choices=sorted(SUBSETS), help="add head/tail breakdowns")

    p = add("stats", "Corpus statistics as JSON.")
    p.add_argument("--train")
    p.add_argument("--test")

    p = add("build-cooccur", "Build the label co-occurrence matrix of a training file.")
    p.add_argument("--train")

    p = add("train", "Train a model; writes a checkpoint and prints the loss log as CSV.")
    p.add_argument("--train")
    p.add_argument("--cooc", help="prebuilt co-occurrence matrix of the same training file")
    p.add_argument("--ckpt", help="checkpoint output path")
    add_overrides(p)

    p = add("eval", "Evaluate a checkpoint on a test file; prints metrics as JSON.")
    p.add_argument("--ckpt")
    p.add_argument("--test")
    add_metrics(p)

    p = add("rerank-inspect", "Show the reranking trace of one test document as JSON.")
    p.add_argument("--ckpt")
    p.add_argument("--test")
    p.add_argument("--doc-id", required=True)
    p.add_argument("--top", type=int, default=10, help="entries shown for score listings")

    p = add("split-head-tail", "Write head.jsonl and tail.jsonl subsets of a test file into --out.")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--head-fraction", type=float, default=0.10)
    p.add_argument("--max-head-count", type=int, default=2)

    p = add("sweep", "Train and evaluate once per parameter value; prints CSV.")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--param", required=True, choices=SWEEPABLE)
    p.add_argument("--values", required=True, help="comma-separated values")
    add_overrides(p)
    add_metrics(p)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_config(args):
    """Config file contents, with path keys moved onto ``args`` unless given as flags."""
    data = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
        data = parse_config_text(text)
    for key in PATH_KEYS:
        value = data.pop(key, None)
        if value is not None and getattr(args, key, None) is None:
            setattr(args, key, str(value))
    return TrainConfig.from_dict(data)


def _apply_overrides(config, args):
    return config.override(**{k: getattr(args, k, None) for k in ("alpha", "beta", "gamma", "seed", "ablation")})


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"corank {args.command}: missing required {', '.join(missing)}")


def _emit(args, text):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2)


def _train_statistics(path, max_len, cooc_path=None):
    tr = load_dataset(path, "train", max_len=max_len)
    if cooc_path is None:
        return tr, build_cooccurrence(tr)
    cooc = load_matrix(cooc_path)
    if cooc.K != tr.n_labels or not np.array_equal(cooc.diagonal(), tr.label_vocab.frequency):
        raise DataError(f"{cooc_path} was not built from {path}")
    return tr, cooc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_stats(args):
    _load_config(args)
    _need(args, "train", "test")
    tr = load_dataset(args.train, "train")
    te = load_dataset(args.test, "test", tr.token_vocab, tr.label_vocab)
    _emit(args, _json(compute_stats(tr, te).to_dict()))


def cmd_build_cooccur(args):
    _load_config(args)
    _need(args, "train")
    _emit(args, format_matrix(build_cooccurrence(load_dataset(args.train, "train"))))


def cmd_train(args):
    config = _apply_overrides(_load_config(args), args)
    _need(args, "train", "ckpt")
    tr, cooc = _train_statistics(args.train, config.max_len, args.cooc)
    config.validate(tr.n_labels)
    log.info("training on %d documents, K=%d, backend=%s", len(tr), tr.n_labels, backend_name())
    result = train(config, tr, cooc)
    save_checkpoint(args.ckpt, result.model, tr.token_vocab, tr.label_vocab)
    log.info("wrote checkpoint %s", args.ckpt)
    _emit(args, result.loss_csv())


def _load_for_eval(args):
    _load_config(args)
    _need(args, "ckpt", "test")
    ckpt = load_checkpoint(args.ckpt)
    te = load_dataset(args.test, "test", ckpt.token_vocab(), ckpt.label_vocab(), max_len=ckpt.config.max_len)
    return ckpt, te


def cmd_eval(args):
    ckpt, te = _load_for_eval(args)
    subsets = SUBSETS[args.subset] if args.subset else ()
    report = evaluate_model(ckpt.model(), te, args.k, subsets, ckpt.label_vocab())
    _emit(args, report.to_json(indent=2))


def _top(scores, n):
    order = np.argsort(-scores, kind="stable")[:n]
    return [{"label": int(i), "score": float(scores[i])} for i in order]


def cmd_rerank_inspect(args):
    ckpt, te = _load_for_eval(args)
    docs = [d for d in te if d.id == args.doc_id]
    if not docs:
        raise DataError(f"document {args.doc_id!r} not found in {args.test}")
    doc = docs[0]
    model = ckpt.model()
    names = ckpt.label_names
    tr = model.trace_document(doc)

    def named(entries):
        for e in entries:
            e["name"] = names[e["label"]]
        return entries

    out = {"id": doc.id, "truth": sorted(names[i] for i in doc.labels),
           "S1_top": named(_top(tr.S1[0], args.top))}
    if tr.labels is not None:
        labels = [int(i) for i in tr.labels[0]]
        seeds = [lab for lab, s in zip(labels, tr.is_seed[0]) if s]
        seeds.sort(key=lambda i: (-tr.S1[0, i], i))
        profile = summed_cooccurrence(seeds, model.cooc_counts).astype(float)
        out["S2_seeds"] = [names[i] for i in seeds]
        out["cooccurrence_top"] = named(_top(profile, args.top))
        out["S3_expanded"] = [names[lab] for lab, s in zip(labels, tr.is_seed[0]) if not s]
        out["S"] = [{"position": p, "label": lab, "name": names[lab], "freq": int(model.freq[lab]),
                     "source": SEED if s else EXPANDED}
                    for p, (lab, s) in enumerate(zip(labels, tr.is_seed[0]))]
    out["output_top"] = named(_top(tr.output[0], args.top))
    _emit(args, _json(out))


def cmd_split_head_tail(args):
    _load_config(args)
    _need(args, "train", "test", "out")
    tr = load_dataset(args.train, "train")
    te = load_dataset(args.test, "test", tr.token_vocab, tr.label_vocab)
    head, tail = split_head_tail(te, tr.label_vocab, args.head_fraction, args.max_head_count)
    lines = [ln for ln in Path(args.test).read_text(encoding="utf-8").splitlines() if ln.strip()]
    index = {id(d): r for r, d in enumerate(te)}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, subset in (("head", head), ("tail", tail)):
        with open(out_dir / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            for doc in subset:
                fh.write(lines[index[id(doc)]] + "\n")
    summary = {"head_labels": sorted(tr.label_vocab.names()[i] for i in head_labels(tr.label_vocab, args.head_fraction)),
               "n_head_docs": len(head), "n_tail_docs": len(tail), "n_docs": len(te)}
    sys.stdout.write(_json(summary) + "\n")


def cmd_sweep(args):
    config = _apply_overrides(_load_config(args), args)
    _need(args, "train", "test")
    typ = int if args.param == "gamma" else float
    try:
        values = [typ(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"corank sweep: bad --values {args.values!r} for {args.param}") from None
    tr = load_dataset(args.train, "train", max_len=config.max_len)
    te = load_dataset(args.test, "test", tr.token_vocab, tr.label_vocab, max_len=config.max_len)
    subsets = SUBSETS[args.subset] if args.subset else ()
    header, rows = sweep(config, args.param, values, tr, te, args.k, subsets)
    _emit(args, "\n".join([header] + rows))


COMMANDS = {
    "stats": cmd_stats,
    "build-cooccur": cmd_build_cooccur,
    "train": cmd_train,
    "eval": cmd_eval,
    "rerank-inspect": cmd_rerank_inspect,
    "split-head-tail": cmd_split_head_tail,
    "sweep": cmd_sweep,
}


def main(argv=None):
    """Run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or EXIT_OK
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigError, CooccurrenceFormatError) as exc:
        print(f"corank: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"corank: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
