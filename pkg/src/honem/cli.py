"""Command-line front end: ``honem <subcommand> ...``.

Exit status is 0 on success, 2 on usage errors and 1 on data errors
(missing files, malformed input, infeasible parameters).
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .corpus import FirstOrderNetwork, build_fon, format_corpus, format_fon, parse_corpus, parse_fon
from .evaltasks import (
    evaluate_classification,
    evaluate_link_prediction,
    evaluate_reconstruction,
    parse_labels,
    split_labels,
)
from .neighborhood import build_neighborhood, format_matrix, parse_matrix
from .ruleminer import extract_rules, format_rules, parse_rules
from .spectral import embed, format_embedding, parse_embedding
from .synthgen import generate, parse_spec

SEED_ENV = "HONEM_SEED"


class DataError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0 or value == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return value


def _k_list(text: str) -> list[int]:
    try:
        ks = [int(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("k values must be >= 1")
    return ks


def _add_extract_args(p, required_out=True):
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--min-support", type=_positive_int, default=1)
    p.add_argument("--threshold-scale", type=_nonneg_float, default=1.0)
    p.add_argument("--max-order", type=_positive_int, default=None, help="optional order cap")
    p.add_argument("--min-sequence-length", type=_positive_int, default=None)
    if required_out:
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--fon-out", type=Path, default=None)


def _add_matrix_args(p):
    p.add_argument("--normalization", type=_positive_float, default=1.0)
    p.add_argument("--truncate-order", type=_positive_int, default=None,
                   help="keep only orders up to this one (1 = first-order only)")


def _add_svd_args(p):
    p.add_argument("--dim", required=True, type=_positive_int)
    p.add_argument("--seed", type=_nonneg_int, default=None)
    p.add_argument("--oversample", type=_nonneg_int, default=10)
    p.add_argument("--power-iters", type=_nonneg_int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="honem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"honem {__version__}")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="cap on BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="mine variable-order rules from a corpus")
    _add_extract_args(p)

    p = sub.add_parser("matrix", help="build the higher-order neighborhood matrix")
    p.add_argument("--rules", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_matrix_args(p)

    p = sub.add_parser("embed", help="truncated-SVD embeddings of a matrix")
    p.add_argument("--matrix", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_svd_args(p)

    p = sub.add_parser("eval-reconstruct", help="Precision@k against FON edges")
    p.add_argument("--emb", required=True, type=Path)
    p.add_argument("--fon", required=True, type=Path)
    p.add_argument("--k", required=True, type=_k_list)
    p.add_argument("--map-denominator", choices=("defined", "all"), default="defined")

    p = sub.add_parser("eval-linkpred", help="edge holdout link prediction")
    p.add_argument("--matrix", required=True, type=Path)
    p.add_argument("--fon", type=Path, default=None,
                   help="edge set to hold out from (default: nonzeros of the matrix)")
    p.add_argument("--fraction", type=_fraction, default=0.2)
    p.add_argument("--k", type=_k_list, default=[])
    p.add_argument("--map-denominator", choices=("defined", "all"), default="defined")
    _add_svd_args(p)

    p = sub.add_parser("eval-classify", help="logistic-regression node classification")
    p.add_argument("--emb", required=True, type=Path)
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--seed", type=_nonneg_int, default=None)

    p = sub.add_parser("synth", help="generate a corpus from a planted-rule spec")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("pipeline", help="extract -> matrix -> embed -> evaluate")
    _add_extract_args(p, required_out=False)
    _add_matrix_args(p)
    _add_svd_args(p)
    p.add_argument("--task", choices=("reconstruct", "linkpred", "classify"), default="reconstruct")
    p.add_argument("--k", type=_k_list, default=None)
    p.add_argument("--fraction", type=_fraction, default=0.2)
    p.add_argument("--labels", type=Path, default=None)
    p.add_argument("--map-denominator", choices=("defined", "all"), default="defined")
    p.add_argument("--workdir", type=Path, default=Path("honem_run"),
                   help="directory for the intermediate files")
    return parser


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read '{path}': {exc.strerror or exc}") from None


def _write(path: Path, text: str) -> None:
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write '{path}': {exc.strerror or exc}") from None


def _banner(args, out) -> None:
    skip = {"command", "threads"}
    params = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip and v is not None
    )
    out.write(f"# honem {__version__} {args.command} {params}\n")


def _do_extract(args, out):
    text = _read(args.corpus)
    corpus = parse_corpus(text, min_length=args.min_sequence_length)
    rules = extract_rules(corpus, args.min_support, args.threshold_scale, args.max_order)
    _write(args.out, format_rules(rules))
    if getattr(args, "fon_out", None) is not None:
        _write(args.fon_out, format_fon(build_fon(corpus)))
    counts = " ".join(f"R{k}={n}" for k, n in rules.counts_per_order.items())
    out.write(f"rules\t{len(rules)}\nmax_order\t{rules.max_order}\n# {counts}\n")


def _do_matrix(args, out):
    rules = parse_rules(_read(args.rules))
    S = build_neighborhood(rules, normalization=args.normalization, max_order=args.truncate_order)
    _write(args.out, format_matrix(S))
    out.write(f"nodes\t{S.n_nodes}\nnnz\t{S.entries.nnz}\nmax_order_used\t{S.max_order_used}\n")


def _do_embed(args, out):
    S = parse_matrix(_read(args.matrix))
    emb = embed(S, args.dim, args.seed, oversample=args.oversample, power_iters=args.power_iters)
    _write(args.out, format_embedding(emb))
    out.write(f"nodes\t{emb.n_nodes}\ndim\t{emb.dim}\n")


def _do_eval_reconstruct(args, out):
    emb = parse_embedding(_read(args.emb))
    fon = parse_fon(_read(args.fon))
    report = evaluate_reconstruction(emb, fon, args.k, args.map_denominator)
    out.write(report.format())
    return report


def _do_eval_linkpred(args, out):
    S = parse_matrix(_read(args.matrix))
    if args.fon is not None:
        fon = parse_fon(_read(args.fon))
    else:
        fon = FirstOrderNetwork(S.entries.copy())
    report = evaluate_link_prediction(
        S, fon, args.dim, args.seed, args.fraction, args.k, args.map_denominator,
        oversample=args.oversample, power_iters=args.power_iters,
    )
    out.write(report.format())
    return report


def _do_eval_classify(args, out):
    emb = parse_embedding(_read(args.emb))
    labels = parse_labels(_read(args.labels), emb.tokens)
    report = evaluate_classification(emb, split_labels(labels, args.seed))
    out.write(report.format())
    return report


def _do_synth(args, out):
    spec = parse_spec(_read(args.spec))
    corpus = generate(spec)
    _write(args.out, format_corpus(corpus))
    out.write(f"sequences\t{len(corpus.sequences)}\ntransitions\t{corpus.n_transitions}\n")


def _do_pipeline(args, out):
    wd = args.workdir
    rules_path, fon_path = wd / "rules.tsv", wd / "fon.txt"
    matrix_path, emb_path = wd / "S.mtx", wd / "emb.tsv"
    sink = open(os.devnull, "w")
    with sink:
        _do_extract(argparse.Namespace(**{**vars(args), "out": rules_path, "fon_out": fon_path}), sink)
        _do_matrix(argparse.Namespace(rules=rules_path, out=matrix_path,
                                      normalization=args.normalization,
                                      truncate_order=args.truncate_order), sink)
        if args.task != "linkpred":
            _do_embed(argparse.Namespace(**{**vars(args), "matrix": matrix_path, "out": emb_path}), sink)
    if args.task == "reconstruct":
        if args.k is None:
            raise DataError("--task reconstruct requires --k")
        report = _do_eval_reconstruct(
            argparse.Namespace(emb=emb_path, fon=fon_path, k=args.k,
                               map_denominator=args.map_denominator), out)
    elif args.task == "linkpred":
        report = _do_eval_linkpred(
            argparse.Namespace(**{**vars(args), "matrix": matrix_path, "fon": fon_path,
                                  "k": args.k or []}), out)
    else:
        if args.labels is None:
            raise DataError("--task classify requires --labels")
        report = _do_eval_classify(argparse.Namespace(emb=emb_path, labels=args.labels,
                                                      seed=args.seed), out)
    _write(wd / "report.txt", report.format())


COMMANDS = {
    "extract": _do_extract,
    "matrix": _do_matrix,
    "embed": _do_embed,
    "eval-reconstruct": _do_eval_reconstruct,
    "eval-linkpred": _do_eval_linkpred,
    "eval-classify": _do_eval_classify,
    "synth": _do_synth,
    "pipeline": _do_pipeline,
}


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(args, "seed") and args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            err.write(f"honem: error: {SEED_ENV}={env!r} is not an integer\n")
            return 2
    _banner(args, out)
    try:
        with _thread_limit(args.threads):
            COMMANDS[args.command](args, out)
    except DataError as exc:
        err.write(f"honem {args.command}: error: {exc}\n")
        return 1
    except (ValueError, RuntimeError) as exc:
        err.write(f"honem {args.command}: error: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())
