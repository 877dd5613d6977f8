"""Command-line pipelines: tokenize, fit, score, forward, predict, pls, lift.

Exit codes: 0 success, 1 numeric failure, 2 input error.  Every output file
starts with a provenance header (tool version, flags, input hashes) so
identical inputs and flags give identical bytes.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, io
from .corpus import (EmptyVocabularyError, TokenizerConfig, count,
                     frequency_lift, tokenize, top_lift)
from .forward import fit_linear, fit_logistic, fit_polr, predict
from .model import FactorMatrix, PriorSpec
from .api import mnir_fit
from .pls import pls_fit, slant_index
from .reduction import sr_scores
from .solver import SolverConfig


class InputError(Exception):
    pass


def _factor_matrix(path, columns=None, rounding=None):
    doc_ids, names, cols = io.read_table_tsv(path)
    use = columns if columns else names
    vals = []
    for c in use:
        if c not in cols:
            raise InputError(f"{path}: no column {c!r}")
        if cols[c].dtype.kind not in "fiu":
            raise InputError(f"{path}: column {c!r} is not numeric")
        vals.append(np.asarray(cols[c], dtype=float))
    fm = FactorMatrix(np.column_stack(vals), doc_ids, list(use))
    if rounding:
        fm = fm.rounded(rounding)
    return fm


def _align(counts_doc_ids, factors: FactorMatrix):
    index = {d: i for i, d in enumerate(factors.doc_ids)}
    missing = [d for d in counts_doc_ids if d not in index]
    if missing:
        raise InputError(f"factors missing {len(missing)} doc ids "
                         f"(first: {missing[:3]})")
    rows = [index[d] for d in counts_doc_ids]
    return FactorMatrix(factors.values[rows], list(counts_doc_ids), factors.names)


def cmd_tokenize(args) -> int:
    doc_ids, texts = io.read_raw_documents(args.input)
    config = TokenizerConfig(
        stem=not args.no_stem,
        ngram_min=args.ngram_min,
        ngram_max=args.ngram_max,
        min_doc_count=args.min_doc_count,
    )
    docs = [tokenize(t, config) for t in texts]
    counts, vocab = count(docs, config, doc_ids)
    header = io.provenance_header(sys.argv[1:], [args.input])
    io.write_counts_tsv(args.output, counts, vocab, header)
    if args.vocab_out:
        io.write_vocabulary(args.vocab_out, vocab)
    print(f"wrote {counts.n} documents x {counts.p} tokens to {args.output}")
    return 0


def cmd_fit(args) -> int:
    counts, vocab = io.read_counts_tsv(args.counts)
    factors = _align(counts.doc_ids, _factor_matrix(
        args.factors, args.columns, args.round))
    prior = PriorSpec(
        s=args.shape, r=args.rate, sigma_alpha=args.sigma_alpha,
        random_effects="collapsed" if args.random_effects else "none")
    config = SolverConfig(prior=prior, tol=args.tol,
                          max_sweeps=args.max_sweeps,
                          kkt_tol=args.kkt_tol,
                          shuffle_seed=args.seed)
    result = mnir_fit(counts, factors, prior, config,
                      standardize_factors=not args.no_standardize,
                      pool=not args.no_collapse,
                      vocabulary=vocab)
    io.save_model(args.output, result, sys.argv[1:],
                  [args.counts, args.factors])
    status = "converged" if result.converged else "NOT converged"
    print(f"{status} in {result.sweeps} sweeps; "
          f"{int((result.phi != 0).sum())} nonzero loadings; "
          f"kkt max violation {result.kkt.max_violation:.2e}")
    if args.require_kkt and not result.kkt.passed:
        print("gradient certificate failed", file=sys.stderr)
        return 1
    return 0


def cmd_score(args) -> int:
    fit = io.load_model(args.model)
    counts, vocab = io.read_counts_tsv(args.counts)
    scores = sr_scores(fit, counts, standardize=args.standardize,
                       vocabulary=vocab)
    cols = {f"z{k+1}": scores.z[:, k] for k in range(scores.K)}
    header = io.provenance_header(sys.argv[1:], [args.model, args.counts])
    if fit.factor_names:
        header = header + ["# score columns: "
                           + " ".join(fit.factor_names)]
    io.write_table_tsv(args.output, scores.doc_ids, cols, header)
    print(f"wrote {len(scores.doc_ids)} score rows to {args.output}")
    return 0


def cmd_forward(args) -> int:
    doc_ids, names, cols = io.read_table_tsv(args.scores)
    zcols = [c for c in names if c.startswith("z")]
    if not zcols:
        raise InputError(f"{args.scores}: no score columns (named z*)")
    z = np.column_stack([cols[c] for c in zcols])
    ydoc, _, ycols = io.read_table_tsv(args.response)
    if ydoc != doc_ids:
        index = {d: i for i, d in enumerate(ydoc)}
        try:
            rows = [index[d] for d in doc_ids]
        except KeyError as e:
            raise InputError(f"response missing doc id {e}")
        ycols = {k: v[rows] for k, v in ycols.items()}
    if args.column not in ycols:
        raise InputError(f"{args.response}: no column {args.column!r}")
    y = ycols[args.column]

    if args.kind == "linear":
        fitted = fit_linear(z, y, degree=1, interaction=args.interaction)
        report = f"R2={fitted.r2:.4f}"
    elif args.kind == "quadratic":
        fitted = fit_linear(z, y, degree=2, interaction=args.interaction)
        report = f"R2={fitted.r2:.4f}"
    elif args.kind == "logistic":
        fitted = fit_logistic(z, y, allow_ridge=args.ridge)
        report = f"misclassification={fitted.misclass:.4f}"
    elif args.kind == "polr":
        fitted = fit_polr(z, y.astype(int))
        report = f"beta={np.array2string(fitted.coef, precision=4)}"
    else:
        raise InputError(f"unknown kind {args.kind}")

    doc = {
        "format": "mnir-forward",
        "provenance": io.provenance_header(sys.argv[1:],
                                           [args.scores, args.response]),
        "kind": fitted.kind,
        "coef": fitted.coef.tolist(),
        "intercept": fitted.intercept,
        "cutpoints": None if fitted.cutpoints is None else fitted.cutpoints.tolist(),
        "levels": None if fitted.levels is None else np.asarray(fitted.levels).tolist(),
        "r2": fitted.r2,
        "rmse": fitted.rmse,
        "misclass": fitted.misclass,
        "design": fitted.design,
    }
    import json
    with open(args.output, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{fitted.kind} fit: {report}")
    return 0


def cmd_predict(args) -> int:
    import json

    from .forward import ForwardFit
    with open(args.model, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != "mnir-forward":
        raise InputError(f"{args.model}: not a forward-fit file")
    fitted = ForwardFit(
        kind=doc["kind"], coef=np.asarray(doc["coef"]),
        intercept=doc["intercept"],
        cutpoints=None if doc["cutpoints"] is None else np.asarray(doc["cutpoints"]),
        levels=None if doc["levels"] is None else np.asarray(doc["levels"]),
        design=doc.get("design") or {},
    )
    doc_ids, names, cols = io.read_table_tsv(args.scores)
    zcols = [c for c in names if c.startswith("z")]
    z = np.column_stack([cols[c] for c in zcols])
    header = io.provenance_header(sys.argv[1:], [args.model, args.scores])
    out: dict = {}
    if fitted.kind == "logistic":
        pr, cls = predict(fitted, z)
        out["prob"] = pr
        out["class"] = np.asarray(cls).astype(str)
    elif fitted.kind == "polr":
        probs, modal = predict(fitted, z)
        for c in range(probs.shape[1]):
            out[f"p_level_{fitted.levels[c]}"] = probs[:, c]
        out["modal_level"] = np.asarray(modal).astype(str)
    else:
        out["prediction"] = predict(fitted, z)
    io.write_table_tsv(args.output, doc_ids, out, header)
    print(f"wrote predictions for {len(doc_ids)} documents to {args.output}")
    return 0


def cmd_pls(args) -> int:
    counts, vocab = io.read_counts_tsv(args.counts)
    ydoc, _, ycols = io.read_table_tsv(args.response)
    if args.column not in ycols:
        raise InputError(f"{args.response}: no column {args.column!r}")
    if ydoc != counts.doc_ids:
        index = {d: i for i, d in enumerate(ydoc)}
        rows = [index[d] for d in counts.doc_ids]
        y = ycols[args.column][rows]
    else:
        y = ycols[args.column]
    F = counts.frequencies()
    header = io.provenance_header(sys.argv[1:], [args.counts, args.response])
    if args.slant:
        gs, normalized = slant_index(F, y)
        io.write_table_tsv(args.output, counts.doc_ids,
                           {"slant_gs": gs, "slant_cor": normalized}, header)
        print(f"wrote slant scores to {args.output}")
        return 0
    fitted = pls_fit(F, y, K=args.directions)
    cols = {f"z{k+1}": fitted.directions[:, k] for k in range(fitted.K)}
    io.write_table_tsv(args.output, counts.doc_ids, cols, header)
    print(f"PLS({fitted.K}) in-sample R2={fitted.r2:.4f}; "
          f"directions written to {args.output}")
    return 0


def cmd_lift(args) -> int:
    counts, vocab = io.read_counts_tsv(args.counts)
    gdoc, _, gcols = io.read_table_tsv(args.groups)
    if args.group not in gcols:
        raise InputError(f"{args.groups}: no column {args.group!r}")
    if gdoc != counts.doc_ids:
        index = {d: i for i, d in enumerate(gdoc)}
        labels = np.asarray(gcols[args.group])[[index[d] for d in counts.doc_ids]]
    else:
        labels = np.asarray(gcols[args.group])
    header = io.provenance_header(sys.argv[1:], [args.counts, args.groups])
    if args.top:
        lines = list(header)
        lines.append("group\ttoken\tlift")
        for g in np.unique(labels):
            for tok, lift in top_lift(counts, vocab, labels, g, k=args.top):
                lines.append(f"{g}\t{tok}\t{lift:.3f}")
        with open(args.output, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    else:
        lifts = frequency_lift(counts, labels)
        cols = {f"lift_{g}": arr for g, arr in lifts.items()}
        with open(args.output, "w", encoding="utf-8") as f:
            for line in header:
                f.write(line + "\n")
            f.write("token\t" + "\t".join(cols) + "\n")
            for j, tok in enumerate(vocab.tokens):
                f.write(tok + "\t" + "\t".join(repr(float(cols[c][j]))
                                               for c in cols) + "\n")
    print(f"wrote lift table to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnir",
        description="Multinomial inverse regression for text sentiment.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="raw text to counts TSV")
    p.add_argument("input", help="text file (one doc per line) or directory")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--vocab-out")
    p.add_argument("--ngram-min", type=int, default=1)
    p.add_argument("--ngram-max", type=int, default=1)
    p.add_argument("--min-doc-count", type=int, default=1)
    p.add_argument("--no-stem", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("fit", help="fit MNIR to counts and factors")
    p.add_argument("counts")
    p.add_argument("factors")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--columns", nargs="+", help="factor columns (default all)")
    p.add_argument("--shape", type=float, default=1.0, help="gamma shape s")
    p.add_argument("--rate", type=float, default=0.5, help="gamma rate r")
    p.add_argument("--sigma-alpha", type=float, default=1.0)
    p.add_argument("--random-effects", action="store_true")
    p.add_argument("--no-collapse", action="store_true",
                   help="one observation per document instead of per level")
    p.add_argument("--no-standardize", action="store_true",
                   help="keep factor columns on their raw scale")
    p.add_argument("--round", type=float, default=None,
                   help="round factor columns to this grid before collapsing")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.add_argument("--kkt-tol", type=float, default=1e-3)
    p.add_argument("--require-kkt", action="store_true")
    p.add_argument("--seed", type=int, default=None,
                   help="shuffle coordinate order with this seed")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="sufficient-reduction scores")
    p.add_argument("model")
    p.add_argument("counts")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--standardize", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("forward", help="forward regression on scores")
    p.add_argument("scores")
    p.add_argument("response")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--kind", required=True,
                   choices=["linear", "quadratic", "logistic", "polr"])
    p.add_argument("--column", required=True, help="response column name")
    p.add_argument("--interaction", action="store_true")
    p.add_argument("--ridge", action="store_true",
                   help="weakly penalize the logistic fit if separated")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("predict", help="predict from a forward fit")
    p.add_argument("model")
    p.add_argument("scores")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pls", help="partial least squares baseline")
    p.add_argument("counts")
    p.add_argument("response")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--directions", type=int, default=1)
    p.add_argument("--slant", action="store_true",
                   help="write slant indices instead of PLS directions")
    p.set_defaults(func=cmd_pls)

    p = sub.add_parser("lift", help="frequency lift by group")
    p.add_argument("counts")
    p.add_argument("groups")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--group", required=True, help="grouping column name")
    p.add_argument("--top", type=int, default=None,
                   help="write only the top-k per group")
    p.set_defaults(func=cmd_lift)
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("MNIR_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, EmptyVocabularyError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
