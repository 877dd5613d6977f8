"""File formats: triplet count TSVs, factor tables, score exports, and
model JSON persistence.

Every writer emits a provenance header (tool version, full argument list,
input content hashes) so identical inputs and flags produce identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from scipy import sparse

from . import __version__
from .corpus import SparseCounts, Vocabulary
from .model import MnirParams, PriorSpec
from .solver import KktReport, MnirFit


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance_header(args=None, inputs=()) -> list[str]:
    lines = [f"# mnir {__version__}"]
    if args:
        lines.append("# args: " + " ".join(str(a) for a in args))
    for p in inputs:
        lines.append(f"# input {Path(p).name} sha256={sha256_file(p)}")
    return lines


def _open_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line and not line.startswith("#"):
                yield line


def read_counts_tsv(path) -> tuple[SparseCounts, Vocabulary]:
    """Triplet file `doc_id<TAB>token<TAB>count`, header row required.

    Documents keep file order; tokens are assigned column ids in sorted
    order, matching the convention of ``corpus.count``.
    """
    lines = _open_lines(path)
    header = next(lines, None)
    if header is None:
        raise ValueError(f"{path}: empty counts file")
    cols = header.split("\t")
    if cols[:3] != ["doc_id", "token", "count"]:
        raise ValueError(f"{path}: expected header doc_id<TAB>token<TAB>count")
    doc_index: dict[str, int] = {}
    rows, toks, vals = [], [], []
    for ln, line in enumerate(lines, start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln}: expected 3 tab-separated fields")
        doc, tok, cnt = parts
        c = float(cnt)
        if c <= 0 or c != int(c):
            raise ValueError(f"{path}:{ln}: count must be a positive integer")
        rows.append(doc_index.setdefault(doc, len(doc_index)))
        toks.append(tok)
        vals.append(c)
    if not rows:
        raise ValueError(f"{path}: no count entries")
    vocab = Vocabulary(tuple(sorted(set(toks))))
    cols_ = [vocab.index[t] for t in toks]
    mat = sparse.csr_matrix(
        (vals, (rows, cols_)), shape=(len(doc_index), len(vocab)))
    return SparseCounts(mat, list(doc_index)), vocab


def write_counts_tsv(path, counts: SparseCounts, vocab: Vocabulary,
                     header_lines=()) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in header_lines:
            f.write(line + "\n")
        f.write("doc_id\ttoken\tcount\n")
        coo = counts.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            f.write(f"{counts.doc_ids[coo.row[k]]}\t{vocab.tokens[coo.col[k]]}"
                    f"\t{int(coo.data[k])}\n")


def read_table_tsv(path) -> tuple[list[str], list[str], dict]:
    """Table keyed by doc_id; numeric columns parsed as float arrays, other
    columns kept as string arrays.  Returns (doc_ids, column names, columns).
    """
    lines = _open_lines(path)
    header = next(lines, None)
    if header is None:
        raise ValueError(f"{path}: empty table")
    names = header.split("\t")
    if names[0] != "doc_id":
        raise ValueError(f"{path}: first column must be doc_id")
    names = names[1:]
    doc_ids = []
    raw = [[] for _ in names]
    for ln, line in enumerate(lines, start=2):
        parts = line.split("\t")
        if len(parts) != len(names) + 1:
            raise ValueError(f"{path}:{ln}: expected {len(names) + 1} fields")
        doc_ids.append(parts[0])
        for i, val in enumerate(parts[1:]):
            raw[i].append(val)
    columns = {}
    for name, vals in zip(names, raw):
        try:
            columns[name] = np.array([float(v) for v in vals])
        except ValueError:
            columns[name] = np.array(vals)
    return doc_ids, names, columns


def write_table_tsv(path, doc_ids, columns: dict, header_lines=()) -> None:
    names = list(columns)
    arrays = [columns[c] for c in names]
    with open(path, "w", encoding="utf-8") as f:
        for line in header_lines:
            f.write(line + "\n")
        f.write("doc_id\t" + "\t".join(names) + "\n")
        for i, doc in enumerate(doc_ids):
            cells = []
            for a in arrays:
                v = a[i]
                cells.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v))
            f.write(doc + "\t" + "\t".join(cells) + "\n")


def read_vocabulary(path) -> Vocabulary:
    """One token per line; line number is the column id."""
    tokens = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            tokens.append(line)
    return Vocabulary(tuple(tokens))


def write_vocabulary(path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in vocab.tokens:
            f.write(t + "\n")


def read_raw_documents(path) -> tuple[list[str], list[str]]:
    """Raw text ingestion: a file is one document per line; a directory is
    one document per file (sorted by name).  Returns (doc_ids, texts)."""
    p = Path(path)
    if p.is_dir():
        files = sorted(q for q in p.iterdir() if q.is_file())
        return [q.name for q in files], [q.read_text("utf-8") for q in files]
    texts = p.read_text("utf-8").splitlines()
    return [str(i) for i in range(len(texts))], texts


def save_model(path, fit: MnirFit, args=None, inputs=()) -> None:
    """Serialize a fit to a single structured JSON document."""
    phi = fit.params.phi
    nz = np.argwhere(phi != 0.0)
    lam = fit.lambdas
    doc = {
        "format": "mnir-model",
        "provenance": provenance_header(args, inputs),
        "prior": {
            "s": fit.prior.s,
            "r": fit.prior.r,
            "sigma_alpha": fit.prior.sigma_alpha,
            "random_effects": fit.prior.random_effects,
        },
        "vocabulary": list(fit.vocabulary) if fit.vocabulary is not None else None,
        "p": int(phi.shape[0]),
        "K": int(phi.shape[1]),
        "alpha": fit.params.alpha.tolist(),
        "phi_triplets": [[int(j), int(k), float(phi[j, k])] for j, k in nz],
        "lambda_triplets": [[int(j), int(k), float(lam[j, k])] for j, k in nz],
        "lambda_at_zero": float(fit.prior.s / fit.prior.r),
        "levels": fit.params.V.tolist(),
        "u": fit.params.u.tolist() if fit.params.u is not None else None,
        "factor_names": fit.factor_names,
        "factor_standardization": fit.factor_standardization,
        "trace": [float(t) for t in fit.trace],
        "sweeps": fit.sweeps,
        "converged": fit.converged,
        "kkt": fit.kkt.to_dict(),
        "backend": fit.backend,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_model(path) -> MnirFit:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != "mnir-model":
        raise ValueError(f"{path}: not a model file")
    prior = PriorSpec(**doc["prior"])
    p, K = doc["p"], doc["K"]
    phi = np.zeros((p, K))
    for j, k, v in doc["phi_triplets"]:
        phi[j, k] = v
    V = np.asarray(doc["levels"], dtype=float)
    u = np.asarray(doc["u"], dtype=float) if doc["u"] is not None else None
    params = MnirParams(np.asarray(doc["alpha"], dtype=float), phi, V, u)
    kkt = KktReport(**doc["kkt"])
    return MnirFit(
        params=params,
        prior=prior,
        trace=doc["trace"],
        sweeps=doc["sweeps"],
        converged=doc["converged"],
        kkt=kkt,
        backend=doc["backend"],
        factor_names=doc["factor_names"],
        factor_standardization=doc["factor_standardization"],
        vocabulary=tuple(doc["vocabulary"]) if doc["vocabulary"] else None,
    )
