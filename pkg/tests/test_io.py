import numpy as np
import pytest

from mnir import io
from mnir.corpus import Vocabulary
from mnir.model import PriorSpec, collapse
from mnir.solver import SolverConfig, fit
from helpers import random_problem


def test_counts_tsv_round_trip(tmp_path, rng):
    counts, _ = random_problem(rng, n=12, p=6)
    # unsorted vocabulary: the reader reorders columns by token
    vocab = Vocabulary(tuple(f"tok{j}" for j in [3, 0, 5, 1, 4, 2]))
    path = tmp_path / "counts.tsv"
    io.write_counts_tsv(path, counts, vocab)
    loaded, lvocab = io.read_counts_tsv(path)
    assert lvocab.tokens == tuple(sorted(vocab.tokens))
    assert loaded.doc_ids == counts.doc_ids
    perm = [vocab.index[t] for t in lvocab.tokens]
    assert (loaded.matrix != counts.matrix[:, perm]).nnz == 0


def test_counts_tsv_rejects_bad_counts(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("doc_id\ttoken\tcount\nd0\ta\t0\n")
    with pytest.raises(ValueError, match="positive integer"):
        io.read_counts_tsv(path)


def test_counts_tsv_rejects_missing_header(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("d0\ta\t1\n")
    with pytest.raises(ValueError, match="header"):
        io.read_counts_tsv(path)


def test_table_round_trip(tmp_path):
    path = tmp_path / "table.tsv"
    io.write_table_tsv(path, ["a", "b"], {"x": np.array([1.5, -2.25]),
                                          "label": np.array(["p", "q"])})
    doc_ids, names, cols = io.read_table_tsv(path)
    assert doc_ids == ["a", "b"]
    assert names == ["x", "label"]
    assert cols["x"].tolist() == [1.5, -2.25]
    assert cols["label"].tolist() == ["p", "q"]


def test_vocabulary_round_trip(tmp_path):
    vocab = Vocabulary(("alpha", "beta.gamma", "delta"))
    path = tmp_path / "vocab.txt"
    io.write_vocabulary(path, vocab)
    assert io.read_vocabulary(path).tokens == vocab.tokens


def test_raw_documents_file_and_dir(tmp_path):
    f = tmp_path / "docs.txt"
    f.write_text("first doc\nsecond doc\n")
    ids, texts = io.read_raw_documents(f)
    assert ids == ["0", "1"]
    assert texts == ["first doc", "second doc"]
    d = tmp_path / "docs"
    d.mkdir()
    (d / "b.txt").write_text("bbb")
    (d / "a.txt").write_text("aaa")
    ids, texts = io.read_raw_documents(d)
    assert ids == ["a.txt", "b.txt"]
    assert texts == ["aaa", "bbb"]


def test_model_json_round_trip_bit_identical(tmp_path, rng):
    counts, factors = random_problem(rng, n=25, p=7)
    prior = PriorSpec(s=1.0, r=0.5, random_effects="collapsed")
    result = fit(collapse(counts, factors), SolverConfig(prior=prior))
    result.vocabulary = tuple(f"t{j}" for j in range(7))
    result.factor_names = ["v1"]
    p1 = tmp_path / "model.json"
    io.save_model(p1, result, args=["fit", "--shape", "1"])
    loaded = io.load_model(p1)
    assert np.array_equal(loaded.params.alpha, result.params.alpha)
    assert np.array_equal(loaded.params.phi, result.params.phi)
    assert np.array_equal(loaded.params.u, result.params.u)
    assert np.array_equal(loaded.lambdas, result.lambdas)
    assert loaded.converged == result.converged
    assert loaded.kkt.to_dict() == result.kkt.to_dict()
    assert loaded.vocabulary == result.vocabulary
    p2 = tmp_path / "model2.json"
    io.save_model(p2, loaded, args=["fit", "--shape", "1"])
    assert p1.read_bytes() == p2.read_bytes()


def test_provenance_header_is_deterministic(tmp_path):
    f = tmp_path / "input.tsv"
    f.write_text("doc_id\ttoken\tcount\nd\ta\t1\n")
    h1 = io.provenance_header(["cmd", "--flag"], [f])
    h2 = io.provenance_header(["cmd", "--flag"], [f])
    assert h1 == h2
    assert any("sha256=" in line for line in h1)
    assert h1[0].startswith("# mnir ")


def test_bundled_fixtures_shapes_and_alignment(congress, we8there):
    counts, vocab, meta = congress
    assert (counts.n, counts.p) == (529, 1000)
    assert len(meta["party"]) == 529
    assert set(meta["party"]) == {"D", "I", "R"}
    assert 0.0 < meta["repshare"].min() and meta["repshare"].max() < 1.0
    wcounts, wvocab, ratings = we8there
    assert (wcounts.n, wcounts.p) == (6166, 2640)
    assert set(np.unique(ratings["overall"])) == {1.0, 2.0, 3.0, 4.0, 5.0}
    assert wcounts.row_totals.min() >= 1
