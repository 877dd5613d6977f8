import json

import numpy as np
import pytest

from mnir.cli import main


@pytest.fixture
def corpus_files(tmp_path):
    """Tiny two-class corpus with a clear vocabulary split."""
    rng = np.random.default_rng(5)
    lines = []
    y = []
    for i in range(40):
        good = i % 2 == 0
        y.append(1.0 if good else 0.0)
        vocab = (["great", "tasty", "love", "fresh"] if good
                 else ["awful", "bland", "cold", "rude"])
        common = ["food", "place", "service"]
        words = list(rng.choice(vocab, 6)) + list(rng.choice(common, 4))
        rng.shuffle(words)
        lines.append(" ".join(words))
    raw = tmp_path / "reviews.txt"
    raw.write_text("\n".join(lines) + "\n")
    resp = tmp_path / "labels.tsv"
    with open(resp, "w") as f:
        f.write("doc_id\tgood\n")
        for i, val in enumerate(y):
            f.write(f"{i}\t{val}\n")
    return raw, resp


def test_tokenize_fit_score_forward_pipeline(tmp_path, corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    vocab = tmp_path / "vocab.txt"
    model = tmp_path / "model.json"
    scores = tmp_path / "scores.tsv"
    fwd = tmp_path / "forward.json"
    preds = tmp_path / "preds.tsv"

    assert main(["tokenize", str(raw), "-o", str(counts),
                 "--vocab-out", str(vocab), "--min-doc-count", "2"]) == 0
    assert main(["fit", str(counts), str(resp), "-o", str(model),
                 "--shape", "1", "--rate", "0.5", "--require-kkt"]) == 0
    assert main(["score", str(model), str(counts), "-o", str(scores),
                 "--standardize"]) == 0
    # disjoint class vocabularies separate perfectly: plain MLE fails ...
    assert main(["forward", str(scores), str(resp), "-o", str(fwd),
                 "--kind", "logistic", "--column", "good"]) == 1
    # ... and the weakly penalized fallback is explicit opt-in
    assert main(["forward", str(scores), str(resp), "-o", str(fwd),
                 "--kind", "logistic", "--column", "good", "--ridge"]) == 0
    assert main(["predict", str(fwd), str(scores), "-o", str(preds)]) == 0

    doc = json.loads(model.read_text())
    assert doc["converged"] is True
    assert doc["kkt"]["passed"] is True
    pred_lines = [l for l in preds.read_text().splitlines()
                  if not l.startswith("#")]
    assert len(pred_lines) == 41  # header + 40 docs
    fdoc = json.loads(fwd.read_text())
    assert fdoc["misclass"] <= 0.1  # cleanly separated vocabulary


def test_cli_outputs_are_deterministic(tmp_path, corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    model = tmp_path / "model.json"
    out = []
    for _ in range(2):  # identical inputs and flags give identical bytes
        assert main(["tokenize", str(raw), "-o", str(counts)]) == 0
        assert main(["fit", str(counts), str(resp), "-o", str(model)]) == 0
        out.append((counts.read_bytes(), model.read_bytes()))
    assert out[0] == out[1]


def test_tokenize_empty_input_exits_2(tmp_path, capsys):
    raw = tmp_path / "empty.txt"
    raw.write_text("\n")
    code = main(["tokenize", str(raw), "-o", str(tmp_path / "out.tsv")])
    assert code == 2
    assert "empty vocabulary" in capsys.readouterr().err


def test_tokenize_counts_match_recount(tmp_path):
    raw = tmp_path / "docs.txt"
    raw.write_text("apple banana apple\nbanana cherry\n")
    counts = tmp_path / "counts.tsv"
    assert main(["tokenize", str(raw), "-o", str(counts), "--no-stem"]) == 0
    rows = [l.split("\t") for l in counts.read_text().splitlines()
            if l and not l.startswith("#")][1:]
    tallies = {(doc, tok): int(c) for doc, tok, c in rows}
    assert tallies == {("0", "appl"): 2, ("0", "banana"): 1,
                       ("1", "banana"): 1, ("1", "cherri"): 1} or \
        tallies == {("0", "apple"): 2, ("0", "banana"): 1,
                    ("1", "banana"): 1, ("1", "cherry"): 1}


def test_tokenize_idempotent_on_clean_unigrams(tmp_path):
    raw = tmp_path / "docs.txt"
    raw.write_text("alpha beta alpha\nbeta gamma\n")
    c1 = tmp_path / "c1.tsv"
    assert main(["tokenize", str(raw), "-o", str(c1), "--no-stem"]) == 0
    rows1 = sorted(l for l in c1.read_text().splitlines()
                   if l and not l.startswith("#"))
    # re-tokenize a reconstruction of the same documents
    from mnir.io import read_counts_tsv
    counts, vocab = read_counts_tsv(c1)
    lines = []
    for i in range(counts.n):
        row = counts.matrix[i].tocoo()
        words = []
        for j, c in zip(row.col, row.data):
            words.extend([vocab.tokens[j]] * int(c))
        lines.append(" ".join(sorted(words)))
    raw2 = tmp_path / "docs2.txt"
    raw2.write_text("\n".join(lines) + "\n")
    c2 = tmp_path / "c2.tsv"
    assert main(["tokenize", str(raw2), "-o", str(c2), "--no-stem"]) == 0
    rows2 = sorted(l for l in c2.read_text().splitlines()
                   if l and not l.startswith("#"))
    assert rows1 == rows2


def test_missing_file_exits_2(tmp_path, capsys):
    code = main(["fit", str(tmp_path / "nope.tsv"), str(tmp_path / "also.tsv"),
                 "-o", str(tmp_path / "m.json")])
    assert code == 2


def test_lift_and_pls_commands(tmp_path, corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    assert main(["tokenize", str(raw), "-o", str(counts)]) == 0
    lift_out = tmp_path / "lift.tsv"
    assert main(["lift", str(counts), str(resp), "-o", str(lift_out),
                 "--group", "good", "--top", "3"]) == 0
    body = [l for l in lift_out.read_text().splitlines() if not l.startswith("#")]
    assert body[0] == "group\ttoken\tlift"
    assert len(body) == 7  # two groups x top 3 + header
    pls_out = tmp_path / "pls.tsv"
    assert main(["pls", str(counts), str(resp), "-o", str(pls_out),
                 "--column", "good", "--directions", "2"]) == 0
    slant_out = tmp_path / "slant.tsv"
    assert main(["pls", str(counts), str(resp), "-o", str(slant_out),
                 "--column", "good", "--slant"]) == 0
    hdr = [l for l in slant_out.read_text().splitlines() if not l.startswith("#")][0]
    assert hdr == "doc_id\tslant_gs\tslant_cor"


def test_score_headers_carry_provenance(tmp_path, corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    model = tmp_path / "model.json"
    scores = tmp_path / "scores.tsv"
    assert main(["tokenize", str(raw), "-o", str(counts)]) == 0
    assert main(["fit", str(counts), str(resp), "-o", str(model)]) == 0
    assert main(["score", str(model), str(counts), "-o", str(scores)]) == 0
    header = [l for l in scores.read_text().splitlines() if l.startswith("#")]
    assert any("mnir" in l for l in header)
    assert any("args:" in l for l in header)
    assert sum("sha256=" in l for l in header) == 2


def test_polr_roundtrip_through_cli(tmp_path, rng):
    # scores drive an ordinal response; CLI polr recovers a positive slope
    n = 200
    z = rng.normal(0, 1, n)
    y = np.clip(np.round(3 + 1.2 * z + rng.normal(0, 0.8, n)), 1, 5).astype(int)
    scores = tmp_path / "scores.tsv"
    with open(scores, "w") as f:
        f.write("doc_id\tz_overall\n")
        for i in range(n):
            f.write(f"{i}\t{float(z[i])!r}\n")
    resp = tmp_path / "resp.tsv"
    with open(resp, "w") as f:
        f.write("doc_id\toverall\n")
        for i in range(n):
            f.write(f"{i}\t{y[i]}\n")
    fwd = tmp_path / "polr.json"
    assert main(["forward", str(scores), str(resp), "-o", str(fwd),
                 "--kind", "polr", "--column", "overall"]) == 0
    doc = json.loads(fwd.read_text())
    assert doc["kind"] == "polr"
    assert doc["coef"][0] > 0.5
    assert np.all(np.diff(doc["cutpoints"]) > 0)
    preds = tmp_path / "preds.tsv"
    assert main(["predict", str(fwd), str(scores), "-o", str(preds)]) == 0
    body = [l for l in preds.read_text().splitlines() if not l.startswith("#")]
    assert body[0].startswith("doc_id\tp_level_")


def _data_file(name):
    from importlib import resources
    with resources.as_file(resources.files("mnir").joinpath(f"data/{name}")) as p:
        return str(p)


def test_cli_bundled_pipeline_fit_score_forward(tmp_path):
    """fit -> score -> forward on the bundled review corpus: the CLI scores
    reproduce the in-process projection, and the ordinal slope lands where
    the library path puts it."""
    counts_path = _data_file("we8there_counts.tsv")
    ratings_path = _data_file("we8there_ratings.tsv")
    model = tmp_path / "model.json"
    scores = tmp_path / "scores.tsv"
    fwd = tmp_path / "polr.json"
    assert main(["fit", counts_path, ratings_path, "-o", str(model),
                 "--columns", "overall", "--shape", "1", "--rate", "0.5",
                 "--require-kkt"]) == 0
    assert main(["score", str(model), counts_path, "-o", str(scores),
                 "--standardize"]) == 0
    assert main(["forward", str(scores), ratings_path, "-o", str(fwd),
                 "--kind", "polr", "--column", "overall"]) == 0

    from mnir import io as mio
    from mnir.reduction import sr_scores
    fit_obj = mio.load_model(model)
    counts, vocab = mio.read_counts_tsv(counts_path)
    expected = sr_scores(fit_obj, counts, standardize=True, vocabulary=vocab)
    _, _, cols = mio.read_table_tsv(scores)
    assert np.abs(cols["z1"] - expected.z[:, 0]).max() < 1e-12

    doc = json.loads(fwd.read_text())
    assert abs(doc["coef"][0] - 2.3) < 0.2


def test_cli_lift_reproduces_reference_tables(tmp_path):
    counts_path = _data_file("congress_counts.tsv")
    ideology_path = _data_file("congress_ideology.tsv")
    # two-party grouping: the independents caucus with the Democrats
    from mnir import io as mio
    doc_ids, _, cols = mio.read_table_tsv(ideology_path)
    groups = tmp_path / "party2.tsv"
    with open(groups, "w") as f:
        f.write("doc_id\tparty\n")
        for d, p in zip(doc_ids, cols["party"]):
            f.write(f"{d}\t{'R' if p == 'R' else 'D'}\n")
    out = tmp_path / "lift.tsv"
    assert main(["lift", counts_path, str(groups), "-o", str(out),
                 "--group", "party", "--top", "5"]) == 0
    rows = [l.split("\t") for l in out.read_text().splitlines()
            if l and not l.startswith("#")][1:]
    dem = [(tok, float(v)) for g, tok, v in rows if g == "D"]
    assert dem[0][0] == "congressional.hispanic.caucu"
    assert abs(dem[0][1] - 2.163) <= 0.001
    rep = [(tok, float(v)) for g, tok, v in rows if g == "R"]
    assert rep[0][0] == "ayman.al.zawahiri"
    assert abs(rep[0][1] - 1.850) <= 0.001


def test_cli_no_collapse_fit(tmp_path, corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    model = tmp_path / "model.json"
    assert main(["tokenize", str(raw), "-o", str(counts)]) == 0
    assert main(["fit", str(counts), str(resp), "-o", str(model),
                 "--no-collapse", "--require-kkt"]) == 0
    doc = json.loads(model.read_text())
    assert doc["converged"] is True
    assert len(doc["levels"]) == 40  # one pseudo-observation per document


def test_cli_scores_new_documents_with_different_vocabulary(tmp_path,
                                                            corpus_files):
    raw, resp = corpus_files
    counts = tmp_path / "counts.tsv"
    model = tmp_path / "model.json"
    assert main(["tokenize", str(raw), "-o", str(counts)]) == 0
    assert main(["fit", str(counts), str(resp), "-o", str(model)]) == 0
    # new docs share part of the vocabulary and add unseen tokens
    new_counts = tmp_path / "new_counts.tsv"
    new_counts.write_text(
        "doc_id\ttoken\tcount\n"
        "n0\tgreat\t2\nn0\tunseen_token\t5\nn0\tfood\t1\n"
        "n1\tbland\t3\nn1\tanother_novel\t7\n")
    out = tmp_path / "new_scores.tsv"
    assert main(["score", str(model), str(new_counts), "-o", str(out)]) == 0
    from mnir import io as mio
    doc_ids, _, cols = mio.read_table_tsv(out)
    assert doc_ids == ["n0", "n1"]
    fit_obj = mio.load_model(model)
    vocab = {t: j for j, t in enumerate(fit_obj.vocabulary)}
    phi = fit_obj.phi[:, 0]
    # unseen tokens drop from numerator and row total
    expect_n0 = (2 * phi[vocab["great"]] + 1 * phi[vocab["food"]]) / 3.0
    expect_n1 = phi[vocab["bland"]]
    assert abs(cols["z1"][0] - expect_n0) < 1e-12
    assert abs(cols["z1"][1] - expect_n1) < 1e-12


def test_cli_linear_forward_and_predict(tmp_path, rng):
    n = 60
    z = rng.normal(0, 1, n)
    y = 4.0 + 2.5 * z
    scores = tmp_path / "scores.tsv"
    resp = tmp_path / "resp.tsv"
    with open(scores, "w") as f:
        f.write("doc_id\tz1\n")
        for i in range(n):
            f.write(f"{i}\t{float(z[i])!r}\n")
    with open(resp, "w") as f:
        f.write("doc_id\ty\n")
        for i in range(n):
            f.write(f"{i}\t{float(y[i])!r}\n")
    fwd = tmp_path / "lin.json"
    preds = tmp_path / "preds.tsv"
    assert main(["forward", str(scores), str(resp), "-o", str(fwd),
                 "--kind", "linear", "--column", "y"]) == 0
    assert main(["predict", str(fwd), str(scores), "-o", str(preds)]) == 0
    from mnir import io as mio
    _, _, cols = mio.read_table_tsv(preds)
    assert np.abs(cols["prediction"] - y).max() < 1e-8
