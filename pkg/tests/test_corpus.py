import json
import math

import hypothesis.strategies as st
import pytest
from hypothesis import given

from ctxd_scdv.corpus import (
    Corpus,
    Document,
    IdfTable,
    compute_idf,
    load_corpus,
    save_corpus,
    tokenize,
)
from ctxd_scdv.errors import DataError

LN4 = math.log(4.0)  # 1.3862943611198906


def test_tokenize_splits_on_whitespace_and_punctuation():
    assert tokenize("He went to bank.") == ["he", "went", "to", "bank"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_case_folds():
    assert tokenize("Bank bank BANK") == ["bank", "bank", "bank"]


def test_tokenize_underscore_and_symbols_split():
    assert tokenize("a_b c-d e&f") == ["a", "b", "c", "d", "e", "f"]


@given(st.text(max_size=200))
def test_tokenize_idempotent_on_own_output(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def test_load_jsonl_three_records(tmp_path):
    path = tmp_path / "c.jsonl"
    _write_jsonl(path, [
        {"id": 0, "text": "alpha beta"},
        {"id": 1, "tokens": ["Gamma", "delta"], "label": "x", "split": "test"},
        {"id": 2, "text": ""},
    ])
    corpus = load_corpus(path)
    assert corpus.num_docs == 3
    assert [d.id for d in corpus.docs] == [0, 1, 2]
    assert corpus.docs[0].tokens == ("alpha", "beta")
    assert corpus.docs[1].tokens == ("gamma", "delta")  # tokens field is case-folded
    assert corpus.docs[1].label == "x" and corpus.docs[1].split == "test"
    assert corpus.docs[2].tokens == ()
    assert corpus.vocab == {"alpha", "beta", "gamma", "delta"}


def test_load_jsonl_missing_tokens_field_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    _write_jsonl(path, [{"id": 0, "text": "ok"}, {"id": 1, "label": "y"}])
    with pytest.raises(DataError, match="line 2"):
        load_corpus(path)


def test_load_jsonl_invalid_json_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": 0, "text": "ok"}\n{broken\n', encoding="utf-8")
    with pytest.raises(DataError, match="line 2"):
        load_corpus(path)


def test_load_jsonl_duplicate_id(tmp_path):
    path = tmp_path / "c.jsonl"
    _write_jsonl(path, [{"id": 0, "text": "a"}, {"id": 0, "text": "b"}])
    with pytest.raises(DataError, match="duplicate"):
        load_corpus(path)


def test_load_jsonl_sparse_ids_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    _write_jsonl(path, [{"id": 0, "text": "a"}, {"id": 7, "text": "b"}])
    with pytest.raises(DataError, match="dense"):
        load_corpus(path)


def test_load_tsv(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("pos\tGreat game today!\nneg\tWorst ever.\n", encoding="utf-8")
    corpus = load_corpus(path, format="tsv")
    assert corpus.num_docs == 2
    assert corpus.docs[0].label == "pos"
    assert corpus.docs[0].tokens == ("great", "game", "today")
    assert corpus.label_set == ("neg", "pos")


def test_load_tsv_malformed_line(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("only-one-column\n", encoding="utf-8")
    with pytest.raises(DataError, match="line 1"):
        load_corpus(path, format="tsv")


def test_load_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_corpus(tmp_path / "nope.jsonl")


def test_unknown_format(tmp_path):
    path = tmp_path / "c.jsonl"
    _write_jsonl(path, [{"id": 0, "text": "a"}])
    with pytest.raises(DataError, match="format"):
        load_corpus(path, format="xml")


def test_save_load_roundtrip(tmp_path):
    docs = [
        Document(0, ("a", "b"), label="x", split="train"),
        Document(1, ("c",), label="y", split="test"),
        Document(2, (), label="x", split="test"),
    ]
    corpus = Corpus(docs)
    path = tmp_path / "c.jsonl"
    save_corpus(corpus, path)
    assert load_corpus(path) == corpus


def test_bbcsport_shaped_corpus_counts(tmp_path):
    # same shape as the sports-news benchmark: 516 train, 221 test, 5 labels
    labels = ["athletics", "cricket", "football", "rugby", "tennis"]
    records = []
    for i in range(516 + 221):
        records.append({
            "id": i,
            "text": f"match report {i}",
            "label": labels[i % 5],
            "split": "train" if i < 516 else "test",
        })
    path = tmp_path / "bbc.jsonl"
    _write_jsonl(path, records)
    corpus = load_corpus(path)
    assert len(corpus.split_ids("train")) == 516
    assert len(corpus.split_ids("test")) == 221
    assert len(corpus.label_set) == 5


# ---------------------------------------------------------------------------
# idf


def _corpus_of(streams):
    return Corpus([Document(i, tuple(s)) for i, s in enumerate(streams)])


def test_idf_token_in_all_docs_is_zero():
    streams = [["t", "x"], ["t"], ["t", "y"], ["t"]]
    table = compute_idf(_corpus_of(streams))
    assert table["t"] == 0.0


def test_idf_token_in_one_of_four():
    streams = [["rare"], ["a"], ["b"], ["c"]]
    table = compute_idf(_corpus_of(streams))
    assert table["rare"] == pytest.approx(LN4, abs=1e-12)


def test_idf_two_of_eight():
    streams = [["z"], ["z"], ["a"], ["b"], ["c"], ["d"], ["e"], ["f"]]
    table = compute_idf(_corpus_of(streams))
    assert table["z"] == pytest.approx(LN4, abs=1e-12)


def test_idf_repeats_within_doc_count_once():
    streams = [["t", "t", "t"], ["x"], ["y"], ["w"]]
    assert compute_idf(_corpus_of(streams))["t"] == pytest.approx(LN4, abs=1e-12)


def test_idf_unknown_token_is_hard_error():
    table = compute_idf(_corpus_of([["a"], ["b"]]))
    with pytest.raises(DataError, match="idf"):
        table["zzz"]
    assert "zzz" not in table


def test_idf_explicit_streams_override_surface_tokens():
    corpus = _corpus_of([["a"], ["b"]])
    table = compute_idf(corpus, [["a#1"], ["a#1"]])
    assert table["a#1"] == 0.0
    assert "a" not in table


def test_idf_stream_count_mismatch():
    corpus = _corpus_of([["a"], ["b"]])
    with pytest.raises(DataError, match="streams"):
        compute_idf(corpus, [["a"]])


@given(st.lists(st.lists(st.sampled_from("abcde"), max_size=6), min_size=1, max_size=10),
       st.randoms(use_true_random=False))
def test_idf_bounds_and_permutation_invariance(streams, rnd):
    corpus = compute_idf(_corpus_of(streams))
    n = len(streams)
    for tok, value in corpus.entries.items():
        assert 0.0 <= value <= math.log(n) + 1e-12
        df = sum(tok in set(s) for s in streams)
        assert (value == 0.0) == (df == n)
    shuffled = list(streams)
    rnd.shuffle(shuffled)
    assert compute_idf(_corpus_of(shuffled)).entries == corpus.entries


def test_idf_save_load_roundtrip(tmp_path):
    table = compute_idf(_corpus_of([["a", "b"], ["b"]]))
    path = tmp_path / "idf.json"
    table.save(path)
    loaded = IdfTable.load(path)
    assert loaded.entries == table.entries
    assert loaded.num_docs == table.num_docs


def test_corpus_invalid_split_rejected():
    with pytest.raises(DataError, match="split"):
        Corpus([Document(0, ("a",), split="dev")])


def test_corpus_empty_doc_logged(caplog):
    with caplog.at_level("WARNING"):
        Corpus([Document(0, ())])
    assert any("empty" in r.message for r in caplog.records)
