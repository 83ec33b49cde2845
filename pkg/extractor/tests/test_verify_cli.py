import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ceb_extract import cli
from ceb_extract.ceb import CebWriter
from ceb_extract.corpus import read_corpus
from ceb_extract.extract import ExtractionConfig, extract
from ceb_extract.verify import verify_store

from conftest import write_corpus


@pytest.fixture(scope="module")
def extracted(tiny_model_dir, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("extracted")
    corpus_path = write_corpus(tmp / "corpus.jsonl", [
        {"id": 0, "text": "He went to the bank for money"},
        {"id": 1, "text": "a river during summer"},
        {"id": 2, "tokens": ["water", "water", "bank"]},
    ])
    store_path = tmp / "store.ceb"
    extract(read_corpus(corpus_path),
            store_path,
            ExtractionConfig(model=str(tiny_model_dir), max_len=16, batch_size=2))
    return corpus_path, store_path


def test_verify_extracted_store_full_coverage(extracted):
    corpus_path, store_path = extracted
    report = verify_store(read_corpus(corpus_path), store_path)
    assert report.coverage >= 0.95
    assert report.ok
    assert report.dim == 32
    assert "OK" in report.summary()


def test_verify_wrong_corpus_reports_mismatches(extracted, tmp_path):
    _, store_path = extracted
    other = write_corpus(tmp_path / "other.jsonl", [
        {"id": 0, "text": "completely different words here"},
    ])
    report = verify_store(read_corpus(other), store_path)
    assert not report.ok
    assert report.mismatches


def test_verify_empty_store_zero_coverage(extracted, tmp_path):
    corpus_path, _ = extracted
    empty = tmp_path / "empty.ceb"
    CebWriter(empty, 32).close()
    report = verify_store(read_corpus(corpus_path), empty)
    assert report.coverage == 0.0
    assert not report.ok


def test_cli_extract_and_verify_roundtrip(tiny_model_dir, tmp_path, capsys):
    corpus_path = write_corpus(tmp_path / "c.jsonl", [
        {"id": 0, "text": "he went to the bank"},
    ])
    store_path = tmp_path / "c.ceb"
    rc = cli.main_extract([
        "--corpus", str(corpus_path), "--out", str(store_path),
        "--model", str(tiny_model_dir), "--max-len", "16", "--batch", "2",
    ])
    assert rc == 0
    assert "coverage 100.00%" in capsys.readouterr().out
    assert cli.main_verify(["--corpus", str(corpus_path), "--store", str(store_path)]) == 0


def test_cli_verify_nonzero_on_empty_store(tmp_path, capsys):
    corpus_path = write_corpus(tmp_path / "c.jsonl", [{"id": 0, "text": "he went"}])
    empty = tmp_path / "e.ceb"
    CebWriter(empty, 8).close()
    assert cli.main_verify(["--corpus", str(corpus_path), "--store", str(empty)]) == 1
    assert "FAILED" in capsys.readouterr().out


def test_cli_missing_corpus(tmp_path):
    assert cli.main_extract([
        "--corpus", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "o.ceb"),
        "--model", "irrelevant",
    ]) == 3


def test_consumer_pipeline_reads_extracted_store(extracted, tmp_path):
    """Interop through the published file formats: the consumer CLI ingests the
    corpus and induces senses from the extracted store."""
    consumer = shutil.which("ctxd-scdv")
    if consumer is None:
        pytest.skip("consumer pipeline CLI not installed")
    corpus_path, store_path = extracted
    work = tmp_path / "work"
    env = dict(os.environ)
    base = [consumer]
    r1 = subprocess.run(
        base + ["ingest", "--corpus", str(corpus_path), "--out-dir", str(work),
                "--num-components", "2"],
        capture_output=True, text=True, env=env)
    assert r1.returncode == 0, r1.stderr
    r2 = subprocess.run(
        base + ["wsd", "--store", str(store_path), "--out-dir", str(work),
                "--num-components", "2"],
        capture_output=True, text=True, env=env)
    assert r2.returncode == 0, r2.stderr
    assert (work / "senses.jsonl").exists()


@pytest.mark.skipif(not os.environ.get("CEB_EXTRACT_REAL_MODEL"),
                    reason="needs a real pretrained checkpoint (set CEB_EXTRACT_REAL_MODEL)")
def test_real_model_separates_contrasting_contexts(tmp_path):
    """With a real pretrained model, the same word in two unrelated contexts
    should embed with cosine below the 0.8 sense-split threshold."""
    model = os.environ["CEB_EXTRACT_REAL_MODEL"]
    corpus_path = write_corpus(tmp_path / "c.jsonl", [
        {"id": 0, "text": "the stocks of apple have increased"},
        {"id": 1, "text": "i eat an apple every day"},
    ])
    store_path = tmp_path / "c.ceb"
    rc = cli.main_extract(["--corpus", str(corpus_path), "--out", str(store_path),
                           "--model", model])
    assert rc == 0
    from ceb_extract.ceb import read_ceb

    _, records = read_ceb(store_path)
    vecs = [vec for d, t, w, vec in records if w == "apple"]
    assert len(vecs) == 2
    a, b = (v / np.linalg.norm(v) for v in vecs)
    assert float(a @ b) < 0.8
