import json

import numpy as np
import pytest

from ctxd_scdv import cli
from ctxd_scdv.config import GMM_COMPONENTS_BY_DATASET, PipelineConfig
from ctxd_scdv.corpus import save_corpus
from ctxd_scdv.errors import ConfigError, DataError
from ctxd_scdv.pipeline import run_pipeline
from ctxd_scdv.store import ContextualEmbeddingStore, write_store
from ctxd_scdv.synth import PlantedSpec, generate


@pytest.fixture(scope="module")
def planted_paths(tmp_path_factory):
    data_dir = tmp_path_factory.mktemp("planted")
    planted = generate(PlantedSpec(docs_per_class=30, doc_length=20, vocab_size=30,
                                   ambiguous_word_count=6, dim=12, seed=7))
    save_corpus(planted.corpus, data_dir / "corpus.jsonl")
    write_store(planted.store, data_dir / "store.ceb")
    return data_dir


def _config(**overrides):
    base = dict(num_components=4, k_aniso=2, full_repeats=1, limited_repeats=1,
                fewshot_repeats=2, fractions=(0.5,), k_shots=(5,), svm_epochs=40)
    base.update(overrides)
    return PipelineConfig(**base)


# ---------------------------------------------------------------------------
# configuration


def test_config_defaults_follow_component_table():
    assert PipelineConfig(dataset="BBCSport").resolved_components() == 90
    assert PipelineConfig(dataset="amazon").resolved_components() == 30
    assert PipelineConfig(dataset="bbcsport", data_percent=10).resolved_components() == 60
    assert GMM_COMPONENTS_BY_DATASET["20ng"][100] == 60


def test_config_requires_components_or_dataset():
    with pytest.raises(ConfigError, match="num_components"):
        PipelineConfig().resolved_components()


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        PipelineConfig.from_dict({"tua": 0.8})


def test_config_off_switches():
    cfg = PipelineConfig.from_dict({"k_aniso": "off", "num_components": 3})
    assert cfg.k_aniso is None
    with pytest.raises(ConfigError, match="off"):
        PipelineConfig.from_dict({"k_aniso": "disable"})


def test_config_validation():
    with pytest.raises(ConfigError, match="tau"):
        PipelineConfig(tau=1.2)
    with pytest.raises(ConfigError, match="mode"):
        PipelineConfig(mode="bogus")


def test_config_hash_covers_representation_only():
    a = _config()
    b = _config(full_repeats=5)  # eval knob: same representation
    c = _config(tau=0.7)
    assert a.representation_hash() == b.representation_hash()
    assert a.representation_hash() != c.representation_hash()


def test_config_file_roundtrip(tmp_path):
    cfg = _config(tau=0.75)
    path = tmp_path / "cfg.json"
    cfg.save(path)
    loaded = PipelineConfig.from_file(path)
    assert loaded.to_dict() == cfg.to_dict()


# ---------------------------------------------------------------------------
# pipeline behavior


def test_pipeline_rerun_byte_identical(planted_paths, tmp_path):
    cfg = _config()
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_pipeline(cfg, planted_paths / "corpus.jsonl", planted_paths / "store.ceb", out_a)
    run_pipeline(cfg, planted_paths / "corpus.jsonl", planted_paths / "store.ceb", out_b)
    for name in ("docvecs.dvb", "gmm.gmb", "senses.jsonl", "idf.json", "aniso.atb"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_worker_count_does_not_change_results(planted_paths, tmp_path, monkeypatch):
    from ctxd_scdv.store import read_store
    from ctxd_scdv.wsd import induce_senses

    store = read_store(planted_paths / "store.ceb")
    monkeypatch.setenv("CTXD_SCDV_THREADS", "1")
    serial = induce_senses(store, tau=0.8, seed=0)
    monkeypatch.setenv("CTXD_SCDV_THREADS", "4")
    parallel = induce_senses(store, tau=0.8, seed=0)
    assert set(serial.words) == set(parallel.words)
    for word in serial.words:
        assert np.array_equal(serial.words[word].centroids, parallel.words[word].centroids)
        assert np.array_equal(serial.words[word].senses, parallel.words[word].senses)


def test_pipeline_weight_avg_mode(planted_paths, tmp_path):
    cfg = _config(mode="weight_avg", k_aniso=None)
    result = run_pipeline(cfg, planted_paths / "corpus.jsonl",
                          planted_paths / "store.ceb", tmp_path / "out")
    with open(tmp_path / "out" / "polysemy.json", "r", encoding="utf-8") as fh:
        poly = json.load(fh)
    assert poly["distribution"] == {"1": 1.0}
    assert result.dv_set.dim == 4 * 12


def test_pipeline_aniso_report_written(planted_paths, tmp_path):
    run_pipeline(_config(), planted_paths / "corpus.jsonl",
                 planted_paths / "store.ceb", tmp_path / "out")
    with open(tmp_path / "out" / "aniso_report.json", "r", encoding="utf-8") as fh:
        report = json.load(fh)
    assert report["k_aniso"] == 2
    assert "mean_pairwise_cosine_before" in report


def test_pipeline_provenance_embedded(planted_paths, tmp_path):
    cfg = _config()
    result = run_pipeline(cfg, planted_paths / "corpus.jsonl",
                          planted_paths / "store.ceb", tmp_path / "out")
    assert result.dv_set.provenance == cfg.representation_hash()
    with open(tmp_path / "out" / "docvecs.dvb.meta.json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    assert meta["config_hash"] == cfg.representation_hash()


def test_misaligned_store_rejected(planted_paths, tmp_path):
    bad = ContextualEmbeddingStore.from_records(
        12, [(0, 0, "wrongword", [0.0] * 12)])
    write_store(bad, tmp_path / "bad.ceb")
    with pytest.raises(DataError, match="alignment|mismatch"):
        run_pipeline(_config(), planted_paths / "corpus.jsonl",
                     tmp_path / "bad.ceb", tmp_path / "out")


# ---------------------------------------------------------------------------
# CLI


def _run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_stage_chain_and_stale_rejection(planted_paths, tmp_path, capsys):
    work = tmp_path / "work"
    assert _run_cli("ingest", "--corpus", planted_paths / "corpus.jsonl",
                    "--out-dir", work, "--num-components", "4") == 0
    assert _run_cli("wsd", "--store", planted_paths / "store.ceb",
                    "--out-dir", work, "--num-components", "4") == 0
    # changing tau invalidates downstream artifacts...
    assert _run_cli("gmm", "--out-dir", work, "--num-components", "4",
                    "--tau", "0.5", "--anisotropy-k", "off") == 3
    assert "config hash" in capsys.readouterr().err
    # ...unless forced
    assert _run_cli("gmm", "--out-dir", work, "--num-components", "4",
                    "--tau", "0.5", "--anisotropy-k", "off", "--force") == 0


def test_cli_full_chain_report(planted_paths, tmp_path, capsys):
    work = tmp_path / "work"
    common = ("--out-dir", work, "--num-components", "4", "--anisotropy-k", "2")
    assert _run_cli("ingest", "--corpus", planted_paths / "corpus.jsonl", *common) == 0
    assert _run_cli("wsd", "--store", planted_paths / "store.ceb", *common) == 0
    assert _run_cli("aniso", *common) == 0
    assert _run_cli("gmm", *common) == 0
    assert _run_cli("docvec", "--csv", *common) == 0
    assert _run_cli("eval-classify", "--fractions", "0.1,0.2,0.3,0.4,0.5",
                    "--repeats", "1", *common) == 0
    curve = (work / "classification_curve.csv").read_text().strip().splitlines()
    assert len(curve) == 1 + 6  # header + 10..50% and the always-included 100%
    assert _run_cli("eval-fewshot", "--k-shots", "5", "--repeats", "2", *common) == 0
    assert _run_cli("report", "--out-dir", work) == 0
    report = (work / "report.md").read_text()
    assert "## Classification" in report and "## Few-shot" in report
    assert (work / "docvecs.csv").exists()


def test_cli_wsd_splits_ambiguous_word(tmp_path):
    # a word used in two context groups whose cross-group cosine is 0.71
    u = np.zeros(8)
    u[0] = 1.0
    v = np.zeros(8)
    v[0], v[1] = 0.71, np.sqrt(1 - 0.71**2)
    records, docs = [], []
    from ctxd_scdv.corpus import Corpus, Document

    for i in range(12):
        vec = u if i % 2 == 0 else v
        records.append((i, 0, "subject", vec.tolist()))
        docs.append(Document(i, ("subject",), label="x", split="train"))
    data = tmp_path / "data"
    data.mkdir()
    save_corpus(Corpus(docs), data / "corpus.jsonl")
    write_store(ContextualEmbeddingStore.from_records(8, records), data / "store.ceb")
    work = tmp_path / "work"
    common = ("--out-dir", work, "--num-components", "2", "--tau", "0.8")
    assert _run_cli("ingest", "--corpus", data / "corpus.jsonl", *common) == 0
    assert _run_cli("wsd", "--store", data / "store.ceb", *common) == 0
    senses = [json.loads(line) for line in (work / "senses.jsonl").read_text().splitlines()]
    by_word = {rec["w"]: rec for rec in senses}
    assert by_word["subject"]["k"] == 2


def test_cli_run_end_to_end(planted_paths, tmp_path, capsys):
    out = tmp_path / "out"
    assert _run_cli("run", "--corpus", planted_paths / "corpus.jsonl",
                    "--store", planted_paths / "store.ceb", "--out-dir", out,
                    "--num-components", "4", "--protocols", "classify,fewshot",
                    "--seed", "1") == 0
    with open(out / "eval_classify_f100.json", "r", encoding="utf-8") as fh:
        full = json.load(fh)
    assert full["mean"]["accuracy"] >= 0.9
    assert (out / "fewshot_curve.csv").exists()


def test_cli_exit_codes(tmp_path, capsys):
    # config error: malformed config file
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("{not json", encoding="utf-8")
    assert _run_cli("ingest", "--corpus", "x.jsonl", "--out-dir", tmp_path,
                    "--config", bad_cfg) == 2
    # data error: missing corpus file
    assert _run_cli("ingest", "--corpus", tmp_path / "missing.jsonl",
                    "--out-dir", tmp_path) == 3
    # data error: missing upstream artifact names the stage to run
    assert _run_cli("gmm", "--out-dir", tmp_path / "empty", "--num-components", "2") == 3
    assert "senses" in capsys.readouterr().err


def test_cli_numeric_failure_exit_code(tmp_path):
    # identical document vectors make the similarity scores constant
    from ctxd_scdv import pipeline as pipe
    from ctxd_scdv.docvec import DocumentVectorSet, write_vectors

    cfg = PipelineConfig(num_components=2)
    out = tmp_path / "work"
    out.mkdir()
    dv = DocumentVectorSet(matrix=np.tile([1.0, 0.5], (4, 1)))
    write_vectors(dv, pipe.artifact_path(out, "docvec"))
    pipe.write_meta(out, "docvec", cfg)
    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text(
        '{"a": 0, "b": 1, "gold": 1.0}\n{"a": 2, "b": 3, "gold": 4.0}\n',
        encoding="utf-8")
    assert _run_cli("eval-sts", "--out-dir", out, "--pairs", pairs,
                    "--num-components", "2") == 4


def test_cli_concept_and_sts_outputs(tmp_path):
    from ctxd_scdv import pipeline as pipe
    from ctxd_scdv.docvec import DocumentVectorSet, write_vectors

    cfg = PipelineConfig(num_components=2)
    out = tmp_path / "work"
    out.mkdir()
    dv = DocumentVectorSet(matrix=np.vstack([np.eye(3), [[1.0, 1.0, 0.0]]]))
    write_vectors(dv, pipe.artifact_path(out, "docvec"))
    pipe.write_meta(out, "docvec", cfg)

    concept_pairs = tmp_path / "concept.jsonl"
    concept_pairs.write_text(
        '{"concept": 0, "project": 0, "match": true}\n'
        '{"concept": 0, "project": 1, "match": false}\n'
        '{"concept": 1, "project": 3, "match": true}\n',
        encoding="utf-8")
    assert _run_cli("eval-concept", "--out-dir", out, "--pairs", concept_pairs,
                    "--num-components", "2") == 0
    with open(out / "eval_concept.json", "r", encoding="utf-8") as fh:
        res = json.load(fh)
    assert 0.0 <= res["f1"] <= 1.0 and "threshold" in res

    sts_pairs = tmp_path / "sts.jsonl"
    sts_pairs.write_text(
        '{"a": 0, "b": 0, "gold": 5.0, "group": "Y1"}\n'
        '{"a": 0, "b": 1, "gold": 0.0, "group": "Y1"}\n'
        '{"a": 0, "b": 3, "gold": 3.0, "group": "Y1"}\n',
        encoding="utf-8")
    assert _run_cli("eval-sts", "--out-dir", out, "--pairs", sts_pairs,
                    "--num-components", "2") == 0
    assert _run_cli("report", "--out-dir", out) == 0
    text = (out / "report.md").read_text()
    assert "## Concept matching" in text and "## Sentence similarity" in text


def test_cli_synth_emits_standard_formats(tmp_path):
    out = tmp_path / "synthdata"
    assert _run_cli("synth", "--out-dir", out, "--docs-per-class", "4",
                    "--doc-length", "6") == 0
    from ctxd_scdv.corpus import load_corpus
    from ctxd_scdv.store import read_store

    corpus = load_corpus(out / "corpus.jsonl")
    store = read_store(out / "store.ceb", corpus=corpus)
    assert corpus.num_docs == 8 and len(store) == 48
    truth = json.loads((out / "truth.json").read_text())
    assert "sense_tags" in truth
