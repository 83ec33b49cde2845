"""End-to-end orchestration: staged artifacts, provenance, determinism.

Stage order: ingest -> sense induction -> (anisotropy on sense vectors)
-> tied-covariance mixture -> idf -> document vectors -> evaluation.
Every artifact gets a sidecar meta file carrying the representation
config hash; a consumer stage rejects artifacts whose hash differs from
the active config unless forced.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import anisotropy as aniso_mod
from . import docvec as docvec_mod
from . import evaluation as eval_mod
from . import gmm as gmm_mod
from . import wsd as wsd_mod
from .config import PipelineConfig
from .corpus import Corpus, IdfTable, compute_idf, load_corpus, save_corpus
from .errors import DataError
from .store import ContextualEmbeddingStore, read_store
from .utils import stable_seed

log = logging.getLogger(__name__)

ARTIFACTS = {
    "corpus": "corpus.jsonl",
    "senses": "senses.jsonl",
    "polysemy": "polysemy.json",
    "aniso": "aniso.atb",
    "aniso_report": "aniso_report.json",
    "gmm": "gmm.gmb",
    "idf": "idf.json",
    "docvec": "docvecs.dvb",
    "config": "config.json",
}


def artifact_path(outdir, name: str) -> Path:
    return Path(outdir) / ARTIFACTS[name]


def write_meta(outdir, name: str, config: PipelineConfig) -> None:
    meta = {"stage": name, "config_hash": config.representation_hash()}
    path = artifact_path(outdir, name).with_suffix(artifact_path(outdir, name).suffix + ".meta.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def check_meta(outdir, name: str, config: PipelineConfig, force: bool = False) -> None:
    art = artifact_path(outdir, name)
    if not art.exists():
        raise DataError(f"missing artifact {art.name}; run the {name!r} stage first")
    meta_path = art.with_suffix(art.suffix + ".meta.json")
    if not meta_path.exists():
        if force:
            return
        raise DataError(f"artifact {art.name} has no provenance sidecar; rerun or use --force")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("config_hash") != config.representation_hash():
        if force:
            log.warning("using stale artifact %s despite config-hash mismatch", art.name)
            return
        raise DataError(
            f"artifact {art.name} was built with config hash {meta.get('config_hash')}, "
            f"current is {config.representation_hash()}; rerun the stage or use --force"
        )


# ---------------------------------------------------------------------------
# stages


def stage_ingest(config: PipelineConfig, corpus_path, outdir,
                 corpus_format: str = "jsonl") -> Corpus:
    corpus = load_corpus(corpus_path, format=corpus_format)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, artifact_path(outdir, "corpus"))
    write_meta(outdir, "corpus", config)
    return corpus


def load_stage_corpus(config: PipelineConfig, outdir, force: bool = False) -> Corpus:
    check_meta(outdir, "corpus", config, force)
    return load_corpus(artifact_path(outdir, "corpus"), format="jsonl")


def stage_wsd(config: PipelineConfig, corpus: Corpus, store: ContextualEmbeddingStore,
              outdir) -> wsd_mod.SenseInventory:
    inventory = wsd_mod.induce_senses(
        store,
        tau=config.tau,
        seed=config.seed,
        limits=wsd_mod.WsdLimits(
            k_max=config.k_max,
            min_occurrences=config.min_occurrences,
            min_cluster_size=config.min_cluster_size,
        ),
        force_single_sense=config.mode == "weight_avg",
    )
    wsd_mod.save_inventory(inventory, artifact_path(outdir, "senses"))
    write_meta(outdir, "senses", config)
    dist = wsd_mod.polysemy_distribution(inventory)
    buckets = {
        "k=1": sum(v for k, v in dist.items() if k == 1),
        "k=2": sum(v for k, v in dist.items() if k == 2),
        "k>=3": sum(v for k, v in dist.items() if k >= 3),
    }
    with open(artifact_path(outdir, "polysemy"), "w", encoding="utf-8") as fh:
        json.dump({"distribution": {str(k): v for k, v in dist.items()},
                   "buckets": buckets}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_meta(outdir, "polysemy", config)
    return inventory


def load_stage_inventory(config: PipelineConfig, outdir,
                         force: bool = False) -> wsd_mod.SenseInventory:
    check_meta(outdir, "senses", config, force)
    return wsd_mod.load_inventory(artifact_path(outdir, "senses"), tau=config.tau)


def stage_aniso(config: PipelineConfig, store: ContextualEmbeddingStore | None,
                inventory: wsd_mod.SenseInventory, outdir) -> aniso_mod.AnisotropyTransform | None:
    """Fit the common-component transform on sense vectors and report the
    mean pairwise cosine over the 1000 most frequent words before/after."""
    if config.k_aniso is None or config.aniso_target != "word":
        return None
    vocab = wsd_mod.build_sense_vocabulary(inventory)
    transform = aniso_mod.fit_transform(vocab.vectors, config.k_aniso,
                                        center=config.aniso_center)
    aniso_mod.save_transform(transform, artifact_path(outdir, "aniso"))
    write_meta(outdir, "aniso", config)
    top = np.argsort(-vocab.counts, kind="stable")[:1000]
    before = aniso_mod.mean_pairwise_cosine(vocab.vectors[top], seed=config.seed)
    after = aniso_mod.mean_pairwise_cosine(
        aniso_mod.apply(transform, vocab.vectors[top]), seed=config.seed)
    with open(artifact_path(outdir, "aniso_report"), "w", encoding="utf-8") as fh:
        json.dump({"mean_pairwise_cosine_before": before,
                   "mean_pairwise_cosine_after": after,
                   "k_aniso": config.k_aniso, "num_vectors": int(len(top))},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return transform


def effective_sense_vocab(config: PipelineConfig, inventory: wsd_mod.SenseInventory,
                          outdir, force: bool = False) -> wsd_mod.SenseVocabulary:
    """Sense vocabulary with the fitted transform applied when configured."""
    vocab = wsd_mod.build_sense_vocabulary(inventory)
    if config.k_aniso is not None and config.aniso_target == "word":
        check_meta(outdir, "aniso", config, force)
        transform = aniso_mod.load_transform(artifact_path(outdir, "aniso"))
        vocab.vectors = aniso_mod.apply(transform, vocab.vectors)
    return vocab


def stage_gmm(config: PipelineConfig, vocab: wsd_mod.SenseVocabulary, outdir) -> gmm_mod.GmmModel:
    model = gmm_mod.fit_gmm(
        vocab.vectors,
        config.resolved_components(),
        seed=stable_seed(config.seed, "gmm"),
        config=gmm_mod.GmmConfig(max_iters=config.gmm_max_iters, tol=config.gmm_tol,
                                 eps=config.gmm_eps,
                                 covariance_type=config.gmm_covariance),
    )
    gmm_mod.save_gmm(model, artifact_path(outdir, "gmm"))
    write_meta(outdir, "gmm", config)
    return model


def _streams_and_idf(config: PipelineConfig, corpus: Corpus,
                     inventory: wsd_mod.SenseInventory,
                     vocab: wsd_mod.SenseVocabulary) -> tuple[list[list[str]], IdfTable]:
    """Sense-tagged occurrence streams plus the idf table keyed to vocab entries.

    With idf_domain="surface" (the weighted-average ablation) document
    frequencies are counted over surface words and re-keyed onto the
    sense-tagged entries, so composition code sees one table either way.
    """
    streams = inventory.sense_tagged_streams(corpus)
    if config.idf_domain == "sense":
        return streams, compute_idf(corpus, streams)
    surface_streams = [[tok.rsplit("#", 1)[0] for tok in stream] for stream in streams]
    surface_idf = compute_idf(corpus, surface_streams)
    entries = {t: surface_idf[t.rsplit("#", 1)[0]] for t in vocab.tokens}
    return streams, IdfTable(entries=entries, num_docs=surface_idf.num_docs)


def stage_docvec(config: PipelineConfig, corpus: Corpus, inventory: wsd_mod.SenseInventory,
                 vocab: wsd_mod.SenseVocabulary, model: gmm_mod.GmmModel,
                 outdir) -> docvec_mod.DocumentVectorSet:
    streams, idf = _streams_and_idf(config, corpus, inventory, vocab)
    idf.save(artifact_path(outdir, "idf"))
    write_meta(outdir, "idf", config)
    dv_set = docvec_mod.build_document_vectors(
        corpus, streams, vocab, model, idf,
        unique_tokens=config.doc_averaging == "unique",
        provenance=config.representation_hash(),
    )
    if config.k_aniso is not None and config.aniso_target == "doc":
        transform = aniso_mod.fit_transform(dv_set.matrix, config.k_aniso,
                                            center=config.aniso_center)
        aniso_mod.save_transform(transform, artifact_path(outdir, "aniso"))
        write_meta(outdir, "aniso", config)
        dv_set.matrix = aniso_mod.apply(transform, dv_set.matrix)
    if config.sparsify_percent is not None:
        dv_set = docvec_mod.sparsify(dv_set, config.sparsify_percent)
    docvec_mod.write_vectors(dv_set, artifact_path(outdir, "docvec"))
    write_meta(outdir, "docvec", config)
    return dv_set


def load_stage_docvec(config: PipelineConfig, outdir,
                      force: bool = False) -> docvec_mod.DocumentVectorSet:
    check_meta(outdir, "docvec", config, force)
    dv_set = docvec_mod.read_vectors(artifact_path(outdir, "docvec"))
    dv_set.provenance = config.representation_hash()
    return dv_set


# ---------------------------------------------------------------------------
# whole pipeline


@dataclass
class PipelineResult:
    corpus: Corpus
    inventory: wsd_mod.SenseInventory
    vocab: wsd_mod.SenseVocabulary
    model: gmm_mod.GmmModel
    dv_set: docvec_mod.DocumentVectorSet
    outdir: Path
    eval_runs: dict[str, object]


def run_pipeline(
    config: PipelineConfig,
    corpus_path,
    store_path,
    outdir,
    corpus_format: str = "jsonl",
    embed_format: str = "ceb1",
    protocols: tuple[str, ...] = (),
) -> PipelineResult:
    """Run every stage in order, writing reloadable artifacts along the way.

    Identical (config, corpus, store) inputs produce bit-identical
    document-vector files. Evaluation protocols listed in `protocols`
    run at the end ("classify", "fewshot").
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config.save(artifact_path(outdir, "config"))
    corpus = stage_ingest(config, corpus_path, outdir, corpus_format)
    store = read_store(store_path, format=embed_format, corpus=corpus)
    inventory = stage_wsd(config, corpus, store, outdir)
    stage_aniso(config, store, inventory, outdir)
    vocab = effective_sense_vocab(config, inventory, outdir)
    model = stage_gmm(config, vocab, outdir)
    dv_set = stage_docvec(config, corpus, inventory, vocab, model, outdir)
    eval_runs: dict[str, object] = {}
    for protocol in protocols:
        if protocol == "classify":
            eval_runs[protocol] = run_classification_protocol(config, corpus, dv_set, outdir)
        elif protocol == "fewshot":
            eval_runs[protocol] = run_fewshot_protocol(config, corpus, dv_set, outdir)
        else:
            raise DataError(f"unknown pipeline protocol {protocol!r}")
    return PipelineResult(corpus=corpus, inventory=inventory, vocab=vocab, model=model,
                          dv_set=dv_set, outdir=outdir, eval_runs=eval_runs)


def run_classification_protocol(config: PipelineConfig, corpus: Corpus,
                                dv_set, outdir) -> list[eval_mod.EvalRun]:
    """Full plus limited-data classification; emits per-fraction JSON and a curve CSV."""
    fractions = sorted(set(config.fractions) | {1.0})
    runs = []
    for fraction in fractions:
        repeats = config.full_repeats if fraction == 1.0 else config.limited_repeats
        run = eval_mod.evaluate_classification(
            dv_set, corpus, fraction=fraction, repeats=repeats,
            base_seed=stable_seed(config.seed, "eval-classify"),
            c_grid=config.c_grid, epochs=config.svm_epochs,
        )
        run.config["config_hash"] = config.representation_hash()
        stem = Path(outdir) / f"eval_classify_f{int(round(fraction * 100)):03d}"
        run.save_json(stem.with_suffix(".json"))
        run.save_csv(stem.with_suffix(".csv"))
        runs.append(run)
    with open(Path(outdir) / "classification_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("fraction,accuracy_mean,accuracy_std\n")
        for run in runs:
            fh.write(f"{run.config['fraction']},{run.mean['accuracy']},{run.std['accuracy']}\n")
    return runs


def run_fewshot_protocol(config: PipelineConfig, corpus: Corpus,
                         dv_set, outdir) -> list[eval_mod.EvalRun]:
    runs = []
    for k_shot in config.k_shots:
        run = eval_mod.few_shot(
            dv_set, corpus, k_shot=k_shot, repeats=config.fewshot_repeats,
            base_seed=stable_seed(config.seed, "eval-fewshot"),
            metric=config.fewshot_metric,
        )
        run.config["config_hash"] = config.representation_hash()
        stem = Path(outdir) / f"eval_fewshot_k{k_shot:02d}"
        run.save_json(stem.with_suffix(".json"))
        run.save_csv(stem.with_suffix(".csv"))
        runs.append(run)
    with open(Path(outdir) / "fewshot_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("k_shot,accuracy_mean,accuracy_std\n")
        for run in runs:
            fh.write(f"{run.config['k_shot']},{run.mean['accuracy']},{run.std['accuracy']}\n")
    return runs
