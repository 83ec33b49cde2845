"""Command-line interface: staged pipeline plus evaluation and reporting.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import docvec as docvec_mod
from . import evaluation as eval_mod
from . import pipeline as pipe
from . import synth as synth_mod
from . import wsd as wsd_mod
from .config import PipelineConfig
from .corpus import save_corpus
from .errors import CtxdScdvError, DataError
from .store import read_store, write_store
from .utils import read_jsonl


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _k_aniso(text: str):
    return None if text.lower() == "off" else int(text)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--tau", type=float, help="sense-split similarity threshold")
    p.add_argument("--num-components", type=int, dest="num_components",
                   help="mixture components K")
    p.add_argument("--dataset", help="dataset name for the built-in component table")
    p.add_argument("--data-percent", type=int, dest="data_percent",
                   help="training-data percentage row of the component table")
    p.add_argument("--anisotropy-k", type=_k_aniso, dest="k_aniso", metavar="K|off",
                   help="principal directions to remove; 'off' disables entirely")
    p.add_argument("--aniso-target", dest="aniso_target", choices=["word", "doc"])
    p.add_argument("--mode", choices=["ctxd", "weight_avg"])
    p.add_argument("--sparsify", type=float, dest="sparsify_percent",
                   help="sparsification percentage (omit for off)")
    p.add_argument("--idf-domain", dest="idf_domain", choices=["sense", "surface"])
    p.add_argument("--doc-averaging", dest="doc_averaging",
                   choices=["occurrence", "unique"])
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--force", action="store_true",
                   help="accept artifacts whose config hash does not match")


_OVERRIDE_KEYS = (
    "tau", "num_components", "dataset", "data_percent", "k_aniso", "aniso_target",
    "mode", "sparsify_percent", "idf_domain", "doc_averaging", "seed",
)


def _config_from_args(args) -> PipelineConfig:
    config = (PipelineConfig.from_file(args.config) if getattr(args, "config", None)
              else PipelineConfig())
    overrides = {}
    for key in _OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    # "--anisotropy-k off" arrives as an explicit None; honor it
    if getattr(args, "k_aniso", "unset") is None and _flag_given(args, "--anisotropy-k"):
        overrides["k_aniso"] = None
        raw = config.to_dict()
        raw.update(overrides)
        return PipelineConfig.from_dict(raw)
    return config.with_overrides(overrides)


def _flag_given(args, flag: str) -> bool:
    return flag in (getattr(args, "_argv", None) or [])


def _outdir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    config = _config_from_args(args)
    corpus = pipe.stage_ingest(config, args.corpus, _outdir(args), args.corpus_format)
    print(f"ingested {corpus.num_docs} documents "
          f"({len(corpus.split_ids('train'))} train / {len(corpus.split_ids('test'))} test), "
          f"{len(corpus.vocab)} surface tokens, {len(corpus.label_set)} labels")
    return 0


def cmd_wsd(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    corpus = pipe.load_stage_corpus(config, outdir, args.force)
    store = read_store(args.store, format=args.embed_format, corpus=corpus)
    inventory = pipe.stage_wsd(config, corpus, store, outdir)
    dist = wsd_mod.polysemy_distribution(inventory)
    k1 = 100.0 * dist.get(1, 0.0)
    k2 = 100.0 * dist.get(2, 0.0)
    k3 = 100.0 * sum(v for k, v in dist.items() if k >= 3)
    print(f"induced senses for {len(inventory)} words "
          f"(k=1: {k1:.2f}%, k=2: {k2:.2f}%, k>=3: {k3:.2f}%)")
    return 0


def cmd_aniso(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    if config.k_aniso is None:
        print("anisotropy correction is off; nothing to fit")
        return 0
    if config.aniso_target != "word":
        print("anisotropy targets document vectors; the docvec stage fits it")
        return 0
    inventory = pipe.load_stage_inventory(config, outdir, args.force)
    pipe.stage_aniso(config, None, inventory, outdir)
    with open(pipe.artifact_path(outdir, "aniso_report"), "r", encoding="utf-8") as fh:
        report = json.load(fh)
    print(f"mean pairwise cosine {report['mean_pairwise_cosine_before']:.4f} -> "
          f"{report['mean_pairwise_cosine_after']:.4f} "
          f"(k={config.k_aniso}, top {report['num_vectors']} sense vectors)")
    return 0


def cmd_gmm(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    inventory = pipe.load_stage_inventory(config, outdir, args.force)
    vocab = pipe.effective_sense_vocab(config, inventory, outdir, args.force)
    model = pipe.stage_gmm(config, vocab, outdir)
    print(f"fitted {model.num_components}-component mixture over {len(vocab)} sense vectors "
          f"in {model.n_iters} iterations "
          f"(final mean log-likelihood {model.log_likelihood_trace[-1]:.4f})")
    return 0


def cmd_docvec(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    corpus = pipe.load_stage_corpus(config, outdir, args.force)
    inventory = pipe.load_stage_inventory(config, outdir, args.force)
    vocab = pipe.effective_sense_vocab(config, inventory, outdir, args.force)
    pipe.check_meta(outdir, "gmm", config, args.force)
    from .gmm import load_gmm

    model = load_gmm(pipe.artifact_path(outdir, "gmm"))
    dv_set = pipe.stage_docvec(config, corpus, inventory, vocab, model, outdir)
    if args.csv:
        docvec_mod.export_csv(dv_set, Path(outdir) / "docvecs.csv")
    print(f"built {dv_set.num_docs} document vectors of dimension {dv_set.dim}")
    return 0


def cmd_eval_classify(args) -> int:
    config = _config_from_args(args)
    if args.fractions is not None:
        config = config.with_overrides({"fractions": tuple(args.fractions)})
    if args.repeats is not None:
        config = config.with_overrides({"full_repeats": args.repeats,
                                        "limited_repeats": args.repeats})
    outdir = _outdir(args)
    corpus = pipe.load_stage_corpus(config, outdir, args.force)
    dv_set = pipe.load_stage_docvec(config, outdir, args.force)
    runs = pipe.run_classification_protocol(config, corpus, dv_set, outdir)
    for run in runs:
        print(f"fraction {run.config['fraction']:>4}: accuracy "
              f"{100 * run.mean['accuracy']:.2f} ({100 * run.std['accuracy']:.2f})")
    return 0


def cmd_eval_fewshot(args) -> int:
    config = _config_from_args(args)
    if args.k_shots is not None:
        config = config.with_overrides({"k_shots": tuple(args.k_shots)})
    if args.repeats is not None:
        config = config.with_overrides({"fewshot_repeats": args.repeats})
    outdir = _outdir(args)
    corpus = pipe.load_stage_corpus(config, outdir, args.force)
    dv_set = pipe.load_stage_docvec(config, outdir, args.force)
    runs = pipe.run_fewshot_protocol(config, corpus, dv_set, outdir)
    for run in runs:
        print(f"{run.config['k_shot']}-shot: accuracy "
              f"{100 * run.mean['accuracy']:.2f} ({100 * run.std['accuracy']:.2f})")
    return 0


def _load_concept_pairs(path) -> list[tuple[int, int, bool]]:
    pairs = []
    for lineno, rec in read_jsonl(path):
        try:
            pairs.append((int(rec["concept"]), int(rec["project"]), bool(rec["match"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed concept pair") from exc
    return pairs


def cmd_eval_concept(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    dv_set = pipe.load_stage_docvec(config, outdir, args.force)
    result = eval_mod.concept_match(dv_set, _load_concept_pairs(args.pairs))
    payload = result.to_dict()
    payload["config_hash"] = config.representation_hash()
    with open(Path(outdir) / "eval_concept.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"concept matching: accuracy {100 * result.accuracy:.1f}, "
          f"F1 {100 * result.f1:.1f} at threshold {result.threshold:.2f}")
    return 0


def _load_sts_pairs(path) -> list[eval_mod.StsPair]:
    pairs = []
    for lineno, rec in read_jsonl(path):
        try:
            pairs.append(eval_mod.StsPair(
                id_a=int(rec["a"]), id_b=int(rec["b"]),
                gold=float(rec["gold"]), group=str(rec.get("group", "all")),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: malformed sentence pair") from exc
    return pairs


def cmd_eval_sts(args) -> int:
    config = _config_from_args(args)
    outdir = _outdir(args)
    dv_set = pipe.load_stage_docvec(config, outdir, args.force)
    result = eval_mod.sts_eval(dv_set, _load_sts_pairs(args.pairs))
    payload = result.to_dict()
    payload["config_hash"] = config.representation_hash()
    with open(Path(outdir) / "eval_sts.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for group, r in result.per_group.items():
        print(f"{group}: pearson {100 * r:.1f}")
    print(f"average: {100 * result.average:.1f}")
    return 0


def cmd_report(args) -> int:
    outdir = Path(args.out_dir)
    lines = ["# Evaluation report", ""]
    wrote_any = False

    classify = sorted(outdir.glob("eval_classify_f*.json"))
    if classify:
        wrote_any = True
        lines += ["## Classification", "", "| fraction | accuracy | macro-F1 |",
                  "|---|---|---|"]
        for path in classify:
            with open(path, "r", encoding="utf-8") as fh:
                run = json.load(fh)
            lines.append(
                f"| {run['config']['fraction']} "
                f"| {100 * run['mean']['accuracy']:.2f} ({100 * run['std']['accuracy']:.2f}) "
                f"| {100 * run['mean']['macro_f1']:.2f} ({100 * run['std']['macro_f1']:.2f}) |"
            )
        lines.append("")

    fewshot = sorted(outdir.glob("eval_fewshot_k*.json"))
    if fewshot:
        wrote_any = True
        lines += ["## Few-shot", "", "| K shots | accuracy |", "|---|---|"]
        for path in fewshot:
            with open(path, "r", encoding="utf-8") as fh:
                run = json.load(fh)
            lines.append(f"| {run['config']['k_shot']} "
                         f"| {100 * run['mean']['accuracy']:.2f} "
                         f"({100 * run['std']['accuracy']:.2f}) |")
        lines.append("")

    concept = outdir / "eval_concept.json"
    if concept.exists():
        wrote_any = True
        with open(concept, "r", encoding="utf-8") as fh:
            res = json.load(fh)
        lines += ["## Concept matching", "", "| accuracy | F1 | threshold |", "|---|---|---|",
                  f"| {100 * res['accuracy']:.1f} | {100 * res['f1']:.1f} "
                  f"| {res['threshold']:.2f} |", ""]

    sts = outdir / "eval_sts.json"
    if sts.exists():
        wrote_any = True
        with open(sts, "r", encoding="utf-8") as fh:
            res = json.load(fh)
        groups = sorted(res["per_group"])
        lines += ["## Sentence similarity", "",
                  "| " + " | ".join(groups + ["Avg."]) + " |",
                  "|" + "---|" * (len(groups) + 1),
                  "| " + " | ".join(f"{100 * res['per_group'][g]:.1f}" for g in groups)
                  + f" | {100 * res['average']:.1f} |", ""]

    if not wrote_any:
        raise DataError(f"no evaluation outputs found under {outdir}")
    report_path = outdir / "report.md"
    report_path.write_text("\n".join(lines), encoding="utf-8")
    print(f"wrote {report_path}")
    return 0


def cmd_run(args) -> int:
    config = _config_from_args(args)
    protocols = tuple(p for p in (args.protocols or "classify").split(",") if p)
    result = pipe.run_pipeline(
        config, args.corpus, args.store, _outdir(args),
        corpus_format=args.corpus_format, embed_format=args.embed_format,
        protocols=protocols,
    )
    print(f"pipeline complete: {result.dv_set.num_docs} document vectors of dimension "
          f"{result.dv_set.dim} at {result.outdir}")
    return 0


def cmd_synth(args) -> int:
    spec = synth_mod.PlantedSpec(
        num_classes=args.num_classes,
        docs_per_class=args.docs_per_class,
        vocab_size=args.vocab_size,
        ambiguous_word_count=args.ambiguous_words,
        senses_per_ambiguous_word=args.senses_per_word,
        dim=args.dim,
        noise_sigma=args.sigma,
        seed=args.seed if args.seed is not None else 0,
        doc_length=args.doc_length,
    )
    planted = synth_mod.generate(spec)
    outdir = _outdir(args)
    save_corpus(planted.corpus, outdir / "corpus.jsonl")
    write_store(planted.store, outdir / "store.ceb")
    truth = {
        "sense_tags": [[d, t, s] for (d, t), s in sorted(planted.sense_tags.items())],
        "planted_sense_counts": planted.planted_sense_counts,
    }
    with open(outdir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, sort_keys=True)
        fh.write("\n")
    print(f"planted corpus: {planted.corpus.num_docs} docs, "
          f"{len(planted.store)} embedded occurrences -> {outdir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxd-scdv",
        description="Sense-disambiguated composite document vectors and their evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="tokenize and index a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("wsd", help="induce word senses from an embedding store")
    p.add_argument("--store", required=True)
    p.add_argument("--embed-format", default="ceb1", choices=["ceb1", "jsonl"])
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_wsd)

    p = sub.add_parser("aniso", help="fit the common-component removal transform")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_aniso)

    p = sub.add_parser("gmm", help="fit the tied-covariance mixture over sense vectors")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_gmm)

    p = sub.add_parser("docvec", help="compose document vectors")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--csv", action="store_true", help="also export docvecs.csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_docvec)

    p = sub.add_parser("eval-classify", help="full and limited-data classification")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--fractions", type=_float_list, help="comma list, e.g. 0.1,0.2")
    p.add_argument("--repeats", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval_classify)

    p = sub.add_parser("eval-fewshot", help="prototypical few-shot classification")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--k-shots", type=_int_list, dest="k_shots", help="comma list, e.g. 5,10")
    p.add_argument("--repeats", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval_fewshot)

    p = sub.add_parser("eval-concept", help="concept/project matching by thresholded cosine")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pairs", required=True, help="JSONL of {concept, project, match}")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval_concept)

    p = sub.add_parser("eval-sts", help="sentence-similarity Pearson correlation")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--pairs", required=True, help="JSONL of {a, b, gold, group?}")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval_sts)

    p = sub.add_parser("report", help="merge evaluation JSON into Markdown tables")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run the whole pipeline end to end")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", default="jsonl", choices=["jsonl", "tsv"])
    p.add_argument("--store", required=True)
    p.add_argument("--embed-format", default="ceb1", choices=["ceb1", "jsonl"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--protocols", help="comma list of classify,fewshot (default classify)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a planted corpus and embedding store")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-classes", type=int, default=2)
    p.add_argument("--docs-per-class", type=int, default=200)
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--ambiguous-words", type=int, default=10)
    p.add_argument("--senses-per-word", type=int, default=2)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--doc-length", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = argv
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CtxdScdvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
