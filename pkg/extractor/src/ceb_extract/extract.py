"""Run a pretrained masked language model over a corpus and store, for every
token occurrence, the mean of its subword pieces' last-layer states.

Documents whose piece sequence exceeds the model window are processed in
overlapping windows with half-window stride; each token is read from the
window where its piece span sits most centrally. Records are written in
corpus order regardless of batching.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .ceb import CebWriter

log = logging.getLogger(__name__)


@dataclass
class ExtractionConfig:
    model: str = "bert-base-uncased"
    max_len: int = 512
    batch_size: int = 32
    device: str = "cpu"
    aggregation: str = "mean"  # or "first" for first-piece vectors
    deterministic: bool = False  # forces batch 1 and deterministic kernels


@dataclass
class ExtractionReport:
    num_docs: int = 0
    num_tokens: int = 0
    num_records: int = 0
    skipped: list[tuple[int, int, str]] = field(default_factory=list)
    dim: int = 0

    @property
    def coverage(self) -> float:
        return self.num_records / self.num_tokens if self.num_tokens else 0.0


def load_model(config: ExtractionConfig):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model, use_fast=True)
    if not tokenizer.is_fast:
        raise RuntimeError("a fast tokenizer is required for subword-to-word alignment")
    model = AutoModel.from_pretrained(config.model)
    model.eval()
    model.to(config.device)
    return model, tokenizer


def _window_starts(num_pieces: int, window: int) -> list[int]:
    if num_pieces <= window:
        return [0]
    stride = max(1, window // 2)
    starts = list(range(0, num_pieces - window + 1, stride))
    if starts[-1] + window < num_pieces:
        starts.append(num_pieces - window)
    return starts


def _central_window(span: tuple[int, int], starts: list[int], window: int) -> int | None:
    """Index into starts of the window covering the span most centrally."""
    p0, p1 = span
    best, best_dist = None, None
    for w, s in enumerate(starts):
        if s <= p0 and p1 < s + window:
            dist = abs((p0 + p1) / 2.0 - (s + (window - 1) / 2.0))
            if best is None or dist < best_dist:
                best, best_dist = w, dist
    return best


@dataclass
class _DocJob:
    doc_id: int
    tokens: list[str]
    piece_ids: list[int]
    word_ids: list[int | None]
    starts: list[int]
    window: int
    hidden: dict[int, np.ndarray] = field(default_factory=dict)  # window index -> (w, d)

    def pending(self) -> list[int]:
        return [w for w in range(len(self.starts)) if w not in self.hidden]


def extract(
    corpus: list[tuple[int, list[str]]],
    out_path,
    config: ExtractionConfig,
    dump_pieces_path=None,
) -> ExtractionReport:
    """Extract the whole corpus into a CEB1 store at out_path."""
    if config.deterministic:
        torch.manual_seed(0)
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
    model, tokenizer = load_model(config)
    dim = int(model.config.hidden_size)
    max_len = config.max_len
    model_limit = getattr(model.config, "max_position_embeddings", None)
    if model_limit and max_len > model_limit:
        log.warning("max_len %d exceeds the model limit %d; clamping", max_len, model_limit)
        max_len = model_limit
    window = max_len - 2  # room for the sequence delimiters
    if window < 1:
        raise ValueError(f"max_len {max_len} leaves no room for content pieces")
    batch_size = 1 if config.deterministic else max(1, config.batch_size)

    report = ExtractionReport(num_docs=len(corpus), dim=dim)
    dump_fh = open(dump_pieces_path, "w", encoding="utf-8") if dump_pieces_path else None
    jobs: list[_DocJob] = []
    for doc_id, tokens in corpus:
        report.num_tokens += len(tokens)
        if not tokens:
            continue
        enc = tokenizer(tokens, is_split_into_words=True, add_special_tokens=False)
        piece_ids = enc["input_ids"]
        word_ids = enc.word_ids()
        jobs.append(_DocJob(
            doc_id=doc_id, tokens=tokens, piece_ids=piece_ids, word_ids=word_ids,
            starts=_window_starts(len(piece_ids), window), window=window,
        ))

    queue = [(job, w) for job in jobs for w in job.pending()]
    writer = CebWriter(out_path, dim)
    try:
        finished = 0
        for chunk_start in range(0, len(queue), batch_size):
            chunk = queue[chunk_start: chunk_start + batch_size]
            _run_batch(chunk, model, tokenizer, config.device)
            # jobs complete strictly in queue order, so flushing in order
            # keeps the file in corpus order no matter the batch layout
            while finished < len(jobs) and not jobs[finished].pending():
                _finalize(jobs[finished], writer, config.aggregation, report, dump_fh)
                finished += 1
        assert finished == len(jobs)
    finally:
        writer.close()
        if dump_fh:
            dump_fh.close()
    for doc_id, token_index, token in report.skipped:
        log.warning("skipped unalignable token %r at doc %d position %d",
                    token, doc_id, token_index)
    if report.skipped:
        log.warning("skipped %d of %d tokens", len(report.skipped), report.num_tokens)
    return report


def _run_batch(chunk: list[tuple[_DocJob, int]], model, tokenizer, device) -> None:
    cls_id, sep_id, pad_id = (tokenizer.cls_token_id, tokenizer.sep_token_id,
                              tokenizer.pad_token_id or 0)
    rows = []
    for job, w in chunk:
        s = job.starts[w]
        rows.append([cls_id] + job.piece_ids[s: s + job.window] + [sep_id])
    width = max(len(r) for r in rows)
    input_ids = torch.full((len(rows), width), pad_id, dtype=torch.long)
    attention = torch.zeros((len(rows), width), dtype=torch.long)
    for i, r in enumerate(rows):
        input_ids[i, : len(r)] = torch.tensor(r, dtype=torch.long)
        attention[i, : len(r)] = 1
    with torch.no_grad():
        out = model(input_ids=input_ids.to(device), attention_mask=attention.to(device))
    hidden = out.last_hidden_state.cpu().numpy()
    for i, (job, w) in enumerate(chunk):
        n = len(rows[i]) - 2
        job.hidden[w] = hidden[i, 1: 1 + n].astype(np.float32)


def _finalize(job: _DocJob, writer: CebWriter, aggregation: str,
              report: ExtractionReport, dump_fh) -> None:
    spans: dict[int, tuple[int, int]] = {}
    for pos, wid in enumerate(job.word_ids):
        if wid is None:
            continue
        if wid not in spans:
            spans[wid] = (pos, pos)
        else:
            spans[wid] = (spans[wid][0], pos)
    for token_index, token in enumerate(job.tokens):
        span = spans.get(token_index)
        chosen = (_central_window(span, job.starts, job.window)
                  if span is not None else None)
        if chosen is None:
            report.skipped.append((job.doc_id, token_index, token))
            continue
        s = job.starts[chosen]
        pieces = job.hidden[chosen][span[0] - s: span[1] - s + 1]
        if aggregation == "first":
            vector = pieces[0]
        else:
            vector = pieces.mean(axis=0, dtype=np.float64).astype(np.float32)
        writer.write(job.doc_id, token_index, token, vector)
        report.num_records += 1
        if dump_fh is not None:
            dump_fh.write(json.dumps({
                "doc": job.doc_id, "tok": token_index, "w": token,
                "pieces": [[float(x) for x in p] for p in pieces],
            }) + "\n")
