"""Alignment verification between a corpus and an extracted store."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ceb import read_ceb

COVERAGE_FLOOR = 0.95


@dataclass
class AlignmentReport:
    dim: int
    total_tokens: int
    aligned_records: int
    mismatches: list[str] = field(default_factory=list)
    missing_per_doc: dict[int, int] = field(default_factory=dict)

    @property
    def coverage(self) -> float:
        return self.aligned_records / self.total_tokens if self.total_tokens else 0.0

    @property
    def ok(self) -> bool:
        return self.coverage >= COVERAGE_FLOOR and not self.mismatches

    def summary(self) -> str:
        lines = [
            f"dim: {self.dim}",
            f"tokens: {self.total_tokens}",
            f"aligned records: {self.aligned_records}",
            f"coverage: {100.0 * self.coverage:.2f}%",
        ]
        worst = sorted(self.missing_per_doc.items(), key=lambda kv: -kv[1])[:5]
        for doc_id, count in worst:
            lines.append(f"doc {doc_id}: {count} tokens without vectors")
        for msg in self.mismatches[:10]:
            lines.append(f"mismatch: {msg}")
        if len(self.mismatches) > 10:
            lines.append(f"... {len(self.mismatches) - 10} more mismatches")
        lines.append("status: " + ("OK" if self.ok else "FAILED"))
        return "\n".join(lines)


def verify_store(corpus: list[tuple[int, list[str]]], store_path) -> AlignmentReport:
    dim, records = read_ceb(store_path)
    docs = dict(corpus)
    total = sum(len(tokens) for tokens in docs.values())
    report = AlignmentReport(dim=dim, total_tokens=total, aligned_records=0)
    seen: dict[int, set[int]] = {doc_id: set() for doc_id in docs}
    for doc_id, token_index, token, _vec in records:
        tokens = docs.get(doc_id)
        if tokens is None:
            report.mismatches.append(f"record references unknown doc {doc_id}")
            continue
        if token_index >= len(tokens):
            report.mismatches.append(
                f"record references token {token_index} of doc {doc_id} "
                f"(doc has {len(tokens)})")
            continue
        if tokens[token_index].casefold() != token.casefold():
            report.mismatches.append(
                f"doc {doc_id} token {token_index}: corpus {tokens[token_index]!r} "
                f"vs store {token!r}")
            continue
        if token_index in seen[doc_id]:
            report.mismatches.append(f"duplicate record for doc {doc_id} token {token_index}")
            continue
        seen[doc_id].add(token_index)
        report.aligned_records += 1
    for doc_id, tokens in docs.items():
        missing = len(tokens) - len(seen.get(doc_id, ()))
        if missing:
            report.missing_per_doc[doc_id] = missing
    return report
