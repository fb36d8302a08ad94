"""Code review coverage and per-update metrics, plus batch aggregation.

A delta line counts as reviewed iff its bound commit passed any review check;
added and removed lines weigh the same. Updates with an empty delta have no
defined coverage and stay out of the batch coverage statistics, though their
phantom counts still aggregate.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

from .delta import CodeDelta
from .errors import EmptyBatch, MissingVerdict
from .phantom import PhantomReport
from .review import CommitReviewVerdict


@dataclass(frozen=True)
class CommitLineStat:
    commit: str
    reviewed: bool
    satisfied_check: str | None
    evidence: str | None
    lines_attributed: int


@dataclass
class CrcReport:
    total_delta_lines: int
    reviewed_delta_lines: int
    coverage: float | None
    per_commit: list[CommitLineStat] = field(default_factory=list)
    per_file: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def zero_delta(self) -> bool:
        return self.total_delta_lines == 0


def compute_crc(delta: CodeDelta,
                verdicts: dict[str, CommitReviewVerdict]) -> CrcReport:
    """Coverage = reviewed delta lines / total delta lines; None on zero delta."""
    line_counts: dict[str, int] = {}
    file_totals: dict[str, list[int]] = {}
    reviewed_lines = 0
    for entry in (*delta.added, *delta.removed):
        verdict = verdicts.get(entry.commit)
        if verdict is None:
            raise MissingVerdict(f"no review verdict for commit {entry.commit}")
        line_counts[entry.commit] = line_counts.get(entry.commit, 0) + 1
        bucket = file_totals.setdefault(entry.path, [0, 0])
        bucket[0] += 1
        if verdict.reviewed:
            bucket[1] += 1
            reviewed_lines += 1
    total = delta.total_lines
    per_commit = [
        CommitLineStat(commit=sha, reviewed=verdicts[sha].reviewed,
                       satisfied_check=verdicts[sha].satisfied_check,
                       evidence=verdicts[sha].evidence,
                       lines_attributed=count)
        for sha, count in sorted(line_counts.items())
    ]
    return CrcReport(
        total_delta_lines=total,
        reviewed_delta_lines=reviewed_lines,
        coverage=(reviewed_lines / total) if total else None,
        per_commit=per_commit,
        per_file={p: (t, r) for p, (t, r) in sorted(file_totals.items())},
    )


@dataclass
class UpdateMetrics:
    """The four per-update headline numbers."""

    n_phantom_files: int
    n_files_with_phantom_lines: int
    n_added_phantom_lines: int
    crc: CrcReport

    @classmethod
    def from_reports(cls, phantom: PhantomReport, crc: CrcReport) -> "UpdateMetrics":
        return cls(
            n_phantom_files=phantom.n_phantom_files,
            n_files_with_phantom_lines=phantom.n_files_with_phantom_lines,
            n_added_phantom_lines=phantom.n_added_phantom_lines,
            crc=crc,
        )


@dataclass
class BatchSummary:
    n_updates: int
    n_zero_delta: int
    pct_with_phantom_files: float
    pct_with_phantom_lines: float
    crc_section_empty: bool
    median_crc: float | None
    pct_fully_reviewed: float | None
    pct_unreviewed: float | None


def aggregate_batch(metrics: list[UpdateMetrics]) -> BatchSummary:
    """Medians and percentage buckets over a batch of audited updates."""
    if not metrics:
        raise EmptyBatch("no successfully audited updates to aggregate")
    n = len(metrics)
    with_pf = sum(1 for m in metrics if m.n_phantom_files > 0)
    with_pl = sum(1 for m in metrics if m.n_files_with_phantom_lines > 0)
    coverages = [m.crc.coverage for m in metrics if m.crc.coverage is not None]
    if not coverages:
        return BatchSummary(
            n_updates=n, n_zero_delta=n - len(coverages),
            pct_with_phantom_files=100.0 * with_pf / n,
            pct_with_phantom_lines=100.0 * with_pl / n,
            crc_section_empty=True,
            median_crc=None, pct_fully_reviewed=None, pct_unreviewed=None)
    return BatchSummary(
        n_updates=n,
        n_zero_delta=n - len(coverages),
        pct_with_phantom_files=100.0 * with_pf / n,
        pct_with_phantom_lines=100.0 * with_pl / n,
        crc_section_empty=False,
        median_crc=statistics.median(coverages),
        pct_fully_reviewed=100.0 * sum(1 for c in coverages if c == 1.0) / len(coverages),
        pct_unreviewed=100.0 * sum(1 for c in coverages if c == 0.0) / len(coverages),
    )
