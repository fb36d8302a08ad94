"""Assemble audit results into a report and render it as JSON or text.

The JSON schema is stable: fixed key order, a schema_version field, and a
generated_at timestamp that can be suppressed so identical inputs produce
byte-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .delta import CodeDelta, DeltaEntry
from .linediff import LineDiff
from .metrics import BatchSummary, CrcReport
from .phantom import PhantomReport
from .registry import UpdateCoordinates
from .review import CommitReviewVerdict

SCHEMA_VERSION = "1"

OUTCOME_OK = "ok"
OUTCOME_FAILED = "failed"


@dataclass
class AuditReport:
    coordinates: UpdateCoordinates
    status: str = OUTCOME_OK
    reason: str | None = None
    detail: str | None = None
    repo_url: str | None = None
    package_directory: str | None = None
    match_fraction: float | None = None
    c_x: str | None = None
    c_y: str | None = None
    c_a: str | None = None
    range_size: int | None = None
    phantom: PhantomReport | None = None
    delta: CodeDelta | None = None
    verdicts: dict[str, CommitReviewVerdict] | None = None
    crc: CrcReport | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OUTCOME_OK


def _text(raw: bytes) -> str:
    return raw.decode("utf-8", "replace")


def _line_diff_json(diff: LineDiff) -> dict:
    return {
        "added": [[_text(line), count] for line, count in sorted(diff.added.items())],
        "removed": [[_text(line), count] for line, count in sorted(diff.removed.items())],
    }


def _delta_entries_json(entries: list[DeltaEntry]) -> list[dict]:
    return [{"path": e.path, "line_number": e.line_number,
             "content": _text(e.content), "commit": e.commit}
            for e in entries]


def report_to_dict(report: AuditReport, timestamp: str | None = None) -> dict:
    coords = report.coordinates
    out: dict = {"schema_version": SCHEMA_VERSION}
    if timestamp is not None:
        out["generated_at"] = timestamp
    out["coordinates"] = {
        "registry": coords.registry.value,
        "package": coords.package,
        "from_version": coords.current_version,
        "to_version": coords.update_version,
    }
    out["outcome"] = {
        "status": report.status,
        "reason": report.reason,
        "detail": report.detail,
    }
    out["repository"] = None if report.repo_url is None else {
        "url": report.repo_url,
        "package_directory": report.package_directory,
        "path_match_fraction": report.match_fraction,
    }
    out["release"] = None if report.c_y is None else {
        "commit_x": report.c_x,
        "commit_y": report.c_y,
        "common_ancestor": report.c_a,
        "range_size": report.range_size,
    }
    phantom = report.phantom
    out["phantom"] = None if phantom is None else {
        "counts": {
            "phantom_files": phantom.n_phantom_files,
            "files_with_phantom_lines": phantom.n_files_with_phantom_lines,
            "added_phantom_lines": phantom.n_added_phantom_lines,
        },
        "files": [{"registry_path": e.registry_path,
                   "mapped_repo_path": e.mapped_repo_path,
                   "reason": e.reason}
                  for e in phantom.phantom_files],
        "lines": {path: _line_diff_json(diff)
                  for path, diff in sorted(phantom.phantom_lines.items())},
        "removed_files": list(phantom.removed_files),
    }
    delta = report.delta
    out["delta"] = None if delta is None else {
        "total_lines": delta.total_lines,
        "added": _delta_entries_json(delta.added),
        "removed": _delta_entries_json(delta.removed),
    }
    verdicts = report.verdicts
    out["review"] = None if verdicts is None else {
        "verdicts": [{"commit": v.commit, "reviewed": v.reviewed,
                      "check": v.satisfied_check, "evidence": v.evidence}
                     for _, v in sorted(verdicts.items())],
    }
    crc = report.crc
    out["crc"] = None if crc is None else {
        "total_delta_lines": crc.total_delta_lines,
        "reviewed_delta_lines": crc.reviewed_delta_lines,
        "coverage": crc.coverage,
        "zero_delta": crc.zero_delta,
        "per_commit": [{"commit": s.commit, "reviewed": s.reviewed,
                        "check": s.satisfied_check,
                        "lines_attributed": s.lines_attributed}
                       for s in crc.per_commit],
        "per_file": {path: {"total": t, "reviewed": r}
                     for path, (t, r) in crc.per_file.items()},
    }
    out["warnings"] = list(report.warnings)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def render_json(report: AuditReport, no_timestamp: bool = False) -> bytes:
    payload = report_to_dict(report, timestamp=None if no_timestamp else _now())
    return (json.dumps(payload, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def summary_to_dict(summary: BatchSummary) -> dict:
    return {
        "n_updates": summary.n_updates,
        "n_zero_delta": summary.n_zero_delta,
        "pct_with_phantom_files": summary.pct_with_phantom_files,
        "pct_with_phantom_lines": summary.pct_with_phantom_lines,
        "crc": None if summary.crc_section_empty else {
            "median_coverage": summary.median_crc,
            "pct_fully_reviewed": summary.pct_fully_reviewed,
            "pct_unreviewed": summary.pct_unreviewed,
        },
        "crc_section_empty": summary.crc_section_empty,
    }


def render_batch_json(reports: list[AuditReport], summary: BatchSummary | None,
                      no_timestamp: bool = False) -> bytes:
    payload: dict = {"schema_version": SCHEMA_VERSION}
    if not no_timestamp:
        payload["generated_at"] = _now()
    payload["updates"] = [report_to_dict(r) for r in reports]
    payload["summary"] = None if summary is None else summary_to_dict(summary)
    payload["n_failed"] = sum(1 for r in reports if not r.ok)
    return (json.dumps(payload, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def render_text(report: AuditReport) -> bytes:
    coords = report.coordinates
    lines: list[str] = []
    lines.append(f"update: {coords.registry.value}/{coords.package} "
                 f"{coords.current_version} -> {coords.update_version}")
    if report.ok:
        lines.append("outcome: ok")
    else:
        lines.append(f"outcome: failed ({report.reason})")
        if report.detail:
            lines.append(f"  {report.detail}")
    if report.repo_url:
        where = f"repository: {report.repo_url}"
        if report.package_directory:
            where += f" (directory: {report.package_directory})"
        lines.append(where)
    if report.c_y:
        lines.append(f"release commits: {report.c_x[:12]} -> {report.c_y[:12]} "
                     f"(ancestor {report.c_a[:12]}, {report.range_size} commits in range)")
    phantom = report.phantom
    if phantom is not None:
        lines.append(f"phantom files: {phantom.n_phantom_files}")
        for e in phantom.phantom_files:
            lines.append(f"  - {e.registry_path} -> {e.mapped_repo_path} ({e.reason})")
        lines.append(f"phantom lines: {phantom.n_added_phantom_lines} added "
                     f"in {phantom.n_files_with_phantom_lines} file(s)")
        for path, diff in sorted(phantom.phantom_lines.items()):
            lines.append(f"  - {path}: +{diff.added_count}/-{diff.removed_count}")
    crc = report.crc
    if crc is not None:
        if crc.zero_delta:
            lines.append("code delta: empty (coverage undefined)")
        else:
            lines.append(f"code delta: {crc.total_delta_lines} lines")
            lines.append(f"review coverage: {crc.coverage:.1%} "
                         f"({crc.reviewed_delta_lines}/{crc.total_delta_lines} lines)")
            for stat in crc.per_commit:
                if stat.reviewed:
                    lines.append(f"  - {stat.commit[:12]} reviewed via "
                                 f"{stat.satisfied_check} ({stat.evidence}): "
                                 f"{stat.lines_attributed} line(s)")
                else:
                    lines.append(f"  - {stat.commit[:12]} NOT reviewed: "
                                 f"{stat.lines_attributed} line(s)")
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_batch_text(reports: list[AuditReport], summary: BatchSummary | None) -> bytes:
    chunks = [render_text(r).decode("utf-8") for r in reports]
    lines = ["", "batch summary:"]
    if summary is None:
        lines.append("  no successfully audited updates")
    else:
        lines.append(f"  updates audited: {summary.n_updates} "
                     f"({summary.n_zero_delta} zero-delta)")
        lines.append(f"  with phantom files: {summary.pct_with_phantom_files:.1f}%")
        lines.append(f"  with phantom lines: {summary.pct_with_phantom_lines:.1f}%")
        if summary.crc_section_empty:
            lines.append("  coverage: undefined for every update (all zero-delta)")
        else:
            lines.append(f"  median coverage: {summary.median_crc:.1%}")
            lines.append(f"  fully reviewed: {summary.pct_fully_reviewed:.1f}%"
                         f", unreviewed: {summary.pct_unreviewed:.1f}%")
    failed = sum(1 for r in reports if not r.ok)
    if failed:
        lines.append(f"  failed rows: {failed}")
    return ("\n---\n".join(chunks) + "\n".join(lines) + "\n").encode("utf-8")
