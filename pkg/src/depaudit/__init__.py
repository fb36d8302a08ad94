"""Dependency-update auditing: phantom artifacts and code review coverage.

Given a package moving from one published version to another, this package
downloads both registry artifacts, locates the source repository and release
commits, reports files and line changes that cannot be traced back to the
repository (phantom artifacts), maps the update's code delta to the commits
responsible, and measures what fraction of that delta went through code
review.
"""

from .delta import ChangedFile, ChangedFileSet, CodeDelta, DeltaEntry, compute_code_delta
from .errors import AuditError, REASON_CODES
from .linediff import LineDiff, diff_lines
from .metrics import (
    BatchSummary,
    CommitLineStat,
    CrcReport,
    UpdateMetrics,
    aggregate_batch,
    compute_crc,
)
from .phantom import PhantomFileEntry, PhantomReport, build_phantom_report
from .pipeline import AuditOptions, parse_batch_input, run_audit, run_batch
from .registry import (
    PackageVersion,
    Registry,
    RegistryArtifact,
    UpdateCoordinates,
    diff_versions,
    fetch_artifact,
)
from .release import ReleaseContext, build_release_context, resolve_release_commit
from .report import AuditReport, render_json, render_text
from .review import (
    CommitReviewVerdict,
    ReviewProviderRecord,
    classify_commit,
    classify_commits,
)

__version__ = "0.1.0"

__all__ = [
    "AuditError",
    "AuditOptions",
    "AuditReport",
    "BatchSummary",
    "ChangedFile",
    "ChangedFileSet",
    "CodeDelta",
    "CommitLineStat",
    "CommitReviewVerdict",
    "CrcReport",
    "DeltaEntry",
    "LineDiff",
    "PackageVersion",
    "PhantomFileEntry",
    "PhantomReport",
    "REASON_CODES",
    "Registry",
    "RegistryArtifact",
    "ReleaseContext",
    "ReviewProviderRecord",
    "UpdateCoordinates",
    "UpdateMetrics",
    "aggregate_batch",
    "build_phantom_report",
    "build_release_context",
    "classify_commit",
    "classify_commits",
    "compute_code_delta",
    "compute_crc",
    "diff_lines",
    "diff_versions",
    "fetch_artifact",
    "parse_batch_input",
    "render_json",
    "render_text",
    "resolve_release_commit",
    "run_audit",
    "run_batch",
    "__version__",
]
