"""Run the full audit pipeline: fetch artifacts, locate the repository, resolve
releases, detect phantoms, map the delta, classify reviews, compute coverage.

Failures surface as a reason code on the report rather than an exception, and
whatever stages completed before the failure keep their results.
"""

from __future__ import annotations

import hashlib
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .delta import compute_code_delta
from .errors import AuditError, EmptyBatch, InputParseError
from .gitrepo import GitRepo, clone_repository, open_repository
from .locate import (
    FixtureMetadataProvider,
    LiveMetadataProvider,
    RepoContext,
    locate_package_directory,
    normalize_repository_url,
)
from .metrics import BatchSummary, UpdateMetrics, aggregate_batch, compute_crc
from .phantom import build_phantom_report
from .registry import (
    FixtureRegistryProvider,
    LiveRegistryProvider,
    Registry,
    UpdateCoordinates,
    fetch_artifact,
)
from .release import build_release_context, resolve_release_commit
from .report import OUTCOME_FAILED, AuditReport
from .review import (
    DEFAULT_PROW_LABELS,
    FixtureReviewProvider,
    GitHubReviewProvider,
    classify_commits,
)


@dataclass
class AuditOptions:
    offline: bool = False
    registry_fixtures: str | Path | None = None
    metadata_fixture: str | Path | None = None
    review_fixture: str | Path | None = None
    cache_dir: str | Path | None = None
    workers: int = 4
    prow_labels: frozenset[str] = DEFAULT_PROW_LABELS
    _registry_provider: object = field(default=None, repr=False, init=False)
    _metadata_provider: object = field(default=None, repr=False, init=False)
    _review_provider: object = field(default=None, repr=False, init=False)

    def registry_provider(self):
        if self._registry_provider is None:
            if self.offline:
                if not self.registry_fixtures:
                    raise AuditError("offline mode needs a registry fixture store")
                self._registry_provider = FixtureRegistryProvider(self.registry_fixtures)
            else:
                self._registry_provider = LiveRegistryProvider()
        return self._registry_provider

    def metadata_provider(self):
        if self._metadata_provider is None:
            if self.offline:
                if not self.metadata_fixture:
                    raise AuditError("offline mode needs a metadata fixture")
                self._metadata_provider = FixtureMetadataProvider(self.metadata_fixture)
            else:
                self._metadata_provider = LiveMetadataProvider()
        return self._metadata_provider

    def review_provider(self, repo_url: str):
        if self.offline:
            if self._review_provider is None:
                if not self.review_fixture:
                    raise AuditError("offline mode needs a review fixture")
                self._review_provider = FixtureReviewProvider(self.review_fixture)
            return self._review_provider
        owner, name = repo_url.rstrip("/").split("/")[-2:]
        return GitHubReviewProvider(owner, name, cache_dir=self.cache_dir)


def _acquire_repo(repo_url: str, clone_path: str | None,
                  options: AuditOptions) -> GitRepo:
    if clone_path:
        return open_repository(clone_path)
    digest = hashlib.sha1(repo_url.encode()).hexdigest()[:12]
    base = Path(options.cache_dir) if options.cache_dir else Path(".depaudit-cache")
    dest = base / "repos" / f"{repo_url.rstrip('/').split('/')[-1]}-{digest}"
    dest.parent.mkdir(parents=True, exist_ok=True)
    return clone_repository(repo_url, dest)


def run_audit(coords: UpdateCoordinates, options: AuditOptions) -> AuditReport:
    report = AuditReport(coordinates=coords)
    try:
        registry_provider = options.registry_provider()
        artifact_x = fetch_artifact(coords.current, registry_provider)
        artifact_y = fetch_artifact(coords.update, registry_provider)

        metadata = options.metadata_provider().lookup(coords)
        repo_url = normalize_repository_url(metadata.repository_url)
        report.repo_url = repo_url
        handle = _acquire_repo(repo_url, metadata.clone_path, options)

        c_x = resolve_release_commit(handle, coords.package, coords.current_version)
        c_y = resolve_release_commit(handle, coords.package, coords.update_version)
        report.c_x, report.c_y = c_x, c_y

        directory, fraction = locate_package_directory(
            handle, coords, artifact_y, c_y, warnings=report.warnings)
        repo_ctx = RepoContext(repo_url=repo_url, handle=handle,
                               package_directory=directory,
                               match_fraction=fraction,
                               warnings=report.warnings)
        report.package_directory = directory
        report.match_fraction = fraction

        ctx = build_release_context(repo_ctx, c_x, c_y)
        report.c_x, report.c_y, report.c_a = ctx.c_x, ctx.c_y, ctx.c_a
        report.range_size = len(ctx.range_commits)

        phantom = build_phantom_report(artifact_x, artifact_y, ctx)
        report.phantom = phantom

        delta = compute_code_delta(artifact_x, artifact_y, phantom, ctx)
        report.delta = delta
        report.warnings.extend(delta.warnings)

        provider = options.review_provider(repo_url)
        verdicts = classify_commits(delta.commits(), provider, options.prow_labels)
        report.verdicts = verdicts
        report.crc = compute_crc(delta, verdicts)
    except AuditError as exc:
        report.status = OUTCOME_FAILED
        report.reason = exc.reason_code
        report.detail = str(exc)
    except Exception as exc:  # taxonomy catch-all; a malformed input must not crash
        report.status = OUTCOME_FAILED
        report.reason = "other"
        report.detail = f"{type(exc).__name__}: {exc}"
    return report


_ROW_SPLIT = re.compile(r"[,\s]+")


def parse_batch_input(text: str) -> list[UpdateCoordinates]:
    """Rows of "registry package from to" (comma or whitespace delimited) or
    JSON objects with those keys, one per line; # comments and blanks skipped."""
    import json

    rows: list[UpdateCoordinates] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("{"):
                obj = json.loads(line)
                fields = (obj["registry"], obj["package"], obj["from"], obj["to"])
            else:
                parts = _ROW_SPLIT.split(line)
                if len(parts) != 4:
                    raise ValueError(f"expected 4 fields, got {len(parts)}")
                fields = tuple(parts)
            rows.append(UpdateCoordinates(
                registry=Registry(fields[0]), package=fields[1],
                current_version=fields[2], update_version=fields[3]))
        except InputParseError:
            raise
        except Exception as exc:
            raise InputParseError(f"cannot parse coordinate row: {exc}", row=lineno)
    if not rows:
        raise InputParseError("input contains no coordinate rows")
    return rows


def run_batch(rows: list[UpdateCoordinates], options: AuditOptions
              ) -> tuple[list[AuditReport], BatchSummary | None]:
    """Audit every row independently; one row's failure never touches another."""
    workers = max(1, options.workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda c: run_audit(c, options), rows))
    ok_metrics = [UpdateMetrics.from_reports(r.phantom, r.crc)
                  for r in reports if r.ok and r.phantom is not None and r.crc is not None]
    try:
        summary = aggregate_batch(ok_metrics)
    except EmptyBatch:
        summary = None
    return reports, summary
