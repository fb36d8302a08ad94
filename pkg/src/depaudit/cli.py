"""Command-line front end.

Exit codes: 0 when every audit succeeded, 1 when any audit failed with one of
the taxonomy reason codes, 2 on usage errors. A GitHub token for the live
review provider is read from the GITHUB_TOKEN environment variable, never from
a flag.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import InputParseError
from .pipeline import AuditOptions, parse_batch_input, run_audit, run_batch
from .registry import Registry, UpdateCoordinates
from .report import (
    render_batch_json,
    render_batch_text,
    render_json,
    render_text,
)
from .review import DEFAULT_PROW_LABELS

_REGISTRY_CHOICES = [r.value for r in Registry]


def _common_options(f):
    options = [
        click.option("--output", "output_format",
                     type=click.Choice(["json", "text"]), default="text",
                     show_default=True, help="Report format written to stdout."),
        click.option("--offline", is_flag=True,
                     help="Use fixture providers instead of live endpoints."),
        click.option("--registry-fixtures", type=click.Path(exists=True, file_okay=False),
                     help="Directory of archives plus index.json (offline mode)."),
        click.option("--metadata-fixture", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file mapping packages to repositories (offline mode)."),
        click.option("--review-fixture", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file of per-commit review records (offline mode)."),
        click.option("--cache-dir", type=click.Path(file_okay=False),
                     help="Directory for clones and review-metadata caches."),
        click.option("--workers", type=click.IntRange(min=1), default=4,
                     show_default=True, help="Parallel audits in batch mode."),
        click.option("--no-timestamp", is_flag=True,
                     help="Omit generated_at for byte-reproducible JSON."),
        click.option("--prow-label", "prow_labels", multiple=True,
                     help="Override the Prow approval label set "
                          f"(default: {', '.join(sorted(DEFAULT_PROW_LABELS))})."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _build_options(offline, registry_fixtures, metadata_fixture, review_fixture,
                   cache_dir, workers, prow_labels) -> AuditOptions:
    if offline and not (registry_fixtures and metadata_fixture):
        raise click.UsageError(
            "--offline requires --registry-fixtures and --metadata-fixture")
    if not offline and (registry_fixtures or metadata_fixture or review_fixture):
        raise click.UsageError("fixture options require --offline")
    return AuditOptions(
        offline=offline,
        registry_fixtures=registry_fixtures,
        metadata_fixture=metadata_fixture,
        review_fixture=review_fixture,
        cache_dir=cache_dir,
        workers=workers,
        prow_labels=frozenset(prow_labels) if prow_labels else DEFAULT_PROW_LABELS,
    )


def _emit(data: bytes) -> None:
    stream = click.get_binary_stream("stdout")
    stream.write(data)
    stream.flush()


@click.group()
@click.version_option(package_name="depaudit")
def main():
    """Audit a dependency update: phantom artifacts and code review coverage."""


@main.command()
@click.option("--registry", required=True, type=click.Choice(_REGISTRY_CHOICES))
@click.option("--package", required=True)
@click.option("--from", "from_version", required=True,
              help="Current (pre-update) version.")
@click.option("--to", "to_version", required=True, help="Update version.")
@_common_options
def audit(registry, package, from_version, to_version, output_format,
          offline, registry_fixtures, metadata_fixture, review_fixture,
          cache_dir, workers, no_timestamp, prow_labels):
    """Audit one package update."""
    options = _build_options(offline, registry_fixtures, metadata_fixture,
                             review_fixture, cache_dir, workers, prow_labels)
    try:
        coords = UpdateCoordinates(
            registry=Registry(registry), package=package,
            current_version=from_version, update_version=to_version)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = run_audit(coords, options)
    if output_format == "json":
        _emit(render_json(report, no_timestamp=no_timestamp))
    else:
        _emit(render_text(report))
    sys.exit(0 if report.ok else 1)


@main.command()
@click.option("--input", "input_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Coordinate rows: 'registry package from to' or JSON lines.")
@_common_options
def batch(input_file, output_format, offline, registry_fixtures, metadata_fixture,
          review_fixture, cache_dir, workers, no_timestamp, prow_labels):
    """Audit many updates; failures are recorded per row, never aborting."""
    options = _build_options(offline, registry_fixtures, metadata_fixture,
                             review_fixture, cache_dir, workers, prow_labels)
    try:
        rows = parse_batch_input(Path(input_file).read_text(encoding="utf-8"))
    except InputParseError as exc:
        where = f" (row {exc.row})" if exc.row is not None else ""
        raise click.UsageError(f"{exc}{where}")
    reports, summary = run_batch(rows, options)
    if output_format == "json":
        _emit(render_batch_json(reports, summary, no_timestamp=no_timestamp))
    else:
        _emit(render_batch_text(reports, summary))
    sys.exit(0 if all(r.ok for r in reports) else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
