"""Detect phantom artifacts: registry files and line changes with no counterpart
in the repository at the release commits.

A registry file whose mapped repository path is absent at the update's release
commit is a phantom file. For the remaining files, the registry-side version
diff minus the repository-side diff between the release commits (a multiset
difference per file) gives the phantom lines.
"""

from __future__ import annotations

from dataclasses import dataclass

from .linediff import LineDiff, diff_lines, is_text
from .locate import map_registry_path
from .registry import RegistryArtifact
from .release import ReleaseContext

REASON_MISSING = "missing-at-release-commit"
REASON_BINARY_MISMATCH = "binary-content-mismatch"


@dataclass(frozen=True)
class PhantomFileEntry:
    registry_path: str
    mapped_repo_path: str
    reason: str


@dataclass
class PhantomReport:
    """Phantom files, per-file phantom line multisets, and the headline counts."""

    phantom_files: list[PhantomFileEntry]
    phantom_lines: dict[str, LineDiff]
    removed_files: list[str]

    @property
    def n_phantom_files(self) -> int:
        return len(self.phantom_files)

    @property
    def n_files_with_phantom_lines(self) -> int:
        return len(self.phantom_lines)

    @property
    def n_added_phantom_lines(self) -> int:
        return sum(d.added_count for d in self.phantom_lines.values())

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n_phantom_files, self.n_files_with_phantom_lines,
                self.n_added_phantom_lines)

    def phantom_registry_paths(self) -> set[str]:
        return {e.registry_path for e in self.phantom_files}

    def is_clean(self) -> bool:
        return not self.phantom_files and not self.phantom_lines


def _repo_file_exists(ctx: ReleaseContext, path: str) -> bool:
    repo = ctx.repo.handle
    entry = repo.tree(ctx.c_y).get(path)
    if entry is not None:
        return not entry.is_gitlink
    hit = repo.resolve_submodule(path, ctx.c_y)
    if hit is None:
        return False
    mount, inner = hit
    if not inner:
        return False
    sub = repo.submodule_repo(mount)
    return inner in sub.tree(mount.pointer)


def _repo_content(ctx: ReleaseContext, at: str, path: str) -> bytes | None:
    repo = ctx.repo.handle
    content = repo.file_content(at, path)
    if content is not None:
        return content
    hit = repo.resolve_submodule(path, at)
    if hit is None:
        return None
    mount, inner = hit
    if not inner:
        return None
    return repo.submodule_repo(mount).file_content(mount.pointer, inner)


def detect_phantom_files(artifact_y: RegistryArtifact,
                         ctx: ReleaseContext) -> list[PhantomFileEntry]:
    """Registry files of the update version untraceable to the repository tree.

    Text files that exist at the mapped path are never phantom files, whatever
    their content: textual differences belong to the phantom-line pass. Binary
    files must match the repository copy byte for byte.
    """
    entries: list[PhantomFileEntry] = []
    for path in artifact_y.files:
        mapped = map_registry_path(ctx.repo, path, ctx.c_y)
        if not _repo_file_exists(ctx, mapped):
            entries.append(PhantomFileEntry(path, mapped, REASON_MISSING))
            continue
        if not artifact_y.is_text(path):
            repo_bytes = _repo_content(ctx, ctx.c_y, mapped)
            if repo_bytes != artifact_y.content(path):
                entries.append(PhantomFileEntry(path, mapped, REASON_BINARY_MISMATCH))
    return entries


def rename_source_within(ctx: ReleaseContext, frm: str, to: str,
                         mapped_path: str) -> str | None:
    """Rename source of `mapped_path` between two commits, but only when both
    ends sit under the package directory: renames crossing the boundary are
    treated as add+delete to keep the directory mapping sound."""
    source = ctx.repo.handle.rename_sources(frm, to).get(mapped_path)
    if source is None:
        return None
    directory = ctx.repo.package_directory
    if directory and not source.startswith(directory + "/"):
        return None
    return source


def _strip_directory(directory: str, repo_path: str) -> str:
    if directory and repo_path.startswith(directory + "/"):
        return repo_path[len(directory) + 1:]
    return repo_path


def detect_phantom_lines(artifact_x: RegistryArtifact,
                         artifact_y: RegistryArtifact,
                         ctx: ReleaseContext,
                         phantom_files: list[PhantomFileEntry]) -> dict[str, LineDiff]:
    """Per non-phantom text file of the update version, the registry diff minus
    the repository diff (both sides as line multisets)."""
    phantom_paths = {e.registry_path for e in phantom_files}
    result: dict[str, LineDiff] = {}
    for path in artifact_y.files:
        if path in phantom_paths or not artifact_y.is_text(path):
            continue
        mapped = map_registry_path(ctx.repo, path, ctx.c_y)
        source = rename_source_within(ctx, ctx.c_x, ctx.c_y, mapped)
        source_registry = path if source is None else \
            _strip_directory(ctx.repo.package_directory, source)
        x_content = artifact_x.content(source_registry) \
            if source_registry in artifact_x else b""
        if source_registry in artifact_x and not is_text(x_content):
            continue
        registry_diff = diff_lines(x_content, artifact_y.content(path))
        repo_x = _repo_content(ctx, ctx.c_x, source or mapped) or b""
        repo_y = _repo_content(ctx, ctx.c_y, mapped) or b""
        repo_diff = diff_lines(repo_x, repo_y)
        phantom = registry_diff.subtract(repo_diff)
        if not phantom.is_empty():
            result[path] = phantom
    return result


def build_phantom_report(artifact_x: RegistryArtifact,
                         artifact_y: RegistryArtifact,
                         ctx: ReleaseContext) -> PhantomReport:
    files = detect_phantom_files(artifact_y, ctx)
    lines = detect_phantom_lines(artifact_x, artifact_y, ctx, files)
    removed = sorted(set(artifact_x.files) - set(artifact_y.files))
    return PhantomReport(phantom_files=files, phantom_lines=lines,
                         removed_files=removed)
