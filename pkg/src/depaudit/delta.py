"""Compute the update's code delta and bind every line to a responsible commit.

Added lines: forward blame at the update release commit, keeping lines whose
introducing commit lies in the update range. Removed lines: reverse blame of
the common-ancestor file over the range, then forward traversal from the last
commit containing each line to the first-parent commit where it disappears.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PathAbsentAtCommit
from .gitrepo import GitRepo
from .linediff import split_lines
from .locate import map_registry_path
from .phantom import PhantomReport, rename_source_within, _strip_directory
from .registry import RegistryArtifact
from .release import ReleaseContext


@dataclass(frozen=True)
class DeltaEntry:
    """One attributed line. line_number is the position at the update release
    commit for added lines and at the common ancestor for removed lines."""

    path: str
    content: bytes
    line_number: int
    commit: str


@dataclass(frozen=True)
class ChangedFile:
    """A repository path eligible for delta analysis.

    a_path/y_path are the names at the common ancestor and the update release
    commit (None when absent on that side). Submodule-mounted files carry the
    mount point plus the two recorded pointers; their inner history is blamed
    inside the submodule clone.
    """

    y_path: str | None
    a_path: str | None
    submodule_mount: str | None = None
    sub_pointer_a: str | None = None
    sub_pointer_y: str | None = None


@dataclass
class ChangedFileSet:
    files: list[ChangedFile]

    @property
    def paths(self) -> list[str]:
        return sorted({f.y_path or f.a_path for f in self.files if f.y_path or f.a_path})


@dataclass
class CodeDelta:
    added: list[DeltaEntry] = field(default_factory=list)
    removed: list[DeltaEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def total_lines(self) -> int:
        return len(self.added) + len(self.removed)

    def commits(self) -> set[str]:
        return {e.commit for e in self.added} | {e.commit for e in self.removed}

    def added_map(self) -> dict[tuple[str, bytes, int], str]:
        return {(e.path, e.content, e.line_number): e.commit for e in self.added}

    def removed_map(self) -> dict[tuple[str, bytes, int], str]:
        return {(e.path, e.content, e.line_number): e.commit for e in self.removed}


def changed_files(artifact_x: RegistryArtifact,
                  artifact_y: RegistryArtifact,
                  phantom: PhantomReport,
                  ctx: ReleaseContext) -> ChangedFileSet:
    """Mapped repository paths of non-phantom shipped files that changed in the
    update: either the c_a..c_y endpoint diff is nonempty, or some range commit
    touched the file (changes later undone still bind review-relevant commits).
    Rename pairs collapse to a single entry; submodule paths are included when
    the mount pointer moved."""
    repo = ctx.repo.handle
    phantom_paths = phantom.phantom_registry_paths()
    candidates: set[str] = set()
    for artifact in (artifact_y, artifact_x):
        for path in artifact.files:
            if path in phantom_paths and artifact is artifact_y:
                continue
            if not artifact.is_text(path):
                continue
            candidates.add(map_registry_path(ctx.repo, path, ctx.c_y))

    by_name: dict[str, ChangedFile] = {}
    for letter, old, new in repo.diff_status(ctx.c_a, ctx.c_y):
        if letter == "A":
            entry = ChangedFile(y_path=new, a_path=None)
        elif letter == "D":
            entry = ChangedFile(y_path=None, a_path=old)
        elif letter == "R":
            directory = ctx.repo.package_directory
            inside = not directory or (old.startswith(directory + "/")
                                       and new.startswith(directory + "/"))
            if inside:
                entry = ChangedFile(y_path=new, a_path=old)
            else:
                entry = ChangedFile(y_path=new, a_path=None)
                by_name.setdefault(old, ChangedFile(y_path=None, a_path=old))
        else:
            entry = ChangedFile(y_path=new, a_path=old)
        by_name[new] = entry
        by_name.setdefault(old, entry)

    a_tree, y_tree = repo.tree(ctx.c_a), repo.tree(ctx.c_y)
    for path in repo.touched_paths(ctx.c_x, ctx.c_y):
        if path in by_name:
            continue
        in_a, in_y = path in a_tree, path in y_tree
        if in_a or in_y:
            by_name[path] = ChangedFile(y_path=path if in_y else None,
                                        a_path=path if in_a else None)

    selected: dict[tuple, ChangedFile] = {}
    for path in sorted(candidates):
        entry = by_name.get(path)
        if entry is not None:
            key = (entry.y_path, entry.a_path)
            selected[key] = entry
            continue
        sub = _submodule_change(repo, ctx, path)
        if sub is not None:
            selected[(sub.y_path, sub.a_path, sub.submodule_mount)] = sub
    return ChangedFileSet(files=list(selected.values()))


def _submodule_change(repo: GitRepo, ctx: ReleaseContext, path: str) -> ChangedFile | None:
    hit = repo.resolve_submodule(path, ctx.c_y)
    if hit is None:
        return None
    mount_y, inner = hit
    if not inner:
        return None
    mounts_a = repo.submodule_mounts(ctx.c_a)
    mount_a = mounts_a.get(mount_y.path)
    if mount_a is None or mount_a.pointer == mount_y.pointer:
        return None
    sub = repo.submodule_repo(mount_y)
    changed = {new for _s, _o, new in sub.diff_status(mount_a.pointer, mount_y.pointer)} \
        | {old for _s, old, _n in sub.diff_status(mount_a.pointer, mount_y.pointer)}
    if inner not in changed:
        return None
    return ChangedFile(y_path=path, a_path=path,
                       submodule_mount=mount_y.path,
                       sub_pointer_a=mount_a.pointer,
                       sub_pointer_y=mount_y.pointer)


def attribute_added_lines(repo: GitRepo, path: str, c_y: str,
                          in_range, prefix: str = "") -> list[DeltaEntry]:
    """Blame at the update release commit; keep lines introduced in range."""
    try:
        attributions = repo.blame(path, c_y)
    except PathAbsentAtCommit:
        return []
    return [DeltaEntry(path=prefix + path, content=a.content,
                       line_number=a.line_number, commit=a.commit)
            for a in attributions if in_range(a.commit)]


def attribute_removed_lines(repo: GitRepo, path: str, c_a: str, c_y: str,
                            in_range, warnings: list[str],
                            prefix: str = "") -> list[DeltaEntry]:
    """Reverse blame the ancestor file over the range; for every line that does
    not survive, walk forward from its last containing commit along the
    first-parent chain to the commit where it disappears."""
    c_a_sha, c_y_sha = repo.rev_parse(c_a), repo.rev_parse(c_y)
    try:
        attributions = repo.reverse_blame(path, c_a_sha, c_y_sha)
    except PathAbsentAtCommit:
        return []
    survivors_done = all(a.commit == c_y_sha for a in attributions)
    if survivors_done:
        return []
    first_parent = set(repo.first_parent_chain(c_y_sha))
    ancestry_cache: dict[str, list[str]] = {}
    baseline_cache: dict[tuple[str, str], dict[bytes, int]] = {}
    result: list[DeltaEntry] = []
    for a in attributions:
        if a.commit == c_y_sha:
            continue
        removal = _find_removal_commit(
            repo, a.commit, c_y_sha, a.source_path, a.content,
            first_parent, ancestry_cache, baseline_cache)
        if removal is None:
            warnings.append(
                f"no removal commit found for a line of {path} "
                f"last seen at {a.commit[:12]}")
            continue
        if in_range(removal):
            result.append(DeltaEntry(path=prefix + path, content=a.content,
                                     line_number=a.line_number, commit=removal))
    return result


def _line_count(repo: GitRepo, cache: dict, rev: str, path: str,
                content: bytes) -> int:
    key = (rev, path)
    if key not in cache:
        blob = repo.file_content(rev, path)
        counts: dict[bytes, int] = {}
        for line in split_lines(blob or b""):
            counts[line] = counts.get(line, 0) + 1
        cache[key] = counts
    return cache[key].get(content, 0)


def _find_removal_commit(repo: GitRepo, last_containing: str, c_y: str,
                         path: str, content: bytes, first_parent: set[str],
                         ancestry_cache: dict, count_cache: dict) -> str | None:
    if last_containing not in ancestry_cache:
        ancestry_cache[last_containing] = repo.ancestry_path(last_containing, c_y)
    baseline = _line_count(repo, count_cache, last_containing, path, content)
    for candidate in ancestry_cache[last_containing]:
        if candidate not in first_parent:
            continue
        if _line_count(repo, count_cache, candidate, path, content) < baseline:
            return candidate
    return None


def compute_code_delta(artifact_x: RegistryArtifact,
                       artifact_y: RegistryArtifact,
                       phantom: PhantomReport,
                       ctx: ReleaseContext) -> CodeDelta:
    """Union of added/removed attributions over all changed files.

    Per-file failures become warnings, never aborting the whole delta; an empty
    delta is a valid outcome (doc-only or phantom-only updates).
    """
    repo = ctx.repo.handle
    changed = changed_files(artifact_x, artifact_y, phantom, ctx)
    delta = CodeDelta()
    in_range = ctx.in_range
    for cf in changed.files:
        try:
            if cf.submodule_mount is not None:
                _attribute_submodule(repo, cf, delta)
                continue
            if cf.y_path is not None:
                delta.added.extend(attribute_added_lines(
                    repo, cf.y_path, ctx.c_y, in_range))
            if cf.a_path is not None:
                delta.removed.extend(attribute_removed_lines(
                    repo, cf.a_path, ctx.c_a, ctx.c_y, in_range, delta.warnings))
        except Exception as exc:  # per-file isolation
            name = cf.y_path or cf.a_path
            delta.warnings.append(f"delta attribution failed for {name}: {exc}")
    delta.added.sort(key=lambda e: (e.path, e.line_number))
    delta.removed.sort(key=lambda e: (e.path, e.line_number))
    return delta


def _attribute_submodule(repo: GitRepo, cf: ChangedFile, delta: CodeDelta) -> None:
    from .gitrepo import SubmoduleMount

    mount_path = cf.submodule_mount
    assert mount_path is not None and cf.y_path is not None
    inner = cf.y_path[len(mount_path) + 1:]
    mount = SubmoduleMount(path=mount_path, url=None, pointer=cf.sub_pointer_y)
    sub = repo.submodule_repo(mount)
    bases = sub.merge_bases(cf.sub_pointer_a, cf.sub_pointer_y)
    sub_c_a = bases[0]
    sub_range = set(sub.commit_range(cf.sub_pointer_a, cf.sub_pointer_y))
    prefix = mount_path + "/"
    delta.added.extend(attribute_added_lines(
        sub, inner, cf.sub_pointer_y, sub_range.__contains__, prefix=prefix))
    delta.removed.extend(attribute_removed_lines(
        sub, inner, sub_c_a, cf.sub_pointer_y, sub_range.__contains__,
        delta.warnings, prefix=prefix))
