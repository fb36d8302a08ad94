"""Resolve version strings to release commits via tags, and build the update's
commit range and common ancestor."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AmbiguousReleaseTag, NoReleaseTag
from .gitrepo import GitRepo
from .locate import RepoContext


def tag_candidates(package: str, version: str) -> dict[str, bool]:
    """Accepted tag spellings for a version; value marks name-qualified shapes.

    All shapes are exact full-tag strings, so "1.8.4" can never match a tag
    carrying "11.8.4" or "1.8.40".
    """
    return {
        version: False,
        f"v{version}": False,
        f"release-{version}": False,
        f"releases/{version}": False,
        f"{package}-{version}": True,
        f"{package}-v{version}": True,
        f"{package}/{version}": True,
        f"{package}/v{version}": True,
        f"{package}@{version}": True,
    }


def resolve_release_commit(repo: GitRepo, package: str, version: str) -> str:
    """The commit tagged with this version.

    Several tags naming the same commit are fine (v-prefix duplicates); matches
    on distinct commits raise AmbiguousReleaseTag, unless the name-qualified
    tags agree among themselves, in which case they win (monorepo rule: plain
    tags usually track a different package).
    """
    candidates = tag_candidates(package, version)
    matched = [(name, sha) for name, sha in repo.list_tags().items()
               if name in candidates]
    if not matched:
        raise NoReleaseTag(f"no tag matches version {version!r} of {package!r}")
    commits = {sha for _, sha in matched}
    if len(commits) == 1:
        return next(iter(commits))
    qualified = {sha for name, sha in matched if candidates[name]}
    if len(qualified) == 1:
        return next(iter(qualified))
    names = sorted(name for name, _ in matched)
    raise AmbiguousReleaseTag(
        f"tags {names} for version {version!r} point at {len(commits)} distinct commits")


@dataclass
class ReleaseContext:
    """Both release commits, their common ancestor, and the update range."""

    repo: RepoContext
    c_x: str
    c_y: str
    c_a: str
    range_commits: list[str]
    _range_set: frozenset[str] = field(init=False, repr=False)

    def __post_init__(self):
        self._range_set = frozenset(self.range_commits)

    def in_range(self, sha: str) -> bool:
        return sha in self._range_set


def build_release_context(repo_ctx: RepoContext, c_x: str, c_y: str) -> ReleaseContext:
    """Populate the common ancestor (merge-base) and the c_x..c_y range.

    With several merge-bases (criss-cross history) the one yielding the
    smallest range wins; that under-approximates the delta rather than
    inventing changes, and is recorded as a warning.
    """
    repo = repo_ctx.handle
    bases = repo.merge_bases(c_x, c_y)
    if len(bases) == 1:
        c_a = bases[0]
    else:
        ranked = sorted((len(repo.commit_range(b, c_y)), b) for b in bases)
        c_a = ranked[0][1]
        repo_ctx.warnings.append(
            f"multiple merge-bases between releases; picked {c_a[:12]} "
            f"(smallest range of {len(bases)} candidates)")
    return ReleaseContext(
        repo=repo_ctx,
        c_x=repo.rev_parse(c_x),
        c_y=repo.rev_parse(c_y),
        c_a=c_a,
        range_commits=repo.commit_range(c_x, c_y),
    )
