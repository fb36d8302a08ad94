"""Locate the source repository and the package directory inside it.

Repository URLs come from registry metadata (live endpoints or a JSON fixture)
and are normalized to a canonical GitHub base URL. The package directory is
found through the ecosystem manifest (Cargo.toml, package.json, *.gemspec) or,
for PyPI, by maximizing the fraction of registry file paths that exist in the
repository tree.
"""

from __future__ import annotations

import json
import posixpath
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol
from urllib.parse import urlsplit

from .errors import (
    AmbiguousDirectory,
    DirectoryNotFound,
    NoRepositoryListed,
    NotGitHubHosted,
    SymlinkEscapesRepository,
)
from .gitrepo import GitRepo
from .registry import Registry, RegistryArtifact, UpdateCoordinates

#: Minimum fraction of registry paths that must exist in the repository for
#: the path-matching (PyPI) strategy to accept a directory.
PYPI_MATCH_THRESHOLD = 0.5

_SYMLINK_DEPTH_LIMIT = 8


@dataclass(frozen=True)
class PackageMetadata:
    repository_url: str | None
    clone_path: str | None = None


class MetadataProvider(Protocol):
    def lookup(self, coords: UpdateCoordinates) -> PackageMetadata:
        ...  # pragma: no cover


class FixtureMetadataProvider:
    """Offline metadata source: JSON mapping "registry/package" to repository info.

    Schema::

        {"packages": {"crates-io/demo": {
            "repository": "https://github.com/acme/demo",
            "clone_path": "/fixtures/repos/demo"}}}

    "clone_path" points at a local clone opened in place, skipping the network.
    """

    def __init__(self, fixture_file: str | Path):
        data = json.loads(Path(fixture_file).read_text(encoding="utf-8"))
        self._packages: dict[str, dict] = data.get("packages", {})

    def lookup(self, coords: UpdateCoordinates) -> PackageMetadata:
        entry = self._packages.get(f"{coords.registry.value}/{coords.package}")
        if entry is None:
            raise NoRepositoryListed(
                f"no metadata for {coords.registry.value}/{coords.package} in fixture")
        return PackageMetadata(repository_url=entry.get("repository"),
                               clone_path=entry.get("clone_path"))


class LiveMetadataProvider:
    """Queries the registry's public metadata endpoint for the repository URL."""

    def __init__(self, session=None):
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    def lookup(self, coords: UpdateCoordinates) -> PackageMetadata:
        url = self._repository_field(coords)
        return PackageMetadata(repository_url=url)

    def _repository_field(self, coords: UpdateCoordinates) -> str | None:
        registry, package = coords.registry, coords.package
        if registry is Registry.CRATES_IO:
            data = self._get(f"https://crates.io/api/v1/crates/{package}")
            return (data.get("crate") or {}).get("repository")
        if registry is Registry.NPM:
            data = self._get(f"https://registry.npmjs.org/{package}")
            repo = data.get("repository")
            if isinstance(repo, dict):
                return repo.get("url")
            return repo
        if registry is Registry.PYPI:
            data = self._get(f"https://pypi.org/pypi/{package}/json")
            info = data.get("info") or {}
            urls = info.get("project_urls") or {}
            for key in ("Source", "Source Code", "Repository", "Code", "Homepage"):
                if urls.get(key) and "github.com" in urls[key]:
                    return urls[key]
            return info.get("home_page")
        data = self._get(f"https://rubygems.org/api/v1/gems/{package}.json")
        return data.get("source_code_uri") or data.get("homepage_uri")

    def _get(self, url: str) -> dict:
        resp = self.session.get(url)
        if resp.status_code == 404:
            raise NoRepositoryListed(f"metadata endpoint returned 404: {url}")
        resp.raise_for_status()
        return resp.json()


_SCP_LIKE = re.compile(r"^(?:ssh://)?git@([^:/]+)[:/](.+)$")


def normalize_repository_url(raw: str | None) -> str:
    """Reduce metadata URL shapes to "https://github.com/owner/name".

    Raises NoRepositoryListed for empty values and NotGitHubHosted for
    repositories on any other forge.
    """
    if not raw or not raw.strip():
        raise NoRepositoryListed("registry metadata lists no repository")
    url = raw.strip()
    if url.startswith("git+"):
        url = url[4:]
    scp = _SCP_LIKE.match(url)
    if scp:
        host, path = scp.group(1), scp.group(2)
    else:
        if "://" not in url:
            url = "https://" + url
        parts = urlsplit(url)
        host, path = parts.hostname or "", parts.path
    host = host.lower()
    if host.startswith("www."):
        host = host[4:]
    if host != "github.com":
        raise NotGitHubHosted(f"repository is not on GitHub: {raw}")
    segments = [s for s in path.split("/") if s]
    if len(segments) < 2:
        raise NoRepositoryListed(f"repository URL has no owner/name: {raw}")
    owner, name = segments[0], segments[1]
    if name.endswith(".git"):
        name = name[:-4]
    if not name:
        raise NoRepositoryListed(f"repository URL has no name: {raw}")
    return f"https://github.com/{owner}/{name}"


def locate_repository(coords: UpdateCoordinates, provider: MetadataProvider) -> str:
    return normalize_repository_url(provider.lookup(coords).repository_url)


@dataclass
class RepoContext:
    repo_url: str
    handle: GitRepo
    package_directory: str
    match_fraction: float | None = None
    warnings: list[str] = field(default_factory=list)


def _canonical_name(registry: Registry, name: str) -> str:
    if registry in (Registry.PYPI, Registry.RUBYGEMS):
        return re.sub(r"[-_.]+", "_", name.lower())
    return name


_CARGO_NAME = re.compile(
    r"^\[package\][^\[]*?^\s*name\s*=\s*\"([^\"]+)\"", re.MULTILINE | re.DOTALL)
_CARGO_VERSION = re.compile(
    r"^\[package\][^\[]*?^\s*version\s*=\s*\"([^\"]+)\"", re.MULTILINE | re.DOTALL)
_GEMSPEC_NAME = re.compile(r"\.\s*name\s*=\s*[\"']([^\"']+)[\"']")
_GEMSPEC_VERSION = re.compile(r"\.\s*version\s*=\s*[\"']([^\"']+)[\"']")


def _manifest_fields(registry: Registry, filename: str, content: bytes) -> tuple[str | None, str | None]:
    """(declared name, declared version) from a manifest, best effort."""
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        return None, None
    if registry is Registry.CRATES_IO:
        name = _CARGO_NAME.search(text)
        version = _CARGO_VERSION.search(text)
        return (name.group(1) if name else None,
                version.group(1) if version else None)
    if registry is Registry.NPM:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            return None, None
        if not isinstance(data, dict):
            return None, None
        return data.get("name"), data.get("version")
    if registry is Registry.RUBYGEMS:
        name = _GEMSPEC_NAME.search(text)
        version = _GEMSPEC_VERSION.search(text)
        return (name.group(1) if name else None,
                version.group(1) if version else None)
    return None, None


def _manifest_candidates(registry: Registry, tree_paths) -> list[str]:
    if registry is Registry.CRATES_IO:
        return [p for p in tree_paths if posixpath.basename(p) == "Cargo.toml"]
    if registry is Registry.NPM:
        return [p for p in tree_paths if posixpath.basename(p) == "package.json"]
    if registry is Registry.RUBYGEMS:
        return [p for p in tree_paths if p.endswith(".gemspec")]
    return []


def _path_weight(directory: str) -> tuple[int, int, str]:
    depth = 0 if directory == "" else directory.count("/") + 1
    return (depth, len(directory), directory)


def locate_package_directory(
    repo: GitRepo,
    coords: UpdateCoordinates,
    artifact: RegistryArtifact,
    at: str,
    warnings: list[str] | None = None,
) -> tuple[str, float | None]:
    """Package directory at the release commit, plus the path-match fraction.

    Manifest ecosystems pick the directory whose manifest declares the package
    name; PyPI picks the directory maximizing registry-path matches. Ties go to
    the shortest path; an exact tie is AmbiguousDirectory.
    """
    tree = repo.tree(at)
    if coords.registry is Registry.PYPI:
        return _locate_by_path_match(tree, artifact)

    wanted = _canonical_name(coords.registry, coords.package)
    matches: list[str] = []
    version_by_dir: dict[str, str | None] = {}
    for manifest_path in _manifest_candidates(coords.registry, tree):
        content = repo.file_content(at, manifest_path)
        if content is None:
            continue
        name, version = _manifest_fields(coords.registry, manifest_path, content)
        if name is None or _canonical_name(coords.registry, name) != wanted:
            continue
        directory = posixpath.dirname(manifest_path)
        matches.append(directory)
        version_by_dir[directory] = version
    if not matches:
        raise DirectoryNotFound(
            f"no manifest declaring {coords.package!r} found at {at[:12]}")
    matches = sorted(set(matches), key=_path_weight)
    if len(matches) > 1 and _path_weight(matches[0])[:2] == _path_weight(matches[1])[:2]:
        raise AmbiguousDirectory(
            f"manifests for {coords.package!r} in both {matches[0]!r} and {matches[1]!r}")
    directory = matches[0]
    declared = version_by_dir.get(directory)
    if warnings is not None and declared is not None \
            and declared != coords.update_version:
        warnings.append(
            f"manifest at {directory or '.'} declares version {declared}, "
            f"audited version is {coords.update_version}")
    fraction = _match_fraction(tree, artifact, directory)
    return directory, fraction


def _match_fraction(tree, artifact: RegistryArtifact, directory: str) -> float | None:
    if not artifact.files:
        return None
    hits = sum(1 for p in artifact.files if _join_dir(directory, p) in tree)
    return hits / len(artifact.files)


def _locate_by_path_match(tree, artifact: RegistryArtifact) -> tuple[str, float]:
    if not artifact.files:
        raise DirectoryNotFound("empty artifact cannot be path-matched")
    directories = {""}
    for path in tree:
        parent = posixpath.dirname(path)
        while parent:
            directories.add(parent)
            parent = posixpath.dirname(parent)
    scored: list[tuple[float, str]] = []
    for directory in directories:
        fraction = _match_fraction(tree, artifact, directory)
        scored.append((fraction, directory))
    best = max(s[0] for s in scored)
    if best < PYPI_MATCH_THRESHOLD:
        raise DirectoryNotFound(
            f"no directory matches >= {PYPI_MATCH_THRESHOLD:.0%} of registry paths "
            f"(best {best:.0%})")
    winners = sorted((d for f, d in scored if f == best), key=_path_weight)
    if len(winners) > 1 and _path_weight(winners[0])[:2] == _path_weight(winners[1])[:2]:
        raise AmbiguousDirectory(
            f"directories {winners[0]!r} and {winners[1]!r} match equally ({best:.0%})")
    return winners[0], best


def _join_dir(directory: str, relpath: str) -> str:
    return f"{directory}/{relpath}" if directory else relpath


def map_registry_path(ctx: RepoContext, registry_path: str, at: str) -> str:
    """Repository path for a registry path: package_directory joined with the
    path, following symlinks at the target (bounded depth, repo-internal)."""
    joined = _join_dir(ctx.package_directory, registry_path)
    return _resolve_symlinks(ctx.handle, at, joined)


def _resolve_symlinks(repo: GitRepo, at: str, path: str) -> str:
    tree = repo.tree(at)
    current = path
    for _ in range(_SYMLINK_DEPTH_LIMIT):
        entry = tree.get(current)
        if entry is not None and entry.is_symlink:
            target = repo.file_content(at, current)
            current = _retarget(current, (target or b"").decode("utf-8", "replace"))
            continue
        if entry is not None:
            return current
        rewritten = _rewrite_symlink_prefix(repo, tree, at, current)
        if rewritten is None:
            return current
        current = rewritten
    raise SymlinkEscapesRepository(f"symlink chain too deep resolving {path!r}")


def _retarget(link_path: str, target: str) -> str:
    if target.startswith("/"):
        raise SymlinkEscapesRepository(f"{link_path!r} links to absolute path {target!r}")
    resolved = posixpath.normpath(posixpath.join(posixpath.dirname(link_path), target))
    if resolved.startswith("../") or resolved == "..":
        raise SymlinkEscapesRepository(f"{link_path!r} escapes the repository root")
    return resolved


def _rewrite_symlink_prefix(repo: GitRepo, tree, at: str, path: str) -> str | None:
    """If some ancestor component of `path` is a symlink, splice in its target."""
    parts = path.split("/")
    for i in range(len(parts) - 1, 0, -1):
        prefix = "/".join(parts[:i])
        entry = tree.get(prefix)
        if entry is not None and entry.is_symlink:
            target = repo.file_content(at, prefix)
            new_prefix = _retarget(prefix, (target or b"").decode("utf-8", "replace"))
            return "/".join([new_prefix, *parts[i:]])
    return None
