"""Fetch and unpack package artifacts from a registry or an offline fixture store.

Supported registries: crates-io (.crate, gzipped tar), npm (.tgz, gzipped tar),
pypi (wheel zip preferred, sdist gzipped tar otherwise), rubygems (.gem, a plain
tar wrapping data.tar.gz). The unpacked file set excludes container metadata
(gem checksum/signature members, wheel *.dist-info entries) and, for formats
that nest the payload under a single top-level directory, strips that prefix.
"""

from __future__ import annotations

import gzip
import io
import posixpath
import tarfile
import zipfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

from .errors import ArchiveCorrupt, BinaryFile, NonUnicodePathEntry, VersionNotInRegistry
from .linediff import LineDiff, diff_lines, is_text as _content_is_text


class Registry(str, Enum):
    CRATES_IO = "crates-io"
    NPM = "npm"
    PYPI = "pypi"
    RUBYGEMS = "rubygems"


#: Archive kinds the unpacker understands.
ARCHIVE_KINDS = ("crate", "npm-tgz", "gem", "wheel", "sdist")

_DEFAULT_KIND = {
    Registry.CRATES_IO: "crate",
    Registry.NPM: "npm-tgz",
    Registry.RUBYGEMS: "gem",
    # pypi has no single default: wheel preferred, sdist fallback.
}


@dataclass(frozen=True)
class PackageVersion:
    """One (registry, package, version) coordinate."""

    registry: Registry
    package: str
    version: str

    def __post_init__(self):
        if not self.package:
            raise ValueError("package name must be non-empty")
        if not self.version:
            raise ValueError("version must be non-empty")


@dataclass(frozen=True)
class UpdateCoordinates:
    """The audit input: a package moving from current_version to update_version."""

    registry: Registry
    package: str
    current_version: str
    update_version: str

    def __post_init__(self):
        if self.current_version == self.update_version:
            raise ValueError("current and update version must differ")
        if not self.package:
            raise ValueError("package name must be non-empty")

    @property
    def current(self) -> PackageVersion:
        return PackageVersion(self.registry, self.package, self.current_version)

    @property
    def update(self) -> PackageVersion:
        return PackageVersion(self.registry, self.package, self.update_version)


class RegistryArtifact:
    """An unpacked package version: normalized relative paths plus contents."""

    def __init__(self, version: PackageVersion, contents: dict[str, bytes]):
        self.version = version
        self._contents = dict(sorted(contents.items()))

    @property
    def files(self) -> tuple[str, ...]:
        return tuple(self._contents)

    def __contains__(self, path: str) -> bool:
        return path in self._contents

    def content(self, path: str) -> bytes:
        return self._contents[path]

    def is_text(self, path: str) -> bool:
        return _content_is_text(self._contents[path])

    def as_tree(self) -> dict[str, bytes]:
        return dict(self._contents)

    def __repr__(self):  # pragma: no cover
        return (f"RegistryArtifact({self.version.registry.value}:"
                f"{self.version.package}@{self.version.version}, "
                f"{len(self._contents)} files)")


def _normalize_path(name: str) -> str | None:
    """Normalize an archive member name; None if it should be skipped entirely.

    Raises ArchiveCorrupt for paths escaping the archive root and
    NonUnicodePathEntry for member names that are not valid Unicode.
    """
    try:
        name.encode("utf-8")
    except UnicodeEncodeError:
        raise NonUnicodePathEntry(f"archive member name is not valid Unicode: {name!r}")
    name = name.replace("\\", "/")
    norm = posixpath.normpath(name)
    if norm in (".", ""):
        return None
    if norm.startswith("/") or norm.startswith("../") or norm == "..":
        raise ArchiveCorrupt(f"archive member escapes the root: {name!r}")
    return norm


def _strip_shared_root(contents: dict[str, bytes]) -> dict[str, bytes]:
    """Strip the single shared top-level directory, if every entry has one."""
    roots = {path.split("/", 1)[0] for path in contents}
    if len(roots) != 1 or any("/" not in path for path in contents):
        return contents
    return {path.split("/", 1)[1]: data for path, data in contents.items()}


def _read_tar(data: bytes) -> dict[str, bytes]:
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:*") as tar:
            out: dict[str, bytes] = {}
            for member in tar:
                if not member.isfile():
                    continue  # directories, links, devices carry no payload
                path = _normalize_path(member.name)
                if path is None:
                    continue
                fileobj = tar.extractfile(member)
                out[path] = fileobj.read() if fileobj is not None else b""
            return out
    except (tarfile.TarError, gzip.BadGzipFile, EOFError, OSError) as exc:
        # gzip truncation surfaces lazily, during member iteration
        raise ArchiveCorrupt(f"cannot read tar archive: {exc}") from exc


def _unpack_tar_gz_rooted(data: bytes) -> dict[str, bytes]:
    return _strip_shared_root(_read_tar(data))


def _unpack_wheel(data: bytes) -> dict[str, bytes]:
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            out: dict[str, bytes] = {}
            for info in zf.infolist():
                if info.is_dir():
                    continue
                path = _normalize_path(info.filename)
                if path is None:
                    continue
                first = path.split("/", 1)[0]
                if first.endswith(".dist-info") or first.endswith(".data"):
                    # build-tool metadata (METADATA/RECORD/WHEEL), never repo files
                    continue
                out[path] = zf.read(info)
            return out
    except zipfile.BadZipFile as exc:
        raise ArchiveCorrupt(f"cannot read wheel: {exc}") from exc


def _unpack_gem(data: bytes) -> dict[str, bytes]:
    """A .gem is a plain tar holding data.tar.gz plus metadata/checksums members."""
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:") as outer:
            member = outer.getmember("data.tar.gz")
            payload = outer.extractfile(member)
            if payload is None:
                raise ArchiveCorrupt("gem data.tar.gz is not a regular file")
            return _read_tar(gzip.decompress(payload.read()))
    except KeyError as exc:
        raise ArchiveCorrupt("gem archive has no data.tar.gz member") from exc
    except (tarfile.TarError, gzip.BadGzipFile, OSError) as exc:
        raise ArchiveCorrupt(f"cannot read gem archive: {exc}") from exc


_UNPACKERS = {
    "crate": _unpack_tar_gz_rooted,
    "npm-tgz": _unpack_tar_gz_rooted,
    "sdist": _unpack_tar_gz_rooted,
    "wheel": _unpack_wheel,
    "gem": _unpack_gem,
}


def unpack_archive(data: bytes, kind: str) -> dict[str, bytes]:
    if kind not in _UNPACKERS:
        raise ArchiveCorrupt(f"unknown archive kind: {kind!r}")
    return _UNPACKERS[kind](data)


class RegistryProvider(Protocol):
    """Source of raw package archives, live or fixture-backed."""

    def fetch(self, pv: PackageVersion) -> tuple[bytes, str]:
        """Return (archive bytes, archive kind) for the coordinate."""
        ...  # pragma: no cover


class FixtureRegistryProvider:
    """Offline provider backed by a directory of archives plus a JSON index.

    Index format (index.json in the fixture directory)::

        {"artifacts": [
            {"registry": "pypi", "package": "p", "version": "1.0",
             "file": "p-1.0-py3-none-any.whl", "kind": "wheel"},
            ...
        ]}

    "kind" may be omitted for registries with a single format. PyPI may list
    several distributions per version; the wheel is preferred.
    """

    def __init__(self, fixture_dir: str | Path):
        import json

        self.fixture_dir = Path(fixture_dir)
        index_path = self.fixture_dir / "index.json"
        if not index_path.is_file():
            raise FileNotFoundError(f"fixture index not found: {index_path}")
        index = json.loads(index_path.read_text(encoding="utf-8"))
        self._entries: dict[tuple[str, str, str], list[dict]] = {}
        for entry in index.get("artifacts", []):
            key = (entry["registry"], entry["package"], entry["version"])
            self._entries.setdefault(key, []).append(entry)

    def fetch(self, pv: PackageVersion) -> tuple[bytes, str]:
        key = (pv.registry.value, pv.package, pv.version)
        entries = self._entries.get(key)
        if not entries:
            raise VersionNotInRegistry(
                f"{pv.package}@{pv.version} not in {pv.registry.value} fixture store")
        entry = self._select(pv.registry, entries)
        kind = entry.get("kind") or _DEFAULT_KIND.get(pv.registry)
        if kind is None:
            raise ArchiveCorrupt(
                f"fixture entry for {pv.registry.value} needs an explicit kind")
        return (self.fixture_dir / entry["file"]).read_bytes(), kind

    @staticmethod
    def _select(registry: Registry, entries: list[dict]) -> dict:
        if registry is Registry.PYPI and len(entries) > 1:
            wheels = [e for e in entries if e.get("kind") == "wheel"]
            if wheels:
                return wheels[0]
        return entries[0]


class LiveRegistryProvider:
    """Downloads archives from the public registry endpoints."""

    def __init__(self, session=None):
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    def fetch(self, pv: PackageVersion) -> tuple[bytes, str]:
        if pv.registry is Registry.PYPI:
            return self._fetch_pypi(pv)
        url, kind = self.archive_url(pv)
        return self._download(url, pv), kind

    @staticmethod
    def archive_url(pv: PackageVersion) -> tuple[str, str]:
        """Download URL and archive kind for single-format registries."""
        if pv.registry is Registry.CRATES_IO:
            return (f"https://crates.io/api/v1/crates/{pv.package}/{pv.version}/download",
                    "crate")
        if pv.registry is Registry.NPM:
            basename = pv.package.split("/")[-1]
            return (f"https://registry.npmjs.org/{pv.package}/-/{basename}-{pv.version}.tgz",
                    "npm-tgz")
        if pv.registry is Registry.RUBYGEMS:
            return (f"https://rubygems.org/downloads/{pv.package}-{pv.version}.gem",
                    "gem")
        raise ValueError(f"no single archive URL for {pv.registry.value}")

    def _fetch_pypi(self, pv: PackageVersion) -> tuple[bytes, str]:
        meta = self.session.get(f"https://pypi.org/pypi/{pv.package}/{pv.version}/json")
        if meta.status_code == 404:
            raise VersionNotInRegistry(f"{pv.package}@{pv.version} not on pypi")
        meta.raise_for_status()
        dists = meta.json().get("urls", [])
        wheels = [d for d in dists if d.get("packagetype") == "bdist_wheel"]
        if wheels:
            pure = [d for d in wheels if d["filename"].endswith("-none-any.whl")]
            if not pure:
                raise VersionNotInRegistry(
                    f"{pv.package}@{pv.version}: only platform-specific wheels published")
            return self._download(pure[0]["url"], pv), "wheel"
        sdists = [d for d in dists if d.get("packagetype") == "sdist"]
        if not sdists:
            raise VersionNotInRegistry(f"{pv.package}@{pv.version}: no distributions listed")
        return self._download(sdists[0]["url"], pv), "sdist"

    def _download(self, url: str, pv: PackageVersion) -> bytes:
        resp = self.session.get(url)
        if resp.status_code == 404:
            raise VersionNotInRegistry(f"{pv.package}@{pv.version} not found at {url}")
        resp.raise_for_status()
        return resp.content


def fetch_artifact(pv: PackageVersion, provider: RegistryProvider) -> RegistryArtifact:
    """Fetch and unpack one package version into a RegistryArtifact."""
    data, kind = provider.fetch(pv)
    return RegistryArtifact(pv, unpack_archive(data, kind))


def diff_versions(a: RegistryArtifact, b: RegistryArtifact, path: str) -> LineDiff:
    """Line diff of one path between two artifact versions.

    An absent path counts as an empty file. Raises BinaryFile when the path's
    content is not valid Unicode in an artifact that contains it; callers
    route such paths to byte-wise comparison instead.
    """
    for artifact in (a, b):
        if path in artifact and not artifact.is_text(path):
            raise BinaryFile(f"{path} is not text in "
                             f"{artifact.version.package}@{artifact.version.version}")
    content_a = a.content(path) if path in a else b""
    content_b = b.content(path) if path in b else b""
    return diff_lines(content_a, content_b)
