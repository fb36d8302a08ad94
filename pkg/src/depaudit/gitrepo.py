"""Read-only query layer over a local git clone.

Wraps the git CLI (tags, rev-list, merge-base, ls-tree, show, blame, diff) and
adds recursive submodule resolution. All queries are read-only and cached, so
repeated calls with equal arguments return equal results without re-forking git.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    CloneFailed,
    GitError,
    NoCommonAncestor,
    NonUnicodePathEntry,
    PathAbsentAtCommit,
    PrivateSubmodule,
)

_FULL_SHA = re.compile(rb"^[0-9a-f]{40}$")


@dataclass(frozen=True)
class LineAttribution:
    """One blamed line: its content, position at the blamed revision, and commit.

    source_path is the file's name as of the attributed commit, which differs
    from `path` when the file was renamed in between.
    """

    path: str
    content: bytes
    line_number: int
    commit: str
    source_path: str = ""


@dataclass(frozen=True)
class TreeEntry:
    mode: str
    sha: str

    @property
    def is_symlink(self) -> bool:
        return self.mode == "120000"

    @property
    def is_gitlink(self) -> bool:
        return self.mode == "160000"


@dataclass(frozen=True)
class SubmoduleMount:
    """A gitlink entry in the superproject tree plus its .gitmodules URL."""

    path: str
    url: str | None
    pointer: str


def _unquote_git_path(raw: bytes) -> str:
    """Undo git's C-style path quoting in porcelain output."""
    if raw.startswith(b'"') and raw.endswith(b'"') and len(raw) >= 2:
        return raw[1:-1].decode("unicode_escape").encode("latin-1").decode("utf-8", "replace")
    return raw.decode("utf-8", "replace")


def _run_git(args: list[str], cwd: Path | None = None) -> bytes:
    proc = subprocess.run(["git", *args], cwd=cwd, capture_output=True)
    if proc.returncode != 0:
        raise GitError(
            f"git {' '.join(args[:3])}... failed: "
            f"{proc.stderr.decode('utf-8', 'replace').strip()}")
    return proc.stdout


class GitRepo:
    """Handle over one local repository; opens in place, never writes."""

    def __init__(self, path: str | Path, scratch_dir: str | Path | None = None):
        self.path = Path(path)
        if not (self.path / ".git").exists() and not (self.path / "HEAD").exists():
            raise GitError(f"not a git repository: {self.path}")
        self._scratch_dir = Path(scratch_dir) if scratch_dir else None
        self._rev_cache: dict[str, str] = {}
        self._tree_cache: dict[str, dict[str, TreeEntry]] = {}
        self._content_cache: dict[tuple[str, str], bytes | None] = {}
        self._subrepos: dict[str, "GitRepo"] = {}

    # -- plumbing ----------------------------------------------------------

    def _run(self, *args: str) -> bytes:
        return _run_git(["-C", str(self.path), *args])

    def rev_parse(self, ref: str) -> str:
        if ref not in self._rev_cache:
            try:
                out = self._run("rev-parse", "--verify", f"{ref}^{{commit}}")
            except GitError as exc:
                raise GitError(f"cannot resolve revision {ref!r}: {exc}") from exc
            self._rev_cache[ref] = out.decode("ascii").strip()
        return self._rev_cache[ref]

    # -- tags and history --------------------------------------------------

    def list_tags(self) -> dict[str, str]:
        """Tag name to commit hash, with annotated tags dereferenced."""
        out = self._run(
            "for-each-ref", "refs/tags",
            "--format=%(refname:short)%00%(objectname)%00%(*objectname)")
        tags: dict[str, str] = {}
        for line in out.decode("utf-8").splitlines():
            if not line:
                continue
            name, obj, peeled = line.split("\x00")
            tags[name] = peeled or obj
        return tags

    def commit_range(self, frm: str, to: str) -> list[str]:
        """Commits reachable from `to` but not `frm`, topologically oldest-first."""
        out = self._run("rev-list", "--topo-order", "--reverse", f"{frm}..{to}")
        return out.decode("ascii").split()

    def merge_bases(self, a: str, b: str) -> list[str]:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "merge-base", "--all", a, b],
            capture_output=True)
        if proc.returncode == 1 and not proc.stdout.strip():
            raise NoCommonAncestor(f"{a} and {b} share no history")
        if proc.returncode != 0:
            raise GitError(f"merge-base failed: {proc.stderr.decode('utf-8', 'replace')}")
        return proc.stdout.decode("ascii").split()

    def is_ancestor(self, a: str, b: str) -> bool:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "merge-base", "--is-ancestor", a, b],
            capture_output=True)
        if proc.returncode in (0, 1):
            return proc.returncode == 0
        raise GitError(f"is-ancestor failed: {proc.stderr.decode('utf-8', 'replace')}")

    def ancestry_path(self, frm: str, to: str) -> list[str]:
        out = self._run("rev-list", "--ancestry-path", "--topo-order", "--reverse",
                        f"{frm}..{to}")
        return out.decode("ascii").split()

    def first_parent_chain(self, tip: str) -> list[str]:
        out = self._run("rev-list", "--first-parent", tip)
        return out.decode("ascii").split()

    def touched_paths(self, frm: str, to: str) -> set[str]:
        """Paths changed by any commit in frm..to (per-commit diffs), including
        changes later undone; merges contribute their per-parent diffs."""
        out = self._run("log", "--name-only", "-M", "-m",
                        "--format=%x01%H", f"{frm}..{to}")
        paths: set[str] = set()
        for raw in out.splitlines():
            if not raw or raw.startswith(b"\x01"):
                continue
            paths.add(_unquote_git_path(raw))
        return paths

    def commit_message(self, rev: str) -> str:
        return self._run("show", "-s", "--format=%B", rev).decode("utf-8", "replace")

    def commit_identity(self, rev: str) -> dict[str, str]:
        out = self._run("show", "-s", "--format=%an%x00%ae%x00%cn%x00%ce", rev)
        an, ae, cn, ce = out.decode("utf-8", "replace").strip("\n").split("\x00")
        return {"author_name": an, "author_email": ae,
                "committer_name": cn, "committer_email": ce}

    # -- trees and contents ------------------------------------------------

    def tree(self, rev: str) -> dict[str, TreeEntry]:
        """Full recursive file listing at a revision, path -> entry."""
        key = self.rev_parse(rev)
        if key not in self._tree_cache:
            out = self._run("ls-tree", "-r", "-z", "--full-tree", key)
            entries: dict[str, TreeEntry] = {}
            for record in out.split(b"\x00"):
                if not record:
                    continue
                meta, raw_path = record.split(b"\t", 1)
                mode, _objtype, sha = meta.decode("ascii").split(" ")
                try:
                    path = raw_path.decode("utf-8")
                except UnicodeDecodeError:
                    raise NonUnicodePathEntry(
                        f"repository path is not valid Unicode at {rev}: {raw_path!r}")
                entries[path] = TreeEntry(mode=mode, sha=sha)
            self._tree_cache[key] = entries
        return self._tree_cache[key]

    def file_content(self, rev: str, path: str) -> bytes | None:
        """Blob content at rev:path; None when the path is absent."""
        key = (self.rev_parse(rev), path)
        if key not in self._content_cache:
            proc = subprocess.run(
                ["git", "-C", str(self.path), "cat-file", "blob", f"{key[0]}:{path}"],
                capture_output=True)
            if proc.returncode == 0:
                self._content_cache[key] = proc.stdout
            else:
                stderr = proc.stderr.decode("utf-8", "replace")
                if "does not exist" in stderr or "but not in" in stderr \
                        or "Invalid object name" in stderr or "Not a valid object" in stderr:
                    self._content_cache[key] = None
                else:
                    raise GitError(f"cat-file {key[0]}:{path} failed: {stderr.strip()}")
        return self._content_cache[key]

    # -- diffs -------------------------------------------------------------

    def diff_status(self, a: str, b: str) -> list[tuple[str, str, str]]:
        """Rename-aware name-status diff: (status letter, old path, new path)."""
        out = self._run("diff", "--name-status", "-M", "-z", a, b)
        tokens = [t for t in out.split(b"\x00")]
        if tokens and tokens[-1] == b"":
            tokens.pop()
        result = []
        i = 0
        while i < len(tokens):
            status = tokens[i].decode("ascii")
            letter = status[0]
            if letter in ("R", "C"):
                old = tokens[i + 1].decode("utf-8")
                new = tokens[i + 2].decode("utf-8")
                i += 3
            else:
                old = new = tokens[i + 1].decode("utf-8")
                i += 2
            result.append((letter, old, new))
        return result

    def rename_sources(self, a: str, b: str) -> dict[str, str]:
        """Map of path-at-b -> path-at-a for files renamed between the revisions."""
        return {new: old for letter, old, new in self.diff_status(a, b) if letter == "R"}

    # -- blame -------------------------------------------------------------

    def blame(self, path: str, at: str) -> list[LineAttribution]:
        """Forward blame: each line at `at` with the commit that introduced it."""
        out = self._blame_porcelain([at, "--", path], path, at)
        return out

    def reverse_blame(self, path: str, frm: str, to: str) -> list[LineAttribution]:
        """Each line of the file at `frm` with the last commit in frm..to containing
        it; lines surviving to `to` are attributed to `to`."""
        frm_sha, to_sha = self.rev_parse(frm), self.rev_parse(to)
        if frm_sha == to_sha:
            # the empty range trips git up; by definition every line survives
            content = self.file_content(frm_sha, path)
            if content is None:
                raise PathAbsentAtCommit(f"{path} absent at {frm}")
            from .linediff import split_lines

            return [LineAttribution(path, line, i + 1, to_sha, path)
                    for i, line in enumerate(split_lines(content))]
        return self._blame_porcelain(
            ["--reverse", f"{frm_sha}..{to_sha}", "--", path], path, frm)

    def _blame_porcelain(self, args: list[str], path: str, rev: str) -> list[LineAttribution]:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "blame", "--line-porcelain", *args],
            capture_output=True)
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace")
            if "no such path" in stderr:
                raise PathAbsentAtCommit(f"{path} absent at {rev}")
            raise GitError(f"blame {path} at {rev} failed: {stderr.strip()}")
        result: list[LineAttribution] = []
        sha = ""
        final_no = 0
        source = path
        for line in proc.stdout.split(b"\n"):
            if line.startswith(b"\t"):
                result.append(LineAttribution(path, line[1:], final_no, sha, source))
                continue
            if line.startswith(b"filename "):
                source = _unquote_git_path(line[len(b"filename "):])
                continue
            head = line.split(b" ")
            if len(head) >= 3 and _FULL_SHA.match(head[0]):
                sha = head[0].decode("ascii")
                final_no = int(head[2])
        return result

    # -- submodules --------------------------------------------------------

    def submodule_mounts(self, rev: str) -> dict[str, SubmoduleMount]:
        """Gitlink entries at a revision joined with their .gitmodules URLs."""
        mounts: dict[str, SubmoduleMount] = {}
        gitlinks = {p: e for p, e in self.tree(rev).items() if e.is_gitlink}
        if not gitlinks:
            return mounts
        urls: dict[str, str] = {}
        modules = self.file_content(rev, ".gitmodules")
        if modules is not None:
            parser = configparser.ConfigParser()
            parser.read_string(modules.decode("utf-8", "replace"))
            for section in parser.sections():
                if parser.has_option(section, "path") and parser.has_option(section, "url"):
                    urls[parser.get(section, "path")] = parser.get(section, "url")
        for path, entry in gitlinks.items():
            mounts[path] = SubmoduleMount(path=path, url=urls.get(path), pointer=entry.sha)
        return mounts

    def resolve_submodule(self, path: str, rev: str) -> tuple[SubmoduleMount, str] | None:
        """Find the submodule mount containing `path`; (mount, path-within) or None."""
        mounts = self.submodule_mounts(rev)
        best: tuple[SubmoduleMount, str] | None = None
        for mount_path, mount in mounts.items():
            if path == mount_path or path.startswith(mount_path + "/"):
                if best is None or len(mount_path) > len(best[0].path):
                    inner = "" if path == mount_path else path[len(mount_path) + 1:]
                    best = (mount, inner)
        return best

    def submodule_repo(self, mount: SubmoduleMount) -> "GitRepo":
        """Open or clone the repository behind a submodule mount."""
        if mount.path in self._subrepos:
            return self._subrepos[mount.path]
        worktree = self.path / mount.path
        if (worktree / ".git").exists():
            repo = GitRepo(worktree, scratch_dir=self._scratch_dir)
        else:
            if not mount.url:
                raise PrivateSubmodule(
                    f"submodule at {mount.path} has no .gitmodules url")
            url = self._resolve_submodule_url(mount.url)
            dest = self._scratch_path("sub-" + hashlib.sha1(url.encode()).hexdigest()[:12])
            try:
                repo = clone_repository(url, dest, allow_local=True)
            except CloneFailed as exc:
                raise PrivateSubmodule(
                    f"cannot clone submodule {mount.path} from {url}: {exc}") from exc
        self._subrepos[mount.path] = repo
        return repo

    def _resolve_submodule_url(self, url: str) -> str:
        if url.startswith("./") or url.startswith("../"):
            base = self.remote_url() or str(self.path)
            return str((Path(base.rstrip("/")) / url).resolve()) \
                if "//" not in base else base.rstrip("/") + "/" + url
        return url

    def remote_url(self) -> str | None:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "remote", "get-url", "origin"],
            capture_output=True)
        if proc.returncode != 0:
            return None
        return proc.stdout.decode("utf-8").strip() or None

    def _scratch_path(self, name: str) -> Path:
        if self._scratch_dir is None:
            self._scratch_dir = Path(tempfile.mkdtemp(prefix="depaudit-"))
        self._scratch_dir.mkdir(parents=True, exist_ok=True)
        return self._scratch_dir / name


def clone_repository(url: str, dest: str | Path, allow_local: bool = False) -> GitRepo:
    """Full-history clone with tags; submodules resolved lazily on access."""
    dest = Path(dest)
    if dest.exists() and (dest / ".git").exists():
        return GitRepo(dest, scratch_dir=dest.parent)
    args = ["clone", "--quiet", url, str(dest)]
    if allow_local:
        # newer git refuses file-protocol submodule clones without this
        args = ["-c", "protocol.file.allow=always", *args]
    proc = subprocess.run(["git", *args], capture_output=True)
    if proc.returncode != 0:
        raise CloneFailed(
            f"cannot clone {url}: {proc.stderr.decode('utf-8', 'replace').strip()}")
    return GitRepo(dest, scratch_dir=dest.parent)


def open_repository(path: str | Path, scratch_dir: str | Path | None = None) -> GitRepo:
    """Open an existing local clone in place (offline fixture mode)."""
    try:
        return GitRepo(path, scratch_dir=scratch_dir)
    except GitError as exc:
        raise CloneFailed(str(exc)) from exc
