"""Shared test plumbing: scripted git repositories, archive packers, offline
fixture writers, a randomized project generator, and an independent replay
oracle for line-to-commit attribution.

The oracle side deliberately avoids the package's own git wrappers: trees are
read with `git archive`, diffs are recomputed with difflib, and line counts
with collections.Counter, so the implementation is checked against independent
machinery.
"""

from __future__ import annotations

import difflib
import gzip
import io
import json
import os
import random
import subprocess
import tarfile
import zipfile
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from depaudit.pipeline import AuditOptions
from depaudit.registry import Registry, UpdateCoordinates

EPOCH = 1_600_000_000


class RepoBuilder:
    """Scripted git repository with deterministic identities and dates."""

    def __init__(self, path: Path, default_branch: str = "main"):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._clock = EPOCH
        self.run("init", "-q", "-b", default_branch)
        self.run("config", "user.name", "Alice Dev")
        self.run("config", "user.email", "alice@example.com")
        self.run("config", "commit.gpgsign", "false")
        self.run("config", "tag.gpgsign", "false")

    def run(self, *args: str, env: dict | None = None) -> bytes:
        merged = {**os.environ, "GIT_TERMINAL_PROMPT": "0"}
        if env:
            merged.update(env)
        proc = subprocess.run(["git", "-C", str(self.path), *args],
                              capture_output=True, env=merged)
        if proc.returncode != 0:
            raise RuntimeError(
                f"git {' '.join(args)} failed: {proc.stderr.decode('utf-8', 'replace')}")
        return proc.stdout

    # -- worktree edits ----------------------------------------------------

    def write(self, rel: str, content: str | bytes) -> None:
        target = self.path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8") if isinstance(content, str) else content
        target.write_bytes(data)

    def remove(self, rel: str) -> None:
        (self.path / rel).unlink()

    def move(self, src: str, dst: str) -> None:
        target = self.path / dst
        target.parent.mkdir(parents=True, exist_ok=True)
        (self.path / src).rename(target)

    def symlink(self, rel: str, target: str) -> None:
        link = self.path / rel
        link.parent.mkdir(parents=True, exist_ok=True)
        if link.is_symlink() or link.exists():
            link.unlink()
        link.symlink_to(target)

    # -- history -----------------------------------------------------------

    def _identity_env(self, author: tuple[str, str] | None,
                      committer: tuple[str, str] | None) -> dict:
        self._clock += 60
        a_name, a_email = author or ("Alice Dev", "alice@example.com")
        c_name, c_email = committer or (a_name, a_email)
        stamp = f"{self._clock} +0000"
        return {
            "GIT_AUTHOR_NAME": a_name, "GIT_AUTHOR_EMAIL": a_email,
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_NAME": c_name, "GIT_COMMITTER_EMAIL": c_email,
            "GIT_COMMITTER_DATE": stamp,
        }

    def commit(self, message: str = "change",
               author: tuple[str, str] | None = None,
               committer: tuple[str, str] | None = None) -> str:
        env = self._identity_env(author, committer)
        self.run("add", "-A", env=env)
        self.run("commit", "-q", "--allow-empty", "-m", message, env=env)
        return self.rev()

    def tag(self, name: str, at: str | None = None, annotate: bool = False) -> None:
        env = self._identity_env(None, None)
        args = ["tag"]
        if annotate:
            args += ["-a", "-m", f"release {name}"]
        args.append(name)
        if at:
            args.append(at)
        self.run(*args, env=env)

    def branch(self, name: str, at: str | None = None) -> None:
        self.run("branch", name, *([at] if at else []))

    def checkout(self, ref: str) -> None:
        self.run("checkout", "-q", ref)

    def merge(self, ref: str, message: str = "merge",
              author: tuple[str, str] | None = None,
              committer: tuple[str, str] | None = None) -> str:
        env = self._identity_env(author, committer)
        self.run("merge", "-q", "--no-ff", "--no-edit", "-m", message, ref, env=env)
        return self.rev()

    def rev(self, ref: str = "HEAD") -> str:
        return self.run("rev-parse", ref).decode("ascii").strip()

    def add_submodule(self, url: str, mount: str) -> None:
        env = self._identity_env(None, None)
        self.run("-c", "protocol.file.allow=always", "submodule", "add", "-q",
                 url, mount, env=env)

    def move_submodule_pointer(self, mount: str, sha: str) -> None:
        sub = self.path / mount
        subprocess.run(["git", "-C", str(sub), "fetch", "-q", "origin"],
                       capture_output=True, check=True)
        subprocess.run(["git", "-C", str(sub), "checkout", "-q", sha],
                       capture_output=True, check=True)
        self.run("add", mount)

    # -- oracle-side reads -------------------------------------------------

    def tree(self, rev: str, prefix: str = "") -> dict[str, bytes]:
        """File map at a revision via `git archive` (independent of the
        package's own tree walker). Symlinks and gitlinks are skipped."""
        args = ["archive", "--format=tar", rev]
        if prefix:
            args.append(prefix)
        data = self.run(*args)
        out: dict[str, bytes] = {}
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:") as tar:
            for member in tar:
                if not member.isfile():
                    continue
                name = member.name
                if prefix:
                    if not name.startswith(prefix.rstrip("/") + "/"):
                        continue
                    name = name[len(prefix.rstrip("/")) + 1:]
                fileobj = tar.extractfile(member)
                out[name] = fileobj.read() if fileobj else b""
        return out

    def file_at(self, rev: str, path: str) -> bytes | None:
        proc = subprocess.run(
            ["git", "-C", str(self.path), "show", f"{rev}:{path}"],
            capture_output=True)
        return proc.stdout if proc.returncode == 0 else None


# -- archive packers -------------------------------------------------------

def _pack_tar_gz(tree: dict[str, bytes], root: str | None) -> bytes:
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tar:
        for path in sorted(tree):
            name = f"{root}/{path}" if root else path
            info = tarfile.TarInfo(name=name)
            info.size = len(tree[path])
            info.mtime = EPOCH
            tar.addfile(info, io.BytesIO(tree[path]))
    return buf.getvalue()


def pack_crate(tree: dict[str, bytes], package: str, version: str) -> bytes:
    return _pack_tar_gz(tree, f"{package}-{version}")


def pack_npm_tgz(tree: dict[str, bytes]) -> bytes:
    return _pack_tar_gz(tree, "package")


def pack_sdist(tree: dict[str, bytes], package: str, version: str) -> bytes:
    return _pack_tar_gz(tree, f"{package}-{version}")


def pack_wheel(tree: dict[str, bytes], package: str, version: str) -> bytes:
    buf = io.BytesIO()
    dist_info = f"{package}-{version}.dist-info"
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for path in sorted(tree):
            zf.writestr(path, tree[path])
        zf.writestr(f"{dist_info}/METADATA",
                    f"Metadata-Version: 2.1\nName: {package}\nVersion: {version}\n")
        zf.writestr(f"{dist_info}/WHEEL", "Wheel-Version: 1.0\n")
        zf.writestr(f"{dist_info}/RECORD", "")
    return buf.getvalue()


def pack_gem(tree: dict[str, bytes]) -> bytes:
    data_tar_gz = _pack_tar_gz(tree, None)
    metadata_gz = gzip.compress(b"--- !ruby/object:Gem::Specification\n")
    checksums_gz = gzip.compress(b"---\nSHA256:\n")
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:") as tar:
        for name, payload in (("metadata.gz", metadata_gz),
                              ("data.tar.gz", data_tar_gz),
                              ("checksums.yaml.gz", checksums_gz)):
            info = tarfile.TarInfo(name=name)
            info.size = len(payload)
            info.mtime = EPOCH
            tar.addfile(info, io.BytesIO(payload))
    return buf.getvalue()


def pack_for(registry: Registry, tree: dict[str, bytes], package: str,
             version: str, kind: str | None = None) -> tuple[bytes, str]:
    """Pack a tree in the registry's native format; returns (bytes, kind)."""
    if registry is Registry.CRATES_IO:
        return pack_crate(tree, package, version), "crate"
    if registry is Registry.NPM:
        return pack_npm_tgz(tree), "npm-tgz"
    if registry is Registry.RUBYGEMS:
        return pack_gem(tree), "gem"
    if kind == "sdist":
        return pack_sdist(tree, package, version), "sdist"
    return pack_wheel(tree, package, version), "wheel"


# -- offline fixture writers ----------------------------------------------

class FixtureStore:
    """On-disk registry fixture: archives plus index.json."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._entries: list[dict] = []
        self._counter = 0

    def add(self, registry: Registry, package: str, version: str,
            data: bytes, kind: str) -> None:
        self._counter += 1
        safe = package.replace("/", "_").replace("@", "_")
        filename = f"{registry.value}-{safe}-{version}-{self._counter}.bin"
        (self.directory / filename).write_bytes(data)
        self._entries.append({"registry": registry.value, "package": package,
                              "version": version, "file": filename, "kind": kind})
        self._write_index()

    def add_tree(self, registry: Registry, package: str, version: str,
                 tree: dict[str, bytes], kind: str | None = None) -> None:
        data, resolved = pack_for(registry, tree, package, version, kind)
        self.add(registry, package, version, data, resolved)

    def _write_index(self) -> None:
        (self.directory / "index.json").write_text(
            json.dumps({"artifacts": self._entries}, indent=1), encoding="utf-8")


class MetadataFixture:
    def __init__(self, path: Path):
        self.path = Path(path)
        self._packages: dict[str, dict] = {}
        self._flush()

    def add(self, registry: Registry, package: str, repository: str | None,
            clone_path: str | Path | None = None) -> None:
        entry: dict = {}
        if repository is not None:
            entry["repository"] = repository
        if clone_path is not None:
            entry["clone_path"] = str(clone_path)
        self._packages[f"{registry.value}/{package}"] = entry
        self._flush()

    def _flush(self) -> None:
        self.path.write_text(json.dumps({"packages": self._packages}, indent=1),
                             encoding="utf-8")


class ReviewFixture:
    def __init__(self, path: Path, default: str | None = "unreviewed"):
        self.path = Path(path)
        self._default = default
        self._commits: dict[str, dict] = {}
        self._flush()

    def add(self, sha: str, record: dict) -> None:
        self._commits[sha] = record
        self._flush()

    def _flush(self) -> None:
        payload: dict = {"commits": self._commits}
        if self._default:
            payload["default"] = self._default
        self.path.write_text(json.dumps(payload, indent=1), encoding="utf-8")


def approved_pr_record(number: int = 1, opener: str = "alice",
                       merger: str = "alice", reviewer: str = "bob") -> dict:
    """A commit record reviewed via an approved pull request."""
    return {
        "author_login": opener,
        "committer_login": opener,
        "pull_requests": [{
            "number": number, "opener_login": opener, "merger_login": merger,
            "merged": True, "labels": [],
            "reviews": [[reviewer, "APPROVED"]],
        }],
        "account_kinds": {opener: "human", merger: "human", reviewer: "human"},
    }


# -- composed offline audit environment ------------------------------------

@dataclass
class AuditEnv:
    coords: UpdateCoordinates
    options: AuditOptions
    repo: RepoBuilder
    store: FixtureStore
    metadata: MetadataFixture
    review: ReviewFixture
    tree_x: dict[str, bytes]
    tree_y: dict[str, bytes]


def make_env(tmp_path: Path, build, *,
             registry: Registry = Registry.CRATES_IO,
             package: str = "demo",
             v_from: str = "1.0.0", v_to: str = "1.1.0",
             package_dir: str = "",
             repo_url: str | None = None,
             mutate_x=None, mutate_y=None,
             reviews: dict[str, dict] | None = None,
             review_default: str | None = "unreviewed",
             pypi_kind: str | None = None) -> AuditEnv:
    """Build a repo via `build(repo)` (which must tag both versions), pack the
    tagged trees into registry archives, and wire up all offline fixtures."""
    repo = RepoBuilder(tmp_path / "repo")
    build(repo)
    tree_x = repo.tree(f"refs/tags/v{v_from}", prefix=package_dir)
    tree_y = repo.tree(f"refs/tags/v{v_to}", prefix=package_dir)
    if mutate_x:
        mutate_x(tree_x)
    if mutate_y:
        mutate_y(tree_y)

    store = FixtureStore(tmp_path / "store")
    store.add_tree(registry, package, v_from, tree_x, kind=pypi_kind)
    store.add_tree(registry, package, v_to, tree_y, kind=pypi_kind)

    metadata = MetadataFixture(tmp_path / "metadata.json")
    metadata.add(registry, package,
                 repo_url or f"https://github.com/acme/{package}",
                 clone_path=repo.path)

    review = ReviewFixture(tmp_path / "review.json", default=review_default)
    for sha, record in (reviews or {}).items():
        review.add(sha, record)

    coords = UpdateCoordinates(registry=registry, package=package,
                               current_version=v_from, update_version=v_to)
    options = AuditOptions(
        offline=True,
        registry_fixtures=store.directory,
        metadata_fixture=metadata.path,
        review_fixture=review.path,
        cache_dir=tmp_path / "cache",
    )
    return AuditEnv(coords=coords, options=options, repo=repo, store=store,
                    metadata=metadata, review=review,
                    tree_x=tree_x, tree_y=tree_y)


def artifact_pair(env: AuditEnv):
    """The two registry artifacts of an AuditEnv, built without unpacking."""
    from depaudit.registry import PackageVersion, RegistryArtifact

    coords = env.coords
    ax = RegistryArtifact(PackageVersion(coords.registry, coords.package,
                                         coords.current_version), env.tree_x)
    ay = RegistryArtifact(PackageVersion(coords.registry, coords.package,
                                         coords.update_version), env.tree_y)
    return ax, ay


def release_context(env: AuditEnv, package_dir: str = ""):
    from depaudit.gitrepo import GitRepo
    from depaudit.locate import RepoContext
    from depaudit.release import build_release_context, resolve_release_commit

    repo = GitRepo(env.repo.path)
    c_x = resolve_release_commit(repo, env.coords.package, env.coords.current_version)
    c_y = resolve_release_commit(repo, env.coords.package, env.coords.update_version)
    repo_ctx = RepoContext(repo_url="https://github.com/acme/demo", handle=repo,
                           package_directory=package_dir)
    return build_release_context(repo_ctx, c_x, c_y)


# -- independent oracles ---------------------------------------------------

def split_lines_oracle(content: bytes) -> list[bytes]:
    lines = content.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def registry_diff_count(tree_x: dict[str, bytes], tree_y: dict[str, bytes]) -> int:
    """Total added+removed line count between two file maps, as multisets."""
    total = 0
    for path in set(tree_x) | set(tree_y):
        a = Counter(split_lines_oracle(tree_x.get(path, b"")))
        b = Counter(split_lines_oracle(tree_y.get(path, b"")))
        total += sum((b - a).values()) + sum((a - b).values())
    return total


@dataclass
class _LineRecord:
    content: bytes
    origin: str | None      # commit that introduced it, None = present at c_a
    a_lineno: int | None    # 1-based position at c_a for original lines


def replay_delta_oracle(repo: RepoBuilder, c_a: str, chain: list[str],
                        paths: set[str]) -> tuple[dict, dict]:
    """Replay each commit in `chain` (children of c_a up to c_y, linear) and
    accumulate per-line add/remove events for the given repository paths.

    Returns (added, removed): {(path, content, lineno): commit}. Added line
    numbers are positions in the final file; removed ones positions at c_a.
    """
    for parent, child in zip([c_a, *chain], chain):
        actual = repo.run("rev-parse", f"{child}^").decode().strip()
        assert actual == parent, "oracle needs a linear first-parent chain"

    added: dict[tuple[str, bytes, int], str] = {}
    removed: dict[tuple[str, bytes, int], str] = {}
    for path in sorted(paths):
        base = repo.file_at(c_a, path)
        state = [
            _LineRecord(content=line, origin=None, a_lineno=i + 1)
            for i, line in enumerate(split_lines_oracle(base or b""))
        ]
        old_lines = [r.content for r in state]
        for commit in chain:
            new_content = repo.file_at(commit, path)
            new_lines = split_lines_oracle(new_content or b"")
            matcher = difflib.SequenceMatcher(a=old_lines, b=new_lines, autojunk=False)
            next_state: list[_LineRecord] = []
            for op, i1, i2, j1, j2 in matcher.get_opcodes():
                if op == "equal":
                    next_state.extend(state[i1:i2])
                    continue
                if op in ("delete", "replace"):
                    for record in state[i1:i2]:
                        if record.origin is None:
                            removed[(path, record.content, record.a_lineno)] = commit
                if op in ("insert", "replace"):
                    for line in new_lines[j1:j2]:
                        next_state.append(_LineRecord(line, commit, None))
            state = next_state
            old_lines = new_lines
        for index, record in enumerate(state, start=1):
            if record.origin is not None:
                added[(path, record.content, index)] = record.origin
    return added, removed


# -- randomized linear project generator -----------------------------------

class LineFactory:
    """Globally unique line contents so every diff algorithm agrees exactly."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.counter = 0

    def line(self) -> str:
        self.counter += 1
        return f"let v{self.counter} = {self.rng.randrange(16**8):08x};"


def build_random_linear_project(repo: RepoBuilder, rng: random.Random, *,
                                package: str = "demo",
                                package_dir: str = "",
                                v_from: str = "1.0.0", v_to: str = "1.1.0",
                                n_commits: int | None = None) -> None:
    """Random linear history: unique-content line edits, two tagged releases,
    no renames, no reverts, optional repo-only churn outside the package dir."""
    factory = LineFactory(rng)
    prefix = f"{package_dir}/" if package_dir else ""
    files: dict[str, list[str]] = {}

    def write_file(rel: str) -> None:
        repo.write(prefix + rel, "\n".join(files[rel]) + "\n")

    manifest = f"[package]\nname = \"{package}\"\nversion = \"{v_from}\"\n"
    repo.write(prefix + "Cargo.toml", manifest)
    for i in range(rng.randint(1, 3)):
        rel = f"src/file{i}.rs"
        files[rel] = [factory.line() for _ in range(rng.randint(1, 15))]
        write_file(rel)
    if package_dir:
        repo.write("ci.yml", "workflow: initial\n")
    repo.commit("initial layout")

    total = n_commits if n_commits is not None else rng.randint(5, 50)
    tag_at = rng.randint(1, max(1, total // 3))
    file_counter = len(files)
    for step in range(1, total + 1):
        for _ in range(rng.randint(1, 2)):
            op = rng.random()
            names = sorted(files)
            if op < 0.2 or not names:
                rel = f"src/file{file_counter}.rs"
                file_counter += 1
                files[rel] = [factory.line() for _ in range(rng.randint(1, 10))]
                write_file(rel)
            elif op < 0.55:
                rel = rng.choice(names)
                at = rng.randint(0, len(files[rel]))
                files[rel][at:at] = [factory.line() for _ in range(rng.randint(1, 4))]
                write_file(rel)
            elif op < 0.8:
                rel = rng.choice(names)
                if files[rel]:
                    files[rel][rng.randrange(len(files[rel]))] = factory.line()
                    write_file(rel)
            elif op < 0.93:
                rel = rng.choice(names)
                if len(files[rel]) > 1:
                    del files[rel][rng.randrange(len(files[rel]))]
                    write_file(rel)
            elif len(names) > 1:
                rel = rng.choice(names)
                del files[rel]
                repo.remove(prefix + rel)
        if package_dir and rng.random() < 0.2:
            repo.write("ci.yml", f"workflow: rev {step} {factory.line()}\n")
        if step == tag_at:
            repo.write(prefix + "Cargo.toml",
                       manifest.replace(v_from, v_from, 1))
            repo.commit(f"step {step}")
            repo.tag(f"v{v_from}")
        else:
            repo.commit(f"step {step}")
    repo.write(prefix + "Cargo.toml",
               f"[package]\nname = \"{package}\"\nversion = \"{v_to}\"\n")
    repo.commit("bump version")
    repo.tag(f"v{v_to}")
