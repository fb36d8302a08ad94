"""Classify delta commits as code-reviewed or not.

Four checks, applied in a fixed order with short-circuit: an approved pull
request review from someone other than the opener; a pull request opened and
merged by different accounts; a commit authored and committed by different
accounts; evidence of a third-party review tool (Gerrit trailers or Prow
labels). Bot-to-bot pairs never count, but a bot-opened pull request merged by
a human does.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .errors import ProviderUnavailable, RateLimited

CHECK_GITHUB_REVIEW = "github-review"
CHECK_DIFFERENT_MERGER = "different-merger"
CHECK_DIFFERENT_COMMITTER = "different-committer"
CHECK_THIRD_PARTY_TOOL = "third-party-tool"

CHECK_ORDER = (CHECK_GITHUB_REVIEW, CHECK_DIFFERENT_MERGER,
               CHECK_DIFFERENT_COMMITTER, CHECK_THIRD_PARTY_TOOL)

#: Committer identities owned by the hosting platform itself (web merges,
#: platform CI); a differing committer among these is no review evidence.
PLATFORM_COMMITTERS = frozenset({"web-flow", "GitHub", "github-actions[bot]"})

#: Prow approval labels; every listed label must be present on the PR.
DEFAULT_PROW_LABELS = frozenset({"lgtm", "approved"})

GERRIT_TRAILERS = ("Reviewed-on:", "Reviewed-by:")


@dataclass(frozen=True)
class PullRequestInfo:
    number: int
    opener_login: str | None
    merger_login: str | None
    merged: bool
    labels: frozenset[str] = frozenset()
    reviews: tuple[tuple[str, str], ...] = ()
    commits_in_pr: tuple[str, ...] = ()


@dataclass(frozen=True)
class ReviewProviderRecord:
    commit: str
    author_login: str | None = None
    committer_login: str | None = None
    commit_message: str = ""
    associated_pull_requests: tuple[PullRequestInfo, ...] = ()
    account_kinds: dict = field(default_factory=dict)

    def is_bot(self, login: str | None) -> bool:
        if login is None:
            return False
        kind = self.account_kinds.get(login)
        if kind is not None:
            return kind == "bot"
        return login.endswith("[bot]")


@dataclass(frozen=True)
class CommitReviewVerdict:
    commit: str
    reviewed: bool
    satisfied_check: str | None
    evidence: str | None


def check_github_review(record: ReviewProviderRecord) -> str | None:
    """Evidence string if some merged PR has an approval from a non-opener."""
    for pr in record.associated_pull_requests:
        if not pr.merged:
            continue
        for reviewer, state in pr.reviews:
            if state.lower() != "approved":
                continue
            if reviewer and reviewer != pr.opener_login:
                return f"PR #{pr.number} approved by {reviewer}"
    return None


def check_different_merger(record: ReviewProviderRecord) -> str | None:
    """Evidence string if some merged PR was opened and merged by different
    accounts; a pair of bots proves nothing, a bot PR merged by a human does."""
    for pr in record.associated_pull_requests:
        if not pr.merged or not pr.opener_login or not pr.merger_login:
            continue
        if pr.opener_login == pr.merger_login:
            continue
        if record.is_bot(pr.opener_login) and record.is_bot(pr.merger_login):
            continue
        return f"PR #{pr.number} opened by {pr.opener_login}, merged by {pr.merger_login}"
    return None


def check_different_committer(record: ReviewProviderRecord) -> str | None:
    """Evidence string if the commit's author and committer differ, excluding
    platform-owned committer identities and bot-bot pairs."""
    author, committer = record.author_login, record.committer_login
    if not author or not committer or author == committer:
        return None
    if committer in PLATFORM_COMMITTERS:
        return None
    if record.is_bot(author) and record.is_bot(committer):
        return None
    return f"authored by {author}, committed by {committer}"


def check_third_party_tools(record: ReviewProviderRecord,
                            prow_labels: frozenset[str] = DEFAULT_PROW_LABELS) -> str | None:
    """Evidence string for Gerrit commit-message trailers or Prow PR labels."""
    if all(trailer in record.commit_message for trailer in GERRIT_TRAILERS):
        return "Gerrit Reviewed-on/Reviewed-by trailers in commit message"
    for pr in record.associated_pull_requests:
        if prow_labels and prow_labels <= pr.labels:
            return f"PR #{pr.number} carries Prow labels {sorted(prow_labels)}"
    return None


class ReviewProvider(Protocol):
    def record_for(self, commit: str) -> ReviewProviderRecord | None:
        ...  # pragma: no cover


def classify_commit(commit: str, provider: ReviewProvider,
                    prow_labels: frozenset[str] = DEFAULT_PROW_LABELS) -> CommitReviewVerdict:
    """Run the four checks in order; the first satisfied one decides."""
    record = provider.record_for(commit)
    if record is None:
        raise ProviderUnavailable(f"no review record available for {commit}")
    checks = (
        (CHECK_GITHUB_REVIEW, lambda: check_github_review(record)),
        (CHECK_DIFFERENT_MERGER, lambda: check_different_merger(record)),
        (CHECK_DIFFERENT_COMMITTER, lambda: check_different_committer(record)),
        (CHECK_THIRD_PARTY_TOOL,
         lambda: check_third_party_tools(record, prow_labels)),
    )
    for name, run in checks:
        evidence = run()
        if evidence is not None:
            return CommitReviewVerdict(commit, True, name, evidence)
    return CommitReviewVerdict(commit, False, None, None)


def classify_commits(commits: Iterable[str], provider: ReviewProvider,
                     prow_labels: frozenset[str] = DEFAULT_PROW_LABELS
                     ) -> dict[str, CommitReviewVerdict]:
    return {c: classify_commit(c, provider, prow_labels) for c in sorted(set(commits))}


class FixtureReviewProvider:
    """Offline review metadata from a JSON file keyed by commit hash.

    Schema::

        {"default": "unreviewed",
         "commits": {"<40-hex sha>": {
             "author_login": "alice",
             "committer_login": "bob",
             "commit_message": "...",
             "account_kinds": {"alice": "human", "dependabot[bot]": "bot"},
             "pull_requests": [{
                 "number": 7, "opener_login": "alice", "merger_login": "bob",
                 "merged": true, "labels": ["lgtm", "approved"],
                 "reviews": [["carol", "APPROVED"]],
                 "commits_in_pr": ["<sha>"]}]}}}

    With "default": "unreviewed", commits missing from the file get an empty
    record (all four checks fail); without it, a missing commit is an error.
    """

    def __init__(self, fixture_file: str | Path):
        data = json.loads(Path(fixture_file).read_text(encoding="utf-8"))
        self._records: dict[str, dict] = data.get("commits", {})
        self._default_unreviewed = data.get("default") == "unreviewed"

    def record_for(self, commit: str) -> ReviewProviderRecord | None:
        raw = self._records.get(commit)
        if raw is None:
            if self._default_unreviewed:
                return ReviewProviderRecord(commit=commit)
            return None
        prs = tuple(
            PullRequestInfo(
                number=int(pr.get("number", 0)),
                opener_login=pr.get("opener_login"),
                merger_login=pr.get("merger_login"),
                merged=bool(pr.get("merged", False)),
                labels=frozenset(pr.get("labels", [])),
                reviews=tuple((r[0], r[1]) for r in pr.get("reviews", [])),
                commits_in_pr=tuple(pr.get("commits_in_pr", [])),
            )
            for pr in raw.get("pull_requests", []))
        return ReviewProviderRecord(
            commit=commit,
            author_login=raw.get("author_login"),
            committer_login=raw.get("committer_login"),
            commit_message=raw.get("commit_message", ""),
            associated_pull_requests=prs,
            account_kinds=dict(raw.get("account_kinds", {})),
        )


class GitHubReviewProvider:
    """Live review metadata from the GitHub REST API, cached on disk per commit.

    The token comes from the GITHUB_TOKEN environment variable (never a CLI
    flag); the hourly rate budget is honored by sleeping until reset when the
    remaining quota runs out.
    """

    def __init__(self, owner: str, name: str, cache_dir: str | Path | None = None,
                 session=None, token: str | None = None):
        if session is None:
            import requests

            session = requests.Session()
        self.session = session
        self.owner, self.name = owner, name
        self.cache_dir = Path(cache_dir) if cache_dir else None
        token = token or os.environ.get("GITHUB_TOKEN")
        self._headers = {"Accept": "application/vnd.github+json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"

    def record_for(self, commit: str) -> ReviewProviderRecord | None:
        cached = self._cache_read(commit)
        if cached is not None:
            return self._parse(commit, cached)
        raw = self._fetch(commit)
        self._cache_write(commit, raw)
        return self._parse(commit, raw)

    # -- caching -----------------------------------------------------------

    def _cache_path(self, commit: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / "review" / self.owner / self.name / f"{commit}.json"

    def _cache_read(self, commit: str) -> dict | None:
        path = self._cache_path(commit)
        if path is None or not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _cache_write(self, commit: str, raw: dict) -> None:
        path = self._cache_path(commit)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(raw, sort_keys=True), encoding="utf-8")

    # -- REST plumbing -----------------------------------------------------

    def _get(self, url: str) -> dict | list:
        for attempt in range(3):
            resp = self.session.get(url, headers=self._headers)
            if resp.status_code == 403 and resp.headers.get("X-RateLimit-Remaining") == "0":
                reset = int(resp.headers.get("X-RateLimit-Reset", "0"))
                wait = max(reset - time.time(), 1)
                if wait > 3600:
                    raise RateLimited(f"rate limit reset is {wait:.0f}s away")
                time.sleep(wait)
                continue
            if resp.status_code == 404:
                raise ProviderUnavailable(f"GitHub returned 404 for {url}")
            resp.raise_for_status()
            return resp.json()
        raise RateLimited(f"still rate-limited after retries: {url}")

    def _fetch(self, commit: str) -> dict:
        base = f"https://api.github.com/repos/{self.owner}/{self.name}"
        commit_obj = self._get(f"{base}/commits/{commit}")
        pulls = self._get(f"{base}/commits/{commit}/pulls")
        kinds: dict[str, str] = {}

        def note(user: dict | None) -> str | None:
            if not user or not user.get("login"):
                return None
            kinds[user["login"]] = "bot" if user.get("type") == "Bot" else "human"
            return user["login"]

        prs = []
        for pr in pulls:
            reviews = self._get(f"{base}/pulls/{pr['number']}/reviews")
            prs.append({
                "number": pr["number"],
                "opener_login": note(pr.get("user")),
                "merger_login": note(pr.get("merged_by")),
                "merged": bool(pr.get("merged_at")),
                "labels": [lb["name"] for lb in pr.get("labels", [])],
                "reviews": [[note(r.get("user")) or "", r.get("state", "")]
                            for r in reviews],
            })
        return {
            "author_login": note(commit_obj.get("author")),
            "committer_login": note(commit_obj.get("committer")),
            "commit_message": (commit_obj.get("commit") or {}).get("message", ""),
            "pull_requests": prs,
            "account_kinds": kinds,
        }

    def _parse(self, commit: str, raw: dict) -> ReviewProviderRecord:
        prs = tuple(
            PullRequestInfo(
                number=int(pr.get("number", 0)),
                opener_login=pr.get("opener_login"),
                merger_login=pr.get("merger_login"),
                merged=bool(pr.get("merged", False)),
                labels=frozenset(pr.get("labels", [])),
                reviews=tuple((r[0], r[1]) for r in pr.get("reviews", [])),
            )
            for pr in raw.get("pull_requests", []))
        return ReviewProviderRecord(
            commit=commit,
            author_login=raw.get("author_login"),
            committer_login=raw.get("committer_login"),
            commit_message=raw.get("commit_message", ""),
            associated_pull_requests=prs,
            account_kinds=dict(raw.get("account_kinds", {})),
        )
