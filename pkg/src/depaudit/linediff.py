"""Position-insensitive line diffs over raw byte content.

Added/removed lines are reported as multisets of line contents rather than
positioned hunks, so that subtracting one diff from another is well defined
regardless of hunk offsets. Bytes are compared exactly; no whitespace or
encoding normalization is applied.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field


def split_lines(content: bytes) -> list[bytes]:
    """Split byte content into lines without their trailing newline.

    A final trailing newline does not produce an empty last line, matching
    how git counts lines for blame: b"a\\nb\\n" and b"a\\nb" are both two
    lines, b"" is zero lines, b"\\n" is one empty line.
    """
    if not content:
        return []
    lines = content.split(b"\n")
    if lines[-1] == b"":
        lines.pop()
    return lines


def is_text(content: bytes) -> bool:
    """True when the content is valid UTF-8 (the text/binary split)."""
    try:
        content.decode("utf-8")
    except UnicodeDecodeError:
        return False
    return True


@dataclass(frozen=True)
class LineDiff:
    """Lines added and removed between two contents, as content multisets."""

    added: Counter = field(default_factory=Counter)
    removed: Counter = field(default_factory=Counter)

    def is_empty(self) -> bool:
        return not self.added and not self.removed

    @property
    def added_count(self) -> int:
        return sum(self.added.values())

    @property
    def removed_count(self) -> int:
        return sum(self.removed.values())

    @property
    def total(self) -> int:
        return self.added_count + self.removed_count

    def subtract(self, other: "LineDiff") -> "LineDiff":
        """Multiset difference per side (counts never go negative)."""
        return LineDiff(added=self.added - other.added,
                        removed=self.removed - other.removed)


def diff_lines(a: bytes, b: bytes) -> LineDiff:
    """Diff two byte contents into added/removed line multisets.

    Lines common to both sides (counted with multiplicity) are matched away;
    the result is symmetric under swapping the arguments: added(a, b) equals
    removed(b, a) as multisets.
    """
    count_a = Counter(split_lines(a))
    count_b = Counter(split_lines(b))
    return LineDiff(added=count_b - count_a, removed=count_a - count_b)
