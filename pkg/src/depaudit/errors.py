"""Exception hierarchy and the failure reason codes surfaced in audit reports."""

# Reason codes a failed audit report may carry.
REASON_CODES = (
    "no-release-tag",
    "repository-not-found-or-invalid",
    "not-github-hosted",
    "non-unicode-file",
    "private-submodule",
    "version-not-in-registry",
    "other",
)


class AuditError(Exception):
    """Base class for every failure the audit pipeline can surface."""

    reason_code = "other"


# --- registry client ---------------------------------------------------------

class VersionNotInRegistry(AuditError):
    reason_code = "version-not-in-registry"


class ArchiveCorrupt(AuditError):
    pass


class NonUnicodePathEntry(AuditError):
    reason_code = "non-unicode-file"


class BinaryFile(AuditError):
    """Raised when a line diff is requested for non-text content."""


# --- git gateway -------------------------------------------------------------

class GitError(AuditError):
    """A git invocation failed in a way no more specific error covers."""


class CloneFailed(AuditError):
    reason_code = "repository-not-found-or-invalid"


class PrivateSubmodule(AuditError):
    reason_code = "private-submodule"


class PathAbsentAtCommit(AuditError):
    pass


class NoCommonAncestor(AuditError):
    pass


# --- repository locator ------------------------------------------------------

class NoRepositoryListed(AuditError):
    reason_code = "repository-not-found-or-invalid"


class NotGitHubHosted(AuditError):
    reason_code = "not-github-hosted"


class DirectoryNotFound(AuditError):
    reason_code = "repository-not-found-or-invalid"


class AmbiguousDirectory(AuditError):
    reason_code = "repository-not-found-or-invalid"


class SymlinkEscapesRepository(AuditError):
    pass


# --- release resolver --------------------------------------------------------

class NoReleaseTag(AuditError):
    reason_code = "no-release-tag"


class AmbiguousReleaseTag(AuditError):
    # The repository "does not contain a single tag" matching the version.
    reason_code = "no-release-tag"


# --- review checker ----------------------------------------------------------

class ProviderUnavailable(AuditError):
    pass


class RateLimited(AuditError):
    pass


# --- metrics -----------------------------------------------------------------

class MissingVerdict(AuditError):
    pass


class EmptyBatch(AuditError):
    pass


# --- cli ---------------------------------------------------------------------

class InputParseError(AuditError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
