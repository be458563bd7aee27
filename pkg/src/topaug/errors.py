"""Exception hierarchy shared across the toolkit.

Two branches matter for exit-code mapping in the CLI: DataError (bad or
inconsistent input data, exit 1) and RemoteError (an inference service could
not be reached or misbehaved, exit 3).
"""


class ToolkitError(Exception):
    pass


class DataError(ToolkitError):
    pass


class ParseError(DataError):
    """Base for malformed TOP-format parse strings."""


class UnbalancedBrackets(ParseError):
    pass


class EmptyTree(ParseError):
    pass


class RootNotIntent(ParseError):
    pass


class BadLabel(ParseError):
    pass


class BadToken(ParseError):
    pass


class InvalidNesting(ParseError):
    pass


class SlotWithoutTokens(ParseError):
    pass


class AlignmentFailed(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptyReference(DataError):
    pass


class EmptyManifest(DataError):
    pass


class MissingColumn(DataError):
    pass


class MalformedParse(DataError):
    pass


class MalformedRecord(DataError):
    pass


class DuplicateId(DataError):
    pass


class NoProposal(DataError):
    """A proposer could not produce a token for a masked position."""


class RemoteError(ToolkitError):
    pass


class ProposerUnavailable(RemoteError):
    pass


class OracleUnavailable(RemoteError):
    pass


class UsageError(ToolkitError):
    """Bad command-line or config usage (exit 2)."""
